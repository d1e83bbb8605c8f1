//! Taxiing scenario: prior construction, barrier indicator, posterior,
//! operational risk update and drift, checked against reference figures and
//! independent oracles.

use chrono::{TimeZone, Utc};
use dynassure_core::architecture::{propagate_risk, PointValues, RiskLevel, SafetyArchitecture};
use dynassure_core::bayes::{likelihood, posterior, prior_from_dev_metrics, BetaDist, BinomialObservation};
use dynassure_core::ingest::{parse_csv_run, LifetimeStore};
use dynassure_core::riskdyn::{assess_drift, derive_barrier_si, revise_risk, DriftConfig, DriftVerdict, RrReference};
use dynassure_core::smb::{list_statuses, Smb, StatusRow, Verdict};

use super::{fixture, Check};

/// Fails the enclosing check with a formatted message.
macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        match $cond {
            true => {}
            false => return Err(format!($($msg)+)),
        }
    };
}

fn load() -> Result<(SafetyArchitecture, Smb, LifetimeStore), String> {
    let arch = SafetyArchitecture::load(fixture("architecture.json")).map_err(|e| e.to_string())?;
    let smb = Smb::load(fixture("smb.json")).map_err(|e| e.to_string())?;
    let mut store = LifetimeStore::new(smb.measure_ids());
    let csv = std::fs::read_to_string(fixture("first-run.csv")).map_err(|e| e.to_string())?;
    let run = parse_csv_run(&csv, "first", Utc::now()).map_err(|e| e.to_string())?;
    store.ingest(run).map_err(|e| e.to_string())?;
    Ok((arch, smb, store))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Beta moments straight from the definition.
fn beta_moments(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (a / s, a * b / (s * s * (s + 1.0)))
}

/// Prior barrier integrity from development counts.
pub fn prior_from_counts() -> Check {
    let started = std::time::Instant::now();
    let prior = prior_from_dev_metrics(24, 8).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    ensure!((prior.alpha(), prior.beta()) == (24.0, 8.0), "prior Beta({}, {})", prior.alpha(), prior.beta());
    ensure!(prior.mean() == 0.75, "mean {}", prior.mean());
    ensure!((prior.variance() - 0.0057).abs() < 1e-4, "variance {}", prior.variance());
    let (m, v) = beta_moments(24.0, 8.0);
    ensure!(prior.mean() == m && (prior.variance() - v).abs() < 1e-15, "moments disagree with the definition");
    ensure!(elapsed.as_secs_f64() < 1e-3, "took {elapsed:?}");
    Ok(())
}

/// Scenario-specific indicator derived from the prior.
pub fn barrier_indicator() -> Check {
    let si = derive_barrier_si(&BetaDist::new(24.0, 8.0).unwrap(), 10).map_err(|e| e.to_string())?;
    ensure!((si.lower_bound - 0.8254).abs() < 5e-4, "bound {}", si.lower_bound);
    ensure!((si.exposure, si.threshold) == (10, 2), "y = {} over n = {}", si.threshold, si.exposure);
    // oracle: the most successes not exceeding n * (mu + sd) set the bar;
    // the remaining demands are the tolerated failures
    let (m, v) = beta_moments(24.0, 8.0);
    let bound = m + v.sqrt();
    let required = (0..=10u64).rev().find(|s| *s as f64 <= 10.0 * bound).unwrap();
    ensure!(required == 8 && si.threshold == 10 - required, "oracle requires {required} successes");
    Ok(())
}

/// Posterior integrity after the first operational run.
pub fn posterior_update() -> Check {
    let prior = BetaDist::new(24.0, 8.0).unwrap();
    let obs = BinomialObservation::new(6, 4);
    let post = posterior(&prior, &obs);
    ensure!((post.alpha(), post.beta()) == (30.0, 12.0), "posterior Beta({}, {})", post.alpha(), post.beta());
    ensure!((post.mean() - 0.7143).abs() < 1e-4, "mean {}", post.mean());
    ensure!((post.variance() - 0.0047).abs() < 1e-4, "variance {}", post.variance());
    // likelihood C(10,4) p^6 (1-p)^4 at the posterior mean
    let p = post.mean();
    let expected = 210.0 * p.powi(6) * (1.0 - p).powi(4);
    let got = likelihood(p, &obs).map_err(|e| e.to_string())?;
    ensure!(rel(got, expected) < 1e-12, "likelihood {got} vs {expected}");
    Ok(())
}

/// Recovers the barrier integrities from the reference risk figures.
///
/// Unknowns: x = (1-b1)(1-b2), y = 1-b3, z = 1-b5, with E1 = 0.05, prior
/// E2 = 0.05 and B4 = 0.75, posterior E2 = 14/210 and B4 = 30/42.
/// The relaxed-B5 case shares the same front part, so its ratio to the
/// posterior case isolates z; the prior and posterior equations are then
/// linear in x and y.
pub fn solve_barrier_set() -> (f64, f64, f64) {
    let (prior_e4, post_e4, relaxed_e4, relaxed_breach) = (1.5998e-5, 2.386e-5, 2.4e-4, 1.0 - 0.96);
    let z = relaxed_breach * post_e4 / relaxed_e4;
    let (e2_post, b4_post) = (14.0 / 210.0, 30.0 / 42.0);
    // 0.05 x + 0.05 * 0.25 y = prior / z
    // 0.05 x + e2_post (1 - b4_post) y = post / z
    let (a1, c1) = (0.05 * 0.25, prior_e4 / z);
    let (a2, c2) = (e2_post * (1.0 - b4_post), post_e4 / z);
    let y = (c2 - c1) / (a2 - a1);
    let x = (c1 - a1 * y) / 0.05;
    (x, y, z)
}

/// The fixture's barrier set agrees with the solver oracle.
pub fn barrier_set() -> Check {
    let (x, y, z) = solve_barrier_set();
    let arch = SafetyArchitecture::load(fixture("architecture.json")).map_err(|e| e.to_string())?;
    let v = arch.point_values().map_err(|e| e.to_string())?;
    ensure!(((1.0 - v["B5"]) - z).abs() < 1e-4, "1-b5 = {z}");
    ensure!(((1.0 - v["B3"]) - y).abs() < 5e-3, "1-b3 = {y}");
    ensure!((((1.0 - v["B1"]) * (1.0 - v["B2"])) - x).abs() < 2e-4, "(1-b1)(1-b2) = {x}");
    ensure!(
        (v["B1"], v["B2"], v["B3"], v["B5"]) == (0.95, 0.90, 0.70, 0.996),
        "fixture barrier set {:?}",
        (v["B1"], v["B2"], v["B3"], v["B5"])
    );
    Ok(())
}

/// Operational risk update after the first run.
pub fn risk_update() -> Check {
    barrier_set()?;
    let (arch, smb, store) = load()?;
    let values = arch.point_values().map_err(|e| e.to_string())?;
    let baseline = arch.propagate_all(&values).map_err(|e| e.to_string())?;
    ensure!(rel(baseline["E4"], 1.5998e-5) < 0.02, "prior Pr(E4) {}", baseline["E4"]);
    let class = arch.classify_all(&baseline).map_err(|e| e.to_string())?["E4"].to_string();
    ensure!(class == "4D (Low)", "prior class {class}");

    let t = Utc.with_ymd_and_hms(2026, 3, 2, 9, 0, 0).unwrap();
    let r1 = revise_risk(&arch, &smb, &store, &[], PointValues::new(), t, Some("opTxLowVisW")).map_err(|e| e.to_string())?;
    let b4 = r1.element("B4").ok_or("B4 not revised")?;
    ensure!((b4.posterior.alpha(), b4.posterior.beta()) == (30.0, 12.0), "B4 posterior {:?}", b4.posterior);
    let e2 = r1.element("E2").ok_or("E2 not revised")?;
    ensure!((e2.posterior.alpha(), e2.posterior.beta()) == (14.0, 196.0), "E2 posterior {:?}", e2.posterior);
    ensure!((e2.posterior.mean() - 0.0667).abs() < 1e-4, "E2 mean {}", e2.posterior.mean());

    let e4 = r1.probabilities_after["E4"];
    ensure!(rel(e4, 2.386e-5) < 5e-3, "posterior Pr(E4) {e4}");
    ensure!(r1.classifications_after["E4"].to_string() == "4D (Low)", "posterior class {}", r1.classifications_after["E4"]);
    ensure!(r1.classifications_before["E4"] == r1.classifications_after["E4"], "classification changed");

    // oracle: hand propagation of the posterior means
    let hand = (0.05 * 0.05 * 0.10 + (14.0 / 210.0) * 0.30 * (12.0 / 42.0)) * 0.004;
    ensure!(rel(e4, hand) < 1e-12, "{e4} vs hand propagation {hand}");
    ensure!(r1.at_exposure == 10.0, "exposure {}", r1.at_exposure);
    Ok(())
}

/// Risk ratios and drift after relaxing the recovery barrier.
pub fn relaxed_recovery() -> Check {
    let (arch, smb, store) = load()?;
    let t = Utc.with_ymd_and_hms(2026, 3, 2, 9, 0, 0).unwrap();
    let r1 = revise_risk(&arch, &smb, &store, &[], PointValues::new(), t, Some("opTxLowVisW")).map_err(|e| e.to_string())?;
    let rr1 = r1.ratio("E4", RrReference::Baseline).ok_or("no baseline ratio")?.value;
    ensure!((rr1 - 1.49).abs() < 0.02, "first RR {rr1}");

    let relax = PointValues::from([("B5".to_string(), 0.96)]);
    let history = vec![r1];
    let r2 = revise_risk(&arch, &smb, &store, &history, relax, t, Some("opTxLowVisW")).map_err(|e| e.to_string())?;
    let e4 = r2.probabilities_after["E4"];
    ensure!(rel(e4, 2.4e-4) < 0.05, "relaxed Pr(E4) {e4}");
    let class = &r2.classifications_after["E4"];
    ensure!(class.to_string() == "4C (Medium)" && class.level == RiskLevel::Medium, "relaxed class {class}");

    let prev = r2.ratio("E4", RrReference::PreviousRevision).ok_or("no previous ratio")?.value;
    let base = r2.ratio("E4", RrReference::Baseline).ok_or("no baseline ratio")?.value;
    ensure!((prev - 10.06).abs() < 0.1, "RR(previous) {prev}");
    ensure!((base - 14.9).abs() < 0.3, "RR(baseline) {base}");
    // same front part, only the recovery breach changes 0.004 -> 0.04
    ensure!((prev - 10.0).abs() < 1e-9, "RR(previous) {prev} is not the breach ratio");

    let history = vec![history[0].clone(), r2];
    let drift = assess_drift(&history, "E4", &DriftConfig::default());
    ensure!(drift.trend.is_some_and(|t| t.slope > 0.0), "trend {:?}", drift.trend);
    ensure!(drift.verdict == DriftVerdict::ThresholdViolated, "verdict {}", drift.verdict);
    Ok(())
}

/// Indicator table for the first run, and for an empty store.
pub fn indicator_table() -> Check {
    let (arch, smb, store) = load()?;
    let values = arch.point_values().map_err(|e| e.to_string())?;
    let rows = list_statuses(&smb, &store, &values);
    let verdict = |id: &str| match rows.iter().find(|r| r.indicator() == id) {
        Some(StatusRow::Status(s)) => Ok((s.value, s.verdict)),
        Some(StatusRow::Error { error, .. }) => Err(error.clone()),
        None => Err(format!("no row for {id}")),
    };
    ensure!(verdict("SPI_PFO")? == (4.0, Verdict::Violated), "SPI_PFO {:?}", verdict("SPI_PFO"));
    ensure!(verdict("SPI_LRE")? == (0.0, Verdict::InsufficientExposure), "SPI_LRE {:?}", verdict("SPI_LRE"));

    let empty = LifetimeStore::new(smb.measure_ids());
    for row in list_statuses(&smb, &empty, &values) {
        ensure!(
            matches!(&row, StatusRow::Status(s) if s.verdict == Verdict::InsufficientExposure),
            "{row:?} on an empty store"
        );
    }
    Ok(())
}

/// A single view propagates the same as the merged architecture.
pub fn single_view() -> Check {
    let (arch, _, _) = load()?;
    let values = arch.point_values().map_err(|e| e.to_string())?;
    let single = propagate_risk(&arch.bowties[0], &values).map_err(|e| e.to_string())?;
    ensure!(single == arch.propagate_all(&values).map_err(|e| e.to_string())?, "merged propagation differs");
    Ok(())
}
