use chrono::{Duration, TimeZone, Utc};
use dynassure_core::architecture::{PointValues, SafetyArchitecture};
use dynassure_core::ingest::{DataRun, LifetimeStore};
use dynassure_core::riskdyn::{fit_trend, replay_revision, revise_risk, what_if, RevisionRecord, RrReference};
use dynassure_core::smb::Smb;
use proptest::prelude::*;
use sha2::{Digest, Sha256};

use super::{fixture, run, Check};

fn taxi() -> (SafetyArchitecture, Smb) {
    (
        SafetyArchitecture::load(fixture("architecture.json")).unwrap(),
        Smb::load(fixture("smb.json")).unwrap(),
    )
}

fn store_with(smb: &Smb, runs: &[(u32, u32)]) -> LifetimeStore {
    let mut store = LifetimeStore::new(smb.measure_ids());
    let t0 = Utc.with_ymd_and_hms(2026, 3, 1, 0, 0, 0).unwrap();
    for (i, (ops, fails)) in runs.iter().enumerate() {
        let run = DataRun::new(format!("r{i}"), t0 + Duration::hours(i as i64))
            .with_sample("opTxLowVisW", f64::from(*ops))
            .with_sample("opPcpDisEngF", f64::from(*fails))
            .with_sample("opLatRwyEx", 0.0);
        store.ingest(run).unwrap();
    }
    store
}

/// Least squares recovers an exact line.
pub fn ols_exact_line(cases: u32) -> Check {
    run(
        cases,
        (-10.0f64..10.0, -10.0f64..10.0, prop::collection::btree_set(0u32..100_000, 2..30)),
        |(slope, intercept, xs)| {
            let points: Vec<(f64, f64)> = xs
                .iter()
                .map(|x| {
                    let x = f64::from(*x) / 100.0;
                    (x, slope * x + intercept)
                })
                .collect();
            let fit = fit_trend(&points).unwrap();
            // finite-difference slope between the extreme points
            let (first, last) = (points[0], points[points.len() - 1]);
            let fd = (last.1 - first.1) / (last.0 - first.0);
            prop_assert!((fit.slope - slope).abs() <= 1e-9, "{} vs {slope}", fit.slope);
            prop_assert!((fit.slope - fd).abs() <= 1e-9);
            prop_assert!((fit.intercept - intercept).abs() <= 1e-9 * 1e3);
            Ok(())
        },
    )
}

/// One more observed failure never lowers the consequence risk ratio.
pub fn rr_monotone_in_failures(cases: u32) -> Check {
    let (arch, smb) = taxi();
    run(
        cases,
        prop::collection::vec((1u32..30, 0u32..30), 1..6),
        move |runs| {
            let runs: Vec<(u32, u32)> = runs.into_iter().map(|(ops, f)| (ops.max(f + 1), f)).collect();
            let t = Utc::now();
            let base = store_with(&smb, &runs);
            let r0 = revise_risk(&arch, &smb, &base, &[], PointValues::new(), t, None).unwrap();
            for i in 0..runs.len() {
                let mut more = runs.clone();
                more[i].1 += 1;
                let r1 = revise_risk(&arch, &smb, &store_with(&smb, &more), &[], PointValues::new(), t, None).unwrap();
                let before = r0.ratio("E4", RrReference::Baseline).unwrap().value;
                let after = r1.ratio("E4", RrReference::Baseline).unwrap().value;
                prop_assert!(after >= before, "{after} < {before}");
            }
            Ok(())
        },
    )
}

fn smb_digest(smb: &Smb) -> Vec<u8> {
    Sha256::digest(serde_json::to_vec(smb).unwrap()).to_vec()
}

/// Relaxing barriers, in what-if or in a stored revision, leaves every
/// metric definition byte-identical.
pub fn metrics_unmodified(cases: u32) -> Check {
    let (arch, smb) = taxi();
    let file_digest = Sha256::digest(std::fs::read(fixture("smb.json")).unwrap()).to_vec();
    run(
        cases,
        (prop::collection::btree_map("B[1-5]", 0.0f64..=1.0, 1..4), 0u32..10),
        move |(relax, fails)| {
            let before = smb_digest(&smb);
            let store = store_with(&smb, &[(10, fails)]);
            let t = Utc::now();
            let r1 = revise_risk(&arch, &smb, &store, &[], relax.clone(), t, None).unwrap();
            what_if(&arch, &[r1], &relax, t).unwrap();
            prop_assert_eq!(smb_digest(&smb), before);
            prop_assert_eq!(Sha256::digest(std::fs::read(fixture("smb.json")).unwrap()).to_vec(), file_digest.clone());
            Ok(())
        },
    )
}

/// Re-running a revision from its logged observations reproduces it,
/// including after a round trip through its stored form.
pub fn revision_replay(cases: u32) -> Check {
    let (arch, smb) = taxi();
    run(
        cases,
        (
            prop::collection::vec((1u32..30, 0u32..10), 1..4),
            prop::collection::vec(prop::option::of(0.5f64..=1.0), 1..4),
        ),
        move |(runs, b5)| {
            let runs: Vec<(u32, u32)> = runs.into_iter().map(|(ops, f)| (ops.max(f), f)).collect();
            let mut history: Vec<RevisionRecord> = Vec::new();
            for (k, relax) in b5.iter().enumerate() {
                let store = store_with(&smb, &runs[..(k + 1).min(runs.len())]);
                let overrides: PointValues = relax.iter().map(|v| ("B5".to_string(), *v)).collect();
                let t = Utc.with_ymd_and_hms(2026, 4, 1, k as u32, 0, 0).unwrap();
                let record = revise_risk(&arch, &smb, &store, &history, overrides, t, Some("opTxLowVisW")).unwrap();
                history.push(record);
            }
            let stored: Vec<RevisionRecord> = history
                .iter()
                .map(|r| serde_json::from_str(&serde_json::to_string(r).unwrap()).unwrap())
                .collect();
            for (i, record) in stored.iter().enumerate() {
                let previous = i.checked_sub(1).map(|j| &stored[j]);
                let replayed = replay_revision(&arch, record, previous).unwrap();
                prop_assert_eq!(&replayed, record);
                prop_assert_eq!(&replayed, &history[i]);
            }
            Ok(())
        },
    )
}
