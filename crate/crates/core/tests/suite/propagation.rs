use dynassure_core::architecture::{classify_risk, propagate_risk, PointValues, RiskMatrixConfig, SafetyArchitecture};
use proptest::prelude::*;

use super::models::arb_small_model;
use super::{run, Check};

/// Exhaustive enumeration over independent Bernoulli threat occurrences and
/// barrier breaches. Returns the expected number of chain penetrations into
/// the top event and, per consequence, into that consequence; clamping to a
/// probability is applied the same way the sum semantics prescribe.
fn enumerate(arch: &SafetyArchitecture, values: &PointValues) -> PointValues {
    let view = &arch.bowties[0];
    let threats: Vec<&str> = arch.events.iter().filter(|e| e.probability.is_some()).map(|e| e.id.as_str()).collect();
    let barriers: Vec<&str> = arch.barriers.iter().map(|b| b.id.as_str()).collect();
    let vars: Vec<(&str, f64)> = threats
        .iter()
        .map(|t| (*t, values[*t]))
        .chain(barriers.iter().map(|b| (*b, 1.0 - values[*b])))
        .collect();

    let mut top = 0.0;
    let mut joint: PointValues = PointValues::new();
    let mut recovery_only: PointValues = PointValues::new();
    for mask in 0u32..(1 << vars.len()) {
        let on = |id: &str| vars.iter().position(|(v, _)| *v == id).map(|i| mask >> i & 1 == 1).unwrap();
        let weight: f64 = vars
            .iter()
            .enumerate()
            .map(|(i, (_, p))| if mask >> i & 1 == 1 { *p } else { 1.0 - p })
            .product();
        let top_count = view
            .threat_chains
            .iter()
            .filter(|c| on(&c.threat) && c.barriers.iter().all(|b| on(b)))
            .count() as f64;
        top += weight * top_count;
        for c in &view.consequence_chains {
            let through = if c.barriers.iter().all(|b| on(b)) { 1.0 } else { 0.0 };
            *joint.entry(c.consequence.clone()).or_default() += weight * top_count * through;
            *recovery_only.entry(c.consequence.clone()).or_default() += weight * through;
        }
    }
    let mut out = PointValues::new();
    let top_p = top.min(1.0);
    out.insert(view.top_event.clone(), top_p);
    for (c, j) in joint {
        // without clamping, E[top count * recovery breach] is the answer;
        // once the top event saturates only the recovery part remains
        let p = if top <= 1.0 { j } else { top_p * recovery_only[&c] };
        out.insert(c, p.min(1.0));
    }
    out
}

pub fn brute_force(cases: u32) -> Check {
    run(cases, arb_small_model(3, 4, false), |(arch, values)| {
        let got = propagate_risk(&arch.bowties[0], &values).map_err(|e| TestCaseError::fail(e.to_string()))?;
        for (id, expected) in enumerate(&arch, &values) {
            let p = got[&id];
            prop_assert!((p - expected).abs() <= 1e-12, "{id}: {p} vs {expected}");
        }
        Ok(())
    })
}

/// Raising any barrier integrity never raises any propagated probability;
/// every propagated probability stays within [0, 1].
pub fn monotone_and_clamped(cases: u32) -> Check {
    run(
        cases,
        (arb_small_model(3, 4, true), any::<prop::sample::Index>(), 0.0f64..=1.0),
        |((arch, values), pick, raise)| {
            let before = propagate_risk(&arch.bowties[0], &values).unwrap();
            for p in before.values() {
                prop_assert!((0.0..=1.0).contains(p));
            }
            prop_assume!(!arch.barriers.is_empty());
            let b = &arch.barriers[pick.index(arch.barriers.len())].id;
            let mut raised = values.clone();
            let v = raised[b];
            raised.insert(b.clone(), v + (1.0 - v) * raise);
            let after = propagate_risk(&arch.bowties[0], &raised).unwrap();
            for (id, p) in &after {
                prop_assert!(*p <= before[id] + 1e-15, "{id} rose from {} to {p}", before[id]);
            }
            Ok(())
        },
    )
}

/// A perfect barrier on every threat chain, or on every consequence chain,
/// drives the consequences to zero.
pub fn perfect_barriers_annihilate(cases: u32) -> Check {
    run(cases, arb_small_model(3, 4, true), |(arch, values)| {
        let view = &arch.bowties[0];
        let mut perfect = values.clone();
        let prevention_everywhere = view.threat_chains.iter().all(|c| !c.barriers.is_empty());
        let recovery_everywhere = view.consequence_chains.iter().all(|c| !c.barriers.is_empty());
        prop_assume!(prevention_everywhere || recovery_everywhere);
        if prevention_everywhere {
            for c in &view.threat_chains {
                perfect.insert(c.barriers[0].clone(), 1.0);
            }
        } else {
            for c in &view.consequence_chains {
                perfect.insert(c.barriers[0].clone(), 1.0);
            }
        }
        let out = propagate_risk(view, &perfect).unwrap();
        for c in view.consequences() {
            prop_assert_eq!(out[c], 0.0);
        }
        Ok(())
    })
}

/// Higher probability never yields a later (less frequent) category letter.
pub fn classification_monotone(cases: u32) -> Check {
    let cfg = RiskMatrixConfig::default();
    run(cases, (0.0f64..=1.0, 0.0f64..=1.0, 1u8..=5), move |(a, b, sev)| {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let c_lo = classify_risk(lo, sev, &cfg).unwrap();
        let c_hi = classify_risk(hi, sev, &cfg).unwrap();
        prop_assert!(c_hi.likelihood <= c_lo.likelihood);
        Ok(())
    })
}
