use chrono::{DateTime, Duration, TimeZone, Utc};
use dynassure_core::architecture::PointValues;
use dynassure_core::ingest::{DataRun, LifetimeStore, RunLog};
use dynassure_core::smb::{
    evaluate_indicator, evaluate_metric, list_statuses, parse_expression, ArtifactRef, Comparator, Exposure, Indicator,
    Measure, Metric, MetricScope, Smb,
};
use proptest::prelude::*;

use super::{run, Check};

const MEASURES: [&str; 3] = ["opTxLowVisW", "opPcpDisEngF", "opLatRwyEx"];

fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2026, 1, 1, 0, 0, 0).unwrap()
}

/// Runs with non-decreasing timestamps and per-run counts.
fn arb_runs(max: usize) -> impl Strategy<Value = Vec<DataRun>> {
    prop::collection::vec((0i64..600, 0u32..40, 0u32..8, 0u32..2), 0..max).prop_map(|rows| {
        let mut t = t0();
        rows.into_iter()
            .enumerate()
            .map(|(i, (gap, ops, fails, excursions))| {
                t += Duration::minutes(gap);
                DataRun::new(format!("run-{i}"), t)
                    .with_sample("opTxLowVisW", f64::from(ops.max(fails)))
                    .with_sample("opPcpDisEngF", f64::from(fails))
                    .with_sample("opLatRwyEx", f64::from(excursions))
            })
            .collect()
    })
}

pub fn taxi_smb() -> Smb {
    Smb {
        measures: MEASURES
            .iter()
            .map(|m| Measure {
                id: m.to_string(),
                unit: String::new(),
                source: String::new(),
            })
            .collect(),
        metrics: vec![Metric {
            id: "opPcpDisEngS".into(),
            expression: parse_expression("opTxLowVisW - opPcpDisEngF").unwrap(),
            scope: MetricScope::Lifetime,
        }],
        indicators: vec![Indicator {
            id: "SPI_PFO".into(),
            metric: "opPcpDisEngF".into(),
            comparator: Comparator::Le,
            threshold: 2.0,
            exposure: Exposure::events(10.0, "taxi operation", Some("opTxLowVisW")),
            links: vec![ArtifactRef::barrier("B4")],
        }],
        bindings: vec![],
    }
}

/// Incremental aggregates equal a from-scratch recomputation, and a store
/// reopened from its run log equals the live one.
pub fn replay_equality(cases: u32) -> Check {
    run(cases, arb_runs(30), |runs| {
        let dir = tempfile::tempdir().map_err(|e| TestCaseError::fail(e.to_string()))?;
        let log = RunLog::new(dir.path());
        let mut live = log.open(MEASURES).unwrap();
        for r in runs {
            log.append(&mut live, r).unwrap();
        }
        prop_assert_eq!(live.aggregates(), &live.recompute());
        let reopened = log.open(MEASURES).unwrap();
        prop_assert_eq!(&reopened, &live);
        if log.snapshot_path().exists() {
            std::fs::remove_file(log.snapshot_path()).unwrap();
        }
        prop_assert_eq!(&log.open(MEASURES).unwrap(), &live);
        Ok(())
    })
}

/// A rejected run leaves the store byte-identical.
pub fn failed_ingest_is_atomic(cases: u32) -> Check {
    run(cases, (arb_runs(12), 0usize..3), |(runs, fault)| {
        prop_assume!(!runs.is_empty());
        let mut store = LifetimeStore::new(MEASURES);
        for r in runs.iter().cloned() {
            store.ingest(r).unwrap();
        }
        let before = serde_json::to_vec(&store).unwrap();
        let latest = store.latest().unwrap().timestamp;
        let bad = match fault {
            0 => DataRun::new("late", latest - Duration::minutes(1)).with_sample("opTxLowVisW", 1.0),
            1 => DataRun::new("odd", latest).with_sample("opTxLowVisW", 1.0).with_sample("bogus", 1.0),
            _ => DataRun::new(runs[0].id.clone(), latest).with_sample("opTxLowVisW", 1.0),
        };
        prop_assert!(store.ingest(bad).is_err());
        prop_assert_eq!(serde_json::to_vec(&store).unwrap(), before);
        Ok(())
    })
}

/// The successes metric equals a replay of the raw records.
pub fn metric_matches_replay(cases: u32) -> Check {
    let smb = taxi_smb();
    run(cases, arb_runs(25), move |runs| {
        let mut store = LifetimeStore::new(MEASURES);
        let mut oracle = 0.0;
        for r in runs {
            oracle += r.samples["opTxLowVisW"] - r.samples["opPcpDisEngF"];
            store.ingest(r).unwrap();
        }
        let got = evaluate_metric("opPcpDisEngS", &smb, &store, &PointValues::new()).unwrap();
        prop_assert_eq!(got, oracle);
        Ok(())
    })
}

/// Older runs outside a satisfied exposure window never change the verdict,
/// and identical stores give identical status tables.
pub fn window_soundness(cases: u32) -> Check {
    let smb = taxi_smb();
    run(cases, (arb_runs(10), arb_runs(10)), move |(padding, recent)| {
        let covered: f64 = recent.iter().map(|r| r.samples["opTxLowVisW"]).sum();
        prop_assume!(covered >= 10.0);
        let shift = padding.last().map(|r| r.timestamp - t0() + Duration::minutes(1)).unwrap_or_default();
        let mut bare = LifetimeStore::new(MEASURES);
        let mut padded = LifetimeStore::new(MEASURES);
        for r in padding {
            padded.ingest(r.clone_with_id("pad")).unwrap();
        }
        for r in recent {
            let mut moved = r.clone();
            moved.timestamp += shift;
            bare.ingest(moved.clone()).unwrap();
            padded.ingest(moved).unwrap();
        }
        let indicator = &smb.indicators[0];
        let values = PointValues::new();
        let a = evaluate_indicator(indicator, &smb, &bare, &values).unwrap();
        let b = evaluate_indicator(indicator, &smb, &padded, &values).unwrap();
        prop_assert_eq!(a.verdict, b.verdict);
        prop_assert_eq!(a.value, b.value);
        prop_assert_eq!(list_statuses(&smb, &padded, &values), list_statuses(&smb, &padded, &values));
        Ok(())
    })
}

trait Rename {
    fn clone_with_id(&self, prefix: &str) -> DataRun;
}

impl Rename for DataRun {
    fn clone_with_id(&self, prefix: &str) -> DataRun {
        let mut r = self.clone();
        r.id = format!("{prefix}-{}", self.id);
        r
    }
}

/// Any metric set with a reference loop is rejected.
pub fn metric_cycles_detected(cases: u32) -> Check {
    run(cases, (2usize..6, any::<prop::sample::Index>()), |(len, back)| {
        // m0 -> m1 -> ... -> m{len-1} -> m{k}
        let k = back.index(len);
        let metrics = (0..len)
            .map(|i| {
                let next = if i + 1 < len { i + 1 } else { k };
                Metric {
                    id: format!("m{i}"),
                    expression: parse_expression(&format!("m{next} + opTxLowVisW")).unwrap(),
                    scope: MetricScope::Lifetime,
                }
            })
            .collect();
        let smb = Smb { metrics, ..taxi_smb() };
        prop_assert!(smb.metric_cycle().is_some());
        let mut acyclic = Smb {
            metrics: smb.metrics[..len - 1].to_vec(),
            ..taxi_smb()
        };
        acyclic.metrics.push(Metric {
            id: format!("m{}", len - 1),
            expression: parse_expression("opTxLowVisW").unwrap(),
            scope: MetricScope::Lifetime,
        });
        prop_assert!(acyclic.metric_cycle().is_none());
        Ok(())
    })
}

pub const EXPRESSION_CORPUS: [&str; 50] = [
    "opTxLowVisW",
    "opTxLowVisW - opPcpDisEngF",
    "opPcpDisEngF / opTxLowVisW",
    "1",
    "0.5",
    "1e-6",
    "2.5E3",
    "3 + 4 * 5",
    "(3 + 4) * 5",
    "a - (b - c)",
    "(a - b) - c",
    "a - b - c",
    "a / (b / c)",
    "(a / b) / c",
    "a / b / c",
    "a * (b + c)",
    "a * b + c",
    "a + b * c",
    "(a + b) * (c - d)",
    "((a))",
    "integrity(B4)",
    "prob(E2)",
    "count(opPcpDisEngF)",
    "sum(opTxLowVisW)",
    "1 - integrity(B5)",
    "prob(E1) * (1 - integrity(B1)) * (1 - integrity(B2))",
    "count(opPcpDisEngF) / sum(opTxLowVisW)",
    "opTxLowVisW - opPcpDisEngF - opLatRwyEx",
    "opTxLowVisW - (opPcpDisEngF + opLatRwyEx)",
    "100 * opLatRwyEx / opTxLowVisW",
    "a + b + c + d + e",
    "a * b * c * d",
    "a / b * c",
    "a / (b * c)",
    "a - b + c",
    "a - (b + c)",
    "(a * b) / (c * d)",
    "x_1 + x_2",
    "devPcpDisEngF - devPcpDisEngS",
    "0",
    "0.0001 * n",
    "((a + b) * c) / d",
    "a * (b * (c * d))",
    "a + (b + (c + d))",
    "a - (b * c - d)",
    "(prob(E2) + prob(E1)) * 0.5",
    "integrity(B1) * integrity(B2) * integrity(B3)",
    "sum(opTxLowVisW) - count(opPcpDisEngF) * 2",
    "(1 - integrity(B4)) / (1 - integrity(B3))",
    "opPcpDisEngF + 0 * opLatRwyEx",
];

/// parse -> print -> parse yields the same tree, and printing is stable.
pub fn parser_round_trip() -> Check {
    for text in EXPRESSION_CORPUS {
        let first = parse_expression(text).map_err(|e| format!("{text}: {e}"))?;
        let printed = first.to_string();
        let second = parse_expression(&printed).map_err(|e| format!("{printed}: {e}"))?;
        if first != second {
            return Err(format!("`{text}` reparsed from `{printed}` differs"));
        }
        if second.to_string() != printed {
            return Err(format!("printing `{printed}` is not stable"));
        }
    }
    Ok(())
}

fn arb_expression() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        "[a-z][a-zA-Z0-9_]{0,6}".prop_filter("accessor names", |s| {
            !["integrity", "prob", "count", "sum"].contains(&s.as_str())
        }),
        (0u32..1000).prop_map(|n| n.to_string()),
        (0u32..1000).prop_map(|n| format!("{}.{}", n / 10, n % 10)),
        ("(integrity|prob|count|sum)", "[A-Z][A-Za-z0-9]{0,4}").prop_map(|(a, id)| format!("{a}({id})")),
    ];
    leaf.prop_recursive(5, 40, 2, |inner| {
        prop_oneof![
            (inner.clone(), "[-+*/]", inner.clone()).prop_map(|(l, op, r)| format!("{l} {op} {r}")),
            inner.prop_map(|e| format!("({e})")),
        ]
    })
}

pub fn parser_round_trip_random(cases: u32) -> Check {
    run(cases, arb_expression(), |text| {
        let first = parse_expression(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
        let second = parse_expression(&first.to_string()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(first, second);
        Ok(())
    })
}
