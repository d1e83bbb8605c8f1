//! Property checks shared by the integration tests and the acceptance
//! report. Every check runs a deterministic proptest runner and returns the
//! failure message instead of panicking, so callers decide how to report.

#![allow(dead_code)]

pub mod bayes;
pub mod consistency;
pub mod scenario;
pub mod measurement;
pub mod models;
pub mod propagation;
pub mod riskdyn;

use std::path::PathBuf;

use proptest::strategy::Strategy;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

pub type Check = Result<(), String>;

/// Runs `test` on `cases` values drawn from `strategy` with a fixed seed.
pub fn run<S, F>(cases: u32, strategy: S, test: F) -> Check
where
    S: Strategy,
    F: Fn(S::Value) -> Result<(), TestCaseError>,
{
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures/taxi")
        .join(name)
}
