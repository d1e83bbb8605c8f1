//! Dynamic safety assurance engine.
//!
//! Binds safety performance measurement (measures, metrics, indicators) to a
//! bow-tie safety architecture and a structured safety argument, revises
//! operational risk with conjugate Bayesian updates, and quantifies drift
//! from the approved risk baseline.

pub mod architecture;
pub mod argument;
pub mod bayes;
pub mod ingest;
pub mod riskdyn;
pub mod smb;
