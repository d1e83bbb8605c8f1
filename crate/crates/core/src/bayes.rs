//! Conjugate beta-binomial inference for barrier integrities and event
//! probabilities.
//!
//! A barrier integrity (or an event probability) is modelled as a beta
//! distribution whose hyperparameters are counts of successes and failures
//! observed during development. Operational observations arrive as binomial
//! counts and are folded in with the closed-form conjugate update.

use std::ops::Add;

use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use thiserror::Error;

/// Substitute for a zero hyperparameter when a prior is built from counts.
pub const DEFAULT_ZERO_COUNT_FLOOR: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BayesError {
    #[error("beta parameters must be positive and finite (alpha = {alpha}, beta = {beta})")]
    InvalidBeta { alpha: f64, beta: f64 },
    #[error("cannot build a prior from zero successes and zero failures")]
    NoDevelopmentData,
    #[error("observation is inconsistent: {successes} successes + {failures} failures != {trials} trials")]
    InconsistentObservation {
        trials: u64,
        successes: u64,
        failures: u64,
    },
    #[error("probability {0} is outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("zero-count floor must be positive, got {0}")]
    InvalidFloor(f64),
}

/// Beta distribution over a probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBeta", into = "RawBeta")]
pub struct BetaDist {
    alpha: f64,
    beta: f64,
}

#[derive(Serialize, Deserialize)]
struct RawBeta {
    alpha: f64,
    beta: f64,
}

impl TryFrom<RawBeta> for BetaDist {
    type Error = BayesError;
    fn try_from(raw: RawBeta) -> Result<Self, Self::Error> {
        BetaDist::new(raw.alpha, raw.beta)
    }
}

impl From<BetaDist> for RawBeta {
    fn from(d: BetaDist) -> Self {
        RawBeta {
            alpha: d.alpha,
            beta: d.beta,
        }
    }
}

impl BetaDist {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, BayesError> {
        if !(alpha.is_finite() && beta.is_finite() && alpha > 0.0 && beta > 0.0) {
            return Err(BayesError::InvalidBeta { alpha, beta });
        }
        Ok(Self { alpha, beta })
    }

    /// Beta(1, 1).
    pub fn uniform() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Point estimate handed to risk propagation.
    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn variance(&self) -> f64 {
        let total = self.alpha + self.beta;
        self.alpha * self.beta / (total * total * (total + 1.0))
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Natural log of the beta function B(alpha, beta), the normalizing
    /// constant of the density.
    pub fn ln_normalizer(&self) -> f64 {
        ln_beta(self.alpha, self.beta)
    }

    pub fn pdf(&self, p: f64) -> f64 {
        if !(0.0..=1.0).contains(&p) {
            return 0.0;
        }
        let ln_kernel = (self.alpha - 1.0) * p.ln() + (self.beta - 1.0) * (1.0 - p).ln();
        (ln_kernel - self.ln_normalizer()).exp()
    }
}

/// Binomial observation: `trials` demands with `successes` and `failures`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "RawObservation")]
pub struct BinomialObservation {
    trials: u64,
    successes: u64,
    failures: u64,
}

#[derive(Deserialize)]
struct RawObservation {
    trials: u64,
    successes: u64,
    failures: u64,
}

impl TryFrom<RawObservation> for BinomialObservation {
    type Error = BayesError;
    fn try_from(raw: RawObservation) -> Result<Self, Self::Error> {
        BinomialObservation::with_trials(raw.trials, raw.successes, raw.failures)
    }
}

impl BinomialObservation {
    pub fn new(successes: u64, failures: u64) -> Self {
        Self {
            trials: successes + failures,
            successes,
            failures,
        }
    }

    pub fn with_trials(trials: u64, successes: u64, failures: u64) -> Result<Self, BayesError> {
        if successes.checked_add(failures) != Some(trials) {
            return Err(BayesError::InconsistentObservation {
                trials,
                successes,
                failures,
            });
        }
        Ok(Self {
            trials,
            successes,
            failures,
        })
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn successes(&self) -> u64 {
        self.successes
    }

    pub fn failures(&self) -> u64 {
        self.failures
    }

    pub fn is_empty(&self) -> bool {
        self.trials == 0
    }

    pub fn success_rate(&self) -> Option<f64> {
        (self.trials > 0).then(|| self.successes as f64 / self.trials as f64)
    }
}

impl Add for BinomialObservation {
    type Output = BinomialObservation;
    fn add(self, rhs: Self) -> Self::Output {
        BinomialObservation::new(self.successes + rhs.successes, self.failures + rhs.failures)
    }
}

/// Builds a prior from development test counts, alpha := successes and
/// beta := failures. A zero count is replaced by [`DEFAULT_ZERO_COUNT_FLOOR`].
pub fn prior_from_dev_metrics(successes: u64, failures: u64) -> Result<BetaDist, BayesError> {
    prior_from_dev_metrics_with_floor(successes, failures, DEFAULT_ZERO_COUNT_FLOOR)
}

pub fn prior_from_dev_metrics_with_floor(
    successes: u64,
    failures: u64,
    floor: f64,
) -> Result<BetaDist, BayesError> {
    if !(floor.is_finite() && floor > 0.0) {
        return Err(BayesError::InvalidFloor(floor));
    }
    if successes == 0 && failures == 0 {
        return Err(BayesError::NoDevelopmentData);
    }
    let lift = |count: u64| if count == 0 { floor } else { count as f64 };
    BetaDist::new(lift(successes), lift(failures))
}

/// Conjugate update: Beta(alpha + successes, beta + failures).
pub fn posterior(prior: &BetaDist, obs: &BinomialObservation) -> BetaDist {
    BetaDist {
        alpha: prior.alpha + obs.successes as f64,
        beta: prior.beta + obs.failures as f64,
    }
}

/// Binomial likelihood C(n, y) p^y (1 - p)^x of an observation.
pub fn likelihood(p: f64, obs: &BinomialObservation) -> Result<f64, BayesError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(BayesError::ProbabilityOutOfRange(p));
    }
    let (y, x) = (obs.successes, obs.failures);
    if (p == 0.0 && y > 0) || (p == 1.0 && x > 0) {
        return Ok(0.0);
    }
    let mut ln = ln_binomial(obs.trials, y);
    if y > 0 {
        ln += y as f64 * p.ln();
    }
    if x > 0 {
        ln += x as f64 * (1.0 - p).ln();
    }
    Ok(ln.exp())
}

fn ln_binomial(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (1..=k)
        .map(|i| ((n - k + i) as f64 / i as f64).ln())
        .sum()
}
