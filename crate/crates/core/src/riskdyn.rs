//! Risk dynamics: turning safety targets into indicators, revising the
//! operational risk assessment from measurement, and tracking the change in
//! risk through risk ratios and their trend.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::architecture::{ArchitectureError, EventKind, PointValues, RiskClassification, SafetyArchitecture};
use crate::bayes::{posterior, BetaDist, BinomialObservation};
use crate::ingest::LifetimeStore;
use crate::smb::{accessor_values, ArtifactRef, Comparator, EvalError, Evaluator, Exposure, ExposureKind, Indicator, Smb};

#[derive(Debug, Error)]
pub enum RiskDynError {
    #[error("TLOS probability {0} is outside (0, 1)")]
    InvalidTlos(f64),
    #[error("exposure {exposure} is too small to express one event at probability {probability}")]
    InfeasibleExposure { exposure: f64, probability: f64 },
    #[error("allocation fraction {0} is outside (0, 1]")]
    InvalidFraction(f64),
    #[error("exposure must be at least one demand")]
    ZeroExposure,
    #[error("reference probability for `{0}` is zero")]
    ZeroReference(String),
    #[error("trend needs at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("trend points all share the same exposure")]
    DegenerateExposure,
    #[error("`{0}` has no beta prior to update")]
    MissingPrior(String),
    #[error("no observation binding for `{0}`")]
    MissingLinkage(String),
    #[error("metric `{metric}` for `{element}` evaluated to {value}, not a non-negative count")]
    NonIntegerCount { element: String, metric: String, value: f64 },
    #[error("the store holds no runs to revise from")]
    EmptyWindow,
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("value {value} for `{id}` is outside [0, 1]")]
    ValueOutOfRange { id: String, value: f64 },
    #[error(transparent)]
    Architecture(#[from] ArchitectureError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

// ─── Targets and indicators ────────────────────────────────────────────

/// Target level of safety: maximum acceptable probability per exposure unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Tlos {
    pub probability: f64,
    pub exposure_unit: String,
}

impl Tlos {
    pub fn new(probability: f64, exposure_unit: impl Into<String>) -> Result<Self, RiskDynError> {
        if !(probability > 0.0 && probability < 1.0) {
            return Err(RiskDynError::InvalidTlos(probability));
        }
        Ok(Self {
            probability,
            exposure_unit: exposure_unit.into(),
        })
    }
}

/// Converts a TLOS into an event-frequency indicator `metric <= k in
/// exposure units`, with `k = floor(probability * exposure)`. With a
/// flight-hour factor `t` the exposure becomes `exposure * t` flight hours.
pub fn tlos_to_indicator(
    id: &str,
    metric: &str,
    tlos: &Tlos,
    exposure: f64,
    flight_hour_factor: Option<f64>,
) -> Result<Indicator, RiskDynError> {
    let expected = tlos.probability * exposure;
    // absorb representation error such as 1e-6 * 1e6 = 0.9999999999999999
    let threshold = (expected * (1.0 + 1e-9)).floor();
    if threshold.is_nan() || threshold < 1.0 {
        return Err(RiskDynError::InfeasibleExposure {
            exposure,
            probability: tlos.probability,
        });
    }
    let exposure = match flight_hour_factor {
        None => Exposure {
            kind: ExposureKind::EventCount,
            amount: exposure,
            unit_event: Some(tlos.exposure_unit.clone()),
            measure: None,
        },
        Some(t) => Exposure {
            kind: ExposureKind::Duration,
            amount: exposure * t,
            unit_event: Some("flight hour".into()),
            measure: None,
        },
    };
    Ok(Indicator {
        id: id.to_string(),
        metric: metric.to_string(),
        comparator: Comparator::Le,
        threshold,
        exposure,
        links: Vec::new(),
    })
}

/// Scenario-specific form of a generic indicator: the exposure shrinks to the
/// share of operations flown in the scenario, the threshold stays.
pub fn allocate_scenario(indicator: &Indicator, fraction: f64) -> Result<Indicator, RiskDynError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(RiskDynError::InvalidFraction(fraction));
    }
    let mut allocated = indicator.clone();
    allocated.exposure.amount *= fraction;
    Ok(allocated)
}

/// Barrier indicator derived from an integrity prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BarrierSi {
    /// Lower end of the acceptable integrity range `[mean + sd, 1]`.
    pub lower_bound: f64,
    /// Maximum tolerated failures over `exposure` demands.
    pub threshold: u64,
    pub exposure: u64,
}

pub fn derive_barrier_si(prior: &BetaDist, n: u64) -> Result<BarrierSi, RiskDynError> {
    if n == 0 {
        return Err(RiskDynError::ZeroExposure);
    }
    let lower_bound = prior.mean() + prior.std_dev();
    let required_successes = ((n as f64) * lower_bound).floor().min(n as f64) as u64;
    Ok(BarrierSi {
        lower_bound,
        threshold: n - required_successes,
        exposure: n,
    })
}

// ─── Risk ratios, trend, drift ─────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RrReference {
    #[default]
    Baseline,
    Target,
    PreviousRevision,
}

impl fmt::Display for RrReference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RrReference::Baseline => "baseline",
            RrReference::Target => "target",
            RrReference::PreviousRevision => "previousRevision",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RiskRatio {
    pub event_id: String,
    pub value: f64,
    pub reference: RrReference,
    pub at_exposure: f64,
}

pub fn risk_ratio(
    event_id: &str,
    current: f64,
    reference: f64,
    kind: RrReference,
    at_exposure: f64,
) -> Result<RiskRatio, RiskDynError> {
    if reference.is_nan() || reference <= 0.0 {
        return Err(RiskDynError::ZeroReference(event_id.to_string()));
    }
    Ok(RiskRatio {
        event_id: event_id.to_string(),
        value: current / reference,
        reference: kind,
        at_exposure,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendEstimate {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Ordinary least-squares line through `(exposure, ratio)` points.
pub fn fit_trend(series: &[(f64, f64)]) -> Result<TrendEstimate, RiskDynError> {
    if series.len() < 2 {
        return Err(RiskDynError::TooFewPoints(series.len()));
    }
    let n = series.len() as f64;
    let mean_x = series.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = series.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = series.iter().map(|(x, _)| (x - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(RiskDynError::DegenerateExposure);
    }
    let sxy: f64 = series.iter().map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let slope = sxy / sxx;
    Ok(TrendEstimate {
        slope,
        intercept: mean_y - slope * mean_x,
        points: series.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DriftConfig {
    pub slope_epsilon: f64,
    pub min_points: usize,
    pub rr_limit: f64,
    pub limit_reference: RrReference,
}

impl Default for DriftConfig {
    fn default() -> Self {
        Self {
            slope_epsilon: 0.0,
            min_points: 3,
            rr_limit: 1.0,
            limit_reference: RrReference::Target,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum DriftVerdict {
    Stable,
    Drifting,
    ThresholdViolated,
}

impl fmt::Display for DriftVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DriftVerdict::Stable => "stable",
            DriftVerdict::Drifting => "drifting",
            DriftVerdict::ThresholdViolated => "thresholdViolated",
        })
    }
}

/// `latest` are the current ratios of the events being judged; only those
/// with the configured limit reference are compared against the limit.
pub fn drift_verdict(trend: Option<&TrendEstimate>, latest: &[RiskRatio], config: &DriftConfig) -> DriftVerdict {
    if latest
        .iter()
        .any(|rr| rr.reference == config.limit_reference && rr.value > config.rr_limit)
    {
        return DriftVerdict::ThresholdViolated;
    }
    match trend {
        Some(t) if t.points >= config.min_points && t.slope > config.slope_epsilon => DriftVerdict::Drifting,
        _ => DriftVerdict::Stable,
    }
}

// ─── Revision ──────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ElementRevision {
    pub element: ArtifactRef,
    pub prior: BetaDist,
    pub observation: BinomialObservation,
    pub posterior: BetaDist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RevisionRecord {
    pub sequence: usize,
    pub timestamp: DateTime<Utc>,
    /// Cumulative operational exposure when the revision was made.
    pub at_exposure: f64,
    pub elements: Vec<ElementRevision>,
    /// Operator-supplied point values applied after the Bayesian update.
    #[serde(default)]
    pub overrides: PointValues,
    /// Point values handed to propagation.
    pub values: PointValues,
    pub baseline_probabilities: PointValues,
    pub probabilities_before: PointValues,
    pub probabilities_after: PointValues,
    pub classifications_before: BTreeMap<String, RiskClassification>,
    pub classifications_after: BTreeMap<String, RiskClassification>,
    pub ratios: Vec<RiskRatio>,
}

impl RevisionRecord {
    pub fn ratio(&self, event: &str, reference: RrReference) -> Option<&RiskRatio> {
        self.ratios
            .iter()
            .find(|r| r.event_id == event && r.reference == reference)
    }

    pub fn element(&self, id: &str) -> Option<&ElementRevision> {
        self.elements.iter().find(|e| e.element.id == id)
    }
}

/// Approved baseline: propagation of the architecture's prior point values.
pub fn baseline_probabilities(architecture: &SafetyArchitecture) -> Result<PointValues, RiskDynError> {
    Ok(architecture.propagate_all(&architecture.point_values()?)?)
}

/// Observation counts gathered for each bound element over all stored runs.
/// Metrics are evaluated exactly as declared in the SMB.
pub fn gather_observations(
    architecture: &SafetyArchitecture,
    smb: &Smb,
    store: &LifetimeStore,
) -> Result<Vec<(ArtifactRef, BinomialObservation)>, RiskDynError> {
    if smb.bindings.is_empty() {
        return Ok(Vec::new());
    }
    if store.is_empty() {
        return Err(RiskDynError::EmptyWindow);
    }
    let values = accessor_values(architecture, &architecture.point_values()?);
    let evaluator = Evaluator::new(smb, store.runs(), &values);
    let count = |element: &str, metric: &str| -> Result<u64, RiskDynError> {
        if smb.metric(metric).is_none() && smb.measure(metric).is_none() {
            return Err(RiskDynError::MissingLinkage(element.to_string()));
        }
        let value = evaluator.evaluate(metric)?;
        let rounded = value.round();
        if !(rounded >= 0.0 && (value - rounded).abs() < 1e-9) {
            return Err(RiskDynError::NonIntegerCount {
                element: element.to_string(),
                metric: metric.to_string(),
                value,
            });
        }
        Ok(rounded as u64)
    };
    smb.bindings
        .iter()
        .map(|b| {
            if !architecture.contains_element(&b.element.id) {
                return Err(RiskDynError::UnknownElement(b.element.id.clone()));
            }
            let obs = BinomialObservation::new(count(&b.element.id, &b.successes)?, count(&b.element.id, &b.failures)?);
            Ok((b.element.clone(), obs))
        })
        .collect()
}

/// Cumulative exposure: lifetime total of `measure`, or the number of runs.
pub fn store_exposure(store: &LifetimeStore, measure: Option<&str>) -> f64 {
    match measure {
        Some(m) => store.aggregates().get(m).map(|a| a.sum).unwrap_or(0.0),
        None => store.runs().len() as f64,
    }
}

/// Everything a revision depends on besides the architecture.
#[derive(Debug, Clone)]
pub struct RevisionInputs<'a> {
    pub observations: Vec<(ArtifactRef, BinomialObservation)>,
    pub overrides: PointValues,
    pub previous: Option<&'a RevisionRecord>,
    pub sequence: usize,
    pub timestamp: DateTime<Utc>,
    pub at_exposure: f64,
}

/// Updates every bound element from its prior with the observations, applies
/// overrides, re-propagates and records the outcome.
pub fn compute_revision(architecture: &SafetyArchitecture, inputs: RevisionInputs<'_>) -> Result<RevisionRecord, RiskDynError> {
    let baseline_values = architecture.point_values()?;
    let baseline = architecture.propagate_all(&baseline_values)?;
    let mut values = baseline_values;

    let mut elements = Vec::with_capacity(inputs.observations.len());
    for (element, obs) in &inputs.observations {
        let prior = architecture
            .prior_of(&element.id)?
            .ok_or_else(|| RiskDynError::MissingPrior(element.id.clone()))?;
        let post = posterior(&prior, obs);
        values.insert(element.id.clone(), post.mean());
        elements.push(ElementRevision {
            element: element.clone(),
            prior,
            observation: *obs,
            posterior: post,
        });
    }
    for (id, value) in &inputs.overrides {
        if !architecture.contains_element(id) {
            return Err(RiskDynError::UnknownElement(id.clone()));
        }
        if !(0.0..=1.0).contains(value) {
            return Err(RiskDynError::ValueOutOfRange {
                id: id.clone(),
                value: *value,
            });
        }
        values.insert(id.clone(), *value);
    }

    let after = architecture.propagate_all(&values)?;
    let before = inputs
        .previous
        .map(|p| p.probabilities_after.clone())
        .unwrap_or_else(|| baseline.clone());

    let mut ratios = Vec::new();
    for event in architecture.events.iter().filter(|e| e.kind != EventKind::Threat) {
        let Some(current) = after.get(&event.id).copied() else {
            continue;
        };
        let mut references = vec![
            (RrReference::Baseline, baseline.get(&event.id).copied()),
            (RrReference::PreviousRevision, before.get(&event.id).copied()),
        ];
        if let Some(target) = event.target_probability {
            references.push((RrReference::Target, Some(target)));
        }
        for (kind, reference) in references {
            if let Some(reference) = reference.filter(|r| *r > 0.0) {
                ratios.push(risk_ratio(&event.id, current, reference, kind, inputs.at_exposure)?);
            }
        }
    }

    Ok(RevisionRecord {
        sequence: inputs.sequence,
        timestamp: inputs.timestamp,
        at_exposure: inputs.at_exposure,
        elements,
        overrides: inputs.overrides,
        classifications_before: architecture.classify_all(&before)?,
        classifications_after: architecture.classify_all(&after)?,
        values,
        baseline_probabilities: baseline,
        probabilities_before: before,
        probabilities_after: after,
        ratios,
    })
}

/// Revises the operational risk assessment from the store contents.
pub fn revise_risk(
    architecture: &SafetyArchitecture,
    smb: &Smb,
    store: &LifetimeStore,
    history: &[RevisionRecord],
    overrides: PointValues,
    timestamp: DateTime<Utc>,
    exposure_measure: Option<&str>,
) -> Result<RevisionRecord, RiskDynError> {
    let observations = gather_observations(architecture, smb, store)?;
    compute_revision(
        architecture,
        RevisionInputs {
            observations,
            overrides,
            previous: history.last(),
            sequence: history.len() + 1,
            timestamp,
            at_exposure: store_exposure(store, exposure_measure),
        },
    )
}

/// Recomputes a stored record from its logged observations.
pub fn replay_revision(
    architecture: &SafetyArchitecture,
    record: &RevisionRecord,
    previous: Option<&RevisionRecord>,
) -> Result<RevisionRecord, RiskDynError> {
    compute_revision(
        architecture,
        RevisionInputs {
            observations: record.elements.iter().map(|e| (e.element.clone(), e.observation)).collect(),
            overrides: record.overrides.clone(),
            previous,
            sequence: record.sequence,
            timestamp: record.timestamp,
            at_exposure: record.at_exposure,
        },
    )
}

/// Hypothetical revision: the latest revision's observations and overrides
/// with `overrides` applied on top, compared against that latest revision.
/// Nothing is stored; the caller decides what to keep.
pub fn what_if(
    architecture: &SafetyArchitecture,
    history: &[RevisionRecord],
    overrides: &PointValues,
    timestamp: DateTime<Utc>,
) -> Result<RevisionRecord, RiskDynError> {
    let latest = history.last();
    let mut merged = latest.map(|r| r.overrides.clone()).unwrap_or_default();
    merged.extend(overrides.iter().map(|(k, v)| (k.clone(), *v)));
    compute_revision(
        architecture,
        RevisionInputs {
            observations: latest
                .map(|r| r.elements.iter().map(|e| (e.element.clone(), e.observation)).collect())
                .unwrap_or_default(),
            overrides: merged,
            previous: latest,
            sequence: history.len() + 1,
            timestamp,
            at_exposure: latest.map(|r| r.at_exposure).unwrap_or(0.0),
        },
    )
}

/// Baseline-referenced ratio history of an event, starting at the baseline
/// itself `(0, 1)`.
pub fn rr_series(history: &[RevisionRecord], event: &str) -> Vec<(f64, f64)> {
    std::iter::once((0.0, 1.0))
        .chain(history.iter().filter_map(|r| {
            r.ratio(event, RrReference::Baseline)
                .map(|rr| (rr.at_exposure, rr.value))
        }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DriftAssessment {
    pub event_id: String,
    pub series: Vec<(f64, f64)>,
    pub trend: Option<TrendEstimate>,
    pub latest: Vec<RiskRatio>,
    pub verdict: DriftVerdict,
}

/// Trend and drift verdict for one event over the revision history. When the
/// event has no ratio of the configured limit reference, the baseline ratio
/// stands in for it.
pub fn assess_drift(history: &[RevisionRecord], event: &str, config: &DriftConfig) -> DriftAssessment {
    let series = rr_series(history, event);
    let trend = fit_trend(&series).ok();
    let mut latest: Vec<RiskRatio> = history
        .last()
        .map(|r| r.ratios.iter().filter(|rr| rr.event_id == event).cloned().collect())
        .unwrap_or_default();
    let mut effective = config.clone();
    if !latest.iter().any(|rr| rr.reference == config.limit_reference) {
        effective.limit_reference = RrReference::Baseline;
    }
    let verdict = drift_verdict(trend.as_ref(), &latest, &effective);
    latest.sort_by_key(|rr| rr.reference as u8);
    DriftAssessment {
        event_id: event.to_string(),
        series,
        trend,
        latest,
        verdict,
    }
}
