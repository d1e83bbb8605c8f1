//! Versioned JSON documents served by the API and printed by the CLI.
//!
//! Every document carries `schemaVersion`. The CLI `report` command prints
//! exactly the documents the API would serve for the same snapshot.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use dynassure_core::architecture::{
    BarrierRole, EventKind, PointValues, RiskClassification, SafetyArchitecture,
};
use dynassure_core::argument::{check_consistency, ConsistencyVerdict};
use dynassure_core::bayes::{BetaDist, BinomialObservation};
use dynassure_core::ingest::DataRun;
use dynassure_core::riskdyn::{
    assess_drift, baseline_probabilities, derive_barrier_si, what_if, BarrierSi, DriftAssessment, RevisionRecord,
    RiskRatio, RrReference,
};
use dynassure_core::smb::{accessor_values, list_statuses, ArtifactKind, ExposureKind, StatusRow};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;
use crate::project::Snapshot;

pub const SCHEMA_VERSION: u32 = 1;

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

// ─── Indicators ────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IndicatorsDocument {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub runs: usize,
    pub latest_run: Option<DateTime<Utc>>,
    pub indicators: Vec<StatusRow>,
}

pub fn indicators(snapshot: &Snapshot) -> Result<IndicatorsDocument, ServiceError> {
    let values = accessor_values(&snapshot.architecture, &snapshot.current_values()?);
    Ok(IndicatorsDocument {
        schema_version: SCHEMA_VERSION,
        runs: snapshot.store.runs().len(),
        latest_run: snapshot.store.latest().map(|r| r.timestamp),
        indicators: list_statuses(&snapshot.smb, &snapshot.store, &values),
    })
}

// ─── Risk ──────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DistSummary {
    pub alpha: f64,
    pub beta: f64,
    pub mean: f64,
    pub variance: f64,
}

impl From<&BetaDist> for DistSummary {
    fn from(d: &BetaDist) -> Self {
        Self {
            alpha: d.alpha(),
            beta: d.beta(),
            mean: d.mean(),
            variance: d.variance(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RevisionSummary {
    pub sequence: usize,
    /// Absent for hypothetical revisions.
    pub timestamp: Option<DateTime<Utc>>,
    pub at_exposure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EventRisk {
    pub id: String,
    pub name: String,
    pub kind: EventKind,
    pub probability: f64,
    pub baseline: Option<f64>,
    pub previous: Option<f64>,
    pub target_probability: Option<f64>,
    pub classification: Option<RiskClassification>,
    pub previous_classification: Option<RiskClassification>,
    /// Ratio against the project's configured reference.
    pub risk_ratio: Option<RiskRatio>,
    pub ratios: Vec<RiskRatio>,
    pub prior: Option<DistSummary>,
    pub observation: Option<BinomialObservation>,
    pub posterior: Option<DistSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BarrierRisk {
    pub id: String,
    pub name: String,
    pub role: BarrierRole,
    /// Integrity in force.
    pub integrity: f64,
    /// Integrity declared in the architecture.
    pub baseline: f64,
    pub overridden: bool,
    pub prior: Option<DistSummary>,
    /// Indicator derived from the prior over the demand count of the SMB
    /// indicator monitoring this barrier.
    pub derived_indicator: Option<BarrierSi>,
    pub observation: Option<BinomialObservation>,
    pub posterior: Option<DistSummary>,
}

/// Events ordered by risk level (classified consequences first), barriers
/// ordered by integrity, weakest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RiskDocument {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub hypothetical: bool,
    pub revision: Option<RevisionSummary>,
    pub rr_reference: RrReference,
    pub overrides: PointValues,
    pub events: Vec<EventRisk>,
    pub barriers: Vec<BarrierRisk>,
}

impl RiskDocument {
    pub fn event(&self, id: &str) -> Option<&EventRisk> {
        self.events.iter().find(|e| e.id == id)
    }

    pub fn barrier(&self, id: &str) -> Option<&BarrierRisk> {
        self.barriers.iter().find(|b| b.id == id)
    }
}

/// Risk state of the latest revision, or the approved baseline when no
/// revision exists.
pub fn risk(snapshot: &Snapshot) -> Result<RiskDocument, ServiceError> {
    match snapshot.history.last() {
        Some(record) => risk_from_record(snapshot, record, false),
        None => baseline_risk(snapshot),
    }
}

fn computation(e: impl ToString) -> ServiceError {
    ServiceError::Computation(e.to_string())
}

fn baseline_risk(snapshot: &Snapshot) -> Result<RiskDocument, ServiceError> {
    let arch = &snapshot.architecture;
    let values = arch.point_values().map_err(computation)?;
    let probabilities = baseline_probabilities(arch)?;
    let classes = arch.classify_all(&probabilities).map_err(computation)?;
    let events = arch
        .events
        .iter()
        .filter_map(|e| {
            let p = probabilities.get(&e.id).or_else(|| values.get(&e.id)).copied()?;
            Some(EventRisk {
                id: e.id.clone(),
                name: e.name.clone(),
                kind: e.kind,
                probability: p,
                baseline: Some(p),
                previous: None,
                target_probability: e.target_probability,
                classification: classes.get(&e.id).cloned(),
                previous_classification: None,
                risk_ratio: None,
                ratios: Vec::new(),
                prior: prior_summary(arch, &e.id),
                observation: None,
                posterior: None,
            })
        })
        .collect();
    Ok(RiskDocument {
        schema_version: SCHEMA_VERSION,
        hypothetical: false,
        revision: None,
        rr_reference: snapshot.rr_reference,
        overrides: PointValues::new(),
        events: sorted_events(events),
        barriers: barrier_rows(snapshot, &values, None, &PointValues::new()),
    })
}

fn risk_from_record(snapshot: &Snapshot, record: &RevisionRecord, hypothetical: bool) -> Result<RiskDocument, ServiceError> {
    let arch = &snapshot.architecture;
    let events = arch
        .events
        .iter()
        .filter_map(|e| {
            let p = record
                .probabilities_after
                .get(&e.id)
                .or_else(|| record.values.get(&e.id))
                .copied()?;
            let revised = record.element(&e.id);
            let ratios: Vec<RiskRatio> = record.ratios.iter().filter(|r| r.event_id == e.id).cloned().collect();
            Some(EventRisk {
                id: e.id.clone(),
                name: e.name.clone(),
                kind: e.kind,
                probability: p,
                baseline: record.baseline_probabilities.get(&e.id).copied(),
                previous: record.probabilities_before.get(&e.id).copied(),
                target_probability: e.target_probability,
                classification: record.classifications_after.get(&e.id).cloned(),
                previous_classification: record.classifications_before.get(&e.id).cloned(),
                risk_ratio: ratios.iter().find(|r| r.reference == snapshot.rr_reference).cloned(),
                ratios,
                prior: prior_summary(arch, &e.id),
                observation: revised.map(|r| r.observation),
                posterior: revised.map(|r| DistSummary::from(&r.posterior)),
            })
        })
        .collect();
    Ok(RiskDocument {
        schema_version: SCHEMA_VERSION,
        hypothetical,
        revision: Some(RevisionSummary {
            sequence: record.sequence,
            timestamp: (!hypothetical).then_some(record.timestamp),
            at_exposure: record.at_exposure,
        }),
        rr_reference: snapshot.rr_reference,
        overrides: record.overrides.clone(),
        events: sorted_events(events),
        barriers: barrier_rows(snapshot, &record.values, Some(record), &record.overrides),
    })
}

fn prior_summary(arch: &SafetyArchitecture, id: &str) -> Option<DistSummary> {
    arch.prior_of(id).ok().flatten().as_ref().map(DistSummary::from)
}

fn sorted_events(mut events: Vec<EventRisk>) -> Vec<EventRisk> {
    let rank = |e: &EventRisk| e.classification.as_ref().map(|c| c.level);
    events.sort_by(|a, b| {
        rank(b)
            .cmp(&rank(a))
            .then_with(|| b.probability.total_cmp(&a.probability))
            .then_with(|| a.id.cmp(&b.id))
    });
    events
}

/// Demand count of the event-count indicator monitoring `barrier`.
fn barrier_demands(snapshot: &Snapshot, barrier: &str) -> Option<u64> {
    snapshot
        .smb
        .indicators
        .iter()
        .filter(|i| i.exposure.kind == ExposureKind::EventCount)
        .find(|i| i.links.iter().any(|l| l.kind == ArtifactKind::Barrier && l.id == barrier))
        .map(|i| i.exposure.amount.round() as u64)
        .filter(|n| *n > 0)
}

fn barrier_rows(
    snapshot: &Snapshot,
    values: &PointValues,
    record: Option<&RevisionRecord>,
    overrides: &PointValues,
) -> Vec<BarrierRisk> {
    let arch = &snapshot.architecture;
    let declared = arch.point_values().unwrap_or_default();
    let mut rows: Vec<BarrierRisk> = arch
        .barriers
        .iter()
        .map(|b| {
            let prior = arch.prior_of(&b.id).ok().flatten();
            let revised = record.and_then(|r| r.element(&b.id));
            BarrierRisk {
                id: b.id.clone(),
                name: b.name.clone(),
                role: b.role,
                integrity: values.get(&b.id).copied().unwrap_or_default(),
                baseline: declared.get(&b.id).copied().unwrap_or_default(),
                overridden: overrides.contains_key(&b.id),
                prior: prior.as_ref().map(DistSummary::from),
                derived_indicator: prior
                    .as_ref()
                    .zip(barrier_demands(snapshot, &b.id))
                    .and_then(|(p, n)| derive_barrier_si(p, n).ok()),
                observation: revised.map(|r| r.observation),
                posterior: revised.map(|r| DistSummary::from(&r.posterior)),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        a.integrity
            .partial_cmp(&b.integrity)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.id.cmp(&b.id))
    });
    rows
}

// ─── What-if ───────────────────────────────────────────────────────────

/// Body of a what-if request: a single element adjustment, optionally on top
/// of adjustments already being explored.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct WhatIfRequest {
    #[serde(default)]
    pub element_id: Option<String>,
    #[serde(default)]
    pub value: Option<f64>,
    #[serde(default)]
    pub overrides: PointValues,
}

impl WhatIfRequest {
    pub fn single(element: impl Into<String>, value: f64) -> Self {
        Self {
            element_id: Some(element.into()),
            value: Some(value),
            overrides: PointValues::new(),
        }
    }

    /// All adjustments in effect; the single adjustment wins over `overrides`.
    pub fn adjustments(&self) -> Result<PointValues, ServiceError> {
        let mut out = self.overrides.clone();
        match (&self.element_id, self.value) {
            (Some(id), Some(v)) => {
                out.insert(id.clone(), v);
            }
            (None, None) => {}
            _ => return Err(ServiceError::BadRequest("`elementId` and `value` go together".into())),
        }
        if out.is_empty() {
            return Err(ServiceError::BadRequest("no adjustment given".into()));
        }
        Ok(out)
    }
}

/// Revised risk under hypothetical adjustments, computed on a private copy
/// of the latest revision. Nothing is stored.
pub fn whatif(snapshot: &Snapshot, request: &WhatIfRequest) -> Result<RiskDocument, ServiceError> {
    let adjustments = request.adjustments()?;
    if let Some(unknown) = adjustments.keys().find(|id| !snapshot.architecture.contains_element(id)) {
        return Err(ServiceError::NotFound(format!("element `{unknown}`")));
    }
    let timestamp = snapshot
        .history
        .last()
        .map(|r| r.timestamp)
        .unwrap_or(DateTime::<Utc>::UNIX_EPOCH);
    let record = what_if(&snapshot.architecture, &snapshot.history, &adjustments, timestamp)?;
    risk_from_record(snapshot, &record, true)
}

// ─── Trend ─────────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrendDocument {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    #[serde(flatten)]
    pub assessment: DriftAssessment,
}

pub fn trend(snapshot: &Snapshot, event: &str) -> Result<TrendDocument, ServiceError> {
    match snapshot.architecture.event(event) {
        Some(e) if e.kind != EventKind::Threat => Ok(TrendDocument {
            schema_version: SCHEMA_VERSION,
            assessment: assess_drift(&snapshot.history, event, &snapshot.drift),
        }),
        Some(_) => Err(ServiceError::BadRequest(format!("`{event}` is a threat; ratios exist for downstream events"))),
        None => Err(ServiceError::NotFound(format!("event `{event}`"))),
    }
}

/// Events whose trends the report includes: consequences.
pub fn trended_events(snapshot: &Snapshot) -> Vec<String> {
    snapshot
        .architecture
        .events
        .iter()
        .filter(|e| e.kind == EventKind::Consequence)
        .map(|e| e.id.clone())
        .collect()
}

// ─── Consistency ───────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConsistencyDocument {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    #[serde(flatten)]
    pub verdict: ConsistencyVerdict,
}

pub fn consistency(snapshot: &Snapshot) -> Result<ConsistencyDocument, ServiceError> {
    let argument = snapshot
        .argument
        .as_ref()
        .ok_or_else(|| ServiceError::NotFound("the project declares no argument".into()))?;
    Ok(ConsistencyDocument {
        schema_version: SCHEMA_VERSION,
        verdict: check_consistency(&snapshot.smb, argument, &snapshot.architecture),
    })
}

// ─── Ingestion acknowledgement and errors ──────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunAccepted {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub run: String,
    pub timestamp: DateTime<Utc>,
    pub runs: usize,
}

impl RunAccepted {
    pub fn new(run: &DataRun, runs: usize) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            run: run.id.clone(),
            timestamp: run.timestamp,
            runs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ErrorDocument {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub error: String,
    pub message: String,
}

impl From<&ServiceError> for ErrorDocument {
    fn from(e: &ServiceError) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            error: e.class().to_string(),
            message: e.to_string(),
        }
    }
}

// ─── Report ────────────────────────────────────────────────────────────

/// One report section: the document and the API path that serves it.
#[derive(Debug, Clone, PartialEq)]
pub enum ReportSection {
    Indicators(IndicatorsDocument),
    Risk(RiskDocument),
    Trend(TrendDocument),
    Consistency(ConsistencyDocument),
    WhatIf(RiskDocument),
}

impl ReportSection {
    pub fn to_json(&self) -> String {
        match self {
            ReportSection::Indicators(d) => to_json(d),
            ReportSection::Risk(d) | ReportSection::WhatIf(d) => to_json(d),
            ReportSection::Trend(d) => to_json(d),
            ReportSection::Consistency(d) => to_json(d),
        }
    }
}

/// Compact JSON exactly as the API writes it.
pub fn to_json<T: Serialize>(doc: &T) -> String {
    serde_json::to_string(doc).expect("documents serialize")
}

/// Indicators, risk, one trend per consequence event, consistency (when the
/// project has an argument) and, when requested, a what-if.
pub fn report(snapshot: &Snapshot, whatif_request: Option<&WhatIfRequest>) -> Result<Vec<ReportSection>, ServiceError> {
    let mut sections = vec![
        ReportSection::Indicators(indicators(snapshot)?),
        ReportSection::Risk(risk(snapshot)?),
    ];
    for event in trended_events(snapshot) {
        sections.push(ReportSection::Trend(trend(snapshot, &event)?));
    }
    if snapshot.argument.is_some() {
        sections.push(ReportSection::Consistency(consistency(snapshot)?));
    }
    if let Some(request) = whatif_request {
        sections.push(ReportSection::WhatIf(whatif(snapshot, request)?));
    }
    Ok(sections)
}

/// Ratios of `event` keyed by reference, for display.
pub fn ratios_by_reference(event: &EventRisk) -> BTreeMap<String, f64> {
    event.ratios.iter().map(|r| (r.reference.to_string(), r.value)).collect()
}
