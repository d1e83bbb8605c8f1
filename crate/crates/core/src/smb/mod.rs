//! Safety measurement basis: measures, metrics, indicators and their
//! traceability links to assurance artifacts.

pub mod expr;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::architecture::{Diagnostic, DiagnosticKind, PointValues, SafetyArchitecture};
use crate::ingest::{DataRun, LifetimeStore, Window};
pub use expr::{parse_expression, Accessor, BinaryOp, Expr, ParseError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("unresolved identifier `{0}`")]
    UnresolvedIdentifier(String),
    #[error("no current value for `{0}`")]
    UnresolvedArtifact(String),
    #[error("division by zero in `{0}`")]
    DivisionByZero(String),
    #[error("cyclic metric reference: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("unknown indicator `{0}`")]
    UnknownIndicator(String),
}

#[derive(Debug, Error)]
pub enum SmbError {
    #[error("failed to read SMB file: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse SMB document: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measure {
    pub id: String,
    #[serde(default)]
    pub unit: String,
    /// Sensor or simulation feed the measure comes from.
    #[serde(default)]
    pub source: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum MetricScope {
    LatestRun,
    #[default]
    Lifetime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub id: String,
    pub expression: Expr,
    #[serde(default)]
    pub scope: MetricScope,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ExposureKind {
    /// Hours of operation.
    Duration,
    /// Occurrences of a unit event.
    EventCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Exposure {
    pub kind: ExposureKind,
    pub amount: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit_event: Option<String>,
    /// Measure counting exposure units per run. Without it every run counts
    /// as one occurrence, and durations use wall-clock run timestamps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<String>,
}

impl Exposure {
    pub fn events(amount: f64, unit_event: &str, measure: Option<&str>) -> Self {
        Self {
            kind: ExposureKind::EventCount,
            amount,
            unit_event: Some(unit_event.to_string()),
            measure: measure.map(str::to_string),
        }
    }

    pub fn window(&self) -> Window {
        match (self.kind, &self.measure) {
            (ExposureKind::Duration, None) => Window::LastHours(self.amount),
            (_, measure) => Window::LastExposure {
                measure: measure.clone(),
                amount: self.amount,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "=")]
    Eq,
}

impl Comparator {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparator::Le => value <= threshold,
            Comparator::Lt => value < threshold,
            Comparator::Ge => value >= threshold,
            Comparator::Gt => value > threshold,
            Comparator::Eq => (value - threshold).abs() <= 1e-9 * threshold.abs().max(1.0),
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Le => "<=",
            Comparator::Lt => "<",
            Comparator::Ge => ">=",
            Comparator::Gt => ">",
            Comparator::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ArtifactKind {
    Event,
    Barrier,
    Goal,
    Assumption,
    Requirement,
    Evidence,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ArtifactRef {
    pub kind: ArtifactKind,
    pub id: String,
}

impl ArtifactRef {
    pub fn event(id: &str) -> Self {
        Self {
            kind: ArtifactKind::Event,
            id: id.into(),
        }
    }

    pub fn barrier(id: &str) -> Self {
        Self {
            kind: ArtifactKind::Barrier,
            id: id.into(),
        }
    }

    pub fn is_architecture_element(&self) -> bool {
        matches!(self.kind, ArtifactKind::Event | ArtifactKind::Barrier)
    }
}

impl fmt::Display for ArtifactRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}:{}", self.kind, self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Indicator {
    pub id: String,
    /// Metric id, or a measure id used directly as a metric.
    pub metric: String,
    pub comparator: Comparator,
    pub threshold: f64,
    pub exposure: Exposure,
    #[serde(default)]
    pub links: Vec<ArtifactRef>,
}

/// Maps an architecture element to the success/failure metrics that feed
/// its Bayesian update. For an event, "successes" counts occurrences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationBinding {
    pub element: ArtifactRef,
    pub successes: String,
    pub failures: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Smb {
    #[serde(default)]
    pub measures: Vec<Measure>,
    #[serde(default)]
    pub metrics: Vec<Metric>,
    #[serde(default)]
    pub indicators: Vec<Indicator>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bindings: Vec<ObservationBinding>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Verdict {
    Met,
    Violated,
    InsufficientExposure,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Met => "met",
            Verdict::Violated => "violated",
            Verdict::InsufficientExposure => "insufficientExposure",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IndicatorStatus {
    pub indicator: String,
    pub value: f64,
    pub verdict: Verdict,
    pub exposure_observed: f64,
    pub exposure_required: f64,
    pub comparator: Comparator,
    pub threshold: f64,
    pub links: Vec<ArtifactRef>,
}

/// One dashboard table row; evaluation failures are reported inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StatusRow {
    Status(IndicatorStatus),
    Error { indicator: String, error: String },
}

impl StatusRow {
    pub fn indicator(&self) -> &str {
        match self {
            StatusRow::Status(s) => &s.indicator,
            StatusRow::Error { indicator, .. } => indicator,
        }
    }
}

impl Smb {
    pub fn from_json_str(text: &str) -> Result<Self, SmbError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SmbError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn measure_ids(&self) -> BTreeSet<String> {
        self.measures.iter().map(|m| m.id.clone()).collect()
    }

    pub fn measure(&self, id: &str) -> Option<&Measure> {
        self.measures.iter().find(|m| m.id == id)
    }

    pub fn metric(&self, id: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.id == id)
    }

    pub fn indicator(&self, id: &str) -> Option<&Indicator> {
        self.indicators.iter().find(|i| i.id == id)
    }

    pub fn indicator_ids(&self) -> BTreeSet<String> {
        self.indicators.iter().map(|i| i.id.clone()).collect()
    }

    /// Indicators linked to an architecture element, in declaration order.
    pub fn indicators_for(&self, element: &str) -> Vec<&Indicator> {
        self.indicators
            .iter()
            .filter(|i| i.links.iter().any(|l| l.is_architecture_element() && l.id == element))
            .collect()
    }

    /// The SMB restricted to the given indicators.
    pub fn restrict(&self, ids: &BTreeSet<String>) -> Smb {
        Smb {
            indicators: self.indicators.iter().filter(|i| ids.contains(&i.id)).cloned().collect(),
            ..self.clone()
        }
    }

    /// Structural checks; pass the architecture to also resolve links and
    /// artifact accessors.
    pub fn validate(&self, architecture: Option<&SafetyArchitecture>) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        let mut push = |element: &str, kind: DiagnosticKind, message: String| {
            diags.push(Diagnostic {
                element: element.to_string(),
                kind,
                message,
            })
        };

        let mut seen = BTreeSet::new();
        for id in self
            .measures
            .iter()
            .map(|m| &m.id)
            .chain(self.metrics.iter().map(|m| &m.id))
        {
            if !seen.insert(id.as_str()) {
                push(id, DiagnosticKind::DuplicateId, format!("`{id}` is declared more than once among measures and metrics"));
            }
        }
        let mut seen_ind = BTreeSet::new();
        for i in &self.indicators {
            if !seen_ind.insert(i.id.as_str()) {
                push(&i.id, DiagnosticKind::DuplicateId, format!("indicator `{}` is declared more than once", i.id));
            }
        }

        let resolves = |id: &str| self.measure(id).is_some() || self.metric(id).is_some();
        for m in &self.metrics {
            for id in m.expression.identifiers() {
                if !resolves(id) {
                    push(&m.id, DiagnosticKind::UnresolvedReference, format!("metric `{}` references unknown `{id}`", m.id));
                }
            }
            for (accessor, target) in m.expression.accessors() {
                let ok = match accessor {
                    Accessor::Count | Accessor::Sum => self.measure(target).is_some(),
                    Accessor::Integrity => architecture.is_none_or(|a| a.barrier(target).is_some()),
                    Accessor::Prob => architecture.is_none_or(|a| a.event(target).is_some()),
                };
                if !ok {
                    push(
                        &m.id,
                        DiagnosticKind::UnresolvedReference,
                        format!("metric `{}` applies `{}` to unknown `{target}`", m.id, accessor.name()),
                    );
                }
            }
        }
        if let Some(cycle) = self.metric_cycle() {
            push(&cycle[0], DiagnosticKind::Cycle, format!("cyclic metric reference: {}", cycle.join(" -> ")));
        }

        for i in &self.indicators {
            if !resolves(&i.metric) {
                push(&i.id, DiagnosticKind::UnresolvedReference, format!("indicator `{}` uses unknown metric `{}`", i.id, i.metric));
            }
            if !(i.exposure.amount.is_finite() && i.exposure.amount > 0.0) {
                push(&i.id, DiagnosticKind::OutOfRange, format!("exposure amount {} must be positive", i.exposure.amount));
            }
            if let Some(m) = &i.exposure.measure {
                if self.measure(m).is_none() {
                    push(&i.id, DiagnosticKind::UnresolvedReference, format!("exposure measure `{m}` is not declared"));
                }
            }
            if let Some(arch) = architecture {
                for link in i.links.iter().filter(|l| l.is_architecture_element()) {
                    let found = match link.kind {
                        ArtifactKind::Event => arch.event(&link.id).is_some(),
                        _ => arch.barrier(&link.id).is_some(),
                    };
                    if !found {
                        push(&i.id, DiagnosticKind::UnresolvedReference, format!("indicator `{}` links to unknown {link}", i.id));
                    }
                }
            }
        }

        for b in &self.bindings {
            for id in [&b.successes, &b.failures] {
                if !resolves(id) {
                    push(&b.element.id, DiagnosticKind::UnresolvedReference, format!("binding for `{}` uses unknown `{id}`", b.element.id));
                }
            }
            if !b.element.is_architecture_element() {
                push(&b.element.id, DiagnosticKind::WrongEventKind, "bindings must target an event or barrier".into());
            } else if let Some(arch) = architecture {
                if !arch.contains_element(&b.element.id) {
                    push(&b.element.id, DiagnosticKind::UnresolvedReference, format!("binding targets unknown `{}`", b.element.id));
                }
            }
        }
        diags
    }

    /// First cycle found among metric references, as a path that starts and
    /// ends at the same metric.
    pub fn metric_cycle(&self) -> Option<Vec<String>> {
        fn visit(smb: &Smb, id: &str, stack: &mut Vec<String>, done: &mut BTreeSet<String>) -> Option<Vec<String>> {
            if let Some(pos) = stack.iter().position(|s| s == id) {
                let mut cycle = stack[pos..].to_vec();
                cycle.push(id.to_string());
                return Some(cycle);
            }
            if done.contains(id) {
                return None;
            }
            let metric = smb.metric(id)?;
            stack.push(id.to_string());
            for next in metric.expression.identifiers() {
                if let Some(c) = visit(smb, next, stack, done) {
                    return Some(c);
                }
            }
            stack.pop();
            done.insert(id.to_string());
            None
        }
        let mut done = BTreeSet::new();
        self.metrics
            .iter()
            .find_map(|m| visit(self, &m.id, &mut Vec::new(), &mut done))
    }
}

// ─── Evaluation ────────────────────────────────────────────────────────

/// Evaluates metrics over a run slice; artifact accessors read `values`.
pub struct Evaluator<'a> {
    smb: &'a Smb,
    runs: &'a [DataRun],
    values: &'a PointValues,
}

impl<'a> Evaluator<'a> {
    pub fn new(smb: &'a Smb, runs: &'a [DataRun], values: &'a PointValues) -> Self {
        Self { smb, runs, values }
    }

    /// Evaluates a metric id, or a measure id summed over the runs.
    pub fn evaluate(&self, id: &str) -> Result<f64, EvalError> {
        self.resolve(id, MetricScope::Lifetime, &mut Vec::new())
    }

    pub fn evaluate_expr(&self, expr: &Expr, scope: MetricScope) -> Result<f64, EvalError> {
        self.eval(expr, scope, &mut Vec::new(), "<expression>")
    }

    fn scoped(&self, scope: MetricScope) -> &'a [DataRun] {
        match scope {
            MetricScope::Lifetime => self.runs,
            MetricScope::LatestRun => &self.runs[self.runs.len().saturating_sub(1)..],
        }
    }

    fn resolve(&self, id: &str, scope: MetricScope, stack: &mut Vec<String>) -> Result<f64, EvalError> {
        if let Some(metric) = self.smb.metric(id) {
            if let Some(pos) = stack.iter().position(|s| s == id) {
                let mut cycle = stack[pos..].to_vec();
                cycle.push(id.to_string());
                return Err(EvalError::Cycle(cycle));
            }
            stack.push(id.to_string());
            let value = self.eval(&metric.expression, metric.scope, stack, id);
            stack.pop();
            return value;
        }
        if self.smb.measure(id).is_some() {
            return Ok(self.scoped(scope).iter().map(|r| r.value(id)).sum());
        }
        Err(EvalError::UnresolvedIdentifier(id.to_string()))
    }

    fn eval(&self, expr: &Expr, scope: MetricScope, stack: &mut Vec<String>, owner: &str) -> Result<f64, EvalError> {
        match expr {
            Expr::Number(n) => Ok(*n),
            Expr::Ident(id) => self.resolve(id, scope, stack),
            Expr::Access { accessor, target } => match accessor {
                Accessor::Integrity | Accessor::Prob => self
                    .values
                    .get(target)
                    .copied()
                    .ok_or_else(|| EvalError::UnresolvedArtifact(target.clone())),
                Accessor::Sum | Accessor::Count => {
                    if self.smb.measure(target).is_none() {
                        return Err(EvalError::UnresolvedIdentifier(target.clone()));
                    }
                    let runs = self.scoped(scope);
                    Ok(if *accessor == Accessor::Sum {
                        runs.iter().map(|r| r.value(target)).sum()
                    } else {
                        runs.iter().filter(|r| r.samples.contains_key(target)).count() as f64
                    })
                }
            },
            Expr::Binary { op, lhs, rhs } => {
                let l = self.eval(lhs, scope, stack, owner)?;
                let r = self.eval(rhs, scope, stack, owner)?;
                match op {
                    BinaryOp::Add => Ok(l + r),
                    BinaryOp::Sub => Ok(l - r),
                    BinaryOp::Mul => Ok(l * r),
                    BinaryOp::Div if r == 0.0 => Err(EvalError::DivisionByZero(owner.to_string())),
                    BinaryOp::Div => Ok(l / r),
                }
            }
        }
    }
}

/// Evaluates a metric (or measure) over every stored run.
pub fn evaluate_metric(id: &str, smb: &Smb, store: &LifetimeStore, values: &PointValues) -> Result<f64, EvalError> {
    Evaluator::new(smb, store.runs(), values).evaluate(id)
}

/// Evaluates an indicator over its trailing exposure window.
pub fn evaluate_indicator(
    indicator: &Indicator,
    smb: &Smb,
    store: &LifetimeStore,
    values: &PointValues,
) -> Result<IndicatorStatus, EvalError> {
    let window = store.window(&indicator.exposure.window());
    let value = Evaluator::new(smb, window.runs, values).evaluate(&indicator.metric)?;
    let verdict = if window.observed < indicator.exposure.amount {
        Verdict::InsufficientExposure
    } else if indicator.comparator.holds(value, indicator.threshold) {
        Verdict::Met
    } else {
        Verdict::Violated
    };
    Ok(IndicatorStatus {
        indicator: indicator.id.clone(),
        value,
        verdict,
        exposure_observed: window.observed,
        exposure_required: indicator.exposure.amount,
        comparator: indicator.comparator,
        threshold: indicator.threshold,
        links: indicator.links.clone(),
    })
}

/// One row per indicator ordered by id; failures never abort the batch.
pub fn list_statuses(smb: &Smb, store: &LifetimeStore, values: &PointValues) -> Vec<StatusRow> {
    let mut indicators: Vec<&Indicator> = smb.indicators.iter().collect();
    indicators.sort_by(|a, b| a.id.cmp(&b.id));
    indicators
        .into_iter()
        .map(|i| match evaluate_indicator(i, smb, store, values) {
            Ok(status) => StatusRow::Status(status),
            Err(e) => StatusRow::Error {
                indicator: i.id.clone(),
                error: e.to_string(),
            },
        })
        .collect()
}

/// Point values exposed to artifact accessors: declared values plus
/// propagated event probabilities.
pub fn accessor_values(architecture: &SafetyArchitecture, values: &PointValues) -> PointValues {
    let mut out = values.clone();
    if let Ok(propagated) = architecture.propagate_all(values) {
        for (k, v) in propagated {
            out.entry(k).or_insert(v);
        }
    }
    out
}

pub fn status_map(rows: &[StatusRow]) -> BTreeMap<&str, &StatusRow> {
    rows.iter().map(|r| (r.indicator(), r)).collect()
}
