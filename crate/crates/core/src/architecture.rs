//! Safety architecture: bow-tie views over shared events and barriers, risk
//! propagation along event chains, and risk-matrix classification.
//!
//! Propagation follows series semantics along each chain and sums across
//! chains:
//!
//! ```text
//! Pr(top)         = min(1, Σ_chains Pr(threat) · Π_prevention (1 − integrity))
//! Pr(consequence) = min(1, Σ_chains Pr(top)    · Π_recovery   (1 − integrity))
//! ```
//!
//! Intermediate events on a threat chain receive the partial product up to
//! their position. Nested barrier architectures are carried but not composed
//! upward; a barrier contributes its own declared (or revised) integrity.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bayes::{prior_from_dev_metrics, BayesError, BetaDist};

/// Map from element id to a point probability or integrity.
pub type PointValues = BTreeMap<String, f64>;

#[derive(Debug, Error)]
pub enum ArchitectureError {
    #[error("no value assigned to `{0}`")]
    MissingValue(String),
    #[error("value {value} for `{id}` is outside [0, 1]")]
    ValueOutOfRange { id: String, value: f64 },
    #[error("probability {0} is outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("severity {0} is outside 1..=5")]
    SeverityOutOfRange(u8),
    #[error("`{0}` is not a consequence event of this view")]
    NotAConsequence(String),
    #[error("unknown bow-tie view `{0}`")]
    UnknownView(String),
    #[error("invalid prior for `{id}`: {source}")]
    Prior {
        id: String,
        #[source]
        source: BayesError,
    },
    #[error("failed to read architecture file: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse architecture document: {0}")]
    Parse(#[from] serde_json::Error),
}

// ─── Model ─────────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OperatingContext {
    pub activity: String,
    pub environment: String,
    pub system_state: String,
    /// Share of all operations that occur in this context.
    pub operation_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum EventKind {
    Threat,
    Intermediate,
    Top,
    Consequence,
}

/// Development test counts, turned into a beta prior on load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DevCounts {
    pub successes: u64,
    pub failures: u64,
}

/// A probability or integrity: either a point value or a distribution whose
/// mean is the point value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Likelihood {
    Point(f64),
    Beta(BetaDist),
    Counts(DevCounts),
}

impl Likelihood {
    /// The beta prior behind this value, if it is distributional.
    pub fn prior(&self) -> Result<Option<BetaDist>, BayesError> {
        match self {
            Likelihood::Point(_) => Ok(None),
            Likelihood::Beta(d) => Ok(Some(*d)),
            Likelihood::Counts(c) => prior_from_dev_metrics(c.successes, c.failures).map(Some),
        }
    }

    pub fn point(&self) -> Result<f64, BayesError> {
        match self {
            Likelihood::Point(p) => Ok(*p),
            _ => Ok(self.prior()?.map(|d| d.mean()).unwrap_or_default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Event {
    pub id: String,
    #[serde(default)]
    pub name: String,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probability: Option<Likelihood>,
    /// TLOS or scenario-specific target for consequence events.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_probability: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum BarrierRole {
    Prevention,
    Recovery,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Barrier {
    pub id: String,
    #[serde(default)]
    pub name: String,
    pub role: BarrierRole,
    pub integrity: Likelihood,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub controls: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nested_architecture: Option<String>,
}

/// Intermediate event placed after the first `after` barriers of a chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntermediatePlacement {
    pub event: String,
    pub after: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreatChain {
    pub threat: String,
    #[serde(default)]
    pub barriers: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub intermediates: Vec<IntermediatePlacement>,
}

impl ThreatChain {
    /// Chain elements from the threat to the top event, barriers and
    /// intermediate events interleaved in position order.
    pub fn steps(&self) -> Vec<ChainStep<'_>> {
        let mut steps = Vec::with_capacity(self.barriers.len() + self.intermediates.len());
        for pos in 0..=self.barriers.len() {
            for inter in self.intermediates.iter().filter(|i| i.after == pos) {
                steps.push(ChainStep::Event(&inter.event));
            }
            if let Some(b) = self.barriers.get(pos) {
                steps.push(ChainStep::Barrier(b));
            }
        }
        steps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainStep<'a> {
    Barrier(&'a str),
    Event(&'a str),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsequenceChain {
    #[serde(default)]
    pub barriers: Vec<String>,
    pub consequence: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BowTieView {
    pub id: String,
    pub context: OperatingContext,
    pub top_event: String,
    #[serde(default)]
    pub threat_chains: Vec<ThreatChain>,
    #[serde(default)]
    pub consequence_chains: Vec<ConsequenceChain>,
}

impl BowTieView {
    pub fn consequences(&self) -> BTreeSet<&str> {
        self.consequence_chains
            .iter()
            .map(|c| c.consequence.as_str())
            .collect()
    }

    pub fn barrier_ids(&self) -> BTreeSet<&str> {
        self.threat_chains
            .iter()
            .flat_map(|c| c.barriers.iter())
            .chain(self.consequence_chains.iter().flat_map(|c| c.barriers.iter()))
            .map(String::as_str)
            .collect()
    }

    pub fn event_ids(&self) -> BTreeSet<&str> {
        let mut ids: BTreeSet<&str> = BTreeSet::new();
        ids.insert(&self.top_event);
        for chain in &self.threat_chains {
            ids.insert(&chain.threat);
            ids.extend(chain.intermediates.iter().map(|i| i.event.as_str()));
        }
        ids.extend(self.consequences());
        ids
    }
}

// ─── Risk matrix ───────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ProbabilityCategory {
    A,
    B,
    C,
    D,
    E,
}

impl ProbabilityCategory {
    pub const ALL: [ProbabilityCategory; 5] = [Self::A, Self::B, Self::C, Self::D, Self::E];

    pub fn letter(self) -> char {
        match self {
            Self::A => 'A',
            Self::B => 'B',
            Self::C => 'C',
            Self::D => 'D',
            Self::E => 'E',
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Ordered so that `High > Medium > Low`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RiskLevel {
    Low,
    Medium,
    High,
}

impl fmt::Display for RiskLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RiskLevel::Low => "Low",
            RiskLevel::Medium => "Medium",
            RiskLevel::High => "High",
        };
        f.write_str(s)
    }
}

/// 5×5 risk matrix. `probability_bounds` are the lower edges of categories
/// A..D; anything below the last bound is E. `levels[s - 1][c]` is the level
/// for severity `s` and category index `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RiskMatrixConfig {
    pub probability_bounds: [f64; 4],
    pub levels: [[RiskLevel; 5]; 5],
}

impl Default for RiskMatrixConfig {
    fn default() -> Self {
        use RiskLevel::{High as H, Low as L, Medium as M};
        Self {
            probability_bounds: [1e-2, 1e-3, 1e-4, 1e-6],
            levels: [
                // A  B  C  D  E
                [H, H, H, H, M], // 1 catastrophic
                [H, H, H, M, M], // 2 hazardous
                [H, H, M, M, L], // 3 major
                [M, M, M, L, L], // 4 minor
                [L, L, L, L, L], // 5 minimal
            ],
        }
    }
}

impl RiskMatrixConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let b = &self.probability_bounds;
        if b.iter().any(|x| !(x.is_finite() && *x > 0.0 && *x < 1.0)) {
            problems.push("probability bounds must lie strictly inside (0, 1)".to_string());
        }
        if b.windows(2).any(|w| w[0] <= w[1]) {
            problems.push("probability bounds must be strictly descending".to_string());
        }
        problems
    }

    pub fn category_of(&self, probability: f64) -> ProbabilityCategory {
        self.probability_bounds
            .iter()
            .position(|bound| probability >= *bound)
            .map(|i| ProbabilityCategory::ALL[i])
            .unwrap_or(ProbabilityCategory::E)
    }

    pub fn level_of(&self, severity: u8, category: ProbabilityCategory) -> RiskLevel {
        self.levels[usize::from(severity) - 1][category.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskClassification {
    /// Severity digit followed by probability letter, e.g. `4D`.
    pub category: String,
    pub severity: u8,
    pub likelihood: ProbabilityCategory,
    pub level: RiskLevel,
}

impl fmt::Display for RiskClassification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.category, self.level)
    }
}

pub fn classify_risk(
    probability: f64,
    severity: u8,
    config: &RiskMatrixConfig,
) -> Result<RiskClassification, ArchitectureError> {
    if !(0.0..=1.0).contains(&probability) {
        return Err(ArchitectureError::ProbabilityOutOfRange(probability));
    }
    if !(1..=5).contains(&severity) {
        return Err(ArchitectureError::SeverityOutOfRange(severity));
    }
    let likelihood = config.category_of(probability);
    Ok(RiskClassification {
        category: format!("{severity}{}", likelihood.letter()),
        severity,
        likelihood,
        level: config.level_of(severity, likelihood),
    })
}

// ─── Propagation ───────────────────────────────────────────────────────

fn lookup(values: &PointValues, id: &str) -> Result<f64, ArchitectureError> {
    let value = *values
        .get(id)
        .ok_or_else(|| ArchitectureError::MissingValue(id.to_string()))?;
    if !(0.0..=1.0).contains(&value) {
        return Err(ArchitectureError::ValueOutOfRange {
            id: id.to_string(),
            value,
        });
    }
    Ok(value)
}

/// Propagates threat probabilities through the barriers of one view.
///
/// `values` must hold a probability for every threat and an integrity for
/// every barrier referenced by the view. The result holds every event of the
/// view, threats included.
pub fn propagate_risk(view: &BowTieView, values: &PointValues) -> Result<PointValues, ArchitectureError> {
    let mut out = PointValues::new();
    let mut top = 0.0;
    for chain in &view.threat_chains {
        let threat = lookup(values, &chain.threat)?;
        out.insert(chain.threat.clone(), threat);
        let mut acc = threat;
        for step in chain.steps() {
            match step {
                ChainStep::Barrier(b) => acc *= 1.0 - lookup(values, b)?,
                ChainStep::Event(e) => *out.entry(e.to_string()).or_insert(0.0) += acc,
            }
        }
        top += acc;
    }
    for chain in &view.threat_chains {
        for inter in &chain.intermediates {
            if let Some(p) = out.get_mut(&inter.event) {
                *p = p.min(1.0);
            }
        }
    }
    let top = top.min(1.0);
    out.insert(view.top_event.clone(), top);

    let mut consequences: BTreeMap<&str, f64> = BTreeMap::new();
    for chain in &view.consequence_chains {
        let mut acc = top;
        for b in &chain.barriers {
            acc *= 1.0 - lookup(values, b)?;
        }
        *consequences.entry(&chain.consequence).or_insert(0.0) += acc;
    }
    for (id, p) in consequences {
        out.insert(id.to_string(), p.min(1.0));
    }
    Ok(out)
}

/// Same values with every barrier integrity of the view forced to zero.
pub fn unmitigated_values(view: &BowTieView, values: &PointValues) -> PointValues {
    let mut unmitigated = values.clone();
    for b in view.barrier_ids() {
        unmitigated.insert(b.to_string(), 0.0);
    }
    unmitigated
}

/// Classification of a consequence's unmitigated probability.
pub fn initial_risk_level(
    view: &BowTieView,
    values: &PointValues,
    config: &RiskMatrixConfig,
    consequence: &Event,
) -> Result<RiskClassification, ArchitectureError> {
    if consequence.kind != EventKind::Consequence || !view.consequences().contains(consequence.id.as_str()) {
        return Err(ArchitectureError::NotAConsequence(consequence.id.clone()));
    }
    let severity = consequence
        .severity
        .ok_or_else(|| ArchitectureError::NotAConsequence(consequence.id.clone()))?;
    let probabilities = propagate_risk(view, &unmitigated_values(view, values))?;
    classify_risk(probabilities[&consequence.id], severity, config)
}

// ─── Architecture document ─────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SafetyArchitecture {
    #[serde(default)]
    pub events: Vec<Event>,
    #[serde(default)]
    pub barriers: Vec<Barrier>,
    #[serde(default)]
    pub bowties: Vec<BowTieView>,
    #[serde(default)]
    pub risk_matrix: RiskMatrixConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum DiagnosticKind {
    DuplicateId,
    UnresolvedReference,
    MissingSeverity,
    UnexpectedSeverity,
    OutOfRange,
    MissingProbability,
    InvalidPrior,
    EmptyDescriptor,
    WrongEventKind,
    WrongBarrierRole,
    MisplacedIntermediate,
    Cycle,
    InvalidRiskMatrix,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub element: String,
    pub kind: DiagnosticKind,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.element, self.message)
    }
}

impl SafetyArchitecture {
    pub fn from_json_str(text: &str) -> Result<Self, ArchitectureError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ArchitectureError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn event(&self, id: &str) -> Option<&Event> {
        self.events.iter().find(|e| e.id == id)
    }

    pub fn barrier(&self, id: &str) -> Option<&Barrier> {
        self.barriers.iter().find(|b| b.id == id)
    }

    pub fn bowtie(&self, id: &str) -> Option<&BowTieView> {
        self.bowties.iter().find(|v| v.id == id)
    }

    pub fn contains_element(&self, id: &str) -> bool {
        self.event(id).is_some() || self.barrier(id).is_some()
    }

    /// Prior (or declared point) values: distribution means for
    /// distributional entries, the value itself otherwise.
    pub fn point_values(&self) -> Result<PointValues, ArchitectureError> {
        let mut values = PointValues::new();
        for e in &self.events {
            if let Some(p) = &e.probability {
                values.insert(e.id.clone(), Self::point_of(&e.id, p)?);
            }
        }
        for b in &self.barriers {
            values.insert(b.id.clone(), Self::point_of(&b.id, &b.integrity)?);
        }
        Ok(values)
    }

    fn point_of(id: &str, likelihood: &Likelihood) -> Result<f64, ArchitectureError> {
        likelihood.point().map_err(|source| ArchitectureError::Prior {
            id: id.to_string(),
            source,
        })
    }

    /// Beta prior declared for an event or barrier, if any.
    pub fn prior_of(&self, id: &str) -> Result<Option<BetaDist>, ArchitectureError> {
        let likelihood = match (self.event(id), self.barrier(id)) {
            (Some(e), _) => e.probability,
            (None, Some(b)) => Some(b.integrity),
            (None, None) => return Err(ArchitectureError::MissingValue(id.to_string())),
        };
        match likelihood {
            None => Ok(None),
            Some(l) => l.prior().map_err(|source| ArchitectureError::Prior {
                id: id.to_string(),
                source,
            }),
        }
    }

    /// Propagates every view and merges the results. An event appearing in
    /// several views keeps the largest of its scenario-specific values.
    pub fn propagate_all(&self, values: &PointValues) -> Result<PointValues, ArchitectureError> {
        let mut merged = PointValues::new();
        for view in &self.bowties {
            for (id, p) in propagate_risk(view, values)? {
                let slot = merged.entry(id).or_insert(p);
                *slot = slot.max(p);
            }
        }
        Ok(merged)
    }

    /// Classifies every consequence event with a severity.
    pub fn classify_all(
        &self,
        probabilities: &PointValues,
    ) -> Result<BTreeMap<String, RiskClassification>, ArchitectureError> {
        let mut out = BTreeMap::new();
        for e in self.events.iter().filter(|e| e.kind == EventKind::Consequence) {
            if let (Some(sev), Some(p)) = (e.severity, probabilities.get(&e.id)) {
                out.insert(e.id.clone(), classify_risk(*p, sev, &self.risk_matrix)?);
            }
        }
        Ok(out)
    }

    /// Returns one diagnostic per violated invariant; empty means valid.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        let mut push = |element: &str, kind: DiagnosticKind, message: String| {
            diags.push(Diagnostic {
                element: element.to_string(),
                kind,
                message,
            })
        };

        let mut seen = BTreeSet::new();
        for id in self.events.iter().map(|e| &e.id).chain(self.barriers.iter().map(|b| &b.id)) {
            if !seen.insert(id.as_str()) {
                push(id, DiagnosticKind::DuplicateId, format!("identifier `{id}` is declared more than once"));
            }
        }
        let mut view_ids = BTreeSet::new();
        for v in &self.bowties {
            if !view_ids.insert(v.id.as_str()) {
                push(&v.id, DiagnosticKind::DuplicateId, format!("view `{}` is declared more than once", v.id));
            }
        }

        for e in &self.events {
            match (e.kind, e.severity) {
                (EventKind::Consequence, None) => push(&e.id, DiagnosticKind::MissingSeverity, "consequence event has no severity".into()),
                (EventKind::Consequence, Some(s)) if !(1..=5).contains(&s) => {
                    push(&e.id, DiagnosticKind::OutOfRange, format!("severity {s} is outside 1..5"))
                }
                (kind, Some(_)) if kind != EventKind::Consequence => {
                    push(&e.id, DiagnosticKind::UnexpectedSeverity, "only consequence events carry a severity".into())
                }
                _ => {}
            }
            if e.kind == EventKind::Threat && e.probability.is_none() {
                push(&e.id, DiagnosticKind::MissingProbability, "threat has no probability".into());
            }
            if let Some(p) = &e.probability {
                check_likelihood(&e.id, p, &mut push);
            }
            if let Some(t) = e.target_probability {
                if !(t > 0.0 && t <= 1.0) {
                    push(&e.id, DiagnosticKind::OutOfRange, format!("target probability {t} is outside (0, 1]"));
                }
            }
        }
        for b in &self.barriers {
            check_likelihood(&b.id, &b.integrity, &mut push);
        }

        for view in &self.bowties {
            let ctx = &view.context;
            for (name, value) in [
                ("activity", &ctx.activity),
                ("environment", &ctx.environment),
                ("systemState", &ctx.system_state),
            ] {
                if value.trim().is_empty() {
                    push(&view.id, DiagnosticKind::EmptyDescriptor, format!("operating context {name} is empty"));
                }
            }
            if !(0.0..=1.0).contains(&ctx.operation_fraction) {
                push(
                    &view.id,
                    DiagnosticKind::OutOfRange,
                    format!("operation fraction {} is outside [0, 1]", ctx.operation_fraction),
                );
            }

            let expect_event = |id: &str, kind: EventKind, push: &mut dyn FnMut(&str, DiagnosticKind, String)| match self.event(id) {
                None => push(id, DiagnosticKind::UnresolvedReference, format!("view `{}` references undeclared event `{id}`", view.id)),
                Some(e) if e.kind != kind => push(
                    id,
                    DiagnosticKind::WrongEventKind,
                    format!("view `{}` uses `{id}` as {kind:?} but it is declared {:?}", view.id, e.kind),
                ),
                Some(_) => {}
            };
            let expect_barrier = |id: &str, role: BarrierRole, push: &mut dyn FnMut(&str, DiagnosticKind, String)| match self.barrier(id) {
                None => push(id, DiagnosticKind::UnresolvedReference, format!("view `{}` references undeclared barrier `{id}`", view.id)),
                Some(b) if b.role != role => push(
                    id,
                    DiagnosticKind::WrongBarrierRole,
                    format!("view `{}` places `{id}` as {role:?} but it is declared {:?}", view.id, b.role),
                ),
                Some(_) => {}
            };

            expect_event(&view.top_event, EventKind::Top, &mut push);
            for chain in &view.threat_chains {
                expect_event(&chain.threat, EventKind::Threat, &mut push);
                for b in &chain.barriers {
                    expect_barrier(b, BarrierRole::Prevention, &mut push);
                }
                let mut last = 0;
                for inter in &chain.intermediates {
                    expect_event(&inter.event, EventKind::Intermediate, &mut push);
                    if inter.after > chain.barriers.len() || inter.after < last {
                        push(
                            &inter.event,
                            DiagnosticKind::MisplacedIntermediate,
                            format!("intermediate position {} is out of order or beyond the chain", inter.after),
                        );
                    }
                    last = last.max(inter.after);
                }
                let mut on_chain = BTreeSet::new();
                let elements = std::iter::once(chain.threat.as_str())
                    .chain(chain.barriers.iter().map(String::as_str))
                    .chain(chain.intermediates.iter().map(|i| i.event.as_str()))
                    .chain(std::iter::once(view.top_event.as_str()));
                for id in elements {
                    if !on_chain.insert(id) {
                        push(id, DiagnosticKind::Cycle, format!("`{id}` appears twice on a chain of view `{}`", view.id));
                    }
                }
            }
            for chain in &view.consequence_chains {
                expect_event(&chain.consequence, EventKind::Consequence, &mut push);
                let mut on_chain = BTreeSet::new();
                for b in &chain.barriers {
                    expect_barrier(b, BarrierRole::Recovery, &mut push);
                    if !on_chain.insert(b.as_str()) {
                        push(b, DiagnosticKind::Cycle, format!("`{b}` appears twice on a consequence chain of view `{}`", view.id));
                    }
                }
            }
            if let Some(cycle_at) = intermediate_cycle(view) {
                push(&cycle_at, DiagnosticKind::Cycle, format!("intermediate events of view `{}` form a cycle", view.id));
            }
        }

        for problem in self.risk_matrix.validate() {
            push("riskMatrix", DiagnosticKind::InvalidRiskMatrix, problem);
        }
        diags
    }
}

fn check_likelihood(id: &str, likelihood: &Likelihood, push: &mut impl FnMut(&str, DiagnosticKind, String)) {
    match likelihood {
        Likelihood::Point(p) if !(0.0..=1.0).contains(p) => {
            push(id, DiagnosticKind::OutOfRange, format!("point value {p} is outside [0, 1]"))
        }
        Likelihood::Counts(_) => {
            if let Err(e) = likelihood.prior() {
                push(id, DiagnosticKind::InvalidPrior, e.to_string());
            }
        }
        _ => {}
    }
}

/// Detects a cycle in the precedence graph induced by intermediate events
/// across all threat chains of a view.
fn intermediate_cycle(view: &BowTieView) -> Option<String> {
    let mut edges: HashMap<&str, BTreeSet<&str>> = HashMap::new();
    for chain in &view.threat_chains {
        let mut prev = chain.threat.as_str();
        for step in chain.steps() {
            if let ChainStep::Event(e) = step {
                edges.entry(prev).or_default().insert(e);
                prev = e;
            }
        }
        edges.entry(prev).or_default().insert(&view.top_event);
    }

    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    fn visit<'a>(node: &'a str, edges: &HashMap<&'a str, BTreeSet<&'a str>>, marks: &mut HashMap<&'a str, Mark>) -> Option<String> {
        match marks.get(node) {
            Some(Mark::Active) => return Some(node.to_string()),
            Some(Mark::Done) => return None,
            None => {}
        }
        marks.insert(node, Mark::Active);
        if let Some(next) = edges.get(node) {
            for n in next {
                if let Some(hit) = visit(n, edges, marks) {
                    return Some(hit);
                }
            }
        }
        marks.insert(node, Mark::Done);
        None
    }

    let mut marks = HashMap::new();
    let starts: Vec<&str> = edges.keys().copied().collect();
    starts.into_iter().find_map(|s| visit(s, &edges, &mut marks))
}
