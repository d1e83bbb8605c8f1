//! Structured safety arguments and their consistency with the measurement
//! basis.
//!
//! `generate_skeleton` embeds an SMB into a skeleton argument that mirrors
//! the risk-reduction rationale of the safety architecture (the mapping G);
//! `extract_indicators` collects the indicators an argument quantifies over
//! (the mapping F). An argument *refines* a skeleton when the skeleton embeds
//! into it: an injective map preserving node kind, claim and quantity
//! reference, under which every skeleton parent lands on an ancestor of its
//! child's image. Interposed strategies, prose goals and context nodes are
//! therefore allowed.
//!
//! Generated statements follow fixed templates; comparisons use the
//! structured `claim` of each node, never its text.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::architecture::{BowTieView, ChainStep, EventKind, SafetyArchitecture, ThreatChain};
use crate::smb::{ArtifactKind, Smb};

#[derive(Debug, Error)]
pub enum ArgumentError {
    #[error("indicator `{indicator}` links to `{element}`, which is not in the architecture")]
    DanglingLink { indicator: String, element: String },
    #[error("failed to read argument file: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse argument document: {0}")]
    Parse(#[from] serde_json::Error),
}

// ─── Model ─────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum NodeKind {
    Goal,
    Strategy,
    Solution,
    Context,
    Assumption,
}

/// What a claim node asserts about its architecture element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Aspect {
    /// Residual risk of a consequence meets its allocated TLOS.
    Tlos,
    /// The event is acceptably mitigated.
    Mitigated,
    /// The barrier is operational and effective.
    Effective,
    /// The event has the stated probability of occurrence.
    Probability,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Claim {
    pub element: String,
    pub aspect: Aspect,
}

/// Quantity a node is backed by. Written as a bare indicator id, or as
/// `target:E`, `integrity:B`, `probability:E` for claims about architecture
/// values that an indicator is expected to monitor.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum QuantRef {
    Indicator(String),
    Target(String),
    Integrity(String),
    Probability(String),
}

impl QuantRef {
    /// Architecture element the reference is about, for non-indicator refs.
    pub fn element(&self) -> Option<&str> {
        match self {
            QuantRef::Indicator(_) => None,
            QuantRef::Target(e) | QuantRef::Integrity(e) | QuantRef::Probability(e) => Some(e),
        }
    }
}

impl TryFrom<String> for QuantRef {
    type Error = String;

    fn try_from(text: String) -> Result<Self, Self::Error> {
        let reference = match text.split_once(':') {
            None => QuantRef::Indicator(text.clone()),
            Some(("target", e)) => QuantRef::Target(e.to_string()),
            Some(("integrity", b)) => QuantRef::Integrity(b.to_string()),
            Some(("probability", e)) => QuantRef::Probability(e.to_string()),
            Some((prefix, _)) => return Err(format!("unknown quantity reference prefix `{prefix}`")),
        };
        match &reference {
            QuantRef::Indicator(id) | QuantRef::Target(id) | QuantRef::Integrity(id) | QuantRef::Probability(id)
                if id.trim().is_empty() =>
            {
                Err("empty quantity reference".into())
            }
            _ => Ok(reference),
        }
    }
}

impl From<QuantRef> for String {
    fn from(q: QuantRef) -> Self {
        q.to_string()
    }
}

impl fmt::Display for QuantRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuantRef::Indicator(id) => f.write_str(id),
            QuantRef::Target(e) => write!(f, "target:{e}"),
            QuantRef::Integrity(b) => write!(f, "integrity:{b}"),
            QuantRef::Probability(e) => write!(f, "probability:{e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ArgumentNode {
    pub id: String,
    pub kind: NodeKind,
    #[serde(default)]
    pub statement: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quant_ref: Option<QuantRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claim: Option<Claim>,
}

impl ArgumentNode {
    pub fn new(id: impl Into<String>, kind: NodeKind, statement: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            kind,
            statement: statement.into(),
            quant_ref: None,
            claim: None,
        }
    }

    fn label(&self) -> Label<'_> {
        (self.kind, self.claim.as_ref(), self.quant_ref.as_ref())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub parent: String,
    pub child: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Argument {
    pub nodes: Vec<ArgumentNode>,
    #[serde(default)]
    pub edges: Vec<Edge>,
}

type Label<'a> = (NodeKind, Option<&'a Claim>, Option<&'a QuantRef>);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum ArgumentIssue {
    Empty,
    DuplicateNode { node: String },
    DanglingEdge { parent: String, child: String },
    RootCount { roots: Vec<String> },
    RootNotGoal { node: String },
    Cycle,
    Disconnected { nodes: Vec<String> },
    SolutionWithChildren { node: String },
}

impl fmt::Display for ArgumentIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArgumentIssue::Empty => f.write_str("argument has no nodes"),
            ArgumentIssue::DuplicateNode { node } => write!(f, "duplicate node id `{node}`"),
            ArgumentIssue::DanglingEdge { parent, child } => write!(f, "edge {parent} -> {child} names an unknown node"),
            ArgumentIssue::RootCount { roots } => write!(f, "expected a single root, found [{}]", roots.join(", ")),
            ArgumentIssue::RootNotGoal { node } => write!(f, "root `{node}` is not a goal"),
            ArgumentIssue::Cycle => f.write_str("argument contains a cycle"),
            ArgumentIssue::Disconnected { nodes } => write!(f, "unreachable from root: [{}]", nodes.join(", ")),
            ArgumentIssue::SolutionWithChildren { node } => write!(f, "solution `{node}` has children"),
        }
    }
}

/// Adjacency view over an argument, by node position.
struct Graph {
    children: Vec<Vec<usize>>,
    parents: Vec<Vec<usize>>,
}

impl Graph {
    fn build(argument: &Argument) -> Self {
        let mut index = HashMap::with_capacity(argument.nodes.len());
        for (i, n) in argument.nodes.iter().enumerate() {
            index.entry(n.id.clone()).or_insert(i);
        }
        let mut children = vec![Vec::new(); argument.nodes.len()];
        let mut parents = vec![Vec::new(); argument.nodes.len()];
        for e in &argument.edges {
            if let (Some(&p), Some(&c)) = (index.get(&e.parent), index.get(&e.child)) {
                children[p].push(c);
                parents[c].push(p);
            }
        }
        Self { children, parents }
    }

    fn roots(&self) -> Vec<usize> {
        (0..self.parents.len()).filter(|&i| self.parents[i].is_empty()).collect()
    }

    /// Kahn order; `None` when the graph has a cycle.
    fn topological(&self) -> Option<Vec<usize>> {
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut queue: VecDeque<usize> = (0..indegree.len()).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(indegree.len());
        while let Some(n) = queue.pop_front() {
            order.push(n);
            for &c in &self.children[n] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        (order.len() == indegree.len()).then_some(order)
    }

    /// `reach[a][b]` iff `b` is a proper descendant of `a`.
    fn reachability(&self, order: &[usize]) -> Vec<Vec<bool>> {
        let n = self.children.len();
        let mut reach = vec![vec![false; n]; n];
        for &a in order.iter().rev() {
            for &c in &self.children[a] {
                reach[a][c] = true;
                let below = reach[c].clone();
                for (slot, r) in reach[a].iter_mut().zip(below) {
                    *slot |= r;
                }
            }
        }
        reach
    }
}

impl Argument {
    pub fn from_json_str(text: &str) -> Result<Self, ArgumentError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ArgumentError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("arguments serialize")
    }

    pub fn node(&self, id: &str) -> Option<&ArgumentNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn children(&self, id: &str) -> impl Iterator<Item = &ArgumentNode> + '_ {
        let id = id.to_string();
        self.edges
            .iter()
            .filter(move |e| e.parent == id)
            .filter_map(|e| self.node(&e.child))
    }

    pub fn parent_of(&self, id: &str) -> Option<&str> {
        self.edges.iter().find(|e| e.child == id).map(|e| e.parent.as_str())
    }

    pub fn root(&self) -> Option<&ArgumentNode> {
        let with_parent: BTreeSet<&str> = self.edges.iter().map(|e| e.child.as_str()).collect();
        let mut roots = self.nodes.iter().filter(|n| !with_parent.contains(n.id.as_str()));
        match (roots.next(), roots.next()) {
            (Some(r), None) => Some(r),
            _ => None,
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = &ArgumentNode> + '_ {
        let parents: BTreeSet<&str> = self.edges.iter().map(|e| e.parent.as_str()).collect();
        self.nodes.iter().filter(move |n| !parents.contains(n.id.as_str()))
    }

    pub fn quant_refs(&self) -> impl Iterator<Item = (&ArgumentNode, &QuantRef)> + '_ {
        self.nodes.iter().filter_map(|n| n.quant_ref.as_ref().map(|q| (n, q)))
    }

    /// Structural well-formedness; empty means valid.
    pub fn validate(&self) -> Vec<ArgumentIssue> {
        if self.nodes.is_empty() {
            return vec![ArgumentIssue::Empty];
        }
        let mut issues = Vec::new();
        let mut seen = BTreeSet::new();
        for n in &self.nodes {
            if !seen.insert(n.id.as_str()) {
                issues.push(ArgumentIssue::DuplicateNode { node: n.id.clone() });
            }
        }
        for e in &self.edges {
            if !seen.contains(e.parent.as_str()) || !seen.contains(e.child.as_str()) {
                issues.push(ArgumentIssue::DanglingEdge {
                    parent: e.parent.clone(),
                    child: e.child.clone(),
                });
            }
        }
        let graph = Graph::build(self);
        for (i, n) in self.nodes.iter().enumerate() {
            if n.kind == NodeKind::Solution && !graph.children[i].is_empty() {
                issues.push(ArgumentIssue::SolutionWithChildren { node: n.id.clone() });
            }
        }
        let roots = graph.roots();
        match roots.as_slice() {
            [root] => {
                if self.nodes[*root].kind != NodeKind::Goal {
                    issues.push(ArgumentIssue::RootNotGoal {
                        node: self.nodes[*root].id.clone(),
                    });
                }
                let mut reached = vec![false; self.nodes.len()];
                let mut stack = vec![*root];
                while let Some(n) = stack.pop() {
                    if !std::mem::replace(&mut reached[n], true) {
                        stack.extend(&graph.children[n]);
                    }
                }
                let unreachable: Vec<String> = reached
                    .iter()
                    .enumerate()
                    .filter(|(_, r)| !**r)
                    .map(|(i, _)| self.nodes[i].id.clone())
                    .collect();
                if !unreachable.is_empty() {
                    issues.push(ArgumentIssue::Disconnected { nodes: unreachable });
                }
            }
            _ => issues.push(ArgumentIssue::RootCount {
                roots: roots.iter().map(|&i| self.nodes[i].id.clone()).collect(),
            }),
        }
        if graph.topological().is_none() {
            issues.push(ArgumentIssue::Cycle);
        }
        issues
    }

    /// Graphviz rendering.
    pub fn to_dot(&self) -> String {
        fn escape(s: &str) -> String {
            s.replace('\\', "\\\\").replace('"', "\\\"")
        }
        let mut out = String::from("digraph argument {\n  rankdir=TB;\n  node [fontname=\"Helvetica\"];\n");
        for n in &self.nodes {
            let shape = match n.kind {
                NodeKind::Goal => "box",
                NodeKind::Strategy => "parallelogram",
                NodeKind::Solution => "circle",
                NodeKind::Context => "box\", style=\"rounded",
                NodeKind::Assumption => "ellipse",
            };
            let mut label = format!("{}\\n{}", escape(&n.id), escape(&n.statement));
            if let Some(q) = &n.quant_ref {
                label.push_str(&format!("\\n[{}]", escape(&q.to_string())));
            }
            out.push_str(&format!("  \"{}\" [shape=\"{shape}\", label=\"{label}\"];\n", escape(&n.id)));
        }
        for e in &self.edges {
            out.push_str(&format!("  \"{}\" -> \"{}\";\n", escape(&e.parent), escape(&e.child)));
        }
        out.push_str("}\n");
        out
    }
}

// ─── Skeleton generation (G) ───────────────────────────────────────────

/// Template statement of a generated claim node.
pub fn claim_statement(claim: &Claim, kind: NodeKind) -> String {
    let e = &claim.element;
    match (claim.aspect, kind) {
        (Aspect::Tlos, _) => format!("Residual risk of {e} meets its allocated TLOS"),
        (Aspect::Mitigated, _) => format!("{e} is acceptably mitigated"),
        (Aspect::Effective, _) => format!("Barrier {e} is operational and effective"),
        (Aspect::Probability, NodeKind::Solution) => format!("Threat {e} has the stated (assumed) probability"),
        (Aspect::Probability, _) => format!("{e} has the stated probability of occurrence"),
    }
}

struct SkeletonBuilder<'a> {
    /// Indicator ids embedded per architecture element, in SMB order.
    placed: BTreeMap<&'a str, Vec<&'a str>>,
    argument: Argument,
}

impl<'a> SkeletonBuilder<'a> {
    fn push(&mut self, parent: Option<&str>, segment: &str, kind: NodeKind, claim: Option<Claim>, quant: Option<QuantRef>) -> String {
        let id = match parent {
            Some(p) => {
                let ordinal = self.argument.edges.iter().filter(|e| e.parent == p).count();
                format!("{p}/{ordinal}:{segment}")
            }
            None => segment.to_string(),
        };
        let statement = match (&claim, &quant) {
            (Some(c), _) => claim_statement(c, kind),
            (None, Some(q)) => format!("Indicator {q} is within its threshold"),
            (None, None) => "All consequence events are acceptably mitigated".to_string(),
        };
        self.argument.nodes.push(ArgumentNode {
            id: id.clone(),
            kind,
            statement,
            quant_ref: quant,
            claim,
        });
        if let Some(p) = parent {
            self.argument.edges.push(Edge {
                parent: p.to_string(),
                child: id.clone(),
            });
        }
        id
    }

    /// Node for an element claim, carrying the element's first indicator;
    /// further indicators become solutions under it, or next to it when the
    /// node is itself a solution.
    fn claim_node(&mut self, parent: Option<&str>, element: &str, aspect: Aspect, kind: NodeKind) -> String {
        let indicators = self.placed.get(element).cloned().unwrap_or_default();
        let claim = Claim {
            element: element.to_string(),
            aspect,
        };
        let segment = format!("{element}.{}", aspect_slug(aspect));
        let first = indicators.first().map(|i| QuantRef::Indicator(i.to_string()));
        let id = self.push(parent, &segment, kind, Some(claim), first);
        let host = if kind == NodeKind::Solution { parent.map(str::to_string) } else { Some(id.clone()) };
        for extra in indicators.iter().skip(1) {
            self.push(host.as_deref(), extra, NodeKind::Solution, None, Some(QuantRef::Indicator(extra.to_string())));
        }
        id
    }

    fn consequence(&mut self, parent: Option<&str>, view: &BowTieView, consequence: &str) -> String {
        let root = self.claim_node(parent, consequence, Aspect::Tlos, NodeKind::Goal);
        let mitigated = self.claim_node(Some(&root), &view.top_event, Aspect::Mitigated, NodeKind::Goal);
        // every recovery barrier between the top event and this consequence
        let mut recovery: Vec<&str> = Vec::new();
        for chain in view.consequence_chains.iter().filter(|c| c.consequence == consequence) {
            for b in &chain.barriers {
                if !recovery.contains(&b.as_str()) {
                    recovery.push(b);
                }
            }
        }
        for b in recovery {
            self.claim_node(Some(&mitigated), b, Aspect::Effective, NodeKind::Goal);
        }
        let probability = self.claim_node(Some(&mitigated), &view.top_event, Aspect::Probability, NodeKind::Goal);
        for chain in &view.threat_chains {
            let steps = chain.steps();
            self.cause(&probability, chain, &steps);
        }
        root
    }

    /// Walks a threat chain leftwards from the end of `steps`.
    fn cause(&mut self, parent: &str, chain: &ThreatChain, steps: &[ChainStep<'_>]) {
        let last_event = steps.iter().rposition(|s| matches!(s, ChainStep::Event(_)));
        let (precursor, barriers) = match last_event {
            Some(j) => (
                match steps[j] {
                    ChainStep::Event(e) => e,
                    ChainStep::Barrier(_) => unreachable!(),
                },
                &steps[j + 1..],
            ),
            None => (chain.threat.as_str(), steps),
        };
        let mitigated = self.claim_node(Some(parent), precursor, Aspect::Mitigated, NodeKind::Goal);
        for step in barriers {
            if let ChainStep::Barrier(b) = step {
                self.claim_node(Some(&mitigated), b, Aspect::Effective, NodeKind::Goal);
            }
        }
        match last_event {
            Some(j) => {
                let probability = self.claim_node(Some(&mitigated), precursor, Aspect::Probability, NodeKind::Goal);
                self.cause(&probability, chain, &steps[..j]);
            }
            None => {
                self.claim_node(Some(&mitigated), precursor, Aspect::Probability, NodeKind::Solution);
            }
        }
    }
}

fn aspect_slug(aspect: Aspect) -> &'static str {
    match aspect {
        Aspect::Tlos => "tlos",
        Aspect::Mitigated => "mitigated",
        Aspect::Effective => "effective",
        Aspect::Probability => "probability",
    }
}

/// Indicators of `smb` that link to an event or barrier used by some view.
fn embeddable<'a>(smb: &'a Smb, architecture: &SafetyArchitecture) -> Result<BTreeMap<&'a str, Vec<&'a str>>, ArgumentError> {
    let mut used: BTreeSet<&str> = BTreeSet::new();
    for view in &architecture.bowties {
        used.extend(view.event_ids());
        used.extend(view.barrier_ids());
    }
    let mut placed: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for indicator in &smb.indicators {
        for link in indicator.links.iter().filter(|l| l.is_architecture_element()) {
            let known = match link.kind {
                ArtifactKind::Event => architecture.event(&link.id).is_some(),
                _ => architecture.barrier(&link.id).is_some(),
            };
            if !known {
                return Err(ArgumentError::DanglingLink {
                    indicator: indicator.id.clone(),
                    element: link.id.clone(),
                });
            }
            if used.contains(link.id.as_str()) {
                let slot = placed.entry(link.id.as_str()).or_default();
                if !slot.contains(&indicator.id.as_str()) {
                    slot.push(&indicator.id);
                }
            }
        }
    }
    Ok(placed)
}

/// The mapping G: skeleton argument for `smb` over `architecture`.
pub fn generate_skeleton(smb: &Smb, architecture: &SafetyArchitecture) -> Result<Argument, ArgumentError> {
    let mut builder = SkeletonBuilder {
        placed: embeddable(smb, architecture)?,
        argument: Argument::default(),
    };
    let roots: Vec<(&BowTieView, &str)> = architecture
        .bowties
        .iter()
        .flat_map(|v| v.consequences().into_iter().map(move |c| (v, c)))
        .filter(|(_, c)| architecture.event(c).is_some_and(|e| e.kind == EventKind::Consequence))
        .collect();
    match roots.as_slice() {
        [(view, consequence)] => {
            builder.consequence(None, view, consequence);
        }
        _ => {
            let top = builder.push(None, "root", NodeKind::Goal, None, None);
            for (view, consequence) in roots {
                builder.consequence(Some(&top), view, consequence);
            }
        }
    }
    Ok(builder.argument)
}

/// Claim nodes about barrier effectiveness or event probabilities/targets
/// that carry no indicator.
pub fn unquantified_claims(argument: &Argument) -> Vec<&ArgumentNode> {
    argument
        .nodes
        .iter()
        .filter(|n| n.quant_ref.is_none() && n.claim.as_ref().is_some_and(|c| c.aspect != Aspect::Mitigated))
        .collect()
}

// ─── Extraction (F) ────────────────────────────────────────────────────

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Extraction {
    pub indicators: BTreeSet<String>,
    /// Nodes whose quantity reference has no indicator in the SMB.
    pub unresolved: Vec<(String, QuantRef)>,
}

/// Indicator a quantity reference resolves to: the indicator itself, or the
/// first indicator linked to the referenced element.
pub fn resolve_quant_ref(quant: &QuantRef, smb: &Smb) -> Option<String> {
    match quant {
        QuantRef::Indicator(id) => smb.indicator(id).map(|i| i.id.clone()),
        QuantRef::Integrity(b) => first_linked(smb, ArtifactKind::Barrier, b),
        QuantRef::Target(e) | QuantRef::Probability(e) => first_linked(smb, ArtifactKind::Event, e),
    }
}

fn first_linked(smb: &Smb, kind: ArtifactKind, element: &str) -> Option<String> {
    smb.indicators
        .iter()
        .find(|i| i.links.iter().any(|l| l.kind == kind && l.id == element))
        .map(|i| i.id.clone())
}

/// The mapping F: the indicators an argument quantifies over.
pub fn extract_indicators(argument: &Argument, smb: &Smb) -> Extraction {
    let mut out = Extraction::default();
    for (node, quant) in argument.quant_refs() {
        match resolve_quant_ref(quant, smb) {
            Some(id) => {
                out.indicators.insert(id);
            }
            None => out.unresolved.push((node.id.clone(), quant.clone())),
        }
    }
    out
}

/// F as an SMB: the subset of `smb` quantified by `argument`.
pub fn extract_smb(argument: &Argument, smb: &Smb) -> Smb {
    smb.restrict(&extract_indicators(argument, smb).indicators)
}

// ─── Refinement ────────────────────────────────────────────────────────

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Refinement {
    pub refines: bool,
    /// Skeleton node id → argument node id, when an embedding exists.
    pub mapping: BTreeMap<String, String>,
    /// Skeleton nodes that could not be placed.
    pub unmapped: Vec<String>,
}

/// Searches for an embedding of `skeleton` into `argument`.
pub fn check_refinement(skeleton: &Argument, argument: &Argument) -> Refinement {
    let fail = |unmapped: Vec<String>| Refinement {
        refines: false,
        mapping: BTreeMap::new(),
        unmapped,
    };
    let all_nodes = || skeleton.nodes.iter().map(|n| n.id.clone()).collect::<Vec<_>>();
    if !skeleton.validate().is_empty() || !argument.validate().is_empty() {
        return fail(all_nodes());
    }

    // Label multiplicities bound any injective map.
    let mut available: HashMap<Label<'_>, usize> = HashMap::new();
    for n in &argument.nodes {
        *available.entry(n.label()).or_default() += 1;
    }
    let mut needed: HashMap<Label<'_>, usize> = HashMap::new();
    for n in &skeleton.nodes {
        *needed.entry(n.label()).or_default() += 1;
    }
    let short: Vec<String> = skeleton
        .nodes
        .iter()
        .filter(|n| needed[&n.label()] > available.get(&n.label()).copied().unwrap_or(0))
        .map(|n| n.id.clone())
        .collect();
    if !short.is_empty() {
        return fail(short);
    }

    let sk = Graph::build(skeleton);
    let ag = Graph::build(argument);
    let sk_order = sk.topological().expect("validated");
    let ag_order = ag.topological().expect("validated");
    let reach = ag.reachability(&ag_order);
    let mut candidates: HashMap<Label<'_>, Vec<usize>> = HashMap::new();
    for &i in &ag_order {
        candidates.entry(argument.nodes[i].label()).or_default().push(i);
    }

    let mut search = Embedding {
        skeleton,
        argument,
        order: &sk_order,
        sk_parents: &sk.parents,
        reach: &reach,
        candidates: &candidates,
        image: vec![usize::MAX; skeleton.nodes.len()],
        used: vec![false; argument.nodes.len()],
        deepest: 0,
    };
    if search.extend(0) {
        let mapping = search
            .image
            .iter()
            .enumerate()
            .map(|(s, &a)| (skeleton.nodes[s].id.clone(), argument.nodes[a].id.clone()))
            .collect();
        Refinement {
            refines: true,
            mapping,
            unmapped: Vec::new(),
        }
    } else {
        let blocked = sk_order[search.deepest.min(sk_order.len() - 1)];
        fail(vec![skeleton.nodes[blocked].id.clone()])
    }
}

struct Embedding<'s, 'a> {
    skeleton: &'s Argument,
    argument: &'a Argument,
    order: &'s [usize],
    sk_parents: &'s [Vec<usize>],
    reach: &'s [Vec<bool>],
    candidates: &'s HashMap<Label<'a>, Vec<usize>>,
    image: Vec<usize>,
    used: Vec<bool>,
    deepest: usize,
}

impl Embedding<'_, '_> {
    fn extend(&mut self, position: usize) -> bool {
        self.deepest = self.deepest.max(position);
        let Some(&node) = self.order.get(position) else {
            return true;
        };
        let label = self.skeleton.nodes[node].label();
        let Some(pool) = self.candidates.get(&label) else {
            return false;
        };
        debug_assert!(self.argument.nodes.len() == self.used.len());
        for &target in pool {
            if self.used[target] {
                continue;
            }
            let below_parents = self.sk_parents[node]
                .iter()
                .all(|&p| self.reach[self.image[p]][target]);
            if !below_parents {
                continue;
            }
            self.image[node] = target;
            self.used[target] = true;
            if self.extend(position + 1) {
                return true;
            }
            self.used[target] = false;
            self.image[node] = usize::MAX;
        }
        false
    }
}

// ─── Consistency ───────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum Discrepancy {
    /// Indicator that the skeleton cannot place on any claim.
    OrphanIndicator { indicator: String },
    /// Skeleton claim with no indicator monitoring it.
    UnquantifiedClaim { node: String, element: String },
    /// Skeleton node without a counterpart in the argument.
    UnmappedSkeletonNode { node: String, statement: String },
    /// Argument quantity with no SMB indicator behind it.
    UnrepresentedQuantity { node: String, quant_ref: QuantRef },
    /// SMB indicator the argument never quantifies over. Informational: the
    /// refinement law only concerns what the argument does quantify.
    UnargumentedIndicator { indicator: String },
    DanglingLink { indicator: String, element: String },
    MalformedArgument { issue: String },
}

impl fmt::Display for Discrepancy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Discrepancy::OrphanIndicator { indicator } => write!(f, "orphan indicator {indicator}"),
            Discrepancy::UnquantifiedClaim { node, element } => write!(f, "unquantified claim on {element} ({node})"),
            Discrepancy::UnmappedSkeletonNode { node, statement } => write!(f, "unmapped skeleton node {node}: {statement}"),
            Discrepancy::UnrepresentedQuantity { node, quant_ref } => {
                write!(f, "unrepresented quantity {quant_ref} at {node}")
            }
            Discrepancy::UnargumentedIndicator { indicator } => {
                write!(f, "indicator {indicator} is not referenced by the argument")
            }
            Discrepancy::DanglingLink { indicator, element } => {
                write!(f, "indicator {indicator} links to unknown element {element}")
            }
            Discrepancy::MalformedArgument { issue } => write!(f, "malformed argument: {issue}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConsistencyVerdict {
    /// F;G ≤ I: the argument refines the skeleton of what it quantifies.
    pub fg_refines: bool,
    /// G;F = I: every SMB indicator survives the trip through a skeleton.
    pub gf_identity: bool,
    pub consistent: bool,
    pub mapping: BTreeMap<String, String>,
    pub discrepancies: Vec<Discrepancy>,
}

/// Copy of `argument` with every quantity reference replaced by the
/// indicator it resolves to.
fn normalize(argument: &Argument, smb: &Smb) -> Argument {
    let mut out = argument.clone();
    for node in &mut out.nodes {
        if let Some(q) = &node.quant_ref {
            if let Some(id) = resolve_quant_ref(q, smb) {
                node.quant_ref = Some(QuantRef::Indicator(id));
            }
        }
    }
    out
}

pub fn check_consistency(smb: &Smb, argument: &Argument, architecture: &SafetyArchitecture) -> ConsistencyVerdict {
    let mut discrepancies = Vec::new();

    let gf_identity = match generate_skeleton(smb, architecture) {
        Ok(skeleton) => {
            let embedded = extract_indicators(&skeleton, smb).indicators;
            for n in unquantified_claims(&skeleton) {
                discrepancies.push(Discrepancy::UnquantifiedClaim {
                    node: n.id.clone(),
                    element: n.claim.as_ref().map(|c| c.element.clone()).unwrap_or_default(),
                });
            }
            let orphans: Vec<_> = smb
                .indicators
                .iter()
                .filter(|i| !embedded.contains(&i.id))
                .map(|i| Discrepancy::OrphanIndicator { indicator: i.id.clone() })
                .collect();
            let identical = orphans.is_empty();
            discrepancies.extend(orphans);
            identical
        }
        Err(ArgumentError::DanglingLink { indicator, element }) => {
            discrepancies.push(Discrepancy::DanglingLink { indicator, element });
            false
        }
        Err(_) => false,
    };

    let mut mapping = BTreeMap::new();
    let issues = argument.validate();
    let fg_refines = if !issues.is_empty() {
        discrepancies.extend(issues.iter().map(|i| Discrepancy::MalformedArgument { issue: i.to_string() }));
        false
    } else {
        let extraction = extract_indicators(argument, smb);
        let represented = extraction.unresolved.is_empty();
        discrepancies.extend(
            smb.indicators
                .iter()
                .filter(|i| !extraction.indicators.contains(&i.id))
                .map(|i| Discrepancy::UnargumentedIndicator { indicator: i.id.clone() }),
        );
        discrepancies.extend(
            extraction
                .unresolved
                .into_iter()
                .map(|(node, quant_ref)| Discrepancy::UnrepresentedQuantity { node, quant_ref }),
        );
        match generate_skeleton(&smb.restrict(&extraction.indicators), architecture) {
            Ok(skeleton) => {
                let refinement = check_refinement(&skeleton, &normalize(argument, smb));
                for id in &refinement.unmapped {
                    let statement = skeleton.node(id).map(|n| n.statement.clone()).unwrap_or_default();
                    discrepancies.push(Discrepancy::UnmappedSkeletonNode {
                        node: id.clone(),
                        statement,
                    });
                }
                mapping = refinement.mapping;
                represented && refinement.refines
            }
            Err(_) => false,
        }
    };

    ConsistencyVerdict {
        fg_refines,
        gf_identity,
        consistent: fg_refines && gf_identity,
        mapping,
        discrepancies,
    }
}

// ─── Editing helpers ───────────────────────────────────────────────────

impl Argument {
    /// Inserts `node` between `parent` and `child`.
    pub fn interpose(&mut self, parent: &str, child: &str, node: ArgumentNode) -> bool {
        let Some(edge) = self.edges.iter_mut().find(|e| e.parent == parent && e.child == child) else {
            return false;
        };
        edge.child = node.id.clone();
        self.edges.push(Edge {
            parent: node.id.clone(),
            child: child.to_string(),
        });
        self.nodes.push(node);
        true
    }

    /// Adds `node` as a new child of `parent`.
    pub fn attach(&mut self, parent: &str, node: ArgumentNode) {
        self.edges.push(Edge {
            parent: parent.to_string(),
            child: node.id.clone(),
        });
        self.nodes.push(node);
    }

    /// Removes a node, reconnecting its children to its parents. Removing
    /// the root promotes a single child, or a fresh prose goal otherwise.
    pub fn remove(&mut self, id: &str) {
        let parents: Vec<String> = self.edges.iter().filter(|e| e.child == id).map(|e| e.parent.clone()).collect();
        let children: Vec<String> = self.edges.iter().filter(|e| e.parent == id).map(|e| e.child.clone()).collect();
        self.nodes.retain(|n| n.id != id);
        self.edges.retain(|e| e.parent != id && e.child != id);
        if parents.is_empty() && children.len() > 1 {
            let root = ArgumentNode::new(format!("{id}~root"), NodeKind::Goal, "Overall claim");
            for c in &children {
                self.edges.push(Edge {
                    parent: root.id.clone(),
                    child: c.clone(),
                });
            }
            self.nodes.push(root);
        }
        for p in &parents {
            for c in &children {
                self.edges.push(Edge {
                    parent: p.clone(),
                    child: c.clone(),
                });
            }
        }
    }
}
