//! Random safety architectures and measurement bases built from a flat
//! vector of draws, so proptest can generate arbitrarily shaped models.

use dynassure_core::architecture::{
    Barrier, BarrierRole, BowTieView, ConsequenceChain, Event, EventKind, IntermediatePlacement, Likelihood,
    OperatingContext, PointValues, RiskMatrixConfig, SafetyArchitecture, ThreatChain,
};
use dynassure_core::smb::{ArtifactRef, Comparator, Exposure, Indicator, Measure, Smb};
use proptest::prelude::*;

pub struct Draw {
    ints: Vec<u32>,
    next: usize,
}

impl Draw {
    pub fn new(ints: Vec<u32>) -> Self {
        Self { ints, next: 0 }
    }

    /// Uniform-ish value in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        let v = self.ints[self.next % self.ints.len()];
        self.next += 1;
        v as usize % n.max(1)
    }

    pub fn coin(&mut self) -> bool {
        self.below(2) == 1
    }
}

fn context(tag: &str) -> OperatingContext {
    OperatingContext {
        activity: format!("activity {tag}"),
        environment: "environment".into(),
        system_state: "nominal".into(),
        operation_fraction: 0.5,
    }
}

fn event(id: &str, kind: EventKind, p: Option<f64>) -> Event {
    Event {
        id: id.into(),
        name: String::new(),
        kind,
        severity: (kind == EventKind::Consequence).then_some(3),
        probability: p.map(Likelihood::Point),
        target_probability: None,
    }
}

fn barrier(id: &str, role: BarrierRole, integrity: f64) -> Barrier {
    Barrier {
        id: id.into(),
        name: String::new(),
        role,
        integrity: Likelihood::Point(integrity),
        controls: vec![],
        nested_architecture: None,
    }
}

/// Picks an ordered subset of `pool`.
fn subset(draw: &mut Draw, pool: &[String]) -> Vec<String> {
    pool.iter().filter(|_| draw.coin()).cloned().collect()
}

/// Single-view model with up to `max_threats` threats and `max_barriers`
/// barriers; every architecture value is drawn from `values`.
pub fn small_model(
    draw: &mut Draw,
    values: &[f64],
    max_threats: usize,
    max_barriers: usize,
    intermediates: bool,
) -> (SafetyArchitecture, PointValues) {
    let mut vals = values.iter().copied().cycle();
    let mut point = PointValues::new();
    let mut events = Vec::new();
    let mut barriers = Vec::new();

    let n_threats = 1 + draw.below(max_threats);
    let n_barriers = draw.below(max_barriers + 1);
    let (mut prevention, mut recovery) = (Vec::new(), Vec::new());
    for i in 0..n_barriers {
        let id = format!("B{i}");
        let role = if draw.coin() { BarrierRole::Prevention } else { BarrierRole::Recovery };
        let v = vals.next().unwrap();
        point.insert(id.clone(), v);
        barriers.push(barrier(&id, role, v));
        match role {
            BarrierRole::Prevention => prevention.push(id),
            BarrierRole::Recovery => recovery.push(id),
        }
    }

    let mut threat_chains = Vec::new();
    for t in 0..n_threats {
        let id = format!("T{t}");
        let p = vals.next().unwrap();
        point.insert(id.clone(), p);
        events.push(event(&id, EventKind::Threat, Some(p)));
        let chain_barriers = subset(draw, &prevention);
        let mut placements = Vec::new();
        if intermediates && draw.coin() {
            let inter = format!("I{t}");
            events.push(event(&inter, EventKind::Intermediate, None));
            placements.push(IntermediatePlacement {
                event: inter,
                after: draw.below(chain_barriers.len() + 1),
            });
        }
        threat_chains.push(ThreatChain {
            threat: id,
            barriers: chain_barriers,
            intermediates: placements,
        });
    }

    events.push(event("TOP", EventKind::Top, None));
    let n_consequences = 1 + draw.below(2);
    for c in 0..n_consequences {
        events.push(event(&format!("C{c}"), EventKind::Consequence, None));
    }
    let mut consequence_chains: Vec<ConsequenceChain> = (0..n_consequences)
        .map(|c| ConsequenceChain {
            barriers: subset(draw, &recovery),
            consequence: format!("C{c}"),
        })
        .collect();
    if draw.coin() {
        let c = draw.below(n_consequences);
        consequence_chains.push(ConsequenceChain {
            barriers: subset(draw, &recovery),
            consequence: format!("C{c}"),
        });
    }

    let arch = SafetyArchitecture {
        events,
        barriers,
        bowties: vec![BowTieView {
            id: "view".into(),
            context: context("0"),
            top_event: "TOP".into(),
            threat_chains,
            consequence_chains,
        }],
        risk_matrix: RiskMatrixConfig::default(),
    };
    (arch, point)
}

pub fn arb_small_model(
    max_threats: usize,
    max_barriers: usize,
    intermediates: bool,
) -> impl Strategy<Value = (SafetyArchitecture, PointValues)> {
    (
        prop::collection::vec(any::<u32>(), 64),
        prop::collection::vec(0.0f64..=1.0, 16),
    )
        .prop_map(move |(ints, values)| small_model(&mut Draw::new(ints), &values, max_threats, max_barriers, intermediates))
}

/// Multi-view architecture with shared threats and barriers, intermediate
/// events, and an SMB whose indicators all link to elements used by a view.
pub fn consistency_pair(draw: &mut Draw) -> (SafetyArchitecture, Smb) {
    let n_prev = 1 + draw.below(5);
    let n_rec = 1 + draw.below(3);
    let n_threats = 1 + draw.below(4);
    let prevention: Vec<String> = (0..n_prev).map(|i| format!("P{i}")).collect();
    let recovery: Vec<String> = (0..n_rec).map(|i| format!("R{i}")).collect();
    let threats: Vec<String> = (0..n_threats).map(|i| format!("T{i}")).collect();

    let mut events: Vec<Event> = threats.iter().map(|t| event(t, EventKind::Threat, Some(0.1))).collect();
    let barriers = prevention
        .iter()
        .map(|b| barrier(b, BarrierRole::Prevention, 0.9))
        .chain(recovery.iter().map(|b| barrier(b, BarrierRole::Recovery, 0.9)))
        .collect();

    let mut views = Vec::new();
    let mut intermediate = 0;
    for v in 0..1 + draw.below(2) {
        let top = format!("H{v}");
        events.push(event(&top, EventKind::Top, None));
        let mut chains = Vec::new();
        for _ in 0..1 + draw.below(3) {
            let barriers = subset(draw, &prevention);
            let mut placements = Vec::new();
            if draw.below(3) == 0 {
                let id = format!("I{intermediate}");
                intermediate += 1;
                events.push(event(&id, EventKind::Intermediate, None));
                placements.push(IntermediatePlacement {
                    event: id,
                    after: draw.below(barriers.len() + 1),
                });
            }
            chains.push(ThreatChain {
                threat: threats[draw.below(threats.len())].clone(),
                barriers,
                intermediates: placements,
            });
        }
        let mut consequence_chains = Vec::new();
        for c in 0..1 + draw.below(2) {
            let id = format!("C{v}{c}");
            events.push(event(&id, EventKind::Consequence, None));
            consequence_chains.push(ConsequenceChain {
                barriers: subset(draw, &recovery),
                consequence: id,
            });
        }
        views.push(BowTieView {
            id: format!("view{v}"),
            context: context(&v.to_string()),
            top_event: top,
            threat_chains: chains,
            consequence_chains,
        });
    }

    let arch = SafetyArchitecture {
        events,
        barriers,
        bowties: views,
        risk_matrix: RiskMatrixConfig::default(),
    };

    // indicators on elements that appear in some view
    let mut used: Vec<ArtifactRef> = Vec::new();
    for view in &arch.bowties {
        for e in view.event_ids() {
            used.push(ArtifactRef::event(e));
        }
        for b in view.barrier_ids() {
            used.push(ArtifactRef::barrier(b));
        }
    }
    used.sort();
    used.dedup();
    let mut indicators = Vec::new();
    for element in &used {
        for _ in 0..draw.below(3) {
            let id = format!("SI{}", indicators.len());
            let mut links = vec![element.clone()];
            if draw.below(6) == 0 {
                links.push(used[draw.below(used.len())].clone());
                links.dedup();
            }
            indicators.push(Indicator {
                id,
                metric: "m".into(),
                comparator: Comparator::Le,
                threshold: 1.0,
                exposure: Exposure::events(10.0, "operation", None),
                links,
            });
        }
    }
    let smb = Smb {
        measures: vec![Measure {
            id: "m".into(),
            unit: String::new(),
            source: String::new(),
        }],
        indicators,
        ..Smb::default()
    };
    (arch, smb)
}
