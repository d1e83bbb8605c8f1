use std::collections::BTreeSet;

use dynassure_core::argument::{
    check_consistency, check_refinement, extract_indicators, generate_skeleton, Argument, ArgumentNode, Aspect,
    Discrepancy, NodeKind,
};
use dynassure_core::smb::Smb;
use proptest::prelude::*;

use super::models::{consistency_pair, Draw};
use super::{run, Check};

/// Adds `count` unquantified nodes: strategies interposed on edges, and
/// prose goals or context attached below non-solution nodes.
fn insert_prose(argument: &Argument, draw: &mut Draw, count: usize, tag: &str) -> Argument {
    let mut out = argument.clone();
    for k in 0..count {
        let id = format!("{tag}{k}");
        if draw.coin() && !out.edges.is_empty() {
            let edge = out.edges[draw.below(out.edges.len())].clone();
            out.interpose(&edge.parent, &edge.child, ArgumentNode::new(id, NodeKind::Strategy, "Argument over sub-claims"));
        } else {
            let hosts: Vec<String> = out
                .nodes
                .iter()
                .filter(|n| n.kind != NodeKind::Solution)
                .map(|n| n.id.clone())
                .collect();
            let host = &hosts[draw.below(hosts.len())];
            let kind = if draw.coin() { NodeKind::Goal } else { NodeKind::Context };
            out.attach(host, ArgumentNode::new(id, kind, "Additional reasoning"));
        }
    }
    out
}

fn indicator_ids(smb: &Smb) -> BTreeSet<String> {
    smb.indicators.iter().map(|i| i.id.clone()).collect()
}

/// One full round of the consistency laws on a random architecture/SMB pair.
fn round(ints: Vec<u32>) -> Result<(), TestCaseError> {
    let mut draw = Draw::new(ints);
    let (arch, smb) = consistency_pair(&mut draw);
    prop_assert!(arch.validate().is_empty(), "{:?}", arch.validate());
    let skeleton = generate_skeleton(&smb, &arch).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!(skeleton.validate().is_empty(), "{:?}", skeleton.validate());

    // G;F = I
    prop_assert_eq!(extract_indicators(&skeleton, &smb).indicators, indicator_ids(&smb));
    let verdict = check_consistency(&smb, &skeleton, &arch);
    prop_assert!(verdict.consistent, "{:?}", verdict.discrepancies);

    // one solution leaf per threat chain under every consequence claim
    let claims: usize = arch
        .bowties
        .iter()
        .map(|v| v.consequences().len() * v.threat_chains.len())
        .sum();
    let threat_leaves = skeleton
        .leaves()
        .filter(|n| n.kind == NodeKind::Solution && n.claim.as_ref().is_some_and(|c| c.aspect == Aspect::Probability))
        .count();
    prop_assert_eq!(threat_leaves, claims);

    // reflexive, preserved by prose insertions, transitive
    prop_assert!(check_refinement(&skeleton, &skeleton).refines);
    let n1 = 1 + draw.below(4);
    let richer = insert_prose(&skeleton, &mut draw, n1, "x");
    let n2 = 1 + draw.below(4);
    let richest = insert_prose(&richer, &mut draw, n2, "y");
    prop_assert!(richer.validate().is_empty());
    prop_assert!(check_refinement(&skeleton, &richer).refines);
    prop_assert!(check_refinement(&richer, &richest).refines);
    prop_assert!(check_refinement(&skeleton, &richest).refines);
    prop_assert!(check_consistency(&smb, &richest, &arch).consistent);

    // deleting any quantified node is detected and named
    for node in richest.nodes.iter().filter(|n| n.quant_ref.is_some()) {
        let mut pruned = richest.clone();
        pruned.remove(&node.id);
        let r = check_refinement(&skeleton, &pruned);
        prop_assert!(!r.refines, "deleting {} went unnoticed", node.id);
        prop_assert!(r.unmapped.contains(&node.id), "{} not in {:?}", node.id, r.unmapped);
        let verdict = check_consistency(&smb, &pruned, &arch);
        if node.claim.is_some() {
            prop_assert!(!verdict.fg_refines);
        } else {
            // an extra indicator solution: no claim is lost, but the
            // indicator is reported as no longer argued over
            let id = node.quant_ref.as_ref().unwrap().to_string();
            let dropped = pruned.nodes.iter().all(|n| n.quant_ref.as_ref().map(|q| q.to_string()) != Some(id.clone()));
            let reported = Discrepancy::UnargumentedIndicator { indicator: id };
            prop_assert!(!dropped || verdict.discrepancies.contains(&reported), "missing {:?}", reported);
        }
    }
    Ok(())
}

pub fn round_trip(cases: u32) -> Check {
    run(cases, prop::collection::vec(any::<u32>(), 128), round)
}
