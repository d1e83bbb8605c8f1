//! Plain-text rendering of the API documents.

use std::fmt::Write;

use dynassure_core::smb::{StatusRow, Verdict};

use crate::documents::{
    ratios_by_reference, ConsistencyDocument, DistSummary, IndicatorsDocument, ReportSection, RiskDocument,
    TrendDocument,
};

fn mark(verdict: Verdict) -> &'static str {
    match verdict {
        Verdict::Met => "[met]",
        Verdict::Violated => "[VIOLATED]",
        Verdict::InsufficientExposure => "[insufficient]",
    }
}

fn dist(d: &DistSummary) -> String {
    format!("Beta({}, {}) mean {:.4} var {:.4}", d.alpha, d.beta, d.mean, d.variance)
}

fn prob(p: f64) -> String {
    format!("{p:.4e}")
}

pub fn indicators(doc: &IndicatorsDocument) -> String {
    let mut out = String::new();
    let latest = doc.latest_run.map(|t| t.to_rfc3339()).unwrap_or_else(|| "-".into());
    let _ = writeln!(out, "Indicators ({} runs, latest {latest})", doc.runs);
    for row in &doc.indicators {
        match row {
            StatusRow::Status(s) => {
                let _ = writeln!(
                    out,
                    "  {:<16} {:>12} {} {:<8} exposure {}/{}  {}",
                    s.indicator,
                    s.value + 0.0,
                    s.comparator.symbol(),
                    s.threshold,
                    s.exposure_observed,
                    s.exposure_required,
                    mark(s.verdict),
                );
            }
            StatusRow::Error { indicator, error } => {
                let _ = writeln!(out, "  {indicator:<16} error: {error}");
            }
        }
    }
    out
}

pub fn risk(doc: &RiskDocument) -> String {
    let mut out = String::new();
    let title = if doc.hypothetical { "What-if" } else { "Risk" };
    match &doc.revision {
        Some(r) => {
            let _ = writeln!(out, "{title} (revision {}, exposure {})", r.sequence, r.at_exposure);
        }
        None => {
            let _ = writeln!(out, "{title} (baseline, no revision)");
        }
    }
    if !doc.overrides.is_empty() {
        let set: Vec<String> = doc.overrides.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let _ = writeln!(out, "  overrides: {}", set.join(", "));
    }
    let _ = writeln!(out, "  Events by risk level:");
    for e in &doc.events {
        let mut line = format!("    {:<4} {:<12} Pr {}", e.id, format!("{:?}", e.kind).to_lowercase(), prob(e.probability));
        if let Some(c) = &e.classification {
            let _ = write!(line, "  RRL {c}");
        }
        if let Some(p) = e.previous.filter(|_| doc.revision.is_some()) {
            let _ = write!(line, "  previous {}", prob(p));
            if let Some(c) = &e.previous_classification {
                let _ = write!(line, " {c}");
            }
        }
        if let Some(b) = e.baseline.filter(|_| doc.revision.is_some()) {
            let _ = write!(line, "  baseline {}", prob(b));
        }
        let ratios = ratios_by_reference(e);
        if !ratios.is_empty() {
            let parts: Vec<String> = ratios.iter().map(|(k, v)| format!("{k} {v:.4}")).collect();
            let _ = write!(line, "  RR [{}]", parts.join(", "));
        }
        let _ = writeln!(out, "{line}");
        if let (Some(prior), Some(post)) = (&e.prior, &e.posterior) {
            let _ = writeln!(out, "         prior {} -> posterior {}", dist(prior), dist(post));
        }
    }
    let _ = writeln!(out, "  Barriers by integrity:");
    for b in &doc.barriers {
        let mut line = format!(
            "    {:<4} {:<10} integrity {:.4} (declared {:.4}){}",
            b.id,
            format!("{:?}", b.role).to_lowercase(),
            b.integrity,
            b.baseline,
            if b.overridden { " overridden" } else { "" }
        );
        if let Some(si) = &b.derived_indicator {
            let _ = write!(
                line,
                "  SI: at most {} failures in {} demands (bound {:.4})",
                si.threshold, si.exposure, si.lower_bound
            );
        }
        let _ = writeln!(out, "{line}");
        if let Some(prior) = &b.prior {
            let mut detail = format!("         prior {}", dist(prior));
            if let (Some(obs), Some(post)) = (&b.observation, &b.posterior) {
                let _ = write!(
                    detail,
                    " + {} successes / {} failures -> posterior {}",
                    obs.successes(),
                    obs.failures(),
                    dist(post)
                );
            }
            let _ = writeln!(out, "{detail}");
        }
    }
    out
}

pub fn trend(doc: &TrendDocument) -> String {
    let a = &doc.assessment;
    let mut out = format!("Trend {} ({} points)", a.event_id, a.series.len());
    match &a.trend {
        Some(t) => {
            let _ = write!(out, ": RR slope {:.4e} per unit exposure, intercept {:.4}", t.slope, t.intercept);
        }
        None => out.push_str(": too few points for a trend"),
    }
    let _ = writeln!(out, "; drift {}", a.verdict);
    out
}

pub fn consistency(doc: &ConsistencyDocument) -> String {
    let v = &doc.verdict;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Consistency: {} (F;G <= I {}, G;F = I {})",
        if v.consistent { "consistent" } else { "INCONSISTENT" },
        v.fg_refines,
        v.gf_identity
    );
    for d in &v.discrepancies {
        let _ = writeln!(out, "  - {d}");
    }
    out
}

pub fn section(section: &ReportSection) -> String {
    match section {
        ReportSection::Indicators(d) => indicators(d),
        ReportSection::Risk(d) | ReportSection::WhatIf(d) => risk(d),
        ReportSection::Trend(d) => trend(d),
        ReportSection::Consistency(d) => consistency(d),
    }
}
