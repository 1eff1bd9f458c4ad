//! Plain-text tables. Boundaries print as integers, probabilities with four
//! decimals and sample sizes with two; JSON output keeps full precision.

use std::fmt::Write;

use bop2te::boundary::{Decision, DecisionRecord, StopReason, StoppingBoundaries};
use bop2te::optimizer::OptimizationResult;
use bop2te::sim::MultiDoseResult;

use crate::app::OcReport;
use crate::config::MultiDoseConfig;
use crate::store::{DecisionLogEntry, DesignDocument};

fn bound(b: Option<i64>) -> String {
    b.map_or_else(|| "-".to_string(), |v| v.to_string())
}

pub fn boundary_table(boundaries: &StoppingBoundaries) -> String {
    let mut out = String::new();
    writeln!(out, "{:>6}  {:>21}  {:>22}", "n", "no-go if responses <=", "no-go if toxicities >=").unwrap();
    for look in &boundaries.looks {
        writeln!(out, "{:>6}  {:>21}  {:>22}", look.n, bound(look.l_e), bound(look.l_t)).unwrap();
    }
    out
}

pub fn result_summary(result: &OptimizationResult) -> String {
    let mut out = String::new();
    write!(out, "Method: {}", result.method.label()).unwrap();
    if let Some(q) = &result.q {
        write!(out, "  (lambda_e = {:.3}, lambda_t = {:.3}, gamma = {:.4})", q.lambda_e, q.lambda_t, q.gamma).unwrap();
    }
    writeln!(out).unwrap();
    if !result.feasible {
        writeln!(out, "WARNING: no candidate meets every type I error target; closest design shown").unwrap();
    }
    out.push_str(&boundary_table(&result.boundaries));
    let (a00, a01, a10) = result.type_i_errors();
    writeln!(out, "alpha00 = {a00:.4}  alpha01 = {a01:.4}  alpha10 = {a10:.4}  power = {:.4}", result.power()).unwrap();
    out
}

pub fn design_report(doc: &DesignDocument) -> String {
    let mut out = format!("Design {}\n", doc.id);
    match &doc.result {
        Some(r) => out.push_str(&result_summary(r)),
        None => out.push_str("(no boundaries computed)\n"),
    }
    out
}

pub fn oc_table(report: &OcReport) -> String {
    let mut out = String::new();
    let with_mc = report.hypotheses.iter().any(|h| h.monte_carlo.is_some());
    write!(out, "{:<4} {:>14} {:>6}  {:>7} {:>7} {:>7}", "H", "(pi_e, pi_t)", "phi", "PCP", "PET", "ESS").unwrap();
    if with_mc {
        write!(out, "  {:>16} {:>16} {:>15}", "PCP (MC ± SE)", "PET (MC ± SE)", "ESS (MC ± SE)").unwrap();
    }
    writeln!(out).unwrap();
    for h in &report.hypotheses {
        write!(
            out,
            "{:<4} {:>14} {:>6}  {:>7.4} {:>7.4} {:>7.2}",
            h.hypothesis.label(),
            format!("({:.2}, {:.2})", h.pi_e, h.pi_t),
            format!("{}", h.phi),
            h.exact.pcp,
            h.exact.pet,
            h.exact.ess
        )
        .unwrap();
        if let Some(mc) = &h.monte_carlo {
            write!(
                out,
                "  {:>16} {:>16} {:>15}",
                format!("{:.4} ± {:.4}", mc.pcp, mc.pcp_se),
                format!("{:.4} ± {:.4}", mc.pet, mc.pet_se),
                format!("{:.2} ± {:.2}", mc.ess, mc.ess_se)
            )
            .unwrap();
        }
        writeln!(out).unwrap();
    }
    if let Some(points) = &report.phi_sensitivity {
        writeln!(out).unwrap();
        writeln!(out, "{:>8}  {:>7} {:>7} {:>7} {:>7}", "phi", "alpha00", "alpha01", "alpha10", "power").unwrap();
        for p in points {
            writeln!(
                out,
                "{:>8}  {:>7.4} {:>7.4} {:>7.4} {:>7.4}",
                format!("{}", p.phi),
                p.alpha00,
                p.alpha01,
                p.alpha10,
                p.power
            )
            .unwrap();
        }
    }
    out
}

fn reasons(r: &[StopReason]) -> String {
    r.iter()
        .map(|s| match s {
            StopReason::Futility => "futility",
            StopReason::Toxicity => "toxicity",
        })
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn decision_text(record: &DecisionRecord) -> String {
    let mut out = String::new();
    let verdict = match record.decision {
        Decision::Go => "GO".to_string(),
        Decision::NoGo => format!("NO-GO ({})", reasons(&record.reasons)),
    };
    writeln!(
        out,
        "n = {}: {} responses, {} toxicities -> {}{}",
        record.n,
        record.x_e,
        record.x_t,
        verdict,
        if record.final_look { " [final analysis]" } else { "" }
    )
    .unwrap();
    let cutoff = |c: Option<f64>| c.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
    writeln!(
        out,
        "  Pr(pi_e > eta_e_null | data) = {:.4}   cutoff {}   bound {}",
        record.posterior_prob_eff,
        cutoff(record.cutoff_eff),
        bound(record.l_e)
    )
    .unwrap();
    writeln!(
        out,
        "  Pr(pi_t <= eta_t_null | data) = {:.4}  cutoff {}   bound {}",
        record.posterior_prob_tox,
        cutoff(record.cutoff_tox),
        bound(record.l_t)
    )
    .unwrap();
    out
}

pub fn decision_log_table(entries: &[DecisionLogEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        write!(out, "#{} {} ", e.sequence, e.recorded_at.to_rfc3339()).unwrap();
        out.push_str(&decision_text(&e.record));
    }
    out
}

pub fn multidose_table(config: &MultiDoseConfig, result: &MultiDoseResult) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "Per-arm boundaries: responses <= {:?}, toxicities >= {:?}; {} replicates, seed {}",
        result.boundaries.efficacy_bounds(),
        result.boundaries.toxicity_bounds(),
        result.replicates,
        result.seed
    )
    .unwrap();
    writeln!(
        out,
        "{:<8} {:>14}  {:>11} {:>12} {:>10}",
        "Dose", "(pi_e, pi_t)", "Selection %", "Early stop %", "Average n"
    )
    .unwrap();
    for (arm, truth) in result.arms.iter().zip(&config.truth) {
        writeln!(
            out,
            "{:<8} {:>14}  {:>11.1} {:>12.1} {:>10.2}",
            arm.label,
            format!("({:.2}, {:.2})", truth.pi_e, truth.pi_t),
            arm.selection_pct,
            arm.early_stop_pct,
            arm.average_n
        )
        .unwrap();
    }
    writeln!(out, "No dose selected: {:.1}%", result.no_selection_pct).unwrap();
    out
}
