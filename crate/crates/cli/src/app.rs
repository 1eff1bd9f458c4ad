//! Operations shared by the CLI and the HTTP service.

use bop2te::boundary::{interim_decision, DecisionRecord, InterimCounts, StoppingBoundaries};
use bop2te::design::{DesignSpec, Hypothesis};
use bop2te::oc::{operating_characteristics, phi_sensitivity_curve, OperatingCharacteristics, PhiSensitivityPoint};
use bop2te::optimizer::{global_boundary_search, optimize_with, OptimizationResult, OptimizeOptions, SearchMethod};
use bop2te::sim::{estimate_oc, simulate_arms, MonteCarloOc, MultiDoseResult, SimulationConfig};
use serde::{Deserialize, Serialize};

use crate::config::{DesignConfig, MultiDoseConfig, OcRequest, DEFAULT_SEED};
use crate::error::AppError;
use crate::store::{DecisionLogEntry, DesignDocument, Store};

pub fn run_search(config: &DesignConfig) -> Result<OptimizationResult, AppError> {
    config.spec.validate()?;
    Ok(match config.search {
        SearchMethod::Grid => optimize_with(&config.spec, &OptimizeOptions { grid: config.grid })?,
        SearchMethod::Global => global_boundary_search(&config.spec, false)?,
        SearchMethod::GlobalPractical => global_boundary_search(&config.spec, true)?,
    })
}

/// Optimizes and saves a new design document.
pub fn create_design(store: &Store, config: &DesignConfig) -> Result<DesignDocument, AppError> {
    let result = run_search(config)?;
    let doc = DesignDocument::new(config, Some(result));
    store.put_document(doc.clone())?;
    Ok(doc)
}

fn result_of(doc: &DesignDocument) -> Result<&OptimizationResult, AppError> {
    doc.result.as_ref().ok_or_else(|| AppError::Conflict(format!("design `{}` has no boundaries yet", doc.id)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisOc {
    pub hypothesis: Hypothesis,
    pub pi_e: f64,
    pub pi_t: f64,
    pub phi: f64,
    #[serde(flatten)]
    pub exact: OperatingCharacteristics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<MonteCarloOc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcReport {
    /// Absent when the report is for a spec that was not saved.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub document_id: Option<String>,
    pub hypotheses: Vec<HypothesisOc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_sensitivity: Option<Vec<PhiSensitivityPoint>>,
}

pub fn oc_report(doc: &DesignDocument, request: &OcRequest) -> Result<OcReport, AppError> {
    let result = result_of(doc)?;
    oc_for_boundaries(Some(doc.id.clone()), &doc.spec, &result.boundaries, request)
}

/// Operating characteristics of arbitrary boundaries under a spec's hypotheses.
pub fn oc_for_boundaries(
    document_id: Option<String>,
    spec: &DesignSpec,
    boundaries: &StoppingBoundaries,
    request: &OcRequest,
) -> Result<OcReport, AppError> {
    spec.validate()?;
    boundaries.validate()?;
    let looks: Vec<usize> = boundaries.looks.iter().map(|l| l.n).collect();
    let schedule: Vec<usize> = spec.schedule.iter().map(|l| l.n).collect();
    if looks != schedule {
        return Err(AppError::validation(
            "boundaries",
            format!("boundary looks {looks:?} do not match the schedule {schedule:?}"),
        ));
    }
    let phi = request.phi.unwrap_or(spec.design_phi);
    let mc = match request.mc {
        Some(reps) => Some(SimulationConfig::new(reps, request.seed.unwrap_or(DEFAULT_SEED))?),
        None => None,
    };
    let hypotheses = Hypothesis::ALL
        .into_iter()
        .map(|h| {
            let truth = spec.hypothesis_outcome(h, phi)?;
            Ok(HypothesisOc {
                hypothesis: h,
                pi_e: truth.pi_e,
                pi_t: truth.pi_t,
                phi,
                exact: operating_characteristics(boundaries, &truth)?,
                monte_carlo: match &mc {
                    Some(cfg) => Some(estimate_oc(boundaries, &truth, cfg)?),
                    None => None,
                },
            })
        })
        .collect::<Result<Vec<_>, AppError>>()?;
    let phi_sensitivity = match &request.phi_grid {
        Some(grid) if grid.is_empty() => {
            return Err(AppError::validation("phi_grid", "must list at least one odds ratio"))
        }
        Some(grid) => Some(phi_sensitivity_curve(boundaries, spec, grid)?),
        None => None,
    };
    Ok(OcReport { document_id, hypotheses, phi_sensitivity })
}

/// Evaluates interim data against a stored design and appends it to the log.
///
/// Looks must be submitted in schedule order and cumulative counts may not
/// shrink; violations are conflicts with the recorded log.
pub fn record_decision(store: &Store, id: &str, counts: InterimCounts) -> Result<DecisionLogEntry, AppError> {
    store.append_decision(id, |doc, log| {
        let result = result_of(doc)?;
        if let Some(prev) = log.last() {
            let prev = &prev.record;
            if counts.n <= prev.n {
                return Err(AppError::Conflict(format!(
                    "look n = {} is not after the last recorded look n = {}",
                    counts.n, prev.n
                )));
            }
            if prev.decision == bop2te::boundary::Decision::NoGo {
                return Err(AppError::Conflict(format!("the trial already stopped at n = {}", prev.n)));
            }
            let added = counts.n - prev.n;
            if counts.x_e < prev.x_e
                || counts.x_t < prev.x_t
                || counts.x_e - prev.x_e > added
                || counts.x_t - prev.x_t > added
            {
                return Err(AppError::Conflict(format!(
                    "cumulative counts ({}, {}) at n = {} are inconsistent with ({}, {}) at n = {}",
                    counts.x_e, counts.x_t, counts.n, prev.x_e, prev.x_t, prev.n
                )));
            }
        }
        decide(&doc.spec, result, counts)
    })
}

pub fn decide(
    spec: &DesignSpec,
    result: &OptimizationResult,
    counts: InterimCounts,
) -> Result<DecisionRecord, AppError> {
    Ok(interim_decision(spec, &result.boundaries, result.q.as_ref(), counts)?)
}

pub fn run_multidose(config: &MultiDoseConfig) -> Result<MultiDoseResult, AppError> {
    config.validate()?;
    let boundaries = bop2te::optimizer::optimize(&config.dose.per_arm_design)?.boundaries;
    Ok(simulate_arms(&config.dose, &boundaries, &config.outcomes()?, &config.simulation()?)?)
}
