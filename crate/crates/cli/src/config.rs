//! JSON documents shared by the CLI config files and the HTTP request bodies.

use bop2te::boundary::StoppingBoundaries;
use bop2te::design::DesignSpec;
use bop2te::optimizer::{GridVariant, SearchMethod};
use bop2te::prob::{pi_et_from_phi, OutcomeProbabilities};
use bop2te::sim::{DoseOptimizationSpec, SimulationConfig};
use serde::{Deserialize, Serialize};

use crate::error::AppError;

/// A design spec plus how to search for its boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignConfig {
    #[serde(flatten)]
    pub spec: DesignSpec,
    #[serde(default = "default_search")]
    pub search: SearchMethod,
    #[serde(default)]
    pub grid: GridVariant,
    #[serde(default)]
    pub annotation: String,
}

fn default_search() -> SearchMethod {
    SearchMethod::Grid
}

impl DesignConfig {
    pub fn new(spec: DesignSpec) -> Self {
        DesignConfig { spec, search: SearchMethod::Grid, grid: GridVariant::default(), annotation: String::new() }
    }
}

/// Input for `oc --config`: a design config, optionally with boundaries to
/// evaluate as given instead of optimizing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcConfig {
    #[serde(flatten)]
    pub design: DesignConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundaries: Option<StoppingBoundaries>,
}

/// True outcome probabilities for one arm. `pi_et` wins over `phi`; with
/// neither the endpoints are independent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmTruth {
    pub pi_e: f64,
    pub pi_t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi_et: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
}

impl ArmTruth {
    pub fn outcome(&self) -> Result<OutcomeProbabilities, AppError> {
        let pi_et = match (self.pi_et, self.phi) {
            (Some(p), _) => p,
            (None, phi) => pi_et_from_phi(self.pi_e, self.pi_t, phi.unwrap_or(1.0))?,
        };
        Ok(OutcomeProbabilities::new(self.pi_e, self.pi_t, pi_et)?)
    }
}

pub const DEFAULT_SEED: u64 = 20_240_601;
pub const DEFAULT_MULTIDOSE_REPLICATES: usize = 10_000;

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_multidose_replicates() -> usize {
    DEFAULT_MULTIDOSE_REPLICATES
}

/// Multi-dose simulation request: dose spec, per-arm truth and replicate count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiDoseConfig {
    #[serde(flatten)]
    pub dose: DoseOptimizationSpec,
    /// One entry per arm, in the order of `arms`.
    pub truth: Vec<ArmTruth>,
    #[serde(default = "default_multidose_replicates")]
    pub replicates: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl MultiDoseConfig {
    pub fn simulation(&self) -> Result<SimulationConfig, AppError> {
        Ok(SimulationConfig::new(self.replicates, self.seed)?)
    }

    pub fn outcomes(&self) -> Result<Vec<OutcomeProbabilities>, AppError> {
        self.truth.iter().map(ArmTruth::outcome).collect()
    }

    /// Checks everything that can be checked before optimizing. A single arm
    /// is accepted and reduces to a single-arm trial simulation.
    pub fn validate(&self) -> Result<(), AppError> {
        match self.dose.arms.len() {
            0 => return Err(AppError::validation("arms", "at least one arm is required")),
            1 => {
                if !(self.dose.delta > 0.0 && self.dose.delta <= 1.0) {
                    return Err(AppError::validation("delta", "delta must lie in (0, 1]"));
                }
                self.dose.per_arm_design.validate()?;
            }
            _ => self.dose.validate()?,
        }
        if self.truth.len() != self.dose.arms.len() {
            return Err(AppError::validation(
                "truth",
                format!("{} arms but {} truth entries", self.dose.arms.len(), self.truth.len()),
            ));
        }
        self.simulation()?;
        self.outcomes()?;
        Ok(())
    }
}

/// What to compute for a stored design.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OcRequest {
    /// Odds ratio at the four hypothesis points; defaults to the design's.
    #[serde(default)]
    pub phi: Option<f64>,
    /// Adds a type I error / power sensitivity table over these odds ratios.
    #[serde(default)]
    pub phi_grid: Option<Vec<f64>>,
    /// Monte Carlo replicates to run alongside the exact values.
    #[serde(default)]
    pub mc: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Parses a comma separated list of odds ratios.
pub fn parse_phi_grid(csv: &str) -> Result<Vec<f64>, AppError> {
    csv.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| AppError::validation("phi_grid", format!("`{s}` is not a number"))))
        .collect()
}
