//! Monte Carlo simulation: single-arm replicates for checking the exact
//! recursion, and randomized multi-dose trials with isotonic adjustment.
//!
//! Every replicate draws from its own ChaCha stream (`stream = replicate`,
//! arms offset by word position), and totals are accumulated as integers, so
//! results are bit-identical for a given seed no matter how rayon splits the
//! work.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::{LookBoundary, StoppingBoundaries};
use crate::design::DesignSpec;
use crate::error::{Error, Result};
use crate::optimizer::optimize;
use crate::prob::{CellProbabilities, OutcomeProbabilities, PriorHyperparameters};

/// Words reserved per arm inside a replicate's stream.
const ARM_WORD_STRIDE: u128 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub replicates: usize,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn new(replicates: usize, seed: u64) -> Result<Self> {
        let c = SimulationConfig { replicates, seed };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::config("replicates", "at least one replicate is required"));
        }
        Ok(())
    }
}

/// Random stream for one arm of one replicate.
pub fn replicate_rng(seed: u64, replicate: u64, arm: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng.set_word_pos(arm as u128 * ARM_WORD_STRIDE);
    rng
}

/// Accumulated counts for one arm.
#[derive(Debug, Clone, Copy, Default)]
struct ArmState {
    n: usize,
    x_e: usize,
    x_t: usize,
}

impl ArmState {
    fn enroll_to(&mut self, target: usize, cells: &CellProbabilities, rng: &mut impl Rng) {
        let c1 = cells.p11;
        let c2 = c1 + cells.p10;
        let c3 = c2 + cells.p01;
        while self.n < target {
            let u: f64 = rng.random();
            // Cells in order (1,1), (1,0), (0,1), (0,0).
            if u < c1 {
                self.x_e += 1;
                self.x_t += 1;
            } else if u < c2 {
                self.x_e += 1;
            } else if u < c3 {
                self.x_t += 1;
            }
            self.n += 1;
        }
    }
}

/// Outcome of one simulated single-arm trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub claimed: bool,
    /// 1-based look at which the trial stopped; `None` if it reached the end.
    pub stopped_at_stage: Option<usize>,
    pub enrolled: usize,
}

/// Runs one trial patient by patient, checking the boundaries at each look.
pub fn simulate_trial(
    boundaries: &StoppingBoundaries,
    truth: &OutcomeProbabilities,
    rng: &mut impl Rng,
) -> Result<TrialOutcome> {
    truth.validate()?;
    Ok(run_trial(&boundaries.looks, &truth.cells(), rng))
}

fn run_trial(looks: &[LookBoundary], cells: &CellProbabilities, rng: &mut impl Rng) -> TrialOutcome {
    let mut arm = ArmState::default();
    let last = looks.len() - 1;
    for (i, look) in looks.iter().enumerate() {
        arm.enroll_to(look.n, cells, rng);
        if !look.passes(arm.x_e, arm.x_t) {
            return TrialOutcome { claimed: false, stopped_at_stage: (i < last).then_some(i + 1), enrolled: arm.n };
        }
    }
    TrialOutcome { claimed: true, stopped_at_stage: None, enrolled: arm.n }
}

/// Replicate-averaged PCP/PET/ESS with standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloOc {
    pub pcp: f64,
    pub pet: f64,
    pub ess: f64,
    pub pcp_se: f64,
    pub pet_se: f64,
    pub ess_se: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, Copy, Default)]
struct TrialTotals {
    claims: u64,
    early_stops: u64,
    enrolled: u64,
    enrolled_sq: u64,
}

impl TrialTotals {
    fn add(mut self, o: TrialOutcome) -> Self {
        self.claims += o.claimed as u64;
        self.early_stops += o.stopped_at_stage.is_some() as u64;
        self.enrolled += o.enrolled as u64;
        self.enrolled_sq += (o.enrolled * o.enrolled) as u64;
        self
    }

    fn merge(self, o: Self) -> Self {
        TrialTotals {
            claims: self.claims + o.claims,
            early_stops: self.early_stops + o.early_stops,
            enrolled: self.enrolled + o.enrolled,
            enrolled_sq: self.enrolled_sq + o.enrolled_sq,
        }
    }
}

fn proportion_se(p: f64, reps: f64) -> f64 {
    (p * (1.0 - p) / reps).sqrt()
}

pub fn estimate_oc(
    boundaries: &StoppingBoundaries,
    truth: &OutcomeProbabilities,
    config: &SimulationConfig,
) -> Result<MonteCarloOc> {
    config.validate()?;
    boundaries.validate()?;
    truth.validate()?;
    let cells = truth.cells();
    let totals = (0..config.replicates as u64)
        .into_par_iter()
        .fold(TrialTotals::default, |acc, rep| {
            let mut rng = replicate_rng(config.seed, rep, 0);
            acc.add(run_trial(&boundaries.looks, &cells, &mut rng))
        })
        .reduce(TrialTotals::default, TrialTotals::merge);

    let reps = config.replicates as f64;
    let pcp = totals.claims as f64 / reps;
    let pet = totals.early_stops as f64 / reps;
    let ess = totals.enrolled as f64 / reps;
    let var = (totals.enrolled_sq as f64 / reps - ess * ess).max(0.0);
    Ok(MonteCarloOc {
        pcp,
        pet,
        ess,
        pcp_se: proportion_se(pcp, reps),
        pet_se: proportion_se(pet, reps),
        ess_se: (var / reps).sqrt(),
        replicates: config.replicates,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Monotonicity {
    NonDecreasing,
    NonIncreasing,
}

/// Weighted least-squares monotone fit by pool-adjacent-violators.
pub fn pava(values: &[f64], weights: &[f64], direction: Monotonicity) -> Result<Vec<f64>> {
    if values.len() != weights.len() {
        return Err(Error::LengthMismatch { left: values.len(), right: weights.len() });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::domain("pava weights must be positive and finite"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("pava values must be finite"));
    }
    let sign = match direction {
        Monotonicity::NonDecreasing => 1.0,
        Monotonicity::NonIncreasing => -1.0,
    };
    // (weighted sum, weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((sign * v * w, w, 1));
        while blocks.len() > 1 {
            let (s1, w1, k1) = blocks[blocks.len() - 1];
            let (s0, w0, k0) = blocks[blocks.len() - 2];
            if s0 / w0 <= s1 / w1 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().unwrap() = (s0 + s1, w0 + w1, k0 + k1);
        }
    }
    Ok(blocks.into_iter().flat_map(|(s, w, k)| std::iter::repeat_n(sign * s / w, k)).collect())
}

/// Lowest surviving arm whose efficacy exceeds `delta` times that of the
/// highest surviving arm. Arms are indexed in ascending dose.
pub fn select_optimal_dose(estimates: &[f64], surviving: &[bool], delta: f64) -> Option<usize> {
    let top = (0..estimates.len().min(surviving.len())).rev().find(|&i| surviving[i])?;
    let threshold = delta * estimates[top];
    (0..top).find(|&i| surviving[i] && estimates[i] > threshold).or(Some(top))
}

/// How isotonically adjusted posterior means are put on the boundary scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountScale {
    /// Invert the posterior mean back to a count, `π̃(n + Στ) − τ`; equals
    /// the raw count whenever no pooling occurs.
    #[default]
    PosteriorCount,
    /// Literal `n·π̃`.
    Proportional,
}

fn default_delta() -> f64 {
    0.8
}

/// Randomized multi-dose trial sharing one single-arm design across arms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoseOptimizationSpec {
    /// Dose labels in ascending dose.
    pub arms: Vec<String>,
    pub per_arm_design: DesignSpec,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub count_scale: CountScale,
}

impl DoseOptimizationSpec {
    pub fn new(arms: Vec<String>, per_arm_design: DesignSpec) -> Self {
        DoseOptimizationSpec { arms, per_arm_design, delta: default_delta(), count_scale: CountScale::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.arms.len() < 2 {
            return Err(Error::config("arms", "at least two dose arms are required"));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::config("delta", "delta must lie in (0, 1]"));
        }
        self.per_arm_design.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub label: String,
    /// Percent of replicates selecting this arm.
    pub selection_pct: f64,
    /// Percent of replicates stopping this arm before the final look.
    pub early_stop_pct: f64,
    pub average_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiDoseResult {
    pub arms: Vec<ArmSummary>,
    pub no_selection_pct: f64,
    pub replicates: usize,
    pub seed: u64,
    pub boundaries: StoppingBoundaries,
}

#[derive(Debug, Clone, Default)]
struct DoseTotals {
    selected: Vec<u64>,
    early_stops: Vec<u64>,
    enrolled: Vec<u64>,
    none_selected: u64,
}

impl DoseTotals {
    fn zeros(k: usize) -> Self {
        DoseTotals { selected: vec![0; k], early_stops: vec![0; k], enrolled: vec![0; k], none_selected: 0 }
    }

    fn merge(mut self, o: Self) -> Self {
        for i in 0..self.selected.len() {
            self.selected[i] += o.selected[i];
            self.early_stops[i] += o.early_stops[i];
            self.enrolled[i] += o.enrolled[i];
        }
        self.none_selected += o.none_selected;
        self
    }
}

struct ReplicateResult {
    selected: Option<usize>,
    stopped_early: Vec<bool>,
    enrolled: Vec<usize>,
}

struct MultiDoseRun<'a> {
    looks: &'a [LookBoundary],
    prior: PriorHyperparameters,
    delta: f64,
    scale: CountScale,
    cells: Vec<CellProbabilities>,
}

impl MultiDoseRun<'_> {
    fn to_count(&self, mean: f64, n: usize, tau: f64) -> f64 {
        match self.scale {
            CountScale::PosteriorCount => mean * (n as f64 + self.prior.total()) - tau,
            CountScale::Proportional => n as f64 * mean,
        }
    }

    /// Isotonic efficacy and toxicity means for the listed arms.
    fn adjusted_means(&self, state: &[ArmState], idx: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let w: Vec<f64> = idx.iter().map(|&k| state[k].n as f64).collect();
        let e: Vec<f64> = idx.iter().map(|&k| self.prior.posterior_mean_efficacy(state[k].x_e, state[k].n)).collect();
        let t: Vec<f64> = idx.iter().map(|&k| self.prior.posterior_mean_toxicity(state[k].x_t, state[k].n)).collect();
        // Lengths match and weights are positive sample sizes.
        let e = pava(&e, &w, Monotonicity::NonDecreasing).expect("valid pava input");
        let t = pava(&t, &w, Monotonicity::NonDecreasing).expect("valid pava input");
        (e, t)
    }

    fn replicate(&self, seed: u64, rep: u64) -> ReplicateResult {
        let k = self.cells.len();
        let mut rngs: Vec<ChaCha8Rng> = (0..k).map(|a| replicate_rng(seed, rep, a as u64)).collect();
        let mut state = vec![ArmState::default(); k];
        let mut active = vec![true; k];
        let mut stopped_early = vec![false; k];
        let last = self.looks.len() - 1;

        for (li, look) in self.looks.iter().enumerate() {
            let idx: Vec<usize> = (0..k).filter(|&a| active[a]).collect();
            if idx.is_empty() {
                break;
            }
            for &a in &idx {
                state[a].enroll_to(look.n, &self.cells[a], &mut rngs[a]);
            }
            let (e, t) = self.adjusted_means(&state, &idx);
            for (j, &a) in idx.iter().enumerate() {
                let n = state[a].n;
                let futile = look.l_e.is_some_and(|l| self.to_count(e[j], n, self.prior.tau_e()) <= l as f64);
                let toxic = look.l_t.is_some_and(|l| self.to_count(t[j], n, self.prior.tau_t()) >= l as f64);
                if futile || toxic {
                    active[a] = false;
                    stopped_early[a] = li < last;
                }
            }
        }

        let survivors: Vec<usize> = (0..k).filter(|&a| active[a]).collect();
        let selected = if survivors.is_empty() {
            None
        } else {
            let (e, _) = self.adjusted_means(&state, &survivors);
            let mut est = vec![0.0; k];
            for (j, &a) in survivors.iter().enumerate() {
                est[a] = e[j];
            }
            select_optimal_dose(&est, &active, self.delta)
        };
        ReplicateResult { selected, stopped_early, enrolled: state.iter().map(|s| s.n).collect() }
    }
}

/// Optimizes the shared per-arm design, then simulates the multi-dose trial.
pub fn simulate_multidose(
    dspec: &DoseOptimizationSpec,
    truth: &[OutcomeProbabilities],
    config: &SimulationConfig,
) -> Result<MultiDoseResult> {
    dspec.validate()?;
    let boundaries = optimize(&dspec.per_arm_design)?.boundaries;
    simulate_multidose_with_boundaries(dspec, &boundaries, truth, config)
}

/// Multi-dose simulation against boundaries supplied by the caller.
pub fn simulate_multidose_with_boundaries(
    dspec: &DoseOptimizationSpec,
    boundaries: &StoppingBoundaries,
    truth: &[OutcomeProbabilities],
    config: &SimulationConfig,
) -> Result<MultiDoseResult> {
    dspec.validate()?;
    run_multidose(dspec, boundaries, truth, config)
}

/// Like [`simulate_multidose_with_boundaries`] but also accepts a single arm,
/// in which case every count equals the one from [`estimate_oc`] with the
/// same seed.
pub fn simulate_arms(
    dspec: &DoseOptimizationSpec,
    boundaries: &StoppingBoundaries,
    truth: &[OutcomeProbabilities],
    config: &SimulationConfig,
) -> Result<MultiDoseResult> {
    if dspec.arms.is_empty() {
        return Err(Error::config("arms", "at least one arm is required"));
    }
    if dspec.arms.len() >= 2 {
        return simulate_multidose_with_boundaries(dspec, boundaries, truth, config);
    }
    if !(dspec.delta > 0.0 && dspec.delta <= 1.0) {
        return Err(Error::config("delta", "delta must lie in (0, 1]"));
    }
    dspec.per_arm_design.validate()?;
    run_multidose(dspec, boundaries, truth, config)
}

fn run_multidose(
    dspec: &DoseOptimizationSpec,
    boundaries: &StoppingBoundaries,
    truth: &[OutcomeProbabilities],
    config: &SimulationConfig,
) -> Result<MultiDoseResult> {
    config.validate()?;
    boundaries.validate()?;
    if truth.len() != dspec.arms.len() {
        return Err(Error::LengthMismatch { left: dspec.arms.len(), right: truth.len() });
    }
    for t in truth {
        t.validate()?;
    }
    let k = truth.len();
    let run = MultiDoseRun {
        looks: &boundaries.looks,
        prior: dspec.per_arm_design.prior_hyperparameters(),
        delta: dspec.delta,
        scale: dspec.count_scale,
        cells: truth.iter().map(|t| t.cells()).collect(),
    };
    let totals = (0..config.replicates as u64)
        .into_par_iter()
        .fold(
            || DoseTotals::zeros(k),
            |mut acc, rep| {
                let r = run.replicate(config.seed, rep);
                match r.selected {
                    Some(a) => acc.selected[a] += 1,
                    None => acc.none_selected += 1,
                }
                for a in 0..k {
                    acc.early_stops[a] += r.stopped_early[a] as u64;
                    acc.enrolled[a] += r.enrolled[a] as u64;
                }
                acc
            },
        )
        .reduce(|| DoseTotals::zeros(k), DoseTotals::merge);

    let reps = config.replicates as f64;
    let pct = |c: u64| 100.0 * c as f64 / reps;
    Ok(MultiDoseResult {
        arms: dspec
            .arms
            .iter()
            .enumerate()
            .map(|(a, label)| ArmSummary {
                label: label.clone(),
                selection_pct: pct(totals.selected[a]),
                early_stop_pct: pct(totals.early_stops[a]),
                average_n: totals.enrolled[a] as f64 / reps,
            })
            .collect(),
        no_selection_pct: pct(totals.none_selected),
        replicates: config.replicates,
        seed: config.seed,
        boundaries: boundaries.clone(),
    })
}
