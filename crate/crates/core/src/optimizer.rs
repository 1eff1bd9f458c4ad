//! Choosing stopping boundaries: a grid search over the cutoff parameters
//! `(λE, λT, γ)` and an exhaustive search over integer boundary vectors.
//!
//! Both maximize power under H11 subject to the three type I error limits at
//! H00, H01 and H10. Among feasible candidates with equal power the winner has
//! the smaller α00, then the smaller α01 + α10, then the larger probability of
//! early termination under H00, then comes first in search order. When no
//! candidate is feasible the one with the smallest total excess error is
//! reported (higher power breaking ties) with `feasible = false`.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::{BoundaryDeriver, LookBoundary, StoppingBoundaries};
use crate::design::{AlphaTargets, CutoffParameters, DesignSpec, Hypothesis, PerHypothesis};
use crate::error::{Error, Result};
use crate::oc::{evaluate_design, marginal_stage_pass_probs, Endpoint, OperatingCharacteristics};

/// Values closer than this compare equal during tie-breaking.
const TIE_EPS: f64 = 1e-12;

/// Largest number of boundary vectors the global search will evaluate with
/// the full joint recursion (used when the design odds ratio is not 1).
pub const GLOBAL_JOINT_LIMIT: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridVariant {
    /// λ on 0.500..0.775 by 0.025 then 0.80..0.99 by 0.01: 32 values per axis.
    #[default]
    Literal,
    /// λ on 0.500..0.700 by 0.025 then 0.80..0.99 by 0.01: 29 values per axis,
    /// matching a 29 × 29 × 21 = 17,661 point grid.
    Compact29,
}

fn lambda_values(variant: GridVariant) -> Vec<f64> {
    // integer thousandths keep the steps exact
    let coarse_end = match variant {
        GridVariant::Literal => 775,
        GridVariant::Compact29 => 700,
    };
    (500..=coarse_end).step_by(25).chain((800..=990).step_by(10)).map(|m| m as f64 / 1000.0).collect()
}

/// `γ = ln v / ln 0.5` for `v = 1.000, 0.975, …, 0.500`.
pub fn gamma_values() -> Vec<f64> {
    (0..=20)
        .map(|k| {
            let v = (1000 - 25 * k) as f64 / 1000.0;
            if k == 0 {
                0.0
            } else {
                v.ln() / 0.5f64.ln()
            }
        })
        .collect()
}

/// The search grid, λE-major, then λT, then γ.
pub fn parameter_grid(variant: GridVariant) -> Vec<CutoffParameters> {
    let lambdas = lambda_values(variant);
    let gammas = gamma_values();
    let mut grid = Vec::with_capacity(lambdas.len() * lambdas.len() * gammas.len());
    for &lambda_e in &lambdas {
        for &lambda_t in &lambdas {
            for &gamma in &gammas {
                grid.push(CutoffParameters { lambda_e, lambda_t, gamma });
            }
        }
    }
    grid
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMethod {
    /// Grid search over cutoff parameters.
    Grid,
    /// Exhaustive search over boundary vectors.
    Global,
    /// Exhaustive search restricted to vectors that stop whenever the
    /// observed response rate is below `ηE*` or the toxicity rate above `ηT*`.
    GlobalPractical,
}

impl SearchMethod {
    pub fn label(self) -> &'static str {
        match self {
            SearchMethod::Grid => "BOP2-TE",
            SearchMethod::Global => "Global",
            SearchMethod::GlobalPractical => "Global*",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub method: SearchMethod,
    /// Selected cutoff parameters (grid search only).
    pub q: Option<CutoffParameters>,
    pub boundaries: StoppingBoundaries,
    /// OC at the four hypotheses, evaluated at the design odds ratio.
    pub oc: PerHypothesis<OperatingCharacteristics>,
    pub feasible: bool,
    pub candidates_evaluated: usize,
    pub distinct_boundaries: usize,
}

impl OptimizationResult {
    pub fn power(&self) -> f64 {
        self.oc.h11.pcp
    }

    pub fn type_i_errors(&self) -> (f64, f64, f64) {
        (self.oc.h00.pcp, self.oc.h01.pcp, self.oc.h10.pcp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOptions {
    pub grid: GridVariant,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions { grid: GridVariant::Literal }
    }
}

/// Screening summary of one candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Metrics {
    /// Claim probabilities at H00, H01, H10, H11.
    alpha: [f64; 4],
    pet00: f64,
}

impl Metrics {
    fn power(&self) -> f64 {
        self.alpha[3]
    }

    fn excess(&self, t: &AlphaTargets) -> f64 {
        (self.alpha[0] - t.alpha00).max(0.0)
            + (self.alpha[1] - t.alpha01).max(0.0)
            + (self.alpha[2] - t.alpha10).max(0.0)
    }

    fn feasible(&self, t: &AlphaTargets) -> bool {
        self.alpha[0] <= t.alpha00 && self.alpha[1] <= t.alpha01 && self.alpha[2] <= t.alpha10
    }
}

/// `Some(true)` if `a` beats `b`, `Some(false)` if `b` beats `a`, `None` on a
/// full tie (earlier search order then wins).
fn compare_feasible(a: &Metrics, b: &Metrics) -> Option<bool> {
    let keys = [
        (a.power(), b.power(), true),
        (a.alpha[0], b.alpha[0], false),
        (a.alpha[1] + a.alpha[2], b.alpha[1] + b.alpha[2], false),
        (a.pet00, b.pet00, true),
    ];
    for (x, y, larger_wins) in keys {
        if (x - y).abs() > TIE_EPS {
            return Some((x > y) == larger_wins);
        }
    }
    None
}

fn compare_infeasible(a: &Metrics, b: &Metrics, t: &AlphaTargets) -> Option<bool> {
    let (ea, eb) = (a.excess(t), b.excess(t));
    if (ea - eb).abs() > TIE_EPS {
        return Some(ea < eb);
    }
    compare_feasible(a, b)
}

/// Index of the winning candidate, scanning in search order.
fn select(metrics: impl IntoIterator<Item = Metrics>, t: &AlphaTargets) -> Option<(usize, Metrics, bool)> {
    let mut best: Option<(usize, Metrics, bool)> = None;
    for (i, m) in metrics.into_iter().enumerate() {
        let f = m.feasible(t);
        best = match best {
            None => Some((i, m, f)),
            Some((bi, bm, bf)) => {
                let replace = match (f, bf) {
                    (true, false) => true,
                    (false, true) => false,
                    (true, true) => compare_feasible(&m, &bm) == Some(true),
                    (false, false) => compare_infeasible(&m, &bm, t) == Some(true),
                };
                if replace {
                    Some((i, m, f))
                } else {
                    Some((bi, bm, bf))
                }
            }
        };
    }
    best
}

fn metrics_from_stage_probs(stage: PerHypothesis<Vec<f64>>) -> Metrics {
    let r = stage.h00.len();
    let reach_final00 = if r >= 2 { stage.h00[r - 2] } else { 1.0 };
    Metrics {
        alpha: [stage.h00[r - 1], stage.h01[r - 1], stage.h10[r - 1], stage.h11[r - 1]],
        pet00: 1.0 - reach_final00,
    }
}

/// Marginal pass probabilities at the null and alternative rate of one endpoint.
#[derive(Debug, Clone)]
struct MarginalPair {
    null: Vec<f64>,
    alt: Vec<f64>,
}

fn efficacy_pair(looks: &[LookBoundary], spec: &DesignSpec) -> MarginalPair {
    MarginalPair {
        null: marginal_stage_pass_probs(looks, Endpoint::Efficacy, spec.eta_e_null),
        alt: marginal_stage_pass_probs(looks, Endpoint::Efficacy, spec.eta_e),
    }
}

fn toxicity_pair(looks: &[LookBoundary], spec: &DesignSpec) -> MarginalPair {
    MarginalPair {
        null: marginal_stage_pass_probs(looks, Endpoint::Toxicity, spec.eta_t_null),
        alt: marginal_stage_pass_probs(looks, Endpoint::Toxicity, spec.eta_t),
    }
}

/// Under independence every stage pass probability is a product of the
/// efficacy and toxicity marginals.
fn combine(e: &MarginalPair, t: &MarginalPair) -> Metrics {
    let r = e.null.len();
    let last = r - 1;
    let alpha = [
        e.null[last] * t.null[last],
        e.null[last] * t.alt[last],
        e.alt[last] * t.null[last],
        e.alt[last] * t.alt[last],
    ];
    let reach_final00 = if r >= 2 { e.null[r - 2] * t.null[r - 2] } else { 1.0 };
    Metrics { alpha, pet00: 1.0 - reach_final00 }
}

fn joint_metrics(b: &StoppingBoundaries, spec: &DesignSpec) -> Result<Metrics> {
    let oc = evaluate_design(b, spec, spec.design_phi)?;
    Ok(metrics_from_stage_probs(oc.map(|o| o.stage_pass_probs.clone())))
}

fn efficacy_part(b: &StoppingBoundaries) -> Vec<Option<i64>> {
    b.looks.iter().map(|l| l.l_e).collect()
}

fn toxicity_part(b: &StoppingBoundaries) -> Vec<Option<i64>> {
    b.looks.iter().map(|l| l.l_t).collect()
}

/// Efficacy-only or toxicity-only view of a boundary vector, for marginal
/// recursions.
fn looks_with(n: &[usize], l_e: &[Option<i64>], l_t: &[Option<i64>]) -> Vec<LookBoundary> {
    n.iter().zip(l_e.iter().zip(l_t)).map(|(&n, (&l_e, &l_t))| LookBoundary { n, l_e, l_t }).collect()
}

fn evaluate_distinct(distinct: &[StoppingBoundaries], spec: &DesignSpec) -> Result<Vec<Metrics>> {
    if spec.design_phi == 1.0 {
        let ns: Vec<usize> = spec.schedule.iter().map(|l| l.n).collect();
        let none = vec![None; ns.len()];
        let mut eff: HashMap<Vec<Option<i64>>, MarginalPair> = HashMap::new();
        let mut tox: HashMap<Vec<Option<i64>>, MarginalPair> = HashMap::new();
        let mut out = Vec::with_capacity(distinct.len());
        for b in distinct {
            let ke = efficacy_part(b);
            let kt = toxicity_part(b);
            if !eff.contains_key(&ke) {
                let pair = efficacy_pair(&looks_with(&ns, &ke, &none), spec);
                eff.insert(ke.clone(), pair);
            }
            if !tox.contains_key(&kt) {
                let pair = toxicity_pair(&looks_with(&ns, &none, &kt), spec);
                tox.insert(kt.clone(), pair);
            }
            out.push(combine(&eff[&ke], &tox[&kt]));
        }
        Ok(out)
    } else {
        distinct.par_iter().map(|b| joint_metrics(b, spec)).collect()
    }
}

/// Grid search over `(λE, λT, γ)` on the literal grid.
pub fn optimize(spec: &DesignSpec) -> Result<OptimizationResult> {
    optimize_with(spec, &OptimizeOptions::default())
}

pub fn optimize_with(spec: &DesignSpec, options: &OptimizeOptions) -> Result<OptimizationResult> {
    spec.validate()?;
    let deriver = BoundaryDeriver::new(spec)?;
    let grid = parameter_grid(options.grid);

    let mut index: HashMap<StoppingBoundaries, usize> = HashMap::new();
    let mut distinct: Vec<StoppingBoundaries> = Vec::new();
    let mut first_q: Vec<CutoffParameters> = Vec::new();
    for q in &grid {
        let b = deriver.derive(q);
        if !index.contains_key(&b) {
            index.insert(b.clone(), distinct.len());
            distinct.push(b);
            first_q.push(*q);
        }
    }

    let metrics = evaluate_distinct(&distinct, spec)?;
    let (winner, _, feasible) = select(metrics, &spec.alpha_targets).expect("grid is non-empty");
    let boundaries = distinct[winner].clone();
    let oc = evaluate_design(&boundaries, spec, spec.design_phi)?;
    Ok(OptimizationResult {
        method: SearchMethod::Grid,
        q: Some(first_q[winner]),
        boundaries,
        oc,
        feasible,
        candidates_evaluated: grid.len(),
        distinct_boundaries: distinct.len(),
    })
}

/// All non-decreasing sequences with `seq[i]` in `lo[i]..=hi[i]`.
fn monotone_vectors(lo: &[i64], hi: &[i64]) -> Vec<Vec<i64>> {
    fn rec(i: usize, floor: i64, lo: &[i64], hi: &[i64], cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if i == lo.len() {
            out.push(cur.clone());
            return;
        }
        for v in lo[i].max(floor)..=hi[i] {
            cur.push(v);
            rec(i + 1, v, lo, hi, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, i64::MIN, lo, hi, &mut Vec::new(), &mut out);
    out
}

/// Guard against floating error in `n·η` when it is an integer.
const RATE_GUARD: f64 = 1e-9;

/// Smallest admissible futility bound under the practical constraint: stop
/// whenever the observed response rate is below `ηE*`.
fn practical_min_l_e(n: usize, eta_e_null: f64) -> i64 {
    // largest x with x < n·ηE*
    ((n as f64 * eta_e_null - RATE_GUARD).ceil() as i64 - 1).max(-1)
}

/// Largest admissible toxicity bound: stop whenever the observed toxicity
/// rate exceeds `ηT*`.
fn practical_max_l_t(n: usize, eta_t_null: f64) -> i64 {
    // smallest x with x > n·ηT*
    ((n as f64 * eta_t_null + RATE_GUARD).floor() as i64 + 1).min(n as i64 + 1)
}

/// Exhaustive search over monotone integer boundary vectors.
///
/// Bounds range over the observable counts `0..=n` at each look, so the
/// loosest rules considered are "stop on no responses" and "stop when every
/// patient is toxic".
///
/// Supports at most two efficacy looks and three toxicity looks. With a design
/// odds ratio of 1 each candidate's error rates are products of marginal
/// efficacy and toxicity terms, which are computed once per marginal vector;
/// otherwise every candidate goes through the joint recursion and the search
/// is capped at [`GLOBAL_JOINT_LIMIT`] candidates.
pub fn global_boundary_search(spec: &DesignSpec, practical_constraint: bool) -> Result<OptimizationResult> {
    spec.validate()?;
    let ns: Vec<usize> = spec.schedule.iter().map(|l| l.n).collect();
    let eff_idx: Vec<usize> = (0..ns.len()).filter(|&i| spec.schedule[i].check_efficacy).collect();
    let tox_idx: Vec<usize> = (0..ns.len()).filter(|&i| spec.schedule[i].check_toxicity).collect();
    if eff_idx.len() > 2 || tox_idx.len() > 3 {
        return Err(Error::Size(format!(
            "global search supports at most 2 efficacy and 3 toxicity looks, got {} and {}",
            eff_idx.len(),
            tox_idx.len()
        )));
    }

    let eff_lo: Vec<i64> = eff_idx
        .iter()
        .map(|&i| if practical_constraint { practical_min_l_e(ns[i], spec.eta_e_null).max(0) } else { 0 })
        .collect();
    let eff_hi: Vec<i64> = eff_idx.iter().map(|&i| ns[i] as i64).collect();
    let tox_lo: Vec<i64> = vec![0; tox_idx.len()];
    let tox_hi: Vec<i64> = tox_idx
        .iter()
        .map(|&i| {
            if practical_constraint {
                practical_max_l_t(ns[i], spec.eta_t_null).min(ns[i] as i64)
            } else {
                ns[i] as i64
            }
        })
        .collect();
    let eff_vectors = monotone_vectors(&eff_lo, &eff_hi);
    let tox_vectors = monotone_vectors(&tox_lo, &tox_hi);

    let spread = |idx: &[usize], v: &[i64]| -> Vec<Option<i64>> {
        let mut out = vec![None; ns.len()];
        for (&i, &x) in idx.iter().zip(v) {
            out[i] = Some(x);
        }
        out
    };
    let none = vec![None; ns.len()];
    let total = eff_vectors.len() * tox_vectors.len();
    let method = if practical_constraint { SearchMethod::GlobalPractical } else { SearchMethod::Global };

    let (e_best, t_best, feasible) = if spec.design_phi == 1.0 {
        let eff: Vec<MarginalPair> = eff_vectors
            .par_iter()
            .map(|v| efficacy_pair(&looks_with(&ns, &spread(&eff_idx, v), &none), spec))
            .collect();
        let tox: Vec<MarginalPair> = tox_vectors
            .par_iter()
            .map(|v| toxicity_pair(&looks_with(&ns, &none, &spread(&tox_idx, v)), spec))
            .collect();
        let metrics = eff.iter().flat_map(|e| tox.iter().map(move |t| combine(e, t)));
        let (i, _, f) = select(metrics, &spec.alpha_targets).expect("non-empty search space");
        (i / tox.len(), i % tox.len(), f)
    } else {
        if total > GLOBAL_JOINT_LIMIT {
            return Err(Error::Size(format!(
                "{total} boundary vectors exceed the joint-recursion limit of {GLOBAL_JOINT_LIMIT}; use design_phi = 1"
            )));
        }
        let candidates: Vec<StoppingBoundaries> = eff_vectors
            .iter()
            .flat_map(|e| {
                tox_vectors
                    .iter()
                    .map(|t| StoppingBoundaries { looks: looks_with(&ns, &spread(&eff_idx, e), &spread(&tox_idx, t)) })
            })
            .collect();
        let metrics: Vec<Metrics> = candidates.par_iter().map(|b| joint_metrics(b, spec)).collect::<Result<_>>()?;
        let (i, _, f) = select(metrics, &spec.alpha_targets).expect("non-empty search space");
        (i / tox_vectors.len(), i % tox_vectors.len(), f)
    };

    let boundaries = StoppingBoundaries::new(looks_with(
        &ns,
        &spread(&eff_idx, &eff_vectors[e_best]),
        &spread(&tox_idx, &tox_vectors[t_best]),
    ))?;
    let oc = evaluate_design(&boundaries, spec, spec.design_phi)?;
    Ok(OptimizationResult {
        method,
        q: None,
        boundaries,
        oc,
        feasible,
        candidates_evaluated: total,
        distinct_boundaries: total,
    })
}

/// Claim probabilities `[α00, α01, α10, β]` for a boundary vector, in
/// hypothesis order.
pub fn claim_probabilities(boundaries: &StoppingBoundaries, spec: &DesignSpec) -> Result<PerHypothesis<f64>> {
    let oc = evaluate_design(boundaries, spec, spec.design_phi)?;
    Ok(PerHypothesis::from_fn(|h: Hypothesis| oc.get(h).pcp))
}
