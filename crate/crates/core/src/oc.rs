//! Exact operating characteristics.
//!
//! Let `D_r(s_E, s_T)` be the probability of reaching look `r` with cumulative
//! counts `(s_E, s_T)` without having stopped earlier. `D_1` is the joint
//! stage pmf on the first cohort, and `D_r` convolves the part of `D_{r-1}`
//! inside the continuation region with the pmf of the next cohort. The
//! probability of passing look `r` is the continuation mass of `D_r`; at the
//! last look it is the probability of claiming the treatment promising.

use serde::{Deserialize, Serialize};

use crate::boundary::{LookBoundary, StoppingBoundaries};
use crate::design::{DesignSpec, Hypothesis, PerHypothesis};
use crate::error::{Error, Result};
use crate::prob::{binomial_pmf_vec, OutcomeProbabilities};

/// Outcome cell counts `(x1, x2, x3, x4)` for cells (E,T), (E,no T),
/// (no E,T), (no E,no T).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialData {
    pub x: [usize; 4],
}

impl TrialData {
    pub fn n(&self) -> usize {
        self.x.iter().sum()
    }

    pub fn x_e(&self) -> usize {
        self.x[0] + self.x[1]
    }

    pub fn x_t(&self) -> usize {
        self.x[0] + self.x[2]
    }

    pub fn counts(&self) -> crate::boundary::InterimCounts {
        crate::boundary::InterimCounts { n: self.n(), x_e: self.x_e(), x_t: self.x_t() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingCharacteristics {
    /// Probability of claiming the treatment promising.
    pub pcp: f64,
    /// Probability of stopping before the final look.
    pub pet: f64,
    /// Expected number of patients enrolled.
    pub ess: f64,
    /// `α(r)`: probability of passing looks `1..=r`.
    pub stage_pass_probs: Vec<f64>,
}

/// Square table over cumulative counts `(s_E, s_T)`, both in `0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTable {
    n: usize,
    mass: Vec<f64>,
}

impl CountTable {
    fn zeros(n: usize) -> Self {
        CountTable { n, mass: vec![0.0; (n + 1) * (n + 1)] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, s_e: usize, s_t: usize) -> f64 {
        if s_e > self.n || s_t > self.n {
            return 0.0;
        }
        self.mass[s_e * (self.n + 1) + s_t]
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Mass in the region that passes `look`.
    pub fn continuation_mass(&self, look: &LookBoundary) -> f64 {
        let (lo_e, hi_t) = continuation_ranges(look);
        let mut sum = 0.0;
        for s_e in lo_e..=self.n {
            let row = &self.mass[s_e * (self.n + 1)..(s_e + 1) * (self.n + 1)];
            sum += row[..hi_t.min(self.n + 1)].iter().sum::<f64>();
        }
        sum
    }

    fn restrict(&mut self, look: &LookBoundary) {
        let (lo_e, hi_t) = continuation_ranges(look);
        let w = self.n + 1;
        for s_e in 0..w {
            for s_t in 0..w {
                if s_e < lo_e || s_t >= hi_t {
                    self.mass[s_e * w + s_t] = 0.0;
                }
            }
        }
    }
}

/// Passing `look` means `s_E >= lo_e` and `s_T < hi_t`.
fn continuation_ranges(look: &LookBoundary) -> (usize, usize) {
    let lo_e = (look.futility_bound() + 1).max(0) as usize;
    let hi_t = look.toxicity_bound().max(0) as usize;
    (lo_e, hi_t)
}

/// Probability of `x_e` responses and `x_t` toxicities among `m` patients.
pub fn joint_stage_pmf(x_e: usize, x_t: usize, m: usize, p: &OutcomeProbabilities) -> Result<f64> {
    if x_e > m || x_t > m {
        return Err(Error::domain(format!("counts ({x_e}, {x_t}) exceed the cohort size {m}")));
    }
    p.validate()?;
    Ok(stage_table(m, p).get(x_e, x_t))
}

/// Full pmf table of one cohort of `m` patients.
///
/// Conditional on `x_t` toxicities, responses split into a binomial among the
/// toxic patients (rate `πE|T`) and one among the rest (rate `πE|T̄`). When
/// `πT` is 0 or 1 one of those groups is always empty, so its undefined rate
/// never contributes.
fn stage_table(m: usize, p: &OutcomeProbabilities) -> CountTable {
    let mut t = CountTable::zeros(m);
    let tox = binomial_pmf_vec(m, p.pi_t);
    let e_given_t = p.pi_e_given_t().unwrap_or(0.0);
    let e_given_not_t = p.pi_e_given_not_t().unwrap_or(0.0);
    for (x_t, &pt) in tox.iter().enumerate() {
        if pt == 0.0 {
            continue;
        }
        let a = binomial_pmf_vec(x_t, e_given_t);
        let b = binomial_pmf_vec(m - x_t, e_given_not_t);
        for (i, &pa) in a.iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            for (j, &pb) in b.iter().enumerate() {
                t.mass[(i + j) * (m + 1) + x_t] += pt * pa * pb;
            }
        }
    }
    t
}

fn convolve(prev: &CountTable, inc: &CountTable) -> CountTable {
    let n = prev.n + inc.n;
    let mut out = CountTable::zeros(n);
    let (wp, wi, wo) = (prev.n + 1, inc.n + 1, n + 1);
    for a in 0..wp {
        for b in 0..wp {
            let pm = prev.mass[a * wp + b];
            if pm == 0.0 {
                continue;
            }
            for i in 0..wi {
                let base = (a + i) * wo + b;
                let row = &inc.mass[i * wi..(i + 1) * wi];
                for (j, &q) in row.iter().enumerate() {
                    out.mass[base + j] += pm * q;
                }
            }
        }
    }
    out
}

/// `D_r` for the 1-based stage `r`: the distribution of cumulative counts at
/// look `r` restricted to paths that passed looks `1..r`.
pub fn continuation_distribution(
    boundaries: &StoppingBoundaries,
    p: &OutcomeProbabilities,
    r: usize,
) -> Result<CountTable> {
    if r == 0 || r > boundaries.looks.len() {
        return Err(Error::domain(format!("stage {r} outside 1..={}", boundaries.looks.len())));
    }
    p.validate()?;
    let mut stages = Stages::new(boundaries, p);
    let mut d = stages.next().expect("r >= 1");
    for _ in 1..r {
        d = stages.next().expect("r within range");
    }
    Ok(d)
}

/// Iterator over `D_1, D_2, …`.
struct Stages<'a> {
    looks: &'a [LookBoundary],
    p: &'a OutcomeProbabilities,
    r: usize,
    prev: Option<CountTable>,
}

impl<'a> Stages<'a> {
    fn new(boundaries: &'a StoppingBoundaries, p: &'a OutcomeProbabilities) -> Self {
        Stages { looks: &boundaries.looks, p, r: 0, prev: None }
    }
}

impl Iterator for Stages<'_> {
    type Item = CountTable;

    fn next(&mut self) -> Option<CountTable> {
        let look = self.looks.get(self.r)?;
        let prev_n = if self.r == 0 { 0 } else { self.looks[self.r - 1].n };
        let inc = stage_table(look.n - prev_n, self.p);
        let d = match self.prev.take() {
            None => inc,
            Some(mut prev) => {
                prev.restrict(&self.looks[self.r - 1]);
                convolve(&prev, &inc)
            }
        };
        self.prev = Some(d.clone());
        self.r += 1;
        Some(d)
    }
}

fn stage_pass_probs(boundaries: &StoppingBoundaries, p: &OutcomeProbabilities) -> Vec<f64> {
    Stages::new(boundaries, p).zip(&boundaries.looks).map(|(d, look)| d.continuation_mass(look)).collect()
}

/// Probability of passing every look, i.e. of claiming the treatment promising.
pub fn claim_probability(boundaries: &StoppingBoundaries, p: &OutcomeProbabilities) -> Result<f64> {
    boundaries.validate()?;
    p.validate()?;
    Ok(*stage_pass_probs(boundaries, p).last().expect("non-empty schedule"))
}

/// PCP, PET and ESS from the per-stage pass probabilities.
pub fn operating_characteristics(
    boundaries: &StoppingBoundaries,
    p: &OutcomeProbabilities,
) -> Result<OperatingCharacteristics> {
    boundaries.validate()?;
    p.validate()?;
    Ok(summarize(boundaries, stage_pass_probs(boundaries, p)))
}

/// Builds PCP/PET/ESS from `α(1..=R)`.
pub(crate) fn summarize(boundaries: &StoppingBoundaries, stage_pass_probs: Vec<f64>) -> OperatingCharacteristics {
    let looks = &boundaries.looks;
    let r = looks.len();
    let reach_final = if r >= 2 { stage_pass_probs[r - 2] } else { 1.0 };
    let mut ess = looks[0].n as f64;
    for k in 1..r {
        ess += (looks[k].n - looks[k - 1].n) as f64 * stage_pass_probs[k - 1];
    }
    OperatingCharacteristics { pcp: stage_pass_probs[r - 1], pet: 1.0 - reach_final, ess, stage_pass_probs }
}

/// Claim probability by enumerating all `4^N` patient outcome sequences and
/// applying the stopping rule patient by patient. Only for `N <= 10`.
pub fn brute_force_claim_probability(boundaries: &StoppingBoundaries, p: &OutcomeProbabilities) -> Result<f64> {
    boundaries.validate()?;
    p.validate()?;
    let n = boundaries.max_n();
    if n > 10 {
        return Err(Error::Size(format!("brute force enumerates 4^N sequences; N = {n} exceeds 10")));
    }
    let cells = p.cells().as_array();
    // (response, toxicity) for each cell in order
    const OUTCOME: [(usize, usize); 4] = [(1, 1), (1, 0), (0, 1), (0, 0)];

    fn walk(
        enrolled: usize,
        s_e: usize,
        s_t: usize,
        prob: f64,
        next_look: usize,
        looks: &[LookBoundary],
        cells: &[f64; 4],
    ) -> f64 {
        let mut next_look = next_look;
        if enrolled == looks[next_look].n {
            if !looks[next_look].passes(s_e, s_t) {
                return 0.0;
            }
            next_look += 1;
            if next_look == looks.len() {
                return prob;
            }
        }
        let mut total = 0.0;
        for (c, &(de, dt)) in OUTCOME.iter().enumerate() {
            if cells[c] > 0.0 {
                total += walk(enrolled + 1, s_e + de, s_t + dt, prob * cells[c], next_look, looks, cells);
            }
        }
        total
    }

    Ok(walk(0, 0, 0, 1.0, 0, &boundaries.looks, &cells))
}

/// Per-hypothesis OC with the joint distribution at odds ratio `phi`.
pub fn evaluate_design(
    boundaries: &StoppingBoundaries,
    spec: &DesignSpec,
    phi: f64,
) -> Result<PerHypothesis<OperatingCharacteristics>> {
    PerHypothesis::try_from_fn(|h| operating_characteristics(boundaries, &spec.hypothesis_outcome(h, phi)?))
}

/// `α00 − α01·α10/β` with all four claim probabilities at `φ = 1`.
///
/// Under independence the claim probability factorizes into an efficacy and a
/// toxicity part, so this vanishes up to rounding for any boundaries.
pub fn theorem1_residual(boundaries: &StoppingBoundaries, spec: &DesignSpec) -> Result<f64> {
    let a = PerHypothesis::try_from_fn(|h| claim_probability(boundaries, &spec.hypothesis_outcome(h, 1.0)?))?;
    if a.h11 == 0.0 {
        // β = 0 forces a zero factor in α01 or α10 and in α00 alike
        return Ok(a.h00);
    }
    Ok(a.h00 - a.h01 * a.h10 / a.h11)
}

/// `α00` forced by the other three claim probabilities under independence,
/// `α01·α10/β`.
pub fn implied_alpha00(alpha01: f64, alpha10: f64, power: f64) -> Result<f64> {
    for (name, v) in [("alpha01", alpha01), ("alpha10", alpha10), ("power", power)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::domain(format!("{name} = {v} is not a probability")));
        }
    }
    if power == 0.0 {
        return Err(Error::domain("power must be positive"));
    }
    Ok(alpha01 * alpha10 / power)
}

/// Claim probabilities at the four hypothesis points for one `φ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiSensitivityPoint {
    pub phi: f64,
    pub alpha00: f64,
    pub alpha01: f64,
    pub alpha10: f64,
    pub power: f64,
}

/// Type I errors and power of fixed boundaries across odds ratios, sorted by `φ`.
pub fn phi_sensitivity_curve(
    boundaries: &StoppingBoundaries,
    spec: &DesignSpec,
    phis: &[f64],
) -> Result<Vec<PhiSensitivityPoint>> {
    let mut phis = phis.to_vec();
    if let Some(bad) = phis.iter().find(|f| !(f.is_finite() && **f > 0.0)) {
        return Err(Error::domain(format!("odds ratio {bad} must be finite and positive")));
    }
    phis.sort_by(f64::total_cmp);
    phis.iter()
        .map(|&phi| {
            let a = PerHypothesis::try_from_fn(|h: Hypothesis| {
                claim_probability(boundaries, &spec.hypothesis_outcome(h, phi)?)
            })?;
            Ok(PhiSensitivityPoint { phi, alpha00: a.h00, alpha01: a.h01, alpha10: a.h10, power: a.h11 })
        })
        .collect()
}

/// Which single endpoint a marginal recursion tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Endpoint {
    Efficacy,
    Toxicity,
}

/// Stage pass probabilities of one endpoint's bounds alone. Under
/// independence the joint `α(r)` is the product of the two marginal ones.
pub(crate) fn marginal_stage_pass_probs(looks: &[LookBoundary], endpoint: Endpoint, rate: f64) -> Vec<f64> {
    let mut dist = vec![1.0];
    let mut prev_n = 0;
    let mut out = Vec::with_capacity(looks.len());
    for look in looks {
        let inc = binomial_pmf_vec(look.n - prev_n, rate);
        let mut next = vec![0.0; look.n + 1];
        for (a, &pa) in dist.iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            for (i, &pi) in inc.iter().enumerate() {
                next[a + i] += pa * pi;
            }
        }
        match endpoint {
            Endpoint::Efficacy => {
                let lo = (look.futility_bound() + 1).max(0) as usize;
                next[..lo.min(look.n + 1)].iter_mut().for_each(|v| *v = 0.0);
            }
            Endpoint::Toxicity => {
                let hi = look.toxicity_bound().max(0) as usize;
                if hi <= look.n {
                    next[hi..].iter_mut().for_each(|v| *v = 0.0);
                }
            }
        }
        out.push(next.iter().sum());
        dist = next;
        prev_n = look.n;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{merge_schedule, AlphaTargets};
    use proptest::prelude::*;

    fn scenario4() -> (DesignSpec, StoppingBoundaries) {
        let spec = DesignSpec::new(
            0.6,
            0.3,
            0.2,
            0.4,
            AlphaTargets::new(0.025, 0.1, 0.1),
            merge_schedule(&[18, 36], &[9, 18, 36]),
        );
        let b = StoppingBoundaries::new(vec![
            LookBoundary { n: 9, l_e: None, l_t: Some(4) },
            LookBoundary { n: 18, l_e: Some(5), l_t: Some(7) },
            LookBoundary { n: 36, l_e: Some(14), l_t: Some(11) },
        ])
        .unwrap();
        (spec, b)
    }

    fn binom(k: usize, n: usize, p: f64) -> f64 {
        crate::prob::log_binomial_pmf(k, n, p).unwrap().exp()
    }

    #[test]
    fn stage_pmf_under_independence_factorizes() {
        let p = OutcomeProbabilities::independent(0.6, 0.3).unwrap();
        for xe in 0..=7 {
            for xt in 0..=7 {
                let want = binom(xe, 7, 0.6) * binom(xt, 7, 0.3);
                assert!((joint_stage_pmf(xe, xt, 7, &p).unwrap() - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn single_patient_cells() {
        let p = OutcomeProbabilities::new(0.6, 0.4, 0.24).unwrap();
        assert!((joint_stage_pmf(0, 0, 1, &p).unwrap() - 0.24).abs() < 1e-15);
        let p = OutcomeProbabilities::new(0.6, 0.4, 0.3).unwrap();
        let c = p.cells();
        assert!((joint_stage_pmf(1, 1, 1, &p).unwrap() - c.p11).abs() < 1e-15);
        assert!((joint_stage_pmf(1, 0, 1, &p).unwrap() - c.p10).abs() < 1e-15);
        assert!((joint_stage_pmf(0, 1, 1, &p).unwrap() - c.p01).abs() < 1e-15);
        assert!(joint_stage_pmf(2, 0, 1, &p).is_err());
    }

    #[test]
    fn two_patients_match_enumeration() {
        let p = OutcomeProbabilities::new(0.55, 0.35, 0.25).unwrap();
        let cells = p.cells().as_array();
        let outcome = [(1, 1), (1, 0), (0, 1), (0, 0)];
        let mut want = [[0.0; 3]; 3];
        for a in 0..4 {
            for b in 0..4 {
                let (e, t) = (outcome[a].0 + outcome[b].0, outcome[a].1 + outcome[b].1);
                want[e][t] += cells[a] * cells[b];
            }
        }
        let mut total = 0.0;
        for e in 0..3 {
            for t in 0..3 {
                let got = joint_stage_pmf(e, t, 2, &p).unwrap();
                assert!((got - want[e][t]).abs() < 1e-15);
                total += got;
            }
        }
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_toxicity_rates() {
        for (pt, xt) in [(0.0, 0), (1.0, 5)] {
            let p = OutcomeProbabilities::independent(0.4, pt).unwrap();
            for xe in 0..=5 {
                let got = joint_stage_pmf(xe, xt, 5, &p).unwrap();
                assert!((got - binom(xe, 5, 0.4)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mass_is_conserved_between_stages() {
        let (spec, b) = scenario4();
        let p = spec.hypothesis_outcome(Hypothesis::H01, 1.0).unwrap();
        for r in 2..=3 {
            let prev = continuation_distribution(&b, &p, r - 1).unwrap();
            let cur = continuation_distribution(&b, &p, r).unwrap();
            assert!((cur.total() - prev.continuation_mass(&b.looks[r - 2])).abs() < 1e-14);
        }
        assert!(continuation_distribution(&b, &p, 0).is_err());
        assert!(continuation_distribution(&b, &p, 4).is_err());
    }

    #[test]
    fn scenario4_claim_probabilities() {
        let (spec, b) = scenario4();
        let oc = evaluate_design(&b, &spec, 1.0).unwrap();
        assert!((oc.h00.pcp - 0.0063).abs() < 5e-5);
        assert!((oc.h01.pcp - 0.0728).abs() < 5e-5);
        assert!((oc.h10.pcp - 0.0724).abs() < 5e-5);
        assert!((oc.h11.pcp - 0.8337).abs() < 5e-5);
        assert!((oc.h11.pet - 0.1127).abs() < 5e-5);
        assert!((oc.h11.ess - 33.20).abs() < 5e-3);
    }

    #[test]
    fn go_impossible_and_no_early_stops() {
        let p = OutcomeProbabilities::independent(0.5, 0.3).unwrap();
        let b = StoppingBoundaries::new(vec![
            LookBoundary { n: 4, l_e: Some(-1), l_t: Some(5) },
            LookBoundary { n: 8, l_e: Some(8), l_t: Some(3) },
        ])
        .unwrap();
        assert_eq!(claim_probability(&b, &p).unwrap(), 0.0);
        assert_eq!(brute_force_claim_probability(&b, &p).unwrap(), 0.0);
        let oc = operating_characteristics(&b, &p).unwrap();
        assert!(oc.pet.abs() < 1e-14);
        assert!((oc.ess - 8.0).abs() < 1e-12);
    }

    #[test]
    fn brute_force_two_patient_example() {
        let p = OutcomeProbabilities::new(0.5, 0.5, 0.25).unwrap();
        let b = StoppingBoundaries::new(vec![LookBoundary { n: 2, l_e: Some(0), l_t: Some(2) }]).unwrap();
        // xE in {1,2} has probability 3/4, xT in {0,1} has 3/4, independent
        assert!((brute_force_claim_probability(&b, &p).unwrap() - 0.5625).abs() < 1e-14);
        assert!((claim_probability(&b, &p).unwrap() - 0.5625).abs() < 1e-14);
        let big = StoppingBoundaries::new(vec![LookBoundary { n: 11, l_e: Some(0), l_t: Some(2) }]).unwrap();
        assert!(matches!(brute_force_claim_probability(&big, &p), Err(Error::Size(_))));
    }

    #[test]
    fn independence_residual_examples() {
        let (spec, b) = scenario4();
        assert!(theorem1_residual(&b, &spec).unwrap().abs() < 1e-10);
        let single = StoppingBoundaries::new(vec![LookBoundary { n: 20, l_e: Some(7), l_t: Some(6) }]).unwrap();
        assert!(theorem1_residual(&single, &spec).unwrap().abs() < 1e-10);
    }

    #[test]
    fn sensitivity_contains_design_point() {
        let (spec, b) = scenario4();
        let curve = phi_sensitivity_curve(&b, &spec, &[4.0, 1.0, 0.25]).unwrap();
        assert_eq!(curve.iter().map(|c| c.phi).collect::<Vec<_>>(), vec![0.25, 1.0, 4.0]);
        let oc = evaluate_design(&b, &spec, 1.0).unwrap();
        assert_eq!(curve[1].alpha00, oc.h00.pcp);
        assert_eq!(curve[1].power, oc.h11.pcp);
        assert!(phi_sensitivity_curve(&b, &spec, &[0.0]).is_err());
    }

    #[test]
    fn marginal_product_matches_joint_at_independence() {
        let (spec, b) = scenario4();
        for h in Hypothesis::ALL {
            let (pe, pt) = spec.hypothesis_point(h);
            let e = marginal_stage_pass_probs(&b.looks, Endpoint::Efficacy, pe);
            let t = marginal_stage_pass_probs(&b.looks, Endpoint::Toxicity, pt);
            let joint = stage_pass_probs(&b, &OutcomeProbabilities::independent(pe, pt).unwrap());
            for r in 0..3 {
                assert!((e[r] * t[r] - joint[r]).abs() < 1e-13, "{h:?} {r}: {} vs {}", e[r] * t[r], joint[r]);
            }
        }
    }

    fn arb_boundaries(max_n: usize) -> impl Strategy<Value = StoppingBoundaries> {
        (1usize..=3, 0usize..1000).prop_flat_map(move |(r, seed)| {
            let looks: Vec<usize> = {
                let mut ns: Vec<usize> = (1..=max_n).collect();
                // deterministic subset with max_n last
                let mut chosen = vec![max_n];
                let mut s = seed;
                while chosen.len() < r && ns.len() > 1 {
                    ns.retain(|n| !chosen.contains(n));
                    if ns.is_empty() {
                        break;
                    }
                    chosen.push(ns[s % ns.len()]);
                    s = s / 3 + 7;
                }
                chosen.sort_unstable();
                chosen
            };
            let k = looks.len();
            (
                Just(looks),
                proptest::collection::vec((0i64..=max_n as i64 + 1, 0i64..=max_n as i64 + 2, any::<bool>()), k),
            )
                .prop_map(|(looks, raw)| {
                    let mut run_e = -1i64;
                    let mut run_t = 0i64;
                    let last = looks.len() - 1;
                    let v = looks
                        .iter()
                        .zip(raw)
                        .enumerate()
                        .map(|(i, (&n, (e, t, flag)))| {
                            run_e = run_e.max((e - 1).min(n as i64));
                            run_t = run_t.max(t.min(n as i64 + 1));
                            let check_e = i == last || flag;
                            let check_t = i == last || !flag || e % 2 == 0;
                            LookBoundary { n, l_e: check_e.then_some(run_e), l_t: check_t.then_some(run_t) }
                        })
                        .collect();
                    StoppingBoundaries::new(v).unwrap()
                })
        })
    }

    fn arb_outcome() -> impl Strategy<Value = OutcomeProbabilities> {
        (0.01f64..0.99, 0.01f64..0.99, 0.05f64..20.0)
            .prop_map(|(pe, pt, phi)| OutcomeProbabilities::with_odds_ratio(pe, pt, phi).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn recursion_matches_enumeration(b in arb_boundaries(6), p in arb_outcome()) {
            let exact = claim_probability(&b, &p).unwrap();
            let brute = brute_force_claim_probability(&b, &p).unwrap();
            prop_assert!((exact - brute).abs() <= 1e-12, "{} vs {}", exact, brute);
        }

        #[test]
        fn stage_pass_probs_non_increasing(b in arb_boundaries(12), p in arb_outcome()) {
            let oc = operating_characteristics(&b, &p).unwrap();
            prop_assert!(oc.stage_pass_probs.windows(2).all(|w| w[1] <= w[0] + 1e-14));
            prop_assert!(oc.pcp <= oc.stage_pass_probs[0] + 1e-14);
            let r = oc.stage_pass_probs.len();
            let reach_final = if r >= 2 { oc.stage_pass_probs[r - 2] } else { 1.0 };
            prop_assert!((oc.pet + reach_final - 1.0).abs() < 1e-14);
            prop_assert!(oc.ess >= b.looks[0].n as f64 - 1e-12 && oc.ess <= b.max_n() as f64 + 1e-12);
        }

        #[test]
        fn stochastic_ordering(b in arb_boundaries(10), pe in 0.05f64..0.9, pt in 0.05f64..0.9,
                               phi in 0.2f64..5.0, d in 0.01f64..0.09) {
            let base = claim_probability(&b, &OutcomeProbabilities::with_odds_ratio(pe, pt, phi).unwrap()).unwrap();
            let more_e = claim_probability(&b, &OutcomeProbabilities::with_odds_ratio(pe + d, pt, phi).unwrap()).unwrap();
            let more_t = claim_probability(&b, &OutcomeProbabilities::with_odds_ratio(pe, pt + d, phi).unwrap()).unwrap();
            prop_assert!(more_e >= base - 1e-12);
            prop_assert!(more_t <= base + 1e-12);
        }

        #[test]
        fn independence_residual_vanishes(b in arb_boundaries(20)) {
            let (spec, _) = scenario4();
            prop_assert!(theorem1_residual(&b, &spec).unwrap().abs() <= 1e-10);
        }

        #[test]
        fn claim_probabilities_monotone_in_phi(b in arb_boundaries(14), pe in 0.1f64..0.9, pt in 0.1f64..0.9) {
            let mut prev = f64::INFINITY;
            for phi in [0.25, 0.5, 1.0, 2.0, 4.0, 10.0] {
                let a = claim_probability(&b, &OutcomeProbabilities::with_odds_ratio(pe, pt, phi).unwrap()).unwrap();
                prop_assert!(a <= prev + 1e-12);
                prev = a;
            }
        }
    }
}
