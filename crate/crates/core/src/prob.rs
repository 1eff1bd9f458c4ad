//! Probability kernels shared by every other module.
//!
//! The joint outcome of one patient is a 2×2 table over (response, toxicity).
//! Cells are ordered `(1,1), (1,0), (0,1), (0,0)` throughout, so cell 1 is a
//! response with toxicity and cell 4 is neither.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::special::beta_tails;

/// Slack allowed on Fréchet bounds before a joint probability is rejected.
const FRECHET_SLACK: f64 = 1e-12;

/// `(max(0, πE + πT − 1), min(πE, πT))`, the feasible range of `πET`.
pub fn frechet_bounds(pi_e: f64, pi_t: f64) -> (f64, f64) {
    let upper = pi_e.min(pi_t);
    ((pi_e - (1.0 - pi_t)).max(0.0).min(upper), upper)
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("{name} = {p} is not a probability")));
    }
    Ok(())
}

/// Four cell probabilities `(π11, π10, π01, π00)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellProbabilities {
    pub p11: f64,
    pub p10: f64,
    pub p01: f64,
    pub p00: f64,
}

impl CellProbabilities {
    pub fn as_array(&self) -> [f64; 4] {
        [self.p11, self.p10, self.p01, self.p00]
    }
}

/// Odds ratio between the efficacy and toxicity indicators.
///
/// A zero cell makes the ratio degenerate; those cases are reported explicitly
/// instead of as `inf`/`NaN`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum OddsRatio {
    Finite(f64),
    /// A discordant cell is empty while both concordant cells are positive.
    Infinite,
    /// A concordant cell is empty while both discordant cells are positive.
    Zero,
    /// Both a concordant and a discordant cell are empty.
    Indeterminate,
}

impl OddsRatio {
    pub fn finite(self) -> Option<f64> {
        match self {
            OddsRatio::Finite(v) => Some(v),
            _ => None,
        }
    }
}

/// True joint distribution of one patient's (response, toxicity) outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeProbabilities {
    pub pi_e: f64,
    pub pi_t: f64,
    pub pi_et: f64,
}

impl OutcomeProbabilities {
    pub fn new(pi_e: f64, pi_t: f64, pi_et: f64) -> Result<Self> {
        let p = OutcomeProbabilities { pi_e, pi_t, pi_et };
        p.validate()?;
        Ok(p)
    }

    /// Efficacy and toxicity independent: `πET = πE πT`.
    pub fn independent(pi_e: f64, pi_t: f64) -> Result<Self> {
        Self::new(pi_e, pi_t, pi_e * pi_t)
    }

    /// Joint distribution with the given marginals and odds ratio.
    pub fn with_odds_ratio(pi_e: f64, pi_t: f64, phi: f64) -> Result<Self> {
        Self::new(pi_e, pi_t, pi_et_from_phi(pi_e, pi_t, phi)?)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("pi_e", self.pi_e)?;
        check_probability("pi_t", self.pi_t)?;
        check_probability("pi_et", self.pi_et)?;
        let (lo, hi) = frechet_bounds(self.pi_e, self.pi_t);
        if self.pi_et < lo - FRECHET_SLACK || self.pi_et > hi + FRECHET_SLACK {
            return Err(Error::domain(format!("pi_et = {} outside Fréchet bounds [{lo}, {hi}]", self.pi_et)));
        }
        Ok(())
    }

    pub fn cells(&self) -> CellProbabilities {
        // Fréchet slack can leave a cell at -1e-13; clamp so sampling and
        // binomial kernels never see a negative probability.
        let p11 = self.pi_et.max(0.0);
        let p10 = (self.pi_e - self.pi_et).max(0.0);
        let p01 = (self.pi_t - self.pi_et).max(0.0);
        let p00 = (1.0 - self.pi_e - self.pi_t + self.pi_et).max(0.0);
        CellProbabilities { p11, p10, p01, p00 }
    }

    /// `Pr(response | toxicity)`; `None` when `πT = 0`.
    pub fn pi_e_given_t(&self) -> Option<f64> {
        (self.pi_t > 0.0).then(|| (self.pi_et / self.pi_t).clamp(0.0, 1.0))
    }

    /// `Pr(response | no toxicity)`; `None` when `πT = 1`.
    pub fn pi_e_given_not_t(&self) -> Option<f64> {
        (self.pi_t < 1.0).then(|| ((self.pi_e - self.pi_et) / (1.0 - self.pi_t)).clamp(0.0, 1.0))
    }

    pub fn odds_ratio(&self) -> OddsRatio {
        odds_ratio_of_cells(&self.cells())
    }
}

/// Cell probabilities for a validated joint distribution.
pub fn cells_from_margins(p: &OutcomeProbabilities) -> Result<CellProbabilities> {
    p.validate()?;
    Ok(p.cells())
}

fn odds_ratio_of_cells(c: &CellProbabilities) -> OddsRatio {
    let num = c.p11 * c.p00;
    let den = c.p10 * c.p01;
    match (num > 0.0, den > 0.0) {
        (true, true) => OddsRatio::Finite(num / den),
        (true, false) => OddsRatio::Infinite,
        (false, true) => OddsRatio::Zero,
        (false, false) => OddsRatio::Indeterminate,
    }
}

/// Odds ratio `πET(1−πE−πT+πET) / ((πE−πET)(πT−πET))`.
pub fn phi_from_pi_et(pi_e: f64, pi_t: f64, pi_et: f64) -> Result<OddsRatio> {
    let p = OutcomeProbabilities::new(pi_e, pi_t, pi_et)?;
    Ok(p.odds_ratio())
}

/// Joint probability `πET` implied by the marginals and odds ratio `φ`.
///
/// Solves `(1−φ)πET² + (1 − (1−φ)(πE+πT))πET − φπEπT = 0` for the root that
/// lies within the Fréchet bounds.
pub fn pi_et_from_phi(pi_e: f64, pi_t: f64, phi: f64) -> Result<f64> {
    if phi.is_nan() || phi <= 0.0 || !phi.is_finite() {
        return Err(Error::domain(format!("odds ratio must be positive and finite, got {phi}")));
    }
    if !(0.0 < pi_e && pi_e < 1.0) || !(0.0 < pi_t && pi_t < 1.0) {
        return Err(Error::domain(format!("marginals must lie in (0, 1), got pi_e = {pi_e}, pi_t = {pi_t}")));
    }
    let (lo, hi) = frechet_bounds(pi_e, pi_t);
    if phi == 1.0 {
        return Ok(pi_e * pi_t);
    }
    // Written as the root of a x² + b x + c with a = 1 − φ. The closed form
    // `(s − 1/(1−φ) ∓ sqrt(...)) / 2` cancels badly as φ → 1 or φ → ∞, so use
    // the numerically stable pairing of the two roots instead.
    let a = 1.0 - phi;
    let b = 1.0 - a * (pi_e + pi_t);
    let c = -phi * pi_e * pi_t;
    let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
    // q has the sign of b, so both q and 2c/q avoid subtractive cancellation.
    let q = -0.5 * (b + b.signum() * disc);
    let r1 = q / a;
    let r2 = c / q;
    let inside = |r: f64| r >= lo - 1e-12 && r <= hi + 1e-12;
    let root = match (inside(r1), inside(r2)) {
        (true, false) => r1,
        (false, true) => r2,
        (true, true) => {
            if (r1 - r2).abs() < 1e-12 {
                r1
            } else {
                // Only one root is strictly positive with both discordant
                // cells non-negative; prefer the one with the larger margin.
                let slack = |r: f64| (r - lo).min(hi - r);
                if slack(r1) >= slack(r2) {
                    r1
                } else {
                    r2
                }
            }
        }
        (false, false) => {
            return Err(Error::domain(format!(
                "no feasible joint probability for pi_e = {pi_e}, pi_t = {pi_t}, phi = {phi}"
            )))
        }
    };
    Ok(root.clamp(lo, hi))
}

/// `ln C(n, k) + k ln p + (n−k) ln(1−p)`, with `0·ln 0 = 0`.
pub fn log_binomial_pmf(k: usize, n: usize, p: f64) -> Result<f64> {
    if k > n {
        return Err(Error::domain(format!("k = {k} exceeds n = {n}")));
    }
    check_probability("p", p)?;
    Ok(log_binomial_pmf_unchecked(k, n, p))
}

pub(crate) fn log_binomial_pmf_unchecked(k: usize, n: usize, p: f64) -> f64 {
    let term = |count: usize, q: f64| {
        if count == 0 {
            0.0
        } else if q == 0.0 {
            f64::NEG_INFINITY
        } else {
            count as f64 * q.ln()
        }
    };
    let log_choose = if k == 0 || k == n {
        0.0
    } else {
        ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
    };
    log_choose + term(k, p) + term(n - k, 1.0 - p)
}

/// Binomial pmf over `0..=n`.
pub(crate) fn binomial_pmf_vec(n: usize, p: f64) -> Vec<f64> {
    (0..=n).map(|k| log_binomial_pmf_unchecked(k, n, p).exp()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailDirection {
    /// `Pr(π > threshold | data)`
    Above,
    /// `Pr(π ≤ threshold | data)`
    AtOrBelow,
}

/// Posterior tail of a marginal rate under the Dirichlet-multinomial model.
///
/// After `x` events in `n` patients the marginal rate is
/// `Beta(tau_marginal + x, n + total_tau − tau_marginal − x)`.
pub fn beta_posterior_tail(
    x: usize,
    n: usize,
    tau_marginal: f64,
    total_tau: f64,
    threshold: f64,
    direction: TailDirection,
) -> Result<f64> {
    if x > n {
        return Err(Error::domain(format!("x = {x} exceeds n = {n}")));
    }
    if !(tau_marginal > 0.0 && tau_marginal < total_tau) {
        return Err(Error::domain(format!("need 0 < tau_marginal < total_tau, got {tau_marginal} and {total_tau}")));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::domain(format!("threshold {threshold} not in (0, 1)")));
    }
    let a = tau_marginal + x as f64;
    let b = n as f64 + total_tau - tau_marginal - x as f64;
    let (lower, upper) = beta_tails(a, b, threshold);
    Ok(match direction {
        TailDirection::Above => upper,
        TailDirection::AtOrBelow => lower,
    })
}

/// Dirichlet hyperparameters `(τ1, τ2, τ3, τ4)` over the four outcome cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorHyperparameters {
    pub tau: [f64; 4],
}

impl PriorHyperparameters {
    pub fn new(tau: [f64; 4]) -> Result<Self> {
        let p = PriorHyperparameters { tau };
        p.validate()?;
        Ok(p)
    }

    /// Prior whose marginal means are `(pi_e, pi_t)`, cells filled by
    /// independence, with total mass `effective_sample_size`.
    pub fn centered(pi_e: f64, pi_t: f64, effective_sample_size: f64) -> Self {
        let w = effective_sample_size;
        PriorHyperparameters {
            tau: [w * pi_e * pi_t, w * pi_e * (1.0 - pi_t), w * (1.0 - pi_e) * pi_t, w * (1.0 - pi_e) * (1.0 - pi_t)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::config("prior.tau", "every tau must be finite and non-negative"));
        }
        if self.total() <= 0.0 {
            return Err(Error::config("prior.tau", "tau must have a positive sum"));
        }
        Ok(())
    }

    /// Prior effective sample size `Σ τk`.
    pub fn total(&self) -> f64 {
        self.tau.iter().sum()
    }

    pub fn tau_e(&self) -> f64 {
        self.tau[0] + self.tau[1]
    }

    pub fn tau_t(&self) -> f64 {
        self.tau[0] + self.tau[2]
    }

    /// Posterior mean of `πE` after `x_e` responses in `n` patients.
    pub fn posterior_mean_efficacy(&self, x_e: usize, n: usize) -> f64 {
        (self.tau_e() + x_e as f64) / (self.total() + n as f64)
    }

    /// Posterior mean of `πT` after `x_t` toxicities in `n` patients.
    pub fn posterior_mean_toxicity(&self, x_t: usize, n: usize) -> f64 {
        (self.tau_t() + x_t as f64) / (self.total() + n as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::{One, ToPrimitive};
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn binomial_degenerate_and_symmetric() {
        assert_eq!(log_binomial_pmf(0, 5, 0.0).unwrap(), 0.0);
        assert_eq!(log_binomial_pmf(5, 5, 1.0).unwrap(), 0.0);
        assert_eq!(log_binomial_pmf(1, 5, 0.0).unwrap(), f64::NEG_INFINITY);
        assert!(close(log_binomial_pmf(2, 4, 0.5).unwrap(), 0.375f64.ln(), 1e-14));
    }

    #[test]
    fn binomial_matches_exact_rational() {
        // C(36,7) 0.3^7 0.7^29 evaluated in exact rational arithmetic.
        let mut choose = BigInt::one();
        for i in 0..7u32 {
            choose = choose * BigInt::from(36 - i) / BigInt::from(i + 1);
        }
        let p = BigRational::new(BigInt::from(3), BigInt::from(10));
        let q = BigRational::new(BigInt::from(7), BigInt::from(10));
        let mut exact = BigRational::from_integer(choose);
        for _ in 0..7 {
            exact *= &p;
        }
        for _ in 0..29 {
            exact *= &q;
        }
        let want = exact.to_f64().unwrap();
        let got = log_binomial_pmf(7, 36, 0.3).unwrap().exp();
        assert!(close(got, want, 1e-14 * want.max(1e-300) * 100.0), "{got} vs {want}");
    }

    #[test]
    fn binomial_domain_errors() {
        assert!(log_binomial_pmf(6, 5, 0.5).is_err());
        assert!(log_binomial_pmf(1, 5, 1.5).is_err());
        assert!(log_binomial_pmf(1, 5, -0.1).is_err());
    }

    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        fn rec(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = f(lm);
            let frm = f(rm);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                    + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
            }
        }
        let fa = f(a);
        let fb = f(b);
        let fm = f(0.5 * (a + b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, depth)
    }

    #[test]
    fn beta_tail_against_quadrature() {
        // Pr(Beta(10.3, 0.7) > 0.5) = 1 − ∫_0^0.5 density; the density is
        // smooth on [0, 0.5] so adaptive Simpson is reliable there.
        let (a, b) = (10.3, 0.7);
        let ln_norm = statrs::function::beta::ln_beta(a, b);
        let density = |x: f64| {
            if x <= 0.0 {
                0.0
            } else {
                ((a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_norm).exp()
            }
        };
        let below = simpson(&density, 0.0, 0.5, 1e-15, 50);
        let got = beta_posterior_tail(10, 10, 0.3, 1.0, 0.5, TailDirection::Above).unwrap();
        assert!(close(got, 1.0 - below, 1e-11), "{got} vs {}", 1.0 - below);
    }

    #[test]
    fn beta_tail_vanishing_threshold() {
        let p = beta_posterior_tail(0, 0, 0.3, 1.0, 1e-12, TailDirection::Above).unwrap();
        assert!(p > 0.999);
    }

    #[test]
    fn beta_tail_scenario4_interim_is_stop() {
        // 5 responses out of 18 is a futility stop in the scenario-4 design
        // whose interim cutoff lies between the tails at x = 5 and x = 6.
        let p5 = beta_posterior_tail(5, 18, 0.3, 1.0, 0.3, TailDirection::Above).unwrap();
        let p6 = beta_posterior_tail(6, 18, 0.3, 1.0, 0.3, TailDirection::Above).unwrap();
        assert!(p5 < p6);
        assert!(p5 < 0.5, "{p5}");
    }

    #[test]
    fn beta_tail_errors() {
        assert!(beta_posterior_tail(3, 2, 0.3, 1.0, 0.5, TailDirection::Above).is_err());
        assert!(beta_posterior_tail(1, 2, 1.0, 1.0, 0.5, TailDirection::Above).is_err());
        assert!(beta_posterior_tail(1, 2, 0.3, 1.0, 1.0, TailDirection::Above).is_err());
    }

    #[test]
    fn cells_examples() {
        let c = cells_from_margins(&OutcomeProbabilities::new(0.5, 0.3, 0.15).unwrap()).unwrap();
        assert_eq!(c.as_array(), [0.15, 0.35, 0.15, 0.35]);
        let c = cells_from_margins(&OutcomeProbabilities::new(0.5, 0.5, 0.5).unwrap()).unwrap();
        assert_eq!(c.as_array(), [0.5, 0.0, 0.0, 0.5]);
        let c = cells_from_margins(&OutcomeProbabilities::new(0.6, 0.4, 0.3).unwrap()).unwrap();
        for (g, w) in c.as_array().iter().zip([0.3, 0.3, 0.1, 0.3]) {
            assert!(close(*g, w, 1e-15));
        }
        assert!(OutcomeProbabilities::new(0.5, 0.3, 0.31).is_err());
        assert!(OutcomeProbabilities::new(0.9, 0.8, 0.6).is_err());
    }

    #[test]
    fn frechet_examples() {
        assert_eq!(frechet_bounds(0.5, 0.3), (0.0, 0.3));
        let (lo, hi) = frechet_bounds(0.9, 0.8);
        assert!(close(lo, 0.7, 1e-15) && hi == 0.8);
        assert_eq!(frechet_bounds(1.0, 0.4), (0.4, 0.4));
    }

    #[test]
    fn odds_ratio_examples() {
        assert!(close(phi_from_pi_et(0.5, 0.3, 0.15).unwrap().finite().unwrap(), 1.0, 1e-14));
        assert!(close(phi_from_pi_et(0.6, 0.4, 0.3).unwrap().finite().unwrap(), 3.0, 1e-13));
        assert_eq!(phi_from_pi_et(0.5, 0.5, 0.5).unwrap(), OddsRatio::Infinite);
        assert_eq!(phi_from_pi_et(0.5, 0.5, 0.0).unwrap(), OddsRatio::Zero);
        assert_eq!(phi_from_pi_et(1.0, 0.5, 0.5).unwrap(), OddsRatio::Indeterminate);
    }

    #[test]
    fn pi_et_examples() {
        assert_eq!(pi_et_from_phi(0.5, 0.3, 1.0).unwrap(), 0.15);
        assert!(close(pi_et_from_phi(0.6, 0.4, 3.0).unwrap(), 0.3, 1e-13));
        assert!(close(pi_et_from_phi(0.5, 0.3, 1e9).unwrap(), 0.3, 1e-6));
        let r = pi_et_from_phi(0.6, 0.2, 4.0).unwrap();
        assert!(close(phi_from_pi_et(0.6, 0.2, r).unwrap().finite().unwrap(), 4.0, 1e-12));
        assert!(pi_et_from_phi(0.5, 0.3, 0.0).is_err());
        assert!(pi_et_from_phi(0.5, 0.3, -1.0).is_err());
    }

    #[test]
    fn odds_ratio_round_trip_grid() {
        for &phi in &[0.1, 0.5, 1.0, 2.0, 10.0] {
            for i in 1..=9 {
                for j in 1..=9 {
                    let (pe, pt) = (i as f64 / 10.0, j as f64 / 10.0);
                    let r = pi_et_from_phi(pe, pt, phi).unwrap();
                    let back = phi_from_pi_et(pe, pt, r).unwrap().finite().unwrap();
                    assert!(close(back, phi, 1e-10 * phi.max(1.0)), "{pe} {pt} {phi}: {back}");
                }
            }
        }
    }

    #[test]
    fn prior_centering() {
        let p = PriorHyperparameters::centered(0.3, 0.4, 1.0);
        assert!(close(p.total(), 1.0, 1e-15));
        assert!(close(p.tau_e(), 0.3, 1e-15));
        assert!(close(p.tau_t(), 0.4, 1e-15));
        assert!(PriorHyperparameters::new([0.0; 4]).is_err());
        assert!(PriorHyperparameters::new([-0.1, 0.5, 0.3, 0.3]).is_err());
    }

    proptest! {
        #[test]
        fn binomial_pmf_sums_to_one(n in 0usize..120, p in 0.0f64..=1.0) {
            let total: f64 = (0..=n).map(|k| log_binomial_pmf(k, n, p).unwrap().exp()).sum();
            prop_assert!((total - 1.0).abs() < 1e-12, "n={} p={} total={}", n, p, total);
        }

        #[test]
        fn tails_monotone_in_count(n in 1usize..60, tau in 0.05f64..0.95, thr in 0.05f64..0.95) {
            let mut prev_above = -1.0;
            let mut prev_below = 2.0;
            for x in 0..=n {
                let above = beta_posterior_tail(x, n, tau, 1.0, thr, TailDirection::Above).unwrap();
                let below = beta_posterior_tail(x, n, tau, 1.0, thr, TailDirection::AtOrBelow).unwrap();
                prop_assert!(above >= prev_above && below <= prev_below);
                prop_assert!((above + below - 1.0).abs() < 1e-14);
                prev_above = above;
                prev_below = below;
            }
        }

        #[test]
        fn cells_sum_to_one(pe in 0.0f64..=1.0, pt in 0.0f64..=1.0, u in 0.0f64..=1.0) {
            let (lo, hi) = frechet_bounds(pe, pt);
            let p = OutcomeProbabilities::new(pe, pt, lo + u * (hi - lo)).unwrap();
            let c = cells_from_margins(&p).unwrap();
            prop_assert!(c.as_array().iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert!((c.as_array().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }
}
