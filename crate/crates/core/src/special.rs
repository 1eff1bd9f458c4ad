//! Regularized incomplete beta function.
//!
//! Evaluated with the modified Lentz continued fraction. The fraction converges
//! quickly for `x < (a + 1) / (a + b + 2)`; above that point the symmetry
//! `I_x(a, b) = 1 - I_{1-x}(b, a)` is used, and the upper tail is returned
//! directly rather than as a difference so small tails keep their precision.

use statrs::function::beta::ln_beta;

const REL_TOL: f64 = 1e-14;
const MAX_ITER: usize = 10_000;
const TINY: f64 = 1e-300;

fn continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;

        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;

        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < REL_TOL {
            break;
        }
    }
    h
}

/// `x^a (1-x)^b / B(a, b)`, the common prefactor of both series branches.
fn prefactor(a: f64, b: f64, x: f64) -> f64 {
    (a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b)).exp()
}

/// Lower and upper tails `(I_x(a, b), 1 - I_x(a, b))` of a Beta(a, b) variable.
///
/// Requires `a > 0`, `b > 0`; `x` is clamped to `[0, 1]`.
pub fn beta_tails(a: f64, b: f64, x: f64) -> (f64, f64) {
    debug_assert!(a > 0.0 && b > 0.0);
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    if x >= 1.0 {
        return (1.0, 0.0);
    }
    let front = prefactor(a, b, x);
    if x < (a + 1.0) / (a + b + 2.0) {
        let lower = (front * continued_fraction(a, b, x) / a).clamp(0.0, 1.0);
        (lower, 1.0 - lower)
    } else {
        let upper = (front * continued_fraction(b, a, 1.0 - x) / b).clamp(0.0, 1.0);
        (1.0 - upper, upper)
    }
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    beta_tails(a, b, x).0
}
