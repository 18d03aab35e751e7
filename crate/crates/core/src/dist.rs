//! Inverse CDFs used by the scalar primitives. Each maps one uniform to one
//! draw, so every primitive consumes exactly one node of the tree.

use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc_inv;

/// Standard normal quantile. Returns `-inf` at 0 and `+inf` at 1.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Absolute tolerance of the bisection in [`beta_quantile`].
pub const BETA_QUANTILE_TOL: f64 = 1e-12;

/// Quantile of Beta(a, b) at `u`, for `a, b > 0`.
///
/// Closed forms when either shape is 1; bisection on the regularized
/// incomplete beta function otherwise.
pub fn beta_quantile(a: f64, b: f64, u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    if a == 1.0 && b == 1.0 {
        return u;
    }
    if a == 1.0 {
        return 1.0 - (1.0 - u).powf(1.0 / b);
    }
    if b == 1.0 {
        return u.powf(1.0 / a);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > BETA_QUANTILE_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
