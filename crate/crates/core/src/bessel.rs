//! Modified Bessel functions of the first kind and the water-wave symbol.

use crate::error::{Error, Result};
use crate::quadrature::gamma;

/// Above this argument `I_{1−s}(x)/I_{s−1}(x) = 1` to machine precision:
/// both orders share `4ν²`, so the ratio differs from 1 by `O(e^{−2x})`.
pub const ASYMPTOTIC_FROM: f64 = 40.0;

/// `Σ_m q^m / (m! Γ(m+ν+1))`, so that `I_ν(x) = (x/2)^ν · series(ν, x²/4)`.
fn series(nu: f64, q: f64) -> f64 {
    let mut term = 1.0 / gamma(nu + 1.0);
    let mut sum = term;
    for m in 0..500 {
        let m = m as f64;
        term *= q / ((m + 1.0) * (m + 1.0 + nu));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// `I_ν(x)` by its power series; intended for `x ≤ 100`.
pub fn bessel_i(nu: f64, x: f64) -> f64 {
    if x == 0.0 {
        return if nu == 0.0 { 1.0 } else if nu > 0.0 { 0.0 } else { f64::INFINITY };
    }
    (0.5 * x).powf(nu) * series(nu, 0.25 * x * x)
}

/// `S_s(ξ) = I_{1−s}(|ξ|) / I_{s−1}(|ξ|) · |ξ|^{2s}`, the real positive branch
/// of `J_{1−s}(−i|ξ|)/J_{s−1}(−i|ξ|) · |ξ|^{2s}`.
pub fn multiplier_s(s: f64, xi: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::OutOfRange {
            name: "s",
            value: s,
            expected: "(0, 1)",
        });
    }
    if !(xi >= 0.0) {
        return Err(Error::OutOfRange {
            name: "xi",
            value: xi,
            expected: ">= 0",
        });
    }
    Ok(multiplier_unchecked(s, xi))
}

pub(crate) fn multiplier_unchecked(s: f64, x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if x <= ASYMPTOTIC_FROM {
        let q = 0.25 * x * x;
        x * x * 2f64.powf(2.0 * s - 2.0) * series(1.0 - s, q) / series(s - 1.0, q)
    } else {
        x.powf(2.0 * s)
    }
}
