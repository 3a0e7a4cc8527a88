//! Standard normal density and distribution helpers.

use libm::erfc;
use std::f64::consts::{PI, SQRT_2};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// log φ(x) for the standard normal density.
#[inline]
pub fn ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - HALF_LN_2PI
}

#[inline]
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Log density of N(mean, var) at `x`.
#[inline]
pub fn ln_pdf_scaled(x: f64, mean: f64, var: f64) -> f64 {
    let z = x - mean;
    -0.5 * z * z / var - 0.5 * var.ln() - HALF_LN_2PI
}

/// Φ(x). Uses erfc on both sides so the lower tail keeps relative accuracy.
#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// 1 − Φ(x), accurate in the upper tail.
#[inline]
pub fn sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// log(Σ exp(v_i)); returns −∞ for an empty or all −∞ input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// log(1 + exp(x)) without overflow.
#[inline]
pub fn ln_1p_exp(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_matches_closed_form() {
        assert!((pdf(0.0) - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!((ln_pdf(1.3) - pdf(1.3).ln()).abs() < 1e-13);
        assert!((ln_pdf_scaled(0.3, 0.0, 1.0) - ln_pdf(0.3)).abs() < 1e-15);
    }

    #[test]
    fn cdf_tails() {
        assert!((cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((cdf(-1.959_963_984_540_054) - 0.025).abs() < 1e-12);
        // Φ(−10) ≈ 7.6198530241605e-24
        assert!((cdf(-10.0) / 7.619_853_024_160_527e-24 - 1.0).abs() < 1e-10);
        assert!((sf(10.0) - cdf(-10.0)).abs() < 1e-35);
    }

    #[test]
    fn lse_is_stable() {
        let v = [-1000.0, -1000.0];
        assert!((log_sum_exp(&v) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }
}
