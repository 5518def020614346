//! Standard normal distribution helpers built on the complementary error
//! function (`libm::erfc`, accurate to a few ulp over the whole real line).

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Standard normal CDF, Φ(x) = erfc(−x/√2)/2.
///
/// Computed through `erfc` in both tails so that Φ(x) for very negative `x`
/// keeps full relative precision instead of collapsing to `1 − 1`.
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_values() {
        // scipy.stats.norm.cdf
        assert!((cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((cdf(-1.0) - 0.158_655_253_931_457_05).abs() < 1e-15);
        assert!((cdf(-5.0) - 2.866_515_718_791_939e-7).abs() < 1e-20);
        assert!((cdf(-30.0) / 4.906_713_927_148_187e-198 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cdf_symmetry() {
        for &x in &[0.1, 0.7, 1.3, 2.9, 6.0] {
            assert!((cdf(x) + cdf(-x) - 1.0).abs() < 1e-15);
        }
    }
}
