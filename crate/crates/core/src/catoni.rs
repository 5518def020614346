//! Heavy-tail robust scalar mean estimation.
//!
//! Observations are rescaled by `s`, perturbed by multiplicative Gaussian
//! noise `1 + ε` with `ε ~ N(0, 1/β)`, passed through the soft truncation
//! [`truncate`], and the noise is integrated out analytically:
//!
//! ```text
//! x̂ = (s/n) Σᵢ E ψ(aᵢ + bᵢ Z),   aᵢ = xᵢ/s,   bᵢ = |xᵢ|/(s√β),   Z ~ N(0, 1)
//! ```
//!
//! The Gaussian expectation has the closed form
//! `E ψ(a + bZ) = a(1 − b²/2) − a³/6 + C(a, b)` where `C` is the five-term
//! [`correction`]. No sampling or numerical integration is needed in the
//! regime the optimizer operates in.

use std::f64::consts::{PI, SQRT_2};

use log::warn;

use crate::error::{positive, Error, Result};
use crate::normal;
use crate::quadrature;

/// Saturation level of [`truncate`], `2√2/3`.
pub const PSI_BOUND: f64 = 2.0 * SQRT_2 / 3.0;

const DELTA_MIN: f64 = 1e-12;
const DELTA_MAX: f64 = 1.0 - 1e-12;

/// Soft truncation: `u − u³/6` on `[−√2, √2]`, constant `±2√2/3` outside.
///
/// Odd, non-decreasing and 1-Lipschitz.
pub fn truncate(u: f64) -> f64 {
    if u > SQRT_2 {
        PSI_BOUND
    } else if u < -SQRT_2 {
        -PSI_BOUND
    } else {
        u - u * u * u / 6.0
    }
}

/// `v·e`, treating `e == 0` as an exact zero so that infinite `v` from a
/// vanishing scale does not produce NaN.
fn tail_product(v: f64, e: f64) -> f64 {
    if e == 0.0 {
        0.0
    } else {
        v * e
    }
}

fn correction_unchecked(a: f64, b: f64) -> f64 {
    let v_minus = (SQRT_2 - a) / b;
    let v_plus = (SQRT_2 + a) / b;
    let f_minus = normal::cdf(-v_minus);
    let f_plus = normal::cdf(-v_plus);
    let e_minus = (-0.5 * v_minus * v_minus).exp();
    let e_plus = (-0.5 * v_plus * v_plus).exp();
    let root_2pi = (2.0 * PI).sqrt();

    let t1 = PSI_BOUND * (f_minus - f_plus);
    let t2 = -(a - a * a * a / 6.0) * (f_minus + f_plus);
    let t3 = b / root_2pi * (1.0 - a * a / 2.0) * (e_plus - e_minus);
    let t4 = a * b * b / 2.0
        * (f_plus
            + f_minus
            + (tail_product(v_plus, e_plus) + tail_product(v_minus, e_minus)) / root_2pi);
    let t5 = b * b * b / (6.0 * root_2pi)
        * (2.0 * e_minus + tail_product(v_minus * v_minus, e_minus)
            - 2.0 * e_plus
            - tail_product(v_plus * v_plus, e_plus));
    t1 + t2 + t3 + t4 + t5
}

/// Correction term `C(a, b) = T₁ + … + T₅` that makes
/// `a(1 − b²/2) − a³/6 + C(a, b)` equal to `E ψ(a + bZ)` exactly.
pub fn correction(a: f64, b: f64) -> Result<f64> {
    let b = positive("b", b)?;
    if !a.is_finite() {
        return Err(Error::NonFinite("a"));
    }
    Ok(correction_unchecked(a, b))
}

/// `E ψ(a + bZ)` for standard normal `Z`.
///
/// Inside `|a| ≤ 10, b ≤ 10` this is the polynomial-plus-[`correction`]
/// closed form. Outside that box the polynomial part and the correction
/// cancel catastrophically, so the same expectation is evaluated region by
/// region: saturated tails through Φ and the cubic core through truncated
/// normal moments (or a 32-point Gauss–Legendre rule in `u` once the
/// Gaussian is much wider than the core).
pub fn smoothed_psi_expectation(a: f64, b: f64) -> Result<f64> {
    let b = positive("b", b)?;
    if !a.is_finite() {
        return Err(Error::NonFinite("a"));
    }
    Ok(expectation_unchecked(a, b))
}

const CLOSED_FORM_BOX: f64 = 10.0;

pub(crate) fn expectation_unchecked(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        return truncate(a);
    }
    // ψ is odd and the noise symmetric; evaluate at |a| so oddness is exact.
    if a < 0.0 {
        return -expectation_unchecked(-a, b);
    }
    if a == 0.0 {
        return 0.0;
    }
    let value = if a.abs() <= CLOSED_FORM_BOX && b <= CLOSED_FORM_BOX {
        a * (1.0 - b * b / 2.0) - a * a * a / 6.0 + correction_unchecked(a, b)
    } else {
        expectation_by_region(a, b)
    };
    value.clamp(-PSI_BOUND, PSI_BOUND)
}

fn expectation_by_region(a: f64, b: f64) -> f64 {
    let upper = normal::cdf(-(SQRT_2 - a) / b);
    let lower = normal::cdf(-(SQRT_2 + a) / b);
    let core = if b <= CLOSED_FORM_BOX {
        core_by_moments(a, b)
    } else {
        let rule = quadrature::legendre_32();
        rule.integrate(-SQRT_2, SQRT_2, |u| {
            (u - u * u * u / 6.0) * normal::pdf((u - a) / b) / b
        })
    };
    PSI_BOUND * (upper - lower) + core
}

/// `E[(u − u³/6) 1{|u| ≤ √2}]` for `u = a + bZ`, via ∫ zᵏ φ(z) over the
/// standardized window.
fn core_by_moments(a: f64, b: f64) -> f64 {
    let lo = (-SQRT_2 - a) / b;
    let hi = (SQRT_2 - a) / b;
    let m0 = if lo > 0.0 {
        normal::cdf(-lo) - normal::cdf(-hi)
    } else if hi < 0.0 {
        normal::cdf(hi) - normal::cdf(lo)
    } else {
        1.0 - normal::cdf(lo) - normal::cdf(-hi)
    };
    let (p_lo, p_hi) = (normal::pdf(lo), normal::pdf(hi));
    let m1 = p_lo - p_hi;
    let m2 = m0 + tail_product(lo, p_lo) - tail_product(hi, p_hi);
    let m3 = 2.0 * m1 + tail_product(lo * lo, p_lo) - tail_product(hi * hi, p_hi);
    (a - a * a * a / 6.0) * m0 + b * (1.0 - a * a / 2.0) * m1
        - a * b * b / 2.0 * m2
        - b * b * b / 6.0 * m3
}

/// Confidence level `δ ∈ (0, 1)`.
///
/// Values within `10⁻¹²` of either end are clamped and flagged; callers can
/// inspect [`Confidence::was_clamped`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Confidence {
    value: f64,
    clamped: bool,
}

impl Confidence {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter {
                name: "delta",
                value: delta,
                reason: "confidence must lie in (0, 1)",
            });
        }
        let value = delta.clamp(DELTA_MIN, DELTA_MAX);
        let clamped = value != delta;
        if clamped {
            warn!("confidence {delta:e} clamped to {value:e}");
        }
        Ok(Self { value, clamped })
    }

    pub fn value(self) -> f64 {
        self.value
    }

    pub fn was_clamped(self) -> bool {
        self.clamped
    }

    /// `ln(1/δ)`.
    pub fn log_inverse(self) -> f64 {
        -self.value.ln()
    }
}

/// Parameters of the smoothed estimator: confidence `δ`, scale `s` and noise
/// precision `β` (the multiplicative noise has variance `1/β`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingParams {
    delta: Confidence,
    s: f64,
    beta: f64,
}

impl SmoothingParams {
    pub fn new(delta: f64, s: f64, beta: f64) -> Result<Self> {
        Ok(Self {
            delta: Confidence::new(delta)?,
            s: positive("s", s)?,
            beta: positive("beta", beta)?,
        })
    }

    /// Scale from [`scale_for`] and precision from
    /// [`default_noise_precision`], given a second-moment bound `v`.
    pub fn from_moment_bound(v: f64, n: usize, delta: f64) -> Result<Self> {
        let conf = Confidence::new(delta)?;
        Ok(Self {
            delta: conf,
            s: scale_for(v, n, delta)?,
            beta: default_noise_precision(delta)?,
        })
    }

    pub fn with_beta(self, beta: f64) -> Result<Self> {
        Ok(Self {
            beta: positive("beta", beta)?,
            ..self
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta.value()
    }

    pub fn scale(&self) -> f64 {
        self.s
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// A non-empty sample of finite observations.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSample(Vec<f64>);

impl ScalarSample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("sample"));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("sample"));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for ScalarSample {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

/// The smoothed truncated mean `(s/n) Σᵢ E ψ(xᵢ/s, |xᵢ|/(s√β))`.
///
/// Bounded by `s·2√2/3` in absolute value and `c_ρ/n`-Lipschitz in ℓ1
/// (see [`lipschitz_factor`]).
pub fn smoothed_mean(sample: &ScalarSample, params: &SmoothingParams) -> f64 {
    smoothed_mean_slice(sample.values(), params.s, params.beta)
}

pub(crate) fn smoothed_mean_slice(xs: &[f64], s: f64, beta: f64) -> f64 {
    let noise_sd = 1.0 / (s * beta.sqrt());
    let total: f64 = xs
        .iter()
        .map(|&x| expectation_unchecked(x / s, x.abs() * noise_sd))
        .sum();
    s * total / xs.len() as f64
}

fn check_count(n: usize) -> Result<f64> {
    if n == 0 {
        Err(Error::Empty("sample count"))
    } else {
        Ok(n as f64)
    }
}

/// `s = sqrt(n·v / (2 ln(1/δ)))`, the scale minimizing the deviation bound.
pub fn scale_for(v: f64, n: usize, delta: f64) -> Result<f64> {
    let v = positive("v", v)?;
    let n = check_count(n)?;
    let conf = Confidence::new(delta)?;
    Ok((n * v / (2.0 * conf.log_inverse())).sqrt())
}

/// `β = sqrt(2 ln(1/δ))`.
pub fn default_noise_precision(delta: f64) -> Result<f64> {
    let conf = Confidence::new(delta)?;
    Ok((2.0 * conf.log_inverse()).sqrt())
}

/// Radius `sqrt(2v ln(1/δ)/n) + sqrt(v/n)` that the estimate stays within,
/// with probability at least `1 − δ`, when `v` bounds the second moment.
pub fn deviation_bound(v: f64, n: usize, delta: f64) -> Result<f64> {
    let v = positive("v", v)?;
    let n = check_count(n)?;
    let conf = Confidence::new(delta)?;
    Ok((2.0 * v * conf.log_inverse() / n).sqrt() + (v / n).sqrt())
}

/// `c_ρ = E|1 + ε| = 1 − 2Φ(−√β) + sqrt(2/(βπ)) e^(−β/2)`.
pub fn lipschitz_factor(beta: f64) -> Result<f64> {
    let beta = positive("beta", beta)?;
    folded_normal_mean(1.0, 1.0 / beta.sqrt())
}

/// Mean of `|X|` for `X ~ N(a, b²)`.
pub fn folded_normal_mean(a: f64, b: f64) -> Result<f64> {
    let b = positive("b", b)?;
    if !a.is_finite() {
        return Err(Error::NonFinite("a"));
    }
    let r = a / b;
    Ok(a * (1.0 - 2.0 * normal::cdf(-r)) + b * (2.0 / PI).sqrt() * (-0.5 * r * r).exp())
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;

    fn e(a: f64, b: f64) -> f64 {
        smoothed_psi_expectation(a, b).unwrap()
    }

    #[test]
    fn truncate_examples() {
        assert_eq!(truncate(0.0), 0.0);
        assert!((truncate(1.0) - 5.0 / 6.0).abs() < 1e-15);
        assert!((truncate(-1.0) + 5.0 / 6.0).abs() < 1e-15);
        assert!((truncate(10.0) - 0.942_809_041_582_063_4).abs() < 1e-15);
        // continuous at the breakpoints
        assert!((truncate(SQRT_2) - PSI_BOUND).abs() < 1e-15);
        assert!((truncate(SQRT_2 + 1e-12) - PSI_BOUND).abs() < 1e-15);
    }

    #[test]
    fn correction_examples() {
        assert!(correction(0.0, 1.0).unwrap().abs() < 1e-15);
        assert!(correction(1.0, 1e-8).unwrap().abs() < 1e-12);
        // mpmath quadrature, 40 digits
        assert!((correction(1.0, 0.5).unwrap() - 0.022_153_848_929_113_742_7).abs() < 1e-13);
        assert!((correction(-0.7, 2.5).unwrap() + 1.746_306_497_982_384_98).abs() < 1e-12);
    }

    #[test]
    fn correction_rejects_bad_scale() {
        assert!(correction(1.0, 0.0).is_err());
        assert!(correction(1.0, -1.0).is_err());
        assert!(smoothed_psi_expectation(1.0, f64::NAN).is_err());
    }

    #[test]
    fn expectation_examples() {
        for b in [0.01, 1.0, 50.0] {
            assert_eq!(e(0.0, b), 0.0);
        }
        assert!((e(0.1, 0.01) - 0.099_828_333_333_333_338_9).abs() < 1e-12);
        assert!((e(10.0, 0.1) - PSI_BOUND).abs() < 1e-12);
        assert!((e(1.0, 0.5) - 0.730_487_182_262_447_113).abs() < 1e-13);
    }

    #[test]
    fn expectation_outside_closed_form_box() {
        // mpmath quadrature references
        assert!((e(3.0, 40.0) - 0.056_359_078_556_842_633_9).abs() < 1e-12);
        assert!((e(25.0, 10.0) - 0.930_934_342_685_044_891).abs() < 1e-12);
        assert!((e(1e5, 1e5 / 6f64.sqrt()) - 0.929_321_330_034_357_709).abs() < 1e-12);
        assert!((e(-1e5, 1e5 / 6f64.sqrt()) + 0.929_321_330_034_357_709).abs() < 1e-12);
    }

    #[test]
    fn region_form_agrees_with_closed_form_inside_box() {
        for &a in &[-4.0, -1.0, -0.3, 0.8, 2.2, 7.5] {
            for &b in &[0.05, 0.4, 1.0, 3.0, 8.0] {
                let closed = a * (1.0 - b * b / 2.0) - a * a * a / 6.0 + correction_unchecked(a, b);
                let region = expectation_by_region(a, b);
                assert!((closed - region).abs() < 1e-11, "a={a} b={b}: {closed} vs {region}");
            }
        }
    }

    #[test]
    fn smoothed_mean_examples() {
        let p = SmoothingParams::new(0.05, 1.0, 2.0).unwrap();
        let zeros = ScalarSample::new(vec![0.0; 7]).unwrap();
        assert_eq!(smoothed_mean(&zeros, &p), 0.0);

        let tiny = ScalarSample::new(vec![1e-6]).unwrap();
        assert!((smoothed_mean(&tiny, &p) - 1e-6).abs() < 1e-12);

        let mut xs = vec![1.0; 999];
        xs.push(1e6);
        let sample = ScalarSample::new(xs).unwrap();
        let p = SmoothingParams::new(0.05, 10.0, 6.0).unwrap();
        let m = smoothed_mean(&sample, &p);
        assert!(m > 0.9 && m < 1.3, "{m}");
    }

    #[test]
    fn sample_validation() {
        assert!(ScalarSample::new(vec![]).is_err());
        assert!(ScalarSample::new(vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn scale_examples() {
        let e1 = (-1.0f64).exp();
        assert!((scale_for(2.0, 100, e1).unwrap() - 10.0).abs() < 1e-12);
        assert!((scale_for(1.0, 1, (-0.5f64).exp()).unwrap() - 1.0).abs() < 1e-12);
        assert!((scale_for(4.0, 50, e1).unwrap() - 10.0).abs() < 1e-12);
        assert!(scale_for(1.0, 10, 1.0).is_err());
        assert!(scale_for(1.0, 10, 1.5).is_err());
        assert!(scale_for(0.0, 10, 0.1).is_err());
        assert!(scale_for(1.0, 0, 0.1).is_err());
    }

    #[test]
    fn noise_precision_examples() {
        assert!((default_noise_precision((-2.0f64).exp()).unwrap() - 2.0).abs() < 1e-12);
        assert!((default_noise_precision((-0.5f64).exp()).unwrap() - 1.0).abs() < 1e-12);
        assert!(
            (default_noise_precision(0.05).unwrap() - 2.447_746_830_680_816_5).abs() < 1e-14
        );
        assert!(default_noise_precision(0.0).is_err());
    }

    #[test]
    fn params_from_moment_bound_satisfy_identities() {
        let (v, n, delta) = (3.7, 250, 0.01);
        let p = SmoothingParams::from_moment_bound(v, n, delta).unwrap();
        let l = (1.0 / delta).ln();
        assert!((p.scale().powi(2) - n as f64 * v / (2.0 * l)).abs() < 1e-10);
        assert!((p.beta() - (2.0 * l).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn extreme_delta_is_clamped() {
        let c = Confidence::new(1e-300).unwrap();
        assert!(c.was_clamped());
        assert_eq!(c.value(), 1e-12);
        let c = Confidence::new(1.0 - 1e-16).unwrap();
        assert!(c.was_clamped());
        assert!(!Confidence::new(0.3).unwrap().was_clamped());
        assert!(default_noise_precision(1e-300).unwrap().is_finite());
    }

    #[test]
    fn deviation_bound_examples() {
        let want = 0.1 * SQRT_2 + 0.1;
        assert!((deviation_bound(1.0, 100, (-1.0f64).exp()).unwrap() - want).abs() < 1e-12);
        assert!((deviation_bound(4.0, 100, (-2.0f64).exp()).unwrap() - 0.6).abs() < 1e-12);
        let a = deviation_bound(1.0, 100, 0.1).unwrap();
        let b = deviation_bound(1.0, 400, 0.1).unwrap();
        assert!((a / b - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_examples() {
        assert!((lipschitz_factor(1e8).unwrap() - 1.0).abs() < 1e-6);
        assert!((lipschitz_factor(1.0).unwrap() - 1.166_630_941_175_372_6).abs() < 1e-14);
        assert!((lipschitz_factor(4.0).unwrap() - 1.008_490_702_616_829_6).abs() < 1e-14);
        assert!(lipschitz_factor(0.0).is_err());
    }

    #[test]
    fn folded_normal_examples() {
        assert!((folded_normal_mean(0.0, 1.0).unwrap() - (2.0 / PI).sqrt()).abs() < 1e-15);
        assert!((folded_normal_mean(100.0, 1.0).unwrap() - 100.0).abs() < 1e-12);
        assert!((folded_normal_mean(1.0, 1.0).unwrap() - 1.166_630_941_175_372_6).abs() < 1e-14);
        assert!(folded_normal_mean(1.0, 0.0).is_err());
    }
}
