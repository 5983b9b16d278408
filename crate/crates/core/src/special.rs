//! Special functions shared by the closed-form single-body expressions.
//!
//! `erfc` follows the convention `erfc(a) = 2/sqrt(pi) * int_a^inf exp(-z^2) dz`
//! (no `1/sqrt(2)` rescaling), so the probability that a standard normal
//! variable exceeds `t` in absolute value is `erfc(t / sqrt(2))`.

use std::f64::consts::PI;

pub const SQRT_PI: f64 = 1.772_453_850_905_516;
pub const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Complementary error function.
#[inline]
pub fn erfc(a: f64) -> f64 {
    libm::erfc(a)
}

/// Standard normal density.
#[inline]
pub fn gaussian_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// `P(lo < |h| <= hi)` for `h ~ N(0, variance)`, with `0 <= lo <= hi`.
/// `hi` may be `f64::INFINITY`.
pub fn two_sided_mass(lo: f64, hi: f64, variance: f64) -> f64 {
    let scale = (2.0 * variance).sqrt();
    let upper = if hi.is_finite() { erfc(hi / scale) } else { 0.0 };
    (erfc(lo / scale) - upper).max(0.0)
}

/// `(2 t / sqrt(pi)) exp(-t^2)`, the recurring boundary term of the
/// truncated Gaussian moments.
#[inline]
pub fn boundary_term(t: f64) -> f64 {
    2.0 * t / SQRT_PI * (-t * t).exp()
}
