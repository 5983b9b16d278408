//! Closed-form solutions of the effective single-body problem
//!
//! ```text
//! x*(h; qhat) = argmax_x  -qhat/2 x^2 + h x - r(x)
//! ```
//!
//! with the random field `h = sqrt(chihat) z`, `z ~ N(0, 1)`. Everything the
//! saddle-point equations need is a Gaussian average over `z`:
//!
//! * `pi(qhat, chihat) = 2 E[log g]`, with `log g` the maximum above,
//! * `alpha chi = d pi / d chihat = E[dx*/dh]` (a jump in `x*` contributes a delta),
//! * `alpha Q = -d pi / d qhat = E[x*^2]`,
//! * `rho_hat = P(x* != 0)`.
//!
//! Thresholds are reported in units of `sqrt(2 chihat)`, so that a threshold
//! `theta` on `|h|` has Gaussian tail mass `erfc(theta)`.

use crate::error::{Error, Result};
use crate::special::{boundary_term, erfc, SQRT_PI};
use crate::types::Penalty;

/// Support and breakpoint thresholds, in units of `sqrt(2 chihat)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    values: [f64; 3],
    len: usize,
}

impl Thresholds {
    fn one(t: f64) -> Self {
        Thresholds { values: [t, 0.0, 0.0], len: 1 }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values[..self.len]
    }

    /// The smallest threshold: `x*` is non-zero iff `|z|` exceeds `sqrt(2)` times it.
    pub fn support(&self) -> f64 {
        self.values[0]
    }
}

/// Gaussian averages of the single-body solution at `(qhat, chihat)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub rho_hat: f64,
    pub pi: f64,
    /// `alpha * chi`
    pub chi_contrib: f64,
    /// `alpha * Q`
    pub q_contrib: f64,
    /// `E[(dx*/dh)^2]`; infinite when `x*` jumps.
    pub slope_sq: f64,
}

/// Building blocks of the SCAD closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ScadTerms {
    pub theta: [f64; 3],
    pub rho_hat: f64,
    pub pi1: f64,
    pub pi2: f64,
    pub pi3: f64,
    pub pi4: f64,
    /// `qhat - eta / (a - 1)`, the curvature of the middle region.
    pub q_mid: f64,
    /// `eta / (a - 1)`
    pub kappa: f64,
}

fn check_field(qhat: f64, chihat: f64) -> Result<()> {
    if !(qhat.is_finite() && qhat > 0.0) {
        return Err(Error::InvalidParameter(format!("qhat must be > 0, got {qhat}")));
    }
    if !(chihat.is_finite() && chihat > 0.0) {
        return Err(Error::InvalidParameter(format!("chihat must be > 0, got {chihat}")));
    }
    Ok(())
}

fn scad_curvature(qhat: f64, eta: f64, a: f64) -> Result<f64> {
    let curvature = qhat * (a - 1.0);
    if curvature - eta > 0.0 {
        Ok(curvature)
    } else {
        Err(Error::DegenerateScad { curvature, eta })
    }
}

/// Soft-threshold family shared by l1, elastic net and l2: `(eta1, eta2)`.
#[inline]
fn soft_params(p: &Penalty) -> Option<(f64, f64)> {
    match *p {
        Penalty::L1 { eta } => Some((eta, 0.0)),
        Penalty::ElasticNet { eta1, eta2 } => Some((eta1, eta2)),
        Penalty::L2 { eta2 } => Some((0.0, eta2)),
        _ => None,
    }
}

/// Maximizer of `-qhat/2 x^2 + h x - r(x)`.
///
/// At a threshold boundary the smaller-magnitude solution wins, and
/// `h = 0` always maps to `0`.
pub fn single_body_argmax(p: &Penalty, h: f64, qhat: f64) -> Result<f64> {
    let ah = h.abs();
    let sgn = h.signum();
    if let Some((eta1, eta2)) = soft_params(p) {
        return Ok(if ah > eta1 { (h - eta1 * sgn) / (qhat + eta2) } else { 0.0 });
    }
    match *p {
        Penalty::L0 { eta } => Ok(if ah > (2.0 * eta * qhat).sqrt() { h / qhat } else { 0.0 }),
        Penalty::Scad { eta, a, lambda } => {
            let curvature = scad_curvature(qhat, eta, a)?;
            Ok(if ah <= lambda * eta {
                0.0
            } else if ah <= lambda * (qhat + eta) {
                (h - lambda * eta * sgn) / qhat
            } else if ah <= a * lambda * qhat {
                (h * (a - 1.0) - a * lambda * eta * sgn) / (curvature - eta)
            } else {
                h / qhat
            })
        }
        _ => unreachable!(),
    }
}

/// `dx*/dh` away from breakpoints. This is also the per-component variance
/// rule of the message-passing solver.
pub fn single_body_slope(p: &Penalty, h: f64, qhat: f64) -> Result<f64> {
    let ah = h.abs();
    if let Some((eta1, eta2)) = soft_params(p) {
        return Ok(if ah > eta1 { 1.0 / (qhat + eta2) } else { 0.0 });
    }
    match *p {
        Penalty::L0 { eta } => Ok(if ah > (2.0 * eta * qhat).sqrt() { 1.0 / qhat } else { 0.0 }),
        Penalty::Scad { eta, a, lambda } => {
            let curvature = scad_curvature(qhat, eta, a)?;
            Ok(if ah <= lambda * eta {
                0.0
            } else if ah <= lambda * (qhat + eta) || ah > a * lambda * qhat {
                1.0 / qhat
            } else {
                (a - 1.0) / (curvature - eta)
            })
        }
        _ => unreachable!(),
    }
}

pub fn thresholds(p: &Penalty, qhat: f64, chihat: f64) -> Result<Thresholds> {
    check_field(qhat, chihat)?;
    let scale = (2.0 * chihat).sqrt();
    if let Some((eta1, _)) = soft_params(p) {
        return Ok(Thresholds::one(eta1 / scale));
    }
    match *p {
        Penalty::L0 { eta } => Ok(Thresholds::one((eta * qhat / chihat).sqrt())),
        Penalty::Scad { eta, a, lambda } => {
            scad_curvature(qhat, eta, a)?;
            Ok(Thresholds {
                values: [lambda * eta / scale, lambda * (qhat + eta) / scale, a * lambda * qhat / scale],
                len: 3,
            })
        }
        _ => unreachable!(),
    }
}

/// Fraction of non-zero components, `erfc` of the support threshold.
pub fn rho_hat(p: &Penalty, qhat: f64, chihat: f64) -> Result<f64> {
    Ok(erfc(thresholds(p, qhat, chihat)?.support()))
}

/// Weight of the discontinuity of the hard-threshold map at `sqrt(2) theta0`.
pub fn omega(theta0: f64) -> f64 {
    boundary_term(theta0)
}

pub(crate) fn scad_terms(eta: f64, a: f64, lambda: f64, qhat: f64, chihat: f64) -> Result<ScadTerms> {
    let curvature = scad_curvature(qhat, eta, a)?;
    let scale = (2.0 * chihat).sqrt();
    let t1 = lambda * eta / scale;
    let t2 = lambda * (qhat + eta) / scale;
    let t3 = a * lambda * qhat / scale;
    let kappa = eta / (a - 1.0);
    let q_mid = qhat - kappa;
    let rho_hat = erfc(t1);
    let (e2, e3) = (erfc(t2), erfc(t3));
    let pi4 = e2 - e3;
    let ratio = eta / curvature; // eta / (qhat (a - 1))

    let g1 = (-t1 * t1).exp();
    let g2 = (-t2 * t2).exp();
    let g3 = (-t3 * t3).exp();
    let pi1 =
        chihat / qhat * (-2.0 * t1 / SQRT_PI * (g1 + (qhat - eta) / eta * g2) + (1.0 + 2.0 * t1 * t1) * (rho_hat - e2));
    // sqrt(2 chihat) times this is the offset a lambda eta / (a - 1) of the middle region
    let t_shift = ratio * t3;
    let pi2 = chihat / q_mid
        * (2.0 / SQRT_PI * ((t2 - 2.0 * t_shift) * g2 - (1.0 - 2.0 * ratio) * t3 * g3)
            + (1.0 + 2.0 * t_shift * t_shift) * pi4);
    let pi3 = chihat / qhat * (boundary_term(t3) + e3);
    Ok(ScadTerms { theta: [t1, t2, t3], rho_hat, pi1, pi2, pi3, pi4, q_mid, kappa })
}

/// All single-body averages at once.
pub fn moments(p: &Penalty, qhat: f64, chihat: f64) -> Result<Moments> {
    check_field(qhat, chihat)?;
    if let Some((eta1, eta2)) = soft_params(p) {
        let theta = eta1 / (2.0 * chihat).sqrt();
        let rho_hat = erfc(theta);
        let tau = (1.0 + 2.0 * theta * theta) * rho_hat - boundary_term(theta);
        let denom = qhat + eta2;
        return Ok(Moments {
            rho_hat,
            pi: chihat / denom * tau,
            chi_contrib: rho_hat / denom,
            q_contrib: chihat * tau / (denom * denom),
            slope_sq: rho_hat / (denom * denom),
        });
    }
    match *p {
        Penalty::L0 { eta } => {
            let theta0 = (eta * qhat / chihat).sqrt();
            let rho_hat = erfc(theta0);
            let w = omega(theta0);
            Ok(Moments {
                rho_hat,
                pi: chihat / qhat * (w + (1.0 - 2.0 * theta0 * theta0) * rho_hat),
                chi_contrib: (w + rho_hat) / qhat,
                q_contrib: chihat * (w + rho_hat) / (qhat * qhat),
                slope_sq: f64::INFINITY,
            })
        }
        Penalty::Scad { eta, a, lambda } => {
            let s = scad_terms(eta, a, lambda, qhat, chihat)?;
            let pi = s.pi1 + s.pi2 + s.pi3 + eta * lambda * lambda * s.pi4 / (a - 1.0)
                - eta * (a + 1.0) * lambda * lambda * erfc(s.theta[2]);
            Ok(Moments {
                rho_hat: s.rho_hat,
                pi,
                chi_contrib: (s.rho_hat + s.kappa / s.q_mid * s.pi4) / qhat,
                q_contrib: s.pi1 / qhat + s.pi2 / s.q_mid + s.pi3 / qhat,
                slope_sq: (s.rho_hat - s.pi4) / (qhat * qhat) + s.pi4 / (s.q_mid * s.q_mid),
            })
        }
        _ => unreachable!(),
    }
}

pub fn pi_value(p: &Penalty, qhat: f64, chihat: f64) -> Result<f64> {
    Ok(moments(p, qhat, chihat)?.pi)
}

/// `alpha * chi` as a function of the conjugate parameters.
pub fn chi_contrib(p: &Penalty, qhat: f64, chihat: f64) -> Result<f64> {
    Ok(moments(p, qhat, chihat)?.chi_contrib)
}

/// `alpha * Q` as a function of the conjugate parameters.
pub fn q_contrib(p: &Penalty, qhat: f64, chihat: f64) -> Result<f64> {
    Ok(moments(p, qhat, chihat)?.q_contrib)
}
