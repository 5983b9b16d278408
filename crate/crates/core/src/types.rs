//! Domain types shared across the crate.

use std::fmt;

use crate::error::{Error, Result};

/// A separable regularizer `r(x) = sum_i r(x_i)`.
///
/// `ElasticNet { eta1, eta2: 0.0 }` and `L1 { eta: eta1 }` go through the same
/// code path everywhere and produce bit-identical results.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    /// `eta * |x|`
    L1 { eta: f64 },
    /// `eta1 * |x| + eta2 / 2 * x^2`
    ElasticNet { eta1: f64, eta2: f64 },
    /// `eta2 / 2 * x^2`
    L2 { eta2: f64 },
    /// `eta * [x != 0]`
    L0 { eta: f64 },
    /// Smoothly clipped absolute deviation, scaled by `eta`.
    Scad { eta: f64, a: f64, lambda: f64 },
}

impl Penalty {
    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")))
            }
        };
        let positive = |name: &str, v: f64| {
            finite(name, v)?;
            if v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")))
            }
        };
        let nonneg = |name: &str, v: f64| {
            finite(name, v)?;
            if v >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be >= 0, got {v}")))
            }
        };
        match *self {
            Penalty::L1 { eta } => positive("eta", eta),
            Penalty::ElasticNet { eta1, eta2 } => {
                nonneg("eta1", eta1)?;
                nonneg("eta2", eta2)
            }
            Penalty::L2 { eta2 } => positive("eta2", eta2),
            Penalty::L0 { eta } => positive("eta", eta),
            Penalty::Scad { eta, a, lambda } => {
                positive("eta", eta)?;
                positive("lambda", lambda)?;
                finite("a", a)?;
                if a > 2.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("SCAD a must be > 2, got {a}")))
                }
            }
        }
    }

    /// The parameter that controls sparsity (`eta1` for the elastic net).
    /// `None` for `L2`, which has no sparsity parameter.
    pub fn eta(&self) -> Option<f64> {
        match *self {
            Penalty::L1 { eta } | Penalty::L0 { eta } | Penalty::Scad { eta, .. } => Some(eta),
            Penalty::ElasticNet { eta1, .. } => Some(eta1),
            Penalty::L2 { .. } => None,
        }
    }

    /// Same family and shape parameters, with the sparsity parameter replaced.
    pub fn with_eta(&self, new_eta: f64) -> Result<Penalty> {
        let p = match *self {
            Penalty::L1 { .. } => Penalty::L1 { eta: new_eta },
            Penalty::ElasticNet { eta2, .. } => Penalty::ElasticNet { eta1: new_eta, eta2 },
            Penalty::L0 { .. } => Penalty::L0 { eta: new_eta },
            Penalty::Scad { a, lambda, .. } => Penalty::Scad { eta: new_eta, a, lambda },
            Penalty::L2 { .. } => return Err(Error::InvalidParameter("L2 has no sparsity parameter to tune".into())),
        };
        p.validate()?;
        Ok(p)
    }

    /// Value of the scalar regularizer at `x`.
    pub fn value(&self, x: f64) -> f64 {
        let ax = x.abs();
        match *self {
            Penalty::L1 { eta } => eta * ax,
            Penalty::ElasticNet { eta1, eta2 } => eta1 * ax + 0.5 * eta2 * x * x,
            Penalty::L2 { eta2 } => 0.5 * eta2 * x * x,
            Penalty::L0 { eta } => {
                if x != 0.0 {
                    eta
                } else {
                    0.0
                }
            }
            Penalty::Scad { eta, a, lambda } => {
                if ax <= lambda {
                    eta * lambda * ax
                } else if ax <= a * lambda {
                    -eta * (x * x - 2.0 * a * lambda * ax + lambda * lambda) / (2.0 * (a - 1.0))
                } else {
                    eta * (a + 1.0) * lambda * lambda / 2.0
                }
            }
        }
    }

    /// Short family tag used in CSV output.
    pub fn tag(&self) -> &'static str {
        match self {
            Penalty::L1 { .. } => "l1",
            Penalty::ElasticNet { .. } => "en",
            Penalty::L2 { .. } => "l2",
            Penalty::L0 { .. } => "l0",
            Penalty::Scad { .. } => "scad",
        }
    }
}

impl fmt::Display for Penalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Penalty::L1 { eta } => write!(f, "l1(eta={eta})"),
            Penalty::ElasticNet { eta1, eta2 } => write!(f, "en(eta1={eta1}, eta2={eta2})"),
            Penalty::L2 { eta2 } => write!(f, "l2(eta2={eta2})"),
            Penalty::L0 { eta } => write!(f, "l0(eta={eta})"),
            Penalty::Scad { eta, a, lambda } => write!(f, "scad(eta={eta}, a={a}, lambda={lambda})"),
        }
    }
}

/// Ensemble parameters: `alpha = M / N`, and the Gaussian law of the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub alpha: f64,
    pub m_y: f64,
    pub sigma_y2: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, m_y: f64, sigma_y2: f64) -> Result<Self> {
        let p = ModelParams { alpha, m_y, sigma_y2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !self.m_y.is_finite() {
            return Err(Error::InvalidParameter(format!("m_y must be finite, got {}", self.m_y)));
        }
        if !(self.sigma_y2.is_finite() && self.sigma_y2 > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma_y2 must be > 0, got {}", self.sigma_y2)));
        }
        Ok(())
    }

    /// Second moment of the data, `sigma_y^2 + m_y^2`.
    #[inline]
    pub fn second_moment(&self) -> f64 {
        self.sigma_y2 + self.m_y * self.m_y
    }
}

/// Replica-symmetric order parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RSState {
    pub q: f64,
    pub chi: f64,
    pub qhat: f64,
    pub chihat: f64,
}

impl RSState {
    /// Conjugate parameters implied by `(q, chi)`; these relations do not
    /// depend on the regularizer.
    pub fn from_order(q: f64, chi: f64, params: &ModelParams) -> Self {
        let one_plus = 1.0 + chi;
        RSState { q, chi, qhat: 1.0 / one_plus, chihat: (q + params.second_moment()) / (one_plus * one_plus) }
    }
}

/// Solution branches of the saddle-point equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    /// Finite `chi` and `Q`.
    S1,
    /// `chi` divergent (`Q` finite for SCAD; both divergent for l0).
    S2,
    /// `chi` and `Q` both divergent (SCAD).
    S3,
}

impl Branch {
    pub fn is_finite(self) -> bool {
        self == Branch::S1
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::S1 => "S1",
            Branch::S2 => "S2",
            Branch::S3 => "S3",
        })
    }
}

/// Output of the saddle-point solver.
///
/// `state` is `None` on the divergent branches; those stand for solutions at
/// infinity and carry no finite order parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RSSolution {
    pub state: Option<RSState>,
    pub rho_hat: f64,
    pub branch: Branch,
    pub rs_locally_stable: bool,
    pub at_stable: bool,
    pub converged: bool,
    pub residual: f64,
    pub iterations: usize,
}

impl RSSolution {
    /// `rho_hat / alpha`, the number of non-zero coefficients per sample.
    pub fn delta(&self, params: &ModelParams) -> f64 {
        self.rho_hat / params.alpha
    }
}

/// Macroscopic observables of the estimator at a saddle point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables {
    pub df: f64,
    pub err_train: f64,
    pub err_pre: f64,
    pub aic: f64,
    /// Expected regularization per component; `None` on divergent branches.
    pub r_bar: Option<f64>,
    /// Free energy density; `None` on divergent branches.
    pub free_energy: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(Penalty::L1 { eta: 0.0 }.validate().is_err());
        assert!(Penalty::L1 { eta: f64::NAN }.validate().is_err());
        assert!(Penalty::ElasticNet { eta1: 0.0, eta2: 0.0 }.validate().is_ok());
        assert!(Penalty::Scad { eta: 1.0, a: 2.0, lambda: 1.0 }.validate().is_err());
        assert!(Penalty::Scad { eta: 1.0, a: 2.5, lambda: 1.0 }.validate().is_ok());
        assert!(ModelParams::new(0.0, 0.0, 1.0).is_err());
        assert!(ModelParams::new(0.5, 0.0, 0.0).is_err());
    }

    #[test]
    fn with_eta_keeps_shape() {
        let p = Penalty::Scad { eta: 1.0, a: 8.0, lambda: 1.0 }.with_eta(0.3).unwrap();
        assert_eq!(p, Penalty::Scad { eta: 0.3, a: 8.0, lambda: 1.0 });
        let p = Penalty::ElasticNet { eta1: 1.0, eta2: 0.1 }.with_eta(2.0).unwrap();
        assert_eq!(p, Penalty::ElasticNet { eta1: 2.0, eta2: 0.1 });
        assert!(Penalty::L2 { eta2: 1.0 }.with_eta(1.0).is_err());
    }

    #[test]
    fn scad_value_is_continuous() {
        let p = Penalty::Scad { eta: 1.3, a: 5.0, lambda: 0.7 };
        for knot in [0.7, 3.5] {
            let lo = p.value(knot - 1e-10);
            let hi = p.value(knot + 1e-10);
            assert!((lo - hi).abs() < 1e-8, "jump at {knot}: {lo} vs {hi}");
        }
    }

    #[test]
    fn conjugates_from_order() {
        let params = ModelParams::new(0.5, 0.5, 1.0).unwrap();
        let s = RSState::from_order(0.3, 1.0, &params);
        assert_eq!(s.qhat, 0.5);
        assert!((s.chihat - (0.3 + 1.25) / 4.0).abs() < 1e-15);
    }
}
