//! Finite-size belief propagation (AMP) for the penalized regression
//!
//! ```text
//! min_x  1/2 |y - A x|^2 + sum_i r(x_i)
//! ```
//!
//! Each sweep computes the residual messages `R` and their variances
//! `sigma2` from the previous estimate, builds the cavity fields
//! `h_i = x_i qhat_i + (A^T R)_i` with curvatures `qhat_i = sum_mu A_mui^2 / (1 + sigma2_mu)`,
//! and maps them through the single-body maximizer. The residual update keeps
//! the Onsager memory term, so a fixed point satisfies `R = y - A x` and `x`
//! is a stationary point of the objective.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::datagen::{gen_y, sample_seeds, Predictors};
use crate::error::{Error, Result};
use crate::scalar::{single_body_argmax, single_body_slope};
use crate::types::Penalty;

/// One realization of the regression problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub a: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl Instance {
    pub fn new(a: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if a.nrows() != y.len() {
            return Err(Error::DimensionMismatch(format!("A has {} rows but y has {} entries", a.nrows(), y.len())));
        }
        if a.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("instance contains non-finite entries".into()));
        }
        Ok(Instance { a, y })
    }

    /// Number of samples `M`.
    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    /// Number of predictors `N`.
    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    /// `1/2 |y - A x|^2 + sum_i r(x_i)`
    pub fn objective(&self, p: &Penalty, x: &DVector<f64>) -> f64 {
        let r = &self.y - &self.a * x;
        0.5 * r.norm_squared() + x.iter().map(|&v| p.value(v)).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpState {
    /// Damped estimate carried between sweeps.
    pub x_hat: DVector<f64>,
    /// Undamped single-body output of the latest sweep. At convergence this
    /// is the reported estimate; it keeps exact zeros off the support.
    pub x_prox: DVector<f64>,
    pub chi: DVector<f64>,
    pub h: DVector<f64>,
    pub qhat: DVector<f64>,
    pub r: DVector<f64>,
    pub sigma2: DVector<f64>,
    pub iter: usize,
    pub converged: bool,
}

impl BpState {
    pub fn zeros(m: usize, n: usize) -> Self {
        BpState {
            x_hat: DVector::zeros(n),
            x_prox: DVector::zeros(n),
            chi: DVector::zeros(n),
            h: DVector::zeros(n),
            qhat: DVector::zeros(n),
            r: DVector::zeros(m),
            sigma2: DVector::zeros(m),
            iter: 0,
            converged: false,
        }
    }

    /// Fitted values `A x` of the reported estimate.
    pub fn fitted(&self, inst: &Instance) -> DVector<f64> {
        &inst.a * &self.x_prox
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpConfig {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BpConfig {
    fn default() -> Self {
        BpConfig { damping: 0.5, tol: 1e-10, max_iter: 100_000 }
    }
}

fn check(state: &BpState, inst: &Instance, p: &Penalty, damping: f64) -> Result<()> {
    if matches!(p, Penalty::L2 { .. }) {
        return Err(Error::InvalidParameter("message passing supports l1, elastic net, l0 and SCAD".into()));
    }
    p.validate()?;
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(Error::InvalidParameter(format!("damping must be in (0, 1], got {damping}")));
    }
    let (m, n) = (inst.m(), inst.n());
    if state.x_hat.len() != n || state.chi.len() != n || state.r.len() != m || state.sigma2.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "state sized for N = {}, M = {} but instance has N = {n}, M = {m}",
            state.x_hat.len(),
            state.r.len()
        )));
    }
    Ok(())
}

/// Element-wise squares of `A`, reused across sweeps.
fn squared(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.map(|v| v * v)
}

fn sweep(state: &BpState, inst: &Instance, a_sq: &DMatrix<f64>, p: &Penalty, damping: f64) -> Result<BpState> {
    // damping the variances is the same as damping chi, since sigma2 is linear
    // in chi, but leaves the stored chi_i on the penalty's discrete rule
    let sigma2 = &state.sigma2 * (1.0 - damping) + (a_sq * &state.chi) * damping;
    let fitted = &inst.a * &state.x_hat;
    let mut r = DVector::zeros(inst.m());
    let mut inv = DVector::zeros(inst.m());
    for mu in 0..inst.m() {
        let d = 1.0 + sigma2[mu];
        r[mu] = (inst.y[mu] - fitted[mu] + sigma2[mu] * state.r[mu]) / d;
        inv[mu] = 1.0 / d;
    }
    let qhat = a_sq.tr_mul(&inv);
    let h = state.x_hat.component_mul(&qhat) + inst.a.tr_mul(&r);
    let mut x_prox = DVector::zeros(inst.n());
    let mut chi = DVector::zeros(inst.n());
    for i in 0..inst.n() {
        x_prox[i] = single_body_argmax(p, h[i], qhat[i])?;
        chi[i] = single_body_slope(p, h[i], qhat[i])?;
    }
    let x_hat = &state.x_hat * (1.0 - damping) + &x_prox * damping;
    Ok(BpState { x_hat, x_prox, chi, h, qhat, r, sigma2, iter: state.iter + 1, converged: false })
}

/// One synchronous sweep with damping applied to the estimate.
pub fn bp_step(state: &BpState, inst: &Instance, p: &Penalty, damping: f64) -> Result<BpState> {
    check(state, inst, p, damping)?;
    sweep(state, inst, &squared(&inst.a), p, damping)
}

/// Iterate from the all-zero state until `max_i |x_i^(t) - x_i^(t-1)| < tol`.
pub fn bp_run(inst: &Instance, p: &Penalty, cfg: &BpConfig) -> Result<BpState> {
    bp_run_from(BpState::zeros(inst.m(), inst.n()), inst, p, cfg)
}

/// As [`bp_run`], warm-started from `init`.
pub fn bp_run_from(init: BpState, inst: &Instance, p: &Penalty, cfg: &BpConfig) -> Result<BpState> {
    check(&init, inst, p, cfg.damping)?;
    let a_sq = squared(&inst.a);
    let mut state = init;
    state.iter = 0;
    state.converged = false;
    for _ in 0..cfg.max_iter.max(1) {
        let next = sweep(&state, inst, &a_sq, p, cfg.damping)?;
        let change = next.x_hat.iter().zip(state.x_hat.iter()).fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
        state = next;
        // a run that blew up never counts as converged
        if !change.is_finite() || state.x_hat.iter().chain(state.r.iter()).any(|v| !v.is_finite()) {
            return Err(Error::BpNonConvergence { state: Box::new(state) });
        }
        if change < cfg.tol {
            state.converged = true;
            return Ok(state);
        }
    }
    Err(Error::BpNonConvergence { state: Box::new(state) })
}

/// Covariance estimate of the GDF over an ensemble of `(y, y_hat)` pairs:
/// `sum_s sum_mu (y_mu - m_y)(y_hat_mu - mean_s y_hat_mu) / (S M sigma_y^2)`.
pub fn gdf_covariance(ensemble: &[(DVector<f64>, DVector<f64>)], m_y: f64, sigma_y2: f64) -> Result<f64> {
    let s = ensemble.len();
    if s < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: s });
    }
    let m = ensemble[0].0.len();
    if ensemble.iter().any(|(y, yh)| y.len() != m || yh.len() != m) {
        return Err(Error::DimensionMismatch("ensemble members differ in M".into()));
    }
    let mut mean = DVector::zeros(m);
    for (_, yh) in ensemble {
        mean += yh;
    }
    mean /= s as f64;
    let mut total = 0.0;
    for (y, yh) in ensemble {
        for mu in 0..m {
            total += (y[mu] - m_y) * (yh[mu] - mean[mu]);
        }
    }
    Ok(total / (s as f64 * m as f64 * sigma_y2))
}

/// One-sided finite-difference divergence `(1/M) sum_mu d y_hat_mu / d y_mu`
/// of an arbitrary estimator.
pub fn sure_divergence<F>(y: &DVector<f64>, eps: f64, mut estimator: F) -> Result<f64>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps must be > 0, got {eps}")));
    }
    let base = estimator(y)?;
    let mut total = 0.0;
    let mut perturbed = y.clone();
    for mu in 0..y.len() {
        perturbed[mu] += eps;
        let fit = estimator(&perturbed)?;
        total += (fit[mu] - base[mu]) / eps;
        perturbed[mu] = y[mu];
    }
    Ok(total / y.len() as f64)
}

/// Per-instance GDF estimate from the divergence of the BP estimator.
/// Perturbed solves are warm-started from the unperturbed fixed point.
pub fn gdf_sure_fd(inst: &Instance, p: &Penalty, cfg: &BpConfig, eps: f64) -> Result<f64> {
    let base = bp_run(inst, p, cfg)?;
    let mut work = inst.clone();
    sure_divergence(&inst.y, eps, |y| {
        work.y.copy_from(y);
        let st = bp_run_from(base.clone(), &work, p, cfg)?;
        Ok(st.fitted(&work))
    })
}

/// `mean_s[(1/M) sum_i chi_i] * mean_s[(1/N) sum_i qhat_i]` over converged states.
pub fn delta_eff_bp(ensemble: &[BpState]) -> Result<f64> {
    if ensemble.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let s = ensemble.len() as f64;
    let chi = ensemble.iter().map(|st| st.chi.sum() / st.r.len() as f64).sum::<f64>() / s;
    let qhat = ensemble.iter().map(|st| st.qhat.mean()).sum::<f64>() / s;
    Ok(chi * qhat)
}

/// Settings of a Monte Carlo run over independent instances.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub n: usize,
    pub m: usize,
    pub predictors: Predictors,
    pub m_y: f64,
    pub sigma_y2: f64,
    pub samples: usize,
    pub seed: u64,
    pub bp: BpConfig,
    /// Also compute the finite-difference SURE estimate per instance.
    pub sure_eps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    /// Covariance GDF over converged samples; `None` with fewer than two.
    pub df_cov: Option<f64>,
    /// Mean SURE estimate over samples where every perturbed solve converged.
    pub df_sure: Option<f64>,
    pub delta_eff: Option<f64>,
    /// Mean fraction of non-zero estimates per sample.
    pub delta: Option<f64>,
    pub converged: usize,
    pub samples: usize,
    pub mean_iterations: f64,
}

struct SampleOutcome {
    y: DVector<f64>,
    fitted: DVector<f64>,
    state: BpState,
    sure: Option<f64>,
}

fn run_sample(cfg: &EnsembleConfig, p: &Penalty, k: usize) -> Result<Option<SampleOutcome>> {
    let (seed_a, seed_y) = sample_seeds(cfg.seed, k as u64);
    let a = cfg.predictors.generate(cfg.m, cfg.n, seed_a)?;
    let y = gen_y(cfg.m, cfg.m_y, cfg.sigma_y2, seed_y);
    let inst = Instance::new(a, y)?;
    let state = match bp_run(&inst, p, &cfg.bp) {
        Ok(s) => s,
        // a component whose curvature drops below the SCAD concavity limit
        // ends the run for that instance only
        Err(Error::BpNonConvergence { .. }) | Err(Error::DegenerateScad { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let sure = match cfg.sure_eps {
        Some(eps) => gdf_sure_fd(&inst, p, &cfg.bp, eps).ok(),
        None => None,
    };
    let fitted = state.fitted(&inst);
    Ok(Some(SampleOutcome { y: inst.y, fitted, state, sure }))
}

/// Run BP on `samples` independent instances and summarize the GDF
/// estimators. Samples are processed in parallel with per-sample seeds
/// derived from the master seed, and reduced in sample order.
pub fn run_ensemble(cfg: &EnsembleConfig, p: &Penalty) -> Result<EnsembleSummary> {
    let outcomes: Vec<Option<SampleOutcome>> =
        (0..cfg.samples).into_par_iter().map(|k| run_sample(cfg, p, k)).collect::<Result<_>>()?;
    let done: Vec<&SampleOutcome> = outcomes.iter().flatten().collect();
    let pairs: Vec<(DVector<f64>, DVector<f64>)> = done.iter().map(|o| (o.y.clone(), o.fitted.clone())).collect();
    let states: Vec<BpState> = done.iter().map(|o| o.state.clone()).collect();
    let sures: Vec<f64> = done.iter().filter_map(|o| o.sure).collect();
    let mean = |v: &[f64]| if v.is_empty() { None } else { Some(v.iter().sum::<f64>() / v.len() as f64) };
    let deltas: Vec<f64> =
        done.iter().map(|o| o.state.x_prox.iter().filter(|v| **v != 0.0).count() as f64 / cfg.m as f64).collect();
    let iters: Vec<f64> = done.iter().map(|o| o.state.iter as f64).collect();
    Ok(EnsembleSummary {
        df_cov: gdf_covariance(&pairs, cfg.m_y, cfg.sigma_y2).ok(),
        df_sure: mean(&sures),
        delta_eff: delta_eff_bp(&states).ok(),
        delta: mean(&deltas),
        converged: done.len(),
        samples: cfg.samples,
        mean_iterations: mean(&iters).unwrap_or(0.0),
    })
}
