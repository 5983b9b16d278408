//! Observables at a saddle point and model selection over the sparsity `delta`.

use crate::error::{Error, Result};
use crate::rs::DeltaPath;
use crate::scalar::{moments, scad_terms};
use crate::special::erfc;
use crate::types::{ModelParams, Observables, Penalty, RSSolution};

/// `chi / (1 + chi)` on the finite branch; exactly 1 on the divergent ones.
pub fn gdf(sol: &RSSolution) -> f64 {
    match sol.state {
        Some(s) => s.chi / (1.0 + s.chi),
        None => 1.0,
    }
}

/// Observables of a divergent-branch solution: the fit interpolates the data.
pub fn divergent_observables(params: &ModelParams) -> Observables {
    Observables { df: 1.0, err_train: 0.0, err_pre: 2.0 * params.sigma_y2, aic: 2.0, r_bar: None, free_energy: None }
}

pub fn observables(p: &Penalty, params: &ModelParams, sol: &RSSolution) -> Result<Observables> {
    let Some(s) = sol.state else {
        return Ok(divergent_observables(params));
    };
    let df = gdf(sol);
    let err_train = s.chihat;
    let alpha = params.alpha;
    let m = moments(p, s.qhat, s.chihat)?;
    let free_energy = alpha * (s.q + params.second_moment()) / (2.0 * (1.0 + s.chi))
        - alpha * (s.q * s.qhat - s.chi * s.chihat) / 2.0
        - m.pi / 2.0;
    let r_bar = match *p {
        Penalty::L1 { .. } => alpha * (s.chi * s.chihat - s.q * s.qhat),
        Penalty::ElasticNet { eta2, .. } | Penalty::L2 { eta2 } => {
            alpha * (s.chihat * s.chi - (s.qhat + eta2) * s.q) + alpha * eta2 * s.q / 2.0
        }
        Penalty::L0 { eta } => eta * m.rho_hat,
        Penalty::Scad { eta, a, lambda } => {
            let t = scad_terms(eta, a, lambda, s.qhat, s.chihat)?;
            alpha * s.chi * s.chihat
                - t.pi1
                - (1.0 + t.kappa / (2.0 * t.q_mid)) * t.pi2
                - t.pi3
                - eta * lambda * lambda * t.pi4 / (2.0 * (a - 1.0))
                + eta * (a + 1.0) * lambda * lambda * erfc(t.theta[2]) / 2.0
        }
    };
    Ok(Observables {
        df,
        err_train,
        err_pre: err_train + 2.0 * params.sigma_y2 * df,
        aic: err_train / params.sigma_y2 + 2.0 * df,
        r_bar: Some(r_bar),
        free_energy: Some(free_energy),
    })
}

/// One row of a sweep over `delta`. Failed points keep their error message.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub delta: f64,
    pub penalty: Option<Penalty>,
    pub solution: Option<RSSolution>,
    pub observables: Option<Observables>,
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(delta: f64, e: Error) -> Self {
        SweepRow { delta, penalty: None, solution: None, observables: None, error: Some(e.to_string()) }
    }
}

/// Solve the saddle point at every `delta` of the grid.
///
/// Points past the end of the finite branch are reported on the divergent
/// branch when the continuation path reached one; other failures become
/// flagged rows.
pub fn sweep_delta(p: &Penalty, params: &ModelParams, grid: &[f64]) -> Result<Vec<SweepRow>> {
    let path = DeltaPath::new(p, params)?;
    Ok(sweep_path(&path, grid))
}

pub fn sweep_path(path: &DeltaPath, grid: &[f64]) -> Vec<SweepRow> {
    let params = path.params();
    grid.iter()
        .map(|&delta| match path.solve_for_delta(delta) {
            Ok((pen, sol)) => match observables(&pen, params, &sol) {
                Ok(obs) => {
                    SweepRow { delta, penalty: Some(pen), solution: Some(sol), observables: Some(obs), error: None }
                }
                Err(e) => SweepRow::failed(delta, e),
            },
            Err(Error::NotBracketed { max, .. }) if delta > max && delta <= 1.0 => match path.divergent_solution() {
                Some(sol) => SweepRow {
                    delta,
                    penalty: None,
                    solution: Some(sol.clone()),
                    observables: Some(divergent_observables(params)),
                    error: None,
                },
                None => SweepRow::failed(delta, Error::NotBracketed { target: delta, min: path.delta_range().0, max }),
            },
            Err(e) => SweepRow::failed(delta, e),
        })
        .collect()
}

/// Prediction error of the finite-branch solution at sparsity `delta`.
pub fn prediction_error_at(path: &DeltaPath, delta: f64) -> Result<f64> {
    let (pen, sol) = path.solve_for_delta(delta)?;
    Ok(observables(&pen, path.params(), &sol)?.err_pre)
}

const CURVE_POINTS: usize = 200;

fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

fn check_range(range: (f64, f64)) -> Result<()> {
    let (lo, hi) = range;
    if !(lo > 0.0 && hi <= 1.0 && lo < hi) {
        return Err(Error::InvalidParameter(format!("delta range [{lo}, {hi}] must lie in (0, 1]")));
    }
    Ok(())
}

/// Prediction error on a uniform grid of `delta` (default 200 points).
/// Points that cannot be solved are `None`.
pub fn prediction_error_curve(path: &DeltaPath, range: (f64, f64), points: usize) -> Result<Vec<(f64, Option<f64>)>> {
    check_range(range)?;
    let points = points.max(2);
    Ok(uniform_grid(range.0, range.1, points).into_iter().map(|d| (d, prediction_error_at(path, d).ok())).collect())
}

/// Minimize the prediction error over `delta` within `range`.
///
/// A grid scan brackets the minimum, then golden-section search refines it.
/// A minimum on the boundary of the range is reported as
/// [`Error::NoMinimumInRange`].
pub fn minimize_prediction_error(p: &Penalty, params: &ModelParams, range: (f64, f64)) -> Result<(f64, Observables)> {
    let path = DeltaPath::new(p, params)?;
    minimize_on_path(&path, range)
}

pub fn minimize_on_path(path: &DeltaPath, range: (f64, f64)) -> Result<(f64, Observables)> {
    let curve = prediction_error_curve(path, range, CURVE_POINTS)?;
    let solved: Vec<(f64, f64)> = curve.iter().filter_map(|&(d, e)| e.map(|e| (d, e))).collect();
    if solved.len() < 3 {
        return Err(Error::NoMinimumInRange { lo: range.0, hi: range.1 });
    }
    let k = solved.iter().enumerate().min_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap()).map(|(k, _)| k).unwrap();
    if k == 0 || k == solved.len() - 1 {
        return Err(Error::NoMinimumInRange { lo: range.0, hi: range.1 });
    }

    let f = |d: f64| prediction_error_at(path, d);
    let (mut a, mut b) = (solved[k - 1].0, solved[k + 1].0);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > 1e-7 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let best = 0.5 * (a + b);
    let (pen, sol) = path.solve_for_delta(best)?;
    Ok((best, observables(&pen, path.params(), &sol)?))
}

/// Values of `delta` where the prediction-error curves of two families cross.
pub fn crossover_points(p1: &Penalty, p2: &Penalty, params: &ModelParams, range: (f64, f64)) -> Result<Vec<f64>> {
    let a = DeltaPath::new(p1, params)?;
    let b = DeltaPath::new(p2, params)?;
    crossovers_on_paths(&a, &b, range)
}

pub fn crossovers_on_paths(a: &DeltaPath, b: &DeltaPath, range: (f64, f64)) -> Result<Vec<f64>> {
    check_range(range)?;
    let diff = |d: f64| -> Option<f64> { Some(prediction_error_at(a, d).ok()? - prediction_error_at(b, d).ok()?) };
    let grid = uniform_grid(range.0, range.1, CURVE_POINTS);
    let values: Vec<Option<f64>> = grid.iter().map(|&d| diff(d)).collect();
    let mut out = Vec::new();
    for k in 0..grid.len() - 1 {
        let (Some(fl), Some(fr)) = (values[k], values[k + 1]) else { continue };
        if !((fl < 0.0 && fr > 0.0) || (fl > 0.0 && fr < 0.0)) {
            continue;
        }
        let (mut lo, mut hi, mut f_lo) = (grid[k], grid[k + 1], fl);
        while hi - lo > 1e-9 {
            let mid = 0.5 * (lo + hi);
            let Some(fm) = diff(mid) else { break };
            if (fm < 0.0) == (f_lo < 0.0) {
                lo = mid;
                f_lo = fm;
            } else {
                hi = mid;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    Ok(out)
}
