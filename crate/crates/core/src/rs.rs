//! Replica-symmetric saddle-point solver.
//!
//! The unknowns are `(chi, Q)`. One sweep of the map computes the
//! conjugates `qhat = 1 / (1 + chi)` and `chihat = (Q + sigma_y^2 + m_y^2) / (1 + chi)^2`,
//! then the regularizer-dependent right-hand sides `chi = E[dx*/dh] / alpha`
//! and `Q = E[x*^2] / alpha`. Finite fixed points form branch S1; runs where
//! `chi` escapes to infinity are reported as the divergent branches S2/S3.

use crate::error::{Error, Result};
use crate::scalar::{moments, single_body_argmax};
use crate::special::two_sided_mass;
use crate::types::{Branch, ModelParams, Penalty, RSSolution, RSState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Initial damping of the fixed-point iteration; halved on oscillation.
    pub damping: f64,
    /// Convergence threshold on the scaled step `|dx| / max(1, |x|)`.
    pub tol: f64,
    pub max_iter: usize,
    /// `chi` or `Q` above this value counts as divergent.
    pub divergence_cap: f64,
    /// Consecutive iterations above the cap before declaring divergence.
    pub divergence_run: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { damping: 0.5, tol: 1e-12, max_iter: 100_000, divergence_cap: 1e12, divergence_run: 10 }
    }
}

const COLD_START: (f64, f64) = (0.1, 0.1);
const MIN_DAMPING: f64 = 1.0 / 256.0;

/// One undamped application of the saddle-point map: `(chi, Q) -> (chi', Q', rho_hat)`.
pub fn saddle_map(p: &Penalty, params: &ModelParams, chi: f64, q: f64) -> Result<(f64, f64, f64)> {
    let s = RSState::from_order(q, chi, params);
    let m = moments(p, s.qhat, s.chihat)?;
    Ok((m.chi_contrib / params.alpha, m.q_contrib / params.alpha, m.rho_hat))
}

/// Largest residual of the four saddle-point equations at `state`, each
/// scaled by `max(1, |value|)` so that large `chi` near the dense end is
/// judged at working precision.
pub fn saddle_residual(p: &Penalty, params: &ModelParams, state: &RSState) -> Result<f64> {
    let m = moments(p, state.qhat, state.chihat)?;
    let one_plus = 1.0 + state.chi;
    let r = [
        (state.chi, m.chi_contrib / params.alpha),
        (state.q, m.q_contrib / params.alpha),
        (state.chihat, (state.q + params.second_moment()) / (one_plus * one_plus)),
        (state.qhat, 1.0 / one_plus),
    ];
    Ok(r.iter().fold(0.0_f64, |acc, &(v, rhs)| acc.max((v - rhs).abs() / v.abs().max(1.0))))
}

fn scaled_step(x: (f64, f64), f: (f64, f64)) -> f64 {
    let a = (f.0 - x.0).abs() / x.0.abs().max(1.0);
    let b = (f.1 - x.1).abs() / x.1.abs().max(1.0);
    a.max(b)
}

/// Jacobian of the undamped map at `(chi, Q)` by central differences.
fn map_jacobian(p: &Penalty, params: &ModelParams, chi: f64, q: f64) -> Result<[[f64; 2]; 2]> {
    let mut jac = [[0.0; 2]; 2];
    let x = [chi, q];
    for j in 0..2 {
        let step = 1e-6 * x[j].abs().max(1e-3);
        let mut lo = x;
        let mut hi = x;
        lo[j] -= step;
        hi[j] += step;
        let f_lo = saddle_map(p, params, lo[0], lo[1])?;
        let f_hi = saddle_map(p, params, hi[0], hi[1])?;
        jac[0][j] = (f_hi.0 - f_lo.0) / (2.0 * step);
        jac[1][j] = (f_hi.1 - f_lo.1) / (2.0 * step);
    }
    Ok(jac)
}

/// Largest real part among the eigenvalues of a 2x2 matrix.
fn max_real_eigenvalue(j: &[[f64; 2]; 2]) -> f64 {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        tr / 2.0 + disc.sqrt()
    } else {
        tr / 2.0
    }
}

/// Newton step on `F(x) - x = 0`; `None` if the linear system is singular or
/// the step leaves the positive quadrant.
fn newton_step(p: &Penalty, params: &ModelParams, x: (f64, f64), f: (f64, f64)) -> Result<Option<(f64, f64)>> {
    let j = map_jacobian(p, params, x.0, x.1)?;
    let a = [[j[0][0] - 1.0, j[0][1]], [j[1][0], j[1][1] - 1.0]];
    let g = (f.0 - x.0, f.1 - x.1);
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det.abs() < 1e-300 || !det.is_finite() {
        return Ok(None);
    }
    let d0 = (a[1][1] * g.0 - a[0][1] * g.1) / det;
    let d1 = (-a[1][0] * g.0 + a[0][0] * g.1) / det;
    let next = (x.0 - d0, x.1 - d1);
    if next.0 > 0.0 && next.1 > 0.0 && next.0.is_finite() && next.1.is_finite() {
        Ok(Some(next))
    } else {
        Ok(None)
    }
}

enum Outcome {
    Finite { chi: f64, q: f64, residual: f64, iterations: usize },
    Divergent { q: f64, rho_hat: f64, growing: bool, iterations: usize },
}

fn iterate(p: &Penalty, params: &ModelParams, start: (f64, f64), cfg: &SolverConfig) -> Result<Outcome> {
    let mut x = start;
    let mut gamma = cfg.damping;
    let mut prev_res = f64::INFINITY;
    let mut rising = 0usize;
    let mut above_cap = 0usize;
    let mut res = f64::INFINITY;
    for it in 0..cfg.max_iter {
        let (fc, fq, rho_hat) = saddle_map(p, params, x.0, x.1)?;
        res = scaled_step(x, (fc, fq));
        if res <= cfg.tol {
            return Ok(Outcome::Finite { chi: fc, q: fq, residual: res, iterations: it + 1 });
        }
        if x.0 > cfg.divergence_cap || x.1 > cfg.divergence_cap {
            above_cap += 1;
            if above_cap >= cfg.divergence_run {
                return Ok(Outcome::Divergent { q: x.1, rho_hat, growing: fc > x.0, iterations: it + 1 });
            }
        } else {
            above_cap = 0;
        }

        if res > prev_res {
            rising += 1;
            if rising >= 3 && gamma > MIN_DAMPING {
                gamma *= 0.5;
                rising = 0;
            }
        } else {
            rising = 0;
        }
        prev_res = res;

        // Close to a fixed point, Newton steps take over from the (possibly
        // critically slow) damped iteration.
        if res < 1e-6 {
            if let Some(next) = newton_step(p, params, x, (fc, fq))? {
                if let Ok((nc, nq, _)) = saddle_map(p, params, next.0, next.1) {
                    if scaled_step(next, (nc, nq)) < res {
                        x = next;
                        continue;
                    }
                }
            }
        }
        x = (x.0 + gamma * (fc - x.0), x.1 + gamma * (fq - x.1));
    }
    Err(Error::NonConvergence { iterations: cfg.max_iter, residual: res })
}

/// Solve the saddle-point equations with the default configuration.
pub fn solve_rs(p: &Penalty, params: &ModelParams, init: Option<RSState>) -> Result<RSSolution> {
    solve_rs_with(p, params, init, &SolverConfig::default())
}

pub fn solve_rs_with(
    p: &Penalty,
    params: &ModelParams,
    init: Option<RSState>,
    cfg: &SolverConfig,
) -> Result<RSSolution> {
    p.validate()?;
    params.validate()?;
    let start = init.map_or(COLD_START, |s| (s.chi.max(1e-12), s.q.max(1e-12)));
    match iterate(p, params, start, cfg)? {
        Outcome::Finite { chi, q, residual, iterations } => {
            let state = RSState::from_order(q, chi, params);
            let m = moments(p, state.qhat, state.chihat)?;
            let jac = map_jacobian(p, params, chi, q)?;
            let at = at_lhs_closed_form(p, params, &state)?;
            Ok(RSSolution {
                state: Some(state),
                rho_hat: m.rho_hat,
                branch: Branch::S1,
                rs_locally_stable: max_real_eigenvalue(&jac) < 1.0,
                at_stable: at <= 1.0,
                converged: true,
                residual,
                iterations,
            })
        }
        Outcome::Divergent { q, rho_hat, growing, iterations, .. } => {
            let branch = match p {
                Penalty::Scad { .. } if q > cfg.divergence_cap => Branch::S3,
                _ => Branch::S2,
            };
            Ok(RSSolution {
                state: None,
                rho_hat,
                branch,
                rs_locally_stable: growing,
                at_stable: false,
                converged: true,
                residual: 0.0,
                iterations,
            })
        }
    }
}

/// Local stability of the reported branch under the saddle-point map.
///
/// For S1 this is the linearization criterion: every eigenvalue of the map's
/// Jacobian has real part below one, i.e. the fixed point attracts the
/// iteration for small enough damping. For the divergent branches it checks
/// that the undamped map keeps pushing `chi` outwards.
pub fn rs_branch_stability(p: &Penalty, params: &ModelParams, sol: &RSSolution) -> Result<bool> {
    match sol.state {
        Some(s) => Ok(max_real_eigenvalue(&map_jacobian(p, params, s.chi, s.q)?) < 1.0),
        None => Ok(sol.rs_locally_stable),
    }
}

/// Left-hand side of the AT condition from the penalty's closed form:
/// `E[(dx*/dh)^2] / (alpha (1 + chi)^2)`. Instability when it exceeds one.
pub fn at_lhs_closed_form(p: &Penalty, params: &ModelParams, state: &RSState) -> Result<f64> {
    let m = moments(p, state.qhat, state.chihat)?;
    let one_plus = 1.0 + state.chi;
    Ok(m.slope_sq / (params.alpha * one_plus * one_plus))
}

/// `E[(dx*/dh)^2]` evaluated from the single-body maximizer alone: the
/// piecewise-linear map is probed numerically, its breakpoints located by
/// bisection, and each piece contributes `slope^2` times its Gaussian mass.
/// Returns infinity if the maximizer jumps.
pub fn slope_sq_generic(p: &Penalty, qhat: f64, chihat: f64) -> Result<f64> {
    let sigma = chihat.sqrt();
    let h_max = 12.0 * sigma;
    let x_at = |h: f64| single_body_argmax(p, h, qhat);
    let eps = 1e-7 * sigma;
    let slope_at = |h: f64| -> Result<f64> { Ok((x_at(h + eps)? - x_at(h - eps)?) / (2.0 * eps)) };
    let same = |a: f64, b: f64| (a - b).abs() <= 1e-5 * a.abs().max(b.abs()).max(1e-12);

    // breakpoints on |h| in (0, h_max]
    let grid = 2000;
    let mut breaks: Vec<f64> = Vec::new();
    let mut stack: Vec<(f64, f64)> = Vec::new();
    for k in 0..grid {
        let lo = h_max * k as f64 / grid as f64 + 2.0 * eps;
        let hi = h_max * (k + 1) as f64 / grid as f64 + 2.0 * eps;
        stack.push((lo, hi));
        while let Some((lo, hi)) = stack.pop() {
            let s_lo = slope_at(lo)?;
            let s_hi = slope_at(hi)?;
            if same(s_lo, s_hi) {
                continue;
            }
            let (mut a, mut b) = (lo, hi);
            while b - a > 8.0 * eps {
                let mid = 0.5 * (a + b);
                if same(slope_at(mid)?, s_lo) {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            let (a_out, b_out) = (a - 2.0 * eps, b + 2.0 * eps);
            let s_right = slope_at(b_out + 2.0 * eps)?;
            let (x_a, x_b) = (x_at(a_out)?, x_at(b_out)?);
            // a continuous map changes by at most max|slope| over the bracket
            let allowed = (b_out - a_out) * s_lo.abs().max(s_right.abs()) * (1.0 + 1e-6) + 1e-12 * x_b.abs();
            if (x_b - x_a).abs() > 10.0 * allowed.max(eps) {
                return Ok(f64::INFINITY);
            }
            // intersection of the two linear pieces
            let brk = if same(s_lo, s_right) {
                0.5 * (a + b)
            } else {
                (x_b - x_a - s_right * b_out + s_lo * a_out) / (s_lo - s_right)
            };
            breaks.push(brk.clamp(a_out, b_out));
            let right = b + 8.0 * eps;
            if right < hi {
                stack.push((right, hi));
            }
        }
    }
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut edges = vec![0.0];
    edges.extend(breaks);
    edges.push(f64::INFINITY);
    let mut total = 0.0;
    for w in edges.windows(2) {
        // slope across the interior of the piece, away from its end points
        let (lo, hi) = if w[1].is_finite() { (w[0], w[1]) } else { (w[0], w[0] + 2.0 * sigma) };
        let inset = 0.01 * (hi - lo);
        let s = if hi - lo > 0.0 { (x_at(hi - inset)? - x_at(lo + inset)?) / (hi - lo - 2.0 * inset) } else { 0.0 };
        total += s * s * two_sided_mass(w[0], w[1], chihat);
    }
    Ok(total)
}

/// Both evaluations of the AT condition at a finite solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtDiagnostics {
    pub closed_form: f64,
    pub generic: f64,
    pub stable: bool,
}

pub fn at_diagnostics(p: &Penalty, params: &ModelParams, sol: &RSSolution) -> Result<AtDiagnostics> {
    match sol.state {
        Some(s) => {
            let closed_form = at_lhs_closed_form(p, params, &s)?;
            let one_plus = 1.0 + s.chi;
            let generic = slope_sq_generic(p, s.qhat, s.chihat)? / (params.alpha * one_plus * one_plus);
            Ok(AtDiagnostics { closed_form, generic, stable: closed_form <= 1.0 })
        }
        None => Ok(AtDiagnostics { closed_form: f64::INFINITY, generic: f64::INFINITY, stable: false }),
    }
}

/// AT stability of the solution (`true` means the RS saddle is stable).
pub fn at_stability(p: &Penalty, params: &ModelParams, sol: &RSSolution) -> Result<bool> {
    Ok(at_diagnostics(p, params, sol)?.stable)
}

/// One solved point along a continuation path in the sparsity parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPoint {
    pub eta: f64,
    pub solution: RSSolution,
}

/// Solutions along a log-spaced grid of the sparsity parameter, traversed
/// from strong to weak regularization with warm starts so that the solver
/// follows the finite branch as far as it extends.
#[derive(Debug, Clone)]
pub struct DeltaPath {
    penalty: Penalty,
    params: ModelParams,
    cfg: SolverConfig,
    points: Vec<PathPoint>,
}

pub const ETA_RANGE: (f64, f64) = (1e-8, 1e4);
const PATH_POINTS: usize = 200;

impl DeltaPath {
    pub fn new(p: &Penalty, params: &ModelParams) -> Result<Self> {
        Self::with_config(p, params, &SolverConfig::default())
    }

    pub fn with_config(p: &Penalty, params: &ModelParams, cfg: &SolverConfig) -> Result<Self> {
        p.validate()?;
        params.validate()?;
        if p.eta().is_none() {
            return Err(Error::InvalidParameter(format!("{p} has no sparsity parameter")));
        }
        let (lo, hi) = ETA_RANGE;
        let mut points = Vec::with_capacity(PATH_POINTS);
        let mut warm: Option<RSState> = None;
        for k in 0..PATH_POINTS {
            let t = k as f64 / (PATH_POINTS - 1) as f64;
            let eta = (hi.ln() + t * (lo.ln() - hi.ln())).exp();
            let pen = p.with_eta(eta)?;
            let sol = match solve_rs_with(&pen, params, warm, cfg) {
                Ok(s) => s,
                Err(Error::DegenerateScad { .. }) | Err(Error::NonConvergence { .. }) => continue,
                Err(e) => return Err(e),
            };
            if let Some(s) = sol.state {
                warm = Some(s);
            }
            points.push(PathPoint { eta, solution: sol });
        }
        let mut path = DeltaPath { penalty: *p, params: *params, cfg: *cfg, points };
        path.refine_branch_ends()?;
        Ok(path)
    }

    /// Where the finite branch gives way to a divergent one between two grid
    /// points, bisect in `eta` so the path reaches the end of the branch.
    fn refine_branch_ends(&mut self) -> Result<()> {
        let mut k = 0;
        while k + 1 < self.points.len() {
            let (a, b) = (&self.points[k], &self.points[k + 1]);
            if a.solution.branch != Branch::S1 || b.solution.branch == Branch::S1 {
                k += 1;
                continue;
            }
            let (mut last, mut beyond) = (a.clone(), b.eta);
            for _ in 0..60 {
                let eta = (last.eta * beyond).sqrt();
                if eta >= last.eta || eta <= beyond {
                    break;
                }
                let pen = self.penalty.with_eta(eta)?;
                match solve_rs_with(&pen, &self.params, last.solution.state, &self.cfg) {
                    Ok(sol) if sol.branch == Branch::S1 => last = PathPoint { eta, solution: sol },
                    Ok(_) | Err(Error::NonConvergence { .. }) => beyond = eta,
                    Err(e) => return Err(e),
                }
            }
            if last.eta != self.points[k].eta {
                self.points.insert(k + 1, last);
                k += 1;
            }
            k += 1;
        }
        Ok(())
    }

    pub fn points(&self) -> &[PathPoint] {
        &self.points
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn penalty(&self) -> &Penalty {
        &self.penalty
    }

    fn finite(&self) -> impl Iterator<Item = &PathPoint> {
        self.points.iter().filter(|pt| pt.solution.branch == Branch::S1)
    }

    /// Range of `delta` covered by the finite branch on the grid.
    pub fn delta_range(&self) -> (f64, f64) {
        self.finite().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), pt| {
            let d = pt.solution.delta(&self.params);
            (lo.min(d), hi.max(d))
        })
    }

    /// Whether any grid point ended on a divergent branch.
    pub fn has_divergent_branch(&self) -> bool {
        self.points.iter().any(|pt| pt.solution.branch != Branch::S1)
    }

    /// The divergent solution reached at the weakest regularization, if any.
    pub fn divergent_solution(&self) -> Option<&RSSolution> {
        self.points.iter().rev().map(|pt| &pt.solution).find(|s| s.branch != Branch::S1)
    }

    /// Tune the sparsity parameter so that the finite-branch solution has
    /// `rho_hat / alpha = delta` (to 1e-10).
    pub fn solve_for_delta(&self, delta: f64) -> Result<(Penalty, RSSolution)> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::UnphysicalRegion(delta));
        }
        let d_of = |s: &RSSolution| s.delta(&self.params);
        let finite: Vec<&PathPoint> = self.finite().collect();
        // consecutive finite points (decreasing eta, so usually increasing delta) bracketing the target
        let bracket = finite.windows(2).find(|w| {
            let (a, b) = (d_of(&w[0].solution), d_of(&w[1].solution));
            (a - delta) * (b - delta) <= 0.0
        });
        let Some(w) = bracket else {
            let (min, max) = self.delta_range();
            return Err(Error::NotBracketed { target: delta, min, max });
        };
        let (mut hi_pt, mut lo_pt) = (w[0].clone(), w[1].clone());
        for end in [&hi_pt, &lo_pt] {
            if d_of(&end.solution) == delta {
                return Ok((self.penalty.with_eta(end.eta)?, end.solution.clone()));
            }
        }
        let rising = d_of(&lo_pt.solution) > d_of(&hi_pt.solution);
        for _ in 0..200 {
            let eta = (hi_pt.eta * lo_pt.eta).sqrt();
            if eta <= lo_pt.eta || eta >= hi_pt.eta {
                break;
            }
            let pen = self.penalty.with_eta(eta)?;
            let sol = solve_rs_with(&pen, &self.params, hi_pt.solution.state, &self.cfg)?;
            let mid = PathPoint { eta, solution: sol };
            let d = if mid.solution.branch == Branch::S1 { d_of(&mid.solution) } else { f64::INFINITY };
            if (d - delta).abs() <= 1e-12 {
                return Ok((pen, mid.solution));
            }
            if (d < delta) == rising {
                hi_pt = mid;
            } else {
                lo_pt = mid;
            }
        }
        let best = [&hi_pt, &lo_pt]
            .into_iter()
            .filter(|pt| pt.solution.branch == Branch::S1)
            .min_by(|a, b| (d_of(&a.solution) - delta).abs().partial_cmp(&(d_of(&b.solution) - delta).abs()).unwrap())
            .expect("bracket endpoints are finite");
        if (d_of(&best.solution) - delta).abs() > 1e-8 {
            let (min, max) = self.delta_range();
            return Err(Error::NotBracketed { target: delta, min, max });
        }
        Ok((self.penalty.with_eta(best.eta)?, best.solution.clone()))
    }
}

/// Penalty of the same family whose finite-branch solution has `rho_hat / alpha = delta`.
pub fn eta_for_delta(p: &Penalty, params: &ModelParams, delta: f64) -> Result<Penalty> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::UnphysicalRegion(delta));
    }
    Ok(DeltaPath::new(p, params)?.solve_for_delta(delta)?.0)
}
