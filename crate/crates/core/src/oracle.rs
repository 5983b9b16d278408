//! Exact and reference solvers for finite instances.
//!
//! * best-subset selection for the l0 objective `1/2 |y - A x|^2 + eta |x|_0`,
//!   by enumeration for small `N` and branch-and-bound above,
//! * cyclic coordinate descent for l1, elastic net and SCAD,
//! * the Monte Carlo protocol that turns exact l0 fits into a GDF estimate.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::amp::{gdf_covariance, Instance};
use crate::datagen::{gen_gaussian_iid, gen_y, sample_seeds};
use crate::error::{Error, Result};
use crate::scalar::single_body_argmax;
use crate::types::{ModelParams, Penalty};

/// Largest `N` solved by plain enumeration.
pub const ENUMERATION_CAP: usize = 22;
/// Largest `N` accepted at all (branch-and-bound above the enumeration cap).
pub const BRANCH_AND_BOUND_CAP: usize = 50;

/// Relative pivot below which a column is treated as linearly dependent on
/// the columns already in the support.
const PIVOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct BestSubset {
    pub x: DVector<f64>,
    pub support: Vec<usize>,
    pub objective: f64,
    /// Number of rank-deficient extensions that were skipped. Such supports
    /// never beat the smaller support spanning the same column space.
    pub rank_deficient: usize,
}

/// Minimum-norm least squares restricted to `support`; returns the full
/// coefficient vector and the residual sum of squares.
pub fn least_squares_on(inst: &Instance, support: &[usize]) -> Result<(DVector<f64>, f64)> {
    let mut x = DVector::zeros(inst.n());
    if support.is_empty() {
        return Ok((x, inst.y.norm_squared()));
    }
    let sub = inst.a.select_columns(support);
    let coef = sub
        .svd(true, true)
        .solve(&inst.y, 1e-12)
        .map_err(|e| Error::InvalidParameter(format!("least squares failed: {e}")))?;
    for (k, &j) in support.iter().enumerate() {
        x[j] = coef[k];
    }
    let rss = (&inst.y - &inst.a * &x).norm_squared();
    Ok((x, rss))
}

/// Incrementally grown Cholesky factor of the Gram matrix of a support, with
/// the projected data `z = L^-1 A_S^T y`. Adding column `j` lowers the
/// residual sum of squares by `z_j^2`.
struct Factor<'a> {
    gram: &'a DMatrix<f64>,
    aty: &'a DVector<f64>,
    support: Vec<usize>,
    rows: Vec<Vec<f64>>,
    z: Vec<f64>,
    rss: f64,
}

impl<'a> Factor<'a> {
    fn new(gram: &'a DMatrix<f64>, aty: &'a DVector<f64>, yy: f64) -> Self {
        Factor { gram, aty, support: Vec::new(), rows: Vec::new(), z: Vec::new(), rss: yy }
    }

    /// Push column `j`; `false` (and no change) if it is dependent.
    fn push(&mut self, j: usize) -> bool {
        let k = self.support.len();
        let mut row = Vec::with_capacity(k + 1);
        for t in 0..k {
            let v =
                self.gram[(self.support[t], j)] - self.rows[t][..t].iter().zip(&row).map(|(l, w)| l * w).sum::<f64>();
            row.push(v / self.rows[t][t]);
        }
        let gjj = self.gram[(j, j)];
        let d = gjj - row.iter().map(|w| w * w).sum::<f64>();
        if d.is_nan() || d <= PIVOT_TOL * gjj.max(f64::MIN_POSITIVE) {
            return false;
        }
        let ljj = d.sqrt();
        let zj = (self.aty[j] - row.iter().zip(&self.z).map(|(w, z)| w * z).sum::<f64>()) / ljj;
        row.push(ljj);
        self.rows.push(row);
        self.support.push(j);
        self.z.push(zj);
        self.rss -= zj * zj;
        true
    }

    fn pop(&mut self) {
        self.support.pop();
        self.rows.pop();
        let zj = self.z.pop().expect("pop on empty factor");
        self.rss += zj * zj;
    }
}

struct Search<'a> {
    factor: Factor<'a>,
    n: usize,
    eta: f64,
    half_yy: f64,
    best_cost: f64,
    best: Vec<usize>,
    rank_deficient: usize,
}

impl Search<'_> {
    fn cost(&self) -> f64 {
        0.5 * self.factor.rss.max(0.0) + self.eta * self.factor.support.len() as f64
    }

    fn enumerate(&mut self, start: usize) {
        let k = self.factor.support.len() + 1;
        // supports with eta k >= |y|^2 / 2 cannot beat the empty support
        if self.eta > 0.0 && self.eta * k as f64 >= self.half_yy {
            return;
        }
        for j in start..self.n {
            if !self.factor.push(j) {
                self.rank_deficient += 1;
                continue;
            }
            let c = self.cost();
            if c < self.best_cost {
                self.best_cost = c;
                self.best = self.factor.support.clone();
            }
            self.enumerate(j + 1);
            self.factor.pop();
        }
    }
}

fn gram_parts(inst: &Instance) -> (DMatrix<f64>, DVector<f64>, f64) {
    (inst.a.tr_mul(&inst.a), inst.a.tr_mul(&inst.y), inst.y.norm_squared())
}

fn finish(inst: &Instance, eta: f64, mut support: Vec<usize>, rank_deficient: usize) -> Result<BestSubset> {
    support.sort_unstable();
    let (x, rss) = least_squares_on(inst, &support)?;
    Ok(BestSubset { x, objective: 0.5 * rss + eta * support.len() as f64, support, rank_deficient })
}

/// Global minimizer of `1/2 |y - A x|^2 + eta |x|_0`.
pub fn best_subset_l0(inst: &Instance, eta: f64) -> Result<BestSubset> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::InvalidParameter(format!("eta must be >= 0, got {eta}")));
    }
    let n = inst.n();
    if n > BRANCH_AND_BOUND_CAP {
        return Err(Error::TooLarge { n, cap: BRANCH_AND_BOUND_CAP });
    }
    if n > ENUMERATION_CAP {
        return branch_and_bound(inst, eta);
    }
    let (gram, aty, yy) = gram_parts(inst);
    let mut s = Search {
        factor: Factor::new(&gram, &aty, yy),
        n,
        eta,
        half_yy: 0.5 * yy,
        best_cost: 0.5 * yy,
        best: Vec::new(),
        rank_deficient: 0,
    };
    s.enumerate(0);
    finish(inst, eta, s.best, s.rank_deficient)
}

/// Depth-first include/exclude search. The bound at a node is
/// `1/2 RSS(S + U) + eta |S|`, with `S` the included columns and `U` the
/// undecided ones: no completion can fit better than using all of them.
fn branch_and_bound(inst: &Instance, eta: f64) -> Result<BestSubset> {
    let n = inst.n();
    let (gram, aty, yy) = gram_parts(inst);
    let greedy = greedy_forward(&gram, &aty, yy, eta);

    struct Bnb<'a> {
        inst: &'a Instance,
        factor: Factor<'a>,
        excluded: Vec<bool>,
        eta: f64,
        best_cost: f64,
        best: Vec<usize>,
        rank_deficient: usize,
    }

    impl Bnb<'_> {
        fn bound(&self, next: usize) -> f64 {
            let included = self.factor.support.len();
            let cols: Vec<usize> = (0..self.inst.n())
                .filter(|&j| !self.excluded[j] && (j >= next || self.factor.support.contains(&j)))
                .collect();
            let floor = self.eta * included as f64;
            if cols.len() >= self.inst.m() {
                return floor;
            }
            match least_squares_on(self.inst, &cols) {
                Ok((_, rss)) => 0.5 * rss + floor,
                Err(_) => floor,
            }
        }

        fn visit(&mut self, p: usize) {
            let c = 0.5 * self.factor.rss.max(0.0) + self.eta * self.factor.support.len() as f64;
            if c < self.best_cost {
                self.best_cost = c;
                self.best = self.factor.support.clone();
            }
            if p == self.inst.n() || self.eta * (self.factor.support.len() + 1) as f64 >= self.best_cost {
                return;
            }
            if self.factor.push(p) {
                self.visit(p + 1);
                self.factor.pop();
            } else {
                self.rank_deficient += 1;
            }
            self.excluded[p] = true;
            if self.bound(p + 1) < self.best_cost {
                self.visit(p + 1);
            }
            self.excluded[p] = false;
        }
    }

    let mut b = Bnb {
        inst,
        factor: Factor::new(&gram, &aty, yy),
        excluded: vec![false; n],
        eta,
        best_cost: greedy.0,
        best: greedy.1,
        rank_deficient: 0,
    };
    b.visit(0);
    finish(inst, eta, b.best, b.rank_deficient)
}

/// Forward selection, used as the initial incumbent: `(cost, support)`.
fn greedy_forward(gram: &DMatrix<f64>, aty: &DVector<f64>, yy: f64, eta: f64) -> (f64, Vec<usize>) {
    let n = gram.nrows();
    let mut f = Factor::new(gram, aty, yy);
    let mut best = (0.5 * yy, Vec::new());
    loop {
        let mut pick: Option<(usize, f64)> = None;
        for j in 0..n {
            if f.support.contains(&j) {
                continue;
            }
            if f.push(j) {
                if pick.map_or(true, |(_, r)| f.rss < r) {
                    pick = Some((j, f.rss));
                }
                f.pop();
            }
        }
        let Some((j, _)) = pick else { break };
        f.push(j);
        let c = 0.5 * f.rss.max(0.0) + eta * f.support.len() as f64;
        if c < best.0 {
            best = (c, f.support.clone());
        }
    }
    best
}

/// Best residual sum of squares for every support size `0..=max_size`,
/// found by one enumeration. Serves every `eta` at once.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetPath {
    pub rss: Vec<f64>,
    pub supports: Vec<Vec<usize>>,
    pub rank_deficient: usize,
}

impl SubsetPath {
    /// Size and support minimizing `1/2 rss_k + eta k` (smaller `k` on ties).
    pub fn select(&self, eta: f64) -> (usize, &[usize]) {
        let mut best = 0;
        for k in 1..self.rss.len() {
            let cost = |k: usize| 0.5 * self.rss[k] + eta * k as f64;
            if cost(k) < cost(best) {
                best = k;
            }
        }
        (best, &self.supports[best])
    }
}

pub fn best_subsets_by_size(inst: &Instance) -> Result<SubsetPath> {
    let n = inst.n();
    if n > ENUMERATION_CAP {
        return Err(Error::TooLarge { n, cap: ENUMERATION_CAP });
    }
    let max_size = n.min(inst.m());
    let (gram, aty, yy) = gram_parts(inst);

    struct BySize<'a> {
        factor: Factor<'a>,
        n: usize,
        max_size: usize,
        rss: Vec<f64>,
        supports: Vec<Vec<usize>>,
        rank_deficient: usize,
    }
    impl BySize<'_> {
        fn walk(&mut self, start: usize) {
            if self.factor.support.len() == self.max_size {
                return;
            }
            for j in start..self.n {
                if !self.factor.push(j) {
                    self.rank_deficient += 1;
                    continue;
                }
                let k = self.factor.support.len();
                let r = self.factor.rss.max(0.0);
                if r < self.rss[k] {
                    self.rss[k] = r;
                    self.supports[k] = self.factor.support.clone();
                }
                self.walk(j + 1);
                self.factor.pop();
            }
        }
    }

    let mut w = BySize {
        factor: Factor::new(&gram, &aty, yy),
        n,
        max_size,
        rss: vec![f64::INFINITY; max_size + 1],
        supports: vec![Vec::new(); max_size + 1],
        rank_deficient: 0,
    };
    w.rss[0] = yy;
    w.walk(0);
    Ok(SubsetPath { rss: w.rss, supports: w.supports, rank_deficient: w.rank_deficient })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdConfig {
    pub tol: f64,
    pub max_sweeps: usize,
    /// Number of starting points for SCAD (convex penalties use one).
    pub starts: usize,
    pub seed: u64,
}

impl Default for CdConfig {
    fn default() -> Self {
        CdConfig { tol: 1e-12, max_sweeps: 100_000, starts: 5, seed: 0 }
    }
}

fn cd_from(inst: &Instance, p: &Penalty, x0: DVector<f64>, cfg: &CdConfig, col_sq: &[f64]) -> Result<DVector<f64>> {
    let mut x = x0;
    let mut r = &inst.y - &inst.a * &x;
    let mut change = f64::INFINITY;
    for _ in 0..cfg.max_sweeps {
        change = 0.0_f64;
        for j in 0..inst.n() {
            if col_sq[j] == 0.0 {
                x[j] = 0.0;
                continue;
            }
            let col = inst.a.column(j);
            let rho = col.dot(&r) + col_sq[j] * x[j];
            let next = single_body_argmax(p, rho, col_sq[j])?;
            let d = next - x[j];
            if d != 0.0 {
                r.axpy(-d, &col, 1.0);
                x[j] = next;
                change = change.max(d.abs());
            }
        }
        if change <= cfg.tol {
            return Ok(x);
        }
    }
    Err(Error::NonConvergence { iterations: cfg.max_sweeps, residual: change })
}

/// Cyclic coordinate descent with the default configuration and tolerance `tol`.
pub fn coord_descent(inst: &Instance, p: &Penalty, tol: f64) -> Result<DVector<f64>> {
    coord_descent_with(inst, p, &CdConfig { tol, ..CdConfig::default() })
}

/// Cyclic coordinate minimization to `max |dx| <= tol`. For SCAD several
/// starts are tried (zero, then random) and the lowest objective is kept.
pub fn coord_descent_with(inst: &Instance, p: &Penalty, cfg: &CdConfig) -> Result<DVector<f64>> {
    p.validate()?;
    if matches!(p, Penalty::L0 { .. }) {
        return Err(Error::InvalidParameter("use best_subset_l0 for the l0 penalty".into()));
    }
    let col_sq: Vec<f64> = inst.a.column_iter().map(|c| c.norm_squared()).collect();
    let zero = DVector::zeros(inst.n());
    let mut best = cd_from(inst, p, zero, cfg, &col_sq)?;
    if let Penalty::Scad { .. } = p {
        let mut best_obj = inst.objective(p, &best);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let scale = inst.y.norm() / (inst.n() as f64).sqrt();
        for _ in 1..cfg.starts {
            let x0 = DVector::from_fn(inst.n(), |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                scale * z
            });
            let x = cd_from(inst, p, x0, cfg, &col_sq)?;
            let obj = inst.objective(p, &x);
            if obj < best_obj {
                best = x;
                best_obj = obj;
            }
        }
    }
    Ok(best)
}

fn samples_dimension(params: &ModelParams, n: usize) -> Result<usize> {
    let m = (params.alpha * n as f64).round() as usize;
    if m == 0 {
        return Err(Error::InvalidParameter(format!("alpha * N rounds to zero samples (N = {n})")));
    }
    Ok(m)
}

/// Fitted values and support size.
type Fit = (DVector<f64>, usize);

/// One point of the exact l0 curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L0Point {
    pub eta: f64,
    /// Mean number of non-zero coefficients per sample.
    pub mean_delta: f64,
    pub df_exact: f64,
}

/// Exact-fit GDF of the l0 estimator for each `eta`: `samples` independent
/// Gaussian instances with `M = round(alpha N)` are solved exactly and the
/// covariance estimator is applied to the fits.
pub fn exact_l0_curve(params: &ModelParams, n: usize, etas: &[f64], samples: usize, seed: u64) -> Result<Vec<L0Point>> {
    params.validate()?;
    if n > BRANCH_AND_BOUND_CAP {
        return Err(Error::TooLarge { n, cap: BRANCH_AND_BOUND_CAP });
    }
    if samples < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: samples });
    }
    let m = samples_dimension(params, n)?;
    // per sample: (y, per-eta fit and support size)
    let runs: Vec<(DVector<f64>, Vec<Fit>)> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let (seed_a, seed_y) = sample_seeds(seed, k as u64);
            let inst = Instance::new(gen_gaussian_iid(m, n, seed_a), gen_y(m, params.m_y, params.sigma_y2, seed_y))?;
            let fits = if n <= ENUMERATION_CAP {
                let path = best_subsets_by_size(&inst)?;
                etas.iter()
                    .map(|&eta| {
                        let (_, support) = path.select(eta);
                        let (x, _) = least_squares_on(&inst, support)?;
                        Ok((&inst.a * x, support.len()))
                    })
                    .collect::<Result<Vec<_>>>()?
            } else {
                etas.iter()
                    .map(|&eta| {
                        let b = best_subset_l0(&inst, eta)?;
                        Ok((&inst.a * &b.x, b.support.len()))
                    })
                    .collect::<Result<Vec<_>>>()?
            };
            Ok((inst.y, fits))
        })
        .collect::<Result<_>>()?;

    etas.iter()
        .enumerate()
        .map(|(e, &eta)| {
            let pairs: Vec<(DVector<f64>, DVector<f64>)> =
                runs.iter().map(|(y, f)| (y.clone(), f[e].0.clone())).collect();
            let mean_k = runs.iter().map(|(_, f)| f[e].1 as f64).sum::<f64>() / samples as f64;
            Ok(L0Point {
                eta,
                mean_delta: mean_k / m as f64,
                df_exact: gdf_covariance(&pairs, params.m_y, params.sigma_y2)?,
            })
        })
        .collect()
}

/// Exact-fit GDF of the l0 estimator at a single `eta`.
pub fn exact_gdf_l0(params: &ModelParams, n: usize, eta: f64, samples: usize, seed: u64) -> Result<f64> {
    Ok(exact_l0_curve(params, n, &[eta], samples, seed)?[0].df_exact)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(m: usize, n: usize, seed: u64) -> Instance {
        Instance::new(gen_gaussian_iid(m, n, seed), gen_y(m, 0.3, 1.0, seed + 100)).unwrap()
    }

    #[test]
    fn orthonormal_design_keeps_large_correlations() {
        let a = DMatrix::<f64>::identity(10, 10);
        let y = gen_y(10, 0.0, 1.0, 5);
        let inst = Instance::new(a, y.clone()).unwrap();
        let eta = 0.3;
        let b = best_subset_l0(&inst, eta).unwrap();
        let expect: Vec<usize> = (0..10).filter(|&i| y[i].abs() > (2.0 * eta).sqrt()).collect();
        assert_eq!(b.support, expect);
    }

    #[test]
    fn zero_eta_is_least_squares() {
        let inst = inst(12, 6, 1);
        let b = best_subset_l0(&inst, 0.0).unwrap();
        let (_, rss) = least_squares_on(&inst, &(0..6).collect::<Vec<_>>()).unwrap();
        assert!((b.objective - 0.5 * rss).abs() < 1e-10);
    }

    #[test]
    fn huge_eta_gives_empty_support() {
        let inst = inst(8, 10, 2);
        let b = best_subset_l0(&inst, 0.5 * inst.y.norm_squared()).unwrap();
        assert!(b.support.is_empty());
        assert_eq!(b.x, DVector::zeros(10));
    }

    #[test]
    fn by_size_agrees_with_direct_search() {
        let inst = inst(8, 14, 3);
        let path = best_subsets_by_size(&inst).unwrap();
        for eta in [0.01, 0.1, 0.3, 1.0] {
            let direct = best_subset_l0(&inst, eta).unwrap();
            let (k, support) = path.select(eta);
            let obj = 0.5 * path.rss[k] + eta * k as f64;
            assert!((obj - direct.objective).abs() < 1e-9, "eta {eta}: {support:?} vs {:?}", direct.support);
        }
    }

    #[test]
    fn branch_and_bound_matches_enumeration() {
        let inst = inst(12, 22, 4);
        for eta in [0.05, 0.2] {
            let e = best_subset_l0(&inst, eta).unwrap();
            let b = branch_and_bound(&inst, eta).unwrap();
            assert!((e.objective - b.objective).abs() < 1e-9);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let inst = inst(10, 51, 5);
        assert!(matches!(best_subset_l0(&inst, 0.1), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn coordinate_descent_single_column() {
        let a = DMatrix::from_column_slice(2, 1, &[0.6, 0.8]);
        let inst = Instance::new(a, DVector::from_vec(vec![1.0, 2.0])).unwrap();
        let x = coord_descent(&inst, &Penalty::L1 { eta: 0.5 }, 1e-14).unwrap();
        assert!((x[0] - 1.7).abs() < 1e-12);
    }
}
