//! Reference computations that share no code with the closed forms: they
//! only evaluate the penalty itself and maximize or integrate numerically.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use sparse_gdf::Penalty;

/// `-qhat/2 x^2 + h x - r(x)`
pub fn objective(p: &Penalty, h: f64, qhat: f64, x: f64) -> f64 {
    -0.5 * qhat * x * x + h * x - p.value(x)
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Brute-force maximizer: scan `[-50, 50]` with step 1e-3, then refine the
/// best cell by golden-section search. `x = 0` is always a candidate.
pub fn grid_argmax(p: &Penalty, h: f64, qhat: f64) -> f64 {
    let f = |x: f64| objective(p, h, qhat, x);
    let step = 1e-3;
    let n = 100_000;
    let mut best = (0.0, f(0.0));
    for k in 0..=n {
        let x = -50.0 + step * k as f64;
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    let refined = golden_max(f, best.0 - step, best.0 + step, 1e-12);
    if f(refined) > best.1 {
        refined
    } else {
        best.0
    }
}

/// Intervals of `x >= 0` on which the penalty is smooth.
fn pieces(p: &Penalty) -> Vec<(f64, f64)> {
    let far = 1e6;
    match *p {
        Penalty::Scad { a, lambda, .. } => vec![(0.0, lambda), (lambda, a * lambda), (a * lambda, far)],
        _ => vec![(0.0, far)],
    }
}

/// Maximum of the objective over `x` for `h >= 0` (the problem is odd in `h`),
/// together with the index of the winning piece (0 for `x = 0`).
pub fn numeric_max(p: &Penalty, h: f64, qhat: f64) -> (f64, f64, usize) {
    let f = |x: f64| objective(p, h, qhat, x);
    let mut best = (0.0, f(0.0), 0);
    for (k, (lo, hi)) in pieces(p).into_iter().enumerate() {
        // objective is concave on each piece; clip the search to a region
        // that surely contains the maximum
        let hi = hi.min(lo + 2.0 * (h.abs() + 1.0) / qhat + 1.0);
        let x = golden_max(f, lo, hi, 1e-13 * (1.0 + hi));
        let v = f(x);
        if v > best.1 + 1e-15 {
            best = (x, v, k + 1);
        }
    }
    best
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `E_z[g(z)]` for `z ~ N(0, 1)` and an even `g` that is smooth between the
/// given breakpoints on `z >= 0`.
pub fn gaussian_expectation_even<G: Fn(f64) -> f64>(g: G, breaks: &[f64]) -> f64 {
    let nodes = gauss_legendre(30);
    let mut edges = vec![0.0];
    edges.extend(breaks.iter().copied().filter(|&b| b > 0.0 && b < 14.0));
    edges.push(14.0);
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut total = 0.0;
    for w in edges.windows(2) {
        // unit-length chunks keep the Gaussian factor well resolved
        let chunks = ((w[1] - w[0]).ceil() as usize).max(1);
        let len = (w[1] - w[0]) / chunks as f64;
        for c in 0..chunks {
            let (a, b) = (w[0] + c as f64 * len, w[0] + (c + 1) as f64 * len);
            for &(x, wt) in &nodes {
                let z = 0.5 * (a + b) + 0.5 * (b - a) * x;
                total += 0.5 * (b - a) * wt * g(z) * std_normal_pdf(z);
            }
        }
    }
    2.0 * total
}

/// Values of `z >= 0` where the winning piece of the numeric maximization
/// changes, located by bisection.
pub fn piece_breaks(p: &Penalty, qhat: f64, chihat: f64) -> Vec<f64> {
    let sd = chihat.sqrt();
    let piece = |z: f64| numeric_max(p, sd * z, qhat).2;
    let mut out = Vec::new();
    let n = 2800;
    for k in 0..n {
        let (mut a, mut b) = (14.0 * k as f64 / n as f64, 14.0 * (k + 1) as f64 / n as f64);
        let pa = piece(a);
        if pa == piece(b) {
            continue;
        }
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if piece(m) == pa {
                a = m;
            } else {
                b = m;
            }
        }
        out.push(0.5 * (a + b));
    }
    out
}

/// `2 E_z[max_x (-qhat/2 x^2 + sqrt(chihat) z x - r(x))]`
pub fn pi_quadrature(p: &Penalty, qhat: f64, chihat: f64) -> f64 {
    let breaks = piece_breaks(p, qhat, chihat);
    let sd = chihat.sqrt();
    2.0 * gaussian_expectation_even(|z| numeric_max(p, sd * z, qhat).1, &breaks)
}

/// `E_z[r(x*)]` at the single-body maximizer.
pub fn r_bar_quadrature(p: &Penalty, qhat: f64, chihat: f64) -> f64 {
    let breaks = piece_breaks(p, qhat, chihat);
    let sd = chihat.sqrt();
    gaussian_expectation_even(|z| p.value(numeric_max(p, sd * z, qhat).0), &breaks)
}

/// Minimum of `1/2 |y - A x|^2 + eta |x|_0` over all `2^N` supports, with
/// least squares on each support. Returns the objective and the support.
pub fn brute_force_l0(a: &DMatrix<f64>, y: &DVector<f64>, eta: f64) -> (f64, Vec<usize>) {
    let n = a.ncols();
    let mut best = (0.5 * y.norm_squared(), Vec::new());
    for mask in 1u32..(1 << n) {
        let cols: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
        let sub = a.select_columns(&cols);
        let coef = sub.clone().svd(true, true).solve(y, 1e-12).unwrap();
        let rss = (y - sub * coef).norm_squared();
        let obj = 0.5 * rss + eta * cols.len() as f64;
        if obj < best.0 {
            best = (obj, cols);
        }
    }
    best
}
