//! Seeded generators for data vectors and predictor matrices.
//!
//! Every generator is a pure function of its shape, parameters and seed.
//! Matrices are filled in row-major order from a ChaCha8 stream.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normals(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent `(predictor, data)` seeds for sample `k` of a run with master seed `seed`.
pub fn sample_seeds(seed: u64, k: u64) -> (u64, u64) {
    let base = splitmix64(seed ^ splitmix64(k));
    (splitmix64(base), splitmix64(base ^ 0x5555_5555_5555_5555))
}

/// `M` i.i.d. draws from `N(m_y, sigma_y2)`.
pub fn gen_y(m: usize, m_y: f64, sigma_y2: f64, seed: u64) -> DVector<f64> {
    let sd = sigma_y2.max(0.0).sqrt();
    let mut r = rng(seed);
    DVector::from_iterator(m, normals(&mut r, m).into_iter().map(|z| m_y + sd * z))
}

/// `M x N` matrix with i.i.d. `N(0, 1/M)` entries.
pub fn gen_gaussian_iid(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
    let scale = 1.0 / (m as f64).sqrt();
    let mut r = rng(seed);
    let z = normals(&mut r, m * n);
    DMatrix::from_row_iterator(m, n, z.into_iter().map(|v| v * scale))
}

fn normalize_columns(mut a: DMatrix<f64>) -> DMatrix<f64> {
    for mut col in a.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    a
}

/// Correlated predictors with `corr(A_i, A_j) = c^|i-j|` before the columns
/// are rescaled to unit norm. Each row is a stationary AR(1) sequence over
/// the column index.
pub fn gen_example1(m: usize, n: usize, c: f64, seed: u64) -> Result<DMatrix<f64>> {
    if !(c.is_finite() && c.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!("correlation c must satisfy |c| < 1, got {c}")));
    }
    let mut r = rng(seed);
    let z = normals(&mut r, m * n);
    let innovation = (1.0 - c * c).sqrt();
    let mut a = DMatrix::zeros(m, n);
    for mu in 0..m {
        let row = &z[mu * n..(mu + 1) * n];
        for j in 0..n {
            a[(mu, j)] = if j == 0 { row[0] } else { c * a[(mu, j - 1)] + innovation * row[j] };
        }
    }
    Ok(normalize_columns(a))
}

/// Grouped predictors: columns in the three consecutive blocks
/// `[0, T)`, `[T, 2T)`, `[2T, 3T)` share a group factor `Z_g` plus
/// independent noise; the remaining columns are independent. Columns are
/// rescaled to unit norm.
pub fn gen_example2(m: usize, n: usize, t: usize, seed: u64) -> Result<DMatrix<f64>> {
    if 3 * t >= n {
        return Err(Error::InvalidT { t, n });
    }
    let mut r = rng(seed);
    let groups = normals(&mut r, 3 * m);
    let noise = normals(&mut r, m * n);
    let a = DMatrix::from_fn(m, n, |mu, i| {
        let eps = noise[mu * n + i];
        if i < 3 * t {
            groups[(i / t) * m + mu] + eps
        } else {
            eps
        }
    });
    Ok(normalize_columns(a))
}

/// Predictor ensembles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Predictors {
    /// i.i.d. `N(0, 1/M)` entries.
    Iid,
    /// Pairwise correlation `c^|i-j|`, unit-norm columns.
    Example1 { c: f64 },
    /// Three correlated groups of size `t`, unit-norm columns.
    Example2 { t: usize },
}

impl Predictors {
    pub fn generate(&self, m: usize, n: usize, seed: u64) -> Result<DMatrix<f64>> {
        match *self {
            Predictors::Iid => Ok(gen_gaussian_iid(m, n, seed)),
            Predictors::Example1 { c } => gen_example1(m, n, c, seed),
            Predictors::Example2 { t } => gen_example2(m, n, t, seed),
        }
    }

    pub fn tag(&self) -> String {
        match *self {
            Predictors::Iid => "iid".into(),
            Predictors::Example1 { c } => format!("ex1:{c}"),
            Predictors::Example2 { t } => format!("ex2:{t}"),
        }
    }
}

/// Write `a` as CSV, row-major, after a comment header carrying the shape,
/// seed and generator tag.
pub fn write_matrix_csv<W: Write>(mut out: W, a: &DMatrix<f64>, seed: u64, tag: &str) -> Result<()> {
    writeln!(out, "# M={} N={} seed={} generator={}", a.nrows(), a.ncols(), seed, tag)?;
    let mut w = csv::Writer::from_writer(out);
    for row in a.row_iter() {
        w.write_record(row.iter().map(|v| format!("{v:.16e}")))?;
    }
    w.flush()?;
    Ok(())
}
