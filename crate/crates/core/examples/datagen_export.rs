//! Write a correlated design matrix to CSV. The comment header records the
//! shape, seed and generator so the file can be regenerated.
//!
//! ```text
//! cargo run --example datagen_export -- ex2:5 40 20 > design.csv
//! ```

use std::io;

use sparse_gdf::datagen::Predictors;

fn main() -> sparse_gdf::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let kind = args.first().map_or("ex1:0.5", String::as_str);
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let m: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10);
    let seed = 1;

    let predictors = match kind.split_once(':') {
        Some(("ex1", c)) => Predictors::Example1 { c: c.parse().unwrap_or(0.5) },
        Some(("ex2", t)) => Predictors::Example2 { t: t.parse().unwrap_or(n / 8) },
        _ => Predictors::Iid,
    };
    let a = predictors.generate(m, n, seed)?;
    sparse_gdf::datagen::write_matrix_csv(io::stdout().lock(), &a, seed, &predictors.tag())
}
