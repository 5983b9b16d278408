//! Finite-size check of the SCAD GDF: belief propagation over random
//! Gaussian designs against the replica prediction at the same sparsity.

use sparse_gdf::amp::{run_ensemble, BpConfig, EnsembleConfig};
use sparse_gdf::datagen::Predictors;
use sparse_gdf::rs::DeltaPath;
use sparse_gdf::selection::observables;
use sparse_gdf::{ModelParams, Penalty};

fn main() -> sparse_gdf::Result<()> {
    let (n, m) = (200, 100);
    let params = ModelParams::new(m as f64 / n as f64, 0.0, 1.0)?;
    let path = DeltaPath::new(&Penalty::Scad { eta: 1.0, a: 5.0, lambda: 1.0 }, &params)?;

    println!("{:>6} {:>8} {:>8} {:>8} {:>8} {:>10}", "delta", "eta", "rs", "cov", "sure", "converged");
    for delta in [0.1, 0.2, 0.3, 0.4, 0.5] {
        let (pen, sol) = path.solve_for_delta(delta)?;
        let rs = observables(&pen, &params, &sol)?.df;
        let cfg = EnsembleConfig {
            n,
            m,
            predictors: Predictors::Iid,
            m_y: 0.0,
            sigma_y2: 1.0,
            samples: 40,
            seed: 2024,
            bp: BpConfig::default(),
            sure_eps: Some(1e-6),
        };
        let s = run_ensemble(&cfg, &pen)?;
        let show = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        println!(
            "{delta:>6.2} {:>8.4} {rs:>8.4} {:>8} {:>8} {:>7}/{}",
            pen.eta().unwrap(),
            show(s.df_cov),
            show(s.df_sure),
            s.converged,
            s.samples
        );
    }
    Ok(())
}
