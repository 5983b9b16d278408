//! GDF under correlated predictors. The effective sparsity measured by
//! belief propagation tracks the GDF even when the columns are correlated.

use sparse_gdf::amp::{run_ensemble, BpConfig, EnsembleConfig};
use sparse_gdf::datagen::Predictors;
use sparse_gdf::rs::eta_for_delta;
use sparse_gdf::{ModelParams, Penalty};

fn main() -> sparse_gdf::Result<()> {
    let (n, m) = (200, 100);
    let params = ModelParams::new(m as f64 / n as f64, 0.0, 1.0)?;
    let ensembles = [Predictors::Iid, Predictors::Example1 { c: 0.5 }, Predictors::Example2 { t: n / 8 }];
    let penalty = Penalty::ElasticNet { eta1: 1.0, eta2: 0.1 };

    println!("{:>10} {:>6} {:>8} {:>8} {:>10}", "design", "delta", "cov", "eff", "converged");
    for predictors in ensembles {
        for delta in [0.1, 0.3] {
            let pen = eta_for_delta(&penalty, &params, delta)?;
            let cfg = EnsembleConfig {
                n,
                m,
                predictors,
                m_y: 0.0,
                sigma_y2: 1.0,
                samples: 60,
                seed: 7,
                bp: BpConfig::default(),
                sure_eps: None,
            };
            let s = run_ensemble(&cfg, &pen)?;
            let show = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
            println!(
                "{:>10} {delta:>6.2} {:>8} {:>8} {:>7}/{}",
                predictors.tag(),
                show(s.df_cov),
                show(s.delta_eff),
                s.converged,
                s.samples
            );
        }
    }
    Ok(())
}
