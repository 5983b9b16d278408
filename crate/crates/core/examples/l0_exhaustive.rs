//! Exact best-subset regression on small systems. The l0 GDF exceeds the
//! fraction of selected variables, and the gap to the replica curve shrinks
//! as the system grows.

use sparse_gdf::oracle::exact_l0_curve;
use sparse_gdf::rs::DeltaPath;
use sparse_gdf::selection::observables;
use sparse_gdf::{ModelParams, Penalty};

fn main() -> sparse_gdf::Result<()> {
    let params = ModelParams::new(0.5, 0.0, 1.0)?;
    let path = DeltaPath::new(&Penalty::L0 { eta: 1.0 }, &params)?;
    let etas: Vec<f64> = [0.08, 0.12, 0.16]
        .iter()
        .map(|&d| path.solve_for_delta(d).map(|(p, _)| p.eta().unwrap()))
        .collect::<Result<_, _>>()?;

    println!("{:>4} {:>8} {:>8} {:>8} {:>8}", "N", "eta", "delta", "exact", "rs");
    for n in [12, 16, 20] {
        for pt in exact_l0_curve(&params, n, &etas, 200, 99)? {
            let rs = path
                .solve_for_delta(pt.mean_delta)
                .and_then(|(p, sol)| observables(&p, &params, &sol))
                .map_or("-".to_string(), |o| format!("{:.4}", o.df));
            println!("{n:>4} {:>8.4} {:>8.4} {:>8.4} {rs:>8}", pt.eta, pt.mean_delta, pt.df_exact);
        }
    }
    Ok(())
}
