//! GDF as a function of sparsity for each penalty in the large-system limit,
//! with the point where SCAD loses replica symmetry.

use sparse_gdf::rs::DeltaPath;
use sparse_gdf::selection::sweep_path;
use sparse_gdf::{ModelParams, Penalty};

fn main() -> sparse_gdf::Result<()> {
    let params = ModelParams::new(0.5, 0.0, 1.0)?;
    let grid: Vec<f64> = (1..=19).map(|k| 0.05 * k as f64).collect();
    let families = [
        Penalty::L1 { eta: 1.0 },
        Penalty::ElasticNet { eta1: 1.0, eta2: 0.1 },
        Penalty::L0 { eta: 1.0 },
        Penalty::Scad { eta: 1.0, a: 8.0, lambda: 1.0 },
    ];

    let paths: Vec<DeltaPath> = families.iter().map(|p| DeltaPath::new(p, &params)).collect::<Result<_, _>>()?;
    let sweeps: Vec<_> = paths.iter().map(|path| sweep_path(path, &grid)).collect();

    print!("{:>6}", "delta");
    for p in &families {
        print!("{:>10}", p.tag());
    }
    println!();
    for (k, delta) in grid.iter().enumerate() {
        print!("{delta:>6.2}");
        for sweep in &sweeps {
            let row = &sweep[k];
            match (&row.solution, &row.observables) {
                (Some(sol), Some(obs)) => {
                    // a star marks solutions past the AT line
                    let mark = if sol.at_stable { ' ' } else { '*' };
                    print!("{:>9.4}{mark}", obs.df);
                }
                _ => print!("{:>10}", "-"),
            }
        }
        println!();
    }

    for (p, path) in families.iter().zip(&paths) {
        let (lo, hi) = path.delta_range();
        println!("{:<5} finite branch covers delta in [{lo:.4}, {hi:.4}]", p.tag());
    }
    Ok(())
}
