//! Model selection by prediction error: the optimal sparsity of each penalty
//! and where their prediction-error curves cross.

use sparse_gdf::rs::DeltaPath;
use sparse_gdf::selection::{crossovers_on_paths, minimize_on_path, prediction_error_curve};
use sparse_gdf::{ModelParams, Penalty};

fn main() -> sparse_gdf::Result<()> {
    let params = ModelParams::new(0.5, 0.5, 1.0)?;
    let range = (0.01, 0.24);
    let families = [
        Penalty::L1 { eta: 1.0 },
        Penalty::ElasticNet { eta1: 1.0, eta2: 0.1 },
        Penalty::Scad { eta: 1.0, a: 8.0, lambda: 1.0 },
        Penalty::L0 { eta: 1.0 },
    ];
    let paths: Vec<DeltaPath> = families.iter().map(|p| DeltaPath::new(p, &params)).collect::<Result<_, _>>()?;

    for (p, path) in families.iter().zip(&paths) {
        match minimize_on_path(path, range) {
            Ok((delta, obs)) => {
                println!("{:<5} minimum err_pre {:.5} at delta {delta:.4} (df {:.4})", p.tag(), obs.err_pre, obs.df)
            }
            Err(e) => println!("{:<5} {e}", p.tag()),
        }
    }

    for i in 0..3 {
        for j in i + 1..3 {
            let x = crossovers_on_paths(&paths[i], &paths[j], range)?;
            println!("{} vs {}: curves cross at {x:.4?}", families[i].tag(), families[j].tag());
        }
    }

    println!("\n{:>6} {:>10} {:>10} {:>10} {:>10}", "delta", "l1", "en", "scad", "l0");
    let curves: Vec<_> = paths.iter().map(|path| prediction_error_curve(path, range, 24)).collect::<Result<_, _>>()?;
    for k in 0..curves[0].len() {
        print!("{:>6.3}", curves[0][k].0);
        for c in &curves {
            match c[k].1 {
                Some(e) => print!(" {e:>10.5}"),
                None => print!(" {:>10}", "-"),
            }
        }
        println!();
    }
    Ok(())
}
