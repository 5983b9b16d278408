//! The effective one-dimensional problem behind every penalty: the
//! thresholding rule `x*(h)` and the Gaussian averages built from it.

use sparse_gdf::scalar::{moments, single_body_argmax, thresholds};
use sparse_gdf::Penalty;

fn main() -> sparse_gdf::Result<()> {
    let penalties = [
        Penalty::L1 { eta: 1.0 },
        Penalty::ElasticNet { eta1: 1.0, eta2: 0.5 },
        Penalty::L0 { eta: 1.0 },
        Penalty::Scad { eta: 1.0, a: 5.0, lambda: 1.0 },
    ];
    let qhat = 0.8;

    println!("{:>6} {}", "h", penalties.map(|p| format!("{:>10}", p.tag())).join(""));
    for k in 0..=16 {
        let h = 0.5 * k as f64;
        let row: Vec<String> = penalties
            .iter()
            .map(|p| single_body_argmax(p, h, qhat).map(|x| format!("{x:>10.4}")))
            .collect::<Result<_, _>>()?;
        println!("{h:>6.2} {}", row.join(""));
    }

    let chihat = 0.6;
    println!("\nqhat = {qhat}, chihat = {chihat}");
    for p in &penalties {
        let t = thresholds(p, qhat, chihat)?;
        let m = moments(p, qhat, chihat)?;
        println!(
            "{p:<32} thresholds {:?}  rho_hat {:.4}  pi {:.4}  E[dx/dh] {:.4}  E[x^2] {:.4}",
            t.as_slice(),
            m.rho_hat,
            m.pi,
            m.chi_contrib,
            m.q_contrib
        );
    }
    Ok(())
}
