//! Pointwise credible bands for a covariate effect, an edge probability and
//! a node's degree.
//!
//! cargo run --release --example credible_bands

use dynlsm::eval::{coef_band, credible_band, BandOptions, BandQuantity};
use dynlsm::simgen::{generate, SimConfig};
use dynlsm::svi::{fit, SviConfig};

fn main() -> dynlsm::Result<()> {
    let data = generate(&SimConfig {
        n: 60,
        m: 12,
        seed: 3,
        ..SimConfig::default()
    })?;
    let cfg = SviConfig {
        d: 3,
        seed: 3,
        ..SviConfig::default()
    };
    let result = fit(&data.network, &data.covariates, &cfg)?;
    let times = data.network.times();

    let grid: Vec<f64> = (0..=10).map(|g| g as f64 / 10.0).collect();
    println!("beta_1(t): t, mean, 95% band");
    for point in coef_band(&result.state, &result.basis, 1, &grid, 0.95)? {
        println!("  {:.2}  {:+.3}  [{:+.3}, {:+.3}]", point.t, point.mean, point.lo, point.hi);
    }

    let snapshots: Vec<usize> = (0..times.len()).collect();
    let opts = BandOptions {
        draws: 1000,
        seed: 1,
        ..BandOptions::default()
    };
    for (name, quantity) in [
        ("P(edge 0-1)", BandQuantity::EdgeProbability(0, 1)),
        ("degree of node 0", BandQuantity::Degree(0)),
    ] {
        println!("{name}:");
        let band = credible_band(&result.state, &result.basis, &data.covariates, quantity, times, &snapshots, &opts)?;
        for (m, point) in band.iter().enumerate() {
            let observed = match quantity {
                BandQuantity::Degree(i) => format!("observed {}", data.network.neighbors(m, i).len()),
                _ => String::new(),
            };
            println!("  {:.2}  {:.3}  [{:.3}, {:.3}]  {observed}", point.t, point.mean, point.lo, point.hi);
        }
    }
    Ok(())
}
