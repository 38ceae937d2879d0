//! Draw a synthetic dynamic network and write it in the CSV formats the
//! `fit` command reads.
//!
//! cargo run --example simulate -- out_dir

use std::path::PathBuf;

use dynlsm::simgen::{generate, SimConfig};

fn main() -> dynlsm::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "sim_out".into()));
    let cfg = SimConfig {
        n: 50,
        m: 8,
        density: 0.15,
        seed: 42,
        ..SimConfig::default()
    };
    let data = generate(&cfg)?;
    std::fs::create_dir_all(&out).map_err(|e| dynlsm::Error::Io {
        path: out.clone(),
        source: e,
    })?;
    data.network.save_csv(&out.join("edges.csv"), &out.join("times.csv"))?;
    data.covariates.save_csv(&out.join("covariates.csv"), cfg.self_loops)?;
    data.write_truth(&out.join("truth.csv"))?;

    for m in 0..cfg.m {
        println!(
            "t = {:.3}: {} edges, density {:.3}, intercept {:.3}",
            data.network.times()[m],
            data.network.num_edges(m),
            data.network.density(m)?,
            data.truth_beta[m][0]
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}
