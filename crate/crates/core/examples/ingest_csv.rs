//! Load an edge list, snapshot times and dyadic covariates from CSV files,
//! fit, and report in-sample AUC.
//!
//! cargo run --release --example ingest_csv -- edges.csv times.csv [covariates.csv]

use std::path::PathBuf;

use dynlsm::eval::{auc, posterior_mean_logodds};
use dynlsm::netdata::{load_times, CovariateSet, DynamicNetwork, LoadOptions};
use dynlsm::svi::{fit, SviConfig};

fn main() -> dynlsm::Result<()> {
    let args: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    if args.len() < 2 {
        eprintln!("usage: ingest_csv edges.csv times.csv [covariates.csv]");
        std::process::exit(2);
    }
    let m = load_times(&args[1])?.len();
    let net = DynamicNetwork::load_csv(
        &args[0],
        Some(&args[1]),
        &LoadOptions {
            n: None,
            m: Some(m),
            self_loops: false,
        },
    )?;
    let covariates = match args.get(2) {
        Some(path) => CovariateSet::load_csv(path, net.n(), m, false, false, true)?,
        None => CovariateSet::empty(net.n(), true),
    };
    println!("{} nodes, {} snapshots, {} edges", net.n(), m, net.edge_list().len());

    let cfg = SviConfig {
        d: 3,
        seed: 1,
        ..SviConfig::default()
    };
    let result = fit(&net, &covariates, &cfg)?;
    let theta = posterior_mean_logodds(&result.state, &result.basis, &covariates, net.times())?;
    let (mut scores, mut labels) = (Vec::new(), Vec::new());
    for (m, th) in theta.iter().enumerate() {
        for i in 0..net.n() {
            for j in i + 1..net.n() {
                scores.push(th[(i, j)]);
                labels.push(net.has_edge(m, i, j));
            }
        }
    }
    println!(
        "{} iterations ({}), in-sample AUC {:.4}",
        result.iterations,
        result.stop_reason,
        auc(&scores, &labels)?
    );
    Ok(())
}
