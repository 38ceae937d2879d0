//! Simulate a network, fit it and report the error metrics.
//!
//! cargo run --release --example fit_synthetic -- [n] [M] [seed]

use dynlsm::eval::{logistic, pcc, posterior_mean_coef, posterior_mean_logodds, rmse_beta, rmse_logodds, rmse_traj, TrajAlignment};
use dynlsm::simgen::{generate, SimConfig};
use dynlsm::svi::{fit, SviConfig};

fn main() -> dynlsm::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(100) as usize;
    let m = args.get(1).copied().unwrap_or(10) as usize;
    let seed = args.get(2).copied().unwrap_or(1);

    let data = generate(&SimConfig {
        n,
        m,
        density: 0.2,
        seed,
        ..SimConfig::default()
    })?;
    let cfg = SviConfig {
        seed,
        ..SviConfig::default()
    };
    let result = fit(&data.network, &data.covariates, &cfg)?;
    println!(
        "{} iterations ({}), {:.2} s",
        result.iterations,
        result.stop_reason,
        result.wall_time.as_secs_f64()
    );

    let times = data.network.times();
    let theta = posterior_mean_logodds(&result.state, &result.basis, &data.covariates, times)?;
    let (mut est, mut truth) = (Vec::new(), Vec::new());
    for (hat, t0) in theta.iter().zip(&data.truth_theta) {
        for i in 0..n {
            for j in i + 1..n {
                est.push(logistic(hat[(i, j)]));
                truth.push(logistic(t0[(i, j)]));
            }
        }
    }
    let beta = posterior_mean_coef(&result.state, &result.basis, times)?;
    println!("pcc          {:.4}", pcc(&est, &truth)?);
    println!("rmse_logodds {:.4}", rmse_logodds(&theta, &data.truth_theta)?);
    println!(
        "rmse_traj    {:.4}",
        rmse_traj(&result.aligned, &data.truth_u, 2, TrajAlignment::Shared)?
    );
    println!("rmse_beta    {:.4}", rmse_beta(&beta, &data.truth_beta)?);
    let scales: Vec<String> = (0..cfg.d)
        .map(|h| format!("{:.3}", 1.0 / result.state.expect_mgp(h)))
        .collect();
    println!("dimension scales 1/E[gamma_h]: {}", scales.join(" "));
    Ok(())
}
