//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so every verdict is printed even when it passes.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use dynlsm::align::orthogonal_procrustes;
use dynlsm::basis::BasisSpec;
use dynlsm::eval::{auc, logistic, pcc, posterior_mean_logodds, rmse_logodds};
use dynlsm::netdata::{CovariateSet, DynamicNetwork, LoadOptions};
use dynlsm::pg::pg_mean;
use dynlsm::prior::{induced_traj_cov, precision_u, PriorConfig};
use dynlsm::rng::SeedTree;
use dynlsm::simgen::{generate, SimConfig, SyntheticDataset};
use dynlsm::svi::{
    converged, fit, sample_minibatch, svi_step, unbiased_sum, FitResult, Minibatch, Problem, StopReason, SviConfig,
};
use dynlsm::varstate::gig_expect_inv;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{cavi_step, gaussian_matrix, gig_inv_moment_quadrature, random_network, random_state, rel_gap};

struct Verdict {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn verdict(id: &'static str, pass: bool, detail: String) -> Verdict {
    println!("{} [{id}] {detail}", if pass { "PASS" } else { "FAIL" });
    Verdict { id, pass, detail }
}

/// Fits whose termination is checked by criterion 10.
struct FitLog {
    label: String,
    iterations: usize,
    stop_reason: StopReason,
    trace_converged: bool,
    max_iter: usize,
}

fn log_fit(label: String, result: &FitResult, cfg: &SviConfig) -> FitLog {
    FitLog {
        label,
        iterations: result.iterations,
        stop_reason: result.stop_reason,
        trace_converged: converged(&result.trace, cfg.window, cfg.tol),
        max_iter: cfg.max_iter,
    }
}

fn single_thread<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("thread pool")
        .install(f)
}

fn dyad_pcc(data: &SyntheticDataset, result: &FitResult) -> f64 {
    let theta = posterior_mean_logodds(&result.state, &result.basis, &data.covariates, data.network.times()).unwrap();
    let n = data.network.n();
    let (mut est, mut truth) = (Vec::new(), Vec::new());
    for (hat, t0) in theta.iter().zip(&data.truth_theta) {
        for i in 0..n {
            for j in i + 1..n {
                est.push(logistic(hat[(i, j)]));
                truth.push(logistic(t0[(i, j)]));
            }
        }
    }
    pcc(&est, &truth).unwrap()
}

fn criterion_1(fits: &mut Vec<FitLog>) -> Verdict {
    let mut pccs = Vec::new();
    let mut slowest: f64 = 0.0;
    for seed in 1..=10u64 {
        let data = generate(&SimConfig {
            n: 100,
            m: 10,
            density: 0.2,
            seed,
            ..SimConfig::default()
        })
        .unwrap();
        let cfg = SviConfig {
            d: 6,
            alpha: 0.95,
            seed,
            ..SviConfig::default()
        };
        let start = Instant::now();
        let result = single_thread(|| fit(&data.network, &data.covariates, &cfg)).unwrap();
        slowest = slowest.max(start.elapsed().as_secs_f64());
        pccs.push(dyad_pcc(&data, &result));
        fits.push(log_fit(format!("simulation seed {seed}"), &result, &cfg));
    }
    let mean = pccs.iter().sum::<f64>() / pccs.len() as f64;
    verdict(
        "1 simulation replication",
        mean >= 0.93 && slowest <= 120.0,
        format!("mean PCC {mean:.4} (need >= 0.93), slowest single-threaded fit {slowest:.2} s (limit 120 s)"),
    )
}

fn criterion_2(fits: &mut Vec<FitLog>) -> Verdict {
    let mut means = Vec::new();
    for n in [100usize, 200] {
        let mut errors = Vec::new();
        for seed in 1..=5u64 {
            let data = generate(&SimConfig {
                n,
                m: 100,
                density: 0.2,
                seed: 100 + seed,
                ..SimConfig::default()
            })
            .unwrap();
            let cfg = SviConfig {
                seed,
                ..SviConfig::default()
            };
            let result = fit(&data.network, &data.covariates, &cfg).unwrap();
            let theta =
                posterior_mean_logodds(&result.state, &result.basis, &data.covariates, data.network.times()).unwrap();
            errors.push(rmse_logodds(&theta, &data.truth_theta).unwrap());
            fits.push(log_fit(format!("decay n={n} seed {seed}"), &result, &cfg));
        }
        means.push(errors.iter().sum::<f64>() / errors.len() as f64);
    }
    verdict(
        "2 error decay",
        means[1] < means[0],
        format!("mean rmse_logodds n=100: {:.4}, n=200: {:.4}", means[0], means[1]),
    )
}

fn criterion_3() -> Verdict {
    let (n, m_count) = (12usize, 4usize);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut edges = Vec::new();
    for m in 0..m_count {
        // a ring guarantees every node a neighbor; extra edges at random
        for i in 0..n {
            edges.push((m, i.min((i + 1) % n), i.max((i + 1) % n)));
        }
        for i in 0..n {
            for j in i + 2..n {
                if rng.random::<f64>() < 0.2 {
                    edges.push((m, i, j));
                }
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    let times: Vec<f64> = (0..m_count).map(|m| m as f64 / 3.0).collect();
    let net = DynamicNetwork::from_edges(n, &times, &edges, false).unwrap();
    let mut table = vec![0.0; m_count * n * n];
    for m in 0..m_count {
        for i in 0..n {
            for j in i..n {
                let v = rng.random_range(0.5..1.5);
                table[(m * n + i) * n + j] = v;
                table[(m * n + j) * n + i] = v;
            }
        }
    }
    let h = |m: usize, i: usize, j: usize| table[(m * n + i) * n + j];
    let exact: Vec<f64> = (0..n)
        .map(|i| (0..m_count).map(|m| (0..n).filter(|&j| j != i).map(|j| h(m, i, j)).sum::<f64>()).sum())
        .collect();
    let cfg = SviConfig::default();
    let seeds = SeedTree::new(11);
    let draws = 20_000;
    let mut acc = vec![0.0; n];
    for s in 0..draws {
        let mb = sample_minibatch(&net, &cfg, &seeds, s);
        let (per_node, _) = unbiased_sum(&net, &mb, h);
        for (a, v) in acc.iter_mut().zip(per_node) {
            *a += v;
        }
    }
    let worst = acc
        .iter()
        .zip(&exact)
        .map(|(a, e)| (a / draws as f64 - e).abs() / e)
        .fold(0.0, f64::max);
    verdict(
        "3 subsampling unbiasedness",
        worst < 0.01,
        format!("largest relative gap of the Monte Carlo mean over {draws} minibatches: {worst:.5} (need < 0.01)"),
    )
}

fn criterion_4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let times = [0.0, 0.37, 1.0];
    let (net, cov) = random_network(6, &times, false, &mut rng);
    let basis = BasisSpec::new(0, 3).unwrap();
    let prior = PriorConfig {
        orders: vec![1, 2],
        ..PriorConfig::default()
    };
    let problem = Problem::new(&net, &cov, basis.clone(), prior.clone()).unwrap();
    let mut state = random_state(6, 2, &basis, &prior, cov.dim(), &mut rng);
    let alpha = 0.95;
    let oracle = cavi_step(&net, &cov, &basis, &prior, &state, alpha);
    svi_step(&problem, &mut state, &Minibatch::exhaustive(&net), alpha, 1.0).unwrap();

    let mut worst: f64 = 0.0;
    for i in 0..6 {
        for h in 0..2 {
            let block = state.traj(i, h);
            worst = worst.max(rel_gap(block.lambda().iter(), oracle.traj_lambda[i * 2 + h].iter()));
            worst = worst.max(rel_gap(block.precision().iter(), oracle.traj_precision[i * 2 + h].iter()));
        }
    }
    for k in 0..cov.dim() {
        let block = state.coef(k);
        worst = worst.max(rel_gap(block.lambda().iter(), oracle.coef_lambda[k].iter()));
        worst = worst.max(rel_gap(block.precision().iter(), oracle.coef_precision[k].iter()));
    }
    let b_traj: Vec<f64> = state.sigma_traj().iter().map(|f| f.b).collect();
    let b_coef: Vec<f64> = state.sigma_coef().iter().map(|f| f.b).collect();
    let shape: Vec<f64> = state.mgp().iter().map(|g| g.shape).collect();
    let rate: Vec<f64> = state.mgp().iter().map(|g| g.rate).collect();
    worst = worst
        .max(rel_gap(&b_traj, &oracle.b_traj))
        .max(rel_gap(&b_coef, &oracle.b_coef))
        .max(rel_gap(&shape, &oracle.mgp_shape))
        .max(rel_gap(&rate, &oracle.mgp_rate));
    verdict(
        "4 coordinate-ascent equivalence",
        worst < 1e-10,
        format!("largest relative gap to the brute-force update (n=6, M=3, d=2, l=4): {worst:.2e} (need < 1e-10)"),
    )
}

fn criterion_5() -> Verdict {
    let grid_ab = [0.5, 1.0, 2.0, 10.0, 100.0];
    let grid_p = [-40.0, -10.0, -1.0, 0.5, 3.0];
    let mut worst: f64 = 0.0;
    for &a in &grid_ab {
        for &b in &grid_ab {
            for &p in &grid_p {
                let got = gig_expect_inv(a, b, p).unwrap();
                let want = gig_inv_moment_quadrature(a, b, p);
                worst = worst.max((got - want).abs() / want);
            }
        }
    }
    let alpha = 0.95;
    let limit_gap = (pg_mean(alpha, 1e-9) - alpha / 4.0).abs().max((pg_mean(alpha, 0.0) - alpha / 4.0).abs());
    let mut parity: f64 = 0.0;
    for k in 0..=400 {
        let c = 10f64.powf(-8.0 + k as f64 * 0.025);
        parity = parity.max((pg_mean(alpha, c) - pg_mean(alpha, -c)).abs());
    }
    verdict(
        "5 special functions",
        worst < 1e-6 && limit_gap < 1e-12 && parity < 1e-14,
        format!(
            "GIG E[1/x] worst relative error on 125 points {worst:.2e} (need < 1e-6); PG mean limit gap {limit_gap:.1e}; parity gap {parity:.1e}"
        ),
    )
}

fn criterion_6() -> Verdict {
    let mut worst: f64 = 0.0;
    for (k, q) in [(0usize, 3usize), (4, 3), (7, 3), (5, 2), (3, 1)] {
        let spec = BasisSpec::new(k, q).unwrap();
        for s in 0..10_000 {
            let t = s as f64 / 9_999.0;
            worst = worst.max((spec.eval(t).unwrap().sum() - 1.0).abs());
        }
    }
    let mid = BasisSpec::new(0, 3).unwrap().eval(0.5).unwrap();
    let want = DVector::from_vec(vec![0.125, 0.375, 0.375, 0.125]);
    let mid_gap = (mid - want).amax();
    verdict(
        "6 spline correctness",
        worst < 1e-12 && mid_gap < 1e-15,
        format!("partition-of-unity gap {worst:.1e} (need < 1e-12); cubic midpoint gap {mid_gap:.1e} (need < 1e-15)"),
    )
}

fn criterion_7() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let tau2 = 1.0;
    let mut worst: f64 = 0.0;
    for dim in [4usize, 8] {
        let spec = BasisSpec::new(dim - 4, 3).unwrap();
        for _ in 0..100 {
            let (s, t) = (rng.random::<f64>(), rng.random::<f64>());
            let sigma2 = rng.random_range(0.01..5.0);
            let cov = precision_u(sigma2, tau2, dim).unwrap().try_inverse().unwrap();
            let (bs, bt) = (spec.eval(s).unwrap(), spec.eval(t).unwrap());
            let lhs = (bs.transpose() * &cov * &bt)[0];
            let mut vb = 0.0;
            for g in 0..dim {
                for h in 0..dim {
                    vb += bs[g] * bt[h] * g.min(h) as f64;
                }
            }
            let closed = induced_traj_cov(1.0, sigma2, tau2, &spec, s, t).unwrap();
            worst = worst.max((lhs - (sigma2 * vb + tau2)).abs()).max((lhs - closed).abs());
        }
    }
    verdict(
        "7 prior covariance",
        worst < 1e-10,
        format!("largest gap over 200 random cases with l in {{4, 8}}: {worst:.1e} (need < 1e-10)"),
    )
}

fn criterion_8() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let d = [2usize, 3, 6][case % 3];
        let u = gaussian_matrix(30, d, &mut rng);
        let mut o = gaussian_matrix(d, d, &mut rng).qr().q();
        if case % 2 == 1 {
            o.column_mut(0).neg_mut();
        }
        let moved = &u * &o;
        let back = orthogonal_procrustes(&moved, &u).unwrap();
        worst = worst.max((moved * back - &u).norm());
    }
    verdict(
        "8 Procrustes recovery",
        worst < 1e-8,
        format!("largest Frobenius gap over 100 rotated/reflected cases: {worst:.1e} (need < 1e-8)"),
    )
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_dynlsm"))
        .args(args)
        .output()
        .expect("spawn dynlsm")
}

fn criterion_9_and_manifests(dir: &Path, fits: &mut Vec<FitLog>) -> Verdict {
    let sim = dir.join("sim");
    let s = sim.to_str().unwrap();
    let out = run_cli(&["simulate", "--n", "40", "--m", "6", "--density", "0.2", "--seed", "9", "--out-dir", s]);
    if !out.status.success() {
        return verdict("9 determinism", false, format!("simulate failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    let mut outputs = Vec::new();
    for (run, threads) in [(0, "1"), (1, "1"), (2, "4"), (3, "4")] {
        let fit_dir = dir.join(format!("fit{run}"));
        let out = run_cli(&[
            "--threads",
            threads,
            "fit",
            "--edges",
            &format!("{s}/edges.csv"),
            "--times",
            &format!("{s}/times.csv"),
            "--covariates",
            &format!("{s}/covariates.csv"),
            "--seed",
            "5",
            "--set",
            "d=3",
            "--out",
            fit_dir.to_str().unwrap(),
        ]);
        if !out.status.success() {
            return verdict("9 determinism", false, format!("fit failed: {}", String::from_utf8_lossy(&out.stderr)));
        }
        outputs.push(std::fs::read(fit_dir.join("trajectories.csv")).unwrap());
        let manifest = dynlsm::cli::Manifest::load(&fit_dir.join("manifest.txt")).unwrap();
        let iterations: usize = manifest.get("iterations").unwrap().parse().unwrap();
        let stop_reason = match manifest.get("stop_reason").unwrap() {
            "tol" => StopReason::Tolerance,
            _ => StopReason::MaxIterations,
        };
        let trace: Vec<f64> = std::fs::read_to_string(fit_dir.join("trace.csv"))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        let cfg = SviConfig::default();
        fits.push(FitLog {
            label: format!("cli run {run}"),
            iterations,
            stop_reason,
            trace_converged: converged(&trace, cfg.window, cfg.tol),
            max_iter: cfg.max_iter,
        });
    }
    let identical = outputs.windows(2).all(|w| w[0] == w[1]);
    verdict(
        "9 determinism",
        identical,
        format!(
            "trajectory CSVs from two runs at 1 thread and two at 4 threads are {}",
            if identical { "byte-identical" } else { "different" }
        ),
    )
}

fn criterion_10(fits: &[FitLog]) -> Verdict {
    let bad: Vec<&str> = fits
        .iter()
        .filter(|f| {
            let ok = match f.stop_reason {
                StopReason::Tolerance => f.trace_converged && f.iterations <= f.max_iter,
                StopReason::MaxIterations => f.iterations == f.max_iter,
            };
            !ok || f.max_iter > 250
        })
        .map(|f| f.label.as_str())
        .collect();
    let by_tol = fits.iter().filter(|f| f.stop_reason == StopReason::Tolerance).count();
    verdict(
        "10 convergence contract",
        bad.is_empty() && !fits.is_empty(),
        format!(
            "{} fits checked, {by_tol} stopped by tolerance, {} at the iteration cap; violations: {:?}",
            fits.len(),
            fits.len() - by_tol,
            bad
        ),
    )
}

fn large_ingestion_smoke(dir: &Path, fits: &mut Vec<FitLog>) -> Verdict {
    let (n, m) = (186usize, 259usize);
    let data = generate(&SimConfig {
        n,
        m,
        density: 0.05,
        seed: 2024,
        ..SimConfig::default()
    })
    .unwrap();
    let edges = dir.join("large_edges.csv");
    let times = dir.join("large_times.csv");
    let covs = dir.join("large_covariates.csv");
    data.network.save_csv(&edges, &times).unwrap();
    data.covariates.save_csv(&covs, false).unwrap();
    let start = Instant::now();
    let net = DynamicNetwork::load_csv(
        &edges,
        Some(&times),
        &LoadOptions {
            n: Some(n),
            m: Some(m),
            self_loops: false,
        },
    )
    .unwrap();
    let cov = CovariateSet::load_csv(&covs, n, m, false, false, true).unwrap();
    let cfg = SviConfig {
        seed: 1,
        ..SviConfig::default()
    };
    let result = fit(&net, &cov, &cfg).unwrap();
    let theta = posterior_mean_logodds(&result.state, &result.basis, &cov, net.times()).unwrap();
    let (mut scores, mut labels) = (Vec::new(), Vec::new());
    for (mi, th) in theta.iter().enumerate() {
        for i in 0..n {
            for j in i + 1..n {
                scores.push(th[(i, j)]);
                labels.push(net.has_edge(mi, i, j));
            }
        }
    }
    let value = auc(&scores, &labels).unwrap();
    fits.push(log_fit("large ingestion".into(), &result, &cfg));
    verdict(
        "large-scale ingestion smoke",
        value > 0.5 && value.is_finite(),
        format!(
            "n={n}, M={m}, {} dyad-snapshots, {} edges: fit in {:.1} s ({} iterations, {}), in-sample AUC {value:.4}",
            labels.len(),
            net.edge_list().len(),
            start.elapsed().as_secs_f64(),
            result.iterations,
            result.stop_reason
        ),
    )
}

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    let mut fits = Vec::new();
    let verdicts = vec![
        criterion_1(&mut fits),
        criterion_2(&mut fits),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9_and_manifests(dir.path(), &mut fits),
        large_ingestion_smoke(dir.path(), &mut fits),
    ];
    let contract = criterion_10(&fits);
    let failed: Vec<&Verdict> = verdicts.iter().chain(std::iter::once(&contract)).filter(|v| !v.pass).collect();
    println!(
        "acceptance: {} passed, {} failed",
        verdicts.len() + 1 - failed.len(),
        failed.len()
    );
    if !failed.is_empty() {
        for v in failed {
            eprintln!("failed [{}]: {}", v.id, v.detail);
        }
        std::process::exit(1);
    }
}
