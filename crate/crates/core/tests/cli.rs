//! End-to-end runs of the command-line tool.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dynlsm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynlsm"))
        .args(args)
        .output()
        .expect("spawn dynlsm")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn simulate(dir: &Path, seed: &str) -> String {
    let sim = dir.join("sim");
    let s = sim.to_str().unwrap().to_owned();
    let out = dynlsm(&["simulate", "--n", "30", "--m", "5", "--density", "0.25", "--seed", seed, "--out-dir", &s]);
    assert!(out.status.success(), "{}", stderr(&out));
    s
}

fn fit(sim: &str, out: &Path, extra: &[&str]) -> Output {
    let (edges, times, covs) = (format!("{sim}/edges.csv"), format!("{sim}/times.csv"), format!("{sim}/covariates.csv"));
    let mut args = vec![
        "fit",
        "--edges",
        &edges,
        "--times",
        &times,
        "--covariates",
        &covs,
        "--seed",
        "3",
        "--set",
        "d=2",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    dynlsm(&args)
}

fn metrics(path: &Path) -> Vec<(String, f64)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let (k, v) = l.split_once(',').unwrap();
            (k.to_owned(), v.parse().unwrap())
        })
        .collect()
}

#[test]
fn simulate_fit_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), "4");
    for file in ["edges.csv", "times.csv", "covariates.csv", "truth.csv"] {
        assert!(Path::new(&sim).join(file).is_file(), "missing {file}");
    }
    let fit_dir = dir.path().join("fit");
    let out = fit(&sim, &fit_dir, &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    for file in ["state.bin", "trajectories.csv", "coefficients.csv", "trace.csv", "manifest.txt"] {
        assert!(fit_dir.join(file).is_file(), "missing {file}");
    }
    let coef = fs::read_to_string(fit_dir.join("coefficients.csv")).unwrap();
    assert_eq!(coef.lines().next().unwrap(), "m,k,mean,lo,hi");
    // 5 snapshots, intercept plus two covariates
    assert_eq!(coef.lines().count(), 1 + 5 * 3);

    let eval_dir = dir.path().join("eval");
    let truth = format!("{sim}/truth.csv");
    let out = dynlsm(&[
        "eval",
        "--fit-dir",
        fit_dir.to_str().unwrap(),
        "--truth",
        &truth,
        "--out",
        eval_dir.to_str().unwrap(),
        "--draws",
        "200",
        "--degree-node",
        "0",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let m = metrics(&eval_dir.join("metrics.csv"));
    let names: Vec<&str> = m.iter().map(|(k, _)| k.as_str()).collect();
    for name in ["auc", "rmse_logodds", "rmse_traj", "rmse_beta", "pcc"] {
        assert!(names.contains(&name), "missing metric {name}");
    }
    for (name, v) in &m {
        assert!(v.is_finite(), "{name} = {v}");
    }
    let auc = m.iter().find(|(k, _)| k == "auc").unwrap().1;
    assert!(auc > 0.5, "auc {auc}");
    for k in 0..3 {
        let band = fs::read_to_string(eval_dir.join(format!("band_beta_{k}.csv"))).unwrap();
        assert_eq!(band.lines().count(), 1 + 101);
    }
    let degree = fs::read_to_string(eval_dir.join("band_degree_0.csv")).unwrap();
    assert_eq!(degree.lines().count(), 1 + 5);
}

#[test]
fn eval_without_truth_reports_auc_only() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), "5");
    let fit_dir = dir.path().join("fit");
    assert!(fit(&sim, &fit_dir, &[]).status.success());
    let eval_dir = dir.path().join("eval");
    let out = dynlsm(&["eval", "--fit-dir", fit_dir.to_str().unwrap(), "--out", eval_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let m = metrics(&eval_dir.join("metrics.csv"));
    assert_eq!(m.len(), 1);
    assert_eq!(m[0].0, "auc");
}

#[test]
fn malformed_edge_file_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("edges.csv");
    fs::write(&edges, "m,i,j\n0,0,1\n0,2,x\n").unwrap();
    let out = dynlsm(&[
        "fit",
        "--edges",
        edges.to_str().unwrap(),
        "--seed",
        "1",
        "--out",
        dir.path().join("fit").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let msg = stderr(&out);
    assert!(msg.contains("line 3"), "{msg}");
}

#[test]
fn covariates_for_a_different_node_count_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), "6");
    let out = fit(&sim, &dir.path().join("fit"), &["--n", "45"]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), "7");
    // --seed is required
    let out = dynlsm(&["fit", "--edges", &format!("{sim}/edges.csv"), "--out", "unused"]);
    assert_eq!(out.status.code(), Some(2));
    let out = fit(&sim, &dir.path().join("fit"), &["--set", "alpha=1.5"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let out = fit(&sim, &dir.path().join("fit"), &["--set", "no_such_key=1"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let out = dynlsm(&["simulate", "--n", "1", "--m", "3", "--density", "0.2", "--seed", "1", "--out-dir", "unused"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn refitting_with_the_same_seed_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), "8");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(fit(&sim, &a, &[]).status.success());
    assert!(fit(&sim, &b, &["--threads", "3"]).status.success());
    for file in ["state.bin", "trajectories.csv", "coefficients.csv", "trace.csv"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
}
