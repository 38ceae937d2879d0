//! File-based `simulate`, `fit` and `eval` commands.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;

use crate::align::procrustes_align;
use crate::error::{Error, Result};
use crate::eval::{
    auc, coef_band, credible_band, logistic, pcc, posterior_mean_coef, posterior_mean_logodds, rmse_beta,
    rmse_logodds, rmse_traj, BandOptions, BandPoint, BandQuantity, TrajAlignment,
};
use crate::netdata::{load_times, CovariateSet, DynamicNetwork, LoadOptions};
use crate::simgen::{generate, SimConfig, Truth};
use crate::svi::{fit, Problem, SviConfig};
use crate::varstate::VariationalState;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "dynlsm", version, about = "Dynamic latent space models for binary networks")]
pub struct Cli {
    /// Worker threads (defaults to all cores); results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dynamic network with ground truth.
    Simulate(SimulateArgs),
    /// Fit the model to an edge list.
    Fit(FitArgs),
    /// Compute metrics and credible bands for a fit.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub density: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub gp_amplitude: f64,
    #[arg(long, default_value_t = 0.2)]
    pub gp_scale: f64,
    /// Redraw covariates at every snapshot instead of once per dyad.
    #[arg(long)]
    pub time_varying_covariates: bool,
    #[arg(long)]
    pub self_loops: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub edges: PathBuf,
    #[arg(long)]
    pub times: Option<PathBuf>,
    #[arg(long)]
    pub covariates: Option<PathBuf>,
    /// `key=value` tuning file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Node count when isolated trailing nodes are absent from the edge list.
    #[arg(long)]
    pub n: Option<usize>,
    /// Drop the implicit intercept covariate.
    #[arg(long)]
    pub no_intercept: bool,
    /// Covariate file may omit dyads (missing entries are zero).
    #[arg(long)]
    pub sparse_covariates: bool,
    /// Extra `key=value` overrides applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Output directory of a previous `fit`.
    #[arg(long)]
    pub fit_dir: PathBuf,
    /// Ground-truth file written by `simulate`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Monte Carlo draws for degree bands.
    #[arg(long, default_value_t = crate::eval::DEFAULT_DRAWS)]
    pub draws: usize,
    /// Nodes whose posterior predictive degree band is written.
    #[arg(long = "degree-node")]
    pub degree_nodes: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub band_seed: u64,
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .try_init();
    let outcome = match cli.threads {
        Some(threads) => match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(|| dispatch(&cli.command)),
            Err(e) => Err(Error::invalid(format!("cannot build thread pool: {e}"))),
        },
        None => dispatch(&cli.command),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidArgument(_) => EXIT_USAGE,
                _ => EXIT_FAILURE,
            }
        }
    }
}

fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Eval(args) => cmd_eval(args),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let cfg = SimConfig {
        n: args.n,
        m: args.m,
        density: args.density,
        gp_amplitude: args.gp_amplitude,
        gp_scale: args.gp_scale,
        static_covariates: !args.time_varying_covariates,
        self_loops: args.self_loops,
        seed: args.seed,
        ..SimConfig::default()
    };
    cfg.validate()?;
    let data = generate(&cfg)?;
    create_dir(&args.out_dir)?;
    let dir = &args.out_dir;
    data.network.save_csv(&dir.join("edges.csv"), &dir.join("times.csv"))?;
    data.covariates.save_csv(&dir.join("covariates.csv"), cfg.self_loops)?;
    data.write_truth(&dir.join("truth.csv"))?;
    info!(
        "simulated {} nodes over {} snapshots with {} edges",
        cfg.n,
        cfg.m,
        data.network.edge_list().len()
    );
    Ok(())
}

/// Contents of `manifest.txt`: inputs, configuration and run summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub entries: BTreeMap<String, String>,
}

impl Manifest {
    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect();
        Manifest { entries }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.entries
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Format(format!("manifest lacks `{key}`")))
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.entries.get(key).filter(|v| !v.is_empty()).map(PathBuf::from)
    }
}

/// Absolute form of `path`, so the manifest works from any directory.
fn absolute(path: &Path) -> PathBuf {
    std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf())
}

struct Inputs {
    net: DynamicNetwork,
    covariates: CovariateSet,
}

fn load_inputs(
    edges: &Path,
    times: Option<&Path>,
    covariates: Option<&Path>,
    n: Option<usize>,
    self_loops: bool,
    intercept: bool,
    sparse: bool,
) -> Result<Inputs> {
    let m = times.map(|t| load_times(t).map(|v| v.len())).transpose()?;
    let net = DynamicNetwork::load_csv(edges, times, &LoadOptions { n, m, self_loops })?;
    let covariates = match covariates {
        Some(path) => CovariateSet::load_csv(path, net.n(), net.num_times(), self_loops, sparse, intercept)?,
        None => CovariateSet::empty(net.n(), intercept),
    };
    if covariates.dim() == 0 {
        return Err(Error::invalid("the model needs at least one covariate or the intercept"));
    }
    Ok(Inputs { net, covariates })
}

fn write_csv(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{header}").map_err(io)?;
    for row in rows {
        writeln!(w, "{row}").map_err(io)?;
    }
    w.flush().map_err(io)
}

fn write_band(path: &Path, band: &[BandPoint]) -> Result<()> {
    write_csv(
        path,
        "t,mean,lo,hi",
        band.iter().map(|b| format!("{},{},{},{}", b.t, b.mean, b.lo, b.hi)),
    )
}

pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => SviConfig::load(path)?,
        None => SviConfig::default(),
    };
    for kv in &args.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("override `{kv}` is not key=value")))?;
        cfg.set(k.trim(), v.trim()).map_err(Error::invalid)?;
    }
    cfg.seed = args.seed;
    cfg.validate()?;
    let inputs = load_inputs(
        &args.edges,
        args.times.as_deref(),
        args.covariates.as_deref(),
        args.n,
        cfg.self_loops,
        !args.no_intercept,
        args.sparse_covariates,
    )?;
    let result = fit(&inputs.net, &inputs.covariates, &cfg)?;
    create_dir(&args.out)?;
    let out = &args.out;
    result.state.save(&out.join("state.bin"))?;

    let (n, d) = (result.state.n(), result.state.d());
    write_csv(
        &out.join("trajectories.csv"),
        "m,i,h,value",
        result.aligned.iter().enumerate().flat_map(|(m, u)| {
            (0..n).flat_map(move |i| (0..d).map(move |h| format!("{m},{i},{h},{}", u[(i, h)])))
        }),
    )?;
    let times = inputs.net.times();
    let mut coef_rows = Vec::new();
    for k in 0..result.state.p() {
        let band = coef_band(&result.state, &result.basis, k, times, 0.95)?;
        for (m, b) in band.iter().enumerate() {
            coef_rows.push(format!("{m},{k},{},{},{}", b.mean, b.lo, b.hi));
        }
    }
    write_csv(&out.join("coefficients.csv"), "m,k,mean,lo,hi", coef_rows.into_iter())?;
    write_csv(
        &out.join("trace.csv"),
        "iteration,loglik",
        result.trace.iter().enumerate().map(|(s, v)| format!("{s},{v}")),
    )?;

    let show = |p: &Option<PathBuf>| p.as_deref().map(absolute).map(|p| p.display().to_string()).unwrap_or_default();
    let mut manifest = String::new();
    manifest.push_str(&format!("edges={}\n", absolute(&args.edges).display()));
    manifest.push_str(&format!("times={}\n", show(&args.times)));
    manifest.push_str(&format!("covariates={}\n", show(&args.covariates)));
    manifest.push_str(&format!("n={}\n", inputs.net.n()));
    manifest.push_str(&format!("intercept={}\n", !args.no_intercept));
    manifest.push_str(&format!("sparse_covariates={}\n", args.sparse_covariates));
    manifest.push_str(&cfg.to_text());
    manifest.push_str(&format!("basis_dim={}\n", result.basis.dim()));
    manifest.push_str(&format!("iterations={}\n", result.iterations));
    manifest.push_str(&format!("stop_reason={}\n", result.stop_reason));
    manifest.push_str(&format!("wall_time_s={:.3}\n", result.wall_time.as_secs_f64()));
    let path = out.join("manifest.txt");
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    println!(
        "fit finished after {} iterations ({}) in {:.2} s",
        result.iterations,
        result.stop_reason,
        result.wall_time.as_secs_f64()
    );
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let manifest = Manifest::load(&args.fit_dir.join("manifest.txt"))?;
    let state = VariationalState::load(&args.fit_dir.join("state.bin"))?;
    let defaults = SviConfig::default().to_text();
    let cfg_text: String = defaults
        .lines()
        .filter_map(|l| l.split_once('='))
        .filter_map(|(k, _)| manifest.entries.get(k).map(|v| format!("{k}={v}\n")))
        .collect();
    let cfg = SviConfig::parse(&cfg_text)?;
    let parse_n = manifest
        .get("n")?
        .parse::<usize>()
        .map_err(|_| Error::Format("manifest `n` is not an integer".into()))?;
    let edges = manifest.path("edges").ok_or_else(|| Error::Format("manifest lacks edges".into()))?;
    let inputs = load_inputs(
        &edges,
        manifest.path("times").as_deref(),
        manifest.path("covariates").as_deref(),
        Some(parse_n),
        cfg.self_loops,
        manifest.get("intercept")? == "true",
        manifest.get("sparse_covariates")? == "true",
    )?;
    let problem = Problem::from_config(&inputs.net, &inputs.covariates, &cfg)?;
    if state.n() != inputs.net.n() || state.p() != inputs.covariates.dim() || state.dim() != problem.basis.dim() {
        return Err(Error::Dimension("fitted state does not match its recorded inputs".into()));
    }
    let spec = &problem.basis;
    let times = inputs.net.times();
    let theta_hat = posterior_mean_logodds(&state, spec, &inputs.covariates, times)?;

    let mut metrics: Vec<(&str, f64)> = Vec::new();
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (m, theta) in theta_hat.iter().enumerate() {
        for i in 0..state.n() {
            for j in i..state.n() {
                if inputs.net.admissible(i, j) {
                    scores.push(theta[(i, j)]);
                    labels.push(inputs.net.has_edge(m, i, j));
                }
            }
        }
    }
    metrics.push(("auc", auc(&scores, &labels)?));

    if let Some(truth_path) = &args.truth {
        let truth = Truth::load(truth_path)?;
        if truth.theta.len() != times.len() || truth.theta.iter().any(|t| t.nrows() != state.n()) {
            return Err(Error::Dimension(format!(
                "truth covers {} snapshots of {} nodes, fit has {} of {}",
                truth.theta.len(),
                truth.theta.first().map_or(0, |t| t.nrows()),
                times.len(),
                state.n()
            )));
        }
        metrics.push(("rmse_logodds", rmse_logodds(&theta_hat, &truth.theta)?));
        let means = times
            .iter()
            .map(|&t| state.traj_means_at(spec, t))
            .collect::<Result<Vec<_>>>()?;
        let aligned = procrustes_align(&means)?.aligned;
        let d_eval = truth.u.first().map_or(0, |u| u.ncols());
        metrics.push(("rmse_traj", rmse_traj(&aligned, &truth.u, d_eval, TrajAlignment::Shared)?));
        metrics.push(("rmse_beta", rmse_beta(&posterior_mean_coef(&state, spec, times)?, &truth.beta)?));
        let (mut est, mut tru) = (Vec::new(), Vec::new());
        for (hat, t0) in theta_hat.iter().zip(&truth.theta) {
            for i in 0..state.n() {
                for j in i + 1..state.n() {
                    est.push(logistic(hat[(i, j)]));
                    tru.push(logistic(t0[(i, j)]));
                }
            }
        }
        metrics.push(("pcc", pcc(&est, &tru)?));
    }

    create_dir(&args.out)?;
    write_csv(
        &args.out.join("metrics.csv"),
        "metric,value",
        metrics.iter().map(|(k, v)| format!("{k},{v}")),
    )?;
    for (k, v) in &metrics {
        println!("{k}={v}");
    }
    let grid: Vec<f64> = (0..=100).map(|g| g as f64 / 100.0).collect();
    for k in 0..state.p() {
        let band = coef_band(&state, spec, k, &grid, args.level)?;
        write_band(&args.out.join(format!("band_beta_{k}.csv")), &band)?;
    }
    let snapshots: Vec<usize> = (0..times.len()).collect();
    for &i in &args.degree_nodes {
        let opts = BandOptions {
            level: args.level,
            draws: args.draws,
            seed: args.band_seed,
        };
        let band = credible_band(
            &state,
            spec,
            &inputs.covariates,
            BandQuantity::Degree(i),
            times,
            &snapshots,
            &opts,
        )?;
        write_band(&args.out.join(format!("band_degree_{i}.csv")), &band)?;
    }
    Ok(())
}
