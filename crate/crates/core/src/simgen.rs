//! Synthetic dynamic networks with known latent trajectories.
//!
//! Latent positions are anchor points plus squared-exponential Gaussian
//! process perturbations; two dyadic covariates have GP-perturbed constant
//! effects and a per-snapshot intercept fixes the expected density.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::netdata::{csv_error, equally_spaced_times, CovariateSet, DynamicNetwork};
use crate::rng::{Purpose, SeedTree};

/// Generator settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub m: usize,
    /// Target expected density of every snapshot.
    pub density: f64,
    /// GP standard deviation `a` and length-scale parameter `b`.
    pub gp_amplitude: f64,
    pub gp_scale: f64,
    /// Mixture anchors for the latent positions, chosen uniformly.
    pub anchors: Vec<[f64; 2]>,
    /// Constant parts of the two covariate effects.
    pub coef_anchors: [f64; 2],
    /// Draw covariates once per dyad (true) or afresh at every snapshot.
    pub static_covariates: bool,
    pub self_loops: bool,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n: 100,
            m: 10,
            density: 0.2,
            gp_amplitude: 0.5,
            gp_scale: 0.2,
            anchors: vec![[1.5, 0.0], [-1.5, 0.0], [0.0, 1.0]],
            coef_anchors: [1.0, -1.0],
            static_covariates: true,
            self_loops: false,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.m == 0 {
            return Err(Error::invalid("simulation needs n >= 2 and M >= 1"));
        }
        if !(self.density > 0.0 && self.density < 1.0) {
            return Err(Error::invalid(format!("density must lie in (0, 1), got {}", self.density)));
        }
        if !(self.gp_amplitude >= 0.0) || !(self.gp_scale > 0.0) {
            return Err(Error::invalid("GP amplitude must be nonnegative and scale positive"));
        }
        if self.anchors.is_empty() {
            return Err(Error::invalid("at least one anchor is required"));
        }
        Ok(())
    }
}

/// Cholesky factor of the GP covariance on a fixed time grid.
#[derive(Debug, Clone)]
pub struct GpSampler {
    factor: Option<DMatrix<f64>>,
    len: usize,
}

impl GpSampler {
    /// Covariance `a² exp(−(t − t')² / (2b))` plus a diagonal jitter that
    /// starts at 1e-10 and grows tenfold up to 1e-6 if needed.
    pub fn new(times: &[f64], a: f64, b: f64) -> Result<Self> {
        let len = times.len();
        if len == 0 {
            return Err(Error::invalid("GP needs at least one time point"));
        }
        if a == 0.0 {
            return Ok(GpSampler { factor: None, len });
        }
        let cov = DMatrix::from_fn(len, len, |r, c| {
            let dt = times[r] - times[c];
            a * a * (-(dt * dt) / (2.0 * b)).exp()
        });
        let mut jitter = 1e-10;
        while jitter <= 1e-6 * (1.0 + 1e-9) {
            let shifted = &cov + DMatrix::identity(len, len) * jitter;
            if let Some(chol) = shifted.cholesky() {
                return Ok(GpSampler {
                    factor: Some(chol.l()),
                    len,
                });
            }
            jitter *= 10.0;
        }
        Err(Error::numerical("GP covariance not positive definite after jitter"))
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.len, |_, _| StandardNormal.sample(rng));
        match &self.factor {
            Some(l) => l * z,
            None => DVector::zeros(self.len),
        }
    }
}

/// One zero-mean GP path on `times`.
pub fn sample_gp<R: Rng>(times: &[f64], a: f64, b: f64, rng: &mut R) -> Result<DVector<f64>> {
    Ok(GpSampler::new(times, a, b)?.draw(rng))
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Intercept `c` with `mean_dyads logistic(c + rest) = target`, by bisection
/// on `[−30, 30]`.
pub fn calibrate_intercept(target: f64, rest: &[f64]) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::invalid(format!("target density {target} outside (0, 1)")));
    }
    if rest.is_empty() {
        return Err(Error::invalid("no dyads to calibrate"));
    }
    let mean = |c: f64| rest.iter().map(|r| logistic(c + r)).sum::<f64>() / rest.len() as f64;
    let (mut lo, mut hi) = (-30.0, 30.0);
    if mean(lo) > target || mean(hi) < target {
        return Err(Error::numerical("intercept bracket does not contain the target density"));
    }
    let mut mid = 0.0;
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let gap = mean(mid) - target;
        if gap.abs() < 1e-10 * 1e-2 || hi - lo < 1e-15 {
            break;
        }
        if gap < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

/// Mixture component of each of `count` nodes, uniform over `anchors`.
pub fn sample_anchor_labels<R: Rng>(count: usize, anchors: usize, rng: &mut R) -> Vec<usize> {
    (0..count).map(|_| rng.random_range(0..anchors)).collect()
}

/// Generated network with its ground truth at every snapshot.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub network: DynamicNetwork,
    pub covariates: CovariateSet,
    /// `n × 2` latent positions per snapshot.
    pub truth_u: Vec<DMatrix<f64>>,
    /// Coefficients (intercept first) per snapshot.
    pub truth_beta: Vec<DVector<f64>>,
    /// `n × n` log-odds per snapshot.
    pub truth_theta: Vec<DMatrix<f64>>,
}

const LATENT_DIM: usize = 2;
const COVARIATES: usize = 2;

/// Per-snapshot draw: coefficient values, log-odds and edges.
type Snapshot = (DVector<f64>, DMatrix<f64>, Vec<(usize, usize, usize)>);

/// Draw a dataset following the configured protocol.
pub fn generate(cfg: &SimConfig) -> Result<SyntheticDataset> {
    cfg.validate()?;
    let (n, m_count) = (cfg.n, cfg.m);
    let times = equally_spaced_times(m_count);
    let seeds = SeedTree::new(cfg.seed);
    let gp = GpSampler::new(&times, cfg.gp_amplitude, cfg.gp_scale)?;

    let anchor_of = sample_anchor_labels(n, cfg.anchors.len(), &mut seeds.stream(Purpose::Simulation, 0, 0));
    // paths[i] is M × 2
    let paths: Vec<DMatrix<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeds.stream(Purpose::Simulation, 1, i as u64);
            let mut path = DMatrix::zeros(m_count, LATENT_DIM);
            for h in 0..LATENT_DIM {
                let draw = gp.draw(&mut rng);
                for m in 0..m_count {
                    path[(m, h)] = cfg.anchors[anchor_of[i]][h] + draw[m];
                }
            }
            path
        })
        .collect();
    let truth_u: Vec<DMatrix<f64>> = (0..m_count)
        .map(|m| DMatrix::from_fn(n, LATENT_DIM, |i, h| paths[i][(m, h)]))
        .collect();

    let mut coef_rng = seeds.stream(Purpose::Simulation, 2, 0);
    let coef_paths: Vec<DVector<f64>> = (0..COVARIATES)
        .map(|k| gp.draw(&mut coef_rng).add_scalar(cfg.coef_anchors[k]))
        .collect();

    let draw_layer = |rng: &mut ChaCha8Rng| -> Vec<DMatrix<f64>> {
        (0..COVARIATES)
            .map(|_| {
                let mut x = DMatrix::zeros(n, n);
                for i in 0..n {
                    let j0 = if cfg.self_loops { i } else { i + 1 };
                    for j in j0..n {
                        let v: f64 = StandardNormal.sample(rng);
                        x[(i, j)] = v;
                        x[(j, i)] = v;
                    }
                }
                x
            })
            .collect()
    };
    let layers: Vec<Vec<DMatrix<f64>>> = if cfg.static_covariates {
        vec![draw_layer(&mut seeds.stream(Purpose::Simulation, 3, 0))]
    } else {
        (0..m_count)
            .map(|m| draw_layer(&mut seeds.stream(Purpose::Simulation, 3, m as u64)))
            .collect()
    };
    let covariates = if cfg.static_covariates {
        CovariateSet::from_static(n, &layers[0], true)?
    } else {
        CovariateSet::from_time_varying(n, &layers, true)?
    };

    let per_time: Vec<Snapshot> = (0..m_count)
        .into_par_iter()
        .map(|m| -> Result<_> {
            let x = &layers[if cfg.static_covariates { 0 } else { m }];
            let u = &truth_u[m];
            let mut rest = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let mut v = u.row(i).dot(&u.row(j));
                    for k in 0..COVARIATES {
                        v += coef_paths[k][m] * x[k][(i, j)];
                    }
                    rest[(i, j)] = v;
                }
            }
            let dyads: Vec<f64> = (0..n)
                .flat_map(|i| {
                    let j0 = if cfg.self_loops { i } else { i + 1 };
                    (j0..n).map(move |j| (i, j))
                })
                .map(|(i, j)| rest[(i, j)])
                .collect();
            let intercept = calibrate_intercept(cfg.density, &dyads)?;
            let theta = rest.add_scalar(intercept);
            let beta = DVector::from_vec(vec![intercept, coef_paths[0][m], coef_paths[1][m]]);
            let mut rng = seeds.stream(Purpose::Edges, m as u64, 0);
            let mut edges = Vec::new();
            for i in 0..n {
                let j0 = if cfg.self_loops { i } else { i + 1 };
                for j in j0..n {
                    if rng.random::<f64>() < logistic(theta[(i, j)]) {
                        edges.push((m, i, j));
                    }
                }
            }
            Ok((beta, theta, edges))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut truth_beta = Vec::with_capacity(m_count);
    let mut truth_theta = Vec::with_capacity(m_count);
    let mut edges = Vec::new();
    for (beta, theta, e) in per_time {
        truth_beta.push(beta);
        truth_theta.push(theta);
        edges.extend(e);
    }
    let network = DynamicNetwork::from_edges(n, &times, &edges, cfg.self_loops)?;
    Ok(SyntheticDataset {
        network,
        covariates,
        truth_u,
        truth_beta,
        truth_theta,
    })
}

impl SyntheticDataset {
    /// Ground truth as `kind,m,i,j,value` rows: `u0` rows carry node `i` and
    /// coordinate `j`, `beta0` rows carry coefficient `i` with `j` empty, and
    /// `theta0` rows carry the dyad `i ≤ j`.
    pub fn write_truth(&self, path: &Path) -> Result<()> {
        let err = |e| csv_error(path, e);
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        w.write_record(["kind", "m", "i", "j", "value"]).map_err(err)?;
        for (m, u) in self.truth_u.iter().enumerate() {
            for i in 0..u.nrows() {
                for h in 0..u.ncols() {
                    w.write_record(["u0", &m.to_string(), &i.to_string(), &h.to_string(), &u[(i, h)].to_string()])
                        .map_err(err)?;
                }
            }
        }
        for (m, beta) in self.truth_beta.iter().enumerate() {
            for (k, v) in beta.iter().enumerate() {
                w.write_record(["beta0", &m.to_string(), &k.to_string(), "", &v.to_string()])
                    .map_err(err)?;
            }
        }
        let diag = self.network.self_loops();
        for (m, theta) in self.truth_theta.iter().enumerate() {
            let n = theta.nrows();
            for i in 0..n {
                let j0 = if diag { i } else { i + 1 };
                for j in j0..n {
                    w.write_record(["theta0", &m.to_string(), &i.to_string(), &j.to_string(), &theta[(i, j)].to_string()])
                        .map_err(err)?;
                }
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Ground truth read back from a truth file.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub u: Vec<DMatrix<f64>>,
    pub beta: Vec<DVector<f64>>,
    /// Symmetric log-odds; entries not present in the file are zero.
    pub theta: Vec<DMatrix<f64>>,
}

impl Truth {
    pub fn load(path: &Path) -> Result<Self> {
        let parse_err = |line: u64, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let mut rows: Vec<(String, usize, usize, Option<usize>, f64)> = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            let field = |c: usize| rec.get(c).unwrap_or("");
            let idx = |c: usize| {
                field(c)
                    .parse::<usize>()
                    .map_err(|_| parse_err(line, format!("bad index `{}`", field(c))))
            };
            let value = field(4)
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("bad value `{}`", field(4))))?;
            let j = if field(3).is_empty() { None } else { Some(idx(3)?) };
            rows.push((field(0).to_string(), idx(1)?, idx(2)?, j, value));
        }
        let m_count = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        let of_kind = |k: &'static str| rows.iter().filter(move |r| r.0 == k);
        let n = of_kind("u0")
            .map(|r| r.2 + 1)
            .chain(of_kind("theta0").map(|r| r.2.max(r.3.unwrap_or(0)) + 1))
            .max()
            .unwrap_or(0);
        let d = of_kind("u0").map(|r| r.3.unwrap_or(0) + 1).max().unwrap_or(0);
        let p = of_kind("beta0").map(|r| r.2 + 1).max().unwrap_or(0);
        let mut u = vec![DMatrix::zeros(n, d); m_count];
        let mut beta = vec![DVector::zeros(p); m_count];
        let mut theta = vec![DMatrix::zeros(n, n); m_count];
        for (kind, m, i, j, v) in &rows {
            match kind.as_str() {
                "u0" => u[*m][(*i, j.unwrap_or(0))] = *v,
                "beta0" => beta[*m][*i] = *v,
                "theta0" => {
                    let j = j.ok_or_else(|| parse_err(0, "theta0 row without j".into()))?;
                    theta[*m][(*i, j)] = *v;
                    theta[*m][(j, *i)] = *v;
                }
                other => return Err(parse_err(0, format!("unknown truth kind `{other}`"))),
            }
        }
        Ok(Truth { u, beta, theta })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn intercept_calibration() {
        let zeros = vec![0.0; 50];
        assert!(calibrate_intercept(0.5, &zeros).unwrap().abs() < 1e-9);
        let c = calibrate_intercept(0.2, &zeros).unwrap();
        assert!((c - (0.2f64 / 0.8).ln()).abs() < 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rest: Vec<f64> = (0..500).map(|_| 2.0 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)).collect();
        let c = calibrate_intercept(0.13, &rest).unwrap();
        let mean = rest.iter().map(|r| logistic(c + r)).sum::<f64>() / rest.len() as f64;
        assert!((mean - 0.13).abs() < 1e-10);
        assert!(calibrate_intercept(1.0, &rest).is_err());
    }

    #[test]
    fn gp_marginal_and_lag_covariance() {
        let times = [0.0, 0.2];
        let gp = GpSampler::new(&times, 0.5, 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws = 50_000;
        let (mut var, mut cov) = (0.0, 0.0);
        let mut sq_var = 0.0;
        for _ in 0..draws {
            let z = gp.draw(&mut rng);
            var += z[0] * z[0];
            sq_var += z[0].powi(4);
            cov += z[0] * z[1];
        }
        let n = draws as f64;
        let (var, cov) = (var / n, cov / n);
        let se_var = ((sq_var / n - var * var) / n).sqrt();
        assert!((var - 0.25).abs() < 3.0 * se_var, "var {var}");
        let want = 0.25 * (-0.1f64).exp();
        assert!((want - 0.226_209).abs() < 1e-5);
        // var(z0 z1) = c0² + c01² for a bivariate normal
        let se_cov = ((0.25f64 * 0.25 + want * want) / n).sqrt();
        assert!((cov - want).abs() < 3.0 * se_cov, "cov {cov}");
    }

    #[test]
    fn anchor_proportions() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let labels = sample_anchor_labels(10_000, 3, &mut rng);
        let se = (1.0 / 3.0 * 2.0 / 3.0 / 10_000.0f64).sqrt();
        for a in 0..3 {
            let freq = labels.iter().filter(|&&l| l == a).count() as f64 / 10_000.0;
            assert!((freq - 1.0 / 3.0).abs() < 3.0 * se);
        }
    }

    #[test]
    fn realized_density_near_target() {
        let cfg = SimConfig {
            n: 100,
            m: 10,
            seed: 9,
            ..SimConfig::default()
        };
        let data = generate(&cfg).unwrap();
        let dyads = (100 * 99 / 2 * 10) as f64;
        let edges: usize = (0..10).map(|m| data.network.num_edges(m)).sum();
        let realized = edges as f64 / dyads;
        let se = (0.2 * 0.8 / dyads).sqrt();
        assert!((realized - 0.2).abs() < 3.0 * se, "density {realized}");
        for m in 0..10 {
            let x = data.network.adjacency(m);
            assert_eq!(x, x.transpose());
        }
    }

    #[test]
    fn zero_amplitude_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let path = sample_gp(&[0.0, 0.5, 1.0], 0.0, 0.2, &mut rng).unwrap();
        assert!(path.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_truth_without_perturbations() {
        let cfg = SimConfig {
            n: 20,
            m: 4,
            gp_amplitude: 0.0,
            coef_anchors: [0.0, 0.0],
            seed: 5,
            ..SimConfig::default()
        };
        let data = generate(&cfg).unwrap();
        for m in 1..4 {
            assert!((&data.truth_theta[m] - &data.truth_theta[0]).abs().max() < 1e-9);
        }
    }

    #[test]
    fn truth_consistency_and_determinism() {
        let cfg = SimConfig {
            n: 25,
            m: 5,
            seed: 11,
            ..SimConfig::default()
        };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.network, b.network);
        assert_eq!(a.truth_theta, b.truth_theta);
        let mut x = vec![0.0; 3];
        for m in 0..5 {
            for i in 0..25 {
                for j in 0..25 {
                    a.covariates.fill(m, i, j, &mut x);
                    let beta = &a.truth_beta[m];
                    let lin: f64 = (0..3).map(|k| beta[k] * x[k]).sum();
                    let want = lin + a.truth_u[m].row(i).dot(&a.truth_u[m].row(j));
                    if i != j {
                        assert!((a.truth_theta[m][(i, j)] - want).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn truth_file_round_trip() {
        let cfg = SimConfig {
            n: 8,
            m: 3,
            seed: 2,
            ..SimConfig::default()
        };
        let data = generate(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("truth.csv");
        data.write_truth(&path).unwrap();
        let truth = Truth::load(&path).unwrap();
        assert_eq!(truth.u, data.truth_u);
        assert_eq!(truth.beta, data.truth_beta);
        for m in 0..3 {
            for i in 0..8 {
                for j in 0..8 {
                    if i != j {
                        assert_eq!(truth.theta[m][(i, j)], data.truth_theta[m][(i, j)]);
                    }
                }
            }
        }
    }
}
