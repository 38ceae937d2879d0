//! Error metrics against ground truth, predictive summaries and pointwise
//! credible bands from the variational posterior.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::align::orthogonal_procrustes;
use crate::basis::{BasisSpec, SparseBasis};
use crate::error::{Error, Result};
use crate::linalg::cholesky_jitter;
use crate::netdata::CovariateSet;
use crate::rng::{Purpose, SeedTree};
use crate::varstate::{GaussianBlock, VariationalState};

/// Minimum number of Monte Carlo draws accepted for a band.
pub const MIN_DRAWS: usize = 100;
pub const DEFAULT_DRAWS: usize = 2000;

fn check_lengths(what: &str, a: usize, b: usize) -> Result<()> {
    if a != b || a == 0 {
        return Err(Error::Dimension(format!("{what}: {a} estimates against {b} truths")));
    }
    Ok(())
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Root mean squared error over the off-diagonal dyads `i < j` of every snapshot.
pub fn rmse_logodds(est: &[DMatrix<f64>], truth: &[DMatrix<f64>]) -> Result<f64> {
    check_lengths("log-odds", est.len(), truth.len())?;
    let mut total = 0.0;
    let mut count = 0usize;
    for (e, t) in est.iter().zip(truth) {
        if e.shape() != t.shape() || e.nrows() != e.ncols() {
            return Err(Error::Dimension(format!(
                "log-odds matrices {:?} and {:?}",
                e.shape(),
                t.shape()
            )));
        }
        let n = e.nrows();
        for i in 0..n {
            for j in i + 1..n {
                total += (e[(i, j)] - t[(i, j)]).powi(2);
            }
        }
        count += n * (n - 1) / 2;
    }
    if count == 0 {
        return Err(Error::invalid("no dyads to compare"));
    }
    Ok((total / count as f64).sqrt())
}

/// How estimated positions are rotated onto the truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrajAlignment {
    /// One orthogonal matrix for all snapshots.
    #[default]
    Shared,
    /// A separate orthogonal matrix per snapshot.
    PerTime,
}

/// Trajectory RMSE after orthogonal alignment, using the first `d_eval`
/// estimated dimensions against truths of width `d_eval`.
pub fn rmse_traj(
    est: &[DMatrix<f64>],
    truth: &[DMatrix<f64>],
    d_eval: usize,
    alignment: TrajAlignment,
) -> Result<f64> {
    check_lengths("trajectories", est.len(), truth.len())?;
    let n = truth[0].nrows();
    for (e, t) in est.iter().zip(truth) {
        if t.ncols() != d_eval || e.ncols() < d_eval || e.nrows() != n || t.nrows() != n {
            return Err(Error::Dimension(format!(
                "cannot compare {:?} estimates with {:?} truths in {d_eval} dimensions",
                e.shape(),
                t.shape()
            )));
        }
    }
    let cut: Vec<DMatrix<f64>> = est.iter().map(|e| e.columns(0, d_eval).into_owned()).collect();
    let m = est.len();
    let total: f64 = match alignment {
        TrajAlignment::Shared => {
            let stack = |seq: &[DMatrix<f64>]| {
                DMatrix::from_fn(m * n, d_eval, |r, c| seq[r / n][(r % n, c)])
            };
            let (e, t) = (stack(&cut), stack(truth));
            let o = orthogonal_procrustes(&t, &e)?;
            (e - t * o).norm_squared()
        }
        TrajAlignment::PerTime => cut
            .iter()
            .zip(truth)
            .map(|(e, t)| Ok((e - t * orthogonal_procrustes(t, e)?).norm_squared()))
            .sum::<Result<f64>>()?,
    };
    Ok((total / (n * m * d_eval) as f64).sqrt())
}

/// Coefficient RMSE over snapshots and coordinates.
pub fn rmse_beta(est: &[DVector<f64>], truth: &[DVector<f64>]) -> Result<f64> {
    check_lengths("coefficients", est.len(), truth.len())?;
    let p = truth[0].len();
    let mut total = 0.0;
    for (e, t) in est.iter().zip(truth) {
        if e.len() != p || t.len() != p {
            return Err(Error::Dimension(format!("coefficient vectors of length {} and {}", e.len(), t.len())));
        }
        total += (e - t).norm_squared();
    }
    Ok((total / (est.len() * p) as f64).sqrt())
}

/// Pearson correlation.
pub fn pcc(est: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths("correlation", est.len(), truth.len())?;
    let n = est.len() as f64;
    let (mx, my) = (est.iter().sum::<f64>() / n, truth.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in est.iter().zip(truth) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::invalid("correlation of a constant vector"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Area under the ROC curve as the Mann–Whitney statistic with midranks.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths("auc", scores.len(), labels.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("NaN score"));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::invalid("auc needs both classes"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && scores[order[end + 1]] == scores[order[start]] {
            end += 1;
        }
        // ranks are one-based
        let midrank = (start + end) as f64 / 2.0 + 1.0;
        rank_sum += midrank * order[start..=end].iter().filter(|&&r| labels[r]).count() as f64;
        start = end + 1;
    }
    let (np, nn) = (positives as f64, negatives as f64);
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * nn))
}

/// Posterior mean of every log-odds matrix at the observed snapshots.
pub fn posterior_mean_logodds(
    state: &VariationalState,
    spec: &BasisSpec,
    covariates: &CovariateSet,
    times: &[f64],
) -> Result<Vec<DMatrix<f64>>> {
    let (n, d, p) = (state.n(), state.d(), state.p());
    if covariates.n() != n || covariates.dim() != p {
        return Err(Error::Dimension(format!(
            "covariates ({} nodes, {} coefficients) do not match the state ({n}, {p})",
            covariates.n(),
            covariates.dim()
        )));
    }
    times
        .iter()
        .enumerate()
        .map(|(m, &t)| {
            let b = spec.eval_sparse(t)?;
            let beta: Vec<f64> = (0..p).map(|k| b.dot(state.coef(k).mean())).collect();
            let mut second = vec![0.0; n * d];
            let mut first = vec![0.0; n * d];
            for i in 0..n {
                for h in 0..d {
                    let block = state.traj(i, h);
                    let mu = b.dot(block.mean());
                    first[i * d + h] = mu;
                    second[i * d + h] = mu * mu + b.quad(block.cov()).max(0.0);
                }
            }
            let mut x = vec![0.0; p];
            let mut out = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    covariates.fill(m, i, j, &mut x);
                    let mut v: f64 = beta.iter().zip(&x).map(|(b, x)| b * x).sum();
                    v += if i == j {
                        second[i * d..(i + 1) * d].iter().sum::<f64>()
                    } else {
                        (0..d).map(|h| first[i * d + h] * first[j * d + h]).sum::<f64>()
                    };
                    out[(i, j)] = v;
                    out[(j, i)] = v;
                }
            }
            Ok(out)
        })
        .collect()
}

/// Posterior mean coefficients `β̂(t)` at each time.
pub fn posterior_mean_coef(state: &VariationalState, spec: &BasisSpec, times: &[f64]) -> Result<Vec<DVector<f64>>> {
    times
        .iter()
        .map(|&t| {
            let b = spec.eval_sparse(t)?;
            Ok(DVector::from_fn(state.p(), |k, _| b.dot(state.coef(k).mean())))
        })
        .collect()
}

/// One point of a pointwise band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandPoint {
    pub t: f64,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Quantity summarised by a credible band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandQuantity {
    Coefficient(usize),
    EdgeProbability(usize, usize),
    Degree(usize),
}

/// Band settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandOptions {
    pub level: f64,
    pub draws: usize,
    pub seed: u64,
}

impl Default for BandOptions {
    fn default() -> Self {
        BandOptions {
            level: 0.95,
            draws: DEFAULT_DRAWS,
            seed: 0,
        }
    }
}

fn two_sided_z(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("credible level {level} outside (0, 1)")));
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(0.5 + level / 2.0))
}

/// Gaussian band for `β_k(t)` on an arbitrary grid.
pub fn coef_band(state: &VariationalState, spec: &BasisSpec, k: usize, grid: &[f64], level: f64) -> Result<Vec<BandPoint>> {
    if k >= state.p() {
        return Err(Error::IndexOutOfRange {
            what: "coefficient",
            index: k,
            limit: state.p(),
        });
    }
    let z = two_sided_z(level)?;
    grid.iter()
        .map(|&t| {
            let (mean, var) = state.expect_coef(spec, k, t)?;
            let half = z * var.sqrt();
            Ok(BandPoint {
                t,
                mean,
                lo: mean - half,
                hi: mean + half,
            })
        })
        .collect()
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Pre-factored sampler for one Gaussian block.
struct BlockSampler {
    mean: DVector<f64>,
    lower: DMatrix<f64>,
}

impl BlockSampler {
    fn new(block: &GaussianBlock) -> Result<Self> {
        let lower = if block.cov().iter().all(|&v| v == 0.0) {
            DMatrix::zeros(block.dim(), block.dim())
        } else {
            cholesky_jitter(block.cov())?.chol.l()
        };
        Ok(BlockSampler {
            mean: block.mean().clone(),
            lower,
        })
    }

    /// `μ + sign · L z`.
    fn draw(&self, z: &DVector<f64>, sign: f64) -> DVector<f64> {
        &self.mean + (&self.lower * z) * sign
    }
}

fn normal_vec<R: Rng>(dim: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| StandardNormal.sample(rng))
}

/// Monte Carlo or closed-form band for `quantity`.
///
/// Coefficient bands accept any `t` in `[0, 1]`. Edge-probability and degree
/// bands are evaluated at the observed snapshots listed in `snapshots`, whose
/// times are `times[m]`, since covariates only exist there.
pub fn credible_band(
    state: &VariationalState,
    spec: &BasisSpec,
    covariates: &CovariateSet,
    quantity: BandQuantity,
    times: &[f64],
    snapshots: &[usize],
    opts: &BandOptions,
) -> Result<Vec<BandPoint>> {
    if let BandQuantity::Coefficient(k) = quantity {
        let grid: Vec<f64> = snapshots
            .iter()
            .map(|&m| times.get(m).copied().ok_or(Error::IndexOutOfRange {
                what: "snapshot",
                index: m,
                limit: times.len(),
            }))
            .collect::<Result<_>>()?;
        return coef_band(state, spec, k, &grid, opts.level);
    }
    two_sided_z(opts.level)?;
    if opts.draws < MIN_DRAWS {
        return Err(Error::invalid(format!(
            "Monte Carlo bands need at least {MIN_DRAWS} draws, got {}",
            opts.draws
        )));
    }
    let n = state.n();
    let (d, p) = (state.d(), state.p());
    if covariates.n() != n || covariates.dim() != p {
        return Err(Error::Dimension("covariates do not match the state".into()));
    }
    let nodes: Vec<usize> = match quantity {
        BandQuantity::EdgeProbability(i, j) => {
            if i == j {
                return Err(Error::invalid("edge probability band needs i != j"));
            }
            vec![i, j]
        }
        BandQuantity::Degree(_) => (0..n).collect(),
        BandQuantity::Coefficient(_) => unreachable!(),
    };
    for &i in &nodes {
        if i >= n {
            return Err(Error::IndexOutOfRange {
                what: "node",
                index: i,
                limit: n,
            });
        }
    }
    let bases: Vec<(usize, SparseBasis)> = snapshots
        .iter()
        .map(|&m| {
            let t = *times.get(m).ok_or(Error::IndexOutOfRange {
                what: "snapshot",
                index: m,
                limit: times.len(),
            })?;
            Ok((m, spec.eval_sparse(t)?))
        })
        .collect::<Result<_>>()?;
    let coef_samplers: Vec<BlockSampler> = (0..p).map(|k| BlockSampler::new(state.coef(k))).collect::<Result<_>>()?;
    let traj_samplers: Vec<Vec<BlockSampler>> = nodes
        .iter()
        .map(|&i| (0..d).map(|h| BlockSampler::new(state.traj(i, h))).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let dim = spec.dim();
    let seeds = SeedTree::new(opts.seed);
    let pairs = opts.draws.div_ceil(2);

    // values[s][g]: quantity at grid point g under draw s
    let values: Vec<Vec<f64>> = (0..pairs)
        .into_par_iter()
        .flat_map_iter(|pair| {
            let mut rng = seeds.stream(Purpose::Bands, pair as u64, 0);
            let z_coef: Vec<DVector<f64>> = (0..p).map(|_| normal_vec(dim, &mut rng)).collect();
            let z_traj: Vec<Vec<DVector<f64>>> = nodes
                .iter()
                .map(|_| (0..d).map(|_| normal_vec(dim, &mut rng)).collect())
                .collect();
            let signs: &[f64] = if 2 * pair + 1 < opts.draws { &[1.0, -1.0] } else { &[1.0] };
            signs
                .iter()
                .enumerate()
                .map(|(side, &sign)| {
                    let coef: Vec<DVector<f64>> =
                        coef_samplers.iter().zip(&z_coef).map(|(s, z)| s.draw(z, sign)).collect();
                    let traj: Vec<Vec<DVector<f64>>> = traj_samplers
                        .iter()
                        .zip(&z_traj)
                        .map(|(ss, zs)| ss.iter().zip(zs).map(|(s, z)| s.draw(z, sign)).collect())
                        .collect();
                    let mut edge_rng = seeds.stream(Purpose::Bands, pair as u64, 1 + side as u64);
                    bases
                        .iter()
                        .map(|(m, b)| {
                            let beta: Vec<f64> = coef.iter().map(|w| b.dot(w)).collect();
                            let pos: Vec<Vec<f64>> =
                                traj.iter().map(|ws| ws.iter().map(|w| b.dot(w)).collect()).collect();
                            let prob = |a: usize, c: usize, x: &mut [f64]| {
                                covariates.fill(*m, nodes[a], nodes[c], x);
                                let lin: f64 = beta.iter().zip(x.iter()).map(|(b, x)| b * x).sum();
                                let latent: f64 = pos[a].iter().zip(&pos[c]).map(|(u, v)| u * v).sum();
                                logistic(lin + latent)
                            };
                            let mut x = vec![0.0; p];
                            match quantity {
                                BandQuantity::EdgeProbability(..) => prob(0, 1, &mut x),
                                BandQuantity::Degree(i) => (0..n)
                                    .filter(|&j| j != i)
                                    .map(|j| f64::from(u8::from(edge_rng.random::<f64>() < prob(i, j, &mut x))))
                                    .sum(),
                                BandQuantity::Coefficient(_) => unreachable!(),
                            }
                        })
                        .collect::<Vec<f64>>()
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let lower_q = (1.0 - opts.level) / 2.0;
    Ok(bases
        .iter()
        .enumerate()
        .map(|(g, (m, _))| {
            let mut column: Vec<f64> = values.iter().map(|v| v[g]).collect();
            let mean = column.iter().sum::<f64>() / column.len() as f64;
            column.sort_by(f64::total_cmp);
            BandPoint {
                t: times[*m],
                mean,
                lo: quantile(&column, lower_q),
                hi: quantile(&column, 1.0 - lower_q),
            }
        })
        .collect())
}
