use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::basis::SparseBasis;
use crate::error::Result;
use crate::pg::pg_mean;
use crate::varstate::{NaturalTarget, VariationalState};

use super::minibatch::Minibatch;
use super::Problem;

/// Posterior means and variances of every latent coordinate and coefficient
/// function at one snapshot.
#[derive(Debug, Clone)]
pub struct TimeMoments {
    pub m: usize,
    pub basis: SparseBasis,
    /// Row-major `n × d`.
    pub traj_mean: Vec<f64>,
    pub traj_var: Vec<f64>,
    pub coef_mean: Vec<f64>,
    pub coef_var: Vec<f64>,
}

pub fn time_moments(problem: &Problem<'_>, state: &VariationalState, m: usize) -> TimeMoments {
    let basis = problem.basis_at(m).clone();
    let (n, d, p) = (state.n(), state.d(), state.p());
    let mut traj_mean = vec![0.0; n * d];
    let mut traj_var = vec![0.0; n * d];
    for i in 0..n {
        for h in 0..d {
            let block = state.traj(i, h);
            traj_mean[i * d + h] = basis.dot(block.mean());
            traj_var[i * d + h] = basis.quad(block.cov()).max(0.0);
        }
    }
    let coef_mean = (0..p).map(|k| basis.dot(state.coef(k).mean())).collect();
    let coef_var = (0..p).map(|k| basis.quad(state.coef(k).cov()).max(0.0)).collect();
    TimeMoments {
        m,
        basis,
        traj_mean,
        traj_var,
        coef_mean,
        coef_var,
    }
}

/// Bernoulli log-likelihood `yθ − log(1 + e^θ)`.
pub fn bernoulli_loglik(y: bool, theta: f64) -> f64 {
    let softplus = |x: f64| x.max(0.0) + (-x.abs()).exp().ln_1p();
    if y {
        -softplus(-theta)
    } else {
        -softplus(theta)
    }
}

/// Likelihood parts of the targets seen from one node.
struct NodePass {
    traj: Vec<NaturalTarget>,
    coef: Vec<NaturalTarget>,
    loglik: f64,
}

fn node_pass(
    problem: &Problem<'_>,
    moments: &[TimeMoments],
    mb: &Minibatch,
    alpha: f64,
    i: usize,
    d: usize,
    p: usize,
) -> NodePass {
    let dim = problem.basis.dim();
    let net = problem.net;
    let mut traj = vec![NaturalTarget::zeros(dim); d];
    let mut coef = vec![NaturalTarget::zeros(dim); p];
    let mut loglik = 0.0;
    let mut x = vec![0.0; p];
    let mut lam_h = vec![0.0; d];
    let mut prec_h = vec![0.0; d];
    let mut lam_k = vec![0.0; p];
    let mut prec_k = vec![0.0; p];
    for (s, tm) in moments.iter().enumerate() {
        let m = tm.m;
        lam_h.fill(0.0);
        prec_h.fill(0.0);
        lam_k.fill(0.0);
        prec_k.fill(0.0);
        let mean_i = &tm.traj_mean[i * d..(i + 1) * d];
        let var_i = &tm.traj_var[i * d..(i + 1) * d];
        let non_w = mb.time_weight * mb.nonedge_weight[s][i];
        let partners = net
            .neighbors(m, i)
            .iter()
            .map(|&j| (j as usize, true, mb.time_weight))
            .chain(mb.nonedges[s][i].iter().map(|&j| (j as usize, false, non_w)));
        for (j, y, w) in partners {
            let mean_j = &tm.traj_mean[j * d..(j + 1) * d];
            let var_j = &tm.traj_var[j * d..(j + 1) * d];
            problem.covariates.fill(m, i, j, &mut x);
            let mut linear = 0.0;
            let mut coef_spread = 0.0;
            for ((xk, mean), var) in x.iter().zip(&tm.coef_mean).zip(&tm.coef_var) {
                linear += xk * mean;
                coef_spread += xk * xk * var;
            }
            let mut latent = 0.0;
            let mut latent_spread = 0.0;
            for h in 0..d {
                let (mi, vi, mj, vj) = (mean_i[h], var_i[h], mean_j[h], var_j[h]);
                latent += mi * mj;
                latent_spread += vi * vj + mj * mj * vi + mi * mi * vj;
            }
            let theta = linear + latent;
            let c2 = theta * theta + coef_spread + latent_spread;
            let omega = pg_mean(alpha, c2.sqrt());
            let resid = alpha * if y { 0.5 } else { -0.5 };
            for h in 0..d {
                let mj = mean_j[h];
                let xi = theta - mean_i[h] * mj;
                lam_h[h] += w * (resid - omega * xi) * mj;
                prec_h[h] += w * omega * (mj * mj + var_j[h]);
            }
            let half = if j == i { 1.0 } else { 0.5 };
            for k in 0..p {
                let nu = theta - tm.coef_mean[k] * x[k];
                lam_k[k] += half * w * x[k] * (resid - omega * nu);
                prec_k[k] += half * w * omega * x[k] * x[k];
            }
            loglik += half * w * bernoulli_loglik(y, theta);
        }
        for h in 0..d {
            tm.basis.axpy(lam_h[h], &mut traj[h].lambda);
            tm.basis.rank_one_update(prec_h[h], &mut traj[h].precision);
        }
        for k in 0..p {
            tm.basis.axpy(lam_k[k], &mut coef[k].lambda);
            tm.basis.rank_one_update(prec_k[k], &mut coef[k].precision);
        }
    }
    NodePass { traj, coef, loglik }
}

/// Natural-parameter targets of every Gaussian block, plus the reweighted
/// minibatch log-likelihood at the variational means.
#[derive(Debug, Clone)]
pub struct Targets {
    /// Indexed `i * d + h`.
    pub traj: Vec<NaturalTarget>,
    pub coef: Vec<NaturalTarget>,
    pub loglik: f64,
}

/// Targets `B_i(λ̄_ih)`, `E[γ_h Ω_i] + B_i(Λ̄_ih)` and `B(λ̄_k)`,
/// `E[Ω_{β_k}] + B(Λ̄_k)`, all read from `state`.
pub fn compute_targets(
    problem: &Problem<'_>,
    state: &VariationalState,
    mb: &Minibatch,
    alpha: f64,
) -> Result<Targets> {
    let (n, d, p) = (state.n(), state.d(), state.p());
    let moments: Vec<TimeMoments> = mb
        .times
        .par_iter()
        .map(|&m| time_moments(problem, state, m))
        .collect();
    let passes: Vec<NodePass> = (0..n)
        .into_par_iter()
        .map(|i| node_pass(problem, &moments, mb, alpha, i, d, p))
        .collect();
    let tau2 = problem.prior.tau2;
    let mut traj = Vec::with_capacity(n * d);
    let mut coef = vec![NaturalTarget::zeros(problem.basis.dim()); p];
    let mut loglik = 0.0;
    for (i, pass) in passes.into_iter().enumerate() {
        let base = problem.penalty.traj_precision(state.inv_sigma_traj(i), tau2);
        for (h, mut t) in pass.traj.into_iter().enumerate() {
            t.precision += &base * state.expect_mgp(h);
            traj.push(t);
        }
        for (acc, part) in coef.iter_mut().zip(pass.coef) {
            acc.lambda += part.lambda;
            acc.precision += part.precision;
        }
        loglik += pass.loglik;
    }
    for (k, t) in coef.iter_mut().enumerate() {
        t.precision += problem
            .penalty
            .coef_precision(k, state.inv_sigma_coef(k), problem.prior.tau2_beta);
    }
    Ok(Targets { traj, coef, loglik })
}

/// Natural gradient `(target − λ_ih, target − Λ_ih)` of trajectory block `(i, h)`.
pub fn grad_traj_block(
    problem: &Problem<'_>,
    state: &VariationalState,
    mb: &Minibatch,
    alpha: f64,
    i: usize,
    h: usize,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let moments: Vec<TimeMoments> = mb.times.iter().map(|&m| time_moments(problem, state, m)).collect();
    let mut pass = node_pass(problem, &moments, mb, alpha, i, state.d(), state.p());
    let mut t = std::mem::replace(&mut pass.traj[h], NaturalTarget::zeros(0));
    t.precision += problem
        .penalty
        .traj_precision(state.inv_sigma_traj(i), problem.prior.tau2)
        * state.expect_mgp(h);
    let block = state.traj(i, h);
    Ok((t.lambda - block.lambda(), t.precision - block.precision()))
}

/// Natural gradient of coefficient block `k`.
pub fn grad_coef_block(
    problem: &Problem<'_>,
    state: &VariationalState,
    mb: &Minibatch,
    alpha: f64,
    k: usize,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let targets = compute_targets(problem, state, mb, alpha)?;
    let t = &targets.coef[k];
    let block = state.coef(k);
    Ok((&t.lambda - block.lambda(), &t.precision - block.precision()))
}

/// Reweighted Bernoulli log-likelihood of the minibatch dyads evaluated at
/// the variational means of the log-odds.
pub fn monitor_loglik(problem: &Problem<'_>, state: &VariationalState, mb: &Minibatch) -> f64 {
    let d = state.d();
    let p = state.p();
    let mut x = vec![0.0; p];
    let mut total = 0.0;
    for (s, &m) in mb.times.iter().enumerate() {
        let tm = time_moments(problem, state, m);
        for i in 0..state.n() {
            let non_w = mb.time_weight * mb.nonedge_weight[s][i];
            let partners = problem
                .net
                .neighbors(m, i)
                .iter()
                .map(|&j| (j as usize, true, mb.time_weight))
                .chain(mb.nonedges[s][i].iter().map(|&j| (j as usize, false, non_w)));
            for (j, y, w) in partners {
                problem.covariates.fill(m, i, j, &mut x);
                let linear: f64 = x.iter().zip(&tm.coef_mean).map(|(a, b)| a * b).sum();
                let latent: f64 = (0..d).map(|h| tm.traj_mean[i * d + h] * tm.traj_mean[j * d + h]).sum();
                let half = if i == j { 1.0 } else { 0.5 };
                total += half * w * bernoulli_loglik(y, linear + latent);
            }
        }
    }
    total
}
