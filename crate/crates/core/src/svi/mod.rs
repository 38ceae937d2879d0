//! Stochastic variational inference with natural gradients.
//!
//! Each iteration samples snapshots and non-edges, computes Pólya-gamma
//! locals for the sampled dyads, forms natural-parameter targets for every
//! Gaussian block and variance factor from the current state, and moves all
//! parameters a Robbins–Monro step toward them.

mod config;
mod gradients;
mod minibatch;
mod monitor;
mod variance;

use std::time::{Duration, Instant};

use log::{debug, info};
use nalgebra::DMatrix;
use rayon::prelude::*;

pub use config::SviConfig;
pub use gradients::{
    bernoulli_loglik, compute_targets, grad_coef_block, grad_traj_block, monitor_loglik, time_moments,
    Targets, TimeMoments,
};
pub use minibatch::{
    nonedge_sample_size, sample_minibatch, step_size, time_sample_size, unbiased_sum, Minibatch,
};
pub use monitor::{converged, median, window_change, StopReason};
pub use variance::{
    apply_variance_targets, coef_gig_order, mgp_shapes, traj_gig_order, update_variance_factors,
    variance_targets, VarianceTargets,
};

use crate::align::procrustes_align;
use crate::basis::{default_basis_dim, BasisSpec, SparseBasis};
use crate::error::{Error, Result};
use crate::init::initialize;
use crate::netdata::{CovariateSet, DynamicNetwork};
use crate::prior::{Penalty, PriorConfig};
use crate::rng::SeedTree;
use crate::varstate::{NaturalTarget, VariationalState};

/// Data, basis and prior bundled for the fitting routines.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub net: &'a DynamicNetwork,
    pub covariates: &'a CovariateSet,
    pub basis: BasisSpec,
    pub prior: PriorConfig,
    pub penalty: Penalty,
    basis_at: Vec<SparseBasis>,
}

impl<'a> Problem<'a> {
    pub fn new(
        net: &'a DynamicNetwork,
        covariates: &'a CovariateSet,
        basis: BasisSpec,
        prior: PriorConfig,
    ) -> Result<Self> {
        if covariates.n() != net.n() {
            return Err(Error::Dimension(format!(
                "covariates cover {} nodes, network has {}",
                covariates.n(),
                net.n()
            )));
        }
        let penalty = Penalty::new(basis.dim(), &prior, covariates.dim())?;
        let basis_at = net
            .times()
            .iter()
            .map(|&t| basis.eval_sparse(t))
            .collect::<Result<Vec<_>>>()?;
        Ok(Problem {
            net,
            covariates,
            basis,
            prior,
            penalty,
            basis_at,
        })
    }

    /// Basis for `net` and `cfg` (default knot count when unset) plus the prior.
    pub fn from_config(
        net: &'a DynamicNetwork,
        covariates: &'a CovariateSet,
        cfg: &SviConfig,
    ) -> Result<Self> {
        let knots = cfg
            .knots
            .unwrap_or_else(|| default_basis_dim(net.n(), net.num_times()));
        let basis = BasisSpec::new(knots, cfg.degree)?;
        Self::new(net, covariates, basis, cfg.prior())
    }

    /// `b(t_m)`.
    pub fn basis_at(&self, m: usize) -> &SparseBasis {
        &self.basis_at[m]
    }

    pub fn p(&self) -> usize {
        self.covariates.dim()
    }
}

/// Output of a fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub state: VariationalState,
    pub basis: BasisSpec,
    pub iterations: usize,
    /// Monitored log-likelihood per iteration.
    pub trace: Vec<f64>,
    pub stop_reason: StopReason,
    /// Trajectory means `Û(t_m)` after sequential Procrustes alignment.
    pub aligned: Vec<DMatrix<f64>>,
    pub rotations: Vec<DMatrix<f64>>,
    pub wall_time: Duration,
}

/// Initialize from the data and run the stochastic fit.
pub fn fit(net: &DynamicNetwork, covariates: &CovariateSet, cfg: &SviConfig) -> Result<FitResult> {
    cfg.validate()?;
    let start = Instant::now();
    let problem = Problem::from_config(net, covariates, cfg)?;
    let state = initialize(&problem, cfg.d, cfg.usvt_clip)?;
    let mut result = fit_from(&problem, state, cfg)?;
    result.wall_time = start.elapsed();
    Ok(result)
}

/// One full iteration at step size `rho`: targets from the current state,
/// then all blocks committed together.
pub fn svi_step(
    problem: &Problem<'_>,
    state: &mut VariationalState,
    mb: &Minibatch,
    alpha: f64,
    rho: f64,
) -> Result<f64> {
    let targets = compute_targets(problem, state, mb, alpha)?;
    let var_targets = variance_targets(problem, state)?;
    commit(state, &targets.traj, &targets.coef, rho)?;
    apply_variance_targets(problem, state, &var_targets, rho)?;
    Ok(targets.loglik)
}

fn commit(
    state: &mut VariationalState,
    traj: &[NaturalTarget],
    coef: &[NaturalTarget],
    rho: f64,
) -> Result<()> {
    state
        .traj_blocks_mut()
        .par_iter_mut()
        .zip(traj.par_iter())
        .try_for_each(|(block, t)| block.blend(t, rho))?;
    state
        .coef_blocks_mut()
        .iter_mut()
        .zip(coef)
        .try_for_each(|(block, t)| block.blend(t, rho))
}

/// Run the stochastic fit from a given initial state.
pub fn fit_from(problem: &Problem<'_>, mut state: VariationalState, cfg: &SviConfig) -> Result<FitResult> {
    cfg.validate()?;
    let start = Instant::now();
    let seeds = SeedTree::new(cfg.seed);
    let mut trace = Vec::with_capacity(cfg.max_iter);
    let mut stop_reason = StopReason::MaxIterations;
    for s in 0..cfg.max_iter {
        let rho = step_size(s, cfg.kappa, cfg.tau_step);
        let mb = sample_minibatch(problem.net, cfg, &seeds, s);
        let loglik = svi_step(problem, &mut state, &mb, cfg.alpha, rho).map_err(|e| Error::Iteration {
            iteration: s,
            source: Box::new(e),
        })?;
        trace.push(loglik);
        debug!("iteration {s}: rho = {rho:.4}, loglik = {loglik:.4}");
        if converged(&trace, cfg.window, cfg.tol) {
            stop_reason = StopReason::Tolerance;
            break;
        }
    }
    info!(
        "fit stopped after {} iterations ({})",
        trace.len(),
        stop_reason
    );
    let means = problem
        .net
        .times()
        .iter()
        .map(|&t| state.traj_means_at(&problem.basis, t))
        .collect::<Result<Vec<_>>>()?;
    let alignment = procrustes_align(&means)?;
    Ok(FitResult {
        iterations: trace.len(),
        state,
        basis: problem.basis.clone(),
        trace,
        stop_reason,
        aligned: alignment.aligned,
        rotations: alignment.rotations,
        wall_time: start.elapsed(),
    })
}
