use crate::error::{Error, Result};
use crate::varstate::{expect_quadform, GammaFactor, GigFactor, VariationalState};

use super::Problem;

/// Shapes `c̄_h`: `a₁ + d n ℓ / 2` for the first factor and
/// `a₂ + (d − h + 1) n ℓ / 2` afterwards (one-based `h`).
pub fn mgp_shapes(a1: f64, a2: f64, d: usize, n: usize, dim: usize) -> Vec<f64> {
    let half = n as f64 * dim as f64 / 2.0;
    (0..d)
        .map(|h| {
            if h == 0 {
                a1 + d as f64 * half
            } else {
                a2 + (d - h) as f64 * half
            }
        })
        .collect()
}

/// GIG order `(c_σ − d(ℓ − 1)) / 2` of the trajectory walk variances.
pub fn traj_gig_order(c_sigma: f64, d: usize, dim: usize) -> f64 {
    (c_sigma - (d * (dim - 1)) as f64) / 2.0
}

/// GIG order `(c_σ − (ℓ − r)) / 2` of a coefficient walk variance.
pub fn coef_gig_order(c_sigma: f64, dim: usize, order: usize) -> f64 {
    (c_sigma - (dim - order) as f64) / 2.0
}

/// Targets of the variance-factor parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceTargets {
    pub b_traj: Vec<f64>,
    pub b_coef: Vec<f64>,
    pub mgp_shape: Vec<f64>,
    pub mgp_rate: Vec<f64>,
}

/// Targets read from `state`.
pub fn variance_targets(problem: &Problem<'_>, state: &VariationalState) -> Result<VarianceTargets> {
    let (n, d, p) = (state.n(), state.d(), state.p());
    let gram = problem.penalty.traj_gram();
    let tau2 = problem.prior.tau2;
    // quad[i][h] = μᵀGμ + tr(GΣ) for block (i, h)
    let quad: Vec<f64> = state
        .traj_blocks()
        .iter()
        .map(|b| expect_quadform(b.mean(), b.cov(), gram))
        .collect();
    let b_traj: Vec<f64> = (0..n)
        .map(|i| (0..d).map(|h| state.expect_mgp(h) * quad[i * d + h]).sum())
        .collect();
    let b_coef: Vec<f64> = (0..p)
        .map(|k| {
            let block = state.coef(k);
            expect_quadform(block.mean(), block.cov(), problem.penalty.coef_gram(k))
        })
        .collect();
    // Σ_i E[w_itᵀ Ω_i w_it] for each t
    let weighted: Vec<f64> = (0..d)
        .map(|t| {
            (0..n)
                .map(|i| {
                    let block = state.traj(i, t);
                    let first = block.mean()[0].powi(2) + block.cov()[(0, 0)];
                    state.inv_sigma_traj(i) * quad[i * d + t] + first / tau2
                })
                .sum()
        })
        .collect();
    let mgp_rate: Vec<f64> = (0..d)
        .map(|h| {
            let acc: f64 = (h..d)
                .map(|t| state.expect_mgp_without(t, h) * weighted[t])
                .sum();
            1.0 + 0.5 * acc
        })
        .collect();
    let mgp_shape = mgp_shapes(problem.prior.a1, problem.prior.a2, d, n, problem.basis.dim());
    for v in b_traj.iter().chain(&b_coef).chain(&mgp_rate) {
        if !(*v > 0.0) || !v.is_finite() {
            return Err(Error::numerical(format!("nonpositive variance-factor target {v}")));
        }
    }
    Ok(VarianceTargets {
        b_traj,
        b_coef,
        mgp_shape,
        mgp_rate,
    })
}

/// Move the variance factors a step `ρ` toward `targets` and refresh caches.
pub fn apply_variance_targets(
    problem: &Problem<'_>,
    state: &mut VariationalState,
    targets: &VarianceTargets,
    rho: f64,
) -> Result<()> {
    let blend = |old: f64, new: f64| (1.0 - rho) * old + rho * new;
    let prior = &problem.prior;
    let dim = problem.basis.dim();
    let order_traj = traj_gig_order(prior.c_sigma, state.d(), dim);
    let sigma_traj = state
        .sigma_traj()
        .iter()
        .zip(&targets.b_traj)
        .map(|(f, &b)| GigFactor {
            a: prior.d_sigma,
            b: blend(f.b, b),
            p: order_traj,
        })
        .collect();
    let sigma_coef = state
        .sigma_coef()
        .iter()
        .zip(&targets.b_coef)
        .enumerate()
        .map(|(k, (f, &b))| GigFactor {
            a: prior.d_sigma,
            b: blend(f.b, b),
            p: coef_gig_order(prior.c_sigma, dim, problem.penalty.order(k)),
        })
        .collect();
    let mgp = state
        .mgp()
        .iter()
        .zip(targets.mgp_shape.iter().zip(&targets.mgp_rate))
        .map(|(f, (&shape, &rate))| GammaFactor {
            shape,
            rate: blend(f.rate, rate),
        })
        .collect();
    state.set_variance_factors(sigma_traj, sigma_coef, mgp)
}

/// One variance-factor step computed from the current state.
pub fn update_variance_factors(problem: &Problem<'_>, state: &mut VariationalState, rho: f64) -> Result<()> {
    let targets = variance_targets(problem, state)?;
    apply_variance_targets(problem, state, &targets, rho)
}
