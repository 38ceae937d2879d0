//! Random-walk (P-spline) priors on basis coefficients.
//!
//! Trajectory coefficients follow a first-order Gaussian random walk started
//! at `N(0, τ²)`; coefficient functions use an order-`r_k` walk with diffuse
//! `N(0, τ_β²)` starting values.

use nalgebra::DMatrix;

use crate::basis::{diff_matrix, BasisSpec};
use crate::error::{Error, Result};

/// Fixed prior hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorConfig {
    /// Variance of the first trajectory coefficient.
    pub tau2: f64,
    /// Variance of the first `r_k` coefficient-function coefficients.
    pub tau2_beta: f64,
    /// Random-walk order per covariate, each in `1..ℓ`.
    pub orders: Vec<usize>,
    /// Shape of the first multiplicative-gamma factor.
    pub a1: f64,
    /// Shape of the remaining multiplicative-gamma factors.
    pub a2: f64,
    /// Inverse-gamma style shape and rate parameters of the walk variances.
    pub c_sigma: f64,
    pub d_sigma: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            tau2: 1.0,
            tau2_beta: 100.0,
            orders: Vec::new(),
            a1: 2.0,
            a2: 3.0,
            c_sigma: 2.0,
            d_sigma: 1.0,
        }
    }
}

impl PriorConfig {
    /// Walk order of covariate `k` (defaults to 1 when unset).
    pub fn order(&self, k: usize) -> usize {
        self.orders.get(k).copied().unwrap_or(1)
    }

    pub fn validate(&self, dim: usize, p: usize) -> Result<()> {
        for (name, v) in [
            ("tau2", self.tau2),
            ("tau2_beta", self.tau2_beta),
            ("a1", self.a1),
            ("a2", self.a2),
            ("d_sigma", self.d_sigma),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.c_sigma.is_finite() {
            return Err(Error::invalid("c_sigma must be finite"));
        }
        if self.orders.len() > p {
            return Err(Error::invalid(format!(
                "{} walk orders given for {p} covariates",
                self.orders.len()
            )));
        }
        for k in 0..p {
            let r = self.order(k);
            if r == 0 || r >= dim {
                return Err(Error::invalid(format!(
                    "walk order {r} for covariate {k} must satisfy 1 <= r < ℓ = {dim}"
                )));
            }
        }
        Ok(())
    }
}

fn check_variance(v: f64, name: &str) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::invalid(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

/// Trajectory precision `D₁ᵀD₁/σ² + e₁e₁ᵀ/τ²`.
pub fn precision_u(sigma2: f64, tau2: f64, dim: usize) -> Result<DMatrix<f64>> {
    check_variance(sigma2, "walk variance")?;
    check_variance(tau2, "initial variance")?;
    let mut omega = diff_matrix(dim, 1)?.gram() / sigma2;
    omega[(0, 0)] += 1.0 / tau2;
    Ok(omega)
}

/// Coefficient-function precision `D_rᵀD_r/σ² + Σ_{s≤r} e_s e_sᵀ/τ_β²`.
pub fn precision_beta(sigma2: f64, order: usize, tau2_beta: f64, dim: usize) -> Result<DMatrix<f64>> {
    check_variance(sigma2, "walk variance")?;
    check_variance(tau2_beta, "initial variance")?;
    let mut omega = diff_matrix(dim, order)?.gram() / sigma2;
    for s in 0..order {
        omega[(s, s)] += 1.0 / tau2_beta;
    }
    Ok(omega)
}

/// Precomputed `DᵀD` Gram matrices; only scalar multipliers change during
/// fitting.
#[derive(Debug, Clone)]
pub struct Penalty {
    dim: usize,
    traj: DMatrix<f64>,
    coef: Vec<DMatrix<f64>>,
    orders: Vec<usize>,
}

impl Penalty {
    pub fn new(dim: usize, prior: &PriorConfig, p: usize) -> Result<Self> {
        prior.validate(dim, p)?;
        let traj = diff_matrix(dim, 1)?.gram();
        let orders: Vec<usize> = (0..p).map(|k| prior.order(k)).collect();
        let coef = orders
            .iter()
            .map(|&r| diff_matrix(dim, r).map(|d| d.gram()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Penalty {
            dim,
            traj,
            coef,
            orders,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `D₁ᵀD₁`.
    pub fn traj_gram(&self) -> &DMatrix<f64> {
        &self.traj
    }

    /// `D_{r_k}ᵀD_{r_k}`.
    pub fn coef_gram(&self, k: usize) -> &DMatrix<f64> {
        &self.coef[k]
    }

    pub fn order(&self, k: usize) -> usize {
        self.orders[k]
    }

    /// `E[Ω_i]` given `E[1/σ_i²]`.
    pub fn traj_precision(&self, inv_sigma2: f64, tau2: f64) -> DMatrix<f64> {
        let mut out = &self.traj * inv_sigma2;
        out[(0, 0)] += 1.0 / tau2;
        out
    }

    /// `E[Ω_{β_k}]` given `E[1/σ_{β_k}²]`.
    pub fn coef_precision(&self, k: usize, inv_sigma2: f64, tau2_beta: f64) -> DMatrix<f64> {
        let mut out = &self.coef[k] * inv_sigma2;
        for s in 0..self.orders[k] {
            out[(s, s)] += 1.0 / tau2_beta;
        }
        out
    }
}

/// Random-walk kernel `Σ_g Σ_g' b_g(s) b_g'(t) min(g, g')` with zero-based
/// coefficient indices.
pub fn vb_kernel(spec: &BasisSpec, s: f64, t: f64) -> Result<f64> {
    let bs = spec.eval_sparse(s)?;
    let bt = spec.eval_sparse(t)?;
    let mut acc = 0.0;
    for (r, vs) in bs.values.iter().enumerate() {
        for (c, vt) in bt.values.iter().enumerate() {
            acc += vs * vt * (bs.start + r).min(bt.start + c) as f64;
        }
    }
    Ok(acc)
}

/// Prior covariance of `u_ih(s)` and `u_ih(t)`: `(σ² v_b(s,t) + τ²) / γ_h`.
pub fn induced_traj_cov(
    gamma: f64,
    sigma2: f64,
    tau2: f64,
    spec: &BasisSpec,
    s: f64,
    t: f64,
) -> Result<f64> {
    check_variance(gamma, "shrinkage")?;
    if !(sigma2 >= 0.0) {
        return Err(Error::invalid("walk variance must be nonnegative"));
    }
    Ok((sigma2 * vb_kernel(spec, s, t)? + tau2) / gamma)
}
