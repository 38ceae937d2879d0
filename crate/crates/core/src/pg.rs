//! Pólya-gamma local variables: tilt `c` and mean `E[ω]` per dyad.

use crate::basis::BasisSpec;
use crate::error::Result;
use crate::varstate::VariationalState;

/// Below this `|c|` the closed form is replaced by its series.
pub const SERIES_CUTOFF: f64 = 1e-4;

/// Posterior moments of the pieces of one dyad's log-odds at one time.
#[derive(Debug, Clone, Copy)]
pub struct DyadMoments<'a> {
    /// `x_{ij,t}`.
    pub x: &'a [f64],
    /// `E[β_k(t)]` and `Var[β_k(t)]`.
    pub coef_mean: &'a [f64],
    pub coef_var: &'a [f64],
    /// `E[u_ih(t)]`, `Var[u_ih(t)]` and the same for `j`.
    pub mean_i: &'a [f64],
    pub var_i: &'a [f64],
    pub mean_j: &'a [f64],
    pub var_j: &'a [f64],
}

impl DyadMoments<'_> {
    /// `E[β(t)ᵀx]`.
    pub fn linear_mean(&self) -> f64 {
        self.x.iter().zip(self.coef_mean).map(|(x, m)| x * m).sum()
    }

    /// `E[u_i(t)ᵀu_j(t)]` under independent factors.
    pub fn latent_mean(&self) -> f64 {
        self.mean_i.iter().zip(self.mean_j).map(|(a, b)| a * b).sum()
    }

    /// `E[Θ_{ij}(t)]`.
    pub fn logodds_mean(&self) -> f64 {
        self.linear_mean() + self.latent_mean()
    }

    /// `E[Θ_{ij}(t)²]`: squared mean plus `xᵀΣ_βx`, `tr(Σ_iΣ_j)`,
    /// `μ_jᵀΣ_iμ_j` and `μ_iᵀΣ_jμ_i`.
    pub fn c_squared(&self) -> f64 {
        let mean = self.logodds_mean();
        let coef: f64 = self
            .x
            .iter()
            .zip(self.coef_var)
            .map(|(x, v)| x * x * v)
            .sum();
        let mut latent = 0.0;
        for h in 0..self.mean_i.len() {
            let (mi, vi, mj, vj) = (self.mean_i[h], self.var_i[h], self.mean_j[h], self.var_j[h]);
            latent += vi * vj + mj * mj * vi + mi * mi * vj;
        }
        mean * mean + coef + latent
    }
}

/// `c²_{ij,t}` for dyad `(i, j)` at time `t` given covariates `x`.
pub fn pg_c_squared(
    state: &VariationalState,
    spec: &BasisSpec,
    x: &[f64],
    i: usize,
    j: usize,
    t: f64,
) -> Result<f64> {
    let d = state.d();
    let p = state.p();
    let mut buf = vec![0.0; 4 * d + 2 * p];
    let (coef_mean, rest) = buf.split_at_mut(p);
    let (coef_var, rest) = rest.split_at_mut(p);
    let (mean_i, rest) = rest.split_at_mut(d);
    let (var_i, rest) = rest.split_at_mut(d);
    let (mean_j, var_j) = rest.split_at_mut(d);
    for k in 0..p {
        (coef_mean[k], coef_var[k]) = state.expect_coef(spec, k, t)?;
    }
    for h in 0..d {
        (mean_i[h], var_i[h]) = state.expect_traj(spec, i, h, t)?;
        (mean_j[h], var_j[h]) = state.expect_traj(spec, j, h, t)?;
    }
    Ok(DyadMoments {
        x,
        coef_mean,
        coef_var,
        mean_i,
        var_i,
        mean_j,
        var_j,
    }
    .c_squared())
}

/// `E[ω] = α tanh(c/2) / (2c)`, with limit `α/4` at zero.
#[inline]
pub fn pg_mean(alpha: f64, c: f64) -> f64 {
    let c = c.abs();
    if c < SERIES_CUTOFF {
        return alpha / 4.0 * (1.0 - c * c / 12.0);
    }
    alpha / (2.0 * c) * (0.5 * c).tanh()
}
