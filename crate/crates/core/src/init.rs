//! Spectral initialization of the variational state.
//!
//! Per snapshot: a thresholded-SVD estimate of the log-odds, a least-squares
//! fit of the covariate effects, and a spectral embedding of the residual.
//! The embeddings are aligned across time and every sequence is projected
//! onto the spline basis.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::align::procrustes_align;
use crate::basis::BasisSpec;
use crate::error::{Error, Result};
use crate::linalg::{least_squares, sorted_eigen};
use crate::netdata::{CovariateSet, DynamicNetwork};
use crate::svi::{coef_gig_order, mgp_shapes, traj_gig_order, Problem};
use crate::varstate::{GammaFactor, GaussianBlock, GigFactor, VariationalState};

/// Initial value of every GIG `b̄` and Gamma rate `d̄`.
pub const INITIAL_SCALE: f64 = 100.0;

/// Universal singular value thresholding estimate of `logit P` for one
/// snapshot, with probabilities clipped to `clip`.
pub fn usvt_logodds(y: &DMatrix<f64>, self_loops: bool, clip: (f64, f64)) -> Result<DMatrix<f64>> {
    let n = y.nrows();
    if y.ncols() != n {
        return Err(Error::Dimension("adjacency matrix must be square".into()));
    }
    let mut total = 0.0;
    for i in 0..n {
        let j0 = if self_loops { i } else { i + 1 };
        for j in j0..n {
            total += y[(i, j)];
        }
    }
    let nf = n as f64;
    let possible = if self_loops {
        nf * (nf + 1.0) / 2.0
    } else {
        nf * (nf - 1.0) / 2.0
    };
    let p_hat = if possible > 0.0 { total / possible } else { 0.0 };
    let mut filled = y.clone();
    if !self_loops {
        filled.fill_diagonal(p_hat);
    }
    if p_hat == 0.0 {
        debug!("empty snapshot in thresholded SVD; every probability clipped");
    }
    let threshold = usvt_threshold(n, p_hat);
    // singular values of a symmetric matrix are |eigenvalues|
    let eig = SymmetricEigen::new(filled);
    let kept: Vec<usize> = (0..n).filter(|&c| eig.eigenvalues[c].abs() >= threshold).collect();
    let basis = DMatrix::from_fn(n, kept.len(), |r, c| eig.eigenvectors[(r, kept[c])]);
    let scaled = DMatrix::from_fn(n, kept.len(), |r, c| basis[(r, c)] * eig.eigenvalues[kept[c]]);
    let mut p = scaled * basis.transpose();
    let (lo, hi) = clip;
    p.apply(|v| *v = v.clamp(lo, hi));
    let p = (&p + p.transpose()) * 0.5;
    Ok(p.map(|v| (v / (1.0 - v)).ln()))
}

/// `√(2.01 n p̂)`.
pub fn usvt_threshold(n: usize, p_hat: f64) -> f64 {
    (2.01 * n as f64 * p_hat).sqrt()
}

/// Least-squares covariate effects over the dyads `i < j` (or `i ≤ j`) and
/// the residual log-odds matrix.
pub fn init_coef(
    theta: &DMatrix<f64>,
    covariates: &[DMatrix<f64>],
    self_loops: bool,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = theta.nrows();
    let p = covariates.len();
    if p == 0 {
        return Ok((DVector::zeros(0), theta.clone()));
    }
    let dyads: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| {
            let j0 = if self_loops { i } else { i + 1 };
            (j0..n).map(move |j| (i, j))
        })
        .collect();
    let design = DMatrix::from_fn(dyads.len(), p, |r, k| {
        let (i, j) = dyads[r];
        covariates[k][(i, j)]
    });
    let response = DMatrix::from_fn(dyads.len(), 1, |r, _| {
        let (i, j) = dyads[r];
        theta[(i, j)]
    });
    let beta = least_squares(&design, &response)?.column(0).into_owned();
    let mut resid = theta.clone();
    for (k, x) in covariates.iter().enumerate() {
        resid -= x * beta[k];
    }
    Ok((beta, resid))
}

/// Adjacency spectral embedding `V_d Λ_d^{1/2}` from the `d` largest
/// eigenvalues; negative ones contribute a zero column.
pub fn ase(e: &DMatrix<f64>, d: usize) -> Result<DMatrix<f64>> {
    let n = e.nrows();
    if d > n {
        return Err(Error::invalid(format!("embedding dimension {d} exceeds node count {n}")));
    }
    let (values, vectors) = sorted_eigen(e);
    let mut out = DMatrix::zeros(n, d);
    let mut clamped = 0;
    for h in 0..d {
        let lam = values[h];
        if lam <= 0.0 {
            clamped += 1;
            continue;
        }
        out.set_column(h, &(vectors.column(h) * lam.sqrt()));
    }
    if clamped > 0 {
        warn!("{clamped} of the top {d} residual eigenvalues are nonpositive; columns set to zero");
    }
    Ok(out)
}

/// Least-squares spline coefficients for each column of `values` (rows are
/// snapshots at `times`); minimum-norm when `M < ℓ`.
pub fn project_to_basis(values: &DMatrix<f64>, times: &[f64], spec: &BasisSpec) -> Result<DMatrix<f64>> {
    if values.nrows() != times.len() {
        return Err(Error::Dimension(format!(
            "{} rows of values for {} times",
            values.nrows(),
            times.len()
        )));
    }
    let design = spec.design_matrix(times)?;
    least_squares(&design, values)
}

fn covariate_matrices(cov: &CovariateSet, m: usize) -> Vec<DMatrix<f64>> {
    let n = cov.n();
    (0..cov.dim())
        .map(|k| DMatrix::from_fn(n, n, |i, j| cov.value(m, i, j, k)))
        .collect()
}

/// Per-snapshot estimates before smoothing.
struct SnapshotInit {
    coef: DVector<f64>,
    embedding: DMatrix<f64>,
}

fn snapshot_init(
    net: &DynamicNetwork,
    cov: &CovariateSet,
    m: usize,
    d: usize,
    clip: (f64, f64),
) -> Result<SnapshotInit> {
    let theta = usvt_logodds(&net.adjacency(m), net.self_loops(), clip)?;
    let (coef, resid) = init_coef(&theta, &covariate_matrices(cov, m), net.self_loops())?;
    let embedding = ase(&resid, d)?;
    Ok(SnapshotInit { coef, embedding })
}

/// Full initial state: identity precisions, `b̄ = d̄ = 100`, closed-form
/// Gamma shapes.
pub fn initialize(problem: &Problem<'_>, d: usize, clip: (f64, f64)) -> Result<VariationalState> {
    let net = problem.net;
    let cov = problem.covariates;
    let (n, m_count, p) = (net.n(), net.num_times(), cov.dim());
    let dim = problem.basis.dim();
    let snaps = (0..m_count)
        .into_par_iter()
        .map(|m| snapshot_init(net, cov, m, d, clip))
        .collect::<Result<Vec<_>>>()?;
    let embeddings: Vec<DMatrix<f64>> = snaps.iter().map(|s| s.embedding.clone()).collect();
    let aligned = procrustes_align(&embeddings)?.aligned;
    let traj_values = DMatrix::from_fn(m_count, n * d, |m, c| aligned[m][(c / d, c % d)]);
    let traj_coef = project_to_basis(&traj_values, net.times(), &problem.basis)?;
    let coef_values = DMatrix::from_fn(m_count, p, |m, k| snaps[m].coef[k]);
    let coef_coef = project_to_basis(&coef_values, net.times(), &problem.basis)?;

    let traj = (0..n * d)
        .map(|c| GaussianBlock::unit_precision(traj_coef.column(c).into_owned()))
        .collect();
    let coef = (0..p)
        .map(|k| GaussianBlock::unit_precision(coef_coef.column(k).into_owned()))
        .collect();
    let prior = &problem.prior;
    let sigma_traj = vec![
        GigFactor {
            a: prior.d_sigma,
            b: INITIAL_SCALE,
            p: traj_gig_order(prior.c_sigma, d, dim),
        };
        n
    ];
    let sigma_coef = (0..p)
        .map(|k| GigFactor {
            a: prior.d_sigma,
            b: INITIAL_SCALE,
            p: coef_gig_order(prior.c_sigma, dim, problem.penalty.order(k)),
        })
        .collect();
    let mgp = mgp_shapes(prior.a1, prior.a2, d, n, dim)
        .into_iter()
        .map(|shape| GammaFactor {
            shape,
            rate: INITIAL_SCALE,
        })
        .collect();
    VariationalState::new(n, d, dim, traj, coef, sigma_traj, sigma_coef, mgp)
}
