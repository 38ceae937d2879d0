//! Small dense linear-algebra helpers on top of nalgebra.

use log::{debug, warn};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Outcome of a jittered Cholesky factorisation.
pub struct PdFactor {
    pub chol: Cholesky<f64, Dyn>,
    /// Diagonal jitter that had to be added, zero when none.
    pub jitter: f64,
}

/// Cholesky factorisation of a symmetric matrix; on failure retries once with
/// `1e-8 · trace / ℓ` added to the diagonal.
pub fn cholesky_jitter(a: &DMatrix<f64>) -> Result<PdFactor> {
    let sym = symmetrize(a);
    if let Some(chol) = Cholesky::new(sym.clone()) {
        return Ok(PdFactor { chol, jitter: 0.0 });
    }
    let n = sym.nrows().max(1);
    let jitter = 1e-8 * sym.trace().abs() / n as f64;
    warn!("matrix not positive definite; adding diagonal jitter {jitter:e}");
    let mut shifted = sym;
    for g in 0..shifted.nrows() {
        shifted[(g, g)] += jitter;
    }
    Cholesky::new(shifted)
        .map(|chol| PdFactor { chol, jitter })
        .ok_or_else(|| Error::numerical("precision matrix not positive definite after jitter"))
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn pinv_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * 1e-12 * a.nrows().max(a.ncols()) as f64;
    svd.solve(b, eps).map_err(|e| Error::numerical(e.to_string()))
}

/// Solve the normal equations `(AᵀA) x = Aᵀb`, falling back to the
/// pseudoinverse when `AᵀA` is singular.
pub fn least_squares(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let ata = a.transpose() * a;
    let atb = a.transpose() * b;
    let rank = rank(&ata);
    if rank == ata.nrows() {
        if let Some(chol) = Cholesky::new(ata.clone()) {
            return Ok(chol.solve(&atb));
        }
    }
    debug!("rank-deficient normal equations ({rank} of {}); using pseudoinverse", ata.nrows());
    pinv_solve(a, b)
}

fn rank(a: &DMatrix<f64>) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let tol = sv.max() * 1e-12 * a.nrows() as f64;
    sv.iter().filter(|&&s| s > tol).count()
}

/// Symmetric eigendecomposition with eigenvalues in descending order; ties
/// keep the lower original index first. Each eigenvector is sign-normalised so
/// its largest-magnitude entry (first on ties) is positive.
pub fn sorted_eigen(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(symmetrize(a));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| {
        eig.eigenvalues[y]
            .partial_cmp(&eig.eigenvalues[x])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.cmp(&y))
    });
    let values = DVector::from_iterator(n, order.iter().map(|&c| eig.eigenvalues[c]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        fix_sign(&mut col);
        vectors.set_column(dst, &col);
    }
    (values, vectors)
}

pub(crate) fn fix_sign(v: &mut DVector<f64>) {
    let mut best = 0;
    for g in 1..v.len() {
        if v[g].abs() > v[best].abs() + 1e-12 {
            best = g;
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        v.neg_mut();
    }
}
