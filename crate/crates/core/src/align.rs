//! Orthogonal Procrustes alignment of latent position sequences.

use log::debug;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `argmin_{O ∈ O(d)} ‖A O − B‖_F` over the full orthogonal group.
///
/// Returns the identity when `AᵀB` vanishes.
pub fn orthogonal_procrustes(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "cannot align {:?} to {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let d = a.ncols();
    let cross = a.transpose() * b;
    if cross.iter().all(|&v| v == 0.0) {
        debug!("zero cross-product in Procrustes alignment; using identity");
        return Ok(DMatrix::identity(d, d));
    }
    let svd = cross.svd(true, true);
    let u = svd.u.ok_or_else(|| Error::numerical("SVD failed in Procrustes"))?;
    let vt = svd.v_t.ok_or_else(|| Error::numerical("SVD failed in Procrustes"))?;
    Ok(u * vt)
}

/// Sequentially aligned configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub aligned: Vec<DMatrix<f64>>,
    pub rotations: Vec<DMatrix<f64>>,
}

/// Rotate each `U_m` onto the already aligned `U_{m−1} O_{m−1}`, with `O_1 = I`.
pub fn procrustes_align(seq: &[DMatrix<f64>]) -> Result<Alignment> {
    let Some(first) = seq.first() else {
        return Err(Error::invalid("alignment needs at least one configuration"));
    };
    let d = first.ncols();
    let mut aligned = vec![first.clone()];
    let mut rotations = vec![DMatrix::identity(d, d)];
    for current in &seq[1..] {
        let prev = aligned.last().expect("nonempty");
        let o = orthogonal_procrustes(current, prev)?;
        aligned.push(current * &o);
        rotations.push(o);
    }
    Ok(Alignment { aligned, rotations })
}

/// `Σ_m ‖U_m O_m − U_{m−1} O_{m−1}‖²_F`.
pub fn path_discrepancy(seq: &[DMatrix<f64>]) -> f64 {
    seq.windows(2).map(|w| (&w[1] - &w[0]).norm_squared()).sum()
}
