//! Clamped uniform B-spline bases on `[0, 1]` and finite-difference operators.
//!
//! Every latent function in the model is a linear combination of the same
//! `ℓ = K + q + 1` basis functions. The knot vector repeats each boundary knot
//! `q + 1` times so that `b(0) = e_1` and `b(1) = e_ℓ`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A degree-`q` B-spline basis with `K` equally spaced interior knots.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec {
    degree: usize,
    internal_knots: usize,
    knots: Vec<f64>,
}

/// Nonzero block of an evaluated basis vector.
///
/// `values[r]` is the value of basis function `start + r`; all other entries
/// of `b(t)` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseBasis {
    pub start: usize,
    pub values: Vec<f64>,
}

impl SparseBasis {
    pub fn to_dense(&self, dim: usize) -> DVector<f64> {
        let mut out = DVector::zeros(dim);
        for (r, v) in self.values.iter().enumerate() {
            out[self.start + r] = *v;
        }
        out
    }

    /// `w' b(t)`.
    pub fn dot(&self, w: &DVector<f64>) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(r, v)| v * w[self.start + r])
            .sum()
    }

    /// `b(t)' A b(t)` for a square matrix `A`.
    pub fn quad(&self, a: &DMatrix<f64>) -> f64 {
        let mut acc = 0.0;
        for (r, vr) in self.values.iter().enumerate() {
            let mut row = 0.0;
            for (c, vc) in self.values.iter().enumerate() {
                row += a[(self.start + r, self.start + c)] * vc;
            }
            acc += vr * row;
        }
        acc
    }

    /// `out += scale * b(t)`.
    pub fn axpy(&self, scale: f64, out: &mut DVector<f64>) {
        for (r, v) in self.values.iter().enumerate() {
            out[self.start + r] += scale * v;
        }
    }

    /// `out += scale * b(t) b(t)'`.
    pub fn rank_one_update(&self, scale: f64, out: &mut DMatrix<f64>) {
        for (r, vr) in self.values.iter().enumerate() {
            let sr = scale * vr;
            for (c, vc) in self.values.iter().enumerate() {
                out[(self.start + r, self.start + c)] += sr * vc;
            }
        }
    }
}

/// Build the clamped basis with `internal_knots` interior knots at spacing
/// `1 / (internal_knots + 1)`.
pub fn make_basis(internal_knots: usize, degree: usize) -> Result<BasisSpec> {
    BasisSpec::new(internal_knots, degree)
}

impl BasisSpec {
    pub fn new(internal_knots: usize, degree: usize) -> Result<Self> {
        if degree < 1 {
            return Err(Error::invalid("spline degree must be at least 1"));
        }
        let mut knots = Vec::with_capacity(internal_knots + 2 * (degree + 1));
        knots.extend(std::iter::repeat_n(0.0, degree + 1));
        let spacing = (internal_knots + 1) as f64;
        knots.extend((1..=internal_knots).map(|g| g as f64 / spacing));
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        Ok(BasisSpec {
            degree,
            internal_knots,
            knots,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn internal_knots(&self) -> usize {
        self.internal_knots
    }

    /// Number of basis functions `ℓ`.
    pub fn dim(&self) -> usize {
        self.internal_knots + self.degree + 1
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Index of the knot span containing `t`; `t = 1` maps to the last
    /// nonempty span so the right endpoint is covered.
    fn span(&self, t: f64) -> usize {
        let last = self.dim() - 1;
        if t >= 1.0 {
            return last;
        }
        // knots[q..=last+1] are the distinct breakpoints (with repetition at the ends)
        let mut lo = self.degree;
        let mut hi = last + 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if t < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// Evaluate the `q + 1` possibly nonzero basis functions at `t`.
    pub fn eval_sparse(&self, t: f64) -> Result<SparseBasis> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::invalid(format!(
                "basis evaluation point {t} outside [0, 1]"
            )));
        }
        let q = self.degree;
        let span = self.span(t);
        let k = &self.knots;
        let mut values = vec![0.0; q + 1];
        let mut left = vec![0.0; q + 1];
        let mut right = vec![0.0; q + 1];
        values[0] = 1.0;
        for j in 1..=q {
            left[j] = t - k[span + 1 - j];
            right[j] = k[span + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom == 0.0 { 0.0 } else { values[r] / denom };
                values[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            values[j] = saved;
        }
        Ok(SparseBasis {
            start: span - q,
            values,
        })
    }

    /// Dense `b(t)` of length `ℓ`.
    pub fn eval(&self, t: f64) -> Result<DVector<f64>> {
        Ok(self.eval_sparse(t)?.to_dense(self.dim()))
    }

    /// `M × ℓ` design matrix with rows `b(t_m)'`.
    pub fn design_matrix(&self, times: &[f64]) -> Result<DMatrix<f64>> {
        let mut b = DMatrix::zeros(times.len(), self.dim());
        for (m, &t) in times.iter().enumerate() {
            let row = self.eval_sparse(t)?;
            for (r, v) in row.values.iter().enumerate() {
                b[(m, row.start + r)] = *v;
            }
        }
        Ok(b)
    }
}

/// Integer finite-difference operator `D_ℓ^{(r)}` of shape `(ℓ - r) × ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffOperator {
    order: usize,
    matrix: DMatrix<i64>,
}

impl DiffOperator {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn matrix(&self) -> &DMatrix<i64> {
        &self.matrix
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        self.matrix.map(|v| v as f64)
    }

    /// `D' D` as a floating-point matrix.
    pub fn gram(&self) -> DMatrix<f64> {
        let d = self.to_f64();
        d.transpose() * d
    }
}

/// Order-`r` difference operator on `ℓ` coefficients.
pub fn diff_matrix(dim: usize, order: usize) -> Result<DiffOperator> {
    if order == 0 || order >= dim {
        return Err(Error::invalid(format!(
            "difference order {order} must satisfy 1 <= r < ℓ = {dim}"
        )));
    }
    // row g holds (-1)^{r-s} C(r, s) at column g + s
    let mut coeffs = vec![0i64; order + 1];
    let mut binom = 1i64;
    for (s, c) in coeffs.iter_mut().enumerate() {
        let sign = if (order - s).is_multiple_of(2) { 1 } else { -1 };
        *c = sign * binom;
        binom = binom * (order - s) as i64 / (s + 1) as i64;
    }
    let rows = dim - order;
    let mut matrix = DMatrix::zeros(rows, dim);
    for g in 0..rows {
        for (s, c) in coeffs.iter().enumerate() {
            matrix[(g, g + s)] = *c;
        }
    }
    Ok(DiffOperator { order, matrix })
}

/// Number of interior knots `⌈(nM)^{1/5}⌉` used by default.
pub fn default_basis_dim(n: usize, m: usize) -> usize {
    let target = (n.max(1) as u128) * (m.max(1) as u128);
    let mut k = (target as f64).powf(0.2).floor() as u128;
    while k.pow(5) < target {
        k += 1;
    }
    while k > 0 && (k - 1).pow(5) >= target {
        k -= 1;
    }
    k as usize
}
