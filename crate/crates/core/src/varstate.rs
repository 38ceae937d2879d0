//! Variational factors and the expectations every update needs.
//!
//! Gaussian blocks keep natural parameters as the source of truth and cache
//! the moment form. Walk variances have GIG factors and the shrinkage
//! multipliers have Gamma factors.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::{DMatrix, DVector};

use crate::basis::BasisSpec;
use crate::error::{Error, Result};
use crate::linalg::cholesky_jitter;
use crate::special::bessel_k_ratio;

/// Gaussian factor in natural `(λ, Λ)` and moment `(μ, Σ)` form.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBlock {
    lambda: DVector<f64>,
    precision: DMatrix<f64>,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianBlock {
    pub fn from_natural(lambda: DVector<f64>, precision: DMatrix<f64>) -> Result<Self> {
        let mut block = GaussianBlock {
            mean: DVector::zeros(lambda.len()),
            cov: DMatrix::zeros(lambda.len(), lambda.len()),
            lambda,
            precision,
        };
        block.refresh()?;
        Ok(block)
    }

    /// Block with identity precision centred at `mean`.
    pub fn unit_precision(mean: DVector<f64>) -> Self {
        let dim = mean.len();
        GaussianBlock {
            lambda: mean.clone(),
            precision: DMatrix::identity(dim, dim),
            cov: DMatrix::identity(dim, dim),
            mean,
        }
    }

    fn refresh(&mut self) -> Result<()> {
        let dim = self.lambda.len();
        if self.precision.nrows() != dim || self.precision.ncols() != dim {
            return Err(Error::Dimension(format!(
                "precision is {}x{}, expected {dim}x{dim}",
                self.precision.nrows(),
                self.precision.ncols()
            )));
        }
        let factor = cholesky_jitter(&self.precision)?;
        if factor.jitter > 0.0 {
            for g in 0..dim {
                self.precision[(g, g)] += factor.jitter;
            }
        }
        self.precision = (&self.precision + self.precision.transpose()) * 0.5;
        self.cov = factor.chol.inverse();
        self.cov = (&self.cov + self.cov.transpose()) * 0.5;
        self.mean = factor.chol.solve(&self.lambda);
        if self.mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("non-finite Gaussian mean"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    pub fn lambda(&self) -> &DVector<f64> {
        &self.lambda
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// `(1 − ρ)·current + ρ·target` on the natural parameters.
    pub fn blend(&mut self, target: &NaturalTarget, rho: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::invalid(format!("step size {rho} outside [0, 1]")));
        }
        if rho == 0.0 {
            return Ok(());
        }
        if rho == 1.0 {
            self.lambda.copy_from(&target.lambda);
            self.precision.copy_from(&target.precision);
        } else {
            self.lambda = &self.lambda * (1.0 - rho) + &target.lambda * rho;
            self.precision = &self.precision * (1.0 - rho) + &target.precision * rho;
        }
        self.refresh()
    }
}

/// Natural-parameter target `(λ̄, Λ̄)` of one Gaussian block.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalTarget {
    pub lambda: DVector<f64>,
    pub precision: DMatrix<f64>,
}

impl NaturalTarget {
    pub fn zeros(dim: usize) -> Self {
        NaturalTarget {
            lambda: DVector::zeros(dim),
            precision: DMatrix::zeros(dim, dim),
        }
    }
}

/// `GIG(a, b, p)` with density proportional to `x^{p−1} exp(−(a x + b / x) / 2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GigFactor {
    pub a: f64,
    pub b: f64,
    pub p: f64,
}

impl GigFactor {
    pub fn expect_inv(&self) -> Result<f64> {
        gig_expect_inv(self.a, self.b, self.p)
    }
}

/// `Gamma(shape, rate)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaFactor {
    pub shape: f64,
    pub rate: f64,
}

impl GammaFactor {
    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }
}

/// `E[1/x]` for `x ~ GIG(a, b, p)`, via `√(a/b) K_{p−1}(√(ab)) / K_p(√(ab))`.
pub fn gig_expect_inv(a: f64, b: f64, p: f64) -> Result<f64> {
    if !(a > 0.0) || !(b > 0.0) || !a.is_finite() || !b.is_finite() || !p.is_finite() {
        return Err(Error::invalid(format!(
            "GIG parameters must satisfy a, b > 0 (a = {a}, b = {b}, p = {p})"
        )));
    }
    let omega = (a * b).sqrt();
    let ratio = bessel_k_ratio(p - 1.0, omega)?;
    let v = (a / b).sqrt() / ratio;
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::numerical(format!(
            "GIG inverse moment not representable (a = {a}, b = {b}, p = {p})"
        )));
    }
    Ok(v)
}

/// `E[wᵀAw] = μᵀAμ + tr(AΣ)`.
pub fn expect_quadform(mean: &DVector<f64>, cov: &DMatrix<f64>, a: &DMatrix<f64>) -> f64 {
    let quad = (a * mean).dot(mean);
    // tr(AΣ) = Σ_gh A_gh Σ_hg
    let trace: f64 = a.iter().zip(cov.transpose().iter()).map(|(x, y)| x * y).sum();
    quad + trace
}

/// All variational parameters of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalState {
    n: usize,
    d: usize,
    dim: usize,
    p: usize,
    traj: Vec<GaussianBlock>,
    coef: Vec<GaussianBlock>,
    sigma_traj: Vec<GigFactor>,
    sigma_coef: Vec<GigFactor>,
    mgp: Vec<GammaFactor>,
    inv_sigma_traj: Vec<f64>,
    inv_sigma_coef: Vec<f64>,
    gamma_mean: Vec<f64>,
}

impl VariationalState {
    /// Assemble a state; trajectory blocks are indexed `i * d + h`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        d: usize,
        dim: usize,
        traj: Vec<GaussianBlock>,
        coef: Vec<GaussianBlock>,
        sigma_traj: Vec<GigFactor>,
        sigma_coef: Vec<GigFactor>,
        mgp: Vec<GammaFactor>,
    ) -> Result<Self> {
        let p = coef.len();
        if traj.len() != n * d
            || sigma_traj.len() != n
            || sigma_coef.len() != p
            || mgp.len() != d
            || traj.iter().chain(coef.iter()).any(|b| b.dim() != dim)
        {
            return Err(Error::Dimension("inconsistent variational state layout".into()));
        }
        let mut state = VariationalState {
            n,
            d,
            dim,
            p,
            traj,
            coef,
            sigma_traj,
            sigma_coef,
            mgp,
            inv_sigma_traj: vec![0.0; n],
            inv_sigma_coef: vec![0.0; p],
            gamma_mean: vec![0.0; d],
        };
        state.refresh_caches()?;
        Ok(state)
    }

    /// Recompute `E[1/σ²]` and `E[γ_h]` from the factor parameters.
    pub fn refresh_caches(&mut self) -> Result<()> {
        for (c, f) in self.inv_sigma_traj.iter_mut().zip(&self.sigma_traj) {
            *c = f.expect_inv()?;
        }
        for (c, f) in self.inv_sigma_coef.iter_mut().zip(&self.sigma_coef) {
            *c = f.expect_inv()?;
        }
        let mut acc = 1.0;
        for (c, f) in self.gamma_mean.iter_mut().zip(&self.mgp) {
            if !(f.shape > 0.0 && f.rate > 0.0) {
                return Err(Error::numerical("Gamma factor with nonpositive parameter"));
            }
            acc *= f.mean();
            *c = acc;
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn traj(&self, i: usize, h: usize) -> &GaussianBlock {
        &self.traj[i * self.d + h]
    }

    pub fn traj_mut(&mut self, i: usize, h: usize) -> &mut GaussianBlock {
        &mut self.traj[i * self.d + h]
    }

    pub fn traj_blocks(&self) -> &[GaussianBlock] {
        &self.traj
    }

    pub fn traj_blocks_mut(&mut self) -> &mut [GaussianBlock] {
        &mut self.traj
    }

    pub fn coef(&self, k: usize) -> &GaussianBlock {
        &self.coef[k]
    }

    pub fn coef_blocks_mut(&mut self) -> &mut [GaussianBlock] {
        &mut self.coef
    }

    pub fn sigma_traj(&self) -> &[GigFactor] {
        &self.sigma_traj
    }

    pub fn sigma_coef(&self) -> &[GigFactor] {
        &self.sigma_coef
    }

    pub fn mgp(&self) -> &[GammaFactor] {
        &self.mgp
    }

    /// Replace the variance factors and refresh the caches.
    pub fn set_variance_factors(
        &mut self,
        sigma_traj: Vec<GigFactor>,
        sigma_coef: Vec<GigFactor>,
        mgp: Vec<GammaFactor>,
    ) -> Result<()> {
        if sigma_traj.len() != self.n || sigma_coef.len() != self.p || mgp.len() != self.d {
            return Err(Error::Dimension("variance factor count mismatch".into()));
        }
        self.sigma_traj = sigma_traj;
        self.sigma_coef = sigma_coef;
        self.mgp = mgp;
        self.refresh_caches()
    }

    /// Cached `E[1/σ_i²]`.
    pub fn inv_sigma_traj(&self, i: usize) -> f64 {
        self.inv_sigma_traj[i]
    }

    /// Cached `E[1/σ_{β_k}²]`.
    pub fn inv_sigma_coef(&self, k: usize) -> f64 {
        self.inv_sigma_coef[k]
    }

    /// `E[γ_h] = ∏_{s≤h} E[ν_s]` (zero-based `h`).
    pub fn expect_mgp(&self, h: usize) -> f64 {
        self.gamma_mean[h]
    }

    /// `∏_{g≤t, g≠h} E[ν_g]`, the expected `γ_t` with factor `h` removed.
    pub fn expect_mgp_without(&self, t: usize, h: usize) -> f64 {
        self.mgp[..=t]
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != h)
            .map(|(_, f)| f.mean())
            .product()
    }

    /// Mean and variance of `u_ih(t)` under the variational posterior.
    pub fn expect_traj(&self, spec: &BasisSpec, i: usize, h: usize, t: f64) -> Result<(f64, f64)> {
        let b = spec.eval_sparse(t)?;
        let block = self.traj(i, h);
        Ok((b.dot(block.mean()), b.quad(block.cov()).max(0.0)))
    }

    /// Mean and variance of `β_k(t)`.
    pub fn expect_coef(&self, spec: &BasisSpec, k: usize, t: f64) -> Result<(f64, f64)> {
        let b = spec.eval_sparse(t)?;
        let block = self.coef(k);
        Ok((b.dot(block.mean()), b.quad(block.cov()).max(0.0)))
    }

    /// `n × d` matrix of trajectory means at time `t`.
    pub fn traj_means_at(&self, spec: &BasisSpec, t: f64) -> Result<DMatrix<f64>> {
        let b = spec.eval_sparse(t)?;
        Ok(DMatrix::from_fn(self.n, self.d, |i, h| b.dot(self.traj(i, h).mean())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut std::io::BufReader::new(file))
    }

    /// Little-endian layout: magic, version, `n, d, ℓ, p` as u64, then each
    /// Gaussian block as `λ` and row-major `Λ`, then GIG `(a, b, p)` triples
    /// and Gamma `(shape, rate)` pairs.
    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
        for v in [self.n, self.d, self.dim, self.p] {
            w.write_u64::<LittleEndian>(v as u64)?;
        }
        for block in self.traj.iter().chain(&self.coef) {
            for v in block.lambda.iter() {
                w.write_f64::<LittleEndian>(*v)?;
            }
            for r in 0..self.dim {
                for c in 0..self.dim {
                    w.write_f64::<LittleEndian>(block.precision[(r, c)])?;
                }
            }
        }
        for f in self.sigma_traj.iter().chain(&self.sigma_coef) {
            for v in [f.a, f.b, f.p] {
                w.write_f64::<LittleEndian>(v)?;
            }
        }
        for f in &self.mgp {
            w.write_f64::<LittleEndian>(f.shape)?;
            w.write_f64::<LittleEndian>(f.rate)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let fmt = |e: std::io::Error| Error::Format(e.to_string());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(fmt)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic bytes".into()));
        }
        let version = r.read_u32::<LittleEndian>().map_err(fmt)?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let mut dims = [0usize; 4];
        for v in dims.iter_mut() {
            *v = r.read_u64::<LittleEndian>().map_err(fmt)? as usize;
        }
        let [n, d, dim, p] = dims;
        if dim == 0 || dim > 10_000 || n > 10_000_000 || d > 10_000 || p > 10_000 {
            return Err(Error::Format(format!("implausible dimensions {dims:?}")));
        }
        let read_block = |r: &mut R| -> Result<GaussianBlock> {
            let mut lambda = DVector::zeros(dim);
            for v in lambda.iter_mut() {
                *v = r.read_f64::<LittleEndian>().map_err(fmt)?;
            }
            let mut precision = DMatrix::zeros(dim, dim);
            for row in 0..dim {
                for col in 0..dim {
                    precision[(row, col)] = r.read_f64::<LittleEndian>().map_err(fmt)?;
                }
            }
            GaussianBlock::from_natural(lambda, precision)
        };
        let traj = (0..n * d).map(|_| read_block(r)).collect::<Result<Vec<_>>>()?;
        let coef = (0..p).map(|_| read_block(r)).collect::<Result<Vec<_>>>()?;
        let read_gig = |r: &mut R| -> Result<GigFactor> {
            Ok(GigFactor {
                a: r.read_f64::<LittleEndian>().map_err(fmt)?,
                b: r.read_f64::<LittleEndian>().map_err(fmt)?,
                p: r.read_f64::<LittleEndian>().map_err(fmt)?,
            })
        };
        let sigma_traj = (0..n).map(|_| read_gig(r)).collect::<Result<Vec<_>>>()?;
        let sigma_coef = (0..p).map(|_| read_gig(r)).collect::<Result<Vec<_>>>()?;
        let mgp = (0..d)
            .map(|_| {
                Ok(GammaFactor {
                    shape: r.read_f64::<LittleEndian>().map_err(fmt)?,
                    rate: r.read_f64::<LittleEndian>().map_err(fmt)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing).map_err(fmt)? != 0 {
            return Err(Error::Format("trailing bytes after state".into()));
        }
        Self::new(n, d, dim, traj, coef, sigma_traj, sigma_coef, mgp)
    }
}

const MAGIC: &[u8; 8] = b"DLSMSTAT";
const FORMAT_VERSION: u32 = 1;
