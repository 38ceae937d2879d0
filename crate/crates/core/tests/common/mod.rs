//! Independent reference implementations shared by the integration tests.

#![allow(dead_code, clippy::needless_range_loop, clippy::too_many_arguments)]

use dynlsm::basis::BasisSpec;
use dynlsm::netdata::{CovariateSet, DynamicNetwork};
use dynlsm::prior::PriorConfig;
use dynlsm::varstate::VariationalState;
use nalgebra::{DMatrix, DVector};

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// `∫ exp(φ(s) − φ(mode)) ds` for a concave `φ`, over the range where the
/// integrand exceeds `e^{-60}`.
fn integrate_concave(phi: &dyn Fn(f64) -> f64, mode: f64, tol: f64) -> f64 {
    let top = phi(mode);
    let mut lo = mode - 1.0;
    while phi(lo) - top > -60.0 {
        lo = mode - 2.0 * (mode - lo);
    }
    let mut hi = mode + 1.0;
    while phi(hi) - top > -60.0 {
        hi = mode + 2.0 * (hi - mode);
    }
    let f = |s: f64| (phi(s) - top).exp();
    // split at the mode so the peak is a node
    let mut total = 0.0;
    for (a, b) in [(lo, mode), (mode, hi)] {
        let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
        let whole = simpson(a, b, fa, fm, fb);
        total += adaptive(&f, a, b, fa, fm, fb, whole, tol, 50);
    }
    total
}

/// `E[1/x]` for `x ~ GIG(a, b, p)` (density `∝ x^{p−1} e^{−(ax + b/x)/2}`),
/// by adaptive Simpson quadrature on the log scale.
pub fn gig_inv_moment_quadrature(a: f64, b: f64, p: f64) -> f64 {
    // with x = e^s the moments of order k are ∫ exp((p + k) s − (a e^s + b e^{−s})/2) ds
    let log_integral = |c: f64| {
        let phi = move |s: f64| c * s - 0.5 * (a * s.exp() + b * (-s).exp());
        let mode = ((c + (c * c + a * b).sqrt()) / a).ln();
        phi(mode) + integrate_concave(&phi, mode, 1e-14).ln()
    };
    (log_integral(p - 1.0) - log_integral(p)).exp()
}

/// `ln K_ν(x)` from `K_ν(x) = ∫_0^∞ exp(−x cosh u) cosh(ν u) du`, trapezoid
/// rule (exponentially convergent for this integrand).
pub fn log_bessel_k(nu: f64, x: f64) -> f64 {
    let nu = nu.abs();
    let log_f = |u: f64| -x * u.cosh() + nu * u + (1.0 + (-2.0 * nu * u).exp()).ln() - std::f64::consts::LN_2;
    let peak = (nu / x).asinh();
    let top = log_f(peak);
    let h = 1e-3;
    let mut upper = peak.max(1.0);
    while log_f(upper) - top > -80.0 {
        upper += 1.0;
    }
    let steps = (upper / h).ceil() as usize;
    let mut acc = 0.5 * (log_f(0.0) - top).exp();
    for s in 1..=steps {
        let w = if s == steps { 0.5 } else { 1.0 };
        acc += w * (log_f(s as f64 * h) - top).exp();
    }
    top + (acc * h).ln()
}

/// `E[1/σ²]` in the Bessel form `√a K_{v+1}(√(ab)) / (√b K_v(√(ab))) − 2v/b`.
pub fn gig_inv_moment_bessel(a: f64, b: f64, v: f64) -> f64 {
    let z = (a * b).sqrt();
    let ratio = (log_bessel_k(v + 1.0, z) - log_bessel_k(v, z)).exp();
    (a / b).sqrt() * ratio - 2.0 * v / b
}

/// `r`-th order difference operator, `(ℓ − r) × ℓ`, by repeated differencing.
pub fn difference_operator(dim: usize, order: usize) -> DMatrix<f64> {
    let mut d = DMatrix::<f64>::identity(dim, dim);
    for _ in 0..order {
        let rows = d.nrows() - 1;
        d = DMatrix::from_fn(rows, dim, |r, c| d[(r + 1, c)] - d[(r, c)]);
    }
    d
}

/// Natural parameters and variance-factor parameters after one full
/// coordinate-ascent pass computed from `state`.
#[derive(Debug, Clone)]
pub struct CaviStep {
    pub traj_lambda: Vec<DVector<f64>>,
    pub traj_precision: Vec<DMatrix<f64>>,
    pub coef_lambda: Vec<DVector<f64>>,
    pub coef_precision: Vec<DMatrix<f64>>,
    pub b_traj: Vec<f64>,
    pub b_coef: Vec<f64>,
    pub mgp_shape: Vec<f64>,
    pub mgp_rate: Vec<f64>,
}

/// Dense full-data updates, written directly from the model equations.
pub fn cavi_step(
    net: &DynamicNetwork,
    cov: &CovariateSet,
    basis: &BasisSpec,
    prior: &PriorConfig,
    state: &VariationalState,
    alpha: f64,
) -> CaviStep {
    let (n, d, p, dim) = (state.n(), state.d(), state.p(), basis.dim());
    let m_count = net.num_times();
    let self_loops = net.self_loops();
    let bvec: Vec<DVector<f64>> = net.times().iter().map(|&t| basis.eval(t).unwrap()).collect();

    // moments at each snapshot
    let mu_u = |m: usize, i: usize, h: usize| state.traj(i, h).mean().dot(&bvec[m]);
    let var_u = |m: usize, i: usize, h: usize| (bvec[m].transpose() * state.traj(i, h).cov() * &bvec[m])[0];
    let mu_b = |m: usize, k: usize| state.coef(k).mean().dot(&bvec[m]);
    let var_b = |m: usize, k: usize| (bvec[m].transpose() * state.coef(k).cov() * &bvec[m])[0];
    let x = |m: usize, i: usize, j: usize, k: usize| cov.value(m, i, j, k);
    let y = |m: usize, i: usize, j: usize| if net.has_edge(m, i, j) { 1.0 } else { 0.0 };
    let allowed = |i: usize, j: usize| self_loops || i != j;

    // Pólya-gamma means
    let omega = |m: usize, i: usize, j: usize| {
        let mean: f64 = (0..p).map(|k| mu_b(m, k) * x(m, i, j, k)).sum::<f64>()
            + (0..d).map(|h| mu_u(m, i, h) * mu_u(m, j, h)).sum::<f64>();
        let mut c2 = mean * mean;
        c2 += (0..p).map(|k| x(m, i, j, k).powi(2) * var_b(m, k)).sum::<f64>();
        c2 += (0..d).map(|h| var_u(m, i, h) * var_u(m, j, h)).sum::<f64>();
        c2 += (0..d).map(|h| mu_u(m, j, h).powi(2) * var_u(m, i, h)).sum::<f64>();
        c2 += (0..d).map(|h| mu_u(m, i, h).powi(2) * var_u(m, j, h)).sum::<f64>();
        let c = c2.sqrt();
        if c < 1e-8 {
            alpha / 4.0
        } else {
            alpha / (2.0 * c) * (c / 2.0).tanh()
        }
    };

    // variance-factor expectations
    let inv_sigma: Vec<f64> = state
        .sigma_traj()
        .iter()
        .map(|f| gig_inv_moment_bessel(f.a, f.b, f.p))
        .collect();
    let inv_sigma_beta: Vec<f64> = state
        .sigma_coef()
        .iter()
        .map(|f| gig_inv_moment_bessel(f.a, f.b, f.p))
        .collect();
    let ratio: Vec<f64> = state.mgp().iter().map(|g| g.shape / g.rate).collect();
    let gamma = |h: usize| ratio[..=h].iter().product::<f64>();
    let gamma_without = |t: usize, h: usize| (0..=t).filter(|&g| g != h).map(|g| ratio[g]).product::<f64>();

    let d1 = difference_operator(dim, 1);
    let g1 = d1.transpose() * &d1;
    let mut e1 = DMatrix::zeros(dim, dim);
    e1[(0, 0)] = 1.0;

    let mut traj_lambda = Vec::new();
    let mut traj_precision = Vec::new();
    for i in 0..n {
        for h in 0..d {
            let mut lam = DVector::zeros(dim);
            let mut prec = (&g1 * inv_sigma[i] + &e1 / prior.tau2) * gamma(h);
            for m in 0..m_count {
                let bb = &bvec[m] * bvec[m].transpose();
                for j in (0..n).filter(|&j| allowed(i, j)) {
                    let w = omega(m, i, j);
                    let xi: f64 = (0..p).map(|k| mu_b(m, k) * x(m, i, j, k)).sum::<f64>()
                        + (0..d).filter(|&g| g != h).map(|g| mu_u(m, i, g) * mu_u(m, j, g)).sum::<f64>();
                    lam += &bvec[m] * ((alpha * (y(m, i, j) - 0.5) - w * xi) * mu_u(m, j, h));
                    prec += &bb * (w * (mu_u(m, j, h).powi(2) + var_u(m, j, h)));
                }
            }
            traj_lambda.push(lam);
            traj_precision.push(prec);
        }
    }

    let mut coef_lambda = Vec::new();
    let mut coef_precision = Vec::new();
    for k in 0..p {
        let r = prior.order(k);
        let dr = difference_operator(dim, r);
        let mut prec = dr.transpose() * &dr * inv_sigma_beta[k];
        for s in 0..r {
            prec[(s, s)] += 1.0 / prior.tau2_beta;
        }
        let mut lam = DVector::zeros(dim);
        for m in 0..m_count {
            let bb = &bvec[m] * bvec[m].transpose();
            for i in 0..n {
                for j in (i..n).filter(|&j| allowed(i, j)) {
                    let w = omega(m, i, j);
                    let nu: f64 = (0..p).filter(|&g| g != k).map(|g| mu_b(m, g) * x(m, i, j, g)).sum::<f64>()
                        + (0..d).map(|h| mu_u(m, i, h) * mu_u(m, j, h)).sum::<f64>();
                    lam += &bvec[m] * ((alpha * (y(m, i, j) - 0.5) - w * nu) * x(m, i, j, k));
                    prec += &bb * (w * x(m, i, j, k).powi(2));
                }
            }
        }
        coef_lambda.push(lam);
        coef_precision.push(prec);
    }

    let quad = |mean: &DVector<f64>, cov: &DMatrix<f64>, a: &DMatrix<f64>| (mean.transpose() * a * mean)[0] + (a * cov).trace();
    let b_traj: Vec<f64> = (0..n)
        .map(|i| {
            (0..d)
                .map(|h| gamma(h) * quad(state.traj(i, h).mean(), state.traj(i, h).cov(), &g1))
                .sum()
        })
        .collect();
    let b_coef: Vec<f64> = (0..p)
        .map(|k| {
            let dr = difference_operator(dim, prior.order(k));
            quad(state.coef(k).mean(), state.coef(k).cov(), &(dr.transpose() * &dr))
        })
        .collect();
    let mgp_shape: Vec<f64> = (0..d)
        .map(|h| {
            let one_based = (h + 1) as f64;
            if h == 0 {
                prior.a1 + (d * n * dim) as f64 / 2.0
            } else {
                prior.a2 + (d as f64 - one_based + 1.0) * (n * dim) as f64 / 2.0
            }
        })
        .collect();
    let mgp_rate: Vec<f64> = (0..d)
        .map(|h| {
            let mut acc = 0.0;
            for t in h..d {
                let inner: f64 = (0..n)
                    .map(|i| {
                        let blk = state.traj(i, t);
                        inv_sigma[i] * quad(blk.mean(), blk.cov(), &g1)
                            + (blk.mean()[0].powi(2) + blk.cov()[(0, 0)]) / prior.tau2
                    })
                    .sum();
                acc += gamma_without(t, h) * inner;
            }
            1.0 + 0.5 * acc
        })
        .collect();

    CaviStep {
        traj_lambda,
        traj_precision,
        coef_lambda,
        coef_precision,
        b_traj,
        b_coef,
        mgp_shape,
        mgp_rate,
    }
}

/// Largest entrywise gap relative to `max(1, |oracle|)`.
pub fn rel_gap<'a>(got: impl IntoIterator<Item = &'a f64>, want: impl IntoIterator<Item = &'a f64>) -> f64 {
    got.into_iter()
        .zip(want)
        .map(|(g, w)| (g - w).abs() / w.abs().max(1.0))
        .fold(0.0, f64::max)
}

use dynlsm::svi::mgp_shapes;
use dynlsm::varstate::{GammaFactor, GaussianBlock, GigFactor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn random_spd(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = gaussian_matrix(dim, dim, rng);
    &a * a.transpose() * 0.5 + DMatrix::identity(dim, dim)
}

fn random_block(dim: usize, rng: &mut ChaCha8Rng) -> GaussianBlock {
    let lambda = DVector::from_fn(dim, |_, _| StandardNormal.sample(rng));
    GaussianBlock::from_natural(lambda, random_spd(dim, rng)).unwrap()
}

/// A state with random Gaussian blocks and variance factors.
pub fn random_state(n: usize, d: usize, basis: &BasisSpec, prior: &PriorConfig, p: usize, rng: &mut ChaCha8Rng) -> VariationalState {
    let dim = basis.dim();
    let traj = (0..n * d).map(|_| random_block(dim, rng)).collect();
    let coef = (0..p).map(|_| random_block(dim, rng)).collect();
    let sigma_traj = (0..n)
        .map(|_| GigFactor {
            a: prior.d_sigma,
            b: rng.random_range(1.0..50.0),
            p: (prior.c_sigma - (d * (dim - 1)) as f64) / 2.0,
        })
        .collect();
    let sigma_coef = (0..p)
        .map(|k| GigFactor {
            a: prior.d_sigma,
            b: rng.random_range(1.0..50.0),
            p: (prior.c_sigma - (dim - prior.order(k)) as f64) / 2.0,
        })
        .collect();
    let mgp = mgp_shapes(prior.a1, prior.a2, d, n, dim)
        .into_iter()
        .map(|shape| GammaFactor {
            shape,
            rate: shape * rng.random_range(0.5..2.0),
        })
        .collect();
    VariationalState::new(n, d, dim, traj, coef, sigma_traj, sigma_coef, mgp).unwrap()
}

/// Random network on `n` nodes and `m` snapshots with an intercept plus one
/// time-varying covariate.
pub fn random_network(n: usize, times: &[f64], self_loops: bool, rng: &mut ChaCha8Rng) -> (DynamicNetwork, CovariateSet) {
    let mut edges = Vec::new();
    let mut layers = Vec::new();
    for m in 0..times.len() {
        for i in 0..n {
            let j0 = if self_loops { i } else { i + 1 };
            for j in j0..n {
                if rng.random::<f64>() < 0.35 {
                    edges.push((m, i, j));
                }
            }
        }
        let a = gaussian_matrix(n, n, rng);
        layers.push(vec![(&a + a.transpose()) * 0.5]);
    }
    let net = DynamicNetwork::from_edges(n, times, &edges, self_loops).unwrap();
    let cov = CovariateSet::from_time_varying(n, &layers, true).unwrap();
    (net, cov)
}
