//! Modified Bessel functions of the second kind for real order.
//!
//! Temme's series (small argument) and Steed's continued fraction (large
//! argument) give `K_μ` and `K_{μ+1}` for `|μ| ≤ 1/2`; higher orders follow
//! from the forward recurrence, which is stable for `K`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const EPS: f64 = 1e-16;
const FPMIN: f64 = 1e-300;
const MAXIT: usize = 10_000;
const XMIN: f64 = 2.0;

const CHEB_GAM1: [f64; 7] = [
    -1.142022680371168e0,
    6.5165112670737e-3,
    3.087090173086e-4,
    -3.4706269649e-6,
    6.9437664e-9,
    3.67795e-11,
    -1.356e-13,
];
const CHEB_GAM2: [f64; 8] = [
    1.843740587300905e0,
    -7.68528408447867e-2,
    1.2719271366546e-3,
    -4.9717367042e-6,
    -3.31261198e-8,
    2.423096e-10,
    -1.702e-13,
    -1.49e-15,
];

fn chebev(c: &[f64], y: f64) -> f64 {
    let y2 = 2.0 * y;
    let (mut d, mut dd) = (0.0, 0.0);
    for &cj in c.iter().skip(1).rev() {
        let sv = d;
        d = y2 * d - dd + cj;
        dd = sv;
    }
    y * d - dd + 0.5 * c[0]
}

/// `(Γ₁, Γ₂, 1/Γ(1+μ), 1/Γ(1−μ))` for `|μ| ≤ 1/2`.
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    let xx = 8.0 * mu * mu - 1.0;
    let gam1 = chebev(&CHEB_GAM1, xx);
    let gam2 = chebev(&CHEB_GAM2, xx);
    (gam1, gam2, gam2 - mu * gam1, gam2 + mu * gam1)
}

/// `e^x K_μ(x)` and `e^x K_{μ+1}(x)` for `|μ| ≤ 1/2`.
fn scaled_pair(mu: f64, x: f64) -> Result<(f64, f64)> {
    let mu2 = mu * mu;
    let xi = 1.0 / x;
    if x < XMIN {
        let x2 = 0.5 * x;
        let pimu = PI * mu;
        let fact = if pimu.abs() < EPS { 1.0 } else { pimu / pimu.sin() };
        let d = -x2.ln();
        let e = mu * d;
        let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = temme_gammas(mu);
        let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let mut sum = ff;
        let ee = e.exp();
        let mut p = 0.5 * ee / gampl;
        let mut q = 0.5 / (ee * gammi);
        let mut c = 1.0;
        let dd = x2 * x2;
        let mut sum1 = p;
        let mut converged = false;
        for i in 1..=MAXIT {
            let fi = i as f64;
            ff = (fi * ff + p + q) / (fi * fi - mu2);
            c *= dd / fi;
            p /= fi - mu;
            q /= fi + mu;
            let del = c * ff;
            sum += del;
            sum1 += c * (p - fi * ff);
            if del.abs() < sum.abs() * EPS {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::numerical(format!(
                "Bessel K series failed to converge at x = {x}"
            )));
        }
        let scale = x.exp();
        Ok((sum * scale, sum1 * 2.0 * xi * scale))
    } else {
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut delh = d;
        let mut h = d;
        let mut q1 = 0.0;
        let mut q2 = 1.0;
        let a1 = 0.25 - mu2;
        let mut q = a1;
        let mut c = a1;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        let mut converged = false;
        for i in 2..=MAXIT {
            let fi = i as f64;
            a -= 2.0 * (fi - 1.0);
            c = -a * c / fi;
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh *= b * d - 1.0;
            h += delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < EPS {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::numerical(format!(
                "Bessel K continued fraction failed to converge at x = {x}"
            )));
        }
        h *= a1;
        let kmu = (PI / (2.0 * x)).sqrt() / s;
        let k1 = kmu * (mu + x + 0.5 - h) * xi;
        Ok((kmu, k1))
    }
}

fn check_arg(nu: f64, x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() || !nu.is_finite() {
        return Err(Error::numerical(format!(
            "Bessel K requires finite order and positive argument (nu = {nu}, x = {x})"
        )));
    }
    Ok(())
}

/// `K_{ν+1}(x) / K_ν(x)` for any real `ν` and `x > 0`.
///
/// Computed without forming either Bessel value, so it stays finite for
/// large `|ν|` and small `x` where `K_ν` itself overflows.
pub fn bessel_k_ratio(nu: f64, x: f64) -> Result<f64> {
    check_arg(nu, x)?;
    if nu < -0.5 {
        // K_{-v} = K_v
        return Ok(1.0 / bessel_k_ratio(-nu - 1.0, x)?);
    }
    let steps = (nu + 0.5).floor();
    let mu = nu - steps;
    let (kmu, k1) = scaled_pair(mu, x)?;
    let mut r = k1 / kmu;
    let xi2 = 2.0 / x;
    for j in 1..=(steps as usize) {
        r = 1.0 / r + (mu + j as f64) * xi2;
    }
    if !r.is_finite() || r <= 0.0 {
        return Err(Error::numerical(format!(
            "Bessel K ratio not representable at nu = {nu}, x = {x}"
        )));
    }
    Ok(r)
}

/// Exponentially scaled `e^x K_ν(x)`.
pub fn bessel_k_scaled(nu: f64, x: f64) -> Result<f64> {
    check_arg(nu, x)?;
    let nu = nu.abs();
    let steps = (nu + 0.5).floor();
    let mu = nu - steps;
    let (mut kmu, mut k1) = scaled_pair(mu, x)?;
    let xi2 = 2.0 / x;
    for j in 1..=(steps as usize) {
        let next = (mu + j as f64) * xi2 * k1 + kmu;
        kmu = k1;
        k1 = next;
    }
    if !kmu.is_finite() || kmu < FPMIN {
        return Err(Error::numerical(format!(
            "scaled Bessel K overflows at nu = {nu}, x = {x}"
        )));
    }
    Ok(kmu)
}
