//! The P-spline prior on a latent trajectory induces a covariance between
//! `u(s)` and `u(t)`; compare the closed form with the inverse precision.
//!
//! cargo run --example prior_covariance

use dynlsm::basis::BasisSpec;
use dynlsm::prior::{induced_traj_cov, precision_u};

fn main() -> dynlsm::Result<()> {
    let spec = BasisSpec::new(4, 3)?;
    let (sigma2, tau2) = (0.3, 1.0);
    let cov = precision_u(sigma2, tau2, spec.dim())?
        .try_inverse()
        .expect("prior precision is invertible");
    println!("    s     t   b(s)'Q^-1 b(t)   closed form");
    for (s, t) in [(0.0, 0.0), (0.1, 0.4), (0.5, 0.5), (0.3, 0.9), (1.0, 1.0)] {
        let direct = (spec.eval(s)?.transpose() * &cov * spec.eval(t)?)[0];
        let closed = induced_traj_cov(1.0, sigma2, tau2, &spec, s, t)?;
        println!("{s:>5.2} {t:>5.2}   {direct:>14.10}   {closed:>11.10}");
    }
    Ok(())
}
