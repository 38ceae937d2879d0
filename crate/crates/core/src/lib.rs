//! Continuous-time dynamic latent space models for time-stamped binary networks.
//!
//! Each node carries a latent trajectory `u_i(t)` and each dyadic covariate a
//! time-varying coefficient `beta_k(t)`; the log-odds of an edge between `i`
//! and `j` at time `t` is `beta(t)' x_ij(t) + u_i(t)' u_j(t)`. All latent
//! functions are expanded in a shared cubic B-spline basis whose coefficients
//! carry random-walk (P-spline) priors with learned transition variances and a
//! multiplicative gamma process over latent dimensions.
//!
//! The variational posterior is fitted by stochastic variational inference
//! with natural gradients, made conjugate by Pólya-gamma augmentation of the
//! tempered logistic likelihood, and made cheap by subsampling time points and
//! non-edges.
//!
//! The main entry points are:
//!
//! * [`simgen::generate`] to draw a synthetic dynamic network,
//! * [`init::initialize`] and [`svi::fit`] to fit the model,
//! * [`eval`] for error metrics, AUC and credible bands,
//! * [`cli`] for the file-based `simulate` / `fit` / `eval` workflow.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod align;
pub mod basis;
pub mod cli;
pub mod error;
pub mod eval;
pub mod init;
pub mod linalg;
pub mod netdata;
pub mod pg;
pub mod prior;
pub mod rng;
pub mod simgen;
pub mod special;
pub mod svi;
pub mod varstate;

pub use error::{Error, Result};
