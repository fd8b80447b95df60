//! Sparse Bayesian linear and logistic regression with the horseshoe prior.
//!
//! The crate covers the full workflow around the horseshoe's global
//! shrinkage parameter `tau`:
//!
//! - [`shrinkage`]: closed-form shrinkage factors, their prior density and
//!   moments, the effective model size `m_eff`, and the reference scale
//!   `tau_0` that centers the prior for `m_eff` on a guessed number of
//!   relevant predictors.
//! - [`distributions`]: half-normal / half-Cauchy / half-t hyperpriors with
//!   sampling, log densities, and reproducible RNG streams.
//! - [`prior_design`]: turning a guess `p0` into a hyperprior for `tau` and
//!   simulating the prior it imposes on `m_eff`.
//! - [`glm`]: Gaussian pseudo-observations for non-Gaussian likelihoods and
//!   the `sigma = 2` logistic plug-in.
//! - [`inference`]: Hamiltonian Monte Carlo on the non-centered
//!   parametrization, with dual-averaging step-size adaptation, divergence
//!   tracking, split R-hat / ESS diagnostics, and posterior predictions.
//! - [`lasso`]: an L1 baseline fit by coordinate descent with
//!   cross-validated penalty and the Reid residual-variance estimator.
//! - [`data`] and [`experiments`]: CSV ingestion, standardization, splits,
//!   synthetic generators, and the experiment runners behind the CLI.
//!
//! Each major capability has a runnable example under `examples/`; start
//! with `cargo run --release --example design_prior`.

pub mod data;
pub mod distributions;
pub mod error;
pub mod experiments;
pub mod glm;
pub mod inference;
pub mod lasso;
mod linalg;
pub mod prior_design;
pub mod shrinkage;
pub mod stats;

pub use error::{Error, Result};
