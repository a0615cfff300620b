//! Inference for non-negative counts that are only observed through a
//! rounded average.
//!
//! A total count `Y` over `n` measurements is reported as `[Y/n]`, the
//! average rounded to the nearest integer, so the usable proxy is
//! `U = n·[Y/n]` on the lattice `{0, n, 2n, …}`. This crate computes the
//! exact distribution of `U`, its generating function and moments,
//! likelihood-based estimators built on the binned likelihood, exact and
//! Monte Carlo mean squared errors, and two applied workflows: excess
//! deaths from rounded averages and tests on a binomial success
//! probability.
//!
//! Module map:
//!
//! - [`dist`]: latent count models (Poisson, binomial, negative binomial).
//! - [`rounding`]: rounding rules, the pmf/pgf/moments of `U`, sampling,
//!   and large-sample reference values of the Poisson MLE.
//! - [`estimation`]: closed-form and numeric MLEs, exact and Monte Carlo
//!   MSE, and the rounded/unrounded MSE ratio.
//! - [`apps`]: excess deaths and significance-level analysis.
//! - [`sim`]: seeded, order-independent Monte Carlo experiments.
//! - [`table`] and [`grid`]: CSV tables and grid specifications used by the
//!   command-line front end.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod apps;
pub mod dist;
mod error;
pub mod estimation;
pub mod grid;
mod loader;
pub mod rounding;
pub mod sim;
pub mod table;

pub use dist::{CountModel, Family};
pub use error::{Error, Result};
pub use rounding::{RoundedPmf, RoundingScheme, TieRule};
