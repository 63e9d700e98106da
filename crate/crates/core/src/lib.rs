//! Numerical objects around the parabolic Anderson model with Gaussian potentials:
//! field synthesis, principal eigenvalues of `½Δ + θV`, Feynman-Kac Monte Carlo and
//! the variational constants governing the quenched growth rate.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eigensolver;
pub mod error;
pub mod feynman_kac;
pub mod fft;
pub mod grid;
pub mod potentials;
pub mod quad;
pub mod rng;
pub mod special;
pub mod variational;

pub use error::{Error, Result};
pub use grid::GridSpec;
pub use potentials::{FieldSample, PotentialModel};
