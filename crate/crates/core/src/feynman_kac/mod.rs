//! Feynman-Kac functionals of Brownian paths in frozen or random potentials.

mod consistency;
mod moment;
mod paths;
mod spectral;

pub use consistency::{
    annealed_consistency, semigroup_consistency, AnnealedCheck, EnsembleSpec, SemigroupRow,
    MAX_EXPONENT,
};
pub use moment::{potential_line_integral, quenched_moment, MomentEstimate, MIN_ESS};
pub use paths::{sample_paths, BrownianPath, PathEnsemble, PathSource, PathSpec, MEMORY_BUDGET};
pub use spectral::{conditional_variance_spectral, QuadratureSpec};
