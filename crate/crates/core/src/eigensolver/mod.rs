//! Principal eigenvalue of `½Δ_h + θV` with Dirichlet boundary on boxes of a grid.

pub mod decomposition;
pub mod lanczos;
pub mod operator;

pub use decomposition::{decomposition_gap, GapRow};
pub use lanczos::{principal_eigenvalue, EigenResult, DEFAULT_TOL, KRYLOV_DIM};
pub use operator::{assemble, rayleigh_quotient, DiscreteOperator};
