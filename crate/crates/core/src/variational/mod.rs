//! Singular-kernel energies, their constrained maximizers and the closed-form constants.

pub mod constants;
pub mod kernel;
pub mod optimize;

pub use constants::{
    bridge_constants, gn_inequality_check, h_constant, theorem_limit, BridgeConstants, GnCheck,
};
pub use kernel::{KernelEnergy, KernelSpec};
pub use optimize::{
    maximize_m, maximize_sigma, objective_value_grad, Constraint, Objective, TestFunction,
    VariationalSolution, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
