//! Closed-form relations between the variational constants and the growth-rate limits.

use serde::{Deserialize, Serialize};

use super::kernel::{KernelEnergy, KernelSpec};
use super::optimize::TestFunction;
use crate::error::{domain, Error, Result};
use crate::potentials::PotentialModel;
use crate::special::pow0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeConstants {
    pub kappa: f64,
    pub m_closed: f64,
    /// σ recomputed from κ, which must reproduce the input.
    pub sigma_closed_check: f64,
}

/// `σ = ((4-α)/4)^{(4-α)/4} (α/2)^{α/4} κ^{1/2}` inverted for κ, then
/// `M(θ) = ((4-α)/4) (α/2)^{α/(4-α)} κ^{2/(4-α)} θ^{4/(4-α)}`.
///
/// `α = 0` is accepted with `0⁰ = 1`.
pub fn bridge_constants(sigma: f64, alpha: f64, theta: f64) -> Result<BridgeConstants> {
    if !(0.0..2.0).contains(&alpha) {
        return Err(domain(format!("alpha must lie in [0, 2), got {alpha}")));
    }
    if !(sigma > 0.0) || !(theta > 0.0) {
        return Err(domain("sigma and theta must be positive"));
    }
    let q = (4.0 - alpha) / 4.0;
    let half = alpha / 2.0;
    let kappa = sigma * sigma / (q.powf(2.0 * q) * pow0(half, half));
    let p = 4.0 - alpha;
    let m_closed = q * pow0(half, alpha / p) * kappa.powf(2.0 / p) * theta.powf(4.0 / p);
    let sigma_closed_check = q.powf(q) * pow0(half, alpha / 4.0) * kappa.sqrt();
    Ok(BridgeConstants {
        kappa,
        m_closed,
        sigma_closed_check,
    })
}

/// `(d, α, c)` of a model, with `c` the covariance amplitude.
fn model_constants(model: &PotentialModel) -> Result<(usize, f64, f64)> {
    if let PotentialModel::WhiteNoise1D = model {
        return Err(Error::Unsupported(
            "the h-constant is not defined for white noise; use theorem_limit".into(),
        ));
    }
    model.validate()?;
    Ok((model.d(), model.alpha(), model.amplitude()))
}

/// `h(d, α) = ((4-α)/4) (α/2)^{α/(4-α)} (2 d c κ)^{2/(4-α)}`.
pub fn h_constant(model: &PotentialModel, kappa: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(domain(format!("kappa must be positive, got {kappa}")));
    }
    let (d, alpha, c) = model_constants(model)?;
    let p = 4.0 - alpha;
    Ok((p / 4.0) * (alpha / 2.0).powf(alpha / p) * (2.0 * d as f64 * c * kappa).powf(2.0 / p))
}

/// Almost-sure limit of `t^{-1} (log t)^{-2/(4-α)} log E exp{θ ∫ V(B_s) ds}`.
pub fn theorem_limit(model: &PotentialModel, theta: f64, kappa: Option<f64>) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(domain(format!("theta must be positive, got {theta}")));
    }
    if let PotentialModel::WhiteNoise1D = model {
        return Ok(0.5 * 1.5f64.powf(2.0 / 3.0) * theta.powf(4.0 / 3.0));
    }
    let kappa = kappa.ok_or_else(|| domain("kappa is required for this model"))?;
    let alpha = model.alpha();
    Ok(theta.powf(4.0 / (4.0 - alpha)) * h_constant(model, kappa)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Relative slack for discretization in [`gn_inequality_check`].
pub const GN_SLACK: f64 = 1e-2;

/// `E(f) <= κ ‖f‖^{4-α} ‖∇f‖^α`, up to [`GN_SLACK`].
pub fn gn_inequality_check(f: &TestFunction, kernel: &KernelSpec, kappa: f64) -> Result<GnCheck> {
    if !(f.l2_norm > 0.0) {
        return Err(domain("the zero function has no Gagliardo-Nirenberg ratio"));
    }
    let energy = KernelEnergy::new(kernel, &f.grid)?;
    let lhs = energy.energy(&f.values);
    let alpha = kernel.alpha_eff();
    let rhs = kappa * f.l2_norm.powf(4.0 - alpha) * f.grad_norm.powf(alpha);
    Ok(GnCheck {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + GN_SLACK),
    })
}
