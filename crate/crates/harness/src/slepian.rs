//! Monte Carlo check of the Gaussian maximum comparison bound.
//!
//! For a centred Gaussian vector with equal variances `v` and largest off-diagonal
//! covariance `R <= v/2`:
//! `P{max ξ_k <= A} <= P{ξ_1 <= s (A + B)}^n + P{U >= B/√(2R)}`, `s = √((2R + v)/v)`.

use anderson_core::rng::stream;
use anderson_core::special::normal_cdf;
use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlepianCheck {
    pub lhs_freq: f64,
    pub rhs_bound: f64,
    /// Binomial standard error of `lhs_freq`.
    pub se: f64,
    pub holds: bool,
}

/// Relative tolerance on diagonal equality, symmetry and negative eigenvalues.
const MATRIX_TOL: f64 = 1e-10;

/// Right-hand side of the bound. With `R = 0` the second term vanishes for every `B > 0`.
pub fn slepian_bound(n: usize, var: f64, r: f64, a: f64, b: f64) -> f64 {
    let s = ((2.0 * r + var) / var).sqrt();
    let first = normal_cdf(s * (a + b) / var.sqrt()).powi(n as i32);
    let second = if r > 0.0 {
        1.0 - normal_cdf(b / (2.0 * r).sqrt())
    } else {
        0.0
    };
    first + second
}

/// `lhs_freq` is the empirical `P{max_k ξ_k <= A}` over `trials` draws;
/// the bound holds when `lhs_freq <= rhs_bound + 4 se`.
pub fn run_slepian_check(
    cov: &DMatrix<f64>,
    a: f64,
    b: f64,
    trials: usize,
    seed: u64,
) -> Result<SlepianCheck, HarnessError> {
    let n = cov.nrows();
    if n == 0 || cov.ncols() != n {
        return Err(HarnessError::Input("covariance must be a non-empty square matrix".into()));
    }
    if !(a > 0.0 && b > 0.0) || trials == 0 {
        return Err(HarnessError::Input("need A > 0, B > 0 and at least one trial".into()));
    }
    let var = cov[(0, 0)];
    if !(var > 0.0) {
        return Err(HarnessError::Input("variance must be positive".into()));
    }
    let mut r: f64 = 0.0;
    for i in 0..n {
        if (cov[(i, i)] - var).abs() > MATRIX_TOL * var {
            return Err(HarnessError::Input("components must share one variance".into()));
        }
        for j in 0..n {
            if (cov[(i, j)] - cov[(j, i)]).abs() > MATRIX_TOL * var {
                return Err(HarnessError::Input("covariance must be symmetric".into()));
            }
            if i != j {
                r = r.max(cov[(i, j)].abs());
            }
        }
    }
    if var < 2.0 * r {
        return Err(HarnessError::Input(format!(
            "need Var(ξ_1) >= 2R, got Var = {var} and R = {r}"
        )));
    }
    let eig = SymmetricEigen::new(cov.clone());
    let top = eig.eigenvalues.max();
    let low = eig.eigenvalues.min();
    if low < -MATRIX_TOL * top {
        return Err(HarnessError::Input(format!(
            "covariance is not positive semidefinite: eigenvalue {low:e}"
        )));
    }
    // ξ = Q Λ^{1/2} z
    let mut root = eig.eigenvectors.clone();
    for (j, l) in eig.eigenvalues.iter().enumerate() {
        let s = l.max(0.0).sqrt();
        root.column_mut(j).scale_mut(s);
    }
    let mut rng = stream(seed, 0);
    let mut z = nalgebra::DVector::zeros(n);
    let mut hits = 0usize;
    for _ in 0..trials {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let xi = &root * &z;
        if xi.max() <= a {
            hits += 1;
        }
    }
    let p = hits as f64 / trials as f64;
    let se = (p * (1.0 - p) / trials as f64).sqrt();
    let rhs = slepian_bound(n, var, r, a, b);
    Ok(SlepianCheck {
        lhs_freq: p,
        rhs_bound: rhs,
        se,
        holds: p <= rhs + 4.0 * se,
    })
}

/// Unit-variance equicorrelated covariance.
pub fn equicorrelated(n: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { rho })
}

/// A random correlation-type matrix with unit diagonal and off-diagonal entries at most ½.
pub fn random_psd(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = stream(seed, 1);
    let k = n + 2;
    let g = DMatrix::<f64>::from_fn(n, k, |_, _| StandardNormal.sample(&mut rng));
    let mut c = &g * g.transpose();
    let d: Vec<f64> = (0..n).map(|i| c[(i, i)].sqrt()).collect();
    for i in 0..n {
        for j in 0..n {
            c[(i, j)] /= d[i] * d[j];
        }
    }
    // Shrink toward the identity until Var >= 2R.
    let r = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| c[(i, j)].abs())
        .fold(0.0, f64::max);
    if r > 0.5 {
        let w = 0.5 / r;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    c[(i, j)] *= w;
                }
            }
        }
    }
    c
}
