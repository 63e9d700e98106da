//! Special functions used across the crate.

use std::f64::consts::PI;

pub use puruspe::{gamma, ln_gamma};

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * puruspe::erfc(-x / std::f64::consts::SQRT_2)
}

/// Surface area of the unit sphere S^{d-1} in R^d.
pub fn sphere_area(d: usize) -> f64 {
    let half = d as f64 / 2.0;
    2.0 * PI.powf(half) / gamma(half)
}

/// Spherical mean of `exp(i z ω·e)` over the unit sphere of R^d.
///
/// Equals `Γ(d/2) (2/z)^{d/2-1} J_{d/2-1}(z)`; `cos z` in one dimension,
/// `J_0(z)` in two and `sin z / z` in three.
pub fn spherical_mean(d: usize, z: f64) -> f64 {
    let z = z.abs();
    if z < 1e-6 {
        return 1.0 - z * z / (2.0 * d as f64);
    }
    match d {
        1 => z.cos(),
        2 => puruspe::Jn(0, z),
        3 => z.sin() / z,
        _ => {
            let nu = d as f64 / 2.0 - 1.0;
            let j = if d.is_multiple_of(2) {
                puruspe::Jn(nu as u32, z)
            } else {
                puruspe::besseljy(nu, z).0
            };
            gamma(d as f64 / 2.0) * (2.0 / z).powf(nu) * j
        }
    }
}

/// Fourier transform of `|x|^{-a}` in R^d, as the constant `c` in `c |λ|^{a-d}`.
///
/// Valid for `0 < a < d`.
pub fn riesz_fourier_constant(d: usize, a: f64) -> f64 {
    let d = d as f64;
    2f64.powf(d - a) * PI.powf(d / 2.0) * gamma((d - a) / 2.0) / gamma(a / 2.0)
}

/// `x^y` with the convention `0^0 = 1`.
pub(crate) fn pow0(x: f64, y: f64) -> f64 {
    if y == 0.0 {
        1.0
    } else {
        x.powf(y)
    }
}
