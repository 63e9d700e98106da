//! Conditional variance of the line integral given the path, from the spectral measure.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::paths::BrownianPath;
use crate::error::{domain, Error, Result};
use crate::potentials::{mollifier, spectral_density, Mollifier, PotentialModel};
use crate::quad::{gl16, gl32, power_weight_rule};
use crate::rng::rng_from_seed;
use crate::special::sphere_area;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Frequencies are cut at `k_max / ε`, where `F(l)²` is below `1e-11`.
    pub k_max: f64,
    pub rel_tol: f64,
    /// Resolution doublings allowed after the first pair of evaluations.
    pub max_refinements: usize,
    /// Frequency samples for `d = 3`.
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            k_max: 40.0,
            rel_tol: 1e-6,
            max_refinements: 3,
            mc_samples: 20_000,
            seed: 0,
        }
    }
}

/// `|Σ_k w_k e^{i r p_k}|²` for `r = r0 + j δ`, `j = 0..count`, by phase recurrence.
fn modulus_on_ray(p: &[f64], w: &[f64], r0: f64, delta: f64, count: usize, out: &mut Vec<f64>) {
    out.clear();
    let mut z: Vec<(f64, f64)> = p.iter().map(|&x| (r0 * x).sin_cos()).map(|(s, c)| (c, s)).collect();
    let rot: Vec<(f64, f64)> = p.iter().map(|&x| (delta * x).sin_cos()).map(|(s, c)| (c, s)).collect();
    for j in 0..count {
        let (mut re, mut im) = (0.0, 0.0);
        for ((zr, zi), ww) in z.iter().zip(w) {
            re += ww * zr;
            im += ww * zi;
        }
        out.push(re * re + im * im);
        if j + 1 < count {
            for ((zr, zi), (cr, ci)) in z.iter_mut().zip(&rot) {
                let nr = *zr * cr - *zi * ci;
                *zi = *zr * ci + *zi * cr;
                *zr = nr;
            }
        }
    }
}

fn modulus_at(p: &[f64], w: &[f64], r: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (&x, ww) in p.iter().zip(w) {
        let (s, c) = (r * x).sin_cos();
        re += ww * c;
        im += ww * s;
    }
    re * re + im * im
}

struct Radial<'a> {
    m: &'a Mollifier,
    eps: f64,
    alpha: f64,
    lambda_max: f64,
    head: Vec<(f64, f64)>,
}

impl Radial<'_> {
    /// `∫_0^Λ r^{α-1} F(l)(εr)² |T(r ω)|² dr` for projections `p = ω·B`.
    fn integrate(&self, p: &[f64], w: &[f64], r0: f64, delta: f64, buf: &mut Vec<f64>) -> f64 {
        let filt = |r: f64| {
            let f = self.m.fl(self.eps * r);
            f * f
        };
        let head: f64 = self
            .head
            .iter()
            .map(|&(u, wu)| {
                let r = r0 * u;
                wu * filt(r) * modulus_at(p, w, r)
            })
            .sum::<f64>()
            * r0.powf(self.alpha);
        if self.lambda_max <= r0 {
            return head;
        }
        let intervals = (((self.lambda_max - r0) / delta).ceil() as usize).max(2);
        let intervals = intervals + intervals % 2;
        let step = (self.lambda_max - r0) / intervals as f64;
        modulus_on_ray(p, w, r0, step, intervals + 1, buf);
        let mut body = 0.0;
        for (j, t2) in buf.iter().enumerate() {
            let r = r0 + j as f64 * step;
            let c = if j == 0 || j == intervals {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            body += c * r.powf(self.alpha - 1.0) * filt(r) * t2;
        }
        head + body * step / 3.0
    }
}

/// Angular nodes `(φ, weight × angular density)` on `[0, π/2]` with endpoint weights
/// `sin^{b2} φ` at 0 and `cos^{b1} φ` at π/2.
fn quadrant_rule(panels: usize, b: [f64; 2]) -> Vec<(f64, f64)> {
    let panels = panels.max(2);
    let a = 0.5 * PI / panels as f64;
    let ang = |phi: f64| phi.cos().abs().powf(b[0]) * phi.sin().abs().powf(b[1]);
    let mut out = Vec::new();
    for (u, wu) in power_weight_rule(16, b[1]) {
        let phi = a * u;
        let smooth = if phi == 0.0 { 1.0 } else { (phi.sin() / phi).powf(b[1]) };
        out.push((phi, a.powf(b[1] + 1.0) * wu * smooth * phi.cos().powf(b[0])));
    }
    for j in 1..panels - 1 {
        for (phi, w) in gl16().mapped(j as f64 * a, (j + 1) as f64 * a) {
            out.push((phi, w * ang(phi)));
        }
    }
    for (u, wu) in power_weight_rule(16, b[0]) {
        let psi = a * u;
        let smooth = if psi == 0.0 { 1.0 } else { (psi.sin() / psi).powf(b[0]) };
        out.push((0.5 * PI - psi, a.powf(b[0] + 1.0) * wu * smooth * psi.cos().powf(b[1])));
    }
    out
}

/// Amplitude `A` and the angular exponents of `μ(dλ) = A r^{α-d} Π|ω_j|^{b_j} dλ`.
fn spectral_shape(model: &PotentialModel) -> Result<(f64, f64, Vec<f64>)> {
    let d = model.d();
    let alpha = model.alpha();
    match model {
        PotentialModel::FractionalWhiteNoise { hurst } => {
            let a = spectral_density(model, &vec![1.0; d])?;
            Ok((a, alpha, hurst.iter().map(|h| 1.0 - 2.0 * h).collect()))
        }
        _ => {
            let mut e = vec![0.0; d];
            e[0] = 1.0;
            Ok((spectral_density(model, &e)?, alpha, vec![0.0; d]))
        }
    }
}

/// `(2π)^{-d} ∫ |Σ_k w_k e^{iλ·B_k}|² |F(l)(ελ)|² μ(dλ)` with trapezoid weights `w_k`.
///
/// This is the variance of the trapezoid line integral of `V_ε` given the path. For
/// `d <= 2` the radial integral uses a Gauss-Jacobi head and Simpson's rule, the angle a
/// panel rule with singular endpoint weights, and resolution is doubled until two
/// successive values agree to `rel_tol`. For `d = 3` frequencies are sampled from the
/// filtered spectral measure.
pub fn conditional_variance_spectral(
    path: &BrownianPath,
    model: &PotentialModel,
    epsilon: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    model.validate()?;
    let d = model.d();
    if path.d != d {
        return Err(Error::DimensionMismatch { expected: d, got: path.d });
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(domain(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(spec.k_max > 0.0 && spec.rel_tol > 0.0) {
        return Err(domain("k_max and rel_tol must be positive"));
    }
    let (amp, alpha, b) = spectral_shape(model)?;
    let steps = path.steps();
    let w: Vec<f64> = (0..=steps).map(|k| path.weight(k)).collect();
    let diam = (0..d)
        .map(|a| {
            let (lo, hi) = (0..=steps).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), k| {
                let x = path.point(k)[a];
                (lo.min(x), hi.max(x))
            });
            (hi - lo).powi(2)
        })
        .sum::<f64>()
        .sqrt()
        .max(1e-12);
    let radial = Radial {
        m: mollifier(d)?,
        eps: epsilon,
        alpha,
        lambda_max: spec.k_max / epsilon,
        head: power_weight_rule(24, alpha - 1.0),
    };
    let scale = (PI / diam).min(1.0 / epsilon);
    let r0 = scale.min(radial.lambda_max);
    let project = |omega: &[f64]| -> Vec<f64> {
        (0..=steps)
            .map(|k| path.point(k).iter().zip(omega).map(|(x, o)| x * o).sum())
            .collect()
    };

    let evaluate = |level: usize| -> f64 {
        let delta = 0.25 * scale / 2f64.powi(level as i32);
        match d {
            1 => {
                let p = project(&[1.0]);
                let mut buf = Vec::new();
                2.0 * amp / (2.0 * PI) * radial.integrate(&p, &w, r0, delta, &mut buf)
            }
            _ => {
                let panels = ((radial.lambda_max * diam / 12.0).ceil() as usize + 2) << level;
                let rule = quadrant_rule(panels, [b[0], b[1]]);
                let sum: f64 = rule
                    .par_iter()
                    .map_init(Vec::new, |buf, &(phi, wphi)| {
                        let (s, c) = phi.sin_cos();
                        let p1 = project(&[c, s]);
                        let p2 = project(&[-c, s]);
                        wphi * (radial.integrate(&p1, &w, r0, delta, buf)
                            + radial.integrate(&p2, &w, r0, delta, buf))
                    })
                    .collect::<Vec<f64>>()
                    .iter()
                    .sum();
                2.0 * amp / (2.0 * PI).powi(2) * sum
            }
        }
    };

    match d {
        1 | 2 => {
            let mut prev = evaluate(0);
            for level in 1..=spec.max_refinements + 1 {
                let next = evaluate(level);
                if (next - prev).abs() <= spec.rel_tol * next.abs() {
                    return Ok(next);
                }
                if level == spec.max_refinements + 1 {
                    return Err(Error::QuadratureNonConvergence { previous: prev, last: next });
                }
                prev = next;
            }
            unreachable!()
        }
        3 => Ok(monte_carlo(&radial, amp, &w, path, spec)),
        _ => Err(Error::Unsupported(format!(
            "conditional variance is implemented for d <= 3, got {d}"
        ))),
    }
}

/// Importance sampling of `λ` from `F(l)(ε|λ|)² |λ|^{α-3}` with uniform direction.
fn monte_carlo(radial: &Radial, amp: f64, w: &[f64], path: &BrownianPath, spec: &QuadratureSpec) -> f64 {
    let (eps, alpha, lmax) = (radial.eps, radial.alpha, radial.lambda_max);
    let filt = |r: f64| {
        let f = radial.m.fl(eps * r);
        f * f
    };
    // Z = ∫_0^Λ F(l)(εr)² r^{α-1} dr.
    let r0 = (1.0 / eps).min(lmax);
    let mut z = radial.head.iter().map(|&(u, wu)| wu * filt(r0 * u)).sum::<f64>() * r0.powf(alpha);
    if lmax > r0 {
        z += gl32().composite(r0, lmax, 64, |r| r.powf(alpha - 1.0) * filt(r));
    }
    let mut rng = rng_from_seed(spec.seed);
    let top = lmax.powf(alpha);
    let mut acc = 0.0;
    let mut count = 0;
    while count < spec.mc_samples {
        let r = (rng.random::<f64>() * top).powf(1.0 / alpha);
        if rng.random::<f64>() >= filt(r) {
            continue;
        }
        let g: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        let norm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        let (mut re, mut im) = (0.0, 0.0);
        for (k, wk) in w.iter().enumerate() {
            let x = path.point(k);
            let phase = r * (g[0] * x[0] + g[1] * x[1] + g[2] * x[2]) / norm;
            let (s, c) = phase.sin_cos();
            re += wk * c;
            im += wk * s;
        }
        acc += re * re + im * im;
        count += 1;
    }
    amp * sphere_area(3) / (2.0 * PI).powi(3) * z * acc / spec.mc_samples as f64
}
