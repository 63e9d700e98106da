//! The mollifier `l = m ⋆ m`, with `m` the normalized bump `exp(-1/(1-4|x|²))` on `|x| < 1/2`.
//!
//! `F(l) = F(m)² ≥ 0`. Mollified covariances involve `l ⋆ l = m⋆m⋆m⋆m =: L`,
//! supported in `|x| ≤ 2`, which is tabulated here as a radial profile.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{domain, Error, Result};
use crate::quad::gl16;
use crate::special::{spherical_mean, sphere_area};

const MAX_DIM: usize = 8;
const K_TABLE: f64 = 200.0;
const K_STEP: f64 = 1.0 / 32.0;
const K_FOURTH: f64 = 80.0;
const R_STEP: f64 = 1.0 / 512.0;

/// Radial tables of the mollifier in one dimension `d`.
#[derive(Debug)]
pub struct Mollifier {
    d: usize,
    /// Quadrature for `F(m)(k) = Σ w_i Ω_d(k r_i)`.
    nodes: Vec<(f64, f64)>,
    fm: Vec<f64>,
    fourth: Vec<f64>,
    /// `∫_0^q L(s) s ds`, used for spherical means in three dimensions.
    #[cfg_attr(not(test), allow(dead_code))]
    fourth_cum: Vec<f64>,
    /// Second and fourth moments of one coordinate under `L`.
    pub b2: f64,
    pub b4: f64,
}

fn bump(r: f64) -> f64 {
    let u = 1.0 - 4.0 * r * r;
    if u <= 0.0 {
        0.0
    } else {
        (-1.0 / u).exp()
    }
}

/// Four-point Lagrange interpolation on a uniform table, even extension below 0.
fn interp(table: &[f64], step: f64, x: f64) -> f64 {
    let t = x / step;
    let i = t.floor() as isize;
    let f = t - i as f64;
    let n = table.len() as isize;
    let at = |j: isize| -> f64 {
        let j = j.abs();
        if j >= n {
            0.0
        } else {
            table[j as usize]
        }
    };
    let (y0, y1, y2, y3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
    let c0 = -f * (f - 1.0) * (f - 2.0) / 6.0;
    let c1 = (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0;
    let c2 = -(f + 1.0) * f * (f - 2.0) / 2.0;
    let c3 = (f + 1.0) * f * (f - 1.0) / 6.0;
    c0 * y0 + c1 * y1 + c2 * y2 + c3 * y3
}

impl Mollifier {
    fn build(d: usize) -> Self {
        let area = sphere_area(d);
        let dim = d as i32;
        let raw: Vec<(f64, f64)> = {
            let panels = 32;
            let step = 0.5 / panels as f64;
            (0..panels)
                .flat_map(|p| {
                    let lo = p as f64 * step;
                    gl16()
                        .mapped(lo, lo + step)
                        .map(|(r, w)| (r, w * area * bump(r) * r.powi(dim - 1)))
                        .collect::<Vec<_>>()
                })
                .collect()
        };
        let mass: f64 = raw.iter().map(|(_, w)| w).sum();
        let nodes: Vec<(f64, f64)> = raw.iter().map(|(r, w)| (*r, w / mass)).collect();
        let m2: f64 = nodes.iter().map(|(r, w)| w * r * r).sum();
        let m4: f64 = nodes.iter().map(|(r, w)| w * r.powi(4)).sum();
        let df = d as f64;
        let a2 = m2 / df;
        let a4 = 3.0 * m4 / (df * (df + 2.0));

        let direct = |k: f64| -> f64 {
            nodes
                .iter()
                .map(|(r, w)| w * spherical_mean(d, k * r))
                .sum()
        };
        let nk = (K_TABLE / K_STEP).round() as usize + 1;
        let fm: Vec<f64> = (0..nk).map(|i| direct(i as f64 * K_STEP)).collect();

        let pref = area / (2.0 * PI).powi(dim);
        let kq: Vec<(f64, f64)> = {
            let panels = 64;
            let step = K_FOURTH / panels as f64;
            (0..panels)
                .flat_map(|p| {
                    let lo = p as f64 * step;
                    gl16().mapped(lo, lo + step).collect::<Vec<_>>()
                })
                .map(|(k, w)| (k, pref * w * direct(k).powi(4) * k.powi(dim - 1)))
                .collect()
        };
        let nr = (2.0 / R_STEP).round() as usize + 1;
        let mut fourth: Vec<f64> = (0..nr)
            .map(|j| {
                let r = j as f64 * R_STEP;
                kq.iter().map(|(k, w)| w * spherical_mean(d, k * r)).sum()
            })
            .collect();
        *fourth.last_mut().unwrap() = 0.0;

        let mut fourth_cum = vec![0.0; nr];
        for j in 1..nr {
            let (r0, r1) = ((j - 1) as f64 * R_STEP, j as f64 * R_STEP);
            let rm = 0.5 * (r0 + r1);
            let lm = interp(&fourth, R_STEP, rm);
            fourth_cum[j] = fourth_cum[j - 1]
                + R_STEP / 6.0 * (fourth[j - 1] * r0 + 4.0 * lm * rm + fourth[j] * r1);
        }
        // Constant continuation so interpolation near q = 2 sees the plateau.
        let plateau = fourth_cum[nr - 1];
        fourth_cum.extend([plateau; 3]);

        Mollifier {
            d,
            nodes,
            fm,
            fourth,
            fourth_cum,
            b2: 4.0 * a2,
            b4: 4.0 * a4 + 36.0 * a2 * a2,
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `F(m)(k)` for `k = |λ|`.
    pub fn fm(&self, k: f64) -> f64 {
        let k = k.abs();
        if k == 0.0 {
            return 1.0;
        }
        // |F(m)| <= 1 exactly; clamping removes normalization roundoff
        let v = if k <= K_TABLE - 2.0 * K_STEP {
            interp(&self.fm, K_STEP, k)
        } else {
            self.nodes
                .iter()
                .map(|(r, w)| w * spherical_mean(self.d, k * r))
                .sum()
        };
        v.clamp(-1.0, 1.0)
    }

    /// `F(l)(k) = F(m)(k)²`.
    pub fn fl(&self, k: f64) -> f64 {
        let v = self.fm(k);
        v * v
    }

    /// Radial profile of `L = l ⋆ l`.
    pub fn fourth(&self, r: f64) -> f64 {
        let r = r.abs();
        if r >= 2.0 {
            0.0
        } else {
            interp(&self.fourth, R_STEP, r)
        }
    }

    #[cfg_attr(not(test), allow(dead_code))]
    /// Spherical mean of `L` over the sphere of radius `rho` centred at distance `s` from 0.
    pub(crate) fn fourth_sphere_mean(&self, s: f64, rho: f64) -> f64 {
        match self.d {
            1 => 0.5 * (self.fourth(s - rho) + self.fourth(s + rho)),
            3 => {
                let lo = (s - rho).abs();
                let hi = s + rho;
                if lo >= 2.0 {
                    return 0.0;
                }
                if s * rho < 1e-9 {
                    return self.fourth(s.max(rho));
                }
                (self.cum(hi) - self.cum(lo)) / (2.0 * s * rho)
            }
            _ => {
                // Trapezoid over the circle; exact for the smooth periodic integrand.
                let m = 256;
                let mut acc = 0.0;
                for k in 0..m {
                    let phi = PI * (k as f64 + 0.5) / m as f64;
                    let q = (s * s + rho * rho - 2.0 * s * rho * phi.cos()).max(0.0).sqrt();
                    acc += self.fourth(q);
                }
                acc / m as f64
            }
        }
    }

    #[cfg_attr(not(test), allow(dead_code))]
    pub(crate) fn cum(&self, q: f64) -> f64 {
        let last = *self.fourth_cum.last().unwrap();
        if q >= 2.0 - R_STEP {
            last
        } else {
            interp(&self.fourth_cum, R_STEP, q)
        }
    }
}

/// Shared tables for dimension `d` (built on first use).
pub fn mollifier(d: usize) -> Result<&'static Mollifier> {
    static TABLES: [OnceLock<Mollifier>; MAX_DIM] = [const { OnceLock::new() }; MAX_DIM];
    if d == 0 || d > MAX_DIM {
        return Err(Error::Unsupported(format!(
            "mollifier tables exist for 1 <= d <= {MAX_DIM}, got {d}"
        )));
    }
    Ok(TABLES[d - 1].get_or_init(|| Mollifier::build(d)))
}

/// `F(l)(ελ)`.
pub fn mollifier_fourier(epsilon: f64, lambda: &[f64]) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(domain(format!("epsilon must be positive, got {epsilon}")));
    }
    let k = lambda.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(mollifier(lambda.len())?.fl(epsilon * k))
}
