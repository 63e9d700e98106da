//! Mollified covariance `γ_ε = γ ⋆ l_ε ⋆ l_ε`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use super::model::{PotentialModel, PowerLaw};
use super::mollifier::{mollifier, Mollifier};
use crate::error::{domain, Error, Result};
use crate::quad::{gl16, power_singular, power_weight_rule, GlRule};
use crate::special::{riesz_fourier_constant, sphere_area, spherical_mean};

/// Radial profile `G(s)` with `γ_ε(x) = amp ε^{-α} G(|x|/ε)`.
#[derive(Debug)]
struct RadialTable {
    alpha: f64,
    d: usize,
    values: Vec<f64>,
    b2: f64,
    b4: f64,
}

const S_MAX: f64 = 20.0;
const S_STEP: f64 = 1.0 / 32.0;
const FOURTH_CUT: f64 = 80.0;

fn lagrange4(table: &[f64], step: f64, x: f64) -> f64 {
    let t = x / step;
    let i = (t.floor() as isize).max(1).min(table.len() as isize - 3);
    let f = t - i as f64;
    let at = |j: isize| table[j.unsigned_abs()];
    let (y0, y1, y2, y3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
    let c0 = -f * (f - 1.0) * (f - 2.0) / 6.0;
    let c1 = (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0;
    let c2 = -(f + 1.0) * f * (f - 2.0) / 2.0;
    let c3 = (f + 1.0) * f * (f - 1.0) / 6.0;
    c0 * y0 + c1 * y1 + c2 * y2 + c3 * y3
}

impl RadialTable {
    fn build(d: usize, alpha: f64, m: &Mollifier) -> Self {
        // G(s) = S_{d-1} c_d(α) / (2π)^d ∫ F(m)(κ)^4 Ω_d(κ s) κ^{α-1} dκ.
        let pref = sphere_area(d) * riesz_fourier_constant(d, alpha) / (2.0 * PI).powi(d as i32);
        let mut nodes: Vec<(f64, f64)> = Vec::new();
        // κ^{α-1} on [0, 1] carried by the Jacobi weight.
        for (k, w) in power_weight_rule(48, alpha - 1.0) {
            nodes.push((k, w));
        }
        let panels = 640;
        let step = (FOURTH_CUT - 1.0) / panels as f64;
        for p in 0..panels {
            let lo = 1.0 + p as f64 * step;
            for (k, w) in gl16().mapped(lo, lo + step) {
                nodes.push((k, w * k.powf(alpha - 1.0)));
            }
        }
        let weighted: Vec<(f64, f64)> = nodes
            .into_iter()
            .map(|(k, w)| (k, pref * w * m.fm(k).powi(4)))
            .collect();
        let ns = (S_MAX / S_STEP).round() as usize + 4;
        let values = (0..ns)
            .map(|i| {
                let s = i as f64 * S_STEP;
                weighted.iter().map(|(k, w)| w * spherical_mean(d, k * s)).sum()
            })
            .collect();
        RadialTable {
            alpha,
            d,
            values,
            b2: m.b2,
            b4: m.b4,
        }
    }

    fn eval(&self, s: f64) -> f64 {
        if s <= S_MAX {
            lagrange4(&self.values, S_STEP, s)
        } else {
            far_field_radial(self.d, self.alpha, self.b2, self.b4, s)
        }
    }
}

/// Two-term Taylor correction of `E |s e - Y|^{-α}` for isotropic `Y` with the given moments.
fn far_field_radial(d: usize, a: f64, b2: f64, b4: f64, s: f64) -> f64 {
    let d = d as f64;
    let t1 = 0.5 * b2 * a * (a + 2.0 - d) / (s * s);
    let t2 = b4 / 24.0 * a * (a + 2.0) * (a + 2.0 - d) * (a + 4.0 - d) / s.powi(4);
    s.powf(-a) * (1.0 + t1 + t2)
}

fn radial_table(d: usize, alpha: f64) -> Result<Arc<RadialTable>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), Arc<RadialTable>>>> = OnceLock::new();
    let m = mollifier(d)?;
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (d, alpha.to_bits());
    if let Some(t) = cache.lock().unwrap().get(&key) {
        return Ok(t.clone());
    }
    let t = Arc::new(RadialTable::build(d, alpha, m));
    cache.lock().unwrap().insert(key, t.clone());
    Ok(t)
}

/// `Q(u, s) = ∫ |s - v|^{-a} L(√(u² + v²)) dv`, tabulated for `0 ≤ u ≤ 2`, `0 ≤ s ≤ 3.25`.
#[derive(Debug)]
struct SliceTable {
    nu: usize,
    ns: usize,
    values: Vec<f64>,
}

const NEAR: f64 = 3.0;
const SLICE_STEP: f64 = 1.0 / 64.0;

fn slice_direct(m: &Mollifier, a: f64, u: f64, s: f64) -> f64 {
    let w2 = 4.0 - u * u;
    if w2 <= 0.0 {
        return 0.0;
    }
    let w = w2.sqrt();
    let g = |v: f64| (s - v).abs().powf(-a) * m.fourth((u * u + v * v).sqrt());
    if s.abs() > w + 0.5 {
        gl48().integrate(-w, w, g)
    } else {
        power_singular(s, -w, w, a, 1e-10, |v| m.fourth((u * u + v * v).sqrt()))
    }
}

fn gl48() -> &'static GlRule {
    static RULE: OnceLock<GlRule> = OnceLock::new();
    RULE.get_or_init(|| GlRule::new(48))
}

impl SliceTable {
    fn build(a: f64, m: &Mollifier) -> Self {
        let nu = (2.0 / SLICE_STEP).round() as usize + 4;
        let ns = ((NEAR + 0.25) / SLICE_STEP).round() as usize + 4;
        let mut values = Vec::with_capacity(nu * ns);
        for i in 0..nu {
            let u = i as f64 * SLICE_STEP;
            for j in 0..ns {
                values.push(slice_direct(m, a, u, j as f64 * SLICE_STEP));
            }
        }
        SliceTable { nu, ns, values }
    }

    fn eval(&self, u: f64, s: f64) -> f64 {
        let (u, s) = (u.abs(), s.abs());
        let row = |i: usize| -> f64 {
            let slice = &self.values[i * self.ns..(i + 1) * self.ns];
            lagrange4(slice, SLICE_STEP, s)
        };
        let t = u / SLICE_STEP;
        let i = (t.floor() as isize).max(1).min(self.nu as isize - 3);
        let f = t - i as f64;
        let at = |j: isize| row(j.unsigned_abs());
        let (y0, y1, y2, y3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
        let c0 = -f * (f - 1.0) * (f - 2.0) / 6.0;
        let c1 = (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0;
        let c2 = -(f + 1.0) * f * (f - 2.0) / 2.0;
        let c3 = (f + 1.0) * f * (f - 1.0) / 6.0;
        c0 * y0 + c1 * y1 + c2 * y2 + c3 * y3
    }
}

fn slice_table(a: f64) -> Result<Arc<SliceTable>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<SliceTable>>>> = OnceLock::new();
    let m = mollifier(2)?;
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().unwrap().get(&a.to_bits()) {
        return Ok(t.clone());
    }
    let t = Arc::new(SliceTable::build(a, m));
    cache.lock().unwrap().insert(a.to_bits(), t.clone());
    Ok(t)
}

#[derive(Debug, Clone)]
enum Kind {
    White,
    Radial { amp: f64, alpha: f64, table: Arc<RadialTable> },
    Product2 { amp: f64, a: [f64; 2], slices: [Arc<SliceTable>; 2] },
}

/// Evaluator of `γ_ε` for one model and radius.
#[derive(Debug, Clone)]
pub struct MollifiedCovariance {
    d: usize,
    epsilon: f64,
    m: &'static Mollifier,
    kind: Kind,
}

impl MollifiedCovariance {
    pub fn new(model: &PotentialModel, epsilon: f64) -> Result<Self> {
        model.validate()?;
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(domain(format!("epsilon must be positive, got {epsilon}")));
        }
        let d = model.d();
        let m = mollifier(d)?;
        let kind = match model {
            PotentialModel::WhiteNoise1D => Kind::White,
            PotentialModel::FractionalWhiteNoise { hurst } if hurst.len() == 2 => {
                let a = [2.0 - 2.0 * hurst[0], 2.0 - 2.0 * hurst[1]];
                Kind::Product2 {
                    amp: model.amplitude(),
                    a,
                    slices: [slice_table(a[0])?, slice_table(a[1])?],
                }
            }
            PotentialModel::FractionalWhiteNoise { hurst } if hurst.len() > 2 => {
                return Err(Error::Unsupported(
                    "mollified fractional covariance is implemented for d <= 2".into(),
                ))
            }
            _ => {
                let PowerLaw { d, alpha, amp } = model.power_law().expect("radial model");
                Kind::Radial {
                    amp,
                    alpha,
                    table: radial_table(d, alpha)?,
                }
            }
        };
        Ok(MollifiedCovariance { d, epsilon, m, kind })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `γ_ε(x)`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.d);
        let eps = self.epsilon;
        match &self.kind {
            Kind::White => self.m.fourth(x[0] / eps) / eps,
            Kind::Radial { amp, alpha, table } => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                amp * eps.powf(-alpha) * table.eval(r / eps)
            }
            Kind::Product2 { amp, a, slices } => {
                let s = [x[0].abs() / eps, x[1].abs() / eps];
                amp * eps.powf(-(a[0] + a[1])) * self.product2(s, *a, slices)
            }
        }
    }

    fn product2(&self, s: [f64; 2], a: [f64; 2], slices: &[Arc<SliceTable>; 2]) -> f64 {
        let m = self.m;
        let near = [s[0] <= NEAR, s[1] <= NEAR];
        match near {
            [false, false] => {
                let far = 20.0;
                if s[0] > far && s[1] > far {
                    return far_field_product(s, a, m.b2, m.b4);
                }
                gl48().integrate(-2.0, 2.0, |u| {
                    (s[0] - u).abs().powf(-a[0]) * slice_direct(m, a[1], u, s[1])
                })
            }
            [true, _] => {
                let inner = |u: f64| {
                    if near[1] {
                        slices[1].eval(u, s[1])
                    } else {
                        slice_direct(m, a[1], u, s[1])
                    }
                };
                power_singular(s[0], -2.0, 2.0, a[0], 1e-10, inner)
            }
            [false, true] => {
                power_singular(s[1], -2.0, 2.0, a[1], 1e-10, |u| slice_direct(m, a[0], u, s[0]))
            }
        }
    }
}

fn far_field_product(s: [f64; 2], a: [f64; 2], b2: f64, b4: f64) -> f64 {
    let f = |j: usize, k: u32| -> f64 {
        let aj = a[j];
        let c = (0..k).fold(1.0, |acc, i| acc * (aj + i as f64));
        c * s[j].powf(-aj - k as f64)
    };
    let (f10, f12, f14) = (f(0, 0), f(0, 2), f(0, 4));
    let (f20, f22, f24) = (f(1, 0), f(1, 2), f(1, 4));
    // Isotropic moments in the plane: E U1^2 = b2, E U1^4 = b4, E U1^2 U2^2 = b4 / 3.
    f10 * f20
        + 0.5 * b2 * (f12 * f20 + f10 * f22)
        + b4 / 24.0 * (f14 * f20 + f10 * f24)
        + 0.25 * (b4 / 3.0) * f12 * f22
}

/// `γ_ε(x)`; white noise gives `L(x/ε)/ε`.
pub fn mollified_covariance(model: &PotentialModel, epsilon: f64, x: &[f64]) -> Result<f64> {
    if x.len() != model.d() {
        return Err(Error::DimensionMismatch {
            expected: model.d(),
            got: x.len(),
        });
    }
    Ok(MollifiedCovariance::new(model, epsilon)?.eval(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::tanh_sinh_split;

    /// Real-space oracle for radial models: polar coordinates about the singularity.
    fn real_space_radial(d: usize, alpha: f64, s: f64) -> f64 {
        let m = mollifier(d).unwrap();
        let lo = (s - 2.0).max(0.0);
        let hi = s + 2.0;
        let area = sphere_area(d);
        tanh_sinh_split(lo, hi, &[s - 1.0, s, s + 1.0, 2.0 - s], 1e-12, |rho| {
            area * rho.powf(d as f64 - 1.0 - alpha) * m.fourth_sphere_mean(s, rho)
        })
    }

    #[test]
    fn radial_table_matches_real_space() {
        for (d, alpha) in [(1usize, 0.5), (1, 0.8), (2, 1.0), (2, 0.5), (2, 1.5), (3, 1.0)] {
            let t = radial_table(d, alpha).unwrap();
            for s in [0.0, 0.3, 1.0, 2.5, 6.0, 15.0] {
                let oracle = real_space_radial(d, alpha, s);
                let got = t.eval(s);
                assert!(
                    (got - oracle).abs() < 2e-5 * oracle,
                    "d={d} a={alpha} s={s}: {got} vs {oracle}"
                );
            }
        }
    }

    #[test]
    fn far_field_continuity() {
        for (d, alpha) in [(1usize, 0.5), (2, 1.0), (2, 1.5)] {
            let t = radial_table(d, alpha).unwrap();
            let inner = lagrange4(&t.values, S_STEP, 19.5);
            let outer = far_field_radial(d, alpha, t.b2, t.b4, 19.5);
            assert!((inner - outer).abs() < 1e-6 * outer, "d={d}: {inner} vs {outer}");
        }
    }

    #[test]
    fn white_noise_at_origin() {
        let c = MollifiedCovariance::new(&PotentialModel::WhiteNoise1D, 0.1).unwrap();
        assert!((c.eval(&[0.0]) - 9.7494).abs() < 1e-3);
        assert_eq!(c.eval(&[0.25]), 0.0);
    }

    /// Spectral oracle for the planar product kernel, one quadrant of a tensor rule.
    fn spectral_product(h: [f64; 2], s: [f64; 2]) -> f64 {
        use crate::potentials::model::fractional_factor;
        let m = mollifier(2).unwrap();
        let a = [2.0 - 2.0 * h[0], 2.0 - 2.0 * h[1]];
        let axis = |j: usize| -> Vec<(f64, f64)> {
            // k = v^{1/a}, |k|^{a-1} dk = dv / a
            let vmax = 40f64.powf(a[j]);
            let rule = crate::quad::gl16();
            let panels = 400;
            let step = vmax / panels as f64;
            (0..panels)
                .flat_map(|p| {
                    let lo = p as f64 * step;
                    rule.mapped(lo, lo + step)
                        .map(|(v, w)| (v.powf(1.0 / a[j]), w / a[j]))
                        .collect::<Vec<_>>()
                })
                .collect()
        };
        let (x1, x2) = (axis(0), axis(1));
        let mut acc = 0.0;
        for (k1, w1) in &x1 {
            let c1 = (k1 * s[0]).cos();
            for (k2, w2) in &x2 {
                acc += w1 * w2 * c1 * (k2 * s[1]).cos() * m.fm((k1 * k1 + k2 * k2).sqrt()).powi(4);
            }
        }
        let amp = fractional_factor(h[0]) * fractional_factor(h[1]);
        let ch = h[0] * (2.0 * h[0] - 1.0) * h[1] * (2.0 * h[1] - 1.0);
        4.0 * amp * acc / (2.0 * PI).powi(2) / ch
    }

    #[test]
    fn product_kernel_matches_spectral() {
        let h = [0.75, 0.85];
        let model = PotentialModel::fractional(h.to_vec()).unwrap();
        let c = MollifiedCovariance::new(&model, 1.0).unwrap();
        let Kind::Product2 { a, slices, .. } = &c.kind else { panic!() };
        for s in [[0.0, 0.0], [0.5, 1.7], [4.0, 0.2], [5.0, 6.0], [2.9, 3.1]] {
            let got = c.product2(s, *a, slices);
            let oracle = spectral_product(h, s);
            assert!((got - oracle).abs() < 5e-4 * oracle, "s={s:?}: {got} vs {oracle}");
        }
    }

    #[test]
    fn product_far_field_matches_quadrature() {
        let model = PotentialModel::fractional(vec![0.7, 0.8]).unwrap();
        let c = MollifiedCovariance::new(&model, 1.0).unwrap();
        let Kind::Product2 { a, .. } = &c.kind else { panic!() };
        let s = [21.0, 25.0];
        let quad = gl48().integrate(-2.0, 2.0, |u| {
            (s[0] - u).abs().powf(-a[0]) * slice_direct(c.m, a[1], u, s[1])
        });
        let far = far_field_product(s, *a, c.m.b2, c.m.b4);
        assert!((quad - far).abs() < 1e-7 * far, "{quad} vs {far}");
    }
}
