use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::quad::gl32;
use crate::special::{gamma, riesz_fourier_constant, sphere_area};

/// The four Gaussian potential classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum PotentialModel {
    /// `γ(x) = c |x|^{-α}`.
    RieszExact { d: usize, alpha: f64, c_gamma: f64 },
    /// Covariance induced by the Newtonian kernel `|x|^{-p}`: `C(d,p) |x|^{-(2p-d)}`.
    NewtonianDriven { d: usize, p: f64 },
    /// `γ(x) = C_H Π |x_j|^{-(2-2H_j)}` with `C_H = Π H_j (2H_j - 1)`.
    FractionalWhiteNoise { hurst: Vec<f64> },
    /// `γ = δ₀` on the line.
    WhiteNoise1D,
}

/// Radial power law `amp * |x|^{-alpha}` in dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct PowerLaw {
    pub d: usize,
    pub alpha: f64,
    pub amp: f64,
}

impl PotentialModel {
    pub fn riesz(d: usize, alpha: f64, c_gamma: f64) -> Result<Self> {
        let m = PotentialModel::RieszExact { d, alpha, c_gamma };
        m.validate()?;
        Ok(m)
    }

    pub fn newtonian(d: usize, p: f64) -> Result<Self> {
        let m = PotentialModel::NewtonianDriven { d, p };
        m.validate()?;
        Ok(m)
    }

    pub fn fractional(hurst: Vec<f64>) -> Result<Self> {
        let m = PotentialModel::FractionalWhiteNoise { hurst };
        m.validate()?;
        Ok(m)
    }

    pub fn white_noise() -> Self {
        PotentialModel::WhiteNoise1D
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PotentialModel::RieszExact { d, alpha, c_gamma } => {
                if *d == 0 {
                    return Err(domain("dimension d must be positive"));
                }
                let top = (*d as f64).min(2.0);
                if !(*alpha > 0.0 && *alpha < top) {
                    return Err(domain(format!(
                        "Riesz exponent must satisfy 0 < alpha < min(2, d) = {top}, got {alpha}"
                    )));
                }
                if !(*c_gamma > 0.0 && c_gamma.is_finite()) {
                    return Err(domain(format!("c_gamma must be positive, got {c_gamma}")));
                }
                Ok(())
            }
            PotentialModel::NewtonianDriven { d, p } => check_newtonian(*d, *p),
            PotentialModel::FractionalWhiteNoise { hurst } => {
                if hurst.is_empty() {
                    return Err(domain("hurst vector must be nonempty"));
                }
                for (j, h) in hurst.iter().enumerate() {
                    if !(*h > 0.5 && *h < 1.0) {
                        return Err(domain(format!("need 1/2 < H_{j} < 1, got {h}")));
                    }
                }
                let d = hurst.len() as f64;
                let sum: f64 = hurst.iter().sum();
                if sum <= d - 1.0 {
                    return Err(domain(format!("need sum(H) > d - 1 = {}, got {sum}", d - 1.0)));
                }
                Ok(())
            }
            PotentialModel::WhiteNoise1D => Ok(()),
        }
    }

    pub fn d(&self) -> usize {
        match self {
            PotentialModel::RieszExact { d, .. } | PotentialModel::NewtonianDriven { d, .. } => *d,
            PotentialModel::FractionalWhiteNoise { hurst } => hurst.len(),
            PotentialModel::WhiteNoise1D => 1,
        }
    }

    /// Degree of singularity; 1 for white noise by convention.
    pub fn alpha(&self) -> f64 {
        match self {
            PotentialModel::RieszExact { alpha, .. } => *alpha,
            PotentialModel::NewtonianDriven { d, p } => 2.0 * p - *d as f64,
            PotentialModel::FractionalWhiteNoise { hurst } => {
                2.0 * hurst.len() as f64 - 2.0 * hurst.iter().sum::<f64>()
            }
            PotentialModel::WhiteNoise1D => 1.0,
        }
    }

    /// Covariance amplitude: c(γ), C(d,p) or C_H; 1 for white noise.
    pub fn amplitude(&self) -> f64 {
        match self {
            PotentialModel::RieszExact { c_gamma, .. } => *c_gamma,
            PotentialModel::NewtonianDriven { d, p } => coupling_unchecked(*d, *p),
            PotentialModel::FractionalWhiteNoise { hurst } => {
                hurst.iter().map(|h| h * (2.0 * h - 1.0)).product()
            }
            PotentialModel::WhiteNoise1D => 1.0,
        }
    }

    /// Short identifier used in file headers and CSV rows.
    pub fn tag(&self) -> String {
        match self {
            PotentialModel::RieszExact { d, alpha, c_gamma } => {
                format!("riesz(d={d},alpha={alpha},c={c_gamma})")
            }
            PotentialModel::NewtonianDriven { d, p } => format!("newtonian(d={d},p={p})"),
            PotentialModel::FractionalWhiteNoise { hurst } => {
                let hs: Vec<String> = hurst.iter().map(|h| h.to_string()).collect();
                format!("fractional(H={})", hs.join(":"))
            }
            PotentialModel::WhiteNoise1D => "white-noise".to_string(),
        }
    }

    /// The isotropic power law equivalent to this model, when there is one.
    pub(crate) fn power_law(&self) -> Option<PowerLaw> {
        match self {
            PotentialModel::RieszExact { d, alpha, c_gamma } => Some(PowerLaw {
                d: *d,
                alpha: *alpha,
                amp: *c_gamma,
            }),
            PotentialModel::NewtonianDriven { d, p } => Some(PowerLaw {
                d: *d,
                alpha: 2.0 * p - *d as f64,
                amp: coupling_unchecked(*d, *p),
            }),
            PotentialModel::FractionalWhiteNoise { hurst } if hurst.len() == 1 => Some(PowerLaw {
                d: 1,
                alpha: 2.0 - 2.0 * hurst[0],
                amp: self.amplitude(),
            }),
            _ => None,
        }
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                got,
            });
        }
        Ok(())
    }
}

fn check_newtonian(d: usize, p: f64) -> Result<()> {
    if d == 0 {
        return Err(domain("dimension d must be positive"));
    }
    let df = d as f64;
    if !(p > df / 2.0) {
        return Err(domain(format!("violates p > d/2: p = {p}, d/2 = {}", df / 2.0)));
    }
    if !(p < (df + 2.0) / 2.0) {
        return Err(domain(format!(
            "violates p < (d+2)/2: p = {p}, (d+2)/2 = {}",
            (df + 2.0) / 2.0
        )));
    }
    if !(p < df) {
        return Err(domain(format!("violates p < d: p = {p}, d = {d}")));
    }
    Ok(())
}

fn coupling_unchecked(d: usize, p: f64) -> f64 {
    let d = d as f64;
    let g1 = gamma((d - p) / 2.0);
    let g2 = gamma(p / 2.0);
    PI.powf(d / 2.0) * g1 * g1 * gamma((2.0 * p - d) / 2.0) / (g2 * g2 * gamma(d - p))
}

/// The constant `C(d,p)` with `∫ |y-x|^{-p} |z-x|^{-p} dx = C(d,p) |y-z|^{-(2p-d)}`.
pub fn newtonian_coupling(d: usize, p: f64) -> Result<f64> {
    check_newtonian(d, p)?;
    Ok(coupling_unchecked(d, p))
}

/// Pointwise covariance `γ(x)`.
pub fn covariance(model: &PotentialModel, x: &[f64]) -> Result<f64> {
    model.validate()?;
    if let PotentialModel::WhiteNoise1D = model {
        return Err(Error::NoPointwiseCovariance("white noise"));
    }
    model.check_dim(x.len())?;
    match model {
        PotentialModel::FractionalWhiteNoise { hurst } => {
            if x.contains(&0.0) {
                return Err(domain("fractional covariance is singular on the coordinate axes"));
            }
            let kernel: f64 = x
                .iter()
                .zip(hurst)
                .map(|(v, h)| v.abs().powf(-(2.0 - 2.0 * h)))
                .product();
            Ok(model.amplitude() * kernel)
        }
        _ => {
            let pl = model.power_law().expect("radial model");
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r == 0.0 {
                return Err(domain("covariance is singular at x = 0"));
            }
            Ok(pl.amp * r.powf(-pl.alpha))
        }
    }
}

/// One-dimensional spectral factor of `H(2H-1)|x|^{2H-2}`.
pub(crate) fn fractional_factor(h: f64) -> f64 {
    gamma(2.0 * h + 1.0) * (PI * h).sin()
}

/// Lebesgue density of the spectral measure μ.
pub fn spectral_density(model: &PotentialModel, lambda: &[f64]) -> Result<f64> {
    model.validate()?;
    model.check_dim(lambda.len())?;
    match model {
        PotentialModel::WhiteNoise1D => Ok(1.0),
        PotentialModel::FractionalWhiteNoise { hurst } => {
            if lambda.contains(&0.0) {
                return Err(domain("fractional spectral density is singular on the axes"));
            }
            Ok(lambda
                .iter()
                .zip(hurst)
                .map(|(l, h)| fractional_factor(*h) * l.abs().powf(1.0 - 2.0 * h))
                .product())
        }
        _ => {
            let pl = model.power_law().expect("radial model");
            let r = lambda.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r == 0.0 {
                return Err(domain("spectral density is singular at lambda = 0"));
            }
            Ok(radial_spectral_amplitude(pl) * r.powf(pl.alpha - pl.d as f64))
        }
    }
}

pub(crate) fn radial_spectral_amplitude(pl: PowerLaw) -> f64 {
    pl.amp * riesz_fourier_constant(pl.d, pl.alpha)
}

/// Writes μ(dλ) in polar form `A · D · r^{α-1} dr`: returns `(A·D, α)`.
///
/// `A` integrates the angular profile over the unit sphere, `D` is the density amplitude.
pub(crate) fn polar_spectral_form(model: &PotentialModel) -> (f64, f64) {
    match model {
        PotentialModel::WhiteNoise1D => (2.0, 1.0),
        PotentialModel::FractionalWhiteNoise { hurst } => {
            let d = hurst.len() as f64;
            let amp: f64 = hurst.iter().map(|h| fractional_factor(*h)).product();
            // ∫_{S^{d-1}} Π|ω_j|^{b_j} dω = 2 Π Γ((b_j+1)/2) / Γ(Σ(b_j+1)/2), b_j = 1 - 2H_j.
            let halves: Vec<f64> = hurst.iter().map(|h| 1.0 - h).collect();
            let ang = 2.0 * halves.iter().map(|a| gamma(*a)).product::<f64>()
                / gamma(halves.iter().sum());
            let alpha = 2.0 * d - 2.0 * hurst.iter().sum::<f64>();
            (ang * amp, alpha)
        }
        _ => {
            let pl = model.power_law().expect("radial model");
            (sphere_area(pl.d) * radial_spectral_amplitude(pl), pl.alpha)
        }
    }
}

/// Partial integrals `I(Λ) = ∫_{|λ| ≤ Λ} (1+|λ|²)^{-(1-δ)} μ(dλ)` at each cutoff.
pub fn spectral_integrability(
    model: &PotentialModel,
    delta: f64,
    cutoffs: &[f64],
) -> Result<Vec<f64>> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    model.validate()?;
    if cutoffs.iter().any(|c| !(*c > 0.0)) || cutoffs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(domain("cutoffs must be positive and increasing"));
    }
    let (amp, alpha) = polar_spectral_form(model);
    let a = alpha;
    let f = |r: f64| (1.0 + r * r).powf(delta - 1.0);
    // r^{a-1} f(r) dr on [0, min(Λ,1)] via u = r^a, then log-spaced on [1, Λ].
    let head = |upper: f64| {
        gl32().composite(0.0, upper.powf(a), 8, |u| f(u.powf(1.0 / a)) / a)
    };
    let mut out = Vec::with_capacity(cutoffs.len());
    for &c in cutoffs {
        let mut total = head(c.min(1.0));
        if c > 1.0 {
            let s_end = c.ln();
            let panels = (s_end * 4.0).ceil().max(1.0) as usize;
            total += gl32().composite(0.0, s_end, panels, |s| {
                let r = s.exp();
                r.powf(a) * f(r)
            });
        }
        out.push(amp * total);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn admissible_windows() {
        assert!(PotentialModel::riesz(1, 1.0, 1.0).is_err());
        assert!(PotentialModel::riesz(2, 1.5, 1.0).is_ok());
        assert!(PotentialModel::riesz(3, 2.0, 1.0).is_err());
        assert!(PotentialModel::newtonian(3, 2.0).is_ok());
        assert!(PotentialModel::newtonian(3, 2.5).is_err());
        assert!(PotentialModel::fractional(vec![0.75, 0.75]).is_ok());
        assert!(PotentialModel::fractional(vec![0.55, 0.5]).is_err());
        assert!(PotentialModel::fractional(vec![0.6, 0.6, 0.6]).is_err());
    }

    #[test]
    fn newtonian_error_names_inequality() {
        let e = newtonian_coupling(1, 0.4).unwrap_err();
        assert!(e.to_string().contains("p > d/2"), "{e}");
        let e = newtonian_coupling(3, 2.6).unwrap_err();
        assert!(e.to_string().contains("p < (d+2)/2"), "{e}");
        let e = newtonian_coupling(1, 1.2).unwrap_err();
        assert!(e.to_string().contains("p < d"), "{e}");
    }

    #[test]
    fn covariance_examples() {
        let m = PotentialModel::riesz(2, 1.0, 1.0).unwrap();
        let v = covariance(&m, &[2f64.sqrt(), 2f64.sqrt()]).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        let m = PotentialModel::fractional(vec![0.75, 0.75]).unwrap();
        assert!((covariance(&m, &[1.0, 1.0]).unwrap() - 0.140625).abs() < 1e-15);
        let e = covariance(&PotentialModel::WhiteNoise1D, &[0.3]).unwrap_err();
        assert!(e.to_string().contains("no pointwise covariance"));
        assert!(covariance(&PotentialModel::riesz(2, 1.0, 1.0).unwrap(), &[0.0, 0.0]).is_err());
    }

    #[test]
    fn spectral_examples() {
        assert_eq!(spectral_density(&PotentialModel::WhiteNoise1D, &[5.0]).unwrap(), 1.0);
        let m = PotentialModel::riesz(2, 1.0, 1.0).unwrap();
        let v = spectral_density(&m, &[0.6, 0.8]).unwrap();
        assert!((v - 2.0 * PI).abs() < 1e-12);
        // H = 0.75: Γ(2.5) sin(3π/4) = 0.9400...
        assert!((fractional_factor(0.75) - 0.939_985_602_986_625).abs() < 1e-12);
    }

    #[test]
    fn integrability_rejects_bad_delta() {
        assert!(spectral_integrability(&PotentialModel::WhiteNoise1D, 1.5, &[1.0]).is_err());
        assert!(spectral_integrability(&PotentialModel::WhiteNoise1D, 0.0, &[1.0]).is_err());
    }

    #[test]
    fn integrability_white_noise_closed_form() {
        // δ = 1/2: ∫_{-Λ}^{Λ} (1+λ²)^{-1/2} dλ = 2 asinh Λ.
        let v = spectral_integrability(&PotentialModel::WhiteNoise1D, 0.5, &[0.5, 3.0, 40.0]).unwrap();
        for (c, got) in [0.5f64, 3.0, 40.0].iter().zip(&v) {
            assert!((got - 2.0 * c.asinh()).abs() < 1e-10, "{c}: {got}");
        }
    }
}
