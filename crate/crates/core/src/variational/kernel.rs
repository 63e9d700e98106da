//! Kernel energies `∫∫ f²(x) f²(y) K(x - y) dx dy` on grids.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fft::FftNd;
use crate::grid::{strides, GridSpec};
use crate::quad::gl32;

/// Interaction kernel of the variational problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum KernelSpec {
    /// `|x|^{-alpha}`.
    Riesz { alpha: f64 },
    /// `Π_j |x_j|^{-alpha_j}`.
    Product { alphas: Vec<f64> },
    /// The Dirac kernel in one dimension, giving `∫ f⁴`.
    Quartic,
}

impl KernelSpec {
    pub fn alpha_eff(&self) -> f64 {
        match self {
            KernelSpec::Riesz { alpha } => *alpha,
            KernelSpec::Product { alphas } => alphas.iter().sum(),
            KernelSpec::Quartic => 1.0,
        }
    }

    pub fn tag(&self) -> String {
        match self {
            KernelSpec::Riesz { alpha } => format!("riesz(alpha={alpha})"),
            KernelSpec::Product { alphas } => {
                let s: Vec<String> = alphas.iter().map(|a| a.to_string()).collect();
                format!("product(alpha={})", s.join(":"))
            }
            KernelSpec::Quartic => "quartic".into(),
        }
    }

    /// Checks admissibility in dimension `d`.
    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            KernelSpec::Riesz { alpha } => {
                let bound = (d as f64).min(2.0);
                if !(*alpha > 0.0 && *alpha < bound) {
                    return Err(domain(format!(
                        "Riesz kernel needs 0 < alpha < min(2, d) = {bound}, got {alpha}"
                    )));
                }
            }
            KernelSpec::Product { alphas } => {
                if alphas.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: alphas.len(),
                    });
                }
                if alphas.iter().any(|a| !(*a >= 0.0 && *a < 1.0)) {
                    return Err(domain("product kernel needs 0 <= alpha_j < 1"));
                }
                if !(self.alpha_eff() < 2.0) {
                    return Err(domain("product kernel needs sum of alpha_j < 2"));
                }
            }
            KernelSpec::Quartic => {
                if d != 1 {
                    return Err(domain(format!("quartic kernel is one-dimensional, got d = {d}")));
                }
            }
        }
        Ok(())
    }
}

/// `∫_{[-1,1]^d} |x|^{-a} dx`, by splitting the cube into pyramids over its faces.
fn cube_power_integral(d: usize, a: f64) -> f64 {
    let face = match d {
        1 => 1.0,
        _ => {
            // ∫_{[-1,1]^{d-1}} (1 + |u|²)^{-a/2} du by a tensor rule, smooth integrand
            let rule: Vec<(f64, f64)> = gl32().mapped(-1.0, 1.0).collect();
            let mut acc = 0.0;
            let m = d - 1;
            let mut idx = vec![0usize; m];
            loop {
                let (mut w, mut r2) = (1.0, 1.0);
                for &i in &idx {
                    w *= rule[i].1;
                    r2 += rule[i].0 * rule[i].0;
                }
                acc += w * r2.powf(-0.5 * a);
                let mut k = m;
                loop {
                    if k == 0 {
                        return 2.0 * d as f64 / (d as f64 - a) * acc;
                    }
                    k -= 1;
                    idx[k] += 1;
                    if idx[k] < rule.len() {
                        break;
                    }
                    idx[k] = 0;
                }
            }
        }
    };
    2.0 * d as f64 / (d as f64 - a) * face
}

/// Discrete kernel value at lag `k` (in nodes). The origin uses the cell average.
fn kernel_value(kernel: &KernelSpec, h: f64, k: &[i64]) -> f64 {
    match kernel {
        KernelSpec::Riesz { alpha } => {
            if k.iter().all(|&v| v == 0) {
                let d = k.len();
                (0.5 * h).powf(-alpha) * cube_power_integral(d, *alpha) / 2f64.powi(d as i32)
            } else {
                let r2: f64 = k.iter().map(|&v| (v as f64 * h).powi(2)).sum();
                r2.powf(-0.5 * alpha)
            }
        }
        KernelSpec::Product { alphas } => k
            .iter()
            .zip(alphas)
            .map(|(&v, &a)| {
                if v == 0 {
                    (0.5 * h).powf(-a) / (1.0 - a)
                } else {
                    (v.unsigned_abs() as f64 * h).powf(-a)
                }
            })
            .product(),
        KernelSpec::Quartic => {
            if k.iter().all(|&v| v == 0) {
                h.powi(-(k.len() as i32))
            } else {
                0.0
            }
        }
    }
}

/// Linear convolution with a fixed kernel on a grid, by FFT on the doubled box.
#[derive(Debug, Clone)]
pub struct KernelEnergy {
    kernel: KernelSpec,
    grid: GridSpec,
    fft: Option<FftNd>,
    spectrum: Vec<f64>,
}

impl KernelEnergy {
    pub fn new(kernel: &KernelSpec, grid: &GridSpec) -> Result<Self> {
        kernel.validate(grid.d)?;
        if matches!(kernel, KernelSpec::Quartic) {
            return Ok(KernelEnergy {
                kernel: kernel.clone(),
                grid: *grid,
                fft: None,
                spectrum: vec![],
            });
        }
        let d = grid.d;
        let n = grid.n;
        let m = 2 * n;
        let shape = vec![m; d];
        let total = m.checked_pow(d as u32).ok_or(Error::GridTooLarge { n: m, d })?;
        let h = grid.h();
        let st = strides(&shape);
        let mut data = vec![Complex64::default(); total];
        let mut lag = vec![0i64; d];
        for (flat, z) in data.iter_mut().enumerate() {
            let mut skip = false;
            for a in 0..d {
                let i = (flat / st[a]) % m;
                lag[a] = if i < n { i as i64 } else { i as i64 - m as i64 };
                skip |= i == n;
            }
            if !skip {
                *z = Complex64::new(kernel_value(kernel, h, &lag) * h.powi(d as i32), 0.0);
            }
        }
        let fft = FftNd::new(&shape);
        fft.forward(&mut data);
        Ok(KernelEnergy {
            kernel: kernel.clone(),
            grid: *grid,
            fft: Some(fft),
            spectrum: data.iter().map(|z| z.re).collect(),
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// `c_i = h^d Σ_j K_h(i - j) w_j`.
    pub fn convolve(&self, w: &[f64]) -> Vec<f64> {
        let Some(fft) = &self.fft else {
            return w.to_vec();
        };
        let d = self.grid.d;
        let n = self.grid.n;
        let m = 2 * n;
        let big = strides(&vec![m; d]);
        let small = strides(&vec![n; d]);
        let embed = |i: usize| -> usize { (0..d).map(|a| ((i / small[a]) % n) * big[a]).sum() };
        let mut data = vec![Complex64::default(); self.spectrum.len()];
        for (i, &v) in w.iter().enumerate() {
            data[embed(i)] = Complex64::new(v, 0.0);
        }
        fft.forward(&mut data);
        for (z, s) in data.iter_mut().zip(&self.spectrum) {
            *z *= *s;
        }
        fft.inverse(&mut data);
        (0..w.len()).map(|i| data[embed(i)].re).collect()
    }

    /// Energy and the convolution `K ⋆ f²` it was computed from.
    pub fn energy_with_field(&self, f: &[f64]) -> (f64, Vec<f64>) {
        let sq: Vec<f64> = f.iter().map(|v| v * v).collect();
        let c = self.convolve(&sq);
        let e = self.grid.cell_volume() * sq.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
        (e, c)
    }

    pub fn energy(&self, f: &[f64]) -> f64 {
        self.energy_with_field(f).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_integral_closed_forms() {
        // d = 1: 2 / (1 - a)
        assert!((cube_power_integral(1, 0.4) - 2.0 / 0.6).abs() < 1e-14);
        // d = 2, a = 1: 8 ln(1 + √2)
        let want = 8.0 * (1.0 + 2f64.sqrt()).ln();
        assert!((cube_power_integral(2, 1.0) - want).abs() < 1e-12);
        // a = 0 gives the volume
        assert!((cube_power_integral(3, 0.0) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn product_one_dimension_equals_riesz() {
        let g = GridSpec::new(1, 4.0, 63).unwrap();
        let f: Vec<f64> = (0..63).map(|k| (-g.coord(k).powi(2)).exp()).collect();
        let a = KernelEnergy::new(&KernelSpec::Riesz { alpha: 0.6 }, &g).unwrap();
        let b = KernelEnergy::new(&KernelSpec::Product { alphas: vec![0.6] }, &g).unwrap();
        assert!((a.energy(&f) - b.energy(&f)).abs() < 1e-13 * a.energy(&f));
    }

    #[test]
    fn fft_convolution_matches_direct_sum() {
        let g = GridSpec::new(2, 2.0, 9).unwrap();
        let k = KernelSpec::Product { alphas: vec![0.3, 0.5] };
        let e = KernelEnergy::new(&k, &g).unwrap();
        let w: Vec<f64> = (0..81).map(|i| ((i * 13 % 7) as f64) * 0.1).collect();
        let c = e.convolve(&w);
        let h = g.h();
        let (mut ii, mut jj) = (vec![0; 2], vec![0; 2]);
        for i in 0..81 {
            g.unravel(i, &mut ii);
            let mut acc = 0.0;
            for j in 0..81 {
                g.unravel(j, &mut jj);
                let lag = [ii[0] as i64 - jj[0] as i64, ii[1] as i64 - jj[1] as i64];
                acc += kernel_value(&k, h, &lag) * w[j];
            }
            assert!((c[i] - acc * h * h).abs() < 1e-12 * (1.0 + acc.abs()));
        }
    }
}
