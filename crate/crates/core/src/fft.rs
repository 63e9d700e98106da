//! Multi-dimensional FFT and DST-I on row-major arrays.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::grid::strides;

/// Applies a one-dimensional transform along every axis of a row-major array.
fn for_each_line<T: Copy + Default>(
    data: &mut [T],
    shape: &[usize],
    axis: usize,
    buf: &mut Vec<T>,
    mut f: impl FnMut(&mut [T]),
) {
    let st = strides(shape);
    let len = shape[axis];
    let stride = st[axis];
    let outer: usize = shape[..axis].iter().product();
    let block = len * stride;
    buf.resize(len, T::default());
    for o in 0..outer {
        for inner in 0..stride {
            let base = o * block + inner;
            if stride == 1 {
                f(&mut data[base..base + len]);
            } else {
                for k in 0..len {
                    buf[k] = data[base + k * stride];
                }
                f(buf);
                for k in 0..len {
                    data[base + k * stride] = buf[k];
                }
            }
        }
    }
}

/// Forward and inverse complex FFT over all axes of a fixed shape.
#[derive(Clone)]
pub struct FftNd {
    shape: Vec<usize>,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for FftNd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FftNd{:?}", self.shape)
    }
}

impl FftNd {
    pub fn new(shape: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        FftNd {
            shape: shape.to_vec(),
            fwd: shape.iter().map(|&n| planner.plan_fft_forward(n)).collect(),
            inv: shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn run(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        assert_eq!(data.len(), self.len());
        let mut buf = Vec::new();
        for (axis, plan) in plans.iter().enumerate() {
            let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
            for_each_line(data, &self.shape, axis, &mut buf, |line| {
                plan.process_with_scratch(line, &mut scratch)
            });
        }
    }

    /// Unnormalized forward transform, `X_k = Σ x_j e^{-2πi jk/N}`.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.fwd);
    }

    /// Normalized inverse transform.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inv);
        let s = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }
}

/// DST-I over every axis of a rectangular array,
/// `X_k = Σ_j x_j sin(π (j+1)(k+1)/(n_a+1))` along axis `a`.
///
/// Applying it twice multiplies by `Π_a (n_a+1)/2`.
#[derive(Clone)]
pub struct DstNd {
    shape: Vec<usize>,
    plans: Vec<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for DstNd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "DstNd{:?}", self.shape)
    }
}

impl DstNd {
    pub fn new(n: usize, d: usize) -> Self {
        Self::with_shape(&vec![n; d])
    }

    pub fn with_shape(shape: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        DstNd {
            shape: shape.to_vec(),
            plans: shape.iter().map(|&n| planner.plan_fft_forward(2 * (n + 1))).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Eigenvalues of the 1D Dirichlet second difference `(u_{k+1} - 2u_k + u_{k-1}) / h²`
    /// on `n` nodes, in DST-I mode order.
    pub fn laplacian_eigenvalues(n: usize, h: f64) -> Vec<f64> {
        (0..n)
            .map(|k| {
                let s = (std::f64::consts::PI * (k as f64 + 1.0) / (2.0 * (n as f64 + 1.0))).sin();
                -4.0 * s * s / (h * h)
            })
            .collect()
    }

    pub fn transform(&self, data: &mut [f64]) {
        let mut buf = Vec::new();
        for (axis, plan) in self.plans.iter().enumerate() {
            let n = self.shape[axis];
            let m = 2 * (n + 1);
            let mut work = vec![Complex64::default(); m];
            let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
            for_each_line(data, &self.shape, axis, &mut buf, |line| {
                work.iter_mut().for_each(|z| *z = Complex64::default());
                for j in 0..n {
                    work[j + 1] = Complex64::new(line[j], 0.0);
                    work[m - 1 - j] = Complex64::new(-line[j], 0.0);
                }
                plan.process_with_scratch(&mut work, &mut scratch);
                for k in 0..n {
                    line[k] = -0.5 * work[k + 1].im;
                }
            });
        }
    }

    /// Inverse of [`DstNd::transform`].
    pub fn inverse(&self, data: &mut [f64]) {
        self.transform(data);
        let s: f64 = self.shape.iter().map(|&n| 2.0 / (n as f64 + 1.0)).product();
        data.iter_mut().for_each(|v| *v *= s);
    }
}
