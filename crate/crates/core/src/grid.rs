//! Regular interior grids on the box Q_R = (-R, R)^d.

use crate::error::{domain, Error, Result};
use serde::{Deserialize, Serialize};

/// `n` interior points per axis with spacing `h = 2R / (n + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub d: usize,
    pub half_width: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(d: usize, half_width: f64, n: usize) -> Result<Self> {
        if d == 0 {
            return Err(domain("grid dimension must be positive"));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(domain(format!("half width R = {half_width} must be positive")));
        }
        if n < 2 {
            return Err(domain(format!("need n >= 2 interior points per axis, got {n}")));
        }
        let g = GridSpec { d, half_width, n };
        g.checked_len()?;
        Ok(g)
    }

    fn checked_len(&self) -> Result<usize> {
        let mut total: usize = 1;
        for _ in 0..self.d {
            total = total
                .checked_mul(self.n)
                .ok_or(Error::GridTooLarge { n: self.n, d: self.d })?;
        }
        // Arrays of f64 must also be addressable in bytes.
        total
            .checked_mul(std::mem::size_of::<f64>())
            .filter(|b| *b <= isize::MAX as usize)
            .ok_or(Error::GridTooLarge { n: self.n, d: self.d })?;
        Ok(total)
    }

    pub fn h(&self) -> f64 {
        2.0 * self.half_width / (self.n as f64 + 1.0)
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of node `k` along one axis.
    pub fn coord(&self, k: usize) -> f64 {
        -self.half_width + (k as f64 + 1.0) * self.h()
    }

    /// Cell volume h^d.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.d as i32)
    }

    /// Row-major multi-index of a flat index; the last axis varies fastest.
    pub fn unravel(&self, mut idx: usize, out: &mut [usize]) {
        for a in (0..self.d).rev() {
            out[a] = idx % self.n;
            idx /= self.n;
        }
    }

    pub fn ravel(&self, multi: &[usize]) -> usize {
        multi.iter().fold(0, |acc, &k| acc * self.n + k)
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        let mut m = vec![0; self.d];
        self.unravel(idx, &mut m);
        m.iter().map(|&k| self.coord(k)).collect()
    }

    /// Node index nearest to the origin along one axis (lower of two when n is even).
    pub fn center_index(&self) -> usize {
        (self.n - 1) / 2
    }
}

/// Row-major strides of a rectangular array with the given shape.
pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for a in (0..shape.len().saturating_sub(1)).rev() {
        s[a] = s[a + 1] * shape[a + 1];
    }
    s
}
