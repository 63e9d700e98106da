//! Matrix-free `½Δ_h + θV` with Dirichlet exterior on a box of grid nodes.

use std::sync::Arc;

use crate::error::{domain, Result};
use crate::grid::{strides, GridSpec};
use crate::potentials::FieldSample;

/// `(Au)_k = ½ Δ_h u|_k + θ V_k u_k` on a rectangular block of nodes of a parent grid.
///
/// Values outside the block are zero. Sub-boxes from [`DiscreteOperator::restrict`]
/// keep the parent nodes, so eigenvalues of nested boxes are directly comparable.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    grid: GridSpec,
    theta: f64,
    field: Arc<FieldSample>,
    /// First parent index of the block along each axis.
    lo: Vec<usize>,
    shape: Vec<usize>,
    /// θV on the block, row-major in `shape`.
    tv: Vec<f64>,
}

/// Builds the operator for `field` on its whole grid.
pub fn assemble(field: &FieldSample, theta: f64) -> Result<DiscreteOperator> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(domain(format!("theta must be positive, got {theta}")));
    }
    let grid = field.grid;
    Ok(DiscreteOperator {
        grid,
        theta,
        field: Arc::new(field.clone()),
        lo: vec![0; grid.d],
        shape: vec![grid.n; grid.d],
        tv: field.values.iter().map(|v| theta * v).collect(),
    })
}

impl DiscreteOperator {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn field(&self) -> &FieldSample {
        &self.field
    }

    pub fn dim(&self) -> usize {
        self.grid.d
    }

    pub fn h(&self) -> f64 {
        self.grid.h()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn offset(&self) -> &[usize] {
        &self.lo
    }

    pub fn len(&self) -> usize {
        self.tv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tv.is_empty()
    }

    /// θV on the block nodes.
    pub fn scaled_potential(&self) -> &[f64] {
        &self.tv
    }

    /// Volume element of the h-weighted inner product.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.grid.d as i32)
    }

    /// `h^d Σ u v`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.cell_volume() * u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        assert_eq!(u.len(), self.len());
        assert_eq!(out.len(), self.len());
        let h2 = self.h() * self.h();
        let diag = -(self.grid.d as f64) / h2;
        let off = 0.5 / h2;
        for ((o, &x), &v) in out.iter_mut().zip(u).zip(&self.tv) {
            *o = (diag + v) * x;
        }
        let st = strides(&self.shape);
        for (axis, &n) in self.shape.iter().enumerate() {
            let s = st[axis];
            let block = n * s;
            for base in (0..u.len()).step_by(block) {
                for k in 0..n - 1 {
                    let row = base + k * s;
                    for j in row..row + s {
                        out[j] += off * u[j + s];
                        out[j + s] += off * u[j];
                    }
                }
            }
        }
    }

    /// The operator on the nodes `lo[a] <= k_a < hi[a]` of the parent grid.
    pub fn restrict(&self, lo: &[usize], hi: &[usize]) -> Result<DiscreteOperator> {
        let d = self.grid.d;
        if lo.len() != d || hi.len() != d {
            return Err(domain("sub-box bounds must have one entry per axis"));
        }
        for a in 0..d {
            if lo[a] < self.lo[a] || hi[a] > self.lo[a] + self.shape[a] || lo[a] >= hi[a] {
                return Err(domain(format!(
                    "sub-box axis {a}: [{}, {}) not inside [{}, {})",
                    lo[a],
                    hi[a],
                    self.lo[a],
                    self.lo[a] + self.shape[a]
                )));
            }
        }
        let shape: Vec<usize> = (0..d).map(|a| hi[a] - lo[a]).collect();
        let parent = strides(&self.shape);
        let total: usize = shape.iter().product();
        let mut tv = Vec::with_capacity(total);
        let mut idx = vec![0usize; d];
        for _ in 0..total {
            let flat: usize = (0..d).map(|a| (lo[a] - self.lo[a] + idx[a]) * parent[a]).sum();
            tv.push(self.tv[flat]);
            for a in (0..d).rev() {
                idx[a] += 1;
                if idx[a] < shape[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        Ok(DiscreteOperator {
            grid: self.grid,
            theta: self.theta,
            field: self.field.clone(),
            lo: lo.to_vec(),
            shape,
            tv,
        })
    }

    /// Largest eigenvalue of `½Δ_h` on the block.
    pub fn kinetic_top(&self) -> f64 {
        let h = self.h();
        self.shape
            .iter()
            .map(|&n| {
                let s = (std::f64::consts::PI / (2.0 * (n as f64 + 1.0))).sin();
                -2.0 * s * s / (h * h)
            })
            .sum()
    }

    /// Smallest eigenvalue of `½Δ_h` on the block.
    pub fn kinetic_bottom(&self) -> f64 {
        let h = self.h();
        self.shape
            .iter()
            .map(|&n| {
                let c = (std::f64::consts::PI / (2.0 * (n as f64 + 1.0))).cos();
                -2.0 * c * c / (h * h)
            })
            .sum()
    }
}

/// `⟨Ag, g⟩ / ⟨g, g⟩`.
pub fn rayleigh_quotient(op: &DiscreteOperator, g: &[f64]) -> Result<f64> {
    if g.len() != op.len() {
        return Err(crate::Error::DimensionMismatch {
            expected: op.len(),
            got: g.len(),
        });
    }
    let gg: f64 = g.iter().map(|x| x * x).sum();
    if !(gg > 0.0) {
        return Err(domain("Rayleigh quotient of the zero vector"));
    }
    let mut ag = vec![0.0; g.len()];
    op.apply(g, &mut ag);
    let agg: f64 = ag.iter().zip(g).map(|(a, b)| a * b).sum();
    Ok(agg / gg)
}
