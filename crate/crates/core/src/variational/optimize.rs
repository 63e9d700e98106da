//! Constrained maximization of kernel energies by preconditioned projected gradient ascent.
//!
//! Both constraint sets are scale sections, so projection is an exact rescaling. Search
//! directions are Sobolev gradients `(1 - ½Δ_h)^{-1} ∇J`, computed by DST, which removes
//! the `h^{-2}` stiffness of the gradient term from the step size.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{KernelEnergy, KernelSpec};
use crate::error::{domain, Error, Result};
use crate::fft::DstNd;
use crate::grid::{strides, GridSpec};

/// A grid function with its h-weighted norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub l2_norm: f64,
    /// Forward differences with zero exterior.
    pub grad_norm: f64,
}

impl TestFunction {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        let l2_norm = l2_sq(&grid, &values).sqrt();
        let grad_norm = grad_sq(&grid, &values).sqrt();
        Ok(TestFunction {
            grid,
            values,
            l2_norm,
            grad_norm,
        })
    }

    /// Samples `f` at the grid nodes.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        Self::new(grid, values)
    }
}

fn l2_sq(grid: &GridSpec, f: &[f64]) -> f64 {
    grid.cell_volume() * f.iter().map(|v| v * v).sum::<f64>()
}

/// `‖∇f‖²` over all edges, including the edges to the zero exterior.
fn grad_sq(grid: &GridSpec, f: &[f64]) -> f64 {
    let n = grid.n;
    let h = grid.h();
    let st = strides(&vec![n; grid.d]);
    let mut acc = 0.0;
    for &s in &st {
        for (i, &v) in f.iter().enumerate() {
            let k = (i / s) % n;
            let next = if k + 1 < n { f[i + s] } else { 0.0 };
            acc += (next - v).powi(2);
            if k == 0 {
                acc += v * v;
            }
        }
    }
    grid.cell_volume() * acc / (h * h)
}

/// `Δ_h f` with zero exterior.
fn laplacian(grid: &GridSpec, f: &[f64]) -> Vec<f64> {
    let n = grid.n;
    let h2 = grid.h() * grid.h();
    let st = strides(&vec![n; grid.d]);
    let mut out: Vec<f64> = f.iter().map(|v| -2.0 * grid.d as f64 * v).collect();
    for &s in &st {
        for i in 0..f.len() {
            let k = (i / s) % n;
            if k + 1 < n {
                out[i] += f[i + s];
            }
            if k > 0 {
                out[i] += f[i - s];
            }
        }
    }
    out.iter_mut().for_each(|v| *v /= h2);
    out
}

/// Which constraint a solution satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constraint {
    /// `‖g‖₂ = 1`.
    UnitL2,
    /// `‖g‖₂² + ½‖∇g‖₂² = 1`.
    Sobolev,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalSolution {
    pub f: TestFunction,
    pub objective: f64,
    pub energy: f64,
    pub constraint: Constraint,
    pub constraint_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// The two functionals, with gradients in the h-weighted inner product.
#[derive(Debug, Clone)]
pub enum Objective {
    /// `E(g) / (‖g‖² + ½‖∇g‖²)²`, invariant under scaling.
    SigmaRatio,
    /// `θ E(g)^{1/2} - ½‖∇g‖²`, on the unit L² sphere.
    M { theta: f64 },
}

/// Objective value and gradient `∇J / h^d`.
pub fn objective_value_grad(
    objective: &Objective,
    energy: &KernelEnergy,
    g: &[f64],
) -> (f64, Vec<f64>) {
    let grid = energy.grid();
    let (e, conv) = energy.energy_with_field(g);
    let lap = laplacian(grid, g);
    // ∇E = 4 g (K ⋆ g²), ∇‖∇g‖² = -2 Δ_h g, both per unit cell volume
    match objective {
        Objective::SigmaRatio => {
            let nn = l2_sq(grid, g) + 0.5 * grad_sq(grid, g);
            let value = e / (nn * nn);
            let grad = g
                .iter()
                .zip(&conv)
                .zip(&lap)
                .map(|((gi, ci), li)| {
                    let de = 4.0 * gi * ci;
                    let dn = 2.0 * gi - li;
                    de / (nn * nn) - 2.0 * e * dn / (nn * nn * nn)
                })
                .collect();
            (value, grad)
        }
        Objective::M { theta } => {
            let se = e.max(1e-300).sqrt();
            let value = theta * se - 0.5 * grad_sq(grid, g);
            let grad = g
                .iter()
                .zip(&conv)
                .zip(&lap)
                .map(|((gi, ci), li)| theta * 2.0 * gi * ci / se + li)
                .collect();
            (value, grad)
        }
    }
}

struct Ascent<'a> {
    objective: Objective,
    energy: &'a KernelEnergy,
    dst: DstNd,
    /// `1 / (1 - ½ λ_k)` for the DST modes of `Δ_h`.
    precond: Vec<f64>,
}

impl<'a> Ascent<'a> {
    fn new(objective: Objective, energy: &'a KernelEnergy) -> Self {
        let grid = energy.grid();
        let ev = DstNd::laplacian_eigenvalues(grid.n, grid.h());
        let mut idx = vec![0usize; grid.d];
        let precond = (0..grid.len())
            .map(|i| {
                grid.unravel(i, &mut idx);
                let lam: f64 = idx.iter().map(|&k| ev[k]).sum();
                1.0 / (1.0 - 0.5 * lam)
            })
            .collect();
        Ascent {
            objective,
            energy,
            dst: DstNd::new(grid.n, grid.d),
            precond,
        }
    }

    fn precondition(&self, v: &[f64]) -> Vec<f64> {
        let mut w = v.to_vec();
        self.dst.transform(&mut w);
        w.iter_mut().zip(&self.precond).for_each(|(x, p)| *x *= p);
        self.dst.inverse(&mut w);
        w
    }

    fn retract(&self, g: &mut [f64]) {
        let grid = self.energy.grid();
        let s = match self.objective {
            Objective::SigmaRatio => (l2_sq(grid, g) + 0.5 * grad_sq(grid, g)).sqrt(),
            Objective::M { .. } => l2_sq(grid, g).sqrt(),
        };
        g.iter_mut().for_each(|v| *v /= s);
    }

    fn eval(&self, g: &[f64]) -> (f64, Vec<f64>) {
        objective_value_grad(&self.objective, self.energy, g)
    }

    /// Ascent direction and its slope `⟨∇J, dir⟩`.
    fn direction(&self, g: &[f64], grad: &[f64]) -> (Vec<f64>, f64) {
        let vol = self.energy.grid().cell_volume();
        let mut dir = self.precondition(grad);
        if let Objective::M { .. } = self.objective {
            // Tangent to the sphere in the preconditioned metric.
            let pg = self.precondition(g);
            let mu = dot(g, &dir) / dot(g, &pg);
            dir.iter_mut().zip(&pg).for_each(|(d, p)| *d -= mu * p);
        }
        let slope = vol * dot(grad, &dir);
        (dir, slope)
    }

    fn run(&self, init: Vec<f64>, max_iter: usize, tol: f64) -> (Vec<f64>, f64, usize, bool) {
        let vol = self.energy.grid().cell_volume();
        let mut g = init;
        self.retract(&mut g);
        let (mut value, mut grad) = self.eval(&g);
        let mut step = 1.0;
        let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
        for it in 0..max_iter {
            let (dir, slope) = self.direction(&g, &grad);
            if !(slope > 0.0) || slope.sqrt() <= tol * value.abs() {
                return (g, value, it, true);
            }
            if let Some((pg, pgrad)) = &prev {
                // Barzilai-Borwein step in the preconditioner metric
                let dx: Vec<f64> = g.iter().zip(pg).map(|(a, b)| a - b).collect();
                let dgr: Vec<f64> = grad.iter().zip(pgrad).map(|(a, b)| a - b).collect();
                let grid = self.energy.grid();
                let lap = laplacian(grid, &dx);
                let mdx: Vec<f64> = dx.iter().zip(&lap).map(|(x, l)| x - 0.5 * l).collect();
                let num = dot(&dx, &mdx);
                let den = -dot(&dx, &dgr);
                step = if den > 0.0 { (num / den).clamp(1e-10, 1e10) } else { 2.0 * step };
            }
            let mut accepted = None;
            // Stop halving once the predicted gain is below the roundoff of the objective.
            while step * slope > 1e-13 * value.abs() {
                let mut trial: Vec<f64> = g.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
                self.retract(&mut trial);
                let (tv, tg) = self.eval(&trial);
                if tv >= value + 1e-4 * step * slope {
                    accepted = Some((trial, tv, tg));
                    break;
                }
                step *= 0.5;
            }
            let Some((trial, tv, tg)) = accepted else {
                // No ascent at working precision: stationary up to roundoff.
                let ok = slope.sqrt() <= 1e-3 * value.abs().max(vol);
                return (g, value, it, ok);
            };
            prev = Some((std::mem::replace(&mut g, trial), std::mem::replace(&mut grad, tg)));
            value = tv;
        }
        (g, value, max_iter, false)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Starting profiles: a centred Gaussian of width `w`, the box ground state, and a
/// polynomial bump of radius `3w` capped at `R/2`.
fn initial_profiles(grid: &GridSpec, w: f64) -> Vec<Vec<f64>> {
    let r = grid.half_width;
    let b = (3.0 * w).min(0.5 * r);
    let mut out = vec![vec![0.0; grid.len()]; 3];
    for i in 0..grid.len() {
        let x = grid.point(i);
        let r2: f64 = x.iter().map(|v| v * v).sum();
        out[0][i] = (-0.5 * r2 / (w * w)).exp();
        out[1][i] = x
            .iter()
            .map(|v| (std::f64::consts::FRAC_PI_2 * (v / r + 1.0)).sin())
            .product();
        out[2][i] = (1.0 - r2 / (b * b)).max(0.0).powi(2);
    }
    out
}

fn solve(
    objective: Objective,
    kernel: &KernelSpec,
    grid: &GridSpec,
    width: f64,
    max_iter: usize,
    tol: f64,
) -> Result<VariationalSolution> {
    if !(tol > 0.0) {
        return Err(domain(format!("tolerance must be positive, got {tol}")));
    }
    let energy = KernelEnergy::new(kernel, grid)?;
    let ascent = Ascent::new(objective.clone(), &energy);
    let runs: Vec<(Vec<f64>, f64, usize, bool)> = initial_profiles(grid, width)
        .into_par_iter()
        .map(|init| ascent.run(init, max_iter, tol))
        .collect();
    let iterations = runs.iter().map(|r| r.2).sum();
    let (g, _, _, converged) = runs
        .into_iter()
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
        .expect("three starts");
    // |g| has the same energy and no larger gradient norm.
    let mut g: Vec<f64> = g.iter().map(|v| v.abs()).collect();
    ascent.retract(&mut g);
    let f = TestFunction::new(*grid, g)?;
    let e = energy.energy(&f.values);
    let (objective_value, constraint, residual) = match objective {
        Objective::SigmaRatio => {
            let c = f.l2_norm.powi(2) + 0.5 * f.grad_norm.powi(2);
            (e.sqrt(), Constraint::Sobolev, (c - 1.0).abs())
        }
        Objective::M { theta } => (
            theta * e.sqrt() - 0.5 * f.grad_norm.powi(2),
            Constraint::UnitL2,
            (f.l2_norm - 1.0).abs(),
        ),
    };
    Ok(VariationalSolution {
        f,
        objective: objective_value,
        energy: e,
        constraint,
        constraint_residual: residual,
        iterations,
        converged,
    })
}

pub const DEFAULT_MAX_ITER: usize = 4000;
pub const DEFAULT_TOL: f64 = 1e-6;

/// `σ = sup E(g)^{1/2}` over `‖g‖² + ½‖∇g‖² = 1`; the objective is σ and the energy σ².
pub fn maximize_sigma(
    kernel: &KernelSpec,
    grid: &GridSpec,
    max_iter: usize,
    tol: f64,
) -> Result<VariationalSolution> {
    solve(Objective::SigmaRatio, kernel, grid, 1.0, max_iter, tol)
}

/// `M(θ) = sup θ E(g)^{1/2} - ½‖∇g‖²` over `‖g‖ = 1`.
pub fn maximize_m(
    kernel: &KernelSpec,
    theta: f64,
    grid: &GridSpec,
    max_iter: usize,
    tol: f64,
) -> Result<VariationalSolution> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(domain(format!("theta must be positive, got {theta}")));
    }
    // Maximizers have width of order θ^{-2/(4-α)}.
    let alpha = kernel.alpha_eff();
    let width = theta.powf(-2.0 / (4.0 - alpha)).clamp(0.1, grid.half_width / 4.0);
    solve(Objective::M { theta }, kernel, grid, width, max_iter, tol)
}
