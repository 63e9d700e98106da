//! Principal eigenvalue by shift-invert Lanczos with full reorthogonalization.
//!
//! Lanczos runs on `S = (σ - A)^{-1}` with `σ` above the spectrum, so the wanted
//! eigenvalue becomes the dominant, well separated one. In one dimension the inner solves
//! are exact tridiagonal factorizations whose pivots also certify `σ > λ_max`, which lets
//! the shift move down to the current estimate between restarts. In higher dimensions the
//! inner solves are conjugate gradients preconditioned by the DST-diagonal part of `σ - A`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::operator::DiscreteOperator;
use crate::error::{domain, Error, Result};
use crate::fft::DstNd;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const KRYLOV_DIM: usize = 200;
/// Upper bound on stored Krylov vector entries.
const BASIS_BUDGET: usize = 1 << 25;
const CHECK_EVERY: usize = 5;
const ADAPTIVE_CYCLE: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    pub lambda: f64,
    /// Unit h-weighted norm, nonnegative up to roundoff.
    pub eigenfunction: Vec<f64>,
    pub iterations: usize,
    /// `‖Aψ - λψ‖ / |λ|`.
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

enum Kind {
    /// Pivots and multipliers of the LDLᵀ factorization of `σ - A`.
    Thomas { pivots: Vec<f64>, off: f64 },
    Pcg { dst: DstNd, precond: Vec<f64> },
}

struct Shifted<'a> {
    op: &'a DiscreteOperator,
    sigma: f64,
    kind: Kind,
}

impl<'a> Shifted<'a> {
    /// Tridiagonal factorization, or `None` when `σ - A` is not positive definite.
    fn thomas(op: &'a DiscreteOperator, sigma: f64) -> Option<Self> {
        let h2 = op.h() * op.h();
        let off = -0.5 / h2;
        let mut pivots = Vec::with_capacity(op.len());
        let mut prev = f64::INFINITY;
        for &v in op.scaled_potential() {
            let p = sigma + 1.0 / h2 - v - off * off / prev;
            if !(p > 0.0) {
                return None;
            }
            pivots.push(p);
            prev = p;
        }
        Some(Shifted {
            op,
            sigma,
            kind: Kind::Thomas { pivots, off },
        })
    }

    fn pcg(op: &'a DiscreteOperator, sigma: f64) -> Self {
        let shape = op.shape().to_vec();
        let h = op.h();
        let ev: Vec<Vec<f64>> = shape
            .iter()
            .map(|&n| DstNd::laplacian_eigenvalues(n, h))
            .collect();
        let tv = op.scaled_potential();
        let c = sigma - tv.iter().sum::<f64>() / tv.len() as f64;
        let mut precond = Vec::with_capacity(op.len());
        let d = shape.len();
        let mut idx = vec![0usize; d];
        for _ in 0..op.len() {
            let kin: f64 = (0..d).map(|a| 0.5 * ev[a][idx[a]]).sum();
            precond.push(1.0 / (c - kin));
            for a in (0..d).rev() {
                idx[a] += 1;
                if idx[a] < shape[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        Shifted {
            op,
            sigma,
            kind: Kind::Pcg {
                dst: DstNd::with_shape(&shape),
                precond,
            },
        }
    }

    /// Solves `(σ - A) x = b`; false if the inner iteration failed.
    fn solve(&self, b: &[f64], x: &mut [f64]) -> bool {
        match &self.kind {
            Kind::Thomas { pivots, off } => {
                let n = b.len();
                // L z = b, with L unit lower bidiagonal, multipliers off / p_{k-1}
                x[0] = b[0];
                for k in 1..n {
                    x[k] = b[k] - off / pivots[k - 1] * x[k - 1];
                }
                for k in 0..n {
                    x[k] /= pivots[k];
                }
                for k in (0..n - 1).rev() {
                    x[k] -= off / pivots[k] * x[k + 1];
                }
                true
            }
            Kind::Pcg { dst, precond } => {
                let n = b.len();
                let bn = norm(b);
                x.iter_mut().for_each(|v| *v = 0.0);
                if bn == 0.0 {
                    return true;
                }
                let apply_m = |r: &[f64], z: &mut Vec<f64>| {
                    z.clear();
                    z.extend_from_slice(r);
                    dst.transform(z);
                    z.iter_mut().zip(precond).for_each(|(v, p)| *v *= p);
                    dst.inverse(z);
                };
                let mut r = b.to_vec();
                let mut z = Vec::with_capacity(n);
                apply_m(&r, &mut z);
                let mut p = z.clone();
                let mut rz = dot(&r, &z);
                let mut q = vec![0.0; n];
                for _ in 0..2000 {
                    self.op.apply(&p, &mut q);
                    q.iter_mut().zip(&p).for_each(|(qi, pi)| *qi = self.sigma * pi - *qi);
                    let pq = dot(&p, &q);
                    if !(pq > 0.0) {
                        return false;
                    }
                    let alpha = rz / pq;
                    for i in 0..n {
                        x[i] += alpha * p[i];
                        r[i] -= alpha * q[i];
                    }
                    if norm(&r) <= 1e-13 * bn {
                        return true;
                    }
                    apply_m(&r, &mut z);
                    let rz_new = dot(&r, &z);
                    let beta = rz_new / rz;
                    rz = rz_new;
                    for i in 0..n {
                        p[i] = z[i] + beta * p[i];
                    }
                }
                false
            }
        }
    }
}

struct Candidate {
    psi: Vec<f64>,
    lambda: f64,
    /// Absolute residual `‖Aψ - λψ‖` for unit Euclidean `ψ`.
    abs_residual: f64,
}

impl Candidate {
    fn new(op: &DiscreteOperator, mut psi: Vec<f64>) -> Self {
        let s = norm(&psi);
        psi.iter_mut().for_each(|v| *v /= s);
        let mut ap = vec![0.0; psi.len()];
        op.apply(&psi, &mut ap);
        let lambda = dot(&ap, &psi);
        let abs_residual = ap
            .iter()
            .zip(&psi)
            .map(|(a, p)| (a - lambda * p).powi(2))
            .sum::<f64>()
            .sqrt();
        Candidate {
            psi,
            lambda,
            abs_residual,
        }
    }

    fn relative(&self, floor: f64) -> f64 {
        self.abs_residual / self.lambda.abs().max(floor)
    }

    fn sign_ok(&self) -> bool {
        let sum: f64 = self.psi.iter().sum();
        let (mx, mn) = self.psi.iter().fold((f64::MIN, f64::MAX), |(a, b), &v| {
            let v = v * sum.signum();
            (a.max(v), b.min(v))
        });
        mn >= -1e-8 * mx
    }
}

struct CycleOut {
    best: Candidate,
    steps: usize,
    failed: bool,
}

/// One Lanczos run on `S` from `start`, at most `m` steps.
fn cycle(
    solver: &Shifted,
    op: &DiscreteOperator,
    start: &[f64],
    m: usize,
    tol: f64,
    floor: f64,
) -> CycleOut {
    let n = start.len();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut alpha = Vec::with_capacity(m);
    let mut beta: Vec<f64> = Vec::with_capacity(m);
    let mut q: Vec<f64> = start.to_vec();
    let s = norm(&q);
    q.iter_mut().for_each(|v| *v /= s);
    let mut w = vec![0.0; n];
    let mut best: Option<Candidate> = None;
    for j in 0..m {
        if !solver.solve(&q, &mut w) {
            let best = best.unwrap_or_else(|| Candidate::new(op, start.to_vec()));
            return CycleOut {
                best,
                steps: j,
                failed: true,
            };
        }
        let a = dot(&q, &w);
        for i in 0..n {
            w[i] -= a * q[i];
        }
        if let (Some(prev), Some(b)) = (basis.last(), beta.last()) {
            for i in 0..n {
                w[i] -= b * prev[i];
            }
        }
        basis.push(std::mem::take(&mut q));
        for _ in 0..2 {
            for v in &basis {
                let c = dot(v, &w);
                for i in 0..n {
                    w[i] -= c * v[i];
                }
            }
        }
        let b = norm(&w);
        alpha.push(a);
        beta.push(b);
        let k = j + 1;
        let breakdown = b <= 1e-14 * a.abs().max(f64::MIN_POSITIVE) || k == n;
        if k % CHECK_EVERY == 0 || k == m || breakdown {
            let mut t = DMatrix::zeros(k, k);
            for i in 0..k {
                t[(i, i)] = alpha[i];
                if i + 1 < k {
                    t[(i, i + 1)] = beta[i];
                    t[(i + 1, i)] = beta[i];
                }
            }
            let eig = SymmetricEigen::new(t);
            let top = (0..k)
                .max_by(|&x, &y| eig.eigenvalues[x].partial_cmp(&eig.eigenvalues[y]).unwrap())
                .unwrap();
            let theta = eig.eigenvalues[top];
            let y = eig.eigenvectors.column(top);
            let s_res = b * y[k - 1].abs();
            if s_res <= tol * theta.abs() || k == m || breakdown {
                let mut psi = vec![0.0; n];
                for (i, v) in basis.iter().enumerate() {
                    let c = y[i];
                    for l in 0..n {
                        psi[l] += c * v[l];
                    }
                }
                let cand = Candidate::new(op, psi);
                let done = cand.relative(floor) <= tol && cand.sign_ok();
                let better = best
                    .as_ref()
                    .is_none_or(|bst| cand.abs_residual < bst.abs_residual);
                if better {
                    best = Some(cand);
                }
                if done || k == m || breakdown {
                    return CycleOut {
                        best: best.unwrap(),
                        steps: k,
                        failed: false,
                    };
                }
            }
        }
        q = w.iter().map(|v| v / b).collect();
    }
    unreachable!("cycle returns at k == m")
}

/// Plain power iteration on `A - c` with `c` below the spectrum.
fn power_fallback(
    op: &DiscreteOperator,
    start: Vec<f64>,
    tol: f64,
    floor: f64,
    max_iter: usize,
) -> (Candidate, usize) {
    let tv = op.scaled_potential();
    let low = op.kinetic_bottom() + tv.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
    let mut x = start;
    let mut y = vec![0.0; x.len()];
    let mut best = Candidate::new(op, x.clone());
    for it in 1..=max_iter {
        op.apply(&x, &mut y);
        for i in 0..x.len() {
            y[i] -= low * x[i];
        }
        let s = norm(&y);
        for i in 0..x.len() {
            x[i] = y[i] / s;
        }
        if it % 10 == 0 || it == max_iter {
            let cand = Candidate::new(op, x.clone());
            let done = cand.relative(floor) <= tol && cand.sign_ok();
            if cand.abs_residual < best.abs_residual {
                best = cand;
            }
            if done {
                return (best, it);
            }
        }
    }
    (best, max_iter)
}

fn finish(op: &DiscreteOperator, cand: Candidate, iterations: usize, floor: f64) -> EigenResult {
    let residual = cand.relative(floor);
    let sign = cand.psi.iter().sum::<f64>().signum();
    let scale = sign / op.cell_volume().sqrt();
    EigenResult {
        lambda: cand.lambda,
        eigenfunction: cand.psi.iter().map(|v| v * scale).collect(),
        iterations,
        residual,
    }
}

/// Largest eigenvalue of `op` with residual `‖Aψ - λψ‖/|λ| <= tol`.
///
/// When `tol·|λ|` is below `100 ε_mach` times the spectral spread, that roundoff level
/// is accepted as the absolute residual instead.
///
/// `max_iter` bounds the total number of Lanczos steps.
pub fn principal_eigenvalue(op: &DiscreteOperator, tol: f64, max_iter: usize) -> Result<EigenResult> {
    if !(tol > 0.0) {
        return Err(domain(format!("tolerance must be positive, got {tol}")));
    }
    let n = op.len();
    let tv = op.scaled_potential();
    let (vmin, vmax) = tv
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let top = op.kinetic_top();
    let spread = op.kinetic_top() - op.kinetic_bottom() + (vmax - vmin);
    // Relative residuals are measured against |λ| unless λ is negligible on the
    // operator's own scale, or tol·|λ| lies below the roundoff in applying it.
    let spread = spread.max(f64::MIN_POSITIVE);
    let floor = (1e-10 * spread).max(100.0 * f64::EPSILON * spread / tol);

    // Start from the kinetic ground mode, which is positive like the target.
    let start: Vec<f64> = {
        let shape = op.shape();
        let d = shape.len();
        let mut idx = vec![0usize; d];
        (0..n)
            .map(|_| {
                let v: f64 = (0..d)
                    .map(|a| {
                        (std::f64::consts::PI * (idx[a] + 1) as f64 / (shape[a] + 1) as f64).sin()
                    })
                    .product();
                for a in (0..d).rev() {
                    idx[a] += 1;
                    if idx[a] < shape[a] {
                        break;
                    }
                    idx[a] = 0;
                }
                v
            })
            .collect()
    };
    if n == 1 {
        return Ok(finish(op, Candidate::new(op, start), 0, floor));
    }

    let one_d = op.shape().len() == 1;
    let mut sigma = top + vmax + 1e-3 * spread + f64::MIN_POSITIVE;
    let m_full = KRYLOV_DIM.min(n).min((BASIS_BUDGET / n).max(10));
    let mut solver = if one_d {
        Shifted::thomas(op, sigma)
    } else {
        Some(Shifted::pcg(op, sigma))
    };
    let mut iterations = 0;
    let mut current = start.clone();
    let mut best: Option<Candidate> = None;
    while iterations < max_iter {
        let Some(s) = solver.as_ref() else { break };
        let m = if one_d { ADAPTIVE_CYCLE } else { m_full }
            .min(m_full)
            .min(max_iter - iterations);
        let out = cycle(s, op, &current, m, tol, floor);
        iterations += out.steps;
        let cand = out.best;
        let converged = cand.relative(floor) <= tol && cand.sign_ok();
        if converged {
            return Ok(finish(op, cand, iterations, floor));
        }
        if out.failed {
            best = Some(cand);
            solver = None;
            break;
        }
        if one_d {
            let proposal = cand.lambda + 2.0 * cand.abs_residual + 1e-13 * spread;
            if proposal < sigma {
                if let Some(next) = Shifted::thomas(op, proposal) {
                    sigma = proposal;
                    solver = Some(next);
                }
            }
        }
        current = cand.psi.clone();
        if best.as_ref().is_none_or(|b| cand.abs_residual < b.abs_residual) {
            best = Some(cand);
        }
    }
    if solver.is_none() && iterations < max_iter {
        let from = best.as_ref().map_or(start, |b| b.psi.clone());
        let (cand, it) = power_fallback(op, from, tol, floor, max_iter - iterations);
        iterations += it;
        if cand.relative(floor) <= tol && cand.sign_ok() {
            return Ok(finish(op, cand, iterations, floor));
        }
        best = Some(cand);
    }
    let best = best.unwrap_or_else(|| Candidate::new(op, current));
    Err(Error::NonConvergence {
        iterations,
        estimate: best.lambda,
        residual: best.relative(floor),
    })
}
