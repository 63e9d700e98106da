//! Comparison of the box eigenvalue with the largest eigenvalue over overlapping sub-boxes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lanczos::{principal_eigenvalue, DEFAULT_TOL};
use super::operator::{assemble, DiscreteOperator};
use crate::error::{domain, Error, Result};
use crate::potentials::FieldSample;

const MAX_ITER: usize = 5000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub r: f64,
    pub lambda_full: f64,
    pub lambda_submax: f64,
    /// `lambda_full - lambda_submax`.
    pub gap: f64,
    pub r_gap: f64,
    pub subboxes: usize,
}

/// Index ranges `[lo, hi)` of the parent nodes strictly inside `z + (-a, a)^d`.
fn sub_box(op: &DiscreteOperator, z: &[f64], a: f64) -> Option<(Vec<usize>, Vec<usize>)> {
    let g = op.grid();
    let h = g.h();
    let mut lo = Vec::with_capacity(z.len());
    let mut hi = Vec::with_capacity(z.len());
    for &c in z {
        // node k sits at -R + (k+1) h
        let first = ((c - a + g.half_width) / h - 1.0).floor() as i64 + 1;
        let last = ((c + a + g.half_width) / h - 1.0).ceil() as i64 - 1;
        let first = first.max(0) as usize;
        let last = last.min(g.n as i64 - 1);
        if last < first as i64 {
            return None;
        }
        lo.push(first);
        hi.push(last as usize + 1);
    }
    Some((lo, hi))
}

/// Centres `z ∈ 2r Z^d` inside the open box `Q_R`.
fn centres(d: usize, r: f64, half_width: f64) -> Vec<Vec<f64>> {
    let kmax = ((half_width / (2.0 * r)) - 1e-12).ceil() as i64 - 1;
    let axis: Vec<f64> = (-kmax..=kmax).map(|k| 2.0 * r * k as f64).collect();
    let mut out = vec![vec![]];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    out
}

/// Box eigenvalue against the sub-box maximum for each radius in `r_values`.
///
/// Errors if any sub-box eigenvalue exceeds the full-box eigenvalue, which domain
/// monotonicity forbids.
pub fn decomposition_gap(field: &FieldSample, theta: f64, r_values: &[f64]) -> Result<Vec<GapRow>> {
    let half = field.grid.half_width;
    for &r in r_values {
        if !(r > 0.0 && r < half) {
            return Err(domain(format!("sub-box radius must lie in (0, R = {half}), got {r}")));
        }
    }
    let op = assemble(field, theta)?;
    let full = principal_eigenvalue(&op, DEFAULT_TOL, MAX_ITER)?.lambda;
    let slack = 1e-10 * (1.0 + full.abs());
    r_values
        .iter()
        .map(|&r| {
            let boxes: Vec<(Vec<usize>, Vec<usize>)> = centres(field.grid.d, r, half)
                .iter()
                .filter_map(|z| sub_box(&op, z, r + 1.0))
                .collect();
            let values: Vec<f64> = boxes
                .par_iter()
                .map(|(lo, hi)| {
                    let sub = op.restrict(lo, hi)?;
                    Ok(principal_eigenvalue(&sub, DEFAULT_TOL, MAX_ITER)?.lambda)
                })
                .collect::<Result<_>>()?;
            let submax = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if submax > full + slack {
                return Err(Error::MonotonicityViolation { sub: submax, full });
            }
            let gap = full - submax;
            Ok(GapRow {
                r,
                lambda_full: full,
                lambda_submax: submax,
                gap,
                r_gap: r * gap,
                subboxes: values.len(),
            })
        })
        .collect()
}
