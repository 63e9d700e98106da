//! Line integrals of a frozen field and quenched exponential moments.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::paths::{BrownianPath, PathSource};
use crate::error::{Error, Result};
use crate::grid::{strides, GridSpec};
use crate::potentials::FieldSample;

/// Exponential averages with fewer effective samples than this are refused.
pub const MIN_ESS: f64 = 30.0;

const MAX_DIM: usize = 8;

/// Multilinear interpolation of nodal values; constant beyond the outermost nodes.
pub(crate) struct Interpolator<'a> {
    values: &'a [f64],
    grid: GridSpec,
    h: f64,
    strides: Vec<usize>,
}

impl<'a> Interpolator<'a> {
    pub(crate) fn new(field: &'a FieldSample) -> Result<Self> {
        let grid = field.grid;
        if grid.d > MAX_DIM {
            return Err(Error::Unsupported(format!(
                "interpolation is implemented for d <= {MAX_DIM}"
            )));
        }
        Ok(Interpolator {
            values: &field.values,
            grid,
            h: grid.h(),
            strides: strides(&vec![grid.n; grid.d]),
        })
    }

    pub(crate) fn inside(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.abs() < self.grid.half_width)
    }

    pub(crate) fn eval(&self, x: &[f64]) -> f64 {
        let d = self.grid.d;
        let n = self.grid.n;
        let mut base = 0;
        let mut frac = [0.0; MAX_DIM];
        for a in 0..d {
            let s = ((x[a] + self.grid.half_width) / self.h - 1.0).clamp(0.0, (n - 1) as f64);
            let i = (s.floor() as usize).min(n - 2);
            frac[a] = s - i as f64;
            base += i * self.strides[a];
        }
        let mut acc = 0.0;
        for corner in 0..1usize << d {
            let mut w = 1.0;
            let mut idx = base;
            for a in 0..d {
                if corner >> a & 1 == 1 {
                    w *= frac[a];
                    idx += self.strides[a];
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            if w != 0.0 {
                acc += w * self.values[idx];
            }
        }
        acc
    }
}

fn check_dim(path: &BrownianPath, field: &FieldSample) -> Result<()> {
    if path.d != field.grid.d {
        return Err(Error::DimensionMismatch {
            expected: field.grid.d,
            got: path.d,
        });
    }
    Ok(())
}

fn first_exit(path: &BrownianPath, interp: &Interpolator) -> Option<usize> {
    (0..=path.steps()).find(|&k| !interp.inside(path.point(k)))
}

fn trapezoid(path: &BrownianPath, interp: &Interpolator) -> f64 {
    (0..=path.steps())
        .map(|k| path.weight(k) * interp.eval(path.point(k)))
        .sum()
}

/// `Σ_k ½(V(B_k) + V(B_{k+1})) dt` with `V` interpolated from the field.
///
/// A path reaching `|x_a| >= R` yields [`Error::ExitBeforeHorizon`] at the first such sample.
pub fn potential_line_integral(path: &BrownianPath, field: &FieldSample) -> Result<f64> {
    check_dim(path, field)?;
    let interp = Interpolator::new(field)?;
    if let Some(step) = first_exit(path, &interp) {
        return Err(Error::ExitBeforeHorizon {
            step,
            tau: step as f64 * path.dt,
        });
    }
    Ok(trapezoid(path, &interp))
}

/// Log of the probability that the Brownian bridges between consecutive samples
/// stay inside the box. Faces are treated independently.
fn log_bridge_survival(path: &BrownianPath, half_width: f64) -> f64 {
    let d = path.d;
    let cut = 40.0 * path.dt;
    let mut acc = 0.0;
    for k in 0..path.steps() {
        let (x, y) = (path.point(k), path.point(k + 1));
        for a in 0..d {
            for gap in [
                (half_width - x[a]) * (half_width - y[a]),
                (half_width + x[a]) * (half_width + y[a]),
            ] {
                if gap < cut {
                    acc += (-(-2.0 * gap / path.dt).exp()).ln_1p();
                }
            }
        }
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub log_moment: f64,
    pub growth_rate: f64,
    /// Delta-method standard error of `log_moment`.
    pub se: f64,
    pub ess: f64,
    pub surviving_fraction: f64,
    pub m: usize,
    pub t: f64,
}

/// Log-sum-exp summary of per-path log weights; `None` marks a killed path.
pub(crate) struct ExpAverage {
    pub log_mean: f64,
    pub se_log: f64,
    pub ess: f64,
}

pub(crate) fn exp_average(logs: &[Option<f64>]) -> Result<ExpAverage> {
    let m = logs.len() as f64;
    let max = logs
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::AllPathsExited);
    }
    if !max.is_finite() {
        return Err(Error::VarianceOverflow { max_exponent: max });
    }
    let (mut s1, mut s2) = (0.0, 0.0);
    for v in logs.iter().flatten() {
        let w = (v - max).exp();
        s1 += w;
        s2 += w * w;
    }
    let mean = s1 / m;
    let var = (s2 / m - mean * mean).max(0.0);
    Ok(ExpAverage {
        log_mean: max + mean.ln(),
        se_log: (var / m).sqrt() / mean,
        ess: s1 * s1 / s2,
    })
}

/// `log (1/m) Σ_k exp{θ I_k}` over the ensemble.
///
/// With `dirichlet` set, a path touching the boundary at a sample contributes zero and
/// surviving paths are weighted by the probability that the bridges between samples
/// stay inside; otherwise any exit is an error.
pub fn quenched_moment(
    field: &FieldSample,
    theta: f64,
    paths: &dyn PathSource,
    dirichlet: bool,
) -> Result<MomentEstimate> {
    let spec = paths.spec();
    if spec.d != field.grid.d {
        return Err(Error::DimensionMismatch {
            expected: field.grid.d,
            got: spec.d,
        });
    }
    let interp = Interpolator::new(field)?;
    let r = field.grid.half_width;
    let logs: Vec<std::result::Result<Option<f64>, (usize, usize)>> = (0..paths.len())
        .into_par_iter()
        .map(|k| {
            let path = paths.path(k);
            match first_exit(&path, &interp) {
                Some(step) if !dirichlet => Err((k, step)),
                Some(_) => Ok(None),
                None => {
                    let mut a = theta * trapezoid(&path, &interp);
                    if dirichlet {
                        a += log_bridge_survival(&path, r);
                    }
                    Ok(Some(a))
                }
            }
        })
        .collect();
    let mut vals = Vec::with_capacity(logs.len());
    for v in logs {
        match v {
            Ok(x) => vals.push(x),
            Err((_, step)) => {
                return Err(Error::ExitBeforeHorizon {
                    step,
                    tau: step as f64 * spec.dt,
                })
            }
        }
    }
    let surviving = vals.iter().filter(|v| v.is_some()).count();
    let avg = exp_average(&vals)?;
    if avg.ess < MIN_ESS {
        return Err(Error::LowEffectiveSampleSize {
            ess: avg.ess,
            min: MIN_ESS,
        });
    }
    Ok(MomentEstimate {
        log_moment: avg.log_mean,
        growth_rate: avg.log_mean / spec.t,
        se: avg.se_log,
        ess: avg.ess,
        surviving_fraction: surviving as f64 / vals.len() as f64,
        m: vals.len(),
        t: spec.t,
    })
}
