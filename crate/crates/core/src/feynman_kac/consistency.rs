//! Monte Carlo cross-checks: the annealed Gaussian identity and the semigroup asymptotics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::moment::{exp_average, quenched_moment, Interpolator, MIN_ESS};
use super::paths::{sample_paths, BrownianPath, PathSource, PathSpec};
use crate::eigensolver::{assemble, principal_eigenvalue, DEFAULT_TOL};
use crate::error::{domain, Error, Result};
use crate::grid::GridSpec;
use crate::potentials::{FieldSample, MollifiedCovariance, PotentialModel, Synthesizer};
use crate::rng::stream_seed;

/// Largest exponent accepted in an exponential average.
pub const MAX_EXPONENT: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealedCheck {
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    pub z_score: f64,
    /// Paths that stayed in the field box; both sides use only these.
    pub paths_used: usize,
}

/// `Σ_{a,b} w_a w_b γ_ε(B_a - B_b)`.
fn double_trapezoid(path: &BrownianPath, cov: &MollifiedCovariance) -> f64 {
    let d = path.d;
    let n = path.steps() + 1;
    let mut diff = vec![0.0; d];
    let diag = cov.eval(&diff);
    let mut acc = 0.0;
    for a in 0..n {
        let x = path.point(a);
        let mut row = 0.0;
        for b in 0..a {
            let y = path.point(b);
            for j in 0..d {
                diff[j] = x[j] - y[j];
            }
            row += path.weight(b) * cov.eval(&diff);
        }
        let wa = path.weight(a);
        acc += wa * (2.0 * row + wa * diag);
    }
    acc
}

fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)
}

/// Compares `E⊗E₀ exp{θ ∫V_ε(B_s)ds}` estimated over a crossed design of fields and paths
/// with `E₀ exp{(θ²/2) ∫∫ γ_ε(B_u - B_v) du dv}` on the same paths.
///
/// Fields are synthesized on `grid`; paths start at the origin and any path leaving the
/// box is dropped from both sides. The left side's standard error combines the spread
/// of field means and of path means.
#[allow(clippy::too_many_arguments)]
pub fn annealed_consistency(
    model: &PotentialModel,
    grid: GridSpec,
    theta: f64,
    t: f64,
    dt: f64,
    m_paths: usize,
    m_fields: usize,
    epsilon: f64,
    seed: u64,
) -> Result<AnnealedCheck> {
    if grid.d != model.d() {
        return Err(Error::DimensionMismatch {
            expected: model.d(),
            got: grid.d,
        });
    }
    if m_fields < 2 || m_paths < 2 {
        return Err(Error::InsufficientReplicates {
            needed: 2,
            got: m_fields.min(m_paths),
        });
    }
    if !theta.is_finite() {
        return Err(domain("theta must be finite"));
    }
    let d = grid.d;
    let ensemble = sample_paths(d, t, dt, m_paths, &vec![0.0; d], stream_seed(seed, 2))?;
    let inside: Vec<BrownianPath> = (0..m_paths)
        .map(|k| ensemble.path(k))
        .filter(|p| p.points.iter().all(|x| x.abs() < grid.half_width))
        .collect();
    if inside.len() < 2 {
        return Err(Error::AllPathsExited);
    }
    let mp = inside.len();

    let cov = MollifiedCovariance::new(model, epsilon)?;
    let quad: Vec<f64> = inside
        .par_iter()
        .map(|p| 0.5 * theta * theta * double_trapezoid(p, &cov))
        .collect();
    let qmax = quad.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if qmax > MAX_EXPONENT {
        return Err(Error::VarianceOverflow { max_exponent: qmax });
    }
    let logs: Vec<Option<f64>> = quad.iter().map(|&v| Some(v)).collect();
    let right = exp_average(&logs)?;
    if right.ess < MIN_ESS {
        return Err(Error::LowEffectiveSampleSize {
            ess: right.ess,
            min: MIN_ESS,
        });
    }
    let rhs = right.log_mean.exp();

    let synth = Synthesizer::new(model, grid, epsilon)?;
    let base = stream_seed(seed, 1) >> 2;
    let pairs = m_fields.div_ceil(2);
    let mut rows: Vec<Vec<f64>> = (0..pairs as u64)
        .into_par_iter()
        .flat_map_iter(|j| {
            let (a, b) = synth.sample_pair(base + j);
            [a, b].map(|f| line_integrals(&f, &inside, theta))
        })
        .collect();
    rows.truncate(m_fields);
    let mf = rows.len();

    let emax = rows.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(emax <= MAX_EXPONENT) {
        return Err(Error::VarianceOverflow { max_exponent: emax });
    }
    let mut col = vec![0.0; mp];
    let row_means: Vec<f64> = rows
        .iter()
        .map(|r| {
            let mut s = 0.0;
            for (c, e) in col.iter_mut().zip(r) {
                let v = (e - emax).exp();
                *c += v;
                s += v;
            }
            s / mp as f64
        })
        .collect();
    for c in &mut col {
        *c /= mf as f64;
    }
    let scale = emax.exp();
    let grand = row_means.iter().sum::<f64>() / mf as f64;
    let lhs = scale * grand;
    let lhs_se = scale * (sample_variance(&row_means) / mf as f64 + sample_variance(&col) / mp as f64).sqrt();
    let rhs_se = rhs * right.se_log;
    let combined = (lhs_se * lhs_se + rhs_se * rhs_se).sqrt();
    let z_score = if combined > 0.0 {
        (lhs - rhs).abs() / combined
    } else {
        0.0
    };
    Ok(AnnealedCheck {
        lhs,
        lhs_se,
        rhs,
        rhs_se,
        z_score,
        paths_used: mp,
    })
}

/// `θ I` for each path against one field.
fn line_integrals(field: &FieldSample, paths: &[BrownianPath], theta: f64) -> Vec<f64> {
    let interp = Interpolator::new(field).expect("dimension checked");
    paths
        .iter()
        .map(|p| theta * (0..=p.steps()).map(|k| p.weight(k) * interp.eval(p.point(k))).sum::<f64>())
        .collect()
}

/// Path parameters shared by every horizon of [`semigroup_consistency`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub dt: f64,
    pub m: usize,
    pub start: Vec<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemigroupRow {
    pub t: f64,
    pub growth_rate: f64,
    /// Standard error of `growth_rate`.
    pub se: f64,
    pub lambda: f64,
    pub gap: f64,
    pub ess: f64,
    pub surviving_fraction: f64,
}

/// Dirichlet growth rates `t^{-1} log E₀[exp{θ∫V}; τ > t]` against the principal
/// eigenvalue of `½Δ + θV` on the field's box.
pub fn semigroup_consistency(
    field: &FieldSample,
    theta: f64,
    t_values: &[f64],
    ensemble: &EnsembleSpec,
) -> Result<Vec<SemigroupRow>> {
    let op = assemble(field, theta)?;
    let lambda = principal_eigenvalue(&op, DEFAULT_TOL, 5000)?.lambda;
    t_values
        .iter()
        .map(|&t| {
            let spec = PathSpec::new(
                field.grid.d,
                t,
                ensemble.dt,
                ensemble.m,
                ensemble.start.clone(),
                ensemble.seed,
            )?;
            let est = quenched_moment(field, theta, &spec, true)?;
            Ok(SemigroupRow {
                t,
                growth_rate: est.growth_rate,
                se: est.se / t,
                lambda,
                gap: (est.growth_rate - lambda).abs(),
                ess: est.ess,
                surviving_fraction: est.surviving_fraction,
            })
        })
        .collect()
}
