//! Seeded experiment campaigns producing result tables.

use anderson_core::eigensolver::{assemble, principal_eigenvalue};
use anderson_core::feynman_kac::{quenched_moment, PathSpec};
use anderson_core::potentials::{mollified_covariance, CovarianceAccumulator, Synthesizer};
use anderson_core::rng::{stream, stream_seed};
use anderson_core::variational::{
    bridge_constants, maximize_m, maximize_sigma, theorem_limit, DEFAULT_MAX_ITER,
};
use anderson_core::{GridSpec, PotentialModel};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::slepian::{equicorrelated, random_psd, run_slepian_check};
use crate::table::{num, ResultTable};
use crate::HarnessError;

pub const EIGEN_COLUMNS: [&str; 10] = [
    "model", "d", "R", "n", "eps", "seed", "theta", "lambda", "residual", "iterations",
];
pub const CONSTANT_COLUMNS: [&str; 11] = [
    "kernel", "d", "alpha_eff", "theta", "sigma", "kappa", "M_direct", "M_closed", "rel_gap",
    "grid_R", "grid_n",
];
pub const MOMENT_COLUMNS: [&str; 17] = [
    "model", "d", "R", "n", "eps", "seed_field", "seed_paths", "theta", "t", "dt", "m",
    "dirichlet", "log_moment", "growth_rate", "se", "ess", "surviving_fraction",
];
pub const SYNTH_COLUMNS: [&str; 10] = [
    "model", "d", "R", "n", "eps", "lag", "estimate", "se", "target", "z",
];
pub const SLEPIAN_COLUMNS: [&str; 9] = [
    "n", "rho", "A", "B", "trials", "lhs_freq", "rhs_bound", "se", "holds",
];

/// Model tag safe inside a CSV cell.
pub fn model_cell(model: &PotentialModel) -> String {
    model.tag().replace(',', ";")
}

/// Seed of field replicate `j` of a campaign.
pub fn replicate_seed(master: u64, j: usize) -> u64 {
    stream_seed(master, j as u64)
}

/// Lags, in nodes along the first axis, checked by synth-validate.
pub const SYNTH_LAGS: [i64; 5] = [0, 1, 2, 4, 8];

pub fn run_synth_validate(cfg: &ExperimentConfig) -> Result<ResultTable, HarnessError> {
    let model = cfg.model_block()?.build()?;
    let gb = cfg.grid_block()?;
    let grid = gb.fixed(model.d())?;
    let seeds = cfg.seed_block()?;
    let synth = Synthesizer::new(&model, grid, gb.epsilon)?;
    let lags: Vec<Vec<i64>> = SYNTH_LAGS
        .iter()
        .filter(|&&l| (l as usize) < grid.n)
        .map(|&l| {
            let mut v = vec![0; grid.d];
            v[0] = l;
            v
        })
        .collect();
    let mut acc = CovarianceAccumulator::new(grid, &lags)?;
    let first = (stream_seed(seeds.master, 0) >> 2) * 2;
    let chunk = 256;
    let mut done = 0;
    while done < seeds.replicates {
        let count = chunk.min(seeds.replicates - done);
        for f in synth.sample_many(first + done as u64, count) {
            acc.push(&f.values)?;
        }
        done += count;
    }
    let h = grid.h();
    let mut table = ResultTable::new(&SYNTH_COLUMNS);
    for est in acc.finish()? {
        let x: Vec<f64> = est.lag.iter().map(|&l| l as f64 * h).collect();
        let target = mollified_covariance(&model, gb.epsilon, &x)?;
        table.push(vec![
            model_cell(&model),
            grid.d.to_string(),
            num(grid.half_width),
            grid.n.to_string(),
            num(gb.epsilon),
            est.lag[0].to_string(),
            num(est.estimate),
            num(est.standard_error),
            num(target),
            num((est.estimate - target) / est.standard_error),
        ]);
    }
    Ok(table)
}

/// One cell of a scaling campaign.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenCell {
    pub t: f64,
    pub theta: f64,
    pub seed: u64,
    pub grid: GridSpec,
    pub lambda: f64,
    pub residual: f64,
    pub iterations: usize,
}

fn eigen_cell(
    model: &PotentialModel,
    grid: GridSpec,
    eps: f64,
    theta: f64,
    t: f64,
    seed: u64,
    tol: f64,
) -> Result<EigenCell, HarnessError> {
    let field = Synthesizer::new(model, grid, eps)?.sample(seed);
    let res = principal_eigenvalue(&assemble(&field, theta)?, tol, 5000)?;
    Ok(EigenCell {
        t,
        theta,
        seed,
        grid,
        lambda: res.lambda,
        residual: res.residual,
        iterations: res.iterations,
    })
}

fn eigen_row(model: &PotentialModel, eps: f64, c: &EigenCell) -> Vec<String> {
    vec![
        model_cell(model),
        c.grid.d.to_string(),
        num(c.grid.half_width),
        c.grid.n.to_string(),
        num(eps),
        c.seed.to_string(),
        num(c.theta),
        num(c.lambda),
        num(c.residual),
        c.iterations.to_string(),
    ]
}

/// Cells for every `(t, θ, replicate)`.
///
/// With `grid.half_width` set every cell uses that box and its own field. Otherwise the
/// boxes are `Q_t`, nested: each replicate draws one field on the largest box and every
/// `Q_t` sees its restriction, so λ is non-decreasing in `t` seed by seed.
pub fn eigen_campaign(cfg: &ExperimentConfig, thetas: &[f64]) -> Result<Vec<EigenCell>, HarnessError> {
    let model = cfg.model_block()?.build()?;
    let gb = cfg.grid_block()?;
    let seeds = cfg.seed_block()?;
    let tol = cfg.tolerances.eigen;
    let seed_list: Vec<u64> = (0..seeds.replicates).map(|j| replicate_seed(seeds.master, j)).collect();
    if gb.half_width.is_some() {
        let grid = gb.fixed(model.d())?;
        let mut jobs = Vec::new();
        for &t in &cfg.t {
            for &theta in thetas {
                for &seed in &seed_list {
                    jobs.push((t, theta, seed));
                }
            }
        }
        return jobs
            .par_iter()
            .map(|&(t, theta, seed)| eigen_cell(&model, grid, gb.epsilon, theta, t, seed, tol))
            .collect();
    }
    let t_max = cfg.t.iter().cloned().fold(0.0, f64::max);
    let big = gb.grid(model.d(), t_max)?;
    let synth = Synthesizer::new(&model, big, gb.epsilon)?;
    let boxes: Vec<(f64, Vec<usize>, Vec<usize>, GridSpec)> = cfg
        .t
        .iter()
        .map(|&t| nested_box(&big, t).map(|(lo, hi, g)| (t, lo, hi, g)))
        .collect::<Result<_, _>>()?;
    let jobs: Vec<(f64, u64)> = thetas
        .iter()
        .flat_map(|&th| seed_list.iter().map(move |&s| (th, s)))
        .collect();
    let per_job: Vec<Vec<EigenCell>> = jobs
        .par_iter()
        .map(|&(theta, seed)| {
            let op = assemble(&synth.sample(seed), theta)?;
            boxes
                .iter()
                .map(|(t, lo, hi, grid)| {
                    let sub = if grid.n == big.n { op.clone() } else { op.restrict(lo, hi)? };
                    let res = principal_eigenvalue(&sub, tol, 5000)?;
                    Ok(EigenCell {
                        t: *t,
                        theta,
                        seed,
                        grid: *grid,
                        lambda: res.lambda,
                        residual: res.residual,
                        iterations: res.iterations,
                    })
                })
                .collect::<Result<Vec<_>, HarnessError>>()
        })
        .collect::<Result<_, _>>()?;
    // (t, θ, seed) order, as in the fixed-box campaign.
    let mut cells = Vec::with_capacity(jobs.len() * boxes.len());
    for k in 0..boxes.len() {
        for &theta in thetas {
            for (row, &(th, _)) in per_job.iter().zip(&jobs) {
                if th == theta {
                    cells.push(row[k].clone());
                }
            }
        }
    }
    Ok(cells)
}

/// Index range of the nodes of `big` strictly inside `Q_t`, and the grid they form.
fn nested_box(big: &GridSpec, t: f64) -> Result<(Vec<usize>, Vec<usize>, GridSpec), HarnessError> {
    let h = big.h();
    let inside: Vec<usize> = (0..big.n).filter(|&k| big.coord(k).abs() < t - 1e-9 * h).collect();
    let (first, last) = match (inside.first(), inside.last()) {
        (Some(&a), Some(&b)) if b > a => (a, b),
        _ => return Err(HarnessError::Config(format!("box Q_{t} holds fewer than two nodes"))),
    };
    let count = last - first + 1;
    let grid = GridSpec::new(big.d, 0.5 * (count + 1) as f64 * h, count)?;
    Ok((vec![first; big.d], vec![last + 1; big.d], grid))
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingSummary {
    pub t: Vec<f64>,
    pub medians: Vec<f64>,
    pub monotone: bool,
    /// Least-squares slope through the origin of median λ against `(log t)^{2/(4-α)}`.
    pub a_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `θ^{4/(4-α)} h(d, α)`, when available.
    pub reference: Option<f64>,
    pub ratio: Option<f64>,
}

fn slope_through_origin(x: &[f64], y: &[f64]) -> f64 {
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    sxy / sxx
}

/// Bootstrap replicates for the slope interval.
pub const BOOTSTRAP: usize = 1000;

/// Medians over seeds per `t`, their monotonicity and the fitted slope with a percentile
/// bootstrap interval (seeds resampled within each `t`).
pub fn summarize_scaling(
    cells: &[EigenCell],
    alpha: f64,
    reference: Option<f64>,
    seed: u64,
) -> ScalingSummary {
    let mut ts: Vec<f64> = cells.iter().map(|c| c.t).collect();
    ts.sort_by(|a, b| a.total_cmp(b));
    ts.dedup();
    let groups: Vec<Vec<f64>> = ts
        .iter()
        .map(|&t| cells.iter().filter(|c| c.t == t).map(|c| c.lambda).collect())
        .collect();
    let medians: Vec<f64> = groups.iter().map(|g| median(&mut g.clone())).collect();
    let x: Vec<f64> = ts.iter().map(|t| t.ln().powf(2.0 / (4.0 - alpha))).collect();
    let a_hat = slope_through_origin(&x, &medians);
    let mut rng = stream(seed, 0xB007);
    let mut boot: Vec<f64> = (0..BOOTSTRAP)
        .map(|_| {
            let m: Vec<f64> = groups
                .iter()
                .map(|g| {
                    let mut s: Vec<f64> = (0..g.len()).map(|_| g[rng.random_range(0..g.len())]).collect();
                    median(&mut s)
                })
                .collect();
            slope_through_origin(&x, &m)
        })
        .collect();
    boot.sort_by(|a, b| a.total_cmp(b));
    let q = |p: f64| boot[((p * BOOTSTRAP as f64) as usize).min(BOOTSTRAP - 1)];
    ScalingSummary {
        monotone: medians.windows(2).all(|w| w[1] >= w[0]),
        t: ts,
        medians,
        a_hat,
        ci_low: q(0.025),
        ci_high: q(0.975),
        reference,
        ratio: reference.map(|r| a_hat / r),
    }
}

/// `θ^{4/(4-α)} h(d, α)`: closed form for white noise, otherwise with κ from the
/// variational solve on `Q_8`.
pub fn reference_limit(model: &PotentialModel, theta: f64, tol: f64) -> Result<f64, HarnessError> {
    if let PotentialModel::WhiteNoise1D = model {
        return Ok(theorem_limit(model, theta, None)?);
    }
    let kernel = crate::config::ModelBlock::kernel_of(model);
    let d = model.d();
    let n = if d == 1 { 512 } else { 128 };
    let grid = GridSpec::new(d, 8.0, n)?;
    let sol = maximize_sigma(&kernel, &grid, DEFAULT_MAX_ITER, tol)?;
    let kappa = bridge_constants(sol.objective, kernel.alpha_eff(), theta)?.kappa;
    Ok(theorem_limit(model, theta, Some(kappa))?)
}

pub fn run_eig_scaling(cfg: &ExperimentConfig) -> Result<(ResultTable, ScalingSummary), HarnessError> {
    let model = cfg.model_block()?.build()?;
    let eps = cfg.grid_block()?.epsilon;
    let theta = cfg.theta[0];
    let cells = eigen_campaign(cfg, &[theta])?;
    let reference = reference_limit(&model, theta, cfg.tolerances.variational).ok();
    let summary = summarize_scaling(&cells, model.alpha(), reference, cfg.seed_block()?.master);
    let mut table = ResultTable::new(&EIGEN_COLUMNS);
    for c in &cells {
        table.push(eigen_row(&model, eps, c));
    }
    table.meta("a_hat", summary.a_hat);
    table.meta("ci_low", summary.ci_low);
    table.meta("ci_high", summary.ci_high);
    table.meta("monotone", summary.monotone);
    if let (Some(r), Some(q)) = (summary.reference, summary.ratio) {
        table.meta("reference", r);
        table.meta("ratio", q);
    }
    Ok((table, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaSummary {
    pub t: f64,
    pub theta: Vec<f64>,
    pub medians: Vec<f64>,
    /// Least-squares slope of `log median λ` against `log θ`; `None` unless all medians are positive.
    pub exponent: Option<f64>,
}

pub fn run_theta_scaling(cfg: &ExperimentConfig) -> Result<(ResultTable, ThetaSummary), HarnessError> {
    let model = cfg.model_block()?.build()?;
    let eps = cfg.grid_block()?.epsilon;
    let mut one = cfg.clone();
    one.t.truncate(1);
    let t = one.t[0];
    let cells = eigen_campaign(&one, &cfg.theta)?;
    let medians: Vec<f64> = cfg
        .theta
        .iter()
        .map(|&th| {
            let mut v: Vec<f64> = cells.iter().filter(|c| c.theta == th).map(|c| c.lambda).collect();
            median(&mut v)
        })
        .collect();
    let exponent = if medians.iter().all(|m| *m > 0.0) && cfg.theta.len() >= 2 {
        let x: Vec<f64> = cfg.theta.iter().map(|v| v.ln()).collect();
        let y: Vec<f64> = medians.iter().map(|v| v.ln()).collect();
        let n = x.len() as f64;
        let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        Some(sxy / sxx)
    } else {
        None
    };
    let mut table = ResultTable::new(&EIGEN_COLUMNS);
    for c in &cells {
        table.push(eigen_row(&model, eps, c));
    }
    if let Some(e) = exponent {
        table.meta("theta_exponent", e);
    }
    Ok((
        table,
        ThetaSummary {
            t,
            theta: cfg.theta.clone(),
            medians,
            exponent,
        },
    ))
}

pub fn run_variational(cfg: &ExperimentConfig) -> Result<ResultTable, HarnessError> {
    let mb = cfg.model_block()?;
    let model = mb.build()?;
    let kernel = mb.kernel()?;
    let grid = cfg.grid_block()?.fixed(model.d())?;
    let tol = cfg.tolerances.variational;
    let sigma = maximize_sigma(&kernel, &grid, DEFAULT_MAX_ITER, tol)?.objective;
    let alpha = kernel.alpha_eff();
    let mut table = ResultTable::new(&CONSTANT_COLUMNS);
    for &theta in &cfg.theta {
        let bridge = bridge_constants(sigma, alpha, theta)?;
        let direct = maximize_m(&kernel, theta, &grid, DEFAULT_MAX_ITER, tol)?.objective;
        table.push(vec![
            kernel.tag().replace(',', ";"),
            grid.d.to_string(),
            num(alpha),
            num(theta),
            num(sigma),
            num(bridge.kappa),
            num(direct),
            num(bridge.m_closed),
            num((direct - bridge.m_closed).abs() / direct.abs()),
            num(grid.half_width),
            grid.n.to_string(),
        ]);
    }
    Ok(table)
}

/// Moment rows for every field replicate, θ and t, plus the eigenvalue of each field.
pub fn run_fk(cfg: &ExperimentConfig) -> Result<(ResultTable, ResultTable), HarnessError> {
    let model = cfg.model_block()?.build()?;
    let gb = cfg.grid_block()?;
    let grid = gb.fixed(model.d())?;
    let seeds = cfg.seed_block()?;
    let fk = cfg.fk_block()?;
    let synth = Synthesizer::new(&model, grid, gb.epsilon)?;
    let seed_paths = stream_seed(seeds.master, u64::MAX);
    let mut moments = ResultTable::new(&MOMENT_COLUMNS);
    let mut eigen = ResultTable::new(&EIGEN_COLUMNS);
    for j in 0..seeds.replicates {
        let seed = replicate_seed(seeds.master, j);
        let field = synth.sample(seed);
        for &theta in &cfg.theta {
            let res = principal_eigenvalue(&assemble(&field, theta)?, cfg.tolerances.eigen, 5000)?;
            eigen.push(eigen_row(
                &model,
                gb.epsilon,
                &EigenCell {
                    t: 0.0,
                    theta,
                    seed,
                    grid,
                    lambda: res.lambda,
                    residual: res.residual,
                    iterations: res.iterations,
                },
            ));
            for &t in &cfg.t {
                let spec = PathSpec::new(grid.d, t, fk.dt, fk.paths, vec![0.0; grid.d], seed_paths)?;
                let est = quenched_moment(&field, theta, &spec, fk.dirichlet)?;
                moments.push(vec![
                    model_cell(&model),
                    grid.d.to_string(),
                    num(grid.half_width),
                    grid.n.to_string(),
                    num(gb.epsilon),
                    seed.to_string(),
                    seed_paths.to_string(),
                    num(theta),
                    num(t),
                    num(spec.dt),
                    fk.paths.to_string(),
                    fk.dirichlet.to_string(),
                    num(est.log_moment),
                    num(est.growth_rate),
                    num(est.se),
                    num(est.ess),
                    num(est.surviving_fraction),
                ]);
            }
        }
    }
    Ok((moments, eigen))
}

pub fn run_slepian(cfg: &ExperimentConfig) -> Result<ResultTable, HarnessError> {
    let s = cfg.slepian_block()?;
    let master = cfg.seed_block()?.master;
    let cov = match s.rho {
        Some(rho) => equicorrelated(s.n, rho),
        None => random_psd(s.n, master),
    };
    let check = run_slepian_check(&cov, s.a, s.b, s.trials, master)?;
    let mut table = ResultTable::new(&SLEPIAN_COLUMNS);
    table.push(vec![
        s.n.to_string(),
        s.rho.map(num).unwrap_or_else(|| "random".into()),
        num(s.a),
        num(s.b),
        s.trials.to_string(),
        num(check.lhs_freq),
        num(check.rhs_bound),
        num(check.se),
        check.holds.to_string(),
    ]);
    Ok(table)
}

/// Runs a non-acceptance experiment and returns its named tables.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<(String, ResultTable)>, HarnessError> {
    let kind = cfg.kind.as_str().to_string();
    let tables = match cfg.kind {
        ExperimentKind::SynthValidate => vec![(kind, run_synth_validate(cfg)?)],
        ExperimentKind::EigScaling => vec![(kind, run_eig_scaling(cfg)?.0)],
        ExperimentKind::ThetaScaling => vec![(kind, run_theta_scaling(cfg)?.0)],
        ExperimentKind::Variational => vec![(kind, run_variational(cfg)?)],
        ExperimentKind::FkConsistency => {
            let (m, e) = run_fk(cfg)?;
            vec![(kind.clone(), m), (format!("{kind}-eigen"), e)]
        }
        ExperimentKind::Slepian => vec![(kind, run_slepian(cfg)?)],
        ExperimentKind::Acceptance => {
            return Err(HarnessError::Config("use run_acceptance for the acceptance suite".into()))
        }
    };
    let hash = cfg.hash();
    Ok(tables
        .into_iter()
        .map(|(name, mut t)| {
            let mut meta = std::mem::take(&mut t.metadata);
            t.stamp(cfg.kind.as_str(), &hash);
            t.metadata.append(&mut meta);
            (name, t)
        })
        .collect())
}
