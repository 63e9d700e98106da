//! The acceptance suite: thirteen criteria, each reported with its measured values.
//!
//! Tolerances are fixed below; [`AcceptanceSettings::tolerance_scale`] multiplies every
//! one of them, so a scale of ½ shows which criteria are marginal.

use std::f64::consts::PI;
use std::time::Instant;

use anderson_core::eigensolver::{assemble, decomposition_gap, principal_eigenvalue};
use anderson_core::feynman_kac::{
    annealed_consistency, conditional_variance_spectral, potential_line_integral,
    semigroup_consistency, BrownianPath, EnsembleSpec, PathSource, QuadratureSpec,
};
use anderson_core::potentials::{
    mollified_covariance, newtonian_coupling, CovarianceAccumulator, Synthesizer,
};
use anderson_core::quad::tanh_sinh;
use anderson_core::rng::stream_seed;
use anderson_core::variational::{
    bridge_constants, maximize_m, maximize_sigma, theorem_limit, KernelSpec, DEFAULT_MAX_ITER,
};
use anderson_core::{FieldSample, GridSpec, PotentialModel};
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{GridBlock, ModelBlock};
use crate::experiments::{eigen_campaign, median, summarize_scaling};
use crate::slepian::{equicorrelated, random_psd, run_slepian_check, slepian_bound};
use crate::table::{num, ResultTable};
use crate::{ExperimentConfig, ExperimentKind};

pub const SIGMA2_QUARTIC: f64 = 0.265_165_042_944_955_35;
pub const M_QUARTIC: f64 = 0.412_740_906_111_828_34;

const TOL_SIGMA: f64 = 0.02;
const TOL_M: f64 = 0.02;
const TOL_THETA_EXPONENT: f64 = 0.03;
const TOL_BRIDGE: f64 = 0.03;
const TOL_RIESZ_BRIDGE: f64 = 0.05;
const TOL_COUPLING: f64 = 0.01;
const TOL_EIG_FREE: f64 = 1e-3;
const TOL_EIG_DENSE: f64 = 1e-8;
const TOL_EIG_SHIFT: f64 = 1e-9;
const TOL_Z: f64 = 3.0;
const TOL_SEMIGROUP: f64 = 0.10;
const SCALING_BAND: (f64, f64) = (0.2, 5.0);
/// Slack on the r·gap trend, relative to the largest median.
const TOL_GAP_TREND: f64 = 0.05;

/// Runtime budgets in seconds.
const BUDGETS: [f64; 13] = [
    30.0, 120.0, 150.0, 600.0, 60.0, 60.0, 300.0, 600.0, 600.0, 600.0, 60.0, 1200.0, 900.0,
];

const SEED: u64 = 20_240_917;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionOutcome {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    pub measured: String,
    pub seconds: f64,
    pub budget: f64,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {}: {} ({:.1}s of {:.0}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.measured,
            self.seconds,
            self.budget
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcceptanceSettings {
    pub tolerance_scale: f64,
    /// Criteria to run; all when empty.
    pub only: Vec<usize>,
}

impl Default for AcceptanceSettings {
    fn default() -> Self {
        AcceptanceSettings {
            tolerance_scale: 1.0,
            only: vec![],
        }
    }
}

struct Ctx {
    scale: f64,
    sigma_quartic: Option<f64>,
    m_quartic: Option<f64>,
}

struct Check {
    passed: bool,
    measured: String,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn check(passed: bool, measured: String) -> Check {
    Check { passed, measured }
}

fn fail(e: impl std::fmt::Display) -> Check {
    check(false, format!("error: {e}"))
}

macro_rules! tryc {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return fail(e),
        }
    };
}

fn quartic_grid() -> GridSpec {
    GridSpec::new(1, 8.0, 1024).expect("valid grid")
}

fn c1(ctx: &mut Ctx) -> Check {
    let sol = tryc!(maximize_sigma(&KernelSpec::Quartic, &quartic_grid(), DEFAULT_MAX_ITER, 1e-6));
    let s2 = sol.objective.powi(2);
    ctx.sigma_quartic = Some(sol.objective);
    let e = rel(s2, SIGMA2_QUARTIC);
    let tol = TOL_SIGMA * ctx.scale;
    check(
        e <= tol,
        format!("sigma^2 = {s2:.7} vs {SIGMA2_QUARTIC:.7}, rel err {e:.2e} (tol {tol:.2e})"),
    )
}

fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn c2(ctx: &mut Ctx) -> Check {
    let g = quartic_grid();
    let thetas = [0.5, 1.0, 2.0];
    let vals: Vec<f64> = tryc!(thetas
        .iter()
        .map(|&th| maximize_m(&KernelSpec::Quartic, th, &g, DEFAULT_MAX_ITER, 1e-6).map(|s| s.objective))
        .collect::<Result<Vec<_>, _>>());
    let m1 = vals[1];
    ctx.m_quartic = Some(m1);
    let e = rel(m1, M_QUARTIC);
    let x: Vec<f64> = thetas.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = vals.iter().map(|v| v.ln()).collect();
    let p = fit_slope(&x, &y);
    let ep = rel(p, 4.0 / 3.0);
    let (tm, tp) = (TOL_M * ctx.scale, TOL_THETA_EXPONENT * ctx.scale);
    check(
        e <= tm && ep <= tp,
        format!(
            "M(1) = {m1:.7} vs {M_QUARTIC:.7}, rel err {e:.2e} (tol {tm:.2e}); \
             exponent {p:.5} vs 4/3, rel err {ep:.2e} (tol {tp:.2e})"
        ),
    )
}

fn c3(ctx: &mut Ctx) -> Check {
    let sigma = match ctx.sigma_quartic {
        Some(s) => s,
        None => tryc!(maximize_sigma(&KernelSpec::Quartic, &quartic_grid(), DEFAULT_MAX_ITER, 1e-6)).objective,
    };
    let m_direct = match ctx.m_quartic {
        Some(m) => m,
        None => tryc!(maximize_m(&KernelSpec::Quartic, 1.0, &quartic_grid(), DEFAULT_MAX_ITER, 1e-6)).objective,
    };
    let b = tryc!(bridge_constants(sigma, 1.0, 1.0));
    let want = 3f64.powf(-0.5);
    let ek = rel(b.kappa, want);
    let em = rel(b.m_closed, m_direct);
    let tol = TOL_BRIDGE * ctx.scale;
    check(
        ek <= tol && em <= tol,
        format!(
            "kappa = {:.6} vs {want:.6}, rel err {ek:.2e}; M_closed = {:.6} vs M_direct {m_direct:.6}, \
             rel err {em:.2e} (tol {tol:.2e})",
            b.kappa, b.m_closed
        ),
    )
}

fn c4(ctx: &mut Ctx) -> Check {
    let k = KernelSpec::Riesz { alpha: 1.0 };
    let g = tryc!(GridSpec::new(2, 8.0, 256));
    let sigma = tryc!(maximize_sigma(&k, &g, DEFAULT_MAX_ITER, 1e-6)).objective;
    let direct = tryc!(maximize_m(&k, 1.0, &g, DEFAULT_MAX_ITER, 1e-6)).objective;
    let closed = tryc!(bridge_constants(sigma, 1.0, 1.0)).m_closed;
    let e = (direct - closed).abs() / direct;
    let tol = TOL_RIESZ_BRIDGE * ctx.scale;
    check(
        e <= tol,
        format!("M_direct = {direct:.6}, M_closed = {closed:.6}, rel gap {e:.2e} (tol {tol:.2e}) on R=8, n=256"),
    )
}

/// `∫_{R^d} |x - y|^{-p} |x - z|^{-p} dx` with `|y - z| = 1`, in elliptic (d = 2) or
/// prolate spheroidal (d = 3) coordinates with foci at `y` and `z`.
///
/// With `a = ½` and `s = sinh²μ + sin²ν` the integrand is `a^{d-2p} s^{1-p}` times
/// `sinh μ sin ν` and `2π` in three dimensions.
pub fn coupling_oracle(d: usize, p: f64) -> f64 {
    let a: f64 = 0.5;
    let tail = 60.0 / (p - 1.0).max(0.25);
    let inner = |mu: f64| -> f64 {
        let sh = mu.sinh();
        let f = |nu: f64| {
            let sn = nu.sin();
            let s = sh * sh + sn * sn;
            match d {
                2 => s.powf(1.0 - p),
                _ => sh * sn * s.powf(1.0 - p),
            }
        };
        match d {
            2 => 4.0 * tanh_sinh(0.0, 0.5 * PI, 1e-10, f),
            _ => 2.0 * tanh_sinh(0.0, 0.5 * PI, 1e-10, f),
        }
    };
    let outer = tanh_sinh(0.0, 1.0, 1e-9, inner) + tanh_sinh(1.0, tail, 1e-9, inner);
    match d {
        2 => a.powf(2.0 - 2.0 * p) * outer,
        _ => 2.0 * PI * a.powf(3.0 - 2.0 * p) * outer,
    }
}

fn c5(ctx: &mut Ctx) -> Check {
    let tol = TOL_COUPLING * ctx.scale;
    let mut parts = Vec::new();
    let mut ok = true;
    for (d, p) in [(3usize, 2.0), (2, 1.25)] {
        let c = tryc!(newtonian_coupling(d, p));
        let o = coupling_oracle(d, p);
        let e = rel(c, o);
        ok &= e <= tol;
        parts.push(format!("C({d},{p}) = {c:.6} vs oracle {o:.6}, rel err {e:.2e}"));
    }
    let pi3 = PI.powi(3);
    let c32 = tryc!(newtonian_coupling(3, 2.0));
    ok &= rel(c32, pi3) <= 1e-12;
    parts.push(format!("pi^3 = {pi3:.6}"));
    check(ok, format!("{} (tol {tol:.2e})", parts.join("; ")))
}

fn zero_field(d: usize, r: f64, n: usize) -> FieldSample {
    FieldSample::constant(GridSpec::new(d, r, n).expect("valid grid"), 0.0)
}

/// Dense matrix of `½Δ_h + θV`, built from the stencil independently of the solver.
fn dense_operator(f: &FieldSample, theta: f64) -> DMatrix<f64> {
    let g = f.grid;
    let h2 = g.h() * g.h();
    let n = g.len();
    let mut m = DMatrix::zeros(n, n);
    let mut idx = vec![0; g.d];
    for i in 0..n {
        g.unravel(i, &mut idx);
        m[(i, i)] = -(g.d as f64) / h2 + theta * f.values[i];
        for a in 0..g.d {
            for s in [-1i64, 1] {
                let k = idx[a] as i64 + s;
                if k >= 0 && (k as usize) < g.n {
                    let mut j = idx.clone();
                    j[a] = k as usize;
                    m[(i, g.ravel(&j))] = 0.5 / h2;
                }
            }
        }
    }
    m
}

fn c6(ctx: &mut Ctx) -> Check {
    let tol = 1e-10;
    let mut parts = Vec::new();
    let mut ok = true;
    for d in [1usize, 2] {
        let op = tryc!(assemble(&zero_field(d, 1.0, 256), 1.0));
        let lam = tryc!(principal_eigenvalue(&op, tol, 5000)).lambda;
        let want = -(d as f64) * PI * PI / 8.0;
        let e = rel(lam, want);
        ok &= e <= TOL_EIG_FREE * ctx.scale;
        parts.push(format!("V=0 d={d}: rel err {e:.2e}"));
    }
    let mut worst: f64 = 0.0;
    for (d, n, seed) in [(1usize, 400usize, 1u64), (2, 20, 2), (2, 13, 3)] {
        let g = tryc!(GridSpec::new(d, 2.0, n));
        let eps = 2.0 * g.h();
        let model = if d == 1 {
            PotentialModel::white_noise()
        } else {
            tryc!(PotentialModel::riesz(2, 1.0, 1.0))
        };
        let f = tryc!(Synthesizer::new(&model, g, eps)).sample(seed);
        let lam = tryc!(principal_eigenvalue(&tryc!(assemble(&f, 0.7)), tol, 5000)).lambda;
        let dense = SymmetricEigen::new(dense_operator(&f, 0.7)).eigenvalues.max();
        worst = worst.max(rel(lam, dense));
    }
    ok &= worst <= TOL_EIG_DENSE * ctx.scale;
    parts.push(format!("dense oracle worst rel err {worst:.2e}"));
    let g = tryc!(GridSpec::new(2, 2.0, 40));
    let f = tryc!(Synthesizer::new(&tryc!(PotentialModel::riesz(2, 1.0, 1.0)), g, 0.3)).sample(9);
    let shifted = FieldSample {
        values: f.values.iter().map(|v| v + 0.8).collect(),
        ..f.clone()
    };
    let theta = 1.3;
    let a = tryc!(principal_eigenvalue(&tryc!(assemble(&f, theta)), tol, 5000)).lambda;
    let b = tryc!(principal_eigenvalue(&tryc!(assemble(&shifted, theta)), tol, 5000)).lambda;
    let shift_err = (b - a - theta * 0.8).abs() / (1.0 + a.abs());
    ok &= shift_err <= TOL_EIG_SHIFT * ctx.scale;
    parts.push(format!("shift err {shift_err:.2e}"));
    check(
        ok,
        format!(
            "{} (tols {:.1e}, {:.1e}, {:.1e})",
            parts.join("; "),
            TOL_EIG_FREE * ctx.scale,
            TOL_EIG_DENSE * ctx.scale,
            TOL_EIG_SHIFT * ctx.scale
        ),
    )
}

/// Models of criteria 7 and 8 with their mollification radius.
fn synthesis_models() -> Vec<(PotentialModel, f64)> {
    vec![
        (PotentialModel::white_noise(), 0.1),
        (PotentialModel::riesz(1, 0.5, 1.0).unwrap(), 0.1),
        (PotentialModel::newtonian(1, 0.8).unwrap(), 0.1),
        (PotentialModel::fractional(vec![0.7]).unwrap(), 0.1),
        (PotentialModel::riesz(2, 1.0, 1.0).unwrap(), 0.25),
        (PotentialModel::newtonian(2, 1.5).unwrap(), 0.25),
        (PotentialModel::fractional(vec![0.7, 0.8]).unwrap(), 0.25),
    ]
}

const REPLICATES: usize = 10_000;

fn c7(ctx: &mut Ctx) -> Check {
    let tol = TOL_Z * ctx.scale;
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (i, (model, eps)) in synthesis_models().into_iter().enumerate() {
        let d = model.d();
        let grid = tryc!(GridSpec::new(d, 2.0, if d == 1 { 79 } else { 31 }));
        let synth = tryc!(Synthesizer::new(&model, grid, eps));
        let lags: Vec<Vec<i64>> = [0i64, 1, 2, 4, 8]
            .iter()
            .map(|&l| {
                let mut v = vec![0; d];
                v[0] = l;
                v
            })
            .collect();
        let mut acc = tryc!(CovarianceAccumulator::new(grid, &lags));
        let first = (stream_seed(SEED, 700 + i as u64) >> 2) * 2;
        for chunk in 0..REPLICATES / 500 {
            for f in synth.sample_many(first + 500 * chunk as u64, 500) {
                tryc!(acc.push(&f.values));
            }
        }
        let mut zmax: f64 = 0.0;
        for est in tryc!(acc.finish()) {
            let x: Vec<f64> = est.lag.iter().map(|&l| l as f64 * grid.h()).collect();
            let target = tryc!(mollified_covariance(&model, eps, &x));
            zmax = zmax.max(((est.estimate - target) / est.standard_error).abs());
        }
        worst = worst.max(zmax);
        parts.push(format!("{} {zmax:.2}", model.tag()));
    }
    check(worst <= tol, format!("max |z| per model: {} (tol {tol})", parts.join(", ")))
}

/// Paths from `seed` that stay at least `margin` inside `Q_R`.
fn frozen_paths(d: usize, t: f64, dt: f64, r: f64, margin: f64, count: usize, seed: u64) -> Vec<BrownianPath> {
    let spec = anderson_core::feynman_kac::PathSpec::new(d, t, dt, 1000, vec![0.0; d], seed).expect("valid spec");
    (0..spec.len())
        .map(|k| spec.path(k))
        .filter(|p| p.points.iter().all(|x| x.abs() < r - margin))
        .take(count)
        .collect()
}

fn sample_variance_with_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let m2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = v.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    (m2 * n / (n - 1.0), ((m4 - m2 * m2) / n).sqrt())
}

fn c8(ctx: &mut Ctx) -> Check {
    let tol = TOL_Z * ctx.scale;
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (i, (model, _)) in synthesis_models().into_iter().enumerate() {
        let d = model.d();
        let (eps, r, t): (f64, f64, f64) = if d == 1 { (0.1, 1.5, 0.25) } else { (0.5, 2.0, 0.25) };
        // h = ε/8 keeps the interpolation bias below the Monte Carlo error.
        let n = (2.0 * r / (eps / 8.0)).ceil() as usize - 1;
        let grid = tryc!(GridSpec::new(d, r, n));
        let synth = tryc!(Synthesizer::new(&model, grid, eps));
        let paths = frozen_paths(d, t, 1.0 / 256.0, r, 0.1, 3, stream_seed(SEED, 800 + i as u64));
        let q = QuadratureSpec::default();
        let targets: Vec<f64> = tryc!(paths
            .iter()
            .map(|p| conditional_variance_spectral(p, &model, eps, &q))
            .collect::<Result<Vec<_>, _>>());
        let first = (stream_seed(SEED, 850 + i as u64) >> 2) * 2;
        let ints: Vec<Vec<f64>> = (0..(REPLICATES / 2) as u64)
            .into_par_iter()
            .flat_map_iter(|k| {
                let (a, b) = synth.sample_pair(first / 2 + k);
                [a, b].map(|f| {
                    paths
                        .iter()
                        .map(|p| potential_line_integral(p, &f).expect("path inside the box"))
                        .collect::<Vec<f64>>()
                })
            })
            .collect();
        let mut zs = Vec::new();
        for (j, target) in targets.iter().enumerate() {
            let v: Vec<f64> = ints.iter().map(|row| row[j]).collect();
            let (var, se) = sample_variance_with_se(&v);
            zs.push((var - target) / se);
        }
        let zmax = zs.iter().fold(0.0f64, |m, z| m.max(z.abs()));
        worst = worst.max(zmax);
        parts.push(format!(
            "{} [{}]",
            model.tag(),
            zs.iter().map(|z| format!("{z:+.2}")).collect::<Vec<_>>().join(" ")
        ));
    }
    check(worst <= tol, format!("z per path: {} (tol {tol})", parts.join(", ")))
}

fn c9(ctx: &mut Ctx) -> Check {
    let tol = TOL_Z * ctx.scale;
    let white = tryc!(annealed_consistency(
        &PotentialModel::white_noise(),
        tryc!(GridSpec::new(1, 4.0, 639)),
        0.5,
        1.0,
        1.0 / 1600.0,
        2000,
        2000,
        0.05,
        stream_seed(SEED, 9),
    ));
    let riesz = tryc!(annealed_consistency(
        &tryc!(PotentialModel::riesz(2, 1.0, 1.0)),
        tryc!(GridSpec::new(2, 4.0, 127)),
        0.25,
        1.0,
        1.0 / 64.0,
        2000,
        2000,
        0.25,
        stream_seed(SEED, 90),
    ));
    check(
        white.z_score <= tol && riesz.z_score <= tol,
        format!(
            "white noise lhs {:.5} rhs {:.5} z {:.2}; riesz d=2 lhs {:.5} rhs {:.5} z {:.2} (tol {tol})",
            white.lhs, white.rhs, white.z_score, riesz.lhs, riesz.rhs, riesz.z_score
        ),
    )
}

fn c10(ctx: &mut Ctx) -> Check {
    let eps = 0.1;
    let theta = 1.0;
    let grid = tryc!(GridSpec::new(1, 4.0, 159));
    let field = tryc!(Synthesizer::new(&PotentialModel::white_noise(), grid, eps)).sample(stream_seed(SEED, 10));
    // Start where the ground state peaks, which minimizes the transient.
    let ground = tryc!(principal_eigenvalue(&tryc!(assemble(&field, theta)), 1e-10, 5000));
    let peak = ground
        .eigenfunction
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
        .0;
    let ens = EnsembleSpec {
        dt: 1.0 / 200.0,
        m: 40_000,
        start: vec![grid.coord(peak)],
        seed: stream_seed(SEED, 11),
    };
    let rows = tryc!(semigroup_consistency(&field, theta, &[2.0, 4.0, 8.0], &ens));
    let lam = rows[0].lambda;
    let last = rows[2].gap / lam.abs();
    let decreasing = rows.windows(2).all(|w| w[1].gap < w[0].gap);
    let tol = TOL_SEMIGROUP * ctx.scale;
    check(
        last <= tol && decreasing,
        format!(
            "lambda {lam:.5}; growth {}; gaps {}; gap/|lambda| at t=8 {last:.3} (tol {tol:.3})",
            rows.iter().map(|r| format!("{:.5}", r.growth_rate)).collect::<Vec<_>>().join(" "),
            rows.iter().map(|r| format!("{:.5}", r.gap)).collect::<Vec<_>>().join(" "),
        ),
    )
}

fn c11(ctx: &mut Ctx) -> Check {
    let trials = 100_000;
    let eq = tryc!(run_slepian_check(&equicorrelated(16, 0.2), 2.0, 1.0, trials, stream_seed(SEED, 111)));
    let rnd = tryc!(run_slepian_check(&random_psd(16, 5), 2.0, 1.0, trials, stream_seed(SEED, 112)));
    // Independent components: as B → 0 the bound is [Φ(A)]^n, the exact probability.
    let ind = tryc!(run_slepian_check(&equicorrelated(16, 0.0), 2.0, 1e-12, trials, stream_seed(SEED, 113)));
    let exact = slepian_bound(16, 1.0, 0.0, 2.0, 0.0);
    let z = (ind.lhs_freq - exact).abs() / ind.se;
    let ok = eq.holds && rnd.holds && ind.holds && z <= 4.0 * ctx.scale;
    check(
        ok,
        format!(
            "equicorrelated {:.4} <= {:.4}; random {:.4} <= {:.4}; independent {:.4} vs exact {exact:.4} (|z| {z:.2})",
            eq.lhs_freq, eq.rhs_bound, rnd.lhs_freq, rnd.rhs_bound, ind.lhs_freq
        ),
    )
}

fn white_noise_config(t: Vec<f64>, eps: f64, replicates: usize, master: u64) -> ExperimentConfig {
    ExperimentConfig {
        kind: ExperimentKind::EigScaling,
        output: "acceptance".into(),
        model: Some(ModelBlock::white_noise()),
        grid: Some(GridBlock {
            half_width: None,
            n: None,
            epsilon: eps,
            spacing: Some(0.5),
        }),
        theta: vec![1.0],
        t,
        seeds: Some(crate::config::SeedBlock { master, replicates }),
        tolerances: Default::default(),
        fk: None,
        slepian: None,
    }
}

fn c12(ctx: &mut Ctx) -> Check {
    let cfg = white_noise_config(vec![8.0, 16.0, 32.0, 64.0], 0.1, 20, stream_seed(SEED, 12));
    let cells = tryc!(eigen_campaign(&cfg, &[1.0]));
    let reference = tryc!(theorem_limit(&PotentialModel::white_noise(), 1.0, None));
    let s = summarize_scaling(&cells, 1.0, Some(reference), stream_seed(SEED, 120));
    let ratio = s.ratio.unwrap();
    let (lo, hi) = (SCALING_BAND.0 / ctx.scale, SCALING_BAND.1 * ctx.scale);
    check(
        s.monotone && ratio >= lo && ratio <= hi,
        format!(
            "medians {}; a_hat {:.4} [{:.4}, {:.4}], ratio to {reference:.4} = {ratio:.3} (band [{lo}, {hi}])",
            s.medians.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>().join(" "),
            s.a_hat,
            s.ci_low,
            s.ci_high
        ),
    )
}

fn c13(ctx: &mut Ctx) -> Check {
    let seeds = 50;
    let rs = [2.0, 4.0, 8.0];
    // R = 25 lets the sub-boxes cover Q_R for every r.
    let grid = tryc!(GridSpec::new(1, 25.0, 499));
    let synth = tryc!(Synthesizer::new(&PotentialModel::white_noise(), grid, 0.2));
    let rows: Vec<Vec<f64>> = tryc!((0..seeds)
        .into_par_iter()
        .map(|j| {
            let f = synth.sample(stream_seed(SEED, 1300 + j as u64));
            decomposition_gap(&f, 1.0, &rs).map(|g| g.iter().map(|r| r.r_gap).collect())
        })
        .collect::<Result<Vec<_>, _>>());
    let medians: Vec<f64> = (0..rs.len())
        .map(|k| median(&mut rows.iter().map(|r| r[k]).collect::<Vec<_>>()))
        .collect();
    let slack = TOL_GAP_TREND * ctx.scale * medians.iter().cloned().fold(0.0, f64::max);
    let ok = medians.windows(2).all(|w| w[1] <= w[0] + slack);
    check(
        ok,
        format!(
            "monotonicity held on {seeds} fields; median r*gap(r) at r = 2, 4, 8: {}",
            medians.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>().join(" ")
        ),
    )
}

type Runner = fn(&mut Ctx) -> Check;

const CRITERIA: [(&str, Runner); 13] = [
    ("sigma constant, d=1 quartic", c1),
    ("M constant and theta exponent, d=1 quartic", c2),
    ("bridge closure kappa = 3^-1/2", c3),
    ("Riesz bridge d=2 alpha=1", c4),
    ("Newtonian coupling vs integral oracle", c5),
    ("eigensolver exactness", c6),
    ("field synthesis fidelity", c7),
    ("conditional-variance closure", c8),
    ("annealed identity", c9),
    ("semigroup relation", c10),
    ("Slepian comparison bound", c11),
    ("white-noise scaling trend", c12),
    ("decomposition diagnostic", c13),
];

/// Runs the selected criteria in order; failures are reported, never raised.
pub fn run_acceptance(settings: &AcceptanceSettings, mut on_result: impl FnMut(&CriterionOutcome)) -> Vec<CriterionOutcome> {
    let mut ctx = Ctx {
        scale: settings.tolerance_scale,
        sigma_quartic: None,
        m_quartic: None,
    };
    let mut out = Vec::new();
    for (i, (title, run)) in CRITERIA.iter().enumerate() {
        let id = i + 1;
        if !settings.only.is_empty() && !settings.only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let c = run(&mut ctx);
        let seconds = start.elapsed().as_secs_f64();
        let budget = BUDGETS[i];
        let outcome = CriterionOutcome {
            id,
            title,
            passed: c.passed && seconds <= budget,
            measured: c.measured,
            seconds,
            budget,
        };
        on_result(&outcome);
        out.push(outcome);
    }
    out
}

/// The outcomes as a result table.
pub fn acceptance_table(outcomes: &[CriterionOutcome]) -> ResultTable {
    let mut t = ResultTable::new(&["id", "title", "passed", "seconds", "budget", "measured"]);
    for o in outcomes {
        t.push(vec![
            o.id.to_string(),
            o.title.replace(',', ";"),
            o.passed.to_string(),
            num((o.seconds * 10.0).round() / 10.0),
            num(o.budget),
            o.measured.replace(',', ";"),
        ]);
    }
    t
}
