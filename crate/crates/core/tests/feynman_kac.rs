use anderson_core::eigensolver::{assemble, principal_eigenvalue, DEFAULT_TOL};
use anderson_core::feynman_kac::*;
use anderson_core::potentials::{MollifiedCovariance, PotentialModel, Synthesizer};
use anderson_core::{Error, FieldSample, GridSpec};
use proptest::prelude::*;
use std::f64::consts::PI;

fn path_from(d: usize, dt: f64, points: Vec<f64>) -> BrownianPath {
    BrownianPath { d, dt, points }
}

/// Real-space oracle: `Σ_{a,b} w_a w_b γ_ε(B_a - B_b)`.
fn double_sum(p: &BrownianPath, cov: &MollifiedCovariance) -> f64 {
    let n = p.steps() + 1;
    let mut diff = vec![0.0; p.d];
    let mut acc = 0.0;
    for a in 0..n {
        for b in 0..n {
            for j in 0..p.d {
                diff[j] = p.point(a)[j] - p.point(b)[j];
            }
            acc += p.weight(a) * p.weight(b) * cov.eval(&diff);
        }
    }
    acc
}

fn white_field(r: f64, n: usize, eps: f64, seed: u64) -> FieldSample {
    let g = GridSpec::new(1, r, n).unwrap();
    Synthesizer::new(&PotentialModel::white_noise(), g, eps)
        .unwrap()
        .sample(seed)
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

#[test]
fn single_step_has_two_slices() {
    for d in 1..=3 {
        let e = sample_paths(d, 0.1, 0.1, 3, &vec![0.5; d], 1).unwrap();
        let p = e.path(2);
        assert_eq!(p.steps(), 1);
        assert_eq!(p.points.len(), 2 * d);
        assert_eq!(p.point(0), &vec![0.5; d][..]);
    }
}

#[test]
fn terminal_variance_matches_horizon() {
    let t = 1.0;
    let e = sample_paths(1, t, 0.25, 100_000, &[0.0], 11).unwrap();
    let ends: Vec<f64> = (0..e.spec.m).map(|k| *e.positions(k).last().unwrap()).collect();
    let (_, var) = mean_var(&ends);
    let se = t * (2.0 / (ends.len() as f64 - 1.0)).sqrt();
    assert!((var - t).abs() < 3.0 * se, "variance {var}");
}

#[test]
fn increments_are_standard_gaussian() {
    let dt = 0.01;
    let e = sample_paths(2, 0.5, dt, 400, &[0.3, -0.2], 5).unwrap();
    for a in 0..2 {
        let mut inc = Vec::new();
        for k in 0..e.spec.m {
            let p = e.path(k);
            assert_eq!(p.point(0), &[0.3, -0.2]);
            for s in 0..p.steps() {
                inc.push(p.point(s + 1)[a] - p.point(s)[a]);
            }
        }
        let (m, v) = mean_var(&inc);
        let n = inc.len() as f64;
        assert!(m.abs() < 4.0 * (dt / n).sqrt());
        assert!((v - dt).abs() < 4.0 * dt * (2.0 / n).sqrt());
    }
}

#[test]
fn ensembles_are_deterministic_and_prefix_stable() {
    let a = sample_paths(2, 1.0, 0.1, 5, &[0.0, 0.0], 9).unwrap();
    let b = sample_paths(2, 1.0, 0.1, 5, &[0.0, 0.0], 9).unwrap();
    let c = sample_paths(2, 1.0, 0.1, 8, &[0.0, 0.0], 9).unwrap();
    let other = sample_paths(2, 1.0, 0.1, 5, &[0.0, 0.0], 10).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.positions(4), c.positions(4));
    assert_ne!(a.paths, other.paths);
    // the lazy spec yields the stored paths
    assert_eq!(a.spec.path(3), a.path(3));
}

#[test]
fn path_parameters_are_checked() {
    assert!(matches!(sample_paths(1, 0.05, 0.1, 1, &[0.0], 0), Err(Error::Domain(_))));
    assert!(matches!(sample_paths(1, 1.0, 0.0, 1, &[0.0], 0), Err(Error::Domain(_))));
    assert!(matches!(sample_paths(1, 1.0, 0.1, 0, &[0.0], 0), Err(Error::Domain(_))));
    assert!(matches!(
        sample_paths(2, 1.0, 0.1, 1, &[0.0], 0),
        Err(Error::DimensionMismatch { .. })
    ));
    assert!(matches!(
        sample_paths(3, 100.0, 1e-4, 1_000_000, &[0.0; 3], 0),
        Err(Error::MemoryBudget { .. })
    ));
}

#[test]
fn constant_field_integrates_exactly() {
    let g = GridSpec::new(2, 3.0, 20).unwrap();
    let f = FieldSample::constant(g, 1.7);
    let e = sample_paths(2, 0.8, 0.01, 4, &[0.0, 0.0], 2).unwrap();
    for k in 0..4 {
        let i = potential_line_integral(&e.path(k), &f).unwrap();
        assert!((i - 1.7 * 0.8).abs() < 1e-12);
    }
}

#[test]
fn linear_field_matches_closed_form() {
    // V(x) = 0.5 + 2 x_0 - x_1 is reproduced by multilinear interpolation.
    let g = GridSpec::new(2, 2.0, 31).unwrap();
    let vals: Vec<f64> = (0..g.len())
        .map(|i| {
            let x = g.point(i);
            0.5 + 2.0 * x[0] - x[1]
        })
        .collect();
    let f = FieldSample::from_values(g, vals, 0.1, PotentialModel::white_noise()).unwrap();
    let dt = 0.01;
    let pts: Vec<f64> = (0..=100)
        .flat_map(|k| {
            let s = k as f64 * dt;
            [0.3 * s.sin(), -0.5 * s * s]
        })
        .collect();
    let p = path_from(2, dt, pts);
    let want: f64 = (0..=100)
        .map(|k| {
            let x = p.point(k);
            p.weight(k) * (0.5 + 2.0 * x[0] - x[1])
        })
        .sum();
    let got = potential_line_integral(&p, &f).unwrap();
    assert!((got - want).abs() < 1e-10);
}

#[test]
fn exit_is_reported_with_first_index() {
    let g = GridSpec::new(1, 1.0, 9).unwrap();
    let f = FieldSample::constant(g, 1.0);
    let p = path_from(1, 0.5, vec![0.0, 0.5, 1.2, 0.3, -2.0]);
    match potential_line_integral(&p, &f) {
        Err(Error::ExitBeforeHorizon { step, tau }) => {
            assert_eq!(step, 2);
            assert!((tau - 1.0).abs() < 1e-15);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn time_refinement_is_cauchy() {
    let f = white_field(4.0, 799, 0.1, 3);
    let fine = sample_paths(1, 1.0, 1.0 / 1024.0, 40, &[0.0], 17).unwrap();
    let sub = |p: &BrownianPath, every: usize| {
        let pts: Vec<f64> = p.points.iter().step_by(every).copied().collect();
        path_from(1, p.dt * every as f64, pts)
    };
    let mut diffs = [0.0; 3];
    for k in 0..fine.spec.m {
        let p = fine.path(k);
        let i: Vec<f64> = [8, 4, 2, 1]
            .iter()
            .map(|&e| potential_line_integral(&sub(&p, e), &f).unwrap())
            .collect();
        for j in 0..3 {
            diffs[j] += (i[j + 1] - i[j]).abs();
        }
    }
    assert!(diffs[1] < diffs[0] && diffs[2] < diffs[1], "{diffs:?}");
}

fn models_d12() -> Vec<(PotentialModel, f64)> {
    vec![
        (PotentialModel::white_noise(), 0.1),
        (PotentialModel::riesz(1, 0.5, 1.0).unwrap(), 0.1),
        (PotentialModel::fractional(vec![0.7]).unwrap(), 0.1),
        (PotentialModel::newtonian(1, 0.8).unwrap(), 0.1),
        (PotentialModel::riesz(2, 1.0, 1.0).unwrap(), 0.5),
        (PotentialModel::newtonian(2, 1.5).unwrap(), 0.5),
        (PotentialModel::fractional(vec![0.7, 0.8]).unwrap(), 0.5),
    ]
}

#[test]
fn spectral_variance_matches_real_space_double_sum() {
    for (m, eps) in models_d12() {
        let d = m.d();
        let e = sample_paths(d, 0.5, 1.0 / 128.0, 2, &vec![0.0; d], 21).unwrap();
        let cov = MollifiedCovariance::new(&m, eps).unwrap();
        for k in 0..2 {
            let p = e.path(k);
            let want = double_sum(&p, &cov);
            let got = conditional_variance_spectral(&p, &m, eps, &QuadratureSpec::default()).unwrap();
            assert!((got - want).abs() < 1e-5 * want, "{}: {got} vs {want}", m.tag());
        }
    }
}

#[test]
fn spectral_variance_three_dimensional_monte_carlo() {
    let m = PotentialModel::riesz(3, 1.0, 1.0).unwrap();
    let e = sample_paths(3, 0.5, 1.0 / 64.0, 1, &[0.0; 3], 4).unwrap();
    let p = e.path(0);
    let want = double_sum(&p, &MollifiedCovariance::new(&m, 0.5).unwrap());
    let got = conditional_variance_spectral(&p, &m, 0.5, &QuadratureSpec::default()).unwrap();
    assert!((got - want).abs() < 0.02 * want, "{got} vs {want}");
}

#[test]
fn frozen_path_at_origin_factorizes() {
    let (t, dt, eps) = (0.75, 0.05, 0.2);
    let steps = (t / dt as f64).round() as usize;
    let p = path_from(1, dt, vec![0.0; steps + 1]);
    let m = PotentialModel::white_noise();
    let g0 = MollifiedCovariance::new(&m, eps).unwrap().eval(&[0.0]);
    let got = conditional_variance_spectral(&p, &m, eps, &QuadratureSpec::default()).unwrap();
    assert!((got - t * t * g0).abs() < 1e-7 * got, "{got} vs {}", t * t * g0);
}

#[test]
fn spectral_variance_grows_as_epsilon_shrinks() {
    let e = sample_paths(1, 0.5, 1.0 / 256.0, 1, &[0.0], 8).unwrap();
    let p = e.path(0);
    for m in [PotentialModel::white_noise(), PotentialModel::riesz(1, 0.6, 1.0).unwrap()] {
        let v: Vec<f64> = [0.4, 0.2, 0.1, 0.05]
            .iter()
            .map(|&eps| conditional_variance_spectral(&p, &m, eps, &QuadratureSpec::default()).unwrap())
            .collect();
        assert!(v.windows(2).all(|w| w[1] > w[0]), "{}: {v:?}", m.tag());
    }
}

#[test]
fn spectral_variance_agrees_with_field_replicates() {
    let eps = 0.2;
    let f0 = white_field(3.0, 239, eps, 0);
    let synth = Synthesizer::new(&PotentialModel::white_noise(), f0.grid, eps).unwrap();
    let e = sample_paths(1, 0.5, 1.0 / 128.0, 1, &[0.0], 2).unwrap();
    let p = e.path(0);
    let reps = 4000;
    let vals: Vec<f64> = synth
        .sample_many(0, reps)
        .iter()
        .map(|f| potential_line_integral(&p, f).unwrap())
        .collect();
    let (_, var) = mean_var(&vals);
    let want = conditional_variance_spectral(&p, &PotentialModel::white_noise(), eps, &QuadratureSpec::default())
        .unwrap();
    let se = var * (2.0 / (reps as f64 - 1.0)).sqrt();
    // interpolation bias at h = ε/8 is well below the Monte Carlo error
    assert!((var - want).abs() < 4.0 * se, "{var} vs {want} (se {se})");
}

#[test]
fn quadrature_failure_reports_refinements() {
    let e = sample_paths(2, 2.0, 1.0 / 64.0, 1, &[0.0, 0.0], 1).unwrap();
    let strict = QuadratureSpec {
        rel_tol: 1e-15,
        max_refinements: 0,
        ..QuadratureSpec::default()
    };
    let m = PotentialModel::riesz(2, 1.0, 1.0).unwrap();
    assert!(matches!(
        conditional_variance_spectral(&e.path(0), &m, 0.5, &strict),
        Err(Error::QuadratureNonConvergence { .. })
    ));
}

#[test]
fn zero_and_constant_fields_give_exact_moments() {
    let g = GridSpec::new(1, 5.0, 99).unwrap();
    let e = sample_paths(1, 1.0, 0.01, 50, &[0.0], 3).unwrap();
    let zero = quenched_moment(&FieldSample::constant(g, 0.0), 1.0, &e, false).unwrap();
    assert_eq!(zero.log_moment, 0.0);
    assert!((zero.ess - 50.0).abs() < 1e-9);
    assert_eq!(zero.surviving_fraction, 1.0);
    let c = quenched_moment(&FieldSample::constant(g, 0.7), 1.5, &e, false).unwrap();
    assert!((c.log_moment - 1.5 * 0.7).abs() < 1e-12);
    assert!((c.growth_rate - 1.05).abs() < 1e-12);
    assert!(c.se.abs() < 1e-12);
}

#[test]
fn free_moment_rejects_exits_and_dirichlet_kills() {
    let g = GridSpec::new(1, 0.5, 30).unwrap();
    let f = FieldSample::constant(g, 0.0);
    let e = sample_paths(1, 1.0, 0.01, 200, &[0.0], 3).unwrap();
    assert!(matches!(
        quenched_moment(&f, 1.0, &e, false),
        Err(Error::ExitBeforeHorizon { .. })
    ));
    let tiny = GridSpec::new(1, 0.05, 4).unwrap();
    assert!(matches!(
        quenched_moment(&FieldSample::constant(tiny, 0.0), 1.0, &e, true),
        Err(Error::AllPathsExited)
    ));
}

#[test]
fn heavy_weights_are_refused() {
    let g = GridSpec::new(1, 4.0, 99).unwrap();
    let vals: Vec<f64> = (0..99).map(|i| if i == 70 { 1e4 } else { 0.0 }).collect();
    let f = FieldSample::from_values(g, vals, 0.1, PotentialModel::white_noise()).unwrap();
    let e = sample_paths(1, 1.0, 0.01, 300, &[0.0], 7).unwrap();
    assert!(matches!(
        quenched_moment(&f, 1.0, &e, true),
        Err(Error::LowEffectiveSampleSize { .. })
    ));
}

#[test]
fn dirichlet_survival_matches_exit_law() {
    // P(|B_s| < R for s <= t) from the eigenfunction series on (-R, R).
    let (r, t) = (1.0, 0.5);
    let exact: f64 = (0..50)
        .map(|k| {
            let j = (2 * k + 1) as f64;
            4.0 / (PI * j) * (-1f64).powi(k) * (-(j * PI / (2.0 * r)).powi(2) * t / 2.0).exp()
        })
        .sum();
    let g = GridSpec::new(1, r, 20).unwrap();
    let f = FieldSample::constant(g, 0.0);
    let spec = PathSpec::new(1, t, 0.02, 20_000, vec![0.0], 5).unwrap();
    let est = quenched_moment(&f, 1.0, &spec, true).unwrap();
    let p = est.log_moment.exp();
    let se = (p * (1.0 - p) / 20_000.0).sqrt();
    assert!((p - exact).abs() < 4.0 * se, "{p} vs {exact}");
    // discrete monitoring alone overestimates survival
    assert!(est.surviving_fraction > p);
}

#[test]
fn time_step_refinement_of_growth_rate() {
    let eps = 0.8;
    let f = white_field(6.0, 119, eps, 4);
    let coarse = PathSpec::new(1, 2.0, 0.02, 4000, vec![0.0], 1).unwrap();
    let fine = PathSpec::new(1, 2.0, 0.01, 4000, vec![0.0], 2).unwrap();
    let a = quenched_moment(&f, 1.0, &coarse, false).unwrap();
    let b = quenched_moment(&f, 1.0, &fine, false).unwrap();
    let se = (a.se.powi(2) + b.se.powi(2)).sqrt() / 2.0;
    assert!((a.growth_rate - b.growth_rate).abs() < 3.0 * se);
}

#[test]
fn annealed_identity_small_theta() {
    let g = GridSpec::new(1, 5.0, 399).unwrap();
    let m = PotentialModel::white_noise();
    let c = annealed_consistency(&m, g, 1e-4, 0.5, 0.01, 50, 20, 0.1, 3).unwrap();
    assert!((c.lhs - 1.0).abs() < 1e-3 && (c.rhs - 1.0).abs() < 1e-6);
    assert!(c.z_score < 3.0);
}

#[test]
fn annealed_identity_white_noise() {
    let g = GridSpec::new(1, 4.0, 319).unwrap();
    let m = PotentialModel::white_noise();
    let c = annealed_consistency(&m, g, 0.5, 0.5, 1.0 / 400.0, 400, 400, 0.1, 12).unwrap();
    assert!(c.z_score < 3.0, "{c:?}");
    assert!(c.rhs > 1.0 && c.lhs > 1.0);
}

#[test]
fn annealed_lhs_is_exchangeable() {
    // Pair every field with every path in the opposite loop order and compare.
    let eps = 0.25;
    let g = GridSpec::new(1, 4.0, 159).unwrap();
    let m = PotentialModel::white_noise();
    let theta = 0.8;
    let synth = Synthesizer::new(&m, g, eps).unwrap();
    let fields = synth.sample_many(1000, 60);
    let e = sample_paths(1, 0.5, 0.01, 60, &[0.0], 77).unwrap();
    let mut by_path = 0.0;
    for k in 0..60 {
        let p = e.path(k);
        by_path += fields
            .iter()
            .map(|f| (theta * potential_line_integral(&p, f).unwrap()).exp())
            .sum::<f64>();
    }
    let mut by_field = 0.0;
    for f in &fields {
        by_field += (0..60)
            .map(|k| (theta * potential_line_integral(&e.path(k), f).unwrap()).exp())
            .sum::<f64>();
    }
    assert!((by_path - by_field).abs() < 1e-10 * by_field);
    let c = annealed_consistency(&m, g, theta, 0.5, 0.01, 300, 300, eps, 5).unwrap();
    let other = annealed_consistency(&m, g, theta, 0.5, 0.01, 300, 300, eps, 6).unwrap();
    let se = (c.lhs_se.powi(2) + other.lhs_se.powi(2)).sqrt();
    assert!((c.lhs - other.lhs).abs() < 3.0 * se);
}

#[test]
fn annealed_overflow_is_refused() {
    let g = GridSpec::new(1, 4.0, 159).unwrap();
    let m = PotentialModel::white_noise();
    let r = annealed_consistency(&m, g, 400.0, 0.5, 0.01, 20, 4, 0.1, 1);
    assert!(matches!(r, Err(Error::VarianceOverflow { .. })), "{r:?}");
}

#[test]
fn semigroup_constant_field() {
    let (r, c, theta) = (1.5, 0.4, 1.0);
    let g = GridSpec::new(1, r, 59).unwrap();
    let f = FieldSample::constant(g, c);
    let ens = EnsembleSpec {
        dt: 0.005,
        m: 20_000,
        start: vec![0.0],
        seed: 3,
    };
    let rows = semigroup_consistency(&f, theta, &[0.5, 1.0, 2.0], &ens).unwrap();
    let lambda0 = -(PI / (2.0 * r)).powi(2) / 2.0;
    for row in &rows {
        // the grid eigenvalue carries an O(h²) error
        assert!((row.lambda - (c * theta + lambda0)).abs() < 1e-3);
    }
    assert!(rows[0].gap > rows[1].gap && rows[1].gap > rows[2].gap, "{rows:?}");
}

#[test]
fn semigroup_monotone_in_theta() {
    // Shifted to be nonnegative, so θV grows pointwise with θ.
    let raw = white_field(2.0, 159, 0.2, 8);
    let lo = raw.values.iter().copied().fold(f64::INFINITY, f64::min);
    let vals: Vec<f64> = raw.values.iter().map(|v| v - lo).collect();
    let f = FieldSample::from_values(raw.grid, vals, raw.epsilon, raw.model.clone()).unwrap();
    let ens = EnsembleSpec {
        dt: 0.005,
        m: 4000,
        start: vec![0.0],
        seed: 1,
    };
    let a = semigroup_consistency(&f, 0.5, &[1.0], &ens).unwrap()[0];
    let b = semigroup_consistency(&f, 1.0, &[1.0], &ens).unwrap()[0];
    assert!(b.lambda > a.lambda);
    assert!(b.growth_rate > a.growth_rate);
    let lam = principal_eigenvalue(&assemble(&f, 1.0).unwrap(), DEFAULT_TOL, 5000).unwrap();
    assert!((lam.lambda - b.lambda).abs() < 1e-12);
}

fn rough_field(n: usize, seed: u64) -> FieldSample {
    white_field(3.0, n, 0.1, seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn jensen_lower_bound(seed in 0u64..1000, theta in 0.1f64..3.0) {
        let f = rough_field(119, seed);
        let e = sample_paths(1, 0.5, 0.01, 64, &[0.0], seed + 1).unwrap();
        let est = quenched_moment(&f, theta, &e, false);
        prop_assume!(est.is_ok());
        let mean: f64 = (0..64)
            .map(|k| theta * potential_line_integral(&e.path(k), &f).unwrap())
            .sum::<f64>() / 64.0;
        prop_assert!(est.unwrap().log_moment >= mean - 1e-10);
    }

    #[test]
    fn dirichlet_never_exceeds_free(seed in 0u64..1000, theta in 0.1f64..2.0) {
        let f = white_field(4.0, 159, 0.2, seed);
        let e = sample_paths(1, 1.0, 0.01, 64, &[0.0], seed).unwrap();
        let free = quenched_moment(&f, theta, &e, false);
        let dir = quenched_moment(&f, theta, &e, true);
        if let (Ok(a), Ok(b)) = (free, dir) {
            prop_assert!(b.log_moment <= a.log_moment + 1e-12);
        }
    }

    #[test]
    fn line_integral_is_linear_in_the_field(seed in 0u64..1000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let (f, g) = (rough_field(59, seed), rough_field(59, seed + 7));
        let vals: Vec<f64> = f.values.iter().zip(&g.values).map(|(x, y)| a * x + b * y).collect();
        let h = FieldSample::from_values(f.grid, vals, f.epsilon, f.model.clone()).unwrap();
        let e = sample_paths(1, 0.3, 0.01, 1, &[0.1], seed).unwrap();
        let p = e.path(0);
        prop_assume!(p.points.iter().all(|x| x.abs() < 3.0));
        let want = a * potential_line_integral(&p, &f).unwrap() + b * potential_line_integral(&p, &g).unwrap();
        let got = potential_line_integral(&p, &h).unwrap();
        prop_assert!((got - want).abs() < 1e-12 * (1.0 + want.abs()));
    }

    #[test]
    fn spectral_variance_is_linear_in_amplitude(seed in 0u64..1000, c in 0.1f64..5.0) {
        let e = sample_paths(1, 0.3, 1.0 / 64.0, 1, &[0.0], seed).unwrap();
        let p = e.path(0);
        let q = QuadratureSpec::default();
        let one = conditional_variance_spectral(&p, &PotentialModel::riesz(1, 0.4, 1.0).unwrap(), 0.2, &q).unwrap();
        let many = conditional_variance_spectral(&p, &PotentialModel::riesz(1, 0.4, c).unwrap(), 0.2, &q).unwrap();
        prop_assert!(one > 0.0);
        prop_assert!((many - c * one).abs() < 1e-12 * many);
    }
}
