//! One-dimensional quadrature helpers.

use gauss_quad::legendre::GaussLegendre;
use gauss_quad::GaussJacobi;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

/// Gauss-Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GlRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GlRule {
    pub fn new(degree: usize) -> Self {
        let rule = GaussLegendre::new(NonZeroUsize::new(degree.max(1)).unwrap());
        let (nodes, weights) = rule.iter().map(|(x, w)| (*x, *w)).unzip();
        GlRule { nodes, weights }
    }

    /// Nodes and weights mapped to [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let s = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (c + s * x, s * w))
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Composite rule over `panels` equal panels of [a, b].
    pub fn composite(&self, a: f64, b: f64, panels: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
        let panels = panels.max(1);
        let step = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let lo = a + p as f64 * step;
                self.integrate(lo, lo + step, &mut f)
            })
            .sum()
    }
}

/// Shared 16-point rule.
pub fn gl16() -> &'static GlRule {
    static RULE: OnceLock<GlRule> = OnceLock::new();
    RULE.get_or_init(|| GlRule::new(16))
}

/// Shared 32-point rule.
pub fn gl32() -> &'static GlRule {
    static RULE: OnceLock<GlRule> = OnceLock::new();
    RULE.get_or_init(|| GlRule::new(32))
}

/// Nodes and weights on [0, 1] for the weight `x^beta`, `beta > -1`.
pub fn power_weight_rule(degree: usize, beta: f64) -> Vec<(f64, f64)> {
    let rule = GaussJacobi::new(
        NonZeroUsize::new(degree.max(1)).unwrap(),
        0.0.try_into().unwrap(),
        beta.try_into().expect("beta > -1"),
    );
    let scale = 2f64.powf(-beta - 1.0);
    rule.iter().map(|(t, w)| (0.5 * (t + 1.0), w * scale)).collect()
}

/// Tanh-sinh integral over [a, b]; tolerates integrable endpoint singularities.
///
/// Abscissae near each endpoint are formed from the exact complement `1 ∓ t`, so
/// singularities sitting at an endpoint equal to 0 are resolved down to tiny offsets.
pub fn tanh_sinh(a: f64, b: f64, rel_tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let c = 0.5 * (b - a);
    let tau_max = 6.5;
    let eval = |tau: f64| -> f64 {
        let y = std::f64::consts::FRAC_PI_2 * tau.sinh();
        let e = (-2.0 * y.abs()).exp();
        // 1 - |t| = 2 e^{-2|y|} / (1 + e^{-2|y|})
        let comp = 2.0 * e / (1.0 + e);
        let x = if tau < 0.0 { a + c * comp } else { b - c * comp };
        let ch = y.cosh();
        let w = std::f64::consts::FRAC_PI_2 * tau.cosh() / (ch * ch);
        if w == 0.0 {
            return 0.0;
        }
        let v = f(x);
        if v.is_finite() {
            w * v
        } else {
            0.0
        }
    };
    let mut h = 0.5;
    let n0 = (tau_max / h) as i64;
    let mut sum: f64 = (-n0..=n0).map(|k| eval(k as f64 * h)).sum();
    let mut est = c * h * sum;
    // Halving h roughly squares the error, so the level change `diff` bounds the error
    // of the previous level and `diff²/|est|` that of the current one.
    let accept = rel_tol.sqrt();
    for level in 0..9 {
        h *= 0.5;
        let n = (tau_max / h) as i64;
        let add: f64 = (-n..=n).filter(|k| k % 2 != 0).map(|k| eval(k as f64 * h)).sum();
        sum += add;
        let next = c * h * sum;
        let diff = (next - est).abs();
        est = next;
        if (level >= 2 && diff <= accept * est.abs()) || diff < 1e-300 {
            break;
        }
    }
    est
}

/// Tanh-sinh over [a, b] split at interior breakpoints.
pub fn tanh_sinh_split(a: f64, b: f64, breaks: &[f64], rel_tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|x| *x > a && *x < b).collect();
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();
    let mut edges = vec![a];
    edges.extend(pts);
    edges.push(b);
    edges
        .windows(2)
        .map(|w| tanh_sinh(w[0], w[1], rel_tol, &f))
        .sum()
}

/// `∫_lo^hi |x - s|^{-beta} g(x) dx` for smooth `g`, with the power evaluated on exact offsets.
pub fn power_singular(
    s: f64,
    lo: f64,
    hi: f64,
    beta: f64,
    rel_tol: f64,
    g: impl Fn(f64) -> f64,
) -> f64 {
    let side = |from: f64, to: f64, sign: f64| -> f64 {
        if to <= from {
            return 0.0;
        }
        tanh_sinh(from, to, rel_tol, |t| t.powf(-beta) * g(s + sign * t))
    };
    if s <= lo {
        side(lo - s, hi - s, 1.0)
    } else if s >= hi {
        side(s - hi, s - lo, -1.0)
    } else {
        side(0.0, hi - s, 1.0) + side(0.0, s - lo, -1.0)
    }
}

/// Sigmoidal map of [0, 1] onto itself clustering nodes at both ends.
///
/// Returns `(u(v), u'(v))` with `u = v^p / (v^p + (1-v)^p)`.
pub fn sigmoid_map(v: f64, p: f64) -> (f64, f64) {
    let a = v.powf(p);
    let b = (1.0 - v).powf(p);
    let s = a + b;
    let u = a / s;
    let du = if v <= 0.0 || v >= 1.0 {
        0.0
    } else {
        p * v.powf(p - 1.0) * (1.0 - v).powf(p - 1.0) / (s * s)
    };
    (u, du)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_polynomials() {
        let r = GlRule::new(5);
        let v = r.integrate(0.0, 2.0, |x| x.powi(9));
        assert!((v - 2f64.powi(10) / 10.0).abs() < 1e-10);
        let v = gl16().composite(0.0, std::f64::consts::PI, 4, f64::sin);
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn tanh_sinh_singular_endpoint() {
        let v = tanh_sinh(0.0, 1.0, 1e-12, |x| x.powf(-0.5));
        assert!((v - 2.0).abs() < 1e-10, "{v}");
        let v = tanh_sinh(0.0, 1.0, 1e-12, |x| x.powf(-0.9));
        assert!((v - 10.0).abs() < 1e-8, "{v}");
        // ∫_{-1}^{2} |x - 0.3|^{-0.8} cos x dx against a split tanh-sinh in offset form
        let v = power_singular(0.3, -1.0, 2.0, 0.8, 1e-13, f64::cos);
        let r = tanh_sinh(0.0, 1.7, 1e-13, |t| t.powf(-0.8) * (0.3 + t).cos())
            + tanh_sinh(0.0, 1.3, 1e-13, |t| t.powf(-0.8) * (0.3 - t).cos());
        assert!((v - r).abs() < 1e-12);
        // exact: ∫_0^1 x^{-0.8} dx + ∫_0^2 x^{-0.8} dx = 5 (1 + 2^{0.2})
        let v = power_singular(0.0, -1.0, 2.0, 0.8, 1e-13, |_| 1.0);
        assert!((v - 5.0 * (1.0 + 2f64.powf(0.2))).abs() < 1e-9, "{v}");
    }

    #[test]
    fn power_weight_moments() {
        for beta in [-0.7, -0.25, 0.5] {
            let rule = power_weight_rule(20, beta);
            let m0: f64 = rule.iter().map(|(_, w)| w).sum();
            let m3: f64 = rule.iter().map(|(x, w)| w * x.powi(3)).sum();
            assert!((m0 - 1.0 / (beta + 1.0)).abs() < 1e-13);
            assert!((m3 - 1.0 / (beta + 4.0)).abs() < 1e-13);
        }
    }

    #[test]
    fn sigmoid_map_derivative() {
        let int = gl32().composite(0.0, 1.0, 4, |v| {
            let (u, du) = sigmoid_map(v, 4.0);
            u.powf(-0.5) * du
        });
        assert!((int - 2.0).abs() < 1e-10, "{int}");
    }
}
