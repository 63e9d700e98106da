//! Discretized Brownian paths.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::stream;

/// Largest ensemble [`sample_paths`] will materialize, in bytes.
pub const MEMORY_BUDGET: usize = 1 << 31;

/// One path sampled at `steps + 1` equally spaced times, positions stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    pub d: usize,
    pub dt: f64,
    pub points: Vec<f64>,
}

impl BrownianPath {
    pub fn steps(&self) -> usize {
        self.points.len() / self.d - 1
    }

    pub fn horizon(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.d..(k + 1) * self.d]
    }

    /// Trapezoid weight of sample `k`.
    pub fn weight(&self, k: usize) -> f64 {
        if k == 0 || k == self.steps() {
            0.5 * self.dt
        } else {
            self.dt
        }
    }
}

/// Parameters of an ensemble; paths are generated on demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub d: usize,
    pub t: f64,
    pub dt: f64,
    pub m: usize,
    pub start: Vec<f64>,
    pub seed: u64,
}

impl PathSpec {
    /// Validates the parameters. The step is adjusted to `t / round(t / dt)` so the last
    /// sample falls on the horizon.
    pub fn new(d: usize, t: f64, dt: f64, m: usize, start: Vec<f64>, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(domain("path dimension must be positive"));
        }
        if start.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: start.len(),
            });
        }
        if !(dt > 0.0 && dt.is_finite()) || !(t >= dt * (1.0 - 1e-12)) || !t.is_finite() {
            return Err(domain(format!("need dt > 0 and t >= dt, got t = {t}, dt = {dt}")));
        }
        if m == 0 {
            return Err(domain("need at least one path"));
        }
        let steps = (t / dt).round().max(1.0);
        Ok(PathSpec {
            d,
            t,
            dt: t / steps,
            m,
            start,
            seed,
        })
    }

    pub fn steps(&self) -> usize {
        (self.t / self.dt).round() as usize
    }

    /// Bytes needed to hold every path at once.
    pub fn bytes(&self) -> Option<usize> {
        (self.steps() + 1)
            .checked_mul(self.d)?
            .checked_mul(self.m)?
            .checked_mul(std::mem::size_of::<f64>())
    }

    /// Path `k`, drawn from its own stream so it does not depend on `m`.
    pub fn generate(&self, k: usize) -> BrownianPath {
        let steps = self.steps();
        let d = self.d;
        let sd = self.dt.sqrt();
        let mut rng = stream(self.seed, k as u64);
        let mut points = Vec::with_capacity((steps + 1) * d);
        points.extend_from_slice(&self.start);
        for s in 0..steps {
            for a in 0..d {
                let z: f64 = StandardNormal.sample(&mut rng);
                let prev = points[s * d + a];
                points.push(prev + sd * z);
            }
        }
        BrownianPath {
            d,
            dt: self.dt,
            points,
        }
    }
}

/// Anything that hands out paths by index.
pub trait PathSource: Sync {
    fn spec(&self) -> &PathSpec;
    fn path(&self, k: usize) -> BrownianPath;

    fn len(&self) -> usize {
        self.spec().m
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl PathSource for PathSpec {
    fn spec(&self) -> &PathSpec {
        self
    }

    fn path(&self, k: usize) -> BrownianPath {
        self.generate(k)
    }
}

/// A materialized ensemble: `m × (steps + 1) × d` positions.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub spec: PathSpec,
    pub paths: Vec<f64>,
}

impl PathEnsemble {
    fn stride(&self) -> usize {
        (self.spec.steps() + 1) * self.spec.d
    }

    pub fn positions(&self, k: usize) -> &[f64] {
        let s = self.stride();
        &self.paths[k * s..(k + 1) * s]
    }
}

impl PathSource for PathEnsemble {
    fn spec(&self) -> &PathSpec {
        &self.spec
    }

    fn path(&self, k: usize) -> BrownianPath {
        BrownianPath {
            d: self.spec.d,
            dt: self.spec.dt,
            points: self.positions(k).to_vec(),
        }
    }
}

/// Samples and stores `m` paths, refusing ensembles above [`MEMORY_BUDGET`].
pub fn sample_paths(d: usize, t: f64, dt: f64, m: usize, start: &[f64], seed: u64) -> Result<PathEnsemble> {
    let spec = PathSpec::new(d, t, dt, m, start.to_vec(), seed)?;
    let requested = spec.bytes().unwrap_or(usize::MAX);
    if requested > MEMORY_BUDGET {
        return Err(Error::MemoryBudget {
            requested,
            budget: MEMORY_BUDGET,
        });
    }
    let mut paths = Vec::with_capacity(requested / std::mem::size_of::<f64>());
    for k in 0..m {
        paths.extend(spec.generate(k).points);
    }
    Ok(PathEnsemble { spec, paths })
}
