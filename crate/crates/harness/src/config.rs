//! Experiment configuration: strict TOML with dotted sections.

use std::path::{Path, PathBuf};

use anderson_core::variational::KernelSpec;
use anderson_core::{GridSpec, PotentialModel};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SynthValidate,
    EigScaling,
    ThetaScaling,
    Variational,
    FkConsistency,
    Slepian,
    Acceptance,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::SynthValidate => "synth-validate",
            ExperimentKind::EigScaling => "eig-scaling",
            ExperimentKind::ThetaScaling => "theta-scaling",
            ExperimentKind::Variational => "variational",
            ExperimentKind::FkConsistency => "fk-consistency",
            ExperimentKind::Slepian => "slepian",
            ExperimentKind::Acceptance => "acceptance",
        }
    }
}

/// `[model]`: `variant` is one of `riesz`, `newtonian`, `fractional`, `white-noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub variant: String,
    pub d: Option<usize>,
    pub alpha: Option<f64>,
    pub c_gamma: Option<f64>,
    pub p: Option<f64>,
    pub hurst: Option<Vec<f64>>,
}

impl ModelBlock {
    pub fn white_noise() -> Self {
        ModelBlock {
            variant: "white-noise".into(),
            d: None,
            alpha: None,
            c_gamma: None,
            p: None,
            hurst: None,
        }
    }

    pub fn build(&self) -> Result<PotentialModel, HarnessError> {
        let need = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| HarnessError::Config(format!("model.{key} is required for {}", self.variant)))
        };
        let d = || {
            self.d
                .ok_or_else(|| HarnessError::Config(format!("model.d is required for {}", self.variant)))
        };
        let unused = |keys: &[(&str, bool)]| -> Result<(), HarnessError> {
            match keys.iter().find(|(_, set)| *set) {
                Some((k, _)) => Err(HarnessError::Config(format!(
                    "model.{k} does not apply to {}",
                    self.variant
                ))),
                None => Ok(()),
            }
        };
        let model = match self.variant.as_str() {
            "riesz" => {
                unused(&[("p", self.p.is_some()), ("hurst", self.hurst.is_some())])?;
                PotentialModel::riesz(d()?, need(self.alpha, "alpha")?, self.c_gamma.unwrap_or(1.0))
            }
            "newtonian" => {
                unused(&[
                    ("alpha", self.alpha.is_some()),
                    ("c_gamma", self.c_gamma.is_some()),
                    ("hurst", self.hurst.is_some()),
                ])?;
                PotentialModel::newtonian(d()?, need(self.p, "p")?)
            }
            "fractional" => {
                unused(&[
                    ("alpha", self.alpha.is_some()),
                    ("c_gamma", self.c_gamma.is_some()),
                    ("p", self.p.is_some()),
                ])?;
                let h = self
                    .hurst
                    .clone()
                    .ok_or_else(|| HarnessError::Config("model.hurst is required for fractional".into()))?;
                if let Some(d) = self.d {
                    if d != h.len() {
                        return Err(HarnessError::Config(format!(
                            "model.d = {d} but model.hurst has {} entries",
                            h.len()
                        )));
                    }
                }
                PotentialModel::fractional(h)
            }
            "white-noise" => {
                unused(&[
                    ("alpha", self.alpha.is_some()),
                    ("c_gamma", self.c_gamma.is_some()),
                    ("p", self.p.is_some()),
                    ("hurst", self.hurst.is_some()),
                ])?;
                if self.d.is_some_and(|d| d != 1) {
                    return Err(HarnessError::Config("white noise is one-dimensional".into()));
                }
                Ok(PotentialModel::white_noise())
            }
            other => {
                return Err(HarnessError::Config(format!(
                    "unknown model.variant {other:?}; expected riesz, newtonian, fractional or white-noise"
                )))
            }
        };
        model.map_err(|e| HarnessError::Config(format!("model: {e}")))
    }

    /// The interaction kernel of the model's variational problem.
    pub fn kernel(&self) -> Result<KernelSpec, HarnessError> {
        Ok(Self::kernel_of(&self.build()?))
    }

    pub fn kernel_of(model: &PotentialModel) -> KernelSpec {
        match model {
            PotentialModel::WhiteNoise1D => KernelSpec::Quartic,
            PotentialModel::FractionalWhiteNoise { hurst } => KernelSpec::Product {
                alphas: hurst.iter().map(|h| 2.0 - 2.0 * h).collect(),
            },
            m => KernelSpec::Riesz { alpha: m.alpha() },
        }
    }
}

/// `[grid]`. Either `n` is given, or it is derived from `spacing` (h/ε, default ½).
/// `half_width` may be omitted for scaling studies, which then use `R = t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub half_width: Option<f64>,
    pub n: Option<usize>,
    pub epsilon: f64,
    pub spacing: Option<f64>,
}

impl GridBlock {
    pub fn grid(&self, d: usize, half_width: f64) -> Result<GridSpec, HarnessError> {
        let n = match self.n {
            Some(n) => n,
            None => {
                let h = self.spacing.unwrap_or(0.5) * self.epsilon;
                ((2.0 * half_width / h).ceil() as usize).saturating_sub(1).max(2)
            }
        };
        GridSpec::new(d, half_width, n).map_err(|e| HarnessError::Config(format!("grid: {e}")))
    }

    pub fn fixed(&self, d: usize) -> Result<GridSpec, HarnessError> {
        let r = self
            .half_width
            .ok_or_else(|| HarnessError::Config("grid.half_width is required".into()))?;
        self.grid(d, r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedBlock {
    pub master: u64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub eigen: f64,
    pub variational: f64,
    pub quadrature: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eigen: anderson_core::eigensolver::DEFAULT_TOL,
            variational: anderson_core::variational::DEFAULT_TOL,
            quadrature: 1e-6,
        }
    }
}

/// `[fk]`: path parameters of Feynman-Kac experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FkBlock {
    pub dt: f64,
    pub paths: usize,
    #[serde(default)]
    pub dirichlet: bool,
}

/// `[slepian]`: `rho` gives an equicorrelated vector, otherwise a random PSD matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlepianBlock {
    pub n: usize,
    pub rho: Option<f64>,
    pub a: f64,
    pub b: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub output: PathBuf,
    pub model: Option<ModelBlock>,
    pub grid: Option<GridBlock>,
    #[serde(default)]
    pub theta: Vec<f64>,
    #[serde(default)]
    pub t: Vec<f64>,
    pub seeds: Option<SeedBlock>,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub fk: Option<FkBlock>,
    pub slepian: Option<SlepianBlock>,
}

fn missing(block: &str, kind: ExperimentKind) -> HarnessError {
    HarnessError::Config(format!("[{block}] is required for kind = {:?}", kind.as_str()))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text)
    }

    /// Defaults for the acceptance suite.
    pub fn acceptance(output: PathBuf) -> Self {
        ExperimentConfig {
            kind: ExperimentKind::Acceptance,
            output,
            model: None,
            grid: None,
            theta: vec![],
            t: vec![],
            seeds: None,
            tolerances: Tolerances::default(),
            fk: None,
            slepian: None,
        }
    }

    pub fn model_block(&self) -> Result<&ModelBlock, HarnessError> {
        self.model.as_ref().ok_or_else(|| missing("model", self.kind))
    }

    pub fn grid_block(&self) -> Result<&GridBlock, HarnessError> {
        self.grid.as_ref().ok_or_else(|| missing("grid", self.kind))
    }

    pub fn seed_block(&self) -> Result<&SeedBlock, HarnessError> {
        self.seeds.as_ref().ok_or_else(|| missing("seeds", self.kind))
    }

    pub fn fk_block(&self) -> Result<&FkBlock, HarnessError> {
        self.fk.as_ref().ok_or_else(|| missing("fk", self.kind))
    }

    pub fn slepian_block(&self) -> Result<&SlepianBlock, HarnessError> {
        self.slepian.as_ref().ok_or_else(|| missing("slepian", self.kind))
    }

    /// Checks every referenced parameter, naming the first violated constraint.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if let Some(m) = &self.model {
            m.build()?;
        }
        if let Some(g) = &self.grid {
            if !(g.epsilon > 0.0 && g.epsilon.is_finite()) {
                return bad(format!("grid.epsilon must be positive, got {}", g.epsilon));
            }
            if let Some(s) = g.spacing {
                if !(s > 0.0) {
                    return bad(format!("grid.spacing must be positive, got {s}"));
                }
            }
            if g.n.is_some() && g.spacing.is_some() {
                return bad("give grid.n or grid.spacing, not both".into());
            }
        }
        if self.theta.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("every theta must be positive".into());
        }
        if self.t.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("every t must be positive".into());
        }
        if let Some(f) = &self.fk {
            if !(f.dt > 0.0) || f.paths == 0 {
                return bad("fk.dt must be positive and fk.paths at least 1".into());
            }
        }
        let tol = &self.tolerances;
        if !(tol.eigen > 0.0 && tol.variational > 0.0 && tol.quadrature > 0.0) {
            return bad("tolerances must be positive".into());
        }
        let d = match &self.model {
            Some(m) => Some(m.build()?.d()),
            None => None,
        };
        match self.kind {
            ExperimentKind::SynthValidate => {
                self.model_block()?;
                let g = self.grid_block()?;
                g.fixed(d.unwrap())?;
                self.seed_block()?;
            }
            ExperimentKind::EigScaling | ExperimentKind::ThetaScaling => {
                self.model_block()?;
                self.grid_block()?;
                let s = self.seed_block()?;
                if self.t.is_empty() || self.theta.is_empty() {
                    return bad("scaling studies need non-empty t and theta lists".into());
                }
                if self.kind == ExperimentKind::EigScaling {
                    if self.t.windows(2).any(|w| w[1] <= w[0]) {
                        return bad("t list must be increasing".into());
                    }
                    if s.replicates < 10 {
                        return bad(format!("seeds.replicates must be at least 10, got {}", s.replicates));
                    }
                }
            }
            ExperimentKind::Variational => {
                self.model_block()?.kernel()?;
                self.grid_block()?.fixed(d.unwrap())?;
                if self.theta.is_empty() {
                    return bad("variational runs need a theta list".into());
                }
            }
            ExperimentKind::FkConsistency => {
                self.model_block()?;
                self.grid_block()?.fixed(d.unwrap())?;
                self.seed_block()?;
                self.fk_block()?;
                if self.t.is_empty() || self.theta.is_empty() {
                    return bad("fk-consistency needs non-empty t and theta lists".into());
                }
            }
            ExperimentKind::Slepian => {
                let s = self.slepian_block()?;
                self.seed_block()?;
                if s.n < 2 || s.trials == 0 || !(s.a > 0.0 && s.b > 0.0) {
                    return bad("slepian needs n >= 2, trials >= 1 and positive a, b".into());
                }
            }
            ExperimentKind::Acceptance => {}
        }
        Ok(())
    }

    /// SHA-256 of the canonical re-serialization, so formatting and key order do not matter.
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}
