//! Stationary Gaussian field samples on grids by circulant embedding.

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

use super::covariance::MollifiedCovariance;
use super::model::PotentialModel;
use crate::error::{domain, Error, Result};
use crate::fft::FftNd;
use crate::grid::{strides, GridSpec};
use crate::rng::{rng_from_seed, stream_seed};

/// One realization of `V_ε` on the interior nodes of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub epsilon: f64,
    pub model: PotentialModel,
    pub seed: u64,
}

impl FieldSample {
    /// A deterministic field, for tests and diagnostics.
    pub fn from_values(
        grid: GridSpec,
        values: Vec<f64>,
        epsilon: f64,
        model: PotentialModel,
    ) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(FieldSample {
            grid,
            values,
            epsilon,
            model,
            seed: 0,
        })
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        FieldSample {
            grid,
            values: vec![c; grid.len()],
            epsilon: 1.0,
            model: PotentialModel::WhiteNoise1D,
            seed: 0,
        }
    }
}

/// Candidate padding factors: the periodic box is `factor * n` nodes per axis.
pub const PADDING_FACTORS: [usize; 4] = [2, 4, 8, 16];
/// Negative eigenvalues below this fraction of the largest are clipped silently.
pub const CLIP_RELATIVE: f64 = 1e-10;
/// Otherwise clipping is accepted when the worst covariance perturbation it induces,
/// `Σ|Λ⁻| / N`, stays below this fraction of the variance.
pub const CLIP_MASS_RELATIVE: f64 = 1e-4;

#[derive(Debug, Clone)]
enum Method {
    Iid { sd: f64 },
    Circulant {
        size: usize,
        fft: std::sync::Arc<FftNd>,
        amplitude: Vec<f64>,
    },
}

/// Diagnostics of the embedding used by a [`Synthesizer`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingInfo {
    pub padding: usize,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// `Σ|Λ⁻| / (N c(0))`
    pub clipped_mass: f64,
}

/// Reusable sampler for one (model, grid, ε).
#[derive(Debug, Clone)]
pub struct Synthesizer {
    model: PotentialModel,
    grid: GridSpec,
    epsilon: f64,
    method: Method,
    info: Option<EmbeddingInfo>,
    cov: MollifiedCovariance,
}

impl Synthesizer {
    pub fn new(model: &PotentialModel, grid: GridSpec, epsilon: f64) -> Result<Self> {
        model.validate()?;
        if grid.d != model.d() {
            return Err(Error::DimensionMismatch {
                expected: model.d(),
                got: grid.d,
            });
        }
        let cov = MollifiedCovariance::new(model, epsilon)?;
        let h = grid.h();
        if matches!(model, PotentialModel::WhiteNoise1D) && epsilon < h {
            let var = cov.eval(&[0.0]);
            return Ok(Synthesizer {
                model: model.clone(),
                grid,
                epsilon,
                method: Method::Iid { sd: var.sqrt() },
                info: None,
                cov,
            });
        }
        let d = grid.d;
        let mut last = None;
        for &factor in &PADDING_FACTORS {
            let size = factor * grid.n;
            let half = size / 2;
            // Covariance on folded lags 0..=size/2 per axis.
            let base_shape = vec![half + 1; d];
            let base_len: usize = base_shape.iter().product();
            let base_strides = strides(&base_shape);
            let mut base = vec![0.0; base_len];
            let mut idx = vec![0usize; d];
            let mut x = vec![0.0; d];
            for (flat, slot) in base.iter_mut().enumerate() {
                let mut r = flat;
                for a in 0..d {
                    idx[a] = r / base_strides[a];
                    r %= base_strides[a];
                    x[a] = idx[a] as f64 * h;
                }
                *slot = cov.eval(&x);
            }
            let full_shape = vec![size; d];
            let full_strides = strides(&full_shape);
            let total = size.pow(d as u32);
            let mut c = vec![Complex64::default(); total];
            for (flat, slot) in c.iter_mut().enumerate() {
                let mut r = flat;
                let mut b = 0;
                for a in 0..d {
                    let j = r / full_strides[a];
                    r %= full_strides[a];
                    let folded = j.min(size - j);
                    b += folded * base_strides[a];
                }
                *slot = Complex64::new(base[b], 0.0);
            }
            let fft = FftNd::new(&full_shape);
            fft.forward(&mut c);
            let lam: Vec<f64> = c.iter().map(|z| z.re).collect();
            let max = lam.iter().cloned().fold(f64::MIN, f64::max);
            let min = lam.iter().cloned().fold(f64::MAX, f64::min);
            let neg_mass: f64 = lam.iter().filter(|v| **v < 0.0).map(|v| -v).sum();
            let c0 = base[0];
            let info = EmbeddingInfo {
                padding: factor,
                min_eigenvalue: min,
                max_eigenvalue: max,
                clipped_mass: neg_mass / (total as f64 * c0),
            };
            let ok = min >= -CLIP_RELATIVE * max || info.clipped_mass <= CLIP_MASS_RELATIVE;
            if ok {
                let n_tot = total as f64;
                let amplitude = lam.iter().map(|v| (v.max(0.0) / n_tot).sqrt()).collect();
                return Ok(Synthesizer {
                    model: model.clone(),
                    grid,
                    epsilon,
                    method: Method::Circulant {
                        size,
                        fft: std::sync::Arc::new(fft),
                        amplitude,
                    },
                    info: Some(info),
                    cov,
                });
            }
            last = Some(info);
        }
        let info = last.expect("at least one padding attempt");
        Err(Error::EmbeddingNotPsd {
            min_eigenvalue: info.min_eigenvalue,
            relative: info.min_eigenvalue / info.max_eigenvalue,
            padding: info.padding,
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn model(&self) -> &PotentialModel {
        &self.model
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn embedding(&self) -> Option<EmbeddingInfo> {
        self.info
    }

    /// The target covariance `γ_ε` of the samples.
    pub fn covariance(&self) -> &MollifiedCovariance {
        &self.cov
    }

    fn wrap(&self, values: Vec<f64>, seed: u64) -> FieldSample {
        FieldSample {
            grid: self.grid,
            values,
            epsilon: self.epsilon,
            model: self.model.clone(),
            seed,
        }
    }

    /// Fields for seeds `2k` and `2k + 1`, which share one FFT.
    pub fn sample_pair(&self, k: u64) -> (FieldSample, FieldSample) {
        let (a, b) = self.pair_values(k);
        (self.wrap(a, 2 * k), self.wrap(b, 2 * k + 1))
    }

    fn pair_values(&self, k: u64) -> (Vec<f64>, Vec<f64>) {
        match &self.method {
            Method::Iid { sd } => {
                let a = self.iid(*sd, 2 * k);
                let b = self.iid(*sd, 2 * k + 1);
                (a, b)
            }
            Method::Circulant {
                size,
                fft,
                amplitude,
            } => {
                let mut rng = rng_from_seed(stream_seed(k, 0x5EED_F1E1D));
                let mut w: Vec<Complex64> = amplitude
                    .iter()
                    .map(|a| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex64::new(a * re, a * im)
                    })
                    .collect();
                fft.forward(&mut w);
                let d = self.grid.d;
                let n = self.grid.n;
                let big = strides(&vec![*size; d]);
                let len = self.grid.len();
                let mut re = Vec::with_capacity(len);
                let mut im = Vec::with_capacity(len);
                let mut multi = vec![0usize; d];
                for flat in 0..len {
                    self.grid.unravel(flat, &mut multi);
                    let j: usize = multi.iter().zip(&big).map(|(m, s)| m * s).sum();
                    re.push(w[j].re);
                    im.push(w[j].im);
                }
                debug_assert_eq!(n.pow(d as u32), len);
                (re, im)
            }
        }
    }

    fn iid(&self, sd: f64, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(stream_seed(seed, 0x11D_F1E1D));
        (0..self.grid.len())
            .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    pub fn sample(&self, seed: u64) -> FieldSample {
        let (a, b) = self.pair_values(seed / 2);
        let values = if seed.is_multiple_of(2) { a } else { b };
        self.wrap(values, seed)
    }

    /// Samples for `count` consecutive seeds starting at `first`.
    pub fn sample_many(&self, first: u64, count: usize) -> Vec<FieldSample> {
        let mut out = Vec::with_capacity(count);
        let mut seed = first;
        let end = first + count as u64;
        while seed < end {
            if seed.is_multiple_of(2) && seed + 1 < end {
                let (a, b) = self.sample_pair(seed / 2);
                out.push(a);
                out.push(b);
                seed += 2;
            } else {
                out.push(self.sample(seed));
                seed += 1;
            }
        }
        out
    }
}

/// One field sample; identical arguments reproduce identical values.
pub fn synthesize_field(
    model: &PotentialModel,
    grid: GridSpec,
    epsilon: f64,
    seed: u64,
) -> Result<FieldSample> {
    Ok(Synthesizer::new(model, grid, epsilon)?.sample(seed))
}

/// Writes the text dump: one header line then one value per line, row-major.
pub fn write_field_dump(sample: &FieldSample, mut out: impl Write) -> std::io::Result<()> {
    writeln!(
        out,
        "# anderson-field v1; model={}; d={}; R={}; n={}; eps={}; seed={}",
        sample.model.tag(),
        sample.grid.d,
        sample.grid.half_width,
        sample.grid.n,
        sample.epsilon,
        sample.seed
    )?;
    for v in &sample.values {
        writeln!(out, "{v}")?;
    }
    Ok(())
}

/// Parses a model tag produced by [`PotentialModel::tag`].
pub fn parse_model_tag(tag: &str) -> Result<PotentialModel> {
    let bad = || Error::Parse(format!("unknown model tag `{tag}`"));
    if tag == "white-noise" {
        return Ok(PotentialModel::WhiteNoise1D);
    }
    let open = tag.find('(').ok_or_else(bad)?;
    let name = &tag[..open];
    let inner = tag[open + 1..].strip_suffix(')').ok_or_else(bad)?;
    let mut fields = std::collections::HashMap::new();
    for part in inner.split(',') {
        let (k, v) = part.split_once('=').ok_or_else(bad)?;
        fields.insert(k.trim(), v.trim());
    }
    let num = |k: &str| -> Result<f64> {
        fields
            .get(k)
            .ok_or_else(bad)?
            .parse::<f64>()
            .map_err(|_| bad())
    };
    match name {
        "riesz" => PotentialModel::riesz(num("d")? as usize, num("alpha")?, num("c")?),
        "newtonian" => PotentialModel::newtonian(num("d")? as usize, num("p")?),
        "fractional" => {
            let hs = fields.get("H").ok_or_else(bad)?;
            let hurst: std::result::Result<Vec<f64>, _> =
                hs.split(':').map(|h| h.parse::<f64>()).collect();
            PotentialModel::fractional(hurst.map_err(|_| bad())?)
        }
        _ => Err(bad()),
    }
}

/// Reads a dump written by [`write_field_dump`].
pub fn read_field_dump(input: impl BufRead) -> Result<FieldSample> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty input".into()))?
        .map_err(|e| Error::Parse(e.to_string()))?;
    let body = header
        .strip_prefix("# anderson-field v1;")
        .ok_or_else(|| Error::Parse("missing header".into()))?;
    let mut kv = std::collections::HashMap::new();
    for part in body.split(';') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("bad header field `{part}`")))?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |k: &str| {
        kv.get(k)
            .cloned()
            .ok_or_else(|| Error::Parse(format!("header lacks `{k}`")))
    };
    let pf = |k: &str| -> Result<f64> {
        get(k)?
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("bad number for `{k}`")))
    };
    let model = parse_model_tag(&get("model")?)?;
    let d = pf("d")? as usize;
    let grid = GridSpec::new(d, pf("R")?, pf("n")? as usize)?;
    let epsilon = pf("eps")?;
    let seed = get("seed")?
        .parse::<u64>()
        .map_err(|_| Error::Parse("bad seed".into()))?;
    let mut values = Vec::with_capacity(grid.len());
    for line in lines {
        let line = line.map_err(|e| Error::Parse(e.to_string()))?;
        if line.is_empty() {
            continue;
        }
        values.push(
            line.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad value `{line}`")))?,
        );
    }
    if values.len() != grid.len() {
        return Err(Error::Parse(format!(
            "expected {} values, found {}",
            grid.len(),
            values.len()
        )));
    }
    if !(epsilon > 0.0) {
        return Err(domain("eps must be positive"));
    }
    Ok(FieldSample {
        grid,
        values,
        epsilon,
        model,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let m = PotentialModel::riesz(2, 1.0, 1.0).unwrap();
        let g = GridSpec::new(2, 2.0, 16).unwrap();
        let a = synthesize_field(&m, g, 0.4, 11).unwrap();
        let b = synthesize_field(&m, g, 0.4, 11).unwrap();
        let c = synthesize_field(&m, g, 0.4, 12).unwrap();
        assert_eq!(a.values, b.values);
        assert_ne!(a.values, c.values);
        let s = Synthesizer::new(&m, g, 0.4).unwrap();
        let many = s.sample_many(10, 3);
        assert_eq!(many[1].values, a.values);
        assert_eq!(many[2].values, c.values);
    }

    #[test]
    fn dump_roundtrip() {
        let m = PotentialModel::fractional(vec![0.7, 0.8]).unwrap();
        let g = GridSpec::new(2, 1.0, 6).unwrap();
        let s = synthesize_field(&m, g, 0.5, 3).unwrap();
        let mut buf = Vec::new();
        write_field_dump(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# anderson-field v1; model=fractional(H=0.7:0.8); d=2; R=1; n=6;"));
        assert!(!text.contains('\r'));
        let back = read_field_dump(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn model_tags_roundtrip() {
        for m in [
            PotentialModel::riesz(2, 1.25, 0.5).unwrap(),
            PotentialModel::newtonian(3, 2.0).unwrap(),
            PotentialModel::fractional(vec![0.9]).unwrap(),
            PotentialModel::WhiteNoise1D,
        ] {
            assert_eq!(parse_model_tag(&m.tag()).unwrap(), m);
        }
    }
}
