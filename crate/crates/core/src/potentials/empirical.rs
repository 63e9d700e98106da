//! Empirical covariances of field samples.

use super::synthesis::FieldSample;
use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Covariance estimate at one grid offset.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub lag: Vec<i64>,
    pub estimate: f64,
    pub standard_error: f64,
    pub replicates: usize,
}

/// Streaming estimator of `E[V(x) V(x + lag)]` for a mean-zero stationary field.
///
/// Each sample contributes the average of `V(x) V(x + lag)` over translations inside the
/// grid; the estimate is the mean of these and the standard error their spread across samples.
#[derive(Debug, Clone)]
pub struct CovarianceAccumulator {
    grid: GridSpec,
    lags: Vec<Vec<i64>>,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    count: usize,
}

impl CovarianceAccumulator {
    pub fn new(grid: GridSpec, lags: &[Vec<i64>]) -> Result<Self> {
        for lag in lags {
            if lag.len() != grid.d {
                return Err(Error::DimensionMismatch {
                    expected: grid.d,
                    got: lag.len(),
                });
            }
            if lag.iter().any(|l| l.unsigned_abs() as usize >= grid.n) {
                return Err(Error::OffsetOutOfRange {
                    offset: lag.clone(),
                    n: grid.n,
                });
            }
        }
        Ok(CovarianceAccumulator {
            grid,
            lags: lags.to_vec(),
            sum: vec![0.0; lags.len()],
            sum_sq: vec![0.0; lags.len()],
            count: 0,
        })
    }

    pub fn push(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.grid.len() {
            return Err(Error::Mismatch);
        }
        for (i, lag) in self.lags.iter().enumerate() {
            let v = translation_average(&self.grid, values, lag);
            self.sum[i] += v;
            self.sum_sq[i] += v * v;
        }
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn finish(&self) -> Result<Vec<CovarianceEstimate>> {
        if self.count < 2 {
            return Err(Error::InsufficientReplicates {
                needed: 2,
                got: self.count,
            });
        }
        let n = self.count as f64;
        Ok(self
            .lags
            .iter()
            .enumerate()
            .map(|(i, lag)| {
                let mean = self.sum[i] / n;
                let var = ((self.sum_sq[i] - n * mean * mean) / (n - 1.0)).max(0.0);
                CovarianceEstimate {
                    lag: lag.clone(),
                    estimate: mean,
                    standard_error: (var / n).sqrt(),
                    replicates: self.count,
                }
            })
            .collect())
    }
}

fn translation_average(grid: &GridSpec, values: &[f64], lag: &[i64]) -> f64 {
    let d = grid.d;
    let n = grid.n as i64;
    // Ranges of the first point so that both ends stay in the grid.
    let lo: Vec<i64> = lag.iter().map(|l| (-l).max(0)).collect();
    let hi: Vec<i64> = lag.iter().map(|l| n - l.max(&0)).collect();
    let shift: i64 = {
        let mut s = 0i64;
        for a in 0..d {
            s = s * n + lag[a];
        }
        s
    };
    let mut acc = 0.0;
    let mut count = 0usize;
    let mut idx = lo.clone();
    loop {
        let flat = idx.iter().fold(0i64, |f, &k| f * n + k);
        acc += values[flat as usize] * values[(flat + shift) as usize];
        count += 1;
        let mut a = d;
        loop {
            if a == 0 {
                return acc / count as f64;
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] < hi[a] {
                break;
            }
            idx[a] = lo[a];
        }
    }
}

/// Cross-seed covariance estimates with standard errors at the given offsets.
pub fn empirical_covariance(
    samples: &[FieldSample],
    lags: &[Vec<i64>],
) -> Result<Vec<CovarianceEstimate>> {
    let first = samples.first().ok_or(Error::InsufficientReplicates {
        needed: 2,
        got: 0,
    })?;
    if samples.len() < 2 {
        return Err(Error::InsufficientReplicates {
            needed: 2,
            got: samples.len(),
        });
    }
    for s in samples {
        if s.grid != first.grid || s.model != first.model || s.epsilon != first.epsilon {
            return Err(Error::Mismatch);
        }
    }
    let mut acc = CovarianceAccumulator::new(first.grid, lags)?;
    for s in samples {
        acc.push(&s.values)?;
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::PotentialModel;

    fn sample(grid: GridSpec, values: Vec<f64>) -> FieldSample {
        FieldSample::from_values(grid, values, 1.0, PotentialModel::WhiteNoise1D).unwrap()
    }

    #[test]
    fn translation_average_by_hand() {
        let g = GridSpec::new(1, 1.0, 4).unwrap();
        let v = vec![1.0, 2.0, 3.0, 4.0];
        assert!((translation_average(&g, &v, &[1]) - (2.0 + 6.0 + 12.0) / 3.0).abs() < 1e-15);
        assert!((translation_average(&g, &v, &[-1]) - (2.0 + 6.0 + 12.0) / 3.0).abs() < 1e-15);
        let g2 = GridSpec::new(2, 1.0, 3).unwrap();
        let v2: Vec<f64> = (0..9).map(|i| i as f64).collect();
        // pairs (r,c)-(r+1,c-1): (0,1)-(1,0), (0,2)-(1,1), (1,1)-(2,0), (1,2)-(2,1)
        let want = (1.0 * 3.0 + 2.0 * 4.0 + 4.0 * 6.0 + 5.0 * 7.0) / 4.0;
        assert!((translation_average(&g2, &v2, &[1, -1]) - want).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        let g = GridSpec::new(1, 1.0, 4).unwrap();
        let one = vec![sample(g, vec![0.0; 4])];
        assert!(matches!(
            empirical_covariance(&one, &[vec![0]]),
            Err(Error::InsufficientReplicates { .. })
        ));
        let two = vec![sample(g, vec![0.0; 4]), sample(g, vec![1.0; 4])];
        assert!(matches!(
            empirical_covariance(&two, &[vec![4]]),
            Err(Error::OffsetOutOfRange { .. })
        ));
        let g5 = GridSpec::new(1, 1.0, 5).unwrap();
        let mixed = vec![sample(g, vec![0.0; 4]), sample(g5, vec![1.0; 5])];
        assert_eq!(empirical_covariance(&mixed, &[vec![0]]), Err(Error::Mismatch));
    }
}
