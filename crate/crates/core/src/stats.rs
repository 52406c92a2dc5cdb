//! Compensated summation and Monte Carlo estimators.

use serde::Serialize;

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn sum(&self) -> f64 {
        self.sum + self.compensation
    }
}

pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = NeumaierSum::default();
    for v in values {
        acc.add(v);
    }
    acc.sum()
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl Estimate {
    /// Mean and `sample_std / sqrt(n)`, both accumulated with compensated
    /// sums in slice order so the result does not depend on how the samples
    /// were produced.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std_error: f64::NAN,
                n_samples: 0,
            };
        }
        let mean = neumaier_sum(samples.iter().copied()) / n as f64;
        let std_error = if n > 1 {
            let ss = neumaier_sum(samples.iter().map(|x| (x - mean).powi(2)));
            (ss / (n - 1) as f64 / n as f64).sqrt()
        } else {
            f64::NAN
        };
        Self {
            mean,
            std_error,
            n_samples: n,
        }
    }

    /// Unbiased sample variance with its large-sample standard error
    /// `sqrt((m4 - s^4 (n-3)/(n-1)) / n)`.
    pub fn variance_of(samples: &[f64]) -> Self {
        let n = samples.len();
        if n < 4 {
            return Self {
                mean: f64::NAN,
                std_error: f64::NAN,
                n_samples: n,
            };
        }
        let nf = n as f64;
        let mean = neumaier_sum(samples.iter().copied()) / nf;
        let m2 = neumaier_sum(samples.iter().map(|x| (x - mean).powi(2))) / nf;
        let m4 = neumaier_sum(samples.iter().map(|x| (x - mean).powi(4))) / nf;
        let s2 = m2 * nf / (nf - 1.0);
        let var_s2 = (m4 - s2 * s2 * (nf - 3.0) / (nf - 1.0)) / nf;
        Self {
            mean: s2,
            std_error: var_s2.max(0.0).sqrt(),
            n_samples: n,
        }
    }

    /// Number of standard errors separating the estimate from `target`.
    pub fn z_score(&self, target: f64) -> f64 {
        let gap = (self.mean - target).abs();
        if gap == 0.0 {
            0.0
        } else {
            gap / self.std_error
        }
    }
}
