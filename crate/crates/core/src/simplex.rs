//! Finite and truncated infinite sub-probability simplices with their metrics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::neumaier_sum;

/// Slack allowed on simplex constraints to absorb summation error.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// A value together with a certified bound on the error introduced by
/// truncating an infinite sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certified {
    pub value: f64,
    pub error_bound: f64,
}

/// Element of the finite sub-simplex: nonnegative entries with sum at most one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubProbVector {
    entries: Vec<f64>,
}

impl SubProbVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if let Some((i, &x)) = entries
            .iter()
            .enumerate()
            .find(|(_, x)| !(x.is_finite() && **x >= 0.0))
        {
            return Err(Error::Domain(format!("entry {i} = {x} is not a nonnegative number")));
        }
        let total = neumaier_sum(entries.iter().copied());
        if total > 1.0 + SIMPLEX_TOL {
            return Err(Error::Domain(format!("entries sum to {total} > 1")));
        }
        Ok(Self { entries })
    }

    pub fn zeros(m: usize) -> Self {
        Self {
            entries: vec![0.0; m],
        }
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> f64 {
        neumaier_sum(self.entries.iter().copied())
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.entries
    }
}

/// Truncated element of the infinite sub-simplex.
///
/// `tail_mass` is `1 - sum(prefix)`. For a truncated stick-breaking draw the
/// entries beyond the prefix are unknown but sum to at most `tail_mass`; for a
/// finite element they are exactly zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StickWeights {
    prefix: Vec<f64>,
    tail_mass: f64,
    truncated: bool,
}

impl StickWeights {
    /// A finitely supported sequence; every entry beyond `prefix` is zero.
    pub fn finite(prefix: Vec<f64>) -> Result<Self> {
        let total = Self::validate(&prefix)?;
        Ok(Self {
            prefix,
            tail_mass: 1.0 - total,
            truncated: false,
        })
    }

    /// The prefix of a longer sequence whose remaining entries carry
    /// `tail_mass` in total. `tail_mass` is usually the pathwise product of
    /// the unbroken stick remainders, which is more accurate than `1 - sum`.
    pub fn truncated(prefix: Vec<f64>, tail_mass: f64) -> Result<Self> {
        let total = Self::validate(&prefix)?;
        if !(-SIMPLEX_TOL..=1.0).contains(&tail_mass) {
            return Err(Error::Domain(format!("tail mass {tail_mass} outside [0, 1]")));
        }
        if (total + tail_mass - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Domain(format!(
                "prefix sum {total} and tail mass {tail_mass} do not fold to 1"
            )));
        }
        Ok(Self {
            prefix,
            tail_mass: tail_mass.max(0.0),
            truncated: true,
        })
    }

    /// The origin of the infinite simplex.
    pub fn origin() -> Self {
        Self {
            prefix: Vec::new(),
            tail_mass: 1.0,
            truncated: false,
        }
    }

    fn validate(prefix: &[f64]) -> Result<f64> {
        let mut acc = crate::stats::NeumaierSum::default();
        for (i, &v) in prefix.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain(format!("stick {i} = {v} outside [0, 1]")));
            }
            acc.add(v);
            if acc.sum() > 1.0 + SIMPLEX_TOL {
                return Err(Error::Domain(format!(
                    "partial sum through index {i} is {} > 1",
                    acc.sum()
                )));
            }
        }
        Ok(acc.sum())
    }

    pub fn prefix(&self) -> &[f64] {
        &self.prefix
    }

    pub fn len(&self) -> usize {
        self.prefix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prefix.is_empty()
    }

    /// Entry `i` (zero-based); zero past the prefix.
    pub fn get(&self, i: usize) -> f64 {
        self.prefix.get(i).copied().unwrap_or(0.0)
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Whether entries past the prefix are unknown rather than zero.
    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    /// Upper bound on the total of the entries past the prefix.
    pub fn unseen_mass(&self) -> f64 {
        if self.truncated {
            self.tail_mass
        } else {
            0.0
        }
    }

    pub fn total(&self) -> f64 {
        neumaier_sum(self.prefix.iter().copied())
    }
}

/// Sup-norm distance on the finite simplex.
pub fn metric_dm(u: &SubProbVector, v: &SubProbVector) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Dimension {
            expected: u.len(),
            got: v.len(),
        });
    }
    Ok(u
        .entries()
        .iter()
        .zip(v.entries())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Product-topology distance `sum_i (|u_i - v_i| ∧ 1) / 2^i` on the infinite
/// simplex.
///
/// The shorter prefix is padded with zeros. For truncated sequences the
/// entries past a prefix of length `n` total at most the tail mass, and each
/// is weighted by at most `2^-(n+1)`, which gives the reported bound.
pub fn metric_d(u: &StickWeights, v: &StickWeights) -> Certified {
    let n = u.len().max(v.len());
    let mut weight = 1.0;
    let value = neumaier_sum((0..n).map(|i| {
        weight *= 0.5;
        (u.get(i) - v.get(i)).abs().min(1.0) * weight
    }));
    let tail_bound = |w: &StickWeights| w.unseen_mass().min(1.0) * 0.5f64.powi(w.len() as i32 + 1);
    Certified {
        value,
        error_bound: tail_bound(u) + tail_bound(v),
    }
}
