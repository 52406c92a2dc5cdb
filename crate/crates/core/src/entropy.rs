//! Relative entropy on finite simplices, its Donsker-Varadhan dual, and the
//! partition supremum over dyadic refinements.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{Measure, Partition};
use crate::stats::neumaier_sum;

/// Tolerance on `Σ = 1` for probability vectors.
pub const NORMALIZATION_TOL: f64 = 1e-10;

fn check_probability(name: &'static str, v: &[f64]) -> Result<()> {
    for &x in v {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(Error::Parameter {
                name,
                value: x,
                reason: "entries must be finite and non-negative",
            });
        }
    }
    let total = neumaier_sum(v.iter().copied());
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::Parameter {
            name,
            value: total,
            reason: "entries must sum to one",
        });
    }
    Ok(())
}

fn check_pair(mu: &[f64], nu: &[f64]) -> Result<()> {
    if mu.len() != nu.len() {
        return Err(Error::Dimension {
            expected: mu.len(),
            got: nu.len(),
        });
    }
    if mu.is_empty() {
        return Err(Error::Size { got: 0, max: 0 });
    }
    check_probability("mu", mu)?;
    check_probability("nu", nu)
}

/// `x log(x / y)` with `0 log(0/y) = 0` and `x log(x/0) = +inf` for `x > 0`.
pub fn xlogxy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if y == 0.0 {
        f64::INFINITY
    } else {
        x * (x / y).ln()
    }
}

/// `Σ xlogxy(μᵢ, νᵢ)` without validation.
pub(crate) fn kl_terms(mu: &[f64], nu: &[f64]) -> f64 {
    let mut terms = Vec::with_capacity(mu.len());
    for (&x, &y) in mu.iter().zip(nu) {
        let t = xlogxy(x, y);
        if t == f64::INFINITY {
            return f64::INFINITY;
        }
        terms.push(t);
    }
    neumaier_sum(terms).max(0.0)
}

/// `H(μ | ν)` for probability vectors of equal length.
pub fn kl(mu: &[f64], nu: &[f64]) -> Result<f64> {
    check_pair(mu, nu)?;
    Ok(kl_terms(mu, nu))
}

/// `H((u, 1-u) | (w, 1-w))`.
pub fn binary_kl(u: f64, w: f64) -> f64 {
    let pos = xlogxy(u, w);
    let neg = if u == 1.0 {
        0.0
    } else if w == 1.0 {
        f64::INFINITY
    } else {
        (1.0 - u) * ((-u).ln_1p() - (-w).ln_1p())
    };
    (pos + neg).max(0.0)
}

/// `Σ μᵢ fᵢ - log Σ νᵢ e^{fᵢ}`, with `fᵢ = -inf` allowed where `μᵢ = 0`.
pub fn variational_objective(mu: &[f64], nu: &[f64], f: &[f64]) -> f64 {
    let linear = neumaier_sum(
        mu.iter()
            .zip(f)
            .filter(|(m, _)| **m > 0.0)
            .map(|(m, fi)| m * fi),
    );
    linear - log_sum_exp(nu.iter().zip(f).filter(|(n, _)| **n > 0.0).map(|(n, fi)| fi + n.ln()))
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + neumaier_sum(values.map(|v| (v - max).exp())).ln()
}

#[derive(Debug, Clone, Copy)]
pub struct AscentSettings {
    pub max_steps: usize,
    pub step_size: f64,
    /// Stop once the sup-norm of the gradient is below this.
    pub grad_tol: f64,
}

impl Default for AscentSettings {
    fn default() -> Self {
        Self {
            max_steps: 1_000_000,
            step_size: 1.0,
            grad_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationalResult {
    pub value: f64,
    /// Maximizing potential, `-inf` on coordinates with `μᵢ = 0`.
    pub potential: Vec<f64>,
    pub iterations: usize,
    pub grad_norm: f64,
}

/// Maximizes the Donsker-Varadhan objective by gradient ascent with Armijo
/// backtracking.
///
/// Coordinates with `μᵢ = 0` are held at `fᵢ = -inf`: the objective is
/// increasing as such an `fᵢ` decreases, so this is where the supremum sits.
/// The remaining problem is strictly concave with a `1`-Lipschitz gradient.
pub fn kl_variational(mu: &[f64], nu: &[f64], settings: AscentSettings) -> Result<VariationalResult> {
    check_pair(mu, nu)?;
    let active: Vec<usize> = (0..mu.len()).filter(|&i| mu[i] > 0.0).collect();
    if let Some(&i) = active.iter().find(|&&i| nu[i] == 0.0) {
        return Err(Error::Infeasible { index: i, value: mu[i] });
    }
    let m: Vec<f64> = active.iter().map(|&i| mu[i]).collect();
    let ln_n: Vec<f64> = active.iter().map(|&i| nu[i].ln()).collect();
    let objective = |f: &[f64]| {
        neumaier_sum(m.iter().zip(f).map(|(a, b)| a * b)) - log_sum_exp(f.iter().zip(&ln_n).map(|(a, b)| a + b))
    };
    let gradient = |f: &[f64]| {
        let lse = log_sum_exp(f.iter().zip(&ln_n).map(|(a, b)| a + b));
        m.iter()
            .zip(f.iter().zip(&ln_n))
            .map(|(mi, (fi, li))| mi - (fi + li - lse).exp())
            .collect::<Vec<f64>>()
    };

    let mut f = vec![0.0; m.len()];
    let mut value = objective(&f);
    let mut iterations = 0;
    let mut grad = gradient(&f);
    let mut grad_norm = grad.iter().fold(0.0f64, |acc, g| acc.max(g.abs()));
    while grad_norm > settings.grad_tol {
        if iterations >= settings.max_steps {
            return Err(Error::Accuracy {
                achieved: grad_norm,
                requested: settings.grad_tol,
            });
        }
        let sq = neumaier_sum(grad.iter().map(|g| g * g));
        let slack = 1e-14 * (1.0 + value.abs());
        let mut step = settings.step_size;
        loop {
            let trial: Vec<f64> = f.iter().zip(&grad).map(|(fi, g)| fi + step * g).collect();
            let trial_value = objective(&trial);
            // Steps up to 1/L ascend in exact arithmetic; only there is
            // rounding in the objective forgiven.
            let target = value + 0.5 * step * sq;
            if trial_value >= target || (step <= 1.0 && trial_value + slack >= target) {
                f = trial;
                value = trial_value;
                break;
            }
            step *= 0.5;
            if step < 1e-12 {
                return Err(Error::StepSize { step, iteration: iterations });
            }
        }
        iterations += 1;
        grad = gradient(&f);
        grad_norm = grad.iter().fold(0.0f64, |acc, g| acc.max(g.abs()));
    }

    let mut potential = vec![f64::NEG_INFINITY; mu.len()];
    for (&i, fi) in active.iter().zip(&f) {
        potential[i] = *fi;
    }
    Ok(VariationalResult {
        value,
        potential,
        iterations,
        grad_norm,
    })
}

/// `H(π_ℓ(μ) | π_ℓ(ν))` for the dyadic partitions `ℓ = 1..=levels`.
///
/// Cut points are nudged off the atoms of both measures so the sequence of
/// partitions stays nested; by the data-processing inequality the values are
/// then non-decreasing in `ℓ`.
pub fn partition_sup_kl(mu: &(impl Measure + ?Sized), nu: &(impl Measure + ?Sized), levels: u32) -> Result<Vec<f64>> {
    if levels == 0 {
        return Err(Error::Size { got: 0, max: 0 });
    }
    let mut avoid = mu.atoms();
    avoid.extend(nu.atoms());
    (1..=levels)
        .map(|level| {
            let pi = Partition::dyadic(level, &avoid);
            let p = pi.apply(mu);
            let q = pi.apply(nu);
            kl(p.entries(), q.entries())
        })
        .collect()
}
