//! Large-deviation rate functions: `I` on the infinite simplex through its
//! finite-dimensional variational problems `I_m`, and `J` on partition
//! marginals. Each comes with a brute-force grid oracle for `m <= 3`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::entropy::{binary_kl, kl_terms, NORMALIZATION_TOL};
use crate::error::{Error, Result};
use crate::params::RateCoefficients;
use crate::simplex::SubProbVector;
use crate::stats::{neumaier_sum, NeumaierSum};

/// Remaining-stick mass below which a stick counts as exhausted.
pub const EXHAUSTED: f64 = 1e-14;

/// Largest dimension the grid oracles accept.
pub const ORACLE_MAX_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateIInstance {
    pub z: SubProbVector,
    pub coeffs: RateCoefficients,
}

impl RateIInstance {
    pub fn new(z: Vec<f64>, coeffs: RateCoefficients) -> Result<Self> {
        Ok(Self {
            z: SubProbVector::new(z)?,
            coeffs,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateJInstance {
    r: Vec<f64>,
    p: Vec<f64>,
    pub coeffs: RateCoefficients,
}

impl RateJInstance {
    pub fn new(r: Vec<f64>, p: Vec<f64>, coeffs: RateCoefficients) -> Result<Self> {
        if r.len() != p.len() {
            return Err(Error::Dimension {
                expected: r.len(),
                got: p.len(),
            });
        }
        if r.is_empty() {
            return Err(Error::Size { got: 0, max: 0 });
        }
        for (name, v) in [("r", &r), ("p", &p)] {
            if v.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                return Err(Error::Domain(format!("{name} has a negative or non-finite entry")));
            }
            let total = neumaier_sum(v.iter().copied());
            if (total - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::Domain(format!("{name} sums to {total}, not 1")));
            }
        }
        Ok(Self { r, p, coeffs })
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
}

/// Stick proportions `w` with `(1-w_1)⋯(1-w_{i-1}) w_i = z_i`.
///
/// Once the remaining stick is exhausted the proportion is set to `0`.
pub fn invert_sticks(z: &SubProbVector) -> Result<Vec<f64>> {
    let mut used = NeumaierSum::default();
    let mut w = Vec::with_capacity(z.len());
    for (i, &zi) in z.entries().iter().enumerate() {
        let remaining = 1.0 - used.sum();
        if remaining <= EXHAUSTED {
            if zi > EXHAUSTED {
                return Err(Error::Infeasible { index: i, value: zi });
            }
            w.push(0.0);
        } else {
            w.push((zi / remaining).min(1.0));
        }
        used.add(zi);
    }
    Ok(w)
}

/// `(1-w_1)⋯(1-w_{i-1}) w_i`.
pub fn fold_sticks(w: &[f64]) -> Vec<f64> {
    let mut rest = 1.0;
    w.iter()
        .map(|wi| {
            let zi = rest * wi;
            rest *= 1.0 - wi;
            zi
        })
        .collect()
}

/// `G(u) = Σ_i [a log(1/(1-u_i)) + b S_{i-1} h(u_i, w_i)]` with
/// `S_i = Π_{j<=i} (1-u_j)`.
pub fn rate_objective(u: &[f64], w: &[f64], coeffs: RateCoefficients) -> f64 {
    let mut total = NeumaierSum::default();
    let mut survive = 1.0;
    for (&ui, &wi) in u.iter().zip(w) {
        if ui >= 1.0 {
            return f64::INFINITY;
        }
        let h = binary_kl(ui, wi);
        if h == f64::INFINITY {
            return f64::INFINITY;
        }
        total.add(-coeffs.a * (-ui).ln_1p());
        total.add(coeffs.b * survive * h);
        survive *= 1.0 - ui;
    }
    total.sum()
}

#[derive(Debug, Clone, Copy)]
pub struct OptimizerSettings {
    pub random_starts: usize,
    pub seed: u64,
    /// Stop a descent once a full sweep improves the objective by less.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            random_starts: 5,
            seed: 0x5eed,
            tol: 1e-10,
            max_sweeps: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateIResult {
    pub value: f64,
    pub argmin: Vec<f64>,
    pub w: Vec<f64>,
}

/// Upper end of the line search for `u_i`.
const U_MAX: f64 = 1.0 - 1e-12;
const GOLDEN_TOL: f64 = 1e-13;

/// Minimizes a unimodal `f` on `[lo, hi]`, endpoints included.
fn golden_section(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > GOLDEN_TOL {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    let mut best = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    for x in [lo, hi] {
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    best
}

fn coordinate_descent(start: Vec<f64>, free: &[usize], w: &[f64], coeffs: RateCoefficients, settings: &OptimizerSettings) -> (f64, Vec<f64>) {
    let mut u = start;
    let mut value = rate_objective(&u, w, coeffs);
    for _ in 0..settings.max_sweeps {
        let before = value;
        for &i in free {
            let mut trial = u.clone();
            let (ui, fi) = golden_section(
                |t| {
                    trial[i] = t;
                    rate_objective(&trial, w, coeffs)
                },
                0.0,
                U_MAX,
            );
            if fi <= value {
                u[i] = ui;
                value = fi;
            }
        }
        if before - value < settings.tol {
            break;
        }
    }
    (value, u)
}

/// `I_m(z)` by multistart coordinate descent on `G`.
///
/// Starts are `u = w`, `u = 0`, `u = w/2` and `settings.random_starts` seeded
/// uniform points; the best result wins, ties broken by the lexicographically
/// smaller `u`. Coordinates with `w_i = 0` stay at `u_i = 0`. A cell with
/// `w_i = 1` exhausts the stick and makes the rate infinite.
pub fn rate_i_m(inst: &RateIInstance, settings: &OptimizerSettings) -> Result<RateIResult> {
    let w = invert_sticks(&inst.z)?;
    let m = w.len();
    if w.iter().any(|&wi| wi >= 1.0) {
        return Ok(RateIResult {
            value: f64::INFINITY,
            argmin: w.clone(),
            w,
        });
    }
    let free: Vec<usize> = (0..m).filter(|&i| w[i] > 0.0).collect();
    if free.is_empty() {
        return Ok(RateIResult {
            value: 0.0,
            argmin: vec![0.0; m],
            w,
        });
    }

    let mut starts = vec![w.clone(), vec![0.0; m], w.iter().map(|x| x / 2.0).collect()];
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    for _ in 0..settings.random_starts {
        let mut u = vec![0.0; m];
        for &i in &free {
            u[i] = rng.random::<f64>();
        }
        starts.push(u);
    }
    let results: Vec<(f64, Vec<f64>)> = starts
        .into_par_iter()
        .map(|s| coordinate_descent(s, &free, &w, inst.coeffs, settings))
        .collect();
    let (value, argmin) = results
        .into_iter()
        .min_by(|x, y| {
            x.0.total_cmp(&y.0).then_with(|| {
                x.1.iter()
                    .zip(&y.1)
                    .map(|(a, b)| a.total_cmp(b))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
        })
        .expect("at least three starts");
    Ok(RateIResult {
        value: value.max(0.0),
        argmin,
        w,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateISeries {
    pub value: f64,
    /// `max_{k<=m} I_k` for each evaluated `m`.
    pub by_m: Vec<f64>,
    pub converged: bool,
}

/// `I(z) = sup_m I_m(z_1..z_m)` over a finite prefix, zero-padded beyond it.
///
/// Stops when an increment falls below `tol` once the whole prefix is in
/// play, or at `m_max`.
pub fn rate_i(z: &SubProbVector, coeffs: RateCoefficients, m_max: usize, tol: f64, settings: &OptimizerSettings) -> Result<RateISeries> {
    if m_max == 0 {
        return Err(Error::Size { got: 0, max: 0 });
    }
    let mut by_m = Vec::new();
    let mut best = 0.0f64;
    let mut converged = false;
    for m in 1..=m_max {
        let prefix: Vec<f64> = (0..m).map(|i| z.entries().get(i).copied().unwrap_or(0.0)).collect();
        let inst = RateIInstance::new(prefix, coeffs)?;
        let value = rate_i_m(&inst, settings)?.value;
        let increment = value - best;
        best = best.max(value);
        by_m.push(best);
        if best == f64::INFINITY || (m >= z.len() && increment < tol) {
            converged = true;
            break;
        }
    }
    Ok(RateISeries {
        value: best,
        by_m,
        converged,
    })
}

fn check_oracle_dim(m: usize) -> Result<()> {
    if m > ORACLE_MAX_DIM {
        return Err(Error::Size {
            got: m,
            max: ORACLE_MAX_DIM,
        });
    }
    Ok(())
}

/// Exhaustive minimization of `G` over the grid `{0, step, ..}^m ∩ [0, 1-step]^m`.
///
/// The per-coordinate terms are tabulated once, so each grid point costs a
/// handful of multiplications.
pub fn rate_i_oracle(inst: &RateIInstance, step: f64) -> Result<f64> {
    let m = inst.z.len();
    check_oracle_dim(m)?;
    let w = invert_sticks(&inst.z)?;
    if m == 0 {
        return Ok(0.0);
    }
    let (a, b) = (inst.coeffs.a, inst.coeffs.b);
    let n = ((1.0 - step) / step + 1e-9).floor() as usize + 1;
    let grid: Vec<f64> = (0..n).map(|k| k as f64 * step).collect();
    let log_term: Vec<f64> = grid.iter().map(|u| -a * (-u).ln_1p()).collect();
    let keep: Vec<f64> = grid.iter().map(|u| 1.0 - u).collect();
    let h: Vec<Vec<f64>> = w.iter().map(|wi| grid.iter().map(|u| b * binary_kl(*u, *wi)).collect()).collect();
    let pick = |i: usize| if i < m { n } else { 1 };
    let best = (0..n)
        .into_par_iter()
        .map(|i| {
            let first = log_term[i] + h[0][i];
            let mut best = f64::INFINITY;
            for j in 0..pick(1) {
                let second = if m >= 2 { first + log_term[j] + keep[i] * h[1][j] } else { first };
                for k in 0..pick(2) {
                    let third = if m >= 3 {
                        second + log_term[k] + keep[i] * keep[j] * h[2][k]
                    } else {
                        second
                    };
                    best = best.min(third);
                }
            }
            best
        })
        .reduce(|| f64::INFINITY, f64::min);
    Ok(best)
}

/// The three explicit feasible points for `I(z)`: `u = 0`, `u = w`, and
/// `u_1 = w_1` with the other coordinates at `0`.
pub fn rate_i_upper_bounds(z: &SubProbVector, coeffs: RateCoefficients) -> Result<[f64; 3]> {
    let w = invert_sticks(z)?;
    let ln_rest = (-z.total()).ln_1p();
    let tail = neumaier_sum(w.iter().skip(1).map(|wk| (-wk).ln_1p()));
    let w1 = w.first().copied().unwrap_or(0.0);
    Ok([
        -coeffs.b * ln_rest,
        -coeffs.a * ln_rest,
        -(coeffs.a * (-w1).ln_1p() + coeffs.b * (1.0 - w1) * tail),
    ])
}

/// `Φ(q) = a·H(r | q) + b·H(q | p)`.
pub fn rate_j_objective(r: &[f64], p: &[f64], q: &[f64], coeffs: RateCoefficients) -> f64 {
    let left = kl_terms(r, q);
    let right = kl_terms(q, p);
    if left == f64::INFINITY || right == f64::INFINITY {
        return f64::INFINITY;
    }
    coeffs.a * left + coeffs.b * right
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateJResult {
    pub value: f64,
    /// Minimizer; `None` when the value is infinite.
    pub q: Option<Vec<f64>>,
}

/// Root `t = log q` of `b (t - log p) - a r e^{-t} = mu`, `r > 0`.
fn stationary_log_q(mu: f64, r: f64, ln_p: f64, coeffs: RateCoefficients) -> f64 {
    let (a, b) = (coeffs.a, coeffs.b);
    let g = |t: f64| b * (t - ln_p) - a * r * (-t).exp();
    // g(lo) < mu since the second term is negative.
    let lo0 = ln_p + mu / b;
    let (mut lo, mut hi) = (lo0, lo0 + 1.0);
    let mut width = 1.0;
    while g(hi) < mu {
        width *= 2.0;
        hi = lo0 + width;
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let gt = g(t) - mu;
        if gt == 0.0 {
            return t;
        }
        if gt < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let slope = b + a * r * (-t).exp();
        let newton = t - gt / slope;
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - t).abs() <= 1e-15 * t.abs().max(1.0) || hi - lo <= 1e-15 * t.abs().max(1.0) {
            return next;
        }
        t = next;
    }
    t
}

/// `J` at partition level: `min_q a·H(r | q) + b·H(q | p)`.
///
/// Stationarity gives, per coordinate, `b log(q_i/p_i) - a r_i/q_i = μ` for a
/// common multiplier `μ`; the left side is increasing in `q_i`, so each `q_i`
/// is a scalar root and `μ` is found by bisection on `Σ q_i = 1`.
pub fn rate_j_partition(inst: &RateJInstance) -> Result<RateJResult> {
    let (r, p, coeffs) = (&inst.r, &inst.p, inst.coeffs);
    if r.iter().zip(p).any(|(ri, pi)| *pi == 0.0 && *ri > 0.0) {
        return Ok(RateJResult {
            value: f64::INFINITY,
            q: None,
        });
    }
    if r == p {
        // q = p zeroes both terms; skip the root finder's rounding.
        return Ok(RateJResult {
            value: 0.0,
            q: Some(p.clone()),
        });
    }
    let active: Vec<usize> = (0..r.len()).filter(|&i| p[i] > 0.0).collect();
    let solve =|mu: f64| -> Vec<f64> {
        active
            .iter()
            .map(|&i| {
                if r[i] == 0.0 {
                    p[i] * (mu / coeffs.b).exp()
                } else {
                    stationary_log_q(mu, r[i], p[i].ln(), coeffs).exp()
                }
            })
            .collect()
    };
    let g = |i: usize, q: f64| coeffs.b * (q / p[i]).ln() - coeffs.a * r[i] / q;
    let n = active.len() as f64;
    let mut lo = active.iter().map(|&i| g(i, 1.0 / n)).fold(f64::INFINITY, f64::min);
    let mut hi = active.iter().map(|&i| g(i, 1.0)).fold(f64::NEG_INFINITY, f64::max);
    let mut q = solve(hi);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        q = solve(mid);
        let total = neumaier_sum(q.iter().copied());
        if (total - 1.0).abs() <= 1e-12 || mid <= lo || mid >= hi {
            break;
        }
        if total < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let total = neumaier_sum(q.iter().copied());
    let mut full = vec![0.0; r.len()];
    for (&i, qi) in active.iter().zip(&q) {
        full[i] = qi / total;
    }
    let value = rate_j_objective(r, p, &full, coeffs).max(0.0);
    Ok(RateJResult { value, q: Some(full) })
}

/// Exhaustive minimization of `Φ` over the simplex grid of spacing `step`.
pub fn rate_j_oracle(inst: &RateJInstance, step: f64) -> Result<f64> {
    let m = inst.len();
    check_oracle_dim(m)?;
    let (r, p, coeffs) = (&inst.r, &inst.p, inst.coeffs);
    let n = (1.0 / step).round() as usize;
    let at = |k: usize| if k == n { 1.0 } else { k as f64 * step };
    Ok(match m {
        1 => rate_j_objective(r, p, &[1.0], coeffs),
        2 => (0..=n)
            .into_par_iter()
            .map(|i| rate_j_objective(r, p, &[at(i), at(n - i)], coeffs))
            .reduce(|| f64::INFINITY, f64::min),
        _ => (0..=n)
            .into_par_iter()
            .map(|i| {
                (0..=n - i)
                    .map(|j| rate_j_objective(r, p, &[at(i), at(j), at(n - i - j)], coeffs))
                    .fold(f64::INFINITY, f64::min)
            })
            .reduce(|| f64::INFINITY, f64::min),
    })
}

/// Largest observed `Φ((q+q')/2) - (Φ(q)+Φ(q'))/2` over random pairs drawn
/// uniformly from the simplex restricted to the support of `p`.
pub fn midpoint_convexity_gap(inst: &RateJInstance, pairs: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| {
        let e: Vec<f64> = inst
            .p
            .iter()
            .map(|pi| if *pi > 0.0 { -(1.0 - rng.random::<f64>()).ln() } else { 0.0 })
            .collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|x| x / s).collect::<Vec<f64>>()
    };
    let phi = |q: &[f64]| rate_j_objective(&inst.r, &inst.p, q, inst.coeffs);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..pairs {
        let q1 = draw(&mut rng);
        let q2 = draw(&mut rng);
        let mid: Vec<f64> = q1.iter().zip(&q2).map(|(a, b)| 0.5 * (a + b)).collect();
        let (f1, f2, fm) = (phi(&q1), phi(&q2), phi(&mid));
        if f1.is_finite() && f2.is_finite() {
            worst = worst.max(fm - 0.5 * (f1 + f2));
        }
    }
    worst
}
