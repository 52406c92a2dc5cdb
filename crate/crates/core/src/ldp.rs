//! Large-deviation experiments on two-cell partition marginals.
//!
//! With a partition of `[0, 1]` into two cells of base masses `(r1, 1-r1)`,
//! the level-one cell mass is `q ~ Beta(α r1, α(1-r1))` and, given `q`, the
//! level-two cell mass is `p ~ Beta(β q, β(1-q))`. Ball probabilities of
//! `(q, p)` therefore reduce to a one-dimensional integral with an
//! incomplete-beta inner factor.

use rayon::prelude::*;
use serde::Serialize;

use crate::entropy::binary_kl;
use crate::error::{check_positive, Error, Result};
use crate::measure::{BaseDistribution, Measure, Partition};
use crate::params::{Params, RateCoefficients};
use crate::quad::{integrate_with_breaks, QuadSettings, Quadrature};
use crate::samplers::{sample_beta, sample_coupled_hdp_with, SamplerConfig, DEGENERATE_SHAPE};
use crate::special::{beta_interval_probability, ln_beta_pdf};
use crate::stats::Estimate;

/// Default spacing of the reference-infimum grid.
pub const REFERENCE_STEP: f64 = 1e-4;

/// Radius schedule for the degenerate-cell experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RadiusSchedule {
    Fixed(f64),
    /// `δ(γ) = γ^{-1/4}`.
    QuarterPower,
}

impl RadiusSchedule {
    pub fn radius(&self, gamma: f64) -> f64 {
        match self {
            RadiusSchedule::Fixed(d) => *d,
            RadiusSchedule::QuarterPower => gamma.powf(-0.25),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LdpExperiment {
    c: f64,
    r1: f64,
    center: (f64, f64),
    delta: f64,
    gamma_grid: Vec<f64>,
}

impl LdpExperiment {
    /// `center = (v1, u1)` locates the ball in (level-one, level-two) cell
    /// mass. An interior center needs a radius that keeps the ball inside
    /// the unit square.
    pub fn new(c: f64, r1: f64, center: (f64, f64), delta: f64, gamma_grid: Vec<f64>) -> Result<Self> {
        check_positive("c", c)?;
        check_positive("delta", delta)?;
        if !(r1 > 0.0 && r1 < 1.0) {
            return Err(Error::Parameter {
                name: "r1",
                value: r1,
                reason: "base cell mass must lie in (0, 1)",
            });
        }
        let (v1, u1) = center;
        for (name, x) in [("v1", v1), ("u1", u1)] {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::Parameter {
                    name,
                    value: x,
                    reason: "ball center must lie in [0, 1]",
                });
            }
        }
        let interior = v1 > 0.0 && v1 < 1.0 && u1 > 0.0 && u1 < 1.0;
        if interior && delta >= v1.min(1.0 - v1).min(u1).min(1.0 - u1) {
            return Err(Error::Parameter {
                name: "delta",
                value: delta,
                reason: "ball around an interior center must stay inside the unit square",
            });
        }
        if gamma_grid.is_empty() {
            return Err(Error::Size { got: 0, max: 0 });
        }
        for g in &gamma_grid {
            check_positive("gamma", *g)?;
        }
        if gamma_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("gamma grid must be strictly increasing".into()));
        }
        Ok(Self {
            c,
            r1,
            center,
            delta,
            gamma_grid,
        })
    }

    /// `c = 1`, `r1 = 0.5`, center `(0.3, 0.2)`, `δ = 0.05`,
    /// `γ ∈ {100, 200, 400, 800}`.
    pub fn default_fixture() -> Self {
        Self::new(1.0, 0.5, (0.3, 0.2), 0.05, vec![100.0, 200.0, 400.0, 800.0]).expect("valid fixture")
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn r1(&self) -> f64 {
        self.r1
    }

    pub fn center(&self) -> (f64, f64) {
        self.center
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn gamma_grid(&self) -> &[f64] {
        &self.gamma_grid
    }

    pub fn coefficients(&self) -> RateCoefficients {
        RateCoefficients::from_ratio(self.c)
    }

    pub fn params_at(&self, gamma: f64) -> Result<Params> {
        Params::at_speed(gamma, self.c)
    }
}

fn check_unit_open(name: &'static str, x: f64) -> Result<()> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain(format!("{name} = {x} must lie in (0, 1)")));
    }
    Ok(())
}

/// `log F(q, p)` for the joint density of the two cell masses.
pub fn ln_joint_density_m2(alpha: f64, beta: f64, r1: f64, q: f64, p: f64) -> Result<f64> {
    check_positive("alpha", alpha)?;
    check_positive("beta", beta)?;
    check_unit_open("r1", r1)?;
    check_unit_open("q", q)?;
    check_unit_open("p", p)?;
    Ok(ln_beta_pdf(q, alpha * r1, alpha * (1.0 - r1)) + ln_beta_pdf(p, beta * q, beta * (1.0 - q)))
}

/// `F(q, p) = Beta(q; α r1, α(1-r1)) · Beta(p; β q, β(1-q))`.
pub fn joint_density_m2(alpha: f64, beta: f64, r1: f64, q: f64, p: f64) -> Result<f64> {
    Ok(ln_joint_density_m2(alpha, beta, r1, q, p)?.exp())
}

/// `P(|q - v1| <= δ, |p - u1| <= δ)` by adaptive quadrature over `q`.
pub fn ball_probability(params: &Params, r1: f64, center: (f64, f64), delta: f64) -> Result<Quadrature> {
    check_unit_open("r1", r1)?;
    check_positive("delta", delta)?;
    let (alpha, beta) = (params.alpha(), params.beta());
    let (v1, u1) = center;
    let (lo, hi) = ((v1 - delta).max(0.0), (v1 + delta).min(1.0));
    if hi <= lo {
        return Ok(Quadrature {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    let (qa, qb) = (alpha * r1, alpha * (1.0 - r1));
    let integrand = |q: f64| {
        if q <= 0.0 || q >= 1.0 {
            return 0.0;
        }
        let inner = beta_interval_probability(beta * q, beta * (1.0 - q), u1 - delta, u1 + delta);
        if inner == 0.0 {
            return 0.0;
        }
        (ln_beta_pdf(q, qa, qb) + inner.ln()).exp()
    };
    let mut points: Vec<f64> = (0..=16).map(|k| lo + (hi - lo) * k as f64 / 16.0).collect();
    if qa > 1.0 && qb > 1.0 {
        points.push((qa - 1.0) / (qa + qb - 2.0));
    }
    points.push(u1);
    points.retain(|x| *x >= lo && *x <= hi);
    points.sort_by(f64::total_cmp);
    points.dedup();
    let settings = QuadSettings {
        abs_tol: 0.0,
        rel_tol: 1e-8,
        max_intervals: 10_000,
    };
    integrate_with_breaks(integrand, &points, settings)
}

/// [`ball_probability`] with `(α, β)` derived from `(γ, c)` and the
/// experiment's own ball.
pub fn ball_probability_m2(exp: &LdpExperiment, gamma: f64) -> Result<Quadrature> {
    ball_probability(&exp.params_at(gamma)?, exp.r1, exp.center, exp.delta)
}

const MC_CHUNK: usize = 4096;

fn in_ball(q: f64, p: f64, center: (f64, f64), delta: f64) -> bool {
    (q - center.0).abs() <= delta && (p - center.1).abs() <= delta
}

fn bernoulli_estimate(hits: usize, n: usize) -> Estimate {
    let mean = hits as f64 / n as f64;
    Estimate {
        mean,
        std_error: (mean * (1.0 - mean) / n as f64).sqrt(),
        n_samples: n,
    }
}

fn chunked_hits(cfg: &SamplerConfig, n: usize, hit: impl Fn(&mut rand_chacha::ChaCha8Rng) -> bool + Sync) -> usize {
    let chunks = n.div_ceil(MC_CHUNK);
    cfg.replicate(chunks, |rng, c| {
        let size = MC_CHUNK.min(n - c * MC_CHUNK);
        (0..size).filter(|_| hit(rng)).count()
    })
    .into_iter()
    .sum()
}

/// Monte Carlo ball probability from the two-cell marginals sampled directly.
pub fn mc_ball_probability(params: &Params, r1: f64, center: (f64, f64), delta: f64, n: usize, cfg: &SamplerConfig) -> Result<Estimate> {
    check_unit_open("r1", r1)?;
    if n == 0 {
        return Err(Error::Size { got: 0, max: 0 });
    }
    let (alpha, beta) = (params.alpha(), params.beta());
    let hits = chunked_hits(cfg, n, |rng| {
        let (q, q_rest) = sample_beta(rng, alpha * r1, alpha * (1.0 - r1));
        let shape = (beta * q).max(DEGENERATE_SHAPE);
        let (p, _) = sample_beta(rng, shape, (beta * q_rest).max(DEGENERATE_SHAPE));
        in_ball(q, p, center, delta)
    });
    Ok(bernoulli_estimate(hits, n))
}

/// Monte Carlo ball probability through full stick-breaking draws of the
/// coupled processes with uniform base, projected on the cut at `r1`.
///
/// The unbroken tail of each truncated draw is split between the cells in
/// proportion `(r1, 1-r1)`; the truncation tolerance in `cfg` bounds the
/// resulting bias per draw.
pub fn mc_ball_probability_sticks(params: &Params, r1: f64, center: (f64, f64), delta: f64, n: usize, cfg: &SamplerConfig) -> Result<Estimate> {
    check_unit_open("r1", r1)?;
    if n == 0 {
        return Err(Error::Size { got: 0, max: 0 });
    }
    let partition = Partition::new(vec![r1])?;
    let base = BaseDistribution::Uniform;
    let sticks = cfg.length(params.alpha());
    let hits = chunked_hits(cfg, n, |rng| {
        let (dp, hdp) = sample_coupled_hdp_with(rng, params, &base, sticks);
        let q = dp.cell_masses(&partition)[0] + dp.weights().tail_mass() * r1;
        let p = hdp.cell_masses(&partition)[0] + hdp.weights().tail_mass() * r1;
        in_ball(q, p, center, delta)
    });
    Ok(bernoulli_estimate(hits, n))
}

/// `min a·h(r1, q) + b·h(q, p)` over the closed ball, by grid search with
/// spacing `step` (both edges included).
pub fn reference_infimum(coeffs: RateCoefficients, r1: f64, center: (f64, f64), delta: f64, step: f64) -> f64 {
    let axis = |c: f64| {
        let (lo, hi) = ((c - delta).max(0.0), (c + delta).min(1.0));
        let k = ((hi - lo) / step).round().max(1.0) as usize;
        (0..=k).map(|i| if i == k { hi } else { lo + i as f64 * step }).collect::<Vec<f64>>()
    };
    let qs = axis(center.0);
    let ps = axis(center.1);
    qs.par_iter()
        .map(|&q| {
            let first = coeffs.a * binary_kl(r1, q);
            ps.iter()
                .map(|&p| first + coeffs.b * binary_kl(q, p))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub probability: f64,
    pub quad_error: f64,
    /// `-(1/γ) log P`
    pub empirical_rate: f64,
    /// Reference infimum over this row's ball.
    pub reference: f64,
}

impl RateRow {
    pub fn gap(&self) -> f64 {
        (self.empirical_rate - self.reference).abs()
    }
}

fn rate_rows(exp: &LdpExperiment, radius: impl Fn(f64) -> f64 + Sync, step: f64) -> Result<Vec<RateRow>> {
    let coeffs = exp.coefficients();
    exp.gamma_grid
        .par_iter()
        .map(|&gamma| {
            let params = exp.params_at(gamma)?;
            let delta = radius(gamma);
            let quad = ball_probability(&params, exp.r1, exp.center, delta)?;
            Ok(RateRow {
                gamma,
                alpha: params.alpha(),
                beta: params.beta(),
                delta,
                probability: quad.value,
                quad_error: quad.error,
                empirical_rate: -quad.value.ln() / gamma,
                reference: reference_infimum(coeffs, exp.r1, exp.center, delta, step),
            })
        })
        .collect()
}

/// Empirical rates `-(1/γ) log P` along the experiment's speed grid, each
/// with the grid infimum of the rate over the ball.
pub fn empirical_rate(exp: &LdpExperiment, step: f64) -> Result<Vec<RateRow>> {
    rate_rows(exp, |_| exp.delta, step)
}

/// Empirical rates for a ball touching the empty level-two cell, under a
/// radius schedule.
pub fn zero_cell_experiment(exp: &LdpExperiment, schedule: RadiusSchedule, step: f64) -> Result<Vec<RateRow>> {
    if exp.center.1 != 0.0 {
        return Err(Error::Domain("zero-cell experiment needs u1 = 0".into()));
    }
    rate_rows(exp, |g| schedule.radius(g), step)
}
