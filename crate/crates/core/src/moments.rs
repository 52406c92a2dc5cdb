//! Closed-form moments of the stick weights and the HDP integrals, with
//! Monte Carlo checks and the law-of-large-numbers sweep.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{BaseDistribution, Measure, TestFamily, TestFunction};
use crate::params::Params;
use crate::samplers::{sample_conditional_sticks_with, sample_coupled_hdp_with, sample_gem_with, SamplerConfig};
use crate::simplex::{metric_d, StickWeights};
use crate::stats::{neumaier_sum, Estimate};

/// Discrepancy threshold, in standard errors, for Monte Carlo checks.
pub const MC_SIGMA: f64 = 4.0;

/// `E[V_i] = (α/(1+α))^{i-1} / (1+α)`, `i >= 1`.
pub fn mean_v(alpha: f64, i: usize) -> f64 {
    assert!(i >= 1, "stick indices start at 1");
    (alpha / (1.0 + alpha)).powi(i as i32 - 1) / (1.0 + alpha)
}

/// `E[Z_i] = E[V_i]`; the level-two concentration drops out.
pub fn mean_z(params: &Params, i: usize) -> f64 {
    mean_v(params.alpha(), i)
}

/// `E[V_i²] = (α/(α+2))^{i-1} · 2/((α+2)(α+1))`.
pub fn second_moment_v(alpha: f64, i: usize) -> f64 {
    assert!(i >= 1, "stick indices start at 1");
    (alpha / (alpha + 2.0)).powi(i as i32 - 1) * 2.0 / ((alpha + 2.0) * (alpha + 1.0))
}

/// `E[Z_i²] = E[V_i]/(1+β) + β E[V_i²]/(1+β)`.
pub fn second_moment_z(params: &Params, i: usize) -> f64 {
    let beta = params.beta();
    mean_v(params.alpha(), i) / (1.0 + beta) + beta / (1.0 + beta) * second_moment_v(params.alpha(), i)
}

/// `Σ_i E[Z_i²] = 1/(1+β) + β/((1+β)(α+1))`, the variance coefficient of
/// `⟨Ξ, f⟩`.
pub fn sum_second_moments_z(params: &Params) -> f64 {
    let (alpha, beta) = (params.alpha(), params.beta());
    1.0 / (1.0 + beta) + beta / ((1.0 + beta) * (alpha + 1.0))
}

/// `Var⟨Ξ_{α,β,ν₀}, f⟩ = Σ_i E[Z_i²] · (⟨ν₀, f²⟩ - ⟨ν₀, f⟩²)`.
pub fn variance_of_integral(params: &Params, base: &BaseDistribution, f: &TestFunction) -> Result<f64> {
    let (m1, m2) = base.exact_moments(f)?;
    Ok(sum_second_moments_z(params) * (m2 - m1 * m1).max(0.0))
}

/// `E[d(Z, 0)] = Σ_i E[Z_i] / 2^i = 1/(2+α)`.
pub fn expected_d_to_origin(alpha: f64) -> f64 {
    1.0 / (2.0 + alpha)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub quantity: String,
    pub index: usize,
    pub closed_form: f64,
    pub mc_estimate: f64,
    pub std_error: f64,
    pub n_samples: usize,
    /// `|closed_form - mc_estimate| > 4 · std_error`
    pub flagged: bool,
}

impl MomentReport {
    fn new(quantity: &str, index: usize, closed_form: f64, est: Estimate) -> Self {
        Self {
            quantity: quantity.to_string(),
            index,
            closed_form,
            mc_estimate: est.mean,
            std_error: est.std_error,
            n_samples: est.n_samples,
            flagged: est.z_score(closed_form) > MC_SIGMA,
        }
    }
}

/// Monte Carlo estimates of `E[Z_i]` and `E[Z_i²]` for `i = 1..=max_index`.
///
/// Only the first `max_index` sticks are drawn: `Z_i` depends on the level-one
/// sticks through `V_1..V_i` and the exact remainder `1 - Σ_{k≤i} V_k`, both
/// of which a prefix of that length carries.
pub fn mc_stick_moments(params: &Params, cfg: &SamplerConfig, n_samples: usize, max_index: usize) -> Vec<MomentReport> {
    let draws: Vec<StickWeights> = cfg.replicate(n_samples, |rng, _| {
        let v = sample_gem_with(rng, params.alpha(), max_index);
        sample_conditional_sticks_with(rng, params.beta(), &v).expect("beta validated by Params")
    });
    let mut out = Vec::with_capacity(2 * max_index);
    for i in 1..=max_index {
        let zi: Vec<f64> = draws.iter().map(|z| z.get(i - 1)).collect();
        out.push(MomentReport::new("E[Z_i]", i, mean_z(params, i), Estimate::from_samples(&zi)));
        let zi2: Vec<f64> = zi.iter().map(|x| x * x).collect();
        out.push(MomentReport::new(
            "E[Z_i^2]",
            i,
            second_moment_z(params, i),
            Estimate::from_samples(&zi2),
        ));
    }
    out
}

/// `⟨Ξ, f⟩` for a truncated draw, with the unbroken tail replaced by its
/// conditional expectation `tail · ⟨ν₀, f⟩`.
fn completed_integral(xi: &crate::measure::DiscreteMeasure, f: impl Fn(f64) -> f64, base_mean: f64) -> f64 {
    xi.integrate_fn(f) + xi.weights().tail_mass() * base_mean
}

/// Monte Carlo variance of `⟨Ξ_{α,β,ν₀}, f⟩` against the closed form.
pub fn mc_integral_variance(
    params: &Params,
    base: &BaseDistribution,
    f: &TestFunction,
    cfg: &SamplerConfig,
    n_samples: usize,
) -> Result<MomentReport> {
    let closed = variance_of_integral(params, base, f)?;
    let (base_mean, _) = base.exact_moments(f)?;
    let n = cfg.length(params.alpha());
    let values = cfg.replicate(n_samples, |rng, _| {
        let (_, xi) = sample_coupled_hdp_with(rng, params, base, n);
        completed_integral(&xi, |x| f.eval(x), base_mean)
    });
    let label = format!("Var<Xi|{}>", f.label());
    Ok(MomentReport::new(&label, 0, closed, Estimate::variance_of(&values)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LlnRow {
    pub alpha: f64,
    pub beta: f64,
    pub sticks: usize,
    pub d_mean: f64,
    pub d_std_error: f64,
    pub d_exact: f64,
    pub d_flagged: bool,
    pub rho_mean: f64,
    pub rho_std_error: f64,
    /// Mean certified truncation bound on `d`.
    pub d_bias_bound: f64,
    /// Truncation of the test family plus mean unbroken tail mass.
    pub rho_bias_bound: f64,
}

/// `cos(kπx)` for `k = 0..n` by the Chebyshev recurrence.
fn cosines(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        let c1 = (std::f64::consts::PI * x).cos();
        out[1] = c1;
        for k in 2..out.len() {
            out[k] = 2.0 * c1 * out[k - 1] - out[k - 2];
        }
    }
}

/// Law-of-large-numbers sweep: per grid point, Monte Carlo means of
/// `d(Z, 0)` and of the surrogate `ρ(Ξ_{α,β,ν₀}, ν₀)` over the first
/// `rho_terms` functions of `family`.
///
/// The family must consist of `f_1 ≡ 1` followed by `cos(kπx)` (the
/// [`CosineFamily`](crate::measure::CosineFamily)); other families go through
/// the generic path, which is slower.
pub fn lln_experiment(
    grid: &[Params],
    base: &BaseDistribution,
    family: &(impl TestFamily + Sync),
    rho_terms: usize,
    cfg: &SamplerConfig,
    n_samples: usize,
) -> Result<Vec<LlnRow>> {
    if rho_terms == 0 {
        return Err(Error::Size { got: 0, max: 0 });
    }
    let functions: Vec<TestFunction> = (1..=rho_terms).map(|i| family.function(i)).collect();
    let base_means = functions.iter().map(|f| base.integrate(f)).collect::<Result<Vec<_>>>()?;
    let is_cosine = functions
        .iter()
        .enumerate()
        .all(|(i, f)| matches!((i, f), (0, TestFunction::Constant(c)) if *c == 1.0) || *f == TestFunction::Cosine(i as u32));
    let family_tail = 0.5f64.powi(rho_terms as i32);

    let mut rows = Vec::with_capacity(grid.len());
    for (g, params) in grid.iter().enumerate() {
        let n = cfg.length(params.alpha());
        let grid_cfg = SamplerConfig {
            seed: cfg.seed.wrapping_add(g as u64),
            ..*cfg
        };
        let samples = grid_cfg.replicate(n_samples, |rng, _| {
            let (_, xi) = sample_coupled_hdp_with(rng, params, base, n);
            let d = metric_d(xi.weights(), &StickWeights::origin());
            let tail = xi.weights().tail_mass();
            let integrals: Vec<f64> = if is_cosine {
                let mut acc = vec![0.0; rho_terms];
                let mut cos = vec![0.0; rho_terms];
                for (x, w) in xi.locations().iter().zip(xi.weights().prefix()) {
                    cosines(*x, &mut cos);
                    for (a, c) in acc.iter_mut().zip(&cos) {
                        *a += w * c;
                    }
                }
                acc
            } else {
                functions.iter().map(|f| xi.integrate_fn(|x| f.eval(x))).collect()
            };
            let mut weight = 1.0;
            let rho = neumaier_sum(integrals.iter().zip(&base_means).map(|(v, m)| {
                weight *= 0.5;
                let completed = v + tail * m;
                (completed - m).abs().min(1.0) * weight
            }));
            (d.value, d.error_bound, rho, tail)
        });
        let d: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let rho: Vec<f64> = samples.iter().map(|s| s.2).collect();
        let d_est = Estimate::from_samples(&d);
        let rho_est = Estimate::from_samples(&rho);
        let d_exact = expected_d_to_origin(params.alpha());
        rows.push(LlnRow {
            alpha: params.alpha(),
            beta: params.beta(),
            sticks: n,
            d_mean: d_est.mean,
            d_std_error: d_est.std_error,
            d_exact,
            d_flagged: d_est.z_score(d_exact) > MC_SIGMA,
            rho_mean: rho_est.mean,
            rho_std_error: rho_est.std_error,
            d_bias_bound: neumaier_sum(samples.iter().map(|s| s.1)) / n_samples as f64,
            rho_bias_bound: family_tail + neumaier_sum(samples.iter().map(|s| s.3)) / n_samples as f64,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::CosineFamily;

    fn p(alpha: f64, beta: f64) -> Params {
        Params::from_concentrations(alpha, beta).unwrap()
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(mean_v(1.0, 1), 0.5);
        assert_eq!(mean_v(1.0, 2), 0.25);
        assert_eq!(mean_z(&p(1.0, 7.0), 1), 0.5);
        assert!((mean_z(&p(10.0, 3.0), 1) - 1.0 / 11.0).abs() < 1e-16);
        assert_eq!(mean_z(&p(4.0, 1.0), 3), mean_z(&p(4.0, 100.0), 3));
        assert!((second_moment_v(1.0, 1) - 1.0 / 3.0).abs() < 1e-16);
        assert!((second_moment_v(1.0, 2) - 1.0 / 9.0).abs() < 1e-16);
        assert!((second_moment_z(&p(1.0, 1.0), 1) - 5.0 / 12.0).abs() < 1e-16);
    }

    #[test]
    fn second_moment_z_tends_to_v() {
        let limit = second_moment_z(&p(3.0, 1e12), 2);
        assert!((limit - second_moment_v(3.0, 2)).abs() < 1e-12);
    }

    #[test]
    fn second_moment_below_mean() {
        for &alpha in &[0.1, 1.0, 10.0, 100.0] {
            for i in 1..30 {
                assert!(second_moment_v(alpha, i) <= mean_v(alpha, i));
                assert!(second_moment_z(&p(alpha, 5.0), i) <= mean_z(&p(alpha, 5.0), i));
            }
        }
    }

    #[test]
    fn geometric_sums() {
        for &(alpha, beta) in &[(1.0, 1.0), (10.0, 40.0), (40.0, 10.0), (0.5, 3.0)] {
            let params = p(alpha, beta);
            let n = 20_000;
            let partial: f64 = neumaier_sum((1..=n).map(|i| mean_z(&params, i)));
            assert!((partial - 1.0).abs() < 1e-10);
            let squares: f64 = neumaier_sum((1..=n).map(|i| second_moment_z(&params, i)));
            assert!((squares - sum_second_moments_z(&params)).abs() < 1e-10);
            assert!(sum_second_moments_z(&params) <= 1.0 + 1e-10);
        }
    }

    #[test]
    fn variance_examples() {
        let params = p(10.0, 10.0);
        let v = variance_of_integral(&params, &BaseDistribution::Uniform, &TestFunction::identity()).unwrap();
        assert!((v - (21.0 / 121.0) / 12.0).abs() < 1e-15);
        assert!((v - 0.014463).abs() < 1e-6);
        let c = variance_of_integral(&params, &BaseDistribution::Uniform, &TestFunction::Constant(3.0)).unwrap();
        assert_eq!(c, 0.0);
        let big = variance_of_integral(&p(1e9, 1e9), &BaseDistribution::Uniform, &TestFunction::identity()).unwrap();
        assert!(big < 1e-9);
        let beta = BaseDistribution::beta(2.0, 2.0).unwrap();
        assert!(matches!(
            variance_of_integral(&params, &beta, &TestFunction::Cosine(2)),
            Err(Error::UnsupportedBase(_))
        ));
    }

    #[test]
    fn d_to_origin_series() {
        for &alpha in &[0.5, 10.0, 80.0] {
            let series = neumaier_sum((1..=2000).map(|i| mean_v(alpha, i) / 2f64.powi(i as i32)));
            assert!((series - expected_d_to_origin(alpha)).abs() < 1e-14);
        }
        let ratio = expected_d_to_origin(20.0) / expected_d_to_origin(10.0);
        assert!((ratio - 12.0 / 22.0).abs() < 1e-15);
    }

    #[test]
    fn small_moment_run_has_no_flags() {
        let reports = mc_stick_moments(&p(3.0, 2.0), &SamplerConfig::fixed(5, 0), 20_000, 3);
        assert_eq!(reports.len(), 6);
        assert!(reports.iter().all(|r| !r.flagged), "{reports:#?}");
    }

    #[test]
    fn lln_with_point_mass_base_has_zero_rho() {
        let base = BaseDistribution::dirac(0.3).unwrap();
        let grid = [p(5.0, 5.0), p(10.0, 10.0)];
        let cfg = SamplerConfig::tolerance(2, 1e-4).unwrap();
        let rows = lln_experiment(&grid, &base, &CosineFamily, 8, &cfg, 500).unwrap();
        for row in rows {
            assert!(row.rho_mean.abs() < 1e-12, "{row:?}");
        }
    }

    #[test]
    fn chebyshev_cosines_match_direct() {
        let mut out = [0.0; 9];
        cosines(0.37, &mut out);
        for (k, c) in out.iter().enumerate() {
            assert!((c - (k as f64 * std::f64::consts::PI * 0.37).cos()).abs() < 1e-13);
        }
    }
}
