//! Stick-breaking samplers for the Dirichlet process and its hierarchical
//! extension.
//!
//! Every draw is a pure function of a [`SamplerConfig`] and a replica index:
//! replica `i` owns the ChaCha stream `i` of the generator keyed by the seed,
//! so results never depend on how replicas are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_positive, Error, Result};
use crate::measure::{BaseDistribution, DiscreteMeasure};
use crate::params::Params;
use crate::simplex::StickWeights;

/// Below this a Beta shape parameter is treated as zero.
pub const DEGENERATE_SHAPE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Truncation {
    /// Exactly `n` sticks.
    Fixed(usize),
    /// Smallest `n` with expected unbroken mass `(α/(1+α))^n <= eps`.
    Tolerance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplerConfig {
    pub seed: u64,
    pub truncation: Truncation,
}

impl SamplerConfig {
    pub fn fixed(seed: u64, n: usize) -> Self {
        Self {
            seed,
            truncation: Truncation::Fixed(n),
        }
    }

    pub fn tolerance(seed: u64, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Parameter {
                name: "eps",
                value: eps,
                reason: "tail tolerance must lie in (0, 1)",
            });
        }
        Ok(Self {
            seed,
            truncation: Truncation::Tolerance(eps),
        })
    }

    /// Number of sticks drawn for level-one concentration `alpha`.
    pub fn length(&self, alpha: f64) -> usize {
        match self.truncation {
            Truncation::Fixed(n) => n,
            Truncation::Tolerance(eps) => {
                // ln(α/(1+α)) = -ln(1 + 1/α)
                let n = (eps.ln() / -(1.0 / alpha).ln_1p()).ceil();
                (n.max(1.0)) as usize
            }
        }
    }

    /// Independent generator for one replica.
    pub fn stream(&self, replica: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(replica);
        rng
    }

    /// Runs `f` once per replica in parallel and returns results in replica
    /// order.
    pub fn replicate<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&mut ChaCha8Rng, usize) -> T + Sync,
    {
        (0..count)
            .into_par_iter()
            .map(|i| f(&mut self.stream(i as u64), i))
            .collect()
    }
}

fn ln_gamma_variate<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    if shape >= 1.0 {
        Gamma::new(shape, 1.0).expect("valid gamma shape").sample(rng).ln()
    } else {
        // G(a) = G(a + 1) U^(1/a), kept in log space so tiny shapes do not underflow.
        let g = Gamma::new(shape + 1.0, 1.0).expect("valid gamma shape").sample(rng);
        let u = 1.0 - rng.random::<f64>();
        g.ln() + u.ln() / shape
    }
}

/// Draws `W ~ Beta(a, b)` and returns `(W, 1 - W)`, both computed without
/// cancellation.
pub fn sample_beta<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> (f64, f64) {
    let lx = ln_gamma_variate(rng, a);
    let ly = ln_gamma_variate(rng, b);
    if lx == f64::NEG_INFINITY && ly == f64::NEG_INFINITY {
        return if a >= b { (1.0, 0.0) } else { (0.0, 1.0) };
    }
    let w = 1.0 / (1.0 + (ly - lx).exp());
    let w_c = 1.0 / (1.0 + (lx - ly).exp());
    (w, w_c)
}

/// GEM(α) prefix of length `n`: `V_1 = U_1`, `V_k = (1-U_1)⋯(1-U_{k-1}) U_k`
/// with `U_k ~ Beta(1, α)`.
pub fn sample_gem_with<R: Rng + ?Sized>(rng: &mut R, alpha: f64, n: usize) -> StickWeights {
    let mut remaining = 1.0;
    let mut prefix = Vec::with_capacity(n);
    for _ in 0..n {
        // 1 - U = X^(1/α) with X uniform on (0, 1].
        let x = 1.0 - rng.random::<f64>();
        let ln_keep = x.ln() / alpha;
        let u = -ln_keep.exp_m1();
        prefix.push(remaining * u);
        remaining *= ln_keep.exp();
    }
    StickWeights::truncated(prefix, remaining).expect("stick folding preserves the simplex")
}

pub fn sample_gem(params: &Params, cfg: &SamplerConfig) -> StickWeights {
    let n = cfg.length(params.alpha());
    sample_gem_with(&mut cfg.stream(0), params.alpha(), n)
}

/// Level-two sticks given level-one weights `v`:
/// `W_n ~ Beta(β V_n, β(1 - Σ_{k≤n} V_k))`, folded into `Z`.
pub fn sample_conditional_sticks_with<R: Rng + ?Sized>(
    rng: &mut R,
    beta: f64,
    v: &StickWeights,
) -> Result<StickWeights> {
    check_positive("beta", beta)?;
    let n = v.len();
    // remaining[k] = 1 - Σ_{j≤k} V_j, accumulated from the tail to avoid cancellation.
    let mut remaining = vec![0.0; n];
    let mut acc = v.tail_mass();
    for k in (0..n).rev() {
        remaining[k] = acc.max(0.0);
        acc += v.prefix()[k];
    }

    let mut z = Vec::with_capacity(n);
    let mut z_remaining = 1.0;
    for (k, &vk) in v.prefix().iter().enumerate() {
        let a = beta * vk;
        let b = beta * remaining[k];
        let (w, w_c) = if a == 0.0 {
            (0.0, 1.0)
        } else if b <= DEGENERATE_SHAPE {
            (1.0, 0.0)
        } else {
            sample_beta(rng, a, b)
        };
        z.push(z_remaining * w);
        z_remaining *= w_c;
    }
    if v.is_truncated() {
        StickWeights::truncated(z, z_remaining)
    } else {
        StickWeights::finite(z)
    }
}

pub fn sample_conditional_sticks(beta: f64, v: &StickWeights, cfg: &SamplerConfig) -> Result<StickWeights> {
    sample_conditional_sticks_with(&mut cfg.stream(0), beta, v)
}

/// One coupled draw `(Σ V_i δ_{ξ_i}, Σ Z_i δ_{ξ_i})` on shared atoms.
pub fn sample_coupled_hdp_with<R: Rng + ?Sized>(
    rng: &mut R,
    params: &Params,
    base: &BaseDistribution,
    n: usize,
) -> (DiscreteMeasure, DiscreteMeasure) {
    let v = sample_gem_with(rng, params.alpha(), n);
    let atoms: Vec<f64> = (0..n).map(|_| base.sample(rng)).collect();
    let z = sample_conditional_sticks_with(rng, params.beta(), &v).expect("beta validated by Params");
    (
        DiscreteMeasure::new(atoms.clone(), v).expect("atoms drawn from a distribution on [0, 1]"),
        DiscreteMeasure::new(atoms, z).expect("atoms drawn from a distribution on [0, 1]"),
    )
}

pub fn sample_coupled_hdp(
    params: &Params,
    base: &BaseDistribution,
    cfg: &SamplerConfig,
) -> (DiscreteMeasure, DiscreteMeasure) {
    sample_coupled_hdp_with(&mut cfg.stream(0), params, base, cfg.length(params.alpha()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::Estimate;

    #[test]
    fn tolerance_truncation_length() {
        let cfg = SamplerConfig::tolerance(1, 0.01).unwrap();
        assert_eq!(cfg.length(10.0), 49);
        // (10/11)^49 <= 0.01 < (10/11)^48
        assert!((10.0f64 / 11.0).powi(49) <= 0.01);
        assert!((10.0f64 / 11.0).powi(48) > 0.01);
        assert!(SamplerConfig::tolerance(1, 1.5).is_err());
    }

    #[test]
    fn gem_is_deterministic() {
        let p = Params::new(2.0, 1.0).unwrap();
        let cfg = SamplerConfig::fixed(42, 3);
        let a = sample_gem(&p, &cfg);
        assert_eq!(a, sample_gem(&p, &cfg));
        assert_eq!(a.len(), 3);
        assert_ne!(a, sample_gem(&p, &SamplerConfig::fixed(43, 3)));
    }

    #[test]
    fn stick_folding_identity() {
        let mut rng = SamplerConfig::fixed(7, 0).stream(0);
        for &alpha in &[0.1, 1.0, 10.0, 1000.0] {
            for _ in 0..200 {
                let v = sample_gem_with(&mut rng, alpha, 50);
                assert!((v.total() + v.tail_mass() - 1.0).abs() <= 1e-12);
                let z = sample_conditional_sticks_with(&mut rng, 3.0, &v).unwrap();
                assert!((z.total() + z.tail_mass() - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn gem_first_stick_mean_at_large_alpha() {
        let cfg = SamplerConfig::fixed(11, 1);
        let draws = cfg.replicate(100_000, |rng, _| sample_gem_with(rng, 1000.0, 1).get(0));
        let est = Estimate::from_samples(&draws);
        assert!(est.z_score(1.0 / 1001.0) < 4.0, "{est:?}");
    }

    #[test]
    fn exhausted_first_stick_forces_full_weight() {
        let v = StickWeights::finite(vec![1.0, 0.0, 0.0]).unwrap();
        let z = sample_conditional_sticks(5.0, &v, &SamplerConfig::fixed(0, 3)).unwrap();
        assert_eq!(z.prefix(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn conditional_sticks_reject_bad_beta() {
        let v = StickWeights::finite(vec![0.5]).unwrap();
        assert!(sample_conditional_sticks(0.0, &v, &SamplerConfig::fixed(0, 1)).is_err());
    }

    #[test]
    fn half_half_first_weight_is_symmetric_beta() {
        let v = StickWeights::finite(vec![0.5, 0.5]).unwrap();
        let cfg = SamplerConfig::fixed(5, 2);
        let draws = cfg.replicate(100_000, |rng, _| {
            sample_conditional_sticks_with(rng, 8.0, &v).unwrap().get(0)
        });
        let est = Estimate::from_samples(&draws);
        assert!(est.z_score(0.5) < 4.0, "{est:?}");
        // Beta(4, 4) variance 1/36.
        let var = Estimate::variance_of(&draws);
        assert!(var.z_score(1.0 / 36.0) < 4.0, "{var:?}");
    }

    #[test]
    fn conditional_mean_matches_level_one_weights() {
        let mut rng = SamplerConfig::fixed(99, 0).stream(0);
        let v = sample_gem_with(&mut rng, 3.0, 6);
        let cfg = SamplerConfig::fixed(100, 6);
        let draws = cfg.replicate(100_000, |rng, _| sample_conditional_sticks_with(rng, 4.0, &v).unwrap());
        for i in 0..6 {
            let zi: Vec<f64> = draws.iter().map(|z| z.get(i)).collect();
            let est = Estimate::from_samples(&zi);
            assert!(est.z_score(v.get(i)) < 4.0, "index {i}: {est:?} vs {}", v.get(i));
        }
    }

    #[test]
    fn coupled_draw_shares_atoms() {
        let p = Params::new(5.0, 2.0).unwrap();
        let cfg = SamplerConfig::tolerance(3, 1e-6).unwrap();
        let (level_one, level_two) = sample_coupled_hdp(&p, &BaseDistribution::Uniform, &cfg);
        assert_eq!(level_one.locations(), level_two.locations());
        assert_eq!(level_one.len(), cfg.length(10.0));
        assert!(level_one.weights().total() <= 1.0 + 1e-12);
        assert!(level_two.weights().total() <= 1.0 + 1e-12);
    }

    #[test]
    fn coupled_mean_integral_matches_base() {
        let p = Params::from_concentrations(10.0, 10.0).unwrap();
        let cfg = SamplerConfig::tolerance(21, 1e-8).unwrap();
        let n = cfg.length(10.0);
        let draws = cfg.replicate(40_000, |rng, _| {
            let (_, xi) = sample_coupled_hdp_with(rng, &p, &BaseDistribution::Uniform, n);
            xi.integrate_fn(|x| x) + 0.5 * xi.weights().tail_mass()
        });
        let est = Estimate::from_samples(&draws);
        assert!(est.z_score(0.5) < 4.0, "{est:?}");
    }

    #[test]
    fn replicas_independent_of_thread_count() {
        let cfg = SamplerConfig::fixed(8, 20);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| cfg.replicate(64, |rng, _| sample_gem_with(rng, 2.0, 20)))
        };
        assert_eq!(run(1), run(8));
    }

    #[test]
    fn tiny_shapes_stay_finite() {
        let mut rng = SamplerConfig::fixed(1, 0).stream(0);
        for _ in 0..1000 {
            let (w, wc) = sample_beta(&mut rng, 1e-12, 1e-3);
            assert!(w.is_finite() && wc.is_finite());
            assert!((0.0..=1.0).contains(&w));
            assert!((w + wc - 1.0).abs() < 1e-15);
        }
    }
}
