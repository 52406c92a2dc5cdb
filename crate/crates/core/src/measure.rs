//! Measures on `[0, 1]`: base distributions, atomic measures, partitions and
//! the weak-topology surrogate metric.

use rand::Rng;
use serde::Serialize;

use crate::error::{check_positive, Error, Result};
use crate::quad::{self, QuadSettings};
use crate::simplex::{Certified, StickWeights, SubProbVector, SIMPLEX_TOL};
use crate::special::{beta_reg, ln_beta_pdf};
use crate::stats::neumaier_sum;

/// Bounded test functions on `[0, 1]` with known moments under the
/// registered base distributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TestFunction {
    Constant(f64),
    /// `x^k`
    Power(u32),
    /// `cos(k π x)`
    Cosine(u32),
}

impl TestFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TestFunction::Constant(c) => c,
            TestFunction::Power(k) => x.powi(k as i32),
            TestFunction::Cosine(k) => (k as f64 * std::f64::consts::PI * x).cos(),
        }
    }

    pub fn identity() -> Self {
        TestFunction::Power(1)
    }

    pub fn label(&self) -> String {
        match *self {
            TestFunction::Constant(c) => format!("const({c})"),
            TestFunction::Power(k) => format!("x^{k}"),
            TestFunction::Cosine(k) => format!("cos({k}πx)"),
        }
    }
}

/// An indexed family `f_1, f_2, ...` of test functions bounded by one.
pub trait TestFamily {
    /// The `index`-th function, counting from one.
    fn function(&self, index: usize) -> TestFunction;
}

/// `f_1 ≡ 1`, `f_{k+1}(x) = cos(k π x)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct CosineFamily;

impl TestFamily for CosineFamily {
    fn function(&self, index: usize) -> TestFunction {
        assert!(index >= 1, "test families are indexed from 1");
        if index == 1 {
            TestFunction::Constant(1.0)
        } else {
            TestFunction::Cosine(index as u32 - 1)
        }
    }
}

/// Anything that can be integrated against test functions and cut by a
/// partition.
pub trait Measure {
    fn integrate(&self, f: &TestFunction) -> Result<f64>;

    /// `μ([0, t))`.
    fn mass_below(&self, t: f64) -> f64;

    fn total_mass(&self) -> f64;

    /// Locations carrying positive point mass.
    fn atoms(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Mass known to exist but not represented (truncated tails).
    fn unseen_mass(&self) -> f64 {
        0.0
    }

    /// Masses of the partition cells in cut order.
    fn cell_masses(&self, partition: &Partition) -> Vec<f64> {
        let mut prev = 0.0;
        let mut out = Vec::with_capacity(partition.cells());
        for &t in partition.cuts() {
            let below = self.mass_below(t);
            out.push((below - prev).max(0.0));
            prev = below;
        }
        out.push((self.total_mass() - prev).max(0.0));
        out
    }
}

/// The base distribution of the level-one process.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum BaseDistribution {
    Uniform,
    Beta { a: f64, b: f64 },
    FiniteSupport { points: Vec<f64>, masses: Vec<f64> },
}

impl BaseDistribution {
    pub fn beta(a: f64, b: f64) -> Result<Self> {
        check_positive("a", a)?;
        check_positive("b", b)?;
        Ok(BaseDistribution::Beta { a, b })
    }

    pub fn finite_support(points: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if points.len() != masses.len() {
            return Err(Error::Dimension {
                expected: points.len(),
                got: masses.len(),
            });
        }
        if points.is_empty() {
            return Err(Error::Domain("finite support needs at least one point".into()));
        }
        if let Some(x) = points.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::Domain(format!("support point {x} outside [0, 1]")));
        }
        let total = SubProbVector::new(masses.clone())?.total();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Domain(format!("support masses sum to {total}, not 1")));
        }
        Ok(BaseDistribution::FiniteSupport { points, masses })
    }

    /// Point mass at `x`.
    pub fn dirac(x: f64) -> Result<Self> {
        Self::finite_support(vec![x], vec![1.0])
    }

    pub fn name(&self) -> String {
        match self {
            BaseDistribution::Uniform => "uniform".into(),
            BaseDistribution::Beta { a, b } => format!("beta({a},{b})"),
            BaseDistribution::FiniteSupport { points, .. } => format!("finite({} points)", points.len()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            BaseDistribution::Uniform => rng.random::<f64>(),
            BaseDistribution::Beta { a, b } => crate::samplers::sample_beta(rng, *a, *b).0,
            BaseDistribution::FiniteSupport { points, masses } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (x, m) in points.iter().zip(masses) {
                    acc += m;
                    if u < acc {
                        return *x;
                    }
                }
                *points.last().expect("non-empty support")
            }
        }
    }

    /// Exact `(⟨ν₀, f⟩, ⟨ν₀, f²⟩)`.
    pub fn exact_moments(&self, f: &TestFunction) -> Result<(f64, f64)> {
        match (self, *f) {
            (_, TestFunction::Constant(c)) => Ok((c, c * c)),
            (BaseDistribution::Uniform, TestFunction::Power(k)) => {
                Ok((1.0 / (k as f64 + 1.0), 1.0 / (2.0 * k as f64 + 1.0)))
            }
            (BaseDistribution::Uniform, TestFunction::Cosine(0)) => Ok((1.0, 1.0)),
            (BaseDistribution::Uniform, TestFunction::Cosine(_)) => Ok((0.0, 0.5)),
            (BaseDistribution::Beta { a, b }, TestFunction::Power(k)) => {
                let raw = |order: u32| (0..order).map(|j| (a + j as f64) / (a + b + j as f64)).product::<f64>();
                Ok((raw(k), raw(2 * k)))
            }
            (BaseDistribution::FiniteSupport { points, masses }, f) => Ok((
                neumaier_sum(points.iter().zip(masses).map(|(x, m)| m * f.eval(*x))),
                neumaier_sum(points.iter().zip(masses).map(|(x, m)| m * f.eval(*x).powi(2))),
            )),
            (base, _) => Err(Error::UnsupportedBase(base.name())),
        }
    }

    fn quadrature_mean(&self, f: &TestFunction) -> Result<f64> {
        match self {
            BaseDistribution::Beta { a, b } => {
                let settings = QuadSettings {
                    abs_tol: 1e-13,
                    rel_tol: 1e-11,
                    max_intervals: 4000,
                };
                Ok(quad::integrate(|x| ln_beta_pdf(x, *a, *b).exp() * f.eval(x), 0.0, 1.0, settings)?.value)
            }
            _ => Ok(self.exact_moments(f)?.0),
        }
    }
}

impl Measure for BaseDistribution {
    fn integrate(&self, f: &TestFunction) -> Result<f64> {
        match self.exact_moments(f) {
            Ok((mean, _)) => Ok(mean),
            Err(Error::UnsupportedBase(_)) => self.quadrature_mean(f),
            Err(e) => Err(e),
        }
    }

    fn mass_below(&self, t: f64) -> f64 {
        match self {
            BaseDistribution::Uniform => t.clamp(0.0, 1.0),
            BaseDistribution::Beta { a, b } => beta_reg(*a, *b, t.clamp(0.0, 1.0)),
            BaseDistribution::FiniteSupport { points, masses } => {
                neumaier_sum(points.iter().zip(masses).filter(|(x, _)| **x < t).map(|(_, m)| *m))
            }
        }
    }

    fn total_mass(&self) -> f64 {
        1.0
    }

    fn atoms(&self) -> Vec<f64> {
        match self {
            BaseDistribution::FiniteSupport { points, masses } => points
                .iter()
                .zip(masses)
                .filter(|(_, m)| **m > 0.0)
                .map(|(x, _)| *x)
                .collect(),
            _ => Vec::new(),
        }
    }
}

/// `Σ wᵢ δ_{xᵢ}` with atoms in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteMeasure {
    atoms: Vec<f64>,
    weights: StickWeights,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<f64>, weights: StickWeights) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::Dimension {
                expected: atoms.len(),
                got: weights.len(),
            });
        }
        if let Some(x) = atoms.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::Domain(format!("atom {x} outside [0, 1]")));
        }
        Ok(Self { atoms, weights })
    }

    /// Finitely supported measure from `(location, mass)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        let (atoms, weights): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
        Self::new(atoms, StickWeights::finite(weights)?)
    }

    pub fn locations(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &StickWeights {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `Σ wᵢ f(xᵢ)` over the represented atoms.
    pub fn integrate_fn(&self, f: impl Fn(f64) -> f64) -> f64 {
        neumaier_sum(self.atoms.iter().zip(self.weights.prefix()).map(|(x, w)| w * f(*x)))
    }
}

impl Measure for DiscreteMeasure {
    fn integrate(&self, f: &TestFunction) -> Result<f64> {
        Ok(self.integrate_fn(|x| f.eval(x)))
    }

    fn mass_below(&self, t: f64) -> f64 {
        neumaier_sum(
            self.atoms
                .iter()
                .zip(self.weights.prefix())
                .filter(|(x, _)| **x < t)
                .map(|(_, w)| *w),
        )
    }

    fn total_mass(&self) -> f64 {
        self.weights.total()
    }

    fn atoms(&self) -> Vec<f64> {
        self.atoms
            .iter()
            .zip(self.weights.prefix())
            .filter(|(_, w)| **w > 0.0)
            .map(|(x, _)| *x)
            .collect()
    }

    fn unseen_mass(&self) -> f64 {
        self.weights.unseen_mass()
    }

    fn cell_masses(&self, partition: &Partition) -> Vec<f64> {
        let mut cells = vec![crate::stats::NeumaierSum::default(); partition.cells()];
        for (x, w) in self.atoms.iter().zip(self.weights.prefix()) {
            cells[partition.cell_of(*x)].add(*w);
        }
        cells.iter().map(|c| c.sum()).collect()
    }
}

/// Cut points `0 < t₁ < … < t_{m-1} < 1` inducing the cells
/// `[0, t₁), [t₁, t₂), …, [t_{m-1}, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    cuts: Vec<f64>,
}

/// Offset applied to a cut point that lands on an atom.
pub const CUT_NUDGE: f64 = 1e-9;

impl Partition {
    pub fn new(cuts: Vec<f64>) -> Result<Self> {
        if let Some(t) = cuts.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(Error::Domain(format!("cut {t} outside (0, 1)")));
        }
        if cuts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("cuts must be strictly increasing".into()));
        }
        Ok(Self { cuts })
    }

    /// The trivial one-cell partition.
    pub fn whole() -> Self {
        Self { cuts: Vec::new() }
    }

    /// Cuts at `k / 2^level`, each shifted right by [`CUT_NUDGE`] until it
    /// carries no atom from `avoid`. The shift depends only on the cut value,
    /// so dyadic levels stay nested.
    pub fn dyadic(level: u32, avoid: &[f64]) -> Self {
        let n = 1u64 << level;
        let cuts = (1..n)
            .map(|k| {
                let mut t = k as f64 / n as f64;
                while avoid.iter().any(|x| (x - t).abs() < 0.5 * CUT_NUDGE) {
                    t += CUT_NUDGE;
                }
                t
            })
            .collect();
        Self { cuts }
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    /// Number of cells `|π|`.
    pub fn cells(&self) -> usize {
        self.cuts.len() + 1
    }

    /// Index of the cell containing `x`.
    pub fn cell_of(&self, x: f64) -> usize {
        self.cuts.partition_point(|t| *t <= x)
    }

    /// Merges cell `k` with cell `k + 1` by removing cut `k`.
    pub fn merge_cells(&self, k: usize) -> Result<Self> {
        if k >= self.cuts.len() {
            return Err(Error::Size {
                got: k,
                max: self.cuts.len().saturating_sub(1),
            });
        }
        let mut cuts = self.cuts.clone();
        cuts.remove(k);
        Ok(Self { cuts })
    }

    pub fn apply(&self, mu: &(impl Measure + ?Sized)) -> SubProbVector {
        let masses = mu.cell_masses(self);
        SubProbVector::new(masses).expect("cell masses of a sub-probability measure")
    }
}

/// `π(μ)`: the vector of cell masses.
pub fn apply_partition(pi: &Partition, mu: &(impl Measure + ?Sized)) -> SubProbVector {
    pi.apply(mu)
}

/// Truncated weak-topology surrogate `Σ_{i ≤ F} (|⟨μ - ν, fᵢ⟩| ∧ 1) / 2^i`.
///
/// Omitted terms contribute at most `2^-F`; represented-but-truncated mass in
/// either measure adds at most its size to each term's argument.
pub fn metric_rho(
    mu: &(impl Measure + ?Sized),
    nu: &(impl Measure + ?Sized),
    family: &impl TestFamily,
    terms: usize,
) -> Result<Certified> {
    if terms == 0 {
        return Err(Error::Size { got: 0, max: 0 });
    }
    let mut weight = 1.0;
    let mut parts = Vec::with_capacity(terms);
    for i in 1..=terms {
        weight *= 0.5;
        let f = family.function(i);
        let diff = mu.integrate(&f)? - nu.integrate(&f)?;
        parts.push(diff.abs().min(1.0) * weight);
    }
    let truncation = 0.5f64.powi(terms as i32);
    let unseen = (mu.unseen_mass() + nu.unseen_mass()).min(1.0);
    Ok(Certified {
        value: neumaier_sum(parts),
        error_bound: truncation + unseen * (1.0 - truncation),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn partition_of_uniform() {
        let half = Partition::new(vec![0.5]).unwrap();
        assert_eq!(half.apply(&BaseDistribution::Uniform).entries(), &[0.5, 0.5]);
        let p = Partition::new(vec![0.2, 0.7]).unwrap().apply(&BaseDistribution::Uniform);
        for (got, want) in p.entries().iter().zip([0.2, 0.5, 0.3]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn partition_of_point_mass() {
        let half = Partition::new(vec![0.5]).unwrap();
        let dirac = BaseDistribution::dirac(0.3).unwrap();
        assert_eq!(half.apply(&dirac).entries(), &[1.0, 0.0]);
        let atomic = DiscreteMeasure::from_pairs(&[(0.3, 1.0)]).unwrap();
        assert_eq!(half.apply(&atomic).entries(), &[1.0, 0.0]);
    }

    #[test]
    fn cells_are_left_closed() {
        let pi = Partition::new(vec![0.5]).unwrap();
        let mu = DiscreteMeasure::from_pairs(&[(0.5, 0.25), (1.0, 0.75)]).unwrap();
        assert_eq!(pi.apply(&mu).entries(), &[0.0, 1.0]);
        assert_eq!(pi.cell_of(0.0), 0);
        assert_eq!(pi.cell_of(1.0), 1);
    }

    #[test]
    fn dyadic_nudges_off_atoms_and_nests() {
        let pi = Partition::dyadic(2, &[0.5]);
        assert_eq!(pi.cuts(), &[0.25, 0.5 + CUT_NUDGE, 0.75]);
        let coarse = Partition::dyadic(1, &[0.5]);
        assert!(pi.cuts().contains(&coarse.cuts()[0]));
    }

    #[test]
    fn partition_rejects_bad_cuts() {
        assert!(Partition::new(vec![0.5, 0.5]).is_err());
        assert!(Partition::new(vec![0.0]).is_err());
        assert!(Partition::new(vec![0.7, 0.2]).is_err());
    }

    #[test]
    fn rho_single_term() {
        let mu = DiscreteMeasure::from_pairs(&[(0.0, 1.0)]).unwrap();
        let r = metric_rho(&mu, &mu, &CosineFamily, 10).unwrap();
        assert_eq!(r.value, 0.0);
        assert!((r.error_bound - 2f64.powi(-10)).abs() < 1e-18);

        struct Shifted;
        impl TestFamily for Shifted {
            fn function(&self, _: usize) -> TestFunction {
                TestFunction::Power(1)
            }
        }
        let a = DiscreteMeasure::from_pairs(&[(0.4, 1.0)]).unwrap();
        let b = DiscreteMeasure::from_pairs(&[(0.0, 1.0)]).unwrap();
        assert!((metric_rho(&a, &b, &Shifted, 1).unwrap().value - 0.2).abs() < 1e-15);
    }

    #[test]
    fn rho_point_masses_at_ends() {
        let at0 = DiscreteMeasure::from_pairs(&[(0.0, 1.0)]).unwrap();
        let at1 = BaseDistribution::dirac(1.0).unwrap();
        let got = metric_rho(&at0, &at1, &CosineFamily, 8).unwrap().value;
        // Direct summation: f_1 ≡ 1 cancels; f_{k+1} = cos(kπx) differs by 1 - (-1)^k.
        let mut direct = 0.0;
        for i in 1..=8 {
            let f = CosineFamily.function(i);
            let diff: f64 = f.eval(0.0) - f.eval(1.0);
            direct += diff.abs().min(1.0) / 2f64.powi(i as i32);
        }
        assert!(got > 0.0);
        assert!((got - direct).abs() < 1e-15);
        assert!((got - 0.33203125).abs() < 1e-15);
    }

    #[test]
    fn rho_against_beta_base_uses_quadrature() {
        let base = BaseDistribution::beta(2.0, 3.0).unwrap();
        // Midpoint-rule oracle for ∫ cos(πx) 12x(1-x)² dx.
        let n = 200_000;
        let mid: f64 = (0..n)
            .map(|i| {
                let x = (i as f64 + 0.5) / n as f64;
                12.0 * x * (1.0 - x).powi(2) * (std::f64::consts::PI * x).cos()
            })
            .sum::<f64>()
            / n as f64;
        let got = base.integrate(&TestFunction::Cosine(1)).unwrap();
        assert!((got - mid).abs() < 1e-9);
        assert_eq!(
            base.exact_moments(&TestFunction::Cosine(1)),
            Err(Error::UnsupportedBase("beta(2,3)".into()))
        );
    }

    #[test]
    fn beta_base_moments() {
        let base = BaseDistribution::beta(2.0, 3.0).unwrap();
        let (m1, m2) = base.exact_moments(&TestFunction::identity()).unwrap();
        assert!((m1 - 0.4).abs() < 1e-15);
        assert!((m2 - 0.2).abs() < 1e-15);
    }

    #[test]
    fn finite_support_validation() {
        assert!(BaseDistribution::finite_support(vec![0.1, 0.2], vec![0.5, 0.4]).is_err());
        assert!(BaseDistribution::finite_support(vec![0.1, 1.2], vec![0.5, 0.5]).is_err());
        assert!(BaseDistribution::finite_support(vec![0.1, 0.2], vec![0.5, 0.5]).is_ok());
    }

    proptest! {
        #[test]
        fn merging_cells_adds_masses(
            pairs in prop::collection::vec((0.0f64..=1.0, 0.0f64..1.0), 1..20),
            level in 1u32..5,
            pick in 0usize..64,
        ) {
            let total: f64 = pairs.iter().map(|p| p.1).sum();
            let pairs: Vec<(f64, f64)> = pairs.iter().map(|&(x, w)| (x, w / total.max(1.0))).collect();
            let mu = DiscreteMeasure::from_pairs(&pairs).unwrap();
            let fine = Partition::dyadic(level, &[]);
            let k = pick % fine.cuts().len();
            let coarse = fine.merge_cells(k).unwrap();
            let f = fine.apply(&mu).into_vec();
            let c = coarse.apply(&mu).into_vec();
            prop_assert!((c[k] - (f[k] + f[k + 1])).abs() < 1e-14);
            prop_assert!((neumaier_sum(f.iter().copied()) - mu.total_mass()).abs() < 1e-14);

            let u = fine.apply(&BaseDistribution::Uniform).into_vec();
            let uc = coarse.apply(&BaseDistribution::Uniform).into_vec();
            prop_assert!((uc[k] - (u[k] + u[k + 1])).abs() < 1e-15);
        }
    }
}
