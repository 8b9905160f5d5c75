//! The symmetric infinitely divisible law `H^λ` with characteristic function
//!
//! ```text
//! Ĥ^λ(t) = exp(−(λ/2) Σ_k (1 − cos⟨t, a_k⟩))
//! ```
//!
//! and Lévy measure `(λ/4)·M*`. It is a compound Poisson law: each `±a_k`
//! jumps with independent `Poisson(λ/4)` multiplicity, so `H^λ` is the law of
//! `Σ_k D_k a_k` with `D_k` i.i.d. Skellam(λ/4, λ/4).

mod atom;
mod esseen;
mod lemma;

use num_traits::{Signed, Zero};
use rand_distr::{Distribution, Poisson};

pub use atom::{mass_at_zero, ZeroMass, ZeroMassConfig, ZeroMassMethod};
pub use esseen::{esseen_integral, EsseenBound, EsseenConfig};
pub use lemma::{eq11366_report, lemma1_rhs, q_smoothing, LemmaConfig, SmoothingQ};

use crate::concentration::{self, McRng, Sampler};
use crate::dist::{self, WeightVector};
use crate::num::{self, Rational};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("intensity {0} is negative")]
    NegativeIntensity(f64),
    #[error("{name} must be positive (got {value})")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be nonnegative (got {value})")]
    Negative { name: &'static str, value: f64 },
    #[error("quadrature did not reach tolerance {tol:e} within {intervals} intervals")]
    QuadratureBudget { tol: f64, intervals: usize },
    #[error("enumeration of jump combinations exceeds {budget} states")]
    EnumerationBudget { budget: usize },
    #[error("jump positions do not fit in 128-bit integers")]
    Overflow,
    #[error("operation needs a one-dimensional law, got d = {0}")]
    NotOneDimensional(usize),
    #[error(transparent)]
    Dist(#[from] dist::Error),
    #[error(transparent)]
    Concentration(#[from] concentration::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// `H^λ` for a coefficient vector `a` and intensity `λ ≥ 0`.
#[derive(Debug, Clone)]
pub struct SmoothingLaw {
    weights: WeightVector,
    intensity: Rational,
    coeffs: Vec<Vec<f64>>,
}

impl SmoothingLaw {
    pub fn new(weights: WeightVector, intensity: Rational) -> Result<Self> {
        if intensity.is_negative() {
            return Err(Error::NegativeIntensity(num::to_f64(&intensity)));
        }
        let coeffs = weights.to_f64_entries();
        Ok(SmoothingLaw {
            weights,
            intensity,
            coeffs,
        })
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn intensity(&self) -> &Rational {
        &self.intensity
    }

    pub fn dim(&self) -> usize {
        self.weights.dim()
    }

    /// Poisson rate of each signed jump `±a_k`.
    pub fn jump_rate(&self) -> f64 {
        num::to_f64(&self.intensity) / 4.0
    }

    /// `Ĥ^λ(t)`.
    pub fn cf(&self, t: &[f64]) -> f64 {
        let lambda = num::to_f64(&self.intensity);
        let s: f64 = self
            .coeffs
            .iter()
            .map(|a| 1.0 - a.iter().zip(t).map(|(x, y)| x * y).sum::<f64>().cos())
            .sum();
        (-0.5 * lambda * s).exp()
    }

    /// `(λ/2) Σ ‖a_k‖²`, the second moment `E‖Y‖²` of `Y ~ H^λ`.
    pub fn second_moment(&self) -> f64 {
        let norm2: f64 = self.coeffs.iter().flatten().map(|x| x * x).sum();
        0.5 * num::to_f64(&self.intensity) * norm2
    }

    /// One draw, seeded.
    pub fn sample_seeded(&self, seed: u64) -> Vec<f64> {
        use rand::SeedableRng;
        let mut rng = McRng::seed_from_u64(seed);
        let mut out = vec![0.0; self.dim()];
        self.sample_into(&mut rng, &mut out);
        out
    }
}

impl Sampler for SmoothingLaw {
    fn dim(&self) -> usize {
        self.weights.dim()
    }

    fn is_atomic(&self) -> bool {
        true
    }

    fn sample_into(&self, rng: &mut McRng, out: &mut [f64]) {
        out.fill(0.0);
        if self.intensity.is_zero() {
            return;
        }
        let poisson = Poisson::new(self.jump_rate()).expect("positive finite rate");
        for a in &self.coeffs {
            let jumps = poisson.sample(rng) - poisson.sample(rng);
            if jumps != 0.0 {
                for (o, x) in out.iter_mut().zip(a) {
                    *o += jumps * x;
                }
            }
        }
    }
}

/// `Ĥ^λ(t)`.
pub fn h_cf(law: &SmoothingLaw, t: &[f64]) -> f64 {
    law.cf(t)
}

/// One seeded draw from `H^λ`.
pub fn sample_h(law: &SmoothingLaw, seed: u64) -> Vec<f64> {
    law.sample_seeded(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concentration::mc::draw;
    use crate::num::{int, r};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn law(xs: &[f64], lambda: f64) -> SmoothingLaw {
        SmoothingLaw::new(WeightVector::from_f64s(xs).unwrap(), r(lambda)).unwrap()
    }

    #[test]
    fn cf_examples() {
        let h = law(&[1.0, 2.5, -3.0], 1.7);
        assert_eq!(h.cf(&[0.0]), 1.0);
        assert!((law(&[1.0], 2.0).cf(&[PI]) - (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(law(&[1.0, 2.0], 0.0).cf(&[0.3]), 1.0);
        assert!(SmoothingLaw::new(WeightVector::ones(1).unwrap(), int(-1)).is_err());
    }

    #[test]
    fn zero_intensity_never_jumps() {
        let h = law(&[1.0, 2.0], 0.0);
        for seed in 0..20 {
            assert_eq!(h.sample_seeded(seed), vec![0.0]);
        }
    }

    #[test]
    fn empirical_cf_mean_and_second_moment() {
        let h = law(&[1.0, 0.5, 2.0, -1.5], 1.3);
        let n = 100_000;
        let xs = draw(&h, n, 2024);
        let nf = n as f64;
        for k in 0..10 {
            let t = 0.2 + 0.37 * k as f64;
            let emp = xs.iter().map(|x| (t * x).cos()).sum::<f64>() / nf;
            assert!((emp - h.cf(&[t])).abs() <= 3.0 / nf.sqrt(), "t = {t}");
        }
        let mean = xs.iter().sum::<f64>() / nf;
        let m2 = xs.iter().map(|x| x * x).sum::<f64>() / nf;
        let sd = (m2 - mean * mean).sqrt();
        assert!(mean.abs() <= 3.0 * sd / nf.sqrt());
        let m4 = xs.iter().map(|x| x.powi(4)).sum::<f64>() / nf;
        let se2 = ((m4 - m2 * m2) / nf).sqrt();
        assert!((m2 - h.second_moment()).abs() <= 3.0 * se2);
    }

    proptest! {
        #[test]
        fn cf_is_even_bounded_and_multiplicative(
            xs in prop::collection::vec(-5.0f64..5.0, 1..6),
            l1 in 0.0f64..3.0,
            l2 in 0.0f64..3.0,
            t in -10.0f64..10.0,
        ) {
            prop_assume!(xs.iter().any(|&x| x != 0.0));
            let h1 = law(&xs, l1);
            let h2 = law(&xs, l2);
            let h12 = law(&xs, l1 + l2);
            let v = h1.cf(&[t]);
            prop_assert!(v > 0.0 && v <= 1.0);
            prop_assert!((v - h1.cf(&[-t])).abs() < 1e-15);
            prop_assert!((h12.cf(&[t]) - v * h2.cf(&[t])).abs() < 1e-12);
        }
    }
}
