use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use super::mc::{McRng, Sampler};
use crate::dist::{DiscreteDist, WeightVector};
use crate::num;

/// Draws from a finitely supported law (atoms may be points of `Rᵈ`).
#[derive(Debug, Clone)]
pub struct DiscreteSampler {
    points: Vec<Vec<f64>>,
    index: WeightedIndex<f64>,
}

impl DiscreteSampler {
    pub fn new(dist: &DiscreteDist) -> Self {
        Self::from_points(
            dist.atoms().iter().map(|x| vec![num::to_f64(x)]).collect(),
            dist.weights().iter().map(num::to_f64).collect(),
        )
    }

    pub fn from_points(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Self {
        assert!(!points.is_empty(), "sampler needs at least one atom");
        DiscreteSampler {
            index: WeightedIndex::new(&weights).expect("positive finite weights"),
            points,
        }
    }

    fn pick(&self, rng: &mut McRng) -> &[f64] {
        &self.points[self.index.sample(rng)]
    }
}

impl Sampler for DiscreteSampler {
    fn dim(&self) -> usize {
        self.points[0].len()
    }

    fn is_atomic(&self) -> bool {
        true
    }

    fn sample_into(&self, rng: &mut McRng, out: &mut [f64]) {
        out.copy_from_slice(self.pick(rng));
    }
}

/// Draws `S_a = Σ X_k a_k` with i.i.d. `X_k`.
#[derive(Debug, Clone)]
pub struct WeightedSumSampler {
    coeffs: Vec<Vec<f64>>,
    base: DiscreteSampler,
}

impl WeightedSumSampler {
    pub fn new(a: &WeightVector, dist: &DiscreteDist) -> Self {
        WeightedSumSampler {
            coeffs: a.to_f64_entries(),
            base: DiscreteSampler::new(dist),
        }
    }
}

impl Sampler for WeightedSumSampler {
    fn dim(&self) -> usize {
        self.coeffs[0].len()
    }

    fn is_atomic(&self) -> bool {
        true
    }

    fn sample_into(&self, rng: &mut McRng, out: &mut [f64]) {
        out.fill(0.0);
        for a in &self.coeffs {
            let x = self.base.pick(rng)[0];
            for (o, ai) in out.iter_mut().zip(a) {
                *o += x * ai;
            }
        }
    }
}

/// Uniform law on an axis-aligned box.
#[derive(Debug, Clone)]
pub struct UniformBoxSampler {
    sides: Vec<(f64, f64)>,
}

impl UniformBoxSampler {
    pub fn new(sides: Vec<(f64, f64)>) -> Self {
        assert!(!sides.is_empty());
        UniformBoxSampler { sides }
    }
}

impl Sampler for UniformBoxSampler {
    fn dim(&self) -> usize {
        self.sides.len()
    }

    fn sample_into(&self, rng: &mut McRng, out: &mut [f64]) {
        for (o, &(lo, hi)) in out.iter_mut().zip(&self.sides) {
            *o = lo + (hi - lo) * rng.random::<f64>();
        }
    }
}
