use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::{Error, Result};
use crate::concentration::McRng;
use crate::dist::WeightVector;
use crate::gap::SymmetricGAP;
use crate::num::{self, Rational};

#[derive(Debug, Clone, PartialEq)]
pub struct PlantSpec {
    /// Ground-truth generators; `None` draws `rank` random ones with
    /// coordinates in `[1, 10)` on a grid of `1/1000`.
    pub generators: Option<Vec<Vec<Rational>>>,
    pub rank: usize,
    /// Integer limits of the ground truth, one per generator.
    pub limits: Vec<u64>,
    pub n: usize,
    pub d: usize,
    pub noise: f64,
    pub outlier_fraction: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedInstance {
    pub a: WeightVector,
    pub truth: SymmetricGAP,
    pub noise: f64,
    pub seed: u64,
    pub outlier_fraction: f64,
    /// 0-based indices of the outlier entries, sorted.
    pub outliers: Vec<usize>,
}

/// A deterministic instance: `n − ⌈f n⌉` entries are uniform points of the
/// ground-truth progression plus uniform noise in `[−noise, noise]^d`, the
/// other `⌈f n⌉` sit at least ten diameters away from it.
pub fn plant(spec: &PlantSpec) -> Result<PlantedInstance> {
    if !(0.0..1.0).contains(&spec.outlier_fraction) {
        return Err(Error::DegenerateSpec(format!(
            "outlier fraction {} outside [0, 1)",
            spec.outlier_fraction
        )));
    }
    if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
        return Err(Error::DegenerateSpec(format!("noise {} is not a finite nonnegative number", spec.noise)));
    }
    if spec.n == 0 || spec.d == 0 {
        return Err(Error::DegenerateSpec("n and d must be positive".into()));
    }
    let mut rng = McRng::seed_from_u64(spec.seed);
    let generators = match &spec.generators {
        Some(g) => g.clone(),
        None => (0..spec.rank)
            .map(|_| {
                (0..spec.d)
                    .map(|_| Rational::new(BigInt::from(rng.random_range(1000..10_000)), BigInt::from(1000)))
                    .collect()
            })
            .collect(),
    };
    if generators.len() != spec.limits.len() {
        return Err(Error::DegenerateSpec(format!(
            "{} generators but {} limits",
            generators.len(),
            spec.limits.len()
        )));
    }
    if generators.iter().any(|g| g.len() != spec.d) {
        return Err(Error::DegenerateSpec("generator dimension differs from d".into()));
    }
    if generators.iter().all(|g| g.iter().all(Zero::is_zero)) || spec.limits.iter().all(|&l| l == 0) {
        return Err(Error::DegenerateSpec("the ground truth is the single point 0".into()));
    }
    let truth = SymmetricGAP::new(
        generators.clone(),
        spec.limits.iter().map(|&l| Rational::from_integer(l.into())).collect(),
    )?;

    // half-width of the bounding box of the progression, per coordinate
    let radius: Vec<f64> = (0..spec.d)
        .map(|i| {
            generators
                .iter()
                .zip(&spec.limits)
                .map(|(g, &l)| num::to_f64(&g[i].abs()) * l as f64)
                .sum()
        })
        .collect();
    let diameter = 2.0 * radius.iter().cloned().fold(0.0, f64::max);

    let k = (spec.outlier_fraction * spec.n as f64).ceil() as usize;
    let mut outliers = sample(&mut rng, spec.n, k).into_vec();
    outliers.sort_unstable();

    let mut entries = Vec::with_capacity(spec.n);
    for idx in 0..spec.n {
        if outliers.binary_search(&idx).is_ok() {
            // one coordinate pushed out beyond ten diameters, the rest free
            let far = rng.random_range(0..spec.d);
            let entry = (0..spec.d)
                .map(|i| {
                    let span = radius[i] + 10.0 * diameter;
                    let x = if i == far {
                        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                        sign * (span + diameter * (1.0 + rng.random::<f64>()))
                    } else {
                        rng.random_range(-span..=span)
                    };
                    num::r(x)
                })
                .collect();
            entries.push(entry);
            continue;
        }
        let mut point = vec![Rational::zero(); spec.d];
        for (g, &l) in generators.iter().zip(&spec.limits) {
            let m = rng.random_range(-(l as i64)..=l as i64);
            if m != 0 {
                let m = Rational::from_integer(m.into());
                for (p, gi) in point.iter_mut().zip(g) {
                    *p += &m * gi;
                }
            }
        }
        if spec.noise > 0.0 {
            for p in point.iter_mut() {
                *p += num::r(rng.random_range(-spec.noise..=spec.noise));
            }
        }
        entries.push(point);
    }
    let a = WeightVector::new(spec.d, entries)?;
    Ok(PlantedInstance {
        a,
        truth,
        noise: spec.noise,
        seed: spec.seed,
        outlier_fraction: spec.outlier_fraction,
        outliers,
    })
}
