//! The atom `H^λ{0}`.
//!
//! Coefficients that are equal up to sign are merged first: a sum of `c`
//! i.i.d. Skellam(μ, μ) variables is Skellam(cμ, cμ), and the law is
//! symmetric, so `±v` repeated `c` times acts as one jump direction with rate
//! `cμ`. Each merged Skellam law is truncated at a radius whose Poisson tail
//! is certified below the tolerance, and the zero-sum probability of the
//! truncated jump combinations is found by meeting in the middle.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use super::{Error, Result, SmoothingLaw};
use crate::concentration::{substream_seed, MCConfig, McRng};
use crate::num::{self, Rational};

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroMassConfig {
    /// Bound on the probability mass dropped by truncation.
    pub tol: f64,
    /// Largest number of partial sums held by either half of the enumeration.
    pub budget: usize,
    /// Monte Carlo fallback when the enumeration exceeds `budget`.
    pub mc: Option<MCConfig>,
}

impl Default for ZeroMassConfig {
    fn default() -> Self {
        ZeroMassConfig {
            tol: 1e-10,
            budget: 1 << 20,
            mc: Some(MCConfig::default()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroMassMethod {
    Exact,
    Enumeration,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroMass {
    pub value: f64,
    /// For enumeration the true atom lies in `[value, value + truncated_mass]`.
    pub truncated_mass: f64,
    pub stderr: f64,
    pub method: ZeroMassMethod,
    /// Merged jump directions and their truncation radii.
    pub directions: usize,
    pub radii: Vec<u64>,
}

pub fn mass_at_zero(law: &SmoothingLaw, cfg: &ZeroMassConfig) -> Result<ZeroMass> {
    if !(cfg.tol > 0.0) {
        return Err(Error::NonPositive {
            name: "tol",
            value: cfg.tol,
        });
    }
    let groups = merge_directions(law);
    if law.intensity().is_zero() || groups.is_empty() {
        return Ok(ZeroMass {
            value: 1.0,
            truncated_mass: 0.0,
            stderr: 0.0,
            method: ZeroMassMethod::Exact,
            directions: groups.len(),
            radii: Vec::new(),
        });
    }
    let mu = law.jump_rate();
    let (vectors, rates) = scale_to_integers(&groups, mu)?;

    // each direction loses at most 2·P(Poisson > R), so the total is below tol
    let target = cfg.tol / (2 * rates.len()) as f64;
    let radii: Vec<u64> = rates.iter().map(|&m| truncation_radius(m, target)).collect();
    let truncated_mass: f64 = rates
        .iter()
        .zip(&radii)
        .map(|(&m, &r)| 2.0 * poisson_tail_bound(m, r + 1))
        .sum();
    for (v, &r) in vectors.iter().zip(&radii) {
        let reach = v.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0);
        let worst = reach
            .checked_mul(r as u128)
            .and_then(|x| x.checked_mul(rates.len() as u128));
        if worst.map_or(true, |x| x > i128::MAX as u128) {
            return Err(Error::Overflow);
        }
    }

    match enumerate(&vectors, &rates, &radii, cfg.budget) {
        Ok(value) => Ok(ZeroMass {
            value,
            truncated_mass,
            stderr: 0.0,
            method: ZeroMassMethod::Enumeration,
            directions: vectors.len(),
            radii,
        }),
        Err(Error::EnumerationBudget { budget }) => {
            let Some(mc) = &cfg.mc else {
                return Err(Error::EnumerationBudget { budget });
            };
            let (value, stderr) = monte_carlo(&vectors, &rates, mc)?;
            Ok(ZeroMass {
                value,
                truncated_mass: 0.0,
                stderr,
                method: ZeroMassMethod::MonteCarlo,
                directions: vectors.len(),
                radii: Vec::new(),
            })
        }
        Err(e) => Err(e),
    }
}

/// Nonzero coefficients with sign normalized (first nonzero coordinate
/// positive), with multiplicities.
fn merge_directions(law: &SmoothingLaw) -> Vec<(Vec<Rational>, u64)> {
    let mut groups: BTreeMap<Vec<Rational>, u64> = BTreeMap::new();
    for a in law.weights().entries() {
        let Some(lead) = a.iter().find(|x| !x.is_zero()) else {
            continue;
        };
        let v = if lead.is_negative() {
            a.iter().map(|x| -x).collect()
        } else {
            a.to_vec()
        };
        *groups.entry(v).or_default() += 1;
    }
    groups.into_iter().collect()
}

fn scale_to_integers(groups: &[(Vec<Rational>, u64)], mu: f64) -> Result<(Vec<Vec<i128>>, Vec<f64>)> {
    let lcm = num::lcm_of_denominators(groups.iter().flat_map(|(v, _)| v.iter()));
    let scale = Rational::from_integer(lcm);
    let mut vectors = Vec::with_capacity(groups.len());
    for (v, _) in groups {
        let ints: Option<Vec<i128>> = v
            .iter()
            .map(|x| {
                let y: BigInt = (x * &scale).to_integer();
                y.to_i128()
            })
            .collect();
        vectors.push(ints.ok_or(Error::Overflow)?);
    }
    let rates = groups.iter().map(|(_, c)| *c as f64 * mu).collect();
    Ok((vectors, rates))
}

/// Chernoff bound `P(N ≥ k) ≤ e^{−μ}(eμ/k)^k` for `N ~ Poisson(μ)`, `k > μ`.
pub(crate) fn poisson_tail_bound(mu: f64, k: u64) -> f64 {
    let k = k as f64;
    if k <= mu {
        return 1.0;
    }
    (-mu + k * (1.0 + mu.ln() - k.ln())).exp().min(1.0)
}

/// Smallest `R ≥ ⌊μ⌋` with `P(N > R) < target`.
pub(crate) fn truncation_radius(mu: f64, target: f64) -> u64 {
    let mut r = mu.floor() as u64;
    while poisson_tail_bound(mu, r + 1) >= target {
        r += 1;
    }
    r
}

/// `P(D = j)` for `D ~ Skellam(μ, μ)` restricted to `N⁺, N⁻ ≤ R`, `j = 0..=R`.
fn truncated_skellam(mu: f64, radius: u64) -> Vec<f64> {
    let r = radius as usize;
    let mut log_p = Vec::with_capacity(r + 1);
    let ln_mu = mu.ln();
    let mut acc = -mu;
    for i in 0..=r {
        if i > 0 {
            acc += ln_mu - (i as f64).ln();
        }
        log_p.push(acc);
    }
    (0..=r)
        .map(|j| (0..=r - j).map(|i| (log_p[i] + log_p[i + j]).exp()).sum())
        .collect()
}

type HalfLaw = BTreeMap<Vec<i128>, f64>;

fn enumerate(vectors: &[Vec<i128>], rates: &[f64], radii: &[u64], budget: usize) -> Result<f64> {
    // balance the halves by the log of their support bounds
    let mut order: Vec<usize> = (0..vectors.len()).collect();
    order.sort_by(|&i, &j| radii[j].cmp(&radii[i]).then(i.cmp(&j)));
    let (mut left, mut right) = (Vec::new(), Vec::new());
    let (mut wl, mut wr) = (0.0f64, 0.0f64);
    for g in order {
        let w = ((2 * radii[g] + 1) as f64).ln();
        if wl <= wr {
            left.push(g);
            wl += w;
        } else {
            right.push(g);
            wr += w;
        }
    }
    let d = vectors[0].len();
    let half = |idx: &[usize]| -> Result<HalfLaw> {
        let mut law: HalfLaw = BTreeMap::from([(vec![0; d], 1.0)]);
        for &g in idx {
            let pmf = truncated_skellam(rates[g], radii[g]);
            let mut next: HalfLaw = BTreeMap::new();
            for (x, p) in &law {
                for (j, &s) in pmf.iter().enumerate() {
                    for sign in [1i128, -1] {
                        if j == 0 && sign < 0 {
                            continue;
                        }
                        let step = sign * j as i128;
                        let y: Vec<i128> = x.iter().zip(&vectors[g]).map(|(a, v)| a + step * v).collect();
                        *next.entry(y).or_default() += p * s;
                    }
                }
                if next.len() > budget {
                    return Err(Error::EnumerationBudget { budget });
                }
            }
            law = next;
        }
        Ok(law)
    };
    let a = half(&left)?;
    let b = half(&right)?;
    // both halves are symmetric, so P_B(−x) = P_B(x)
    Ok(a.iter().filter_map(|(x, p)| b.get(x).map(|q| p * q)).sum())
}

fn monte_carlo(vectors: &[Vec<i128>], rates: &[f64], cfg: &MCConfig) -> Result<(f64, f64)> {
    if cfg.sample_count == 0 {
        return Err(crate::concentration::Error::NoSamples.into());
    }
    let poissons: Vec<Poisson<f64>> = rates
        .iter()
        .map(|&m| Poisson::new(m).expect("positive finite rate"))
        .collect();
    let chunk = 4096;
    let chunks = cfg.sample_count.div_ceil(chunk);
    let d = vectors[0].len();
    let hits: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = McRng::seed_from_u64(substream_seed(cfg.seed, c as u64));
            let n = chunk.min(cfg.sample_count - c * chunk);
            let mut pos = vec![0i128; d];
            let mut hits = 0;
            for _ in 0..n {
                pos.fill(0);
                for (v, p) in vectors.iter().zip(&poissons) {
                    let k = p.sample(&mut rng) as i128 - p.sample(&mut rng) as i128;
                    if k != 0 {
                        for (x, vi) in pos.iter_mut().zip(v) {
                            *x += k * vi;
                        }
                    }
                }
                if pos.iter().all(|x| *x == 0) {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    let n = cfg.sample_count as f64;
    let smoothed = (hits as f64 + 0.5) / (n + 1.0);
    Ok((hits as f64 / n, (smoothed * (1.0 - smoothed) / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::WeightVector;
    use crate::num::{int, r};

    fn law(xs: &[f64], lambda: f64) -> SmoothingLaw {
        SmoothingLaw::new(WeightVector::from_f64s(xs).unwrap(), r(lambda)).unwrap()
    }

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// `P(D = j)` for Skellam(1, 1): `e^{−2} Σ_m 1/(m!(m+|j|)!)`.
    fn skellam_unit(j: i32) -> f64 {
        let j = j.unsigned_abs();
        (0..40).map(|m| 1.0 / (factorial(m) * factorial(m + j))).sum::<f64>() * (-2.0f64).exp()
    }

    #[test]
    fn single_unit_weight_is_bessel_series() {
        let z = mass_at_zero(&law(&[1.0], 4.0), &Default::default()).unwrap();
        let series = skellam_unit(0);
        assert!((series - 0.308_508_322_553_671).abs() < 1e-14);
        assert_eq!(z.method, ZeroMassMethod::Enumeration);
        assert!(z.truncated_mass < 1e-10);
        assert!(z.value <= series + 1e-15 && series <= z.value + z.truncated_mass + 1e-15);
    }

    #[test]
    fn two_unit_weights_convolve() {
        let oracle: f64 = (-40..=40).map(|j| skellam_unit(j).powi(2)).sum();
        let h = law(&[1.0, 1.0], 4.0);
        let z = mass_at_zero(&h, &Default::default()).unwrap();
        assert!((z.value - oracle).abs() < 1e-10, "{} vs {oracle}", z.value);
        // opposite signs merge into the same direction
        let z2 = mass_at_zero(&law(&[1.0, -1.0], 4.0), &Default::default()).unwrap();
        assert_eq!(z.value, z2.value);
        let mc = monte_carlo(&[vec![1]], &[2.0], &MCConfig::default()).unwrap();
        assert!((mc.0 - oracle).abs() <= 3.0 * mc.1);
    }

    #[test]
    fn degenerate_cases() {
        let one = mass_at_zero(&law(&[1.0, 2.0], 0.0), &Default::default()).unwrap();
        assert_eq!((one.value, one.method), (1.0, ZeroMassMethod::Exact));
        let planar = SmoothingLaw::new(
            WeightVector::new(2, vec![vec![int(0), int(0)], vec![int(1), int(0)]]).unwrap(),
            int(4),
        )
        .unwrap();
        let z = mass_at_zero(&planar, &Default::default()).unwrap();
        assert!((z.value - skellam_unit(0)).abs() < 1e-10);
        let bad = ZeroMassConfig {
            tol: 0.0,
            ..Default::default()
        };
        assert!(mass_at_zero(&planar, &bad).is_err());
    }

    #[test]
    fn generic_weights_factorize() {
        // rationally independent directions only cancel when every count does
        let h = law(&[1.0, std::f64::consts::SQRT_2, std::f64::consts::PI], 2.0);
        let z = mass_at_zero(&h, &Default::default()).unwrap();
        let mu = 0.5f64;
        let single: f64 = (0..40)
            .map(|m| mu.powi(2 * m) / factorial(m as u32).powi(2))
            .sum::<f64>()
            * (-2.0 * mu).exp();
        assert!((z.value - single.powi(3)).abs() < 1e-10);
    }

    #[test]
    fn budget_falls_back_or_fails() {
        let h = law(&[1.0, 3.0, 7.0, 19.0], 8.0);
        let tight = ZeroMassConfig {
            budget: 10,
            ..Default::default()
        };
        let z = mass_at_zero(&h, &tight).unwrap();
        assert_eq!(z.method, ZeroMassMethod::MonteCarlo);
        let exact = mass_at_zero(&h, &Default::default()).unwrap();
        assert!((z.value - exact.value).abs() <= 3.0 * z.stderr);
        let strict = ZeroMassConfig { mc: None, ..tight };
        assert!(matches!(mass_at_zero(&h, &strict), Err(Error::EnumerationBudget { .. })));
    }

    #[test]
    fn nonincreasing_in_intensity() {
        let xs = [1.0, 2.0, 2.0, 0.5];
        let mut last = 1.0;
        for k in 0..=12 {
            let z = mass_at_zero(&law(&xs, 0.5 * k as f64), &Default::default()).unwrap();
            assert!(z.value <= last + 1e-12);
            last = z.value;
        }
    }

    #[test]
    fn tail_radius_is_certified() {
        for mu in [0.01, 0.5, 1.0, 7.5, 40.0] {
            let r = truncation_radius(mu, 1e-12);
            assert!(poisson_tail_bound(mu, r + 1) < 1e-12);
            assert!(r == mu.floor() as u64 || poisson_tail_bound(mu, r) >= 1e-12);
        }
    }
}
