//! Seeded Monte Carlo estimation of `Q(F, λ)`.
//!
//! Samples are drawn in fixed-size chunks, each from its own ChaCha stream
//! whose seed is a fixed function of the master seed and the chunk index, so
//! the sample set does not depend on how chunks are scheduled across threads.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{ConcentrationResult, Error, Method, Result};

pub type McRng = ChaCha8Rng;

const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MCConfig {
    pub sample_count: usize,
    pub seed: u64,
    /// Offsets per axis tried around each anchor in dimension ≥ 2.
    pub center_grid_resolution: usize,
    /// Anchors (distinct sample points) tried as ball centers in dimension ≥ 2.
    pub max_anchors: usize,
}

impl Default for MCConfig {
    fn default() -> Self {
        MCConfig {
            sample_count: 100_000,
            seed: 0,
            center_grid_resolution: 5,
            max_anchors: 512,
        }
    }
}

/// A deterministic sample stream in `Rᵈ`.
pub trait Sampler: Sync {
    fn dim(&self) -> usize;

    /// Whether the law is purely atomic, which keeps `Q(·, 0)` meaningful.
    fn is_atomic(&self) -> bool {
        false
    }

    fn sample_into(&self, rng: &mut McRng, out: &mut [f64]);
}

pub fn substream_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `count` samples, flattened row-major (`count × dim`).
pub fn draw<S: Sampler + ?Sized>(sampler: &S, count: usize, seed: u64) -> Vec<f64> {
    let d = sampler.dim();
    let mut out = vec![0.0; count * d];
    out.par_chunks_mut(CHUNK * d)
        .enumerate()
        .for_each(|(c, chunk)| {
            let mut rng = McRng::seed_from_u64(substream_seed(seed, c as u64));
            for row in chunk.chunks_mut(d) {
                sampler.sample_into(&mut rng, row);
            }
        });
    out
}

/// Estimates `Q(F, λ)` from `sample_count` draws.
///
/// In one dimension the empirical supremum is found exactly by sorting and
/// sweeping windows anchored at sample points. In higher dimension ball
/// centers are taken on a grid of offsets around the most populated distinct
/// sample points. The reported value is the largest empirical ball mass; the
/// standard error is binomial, with a half-count continuity correction so
/// it stays positive at 0 and 1.
pub fn q_monte_carlo<S: Sampler + ?Sized>(
    sampler: &S,
    lambda: f64,
    cfg: &MCConfig,
) -> Result<ConcentrationResult> {
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::NegativeLength(lambda));
    }
    if cfg.sample_count == 0 {
        return Err(Error::NoSamples);
    }
    if lambda == 0.0 && !sampler.is_atomic() {
        return Err(Error::DegenerateWindow);
    }
    let d = sampler.dim();
    let samples = draw(sampler, cfg.sample_count, cfg.seed);
    let (count, center) = if d == 1 {
        sweep_1d(samples, lambda)
    } else {
        ball_search(&samples, d, lambda, cfg)
    };
    let n = cfg.sample_count as f64;
    let value = count as f64 / n;
    let smoothed = (count as f64 + 0.5) / (n + 1.0);
    Ok(ConcentrationResult {
        value,
        exact: None,
        method: Method::MonteCarlo,
        stderr: (smoothed * (1.0 - smoothed) / n).sqrt(),
        center,
    })
}

fn sweep_1d(mut xs: Vec<f64>, lambda: f64) -> (usize, Vec<f64>) {
    xs.sort_by(f64::total_cmp);
    let mut best = 0;
    let mut best_left = xs[0];
    let mut j = 0;
    for i in 0..xs.len() {
        while j < xs.len() && xs[j] - xs[i] <= lambda {
            j += 1;
        }
        if j - i > best {
            best = j - i;
            best_left = xs[i];
        }
    }
    (best, vec![best_left + lambda / 2.0])
}

fn ball_search(samples: &[f64], d: usize, lambda: f64, cfg: &MCConfig) -> (usize, Vec<f64>) {
    let mut rows: Vec<&[f64]> = samples.chunks(d).collect();
    rows.sort_by(|a, b| lex_cmp(a, b));
    let mut points: Vec<(&[f64], usize)> = Vec::new();
    for r in rows {
        match points.last_mut() {
            Some((p, c)) if lex_cmp(p, r).is_eq() => *c += 1,
            _ => points.push((r, 1)),
        }
    }
    let mut anchors: Vec<usize> = (0..points.len()).collect();
    anchors.sort_by(|&i, &j| points[j].1.cmp(&points[i].1).then(i.cmp(&j)));
    anchors.truncate(cfg.max_anchors.max(1));

    if lambda == 0.0 {
        let (p, c) = points[anchors[0]];
        return (c, p.to_vec());
    }

    let cell = |x: &[f64]| -> Vec<i64> { x.iter().map(|v| (v / lambda).floor() as i64).collect() };
    let mut grid: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (i, (p, _)) in points.iter().enumerate() {
        grid.entry(cell(p)).or_default().push(i);
    }
    let res = cfg.center_grid_resolution.max(1);
    let offsets_1d: Vec<f64> = if res == 1 {
        vec![0.0]
    } else {
        (0..res)
            .map(|k| -lambda / 2.0 + lambda * k as f64 / (res - 1) as f64)
            .collect()
    };
    let radius2 = lambda * lambda / 4.0;
    let neighbours: Vec<Vec<i64>> = (0..3usize.pow(d as u32))
        .map(|mut code| {
            (0..d)
                .map(|_| {
                    let v = (code % 3) as i64 - 1;
                    code /= 3;
                    v
                })
                .collect()
        })
        .collect();

    let mut best = 0;
    let mut best_center = points[anchors[0]].0.to_vec();
    let mut center = vec![0.0; d];
    for &a in &anchors {
        let anchor = points[a].0;
        for code in 0..res.pow(d as u32) {
            let mut c = code;
            for (k, slot) in center.iter_mut().enumerate() {
                *slot = anchor[k] + offsets_1d[c % res];
                c /= res;
            }
            let home = cell(&center);
            let mut mass = 0;
            for nb in &neighbours {
                let key: Vec<i64> = home.iter().zip(nb).map(|(h, o)| h + o).collect();
                if let Some(ids) = grid.get(&key) {
                    for &i in ids {
                        let (p, cnt) = points[i];
                        let dist2: f64 = p.iter().zip(&center).map(|(x, y)| (x - y) * (x - y)).sum();
                        if dist2 <= radius2 {
                            mass += cnt;
                        }
                    }
                }
            }
            if mass > best {
                best = mass;
                best_center.clone_from(&center);
            }
        }
    }
    (best, best_center)
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concentration::{q_exact, DiscreteSampler, UniformBoxSampler};
    use crate::dist::DiscreteDist;
    use crate::num::{int, r};

    fn cfg(seed: u64) -> MCConfig {
        MCConfig {
            sample_count: 100_000,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn rademacher_half_window() {
        let s = DiscreteSampler::new(&DiscreteDist::rademacher());
        let est = q_monte_carlo(&s, 0.5, &cfg(11)).unwrap();
        let exact = q_exact(&DiscreteDist::rademacher(), &r(0.5)).unwrap().value;
        assert!((est.value - exact).abs() <= 3.0 * est.stderr, "{est:?}");
        assert!(est.stderr > 0.0);
    }

    #[test]
    fn point_mass_is_one() {
        let s = DiscreteSampler::new(&DiscreteDist::point_mass(int(3)));
        for lambda in [0.0, 0.25, 4.0] {
            assert_eq!(q_monte_carlo(&s, lambda, &cfg(1)).unwrap().value, 1.0);
        }
    }

    #[test]
    fn uniform_unit_window_covers_everything() {
        let s = UniformBoxSampler::new(vec![(0.0, 1.0)]);
        let est = q_monte_carlo(&s, 1.0, &cfg(5)).unwrap();
        assert!((est.value - 1.0).abs() <= 3.0 * est.stderr);
    }

    #[test]
    fn zero_window_needs_atoms() {
        let s = UniformBoxSampler::new(vec![(0.0, 1.0)]);
        assert_eq!(q_monte_carlo(&s, 0.0, &cfg(5)), Err(Error::DegenerateWindow));
        assert!(matches!(q_monte_carlo(&s, -1.0, &cfg(5)), Err(Error::NegativeLength(_))));
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let s = UniformBoxSampler::new(vec![(0.0, 1.0), (-1.0, 2.0)]);
        let small = MCConfig {
            sample_count: 5_000,
            ..cfg(99)
        };
        let a = q_monte_carlo(&s, 0.7, &small).unwrap();
        let b = q_monte_carlo(&s, 0.7, &small).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.center, b.center);
        assert_eq!(draw(&s, 10_000, 3), draw(&s, 10_000, 3));
    }

    #[test]
    fn two_dimensional_atoms() {
        // uniform on the four corners of a unit square: a ball of diameter
        // 0.5 holds one corner, diameter 2 centred on a grid offset holds all four
        let corners = DiscreteSampler::from_points(
            vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]],
            vec![0.25; 4],
        );
        let small = MCConfig {
            sample_count: 20_000,
            ..cfg(4)
        };
        let q_small = q_monte_carlo(&corners, 0.5, &small).unwrap();
        assert!((q_small.value - 0.25).abs() <= 3.0 * q_small.stderr + 0.01);
        let q_big = q_monte_carlo(&corners, 2.0, &small).unwrap();
        assert_eq!(q_big.value, 1.0);
        let q_zero = q_monte_carlo(&corners, 0.0, &small).unwrap();
        assert!((q_zero.value - 0.25).abs() <= 3.0 * q_zero.stderr + 0.01);
    }
}
