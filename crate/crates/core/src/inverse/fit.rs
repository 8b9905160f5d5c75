use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use super::{CoordinateFit, Error, InversePrincipleReport, Result, Verdict};
use crate::dist::WeightVector;
use crate::gap::{self, coverage, search, Family, Norm, SearchConfig, SymmetricGAP};
use crate::num::{self, Rational};

#[derive(Debug, Clone, Default)]
pub struct FitConfig {
    pub search: SearchConfig,
}

/// Largest `m` with `m^d ≤ cap`.
fn integer_root(cap: u64, d: usize) -> u64 {
    let mut m = (cap as f64).powf(1.0 / d as f64).round() as u64 + 1;
    while m > 1 && (m as u128).checked_pow(d as u32).map_or(true, |v| v > cap as u128) {
        m -= 1;
    }
    m.max(1)
}

/// Searches a progression of rank `≤ rank_cap` and volume `≤ volume_cap`
/// that has as many entries of `a` as possible within `tol` (max norm).
///
/// Each coordinate is fitted on its own with rank cap `⌊rank_cap/d⌋` and
/// volume cap `⌊volume_cap^{1/d}⌋`; the coordinate progressions are then
/// placed on their axes, so the product is again a progression within both
/// caps and its max-norm neighbourhood is the product of the coordinate
/// neighbourhoods. The report carries every clause flag even when the
/// coverage clause fails.
pub fn fit_gap(
    a: &WeightVector,
    tol: &Rational,
    n_prime: usize,
    rank_cap: usize,
    volume_cap: u64,
    cfg: &FitConfig,
) -> Result<InversePrincipleReport> {
    let n = a.len();
    let d = a.dim();
    if n_prime == 0 || n_prime > n {
        return Err(Error::NPrimeOutOfRange { n_prime, n });
    }
    if tol.is_negative() {
        return Err(gap::Error::NegativeTolerance(num::to_f64(tol)).into());
    }
    if rank_cap < d {
        return Err(Error::RankBelowDimension { rank_cap, dim: d });
    }
    if volume_cap == 0 {
        return Err(gap::Error::InvalidCaps.into());
    }
    let rank_j = rank_cap / d;
    let volume_j = integer_root(volume_cap, d);

    let mut flags = BTreeMap::new();
    let mut coordinates = Vec::with_capacity(d);
    let mut rounded = false;
    let mut exhaustive = true;
    for j in 0..d {
        let xs: Vec<Rational> = a.entries().iter().map(|x| x[j].clone()).collect();
        let ones = vec![Rational::from_integer(1.into()); n];
        let family = Family::Capped { volume_cap: volume_j };
        let found = match search(&xs, &ones, tol, rank_j, family, &cfg.search) {
            Err(gap::Error::Overflow) if tol.is_positive() => {
                // entries with huge denominators: snap to a grid far below tol
                rounded = true;
                let step = tol / Rational::from_integer(BigInt::from(1u64 << 20));
                let snapped: Vec<Rational> = xs.iter().map(|x| (x / &step).round() * &step).collect();
                search(&snapped, &ones, tol, rank_j, family, &cfg.search)?
            }
            other => other?,
        };
        exhaustive &= found.exhaustive;
        let cardinality = found.witness.points(volume_j as u128)?.len();
        coordinates.push(CoordinateFit {
            gap: found.witness,
            cardinality,
            q: None,
            bound_component: None,
        });
    }

    let gap = if d == 1 {
        coordinates[0].gap.clone()
    } else {
        let mut generators = Vec::new();
        let mut limits = Vec::new();
        for (j, c) in coordinates.iter().enumerate() {
            for (g, l) in c.gap.generators().iter().zip(c.gap.limits()) {
                let mut axis = vec![Rational::zero(); d];
                axis[j] = g[0].clone();
                generators.push(axis);
                limits.push(l.clone());
            }
        }
        SymmetricGAP::new(generators, limits)?
    };
    let cap = volume_cap as u128;
    let cardinality = gap.points(cap)?.len();
    let region = gap.region(cap)?;
    let cov = coverage(a, &region, tol, Norm::Max)?;

    flags.insert("coverage".to_string(), cov.covered_count + d * n_prime >= n);
    flags.insert("rank".to_string(), gap.rank() <= rank_cap);
    flags.insert("volume".to_string(), cardinality as u128 <= cap && gap.volume() <= cap);
    let verdict = if flags["coverage"] {
        Verdict::WitnessFound
    } else {
        Verdict::NotFound
    };
    let mut params = BTreeMap::new();
    params.insert("n".into(), n.into());
    params.insert("d".into(), d.into());
    params.insert("tol".into(), num::format_rational(tol).into());
    params.insert("n_prime".into(), n_prime.into());
    params.insert("rank_cap".into(), rank_cap.into());
    params.insert("volume_cap".into(), volume_cap.into());
    params.insert("coordinate_rank_cap".into(), rank_j.into());
    params.insert("coordinate_volume_cap".into(), volume_j.into());
    params.insert("search_exhaustive".into(), exhaustive.into());
    params.insert("entries_rounded".into(), rounded.into());

    Ok(InversePrincipleReport {
        rank: gap.rank(),
        gap,
        coverage: cov,
        cardinality,
        coordinates,
        params,
        flags,
        bounds: Vec::new(),
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inverse::{plant, PlantSpec};
    use crate::num::{int, r, ratio};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    #[test]
    fn root_is_exact() {
        assert_eq!(integer_root(25, 1), 25);
        assert_eq!(integer_root(25, 2), 5);
        assert_eq!(integer_root(26, 2), 5);
        assert_eq!(integer_root(27, 3), 3);
        assert_eq!(integer_root(26, 3), 2);
        assert_eq!(integer_root(1, 4), 1);
    }

    #[test]
    fn recovers_exact_rank_one_plant() {
        let inst = plant(&PlantSpec {
            generators: Some(vec![vec![ratio(3, 7)]]),
            rank: 1,
            limits: vec![5],
            n: 40,
            d: 1,
            noise: 0.0,
            outlier_fraction: 0.0,
            seed: 1,
        })
        .unwrap();
        let rep = fit_gap(&inst.a, &int(0), 1, 4, 11, &FitConfig::default()).unwrap();
        assert_eq!(rep.coverage.covered_count, 40);
        assert_eq!(rep.rank, 1);
        assert_eq!(rep.verdict, Verdict::WitnessFound);
        assert!(rep.cardinality <= 11);
    }

    #[test]
    fn planar_fit_is_a_product() {
        let inst = plant(&PlantSpec {
            generators: Some(vec![vec![int(2), int(0)], vec![int(0), int(5)]]),
            rank: 2,
            limits: vec![2, 1],
            n: 30,
            d: 2,
            noise: 0.0,
            outlier_fraction: 0.0,
            seed: 4,
        })
        .unwrap();
        let rep = fit_gap(&inst.a, &int(0), 1, 2, 25, &FitConfig::default()).unwrap();
        assert_eq!(rep.coverage.covered_count, 30);
        let product: usize = rep.coordinates.iter().map(|c| c.cardinality).product();
        assert_eq!(rep.cardinality, product);
        for g in rep.gap.generators() {
            assert!(g.iter().filter(|x| !x.is_zero()).count() <= 1);
        }
        assert!(fit_gap(&inst.a, &int(0), 1, 1, 25, &FitConfig::default()).is_err());
    }

    #[test]
    fn noisy_rank_two_with_outliers() {
        let g2 = r(std::f64::consts::SQRT_2 * 1000.0);
        let inst = plant(&PlantSpec {
            generators: Some(vec![vec![int(1)], vec![g2]]),
            rank: 2,
            limits: vec![3, 1],
            n: 50,
            d: 1,
            noise: 1e-4,
            outlier_fraction: 0.05,
            seed: 0,
        })
        .unwrap();
        let rep = fit_gap(&inst.a, &ratio(1, 100), 5, 2, 25, &FitConfig::default()).unwrap();
        assert!(rep.coverage.covered_count >= 45, "{:?}", rep.coverage);
        assert!(rep.rank <= 2 && rep.cardinality <= 25);
    }

    /// Every GAP of rank ≤ 2 whose generators are `|x|/k` or `|x − y|/k`,
    /// enumerated point by point.
    fn oracle(xs: &[i64], tol: i64, volume_cap: u64) -> usize {
        let mut gens = BTreeSet::new();
        for (i, &x) in xs.iter().enumerate() {
            for &y in std::iter::once(&0).chain(&xs[i + 1..]) {
                for k in 1..=6 {
                    if x != y {
                        gens.insert(ratio((x - y).abs(), k));
                    }
                }
            }
        }
        let gens: Vec<Rational> = gens.into_iter().collect();
        let count = |pts: &[Rational]| {
            xs.iter()
                .filter(|&&x| pts.iter().any(|p| (int(x) - p).abs() <= int(tol)))
                .count()
        };
        let mut best = count(&[int(0)]);
        let lmax = (volume_cap as i64 - 1) / 2;
        for (i, g1) in gens.iter().enumerate() {
            for l1 in 1..=lmax {
                let pts: Vec<Rational> = (-l1..=l1).map(|m| int(m) * g1).collect();
                best = best.max(count(&pts));
                for g2 in &gens[i + 1..] {
                    for l2 in 1..=lmax {
                        if ((2 * l1 + 1) * (2 * l2 + 1)) as u64 > volume_cap {
                            continue;
                        }
                        let mut pts = Vec::new();
                        for m1 in -l1..=l1 {
                            for m2 in -l2..=l2 {
                                pts.push(int(m1) * g1 + int(m2) * g2);
                            }
                        }
                        best = best.max(count(&pts));
                    }
                }
            }
        }
        best
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn small_instances_match_the_oracle(
            xs in prop::collection::vec(-40i64..40, 1..=8),
            tol in 0i64..2,
            volume_cap in 3u64..16,
        ) {
            let a = WeightVector::scalars(xs.iter().map(|&x| int(x))).unwrap_or_else(|_| WeightVector::ones(1).unwrap());
            let xs: Vec<i64> = a.scalar_values().unwrap().iter().map(|x| x.to_integer().try_into().unwrap()).collect();
            let rep = fit_gap(&a, &int(tol), 1, 2, volume_cap, &FitConfig::default()).unwrap();
            prop_assert_eq!(rep.coverage.covered_count, oracle(&xs, tol, volume_cap));
            prop_assert!(rep.rank <= 2 && rep.cardinality as u64 <= volume_cap);
        }

        #[test]
        fn scaling_is_equivariant(
            xs in prop::collection::vec(-30i64..30, 2..8),
            s in 1i64..9,
        ) {
            prop_assume!(xs.iter().any(|&x| x != 0));
            let a = WeightVector::scalars(xs.iter().map(|&x| int(x))).unwrap();
            let s = ratio(s, 3);
            let base = fit_gap(&a, &ratio(1, 2), 1, 2, 9, &FitConfig::default()).unwrap();
            let scaled = fit_gap(&a.scaled(&s), &(ratio(1, 2) * &s), 1, 2, 9, &FitConfig::default()).unwrap();
            prop_assert_eq!(base.coverage.covered_count, scaled.coverage.covered_count);
            let expect: Vec<Vec<Rational>> = base.gap.generators().iter().map(|g| vec![&g[0] * &s]).collect();
            prop_assert_eq!(scaled.gap.generators(), &expect[..]);
        }
    }
}
