//! Symmetric generalized arithmetic progressions
//!
//! ```text
//! K = { Σ m_j g_j : m_j ∈ Z, |m_j| ≤ L_j },   Vol(K) = Π (2⌊L_j⌋ + 1)
//! ```
//!
//! with real limits `L_j > 0`, their closed neighbourhoods, and the searches
//! that look for progressions carrying most of a measure.

mod bound;
mod product;
pub mod search;

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

pub use bound::{thm1_rhs, Thm1Config};
pub use product::ProductK1;
pub use search::{beta, k1_search, search, Family, SearchConfig, SearchResult};

use crate::concentration;
use crate::dist::{self, AtomicMeasure, WeightVector};
use crate::num::{self, Rational};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("a progression needs at least one generator")]
    NoGenerators,
    #[error("generators and limits have different lengths ({generators} vs {limits})")]
    LengthMismatch { generators: usize, limits: usize },
    #[error("generators must share one dimension")]
    DimensionMismatch,
    #[error("limit {0} is not positive")]
    NonPositiveLimit(f64),
    #[error("volume {volume} exceeds the enumeration cap {cap}")]
    CapExceeded { volume: u128, cap: u128 },
    #[error("rank {rank} exceeds the supported maximum {max}")]
    RankUnsupported { rank: usize, max: usize },
    #[error("rank and volume caps must be at least 1")]
    InvalidCaps,
    #[error("tolerance {0} is negative")]
    NegativeTolerance(f64),
    #[error("{name} must be positive (got {value})")]
    NonPositive { name: &'static str, value: f64 },
    #[error("operation needs a one-dimensional input, got d = {0}")]
    NotOneDimensional(usize),
    #[error("scaled positions do not fit in 128-bit integers")]
    Overflow,
    #[error(transparent)]
    Dist(#[from] dist::Error),
    #[error(transparent)]
    Concentration(#[from] concentration::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    #[default]
    Euclidean,
    Max,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SymmetricGAP {
    generators: Vec<Vec<Rational>>,
    limits: Vec<Rational>,
}

impl SymmetricGAP {
    pub fn new(generators: Vec<Vec<Rational>>, limits: Vec<Rational>) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::NoGenerators);
        }
        if generators.len() != limits.len() {
            return Err(Error::LengthMismatch {
                generators: generators.len(),
                limits: limits.len(),
            });
        }
        let d = generators[0].len();
        if d == 0 || generators.iter().any(|g| g.len() != d) {
            return Err(Error::DimensionMismatch);
        }
        if let Some(l) = limits.iter().find(|l| !l.is_positive()) {
            return Err(Error::NonPositiveLimit(num::to_f64(l)));
        }
        Ok(SymmetricGAP { generators, limits })
    }

    /// One-dimensional progression from scalar generators.
    pub fn scalar(generators: Vec<Rational>, limits: Vec<Rational>) -> Result<Self> {
        Self::new(generators.into_iter().map(|g| vec![g]).collect(), limits)
    }

    pub fn generators(&self) -> &[Vec<Rational>] {
        &self.generators
    }

    pub fn limits(&self) -> &[Rational] {
        &self.limits
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn dim(&self) -> usize {
        self.generators[0].len()
    }

    /// `⌊L_j⌋` with the standard floor.
    pub fn integer_limits(&self) -> Vec<u64> {
        self.limits
            .iter()
            .map(|l| l.floor().to_integer().to_u64().unwrap_or(u64::MAX))
            .collect()
    }

    /// `Π (2⌊L_j⌋ + 1)`, saturating.
    pub fn volume(&self) -> u128 {
        self.integer_limits()
            .iter()
            .fold(1u128, |v, &l| v.saturating_mul(2 * l as u128 + 1))
    }

    /// The distinct points of `K`, sorted.
    pub fn points(&self, cap: u128) -> Result<Vec<Vec<Rational>>> {
        let volume = self.volume();
        if volume > cap {
            return Err(Error::CapExceeded { volume, cap });
        }
        let mut out = BTreeSet::new();
        let limits = self.integer_limits();
        let mut m: Vec<i64> = limits.iter().map(|&l| -(l as i64)).collect();
        loop {
            let mut p = vec![Rational::zero(); self.dim()];
            for (mj, g) in m.iter().zip(&self.generators) {
                if *mj != 0 {
                    let c = Rational::from_integer(BigInt::from(*mj));
                    for (pi, gi) in p.iter_mut().zip(g) {
                        *pi += &c * gi;
                    }
                }
            }
            out.insert(p);
            // odometer over the box of coefficients
            let mut j = 0;
            loop {
                if j == m.len() {
                    return Ok(out.into_iter().collect());
                }
                if m[j] < limits[j] as i64 {
                    m[j] += 1;
                    break;
                }
                m[j] = -(limits[j] as i64);
                j += 1;
            }
        }
    }

    /// Enumerates the points once so that membership tests are cheap.
    pub fn region(&self, cap: u128) -> Result<GapRegion> {
        let points = if self.rank() == 1 && self.dim() == 1 {
            None
        } else {
            Some(self.points(cap)?)
        };
        Ok(GapRegion {
            gap: self.clone(),
            points,
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("progression serializes")
    }
}

impl Serialize for SymmetricGAP {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Doc {
            generators: Vec<Vec<String>>,
            limits: Vec<String>,
        }
        Doc {
            generators: self
                .generators
                .iter()
                .map(|g| g.iter().map(num::format_rational).collect())
                .collect(),
            limits: self.limits.iter().map(num::format_rational).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymmetricGAP {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Doc {
            generators: Vec<Vec<serde_json::Value>>,
            limits: Vec<serde_json::Value>,
        }
        use serde::de::Error as _;
        let doc = Doc::deserialize(d)?;
        let parse = |v: &serde_json::Value| num::from_json(v).map_err(D::Error::custom);
        let generators = doc
            .generators
            .iter()
            .map(|g| g.iter().map(parse).collect())
            .collect::<std::result::Result<Vec<Vec<Rational>>, _>>()?;
        let limits = doc.limits.iter().map(parse).collect::<std::result::Result<_, _>>()?;
        SymmetricGAP::new(generators, limits).map_err(D::Error::custom)
    }
}

/// `K₁(u) = { Σ n_j u_j : n_j ∈ {−1, 0, 1} }`, the progression with every
/// limit equal to 1.
pub fn k1_construct(u: Vec<Vec<Rational>>) -> Result<SymmetricGAP> {
    let r = u.len();
    SymmetricGAP::new(u, vec![Rational::one(); r])
}

/// The admissible family: rank at most `rank_cap`, volume at most
/// `volume_cap`, in dimension `dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GAPFamily {
    pub rank_cap: usize,
    pub volume_cap: u64,
    pub dim: usize,
}

impl GAPFamily {
    pub fn new(rank_cap: usize, volume_cap: u64, dim: usize) -> Result<Self> {
        if rank_cap == 0 || volume_cap == 0 || dim == 0 {
            return Err(Error::InvalidCaps);
        }
        Ok(GAPFamily {
            rank_cap,
            volume_cap,
            dim,
        })
    }

    pub fn contains(&self, k: &SymmetricGAP) -> bool {
        k.dim() == self.dim && k.rank() <= self.rank_cap && k.volume() <= self.volume_cap as u128
    }
}

/// A closed set in `Rᵈ` with an exact neighbourhood test.
pub trait Region {
    fn dim(&self) -> usize;

    /// Whether `x` lies in the closed `tol`-neighbourhood of the set.
    fn within(&self, x: &[Rational], tol: &Rational, norm: Norm) -> bool;
}

/// A progression with its points enumerated (rank-1 lines in `R` use the
/// closed form instead).
#[derive(Debug, Clone)]
pub struct GapRegion {
    gap: SymmetricGAP,
    points: Option<Vec<Vec<Rational>>>,
}

impl GapRegion {
    pub fn gap(&self) -> &SymmetricGAP {
        &self.gap
    }

    /// Distance from a scalar to a one-dimensional region.
    pub fn distance_1d(&self, x: &Rational) -> Rational {
        match &self.points {
            None => line_distance(x, &self.gap.generators[0][0], self.gap.integer_limits()[0]),
            Some(points) => {
                let i = points.partition_point(|p| p[0] < *x);
                let mut best: Option<Rational> = None;
                for p in points[i.saturating_sub(1)..(i + 1).min(points.len())].iter() {
                    let d = (x - &p[0]).abs();
                    if best.as_ref().map_or(true, |b| d < *b) {
                        best = Some(d);
                    }
                }
                best.expect("a progression contains 0")
            }
        }
    }
}

/// Distance from `x` to `{m g : |m| ≤ l}`.
pub(crate) fn line_distance(x: &Rational, g: &Rational, l: u64) -> Rational {
    if g.is_zero() || l == 0 {
        return x.abs();
    }
    let g = g.abs();
    let l = BigInt::from(l);
    let q = x / &g;
    let lo = q.floor().to_integer().clamp(-l.clone(), l.clone());
    let hi = q.ceil().to_integer().clamp(-l.clone(), l);
    let d1 = (x - Rational::from_integer(lo) * &g).abs();
    let d2 = (x - Rational::from_integer(hi) * &g).abs();
    d1.min(d2)
}

fn within_point(x: &[Rational], p: &[Rational], tol: &Rational, norm: Norm) -> bool {
    match norm {
        Norm::Max => x.iter().zip(p).all(|(a, b)| (a - b).abs() <= *tol),
        Norm::Euclidean => {
            let s: Rational = x.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum();
            s <= tol * tol
        }
    }
}

impl Region for GapRegion {
    fn dim(&self) -> usize {
        self.gap.dim()
    }

    fn within(&self, x: &[Rational], tol: &Rational, norm: Norm) -> bool {
        if self.gap.dim() == 1 {
            return self.distance_1d(&x[0]) <= *tol;
        }
        let points = self.points.as_ref().expect("enumerated in dimension ≥ 2");
        points.iter().any(|p| within_point(x, p, tol, norm))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub covered_count: usize,
    /// 0-based indices of the entries outside the neighbourhood.
    pub uncovered_indices: Vec<usize>,
    #[serde(with = "num::serde_rational")]
    pub tolerance: Rational,
    pub norm: Norm,
}

impl CoverageReport {
    pub fn n(&self) -> usize {
        self.covered_count + self.uncovered_indices.len()
    }
}

/// Counts the entries of `a` within `tol` of `region`.
pub fn coverage(a: &WeightVector, region: &impl Region, tol: &Rational, norm: Norm) -> Result<CoverageReport> {
    if tol.is_negative() {
        return Err(Error::NegativeTolerance(num::to_f64(tol)));
    }
    if a.dim() != region.dim() {
        return Err(Error::DimensionMismatch);
    }
    let uncovered_indices: Vec<usize> = a
        .entries()
        .iter()
        .enumerate()
        .filter(|(_, x)| !region.within(x, tol, norm))
        .map(|(k, _)| k)
        .collect();
    Ok(CoverageReport {
        covered_count: a.len() - uncovered_indices.len(),
        uncovered_indices,
        tolerance: tol.clone(),
        norm,
    })
}

/// `W(Rᵈ \ [region]_tol)`.
pub fn measure_outside(w: &AtomicMeasure, region: &impl Region, tol: &Rational, norm: Norm) -> Result<Rational> {
    if tol.is_negative() {
        return Err(Error::NegativeTolerance(num::to_f64(tol)));
    }
    if w.dim() != region.dim() {
        return Err(Error::DimensionMismatch);
    }
    Ok(w
        .iter()
        .filter(|(x, _)| !region.within(x, tol, norm))
        .map(|(_, m)| m.clone())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{int, r, ratio};
    use proptest::prelude::*;

    fn ints(xs: &[i64]) -> Vec<Rational> {
        xs.iter().map(|&x| int(x)).collect()
    }

    fn scalars(pts: Vec<Vec<Rational>>) -> Vec<Rational> {
        pts.into_iter().map(|p| p[0].clone()).collect()
    }

    #[test]
    fn enumeration_examples() {
        let k = SymmetricGAP::scalar(ints(&[2]), ints(&[1])).unwrap();
        assert_eq!(scalars(k.points(100).unwrap()), ints(&[-2, 0, 2]));
        let k = SymmetricGAP::scalar(ints(&[1, 10]), ints(&[1, 1])).unwrap();
        assert_eq!(
            scalars(k.points(100).unwrap()),
            ints(&[-11, -10, -9, -1, 0, 1, 9, 10, 11])
        );
        let k = SymmetricGAP::scalar(ints(&[1, 1]), ints(&[1, 1])).unwrap();
        let pts = k.points(100).unwrap();
        assert_eq!(scalars(pts.clone()), ints(&[-2, -1, 0, 1, 2]));
        assert_eq!(k.volume(), 9);
        assert!(matches!(k.points(8), Err(Error::CapExceeded { volume: 9, cap: 8 })));
    }

    #[test]
    fn real_limits_use_standard_floor() {
        let k = SymmetricGAP::scalar(ints(&[3]), vec![ratio(1, 2)]).unwrap();
        assert_eq!(k.volume(), 1);
        assert_eq!(scalars(k.points(10).unwrap()), ints(&[0]));
        let k = SymmetricGAP::scalar(ints(&[3]), vec![ratio(5, 2)]).unwrap();
        assert_eq!(k.volume(), 5);
        assert!(SymmetricGAP::scalar(ints(&[3]), ints(&[0])).is_err());
        assert!(SymmetricGAP::scalar(vec![], vec![]).is_err());
    }

    #[test]
    fn k1_examples() {
        let k = k1_construct(vec![vec![int(5)]]).unwrap();
        assert_eq!(scalars(k.points(10).unwrap()), ints(&[-5, 0, 5]));
        assert_eq!(k.volume(), 3);
        let k = k1_construct(vec![vec![int(1)], vec![int(3)]]).unwrap();
        assert_eq!(scalars(k.points(10).unwrap()), ints(&[-4, -3, -2, -1, 0, 1, 2, 3, 4]));
        assert_eq!(k.volume(), 9);
        let k = k1_construct(vec![vec![int(0)]]).unwrap();
        assert_eq!(scalars(k.points(10).unwrap()), ints(&[0]));
    }

    #[test]
    fn json_round_trip() {
        let k = SymmetricGAP::new(vec![vec![int(1), ratio(1, 3)], vec![int(0), int(2)]], vec![int(2), ratio(1, 2)]).unwrap();
        let text = serde_json::to_string(&k).unwrap();
        assert_eq!(text, r#"{"generators":[["1","1/3"],["0","2"]],"limits":["2","1/2"]}"#);
        let back: SymmetricGAP = serde_json::from_str(&text).unwrap();
        assert_eq!(back, k);
        let from_numbers: SymmetricGAP = serde_json::from_str(r#"{"generators":[[0.5]],"limits":[3]}"#).unwrap();
        assert_eq!(from_numbers.generators()[0][0], ratio(1, 2));
        assert!(serde_json::from_str::<SymmetricGAP>(r#"{"generators":[[1]],"limits":[-1]}"#).is_err());
    }

    #[test]
    fn coverage_examples() {
        let k = SymmetricGAP::scalar(ints(&[1]), ints(&[3])).unwrap();
        let region = k.region(1000).unwrap();
        let a = WeightVector::scalars(vec![int(1), int(2), ratio(41, 20)]).unwrap();
        let c = coverage(&a, &region, &ratio(1, 10), Norm::Max).unwrap();
        assert_eq!((c.covered_count, c.uncovered_indices.clone()), (3, vec![]));
        let c = coverage(&a, &region, &ratio(1, 100), Norm::Max).unwrap();
        assert_eq!((c.covered_count, c.uncovered_indices.clone()), (2, vec![2]));
        let off = WeightVector::scalars(vec![ratio(1, 2), ratio(7, 3)]).unwrap();
        assert_eq!(coverage(&off, &region, &int(0), Norm::Euclidean).unwrap().covered_count, 0);
        let on = WeightVector::scalars(ints(&[-3, 0, 3, 1])).unwrap();
        assert_eq!(coverage(&on, &region, &int(0), Norm::Euclidean).unwrap().covered_count, 4);
    }

    #[test]
    fn outside_mass_examples() {
        let k = k1_construct(vec![vec![int(1)]]).unwrap();
        let region = k.region(10).unwrap();
        let m = AtomicMeasure::levy_base(&WeightVector::ones(2).unwrap());
        assert_eq!(measure_outside(&m, &region, &int(0), Norm::Euclidean).unwrap(), int(0));
        let m = AtomicMeasure::levy_base(&WeightVector::scalars(ints(&[1, 2])).unwrap());
        assert_eq!(measure_outside(&m, &region, &int(0), Norm::Euclidean).unwrap(), int(2));
        assert_eq!(measure_outside(&m, &region, &int(1), Norm::Euclidean).unwrap(), int(0));
    }

    #[test]
    fn planar_region_norms() {
        let k = SymmetricGAP::new(vec![vec![int(1), int(0)], vec![int(0), int(1)]], ints(&[1, 1])).unwrap();
        let region = k.region(100).unwrap();
        let x = vec![ratio(3, 2), ratio(3, 2)];
        assert!(region.within(&x, &ratio(1, 2), Norm::Max));
        assert!(!region.within(&x, &ratio(1, 2), Norm::Euclidean));
        assert!(region.within(&x, &ratio(3, 4), Norm::Euclidean));
    }

    #[test]
    fn line_distance_closed_form() {
        assert_eq!(line_distance(&r(2.5), &int(1), 3), ratio(1, 2));
        assert_eq!(line_distance(&int(10), &int(2), 3), int(4));
        assert_eq!(line_distance(&int(-10), &int(-2), 3), int(4));
        assert_eq!(line_distance(&int(-7), &int(0), 3), int(7));
    }

    proptest! {
        #[test]
        fn points_are_symmetric_and_bounded(
            gens in prop::collection::vec(-20i64..20, 1..4),
            lims in prop::collection::vec(1i64..4, 3),
        ) {
            let r = gens.len();
            let k = SymmetricGAP::scalar(ints(&gens), ints(&lims[..r])).unwrap();
            let pts = scalars(k.points(10_000).unwrap());
            prop_assert!(pts.len() as u128 <= k.volume());
            prop_assert!(pts.contains(&int(0)));
            for p in &pts {
                prop_assert!(pts.contains(&-p));
            }
        }

        #[test]
        fn generic_generators_attain_volume(
            lims in prop::collection::vec(1i64..4, 1..4),
        ) {
            // powers of a base larger than every coefficient range never collide
            let gens: Vec<i64> = (0..lims.len()).map(|j| 10i64.pow(j as u32)).collect();
            let k = SymmetricGAP::scalar(ints(&gens), ints(&lims)).unwrap();
            prop_assert_eq!(k.points(10_000).unwrap().len() as u128, k.volume());
        }

        #[test]
        fn closed_form_matches_enumeration(x in -400i64..400, g in 1i64..30, l in 0u64..6) {
            let x = ratio(x, 7);
            let pts: Vec<Rational> = (-(l as i64)..=l as i64).map(|m| int(m * g)).collect();
            let brute = pts.iter().map(|p| (&x - p).abs()).min().unwrap();
            prop_assert_eq!(line_distance(&x, &int(g), l), brute);
        }

        #[test]
        fn coverage_monotone_in_tolerance(
            xs in prop::collection::vec(-50i64..50, 1..12),
            t1 in 0i64..20,
            t2 in 0i64..20,
        ) {
            let k = SymmetricGAP::scalar(ints(&[3, 7]), ints(&[2, 1])).unwrap();
            let region = k.region(1000).unwrap();
            let a = WeightVector::scalars(xs.iter().map(|&x| ratio(x, 2))).unwrap_or_else(|_| WeightVector::ones(1).unwrap());
            let (lo, hi) = (t1.min(t2), t1.max(t2));
            let c1 = coverage(&a, &region, &ratio(lo, 4), Norm::Max).unwrap();
            let c2 = coverage(&a, &region, &ratio(hi, 4), Norm::Max).unwrap();
            prop_assert!(c1.covered_count <= c2.covered_count);
            prop_assert_eq!(c1.n(), a.len());
        }
    }
}
