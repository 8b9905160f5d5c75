use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use super::{Error, Result, Verdict};
use crate::concentration::{q_weighted_sum, substream_seed, CoordinateOptions};
use crate::dist::{AtomicMeasure, DiscreteDist, WeightVector};
use crate::gap::{k1_search, measure_outside, Norm, ProductK1, SearchConfig, SymmetricGAP};
use crate::num::{self, Rational};
use crate::report::{BoundReport, InequalityId};

#[derive(Debug, Clone)]
pub struct StructureConfig {
    pub search: SearchConfig,
    /// Largest block size `r_j` searched per coordinate.
    pub rank_cap: usize,
    pub coordinates: CoordinateOptions,
}

impl Default for StructureConfig {
    fn default() -> Self {
        StructureConfig {
            search: SearchConfig::default(),
            rank_cap: 2,
            coordinates: CoordinateOptions::default(),
        }
    }
}

/// A product region `×_j [K₁(u^{(j)})]_{δ_j}` found by search, with the
/// rank and mass clauses evaluated against their constant-free forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    /// Rank clause first, then the mass clause, then (`verify_thm4` only) the
    /// count of entries outside the region.
    pub reports: Vec<BoundReport>,
    pub region: ProductK1,
    /// The region's centre set as one progression in `Rᵈ`; `None` when every
    /// block is empty.
    pub combined: Option<SymmetricGAP>,
    pub rank: usize,
    /// `M*(Rᵈ \ region)`.
    #[serde(with = "num::serde_rational")]
    pub outside_mass: Rational,
    /// `p(1)`, or `p(0)` when every `τ_j = δ_j = 0`.
    #[serde(with = "num::serde_rational")]
    pub p: Rational,
    pub q: Vec<f64>,
    /// Constant-free right-hand side of the rank clause.
    pub rhs: f64,
    pub flags: BTreeMap<String, bool>,
    /// `n − M*(outside)/2`: entries `a_k` with `±a_k` inside the region.
    pub consequence_count: Option<f64>,
    pub verdict: Verdict,
}

impl StructureReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }
}

struct Found {
    region: ProductK1,
    outside: Rational,
    p: Rational,
    q: Vec<f64>,
    logs: Vec<f64>,
    all_zero: bool,
    exhaustive: bool,
}

fn check_tolerances(d: usize, taus: &[Rational], deltas: &[Rational]) -> Result<()> {
    for (got, _) in [(taus.len(), "tau"), (deltas.len(), "delta")] {
        if got != d {
            return Err(Error::CoordinateCount { expected: d, got });
        }
    }
    for (j, (t, dl)) in taus.iter().zip(deltas).enumerate() {
        if dl.is_negative() || t < dl {
            return Err(Error::ToleranceOrder(j));
        }
    }
    Ok(())
}

fn search_region(
    a: &WeightVector,
    dist: &DiscreteDist,
    taus: &[Rational],
    deltas: &[Rational],
    cfg: &StructureConfig,
) -> Result<Found> {
    let d = a.dim();
    check_tolerances(d, taus, deltas)?;
    let all_zero = taus.iter().chain(deltas).all(Zero::is_zero);
    let threshold = if all_zero { Rational::zero() } else { Rational::one() };
    let p = dist.symmetrize().tail_mass(&threshold)?;

    let levy = AtomicMeasure::levy_base(a);
    let mut blocks = Vec::with_capacity(d);
    let mut q = Vec::with_capacity(d);
    let mut logs = Vec::with_capacity(d);
    let mut exhaustive = true;
    for j in 0..d {
        let proj = a.project(j)?;
        let qj = if proj.is_zero() {
            1.0
        } else {
            let mut opts = cfg.coordinates.clone();
            opts.mc.seed = substream_seed(opts.mc.seed, j as u64);
            q_weighted_sum(&proj, dist, &taus[j], &opts)?.value
        };
        q.push(qj);
        // log(τ_j/δ_j), with log(0/0) = 0
        logs.push(if taus[j].is_zero() && deltas[j].is_zero() {
            0.0
        } else if deltas[j].is_zero() {
            f64::INFINITY
        } else {
            num::to_f64(&(&taus[j] / &deltas[j])).ln()
        });
        let found = k1_search(&levy.project(j)?, cfg.rank_cap, &deltas[j], &cfg.search)?;
        exhaustive &= found.exhaustive;
        let block: Vec<Rational> = found
            .witness
            .generators()
            .iter()
            .map(|g| g[0].clone())
            .filter(|g| !g.is_zero())
            .collect();
        blocks.push(block);
    }
    let region = ProductK1::new(blocks, deltas.to_vec())?;
    let outside = measure_outside(&levy, &region, &Rational::zero(), Norm::Max)?;
    Ok(Found {
        region,
        outside,
        p,
        q,
        logs,
        all_zero,
        exhaustive,
    })
}

fn assemble(
    a: &WeightVector,
    taus: &[Rational],
    found: Found,
    rhs: f64,
    id: InequalityId,
    cfg: &StructureConfig,
) -> StructureReport {
    let rank = found.region.rank();
    let mass = num::to_f64(&found.p) * num::to_f64(&found.outside);
    let vacuous = !rhs.is_finite();
    let echo = |r: BoundReport, clause: &str| {
        r.with_param("clause", clause)
            .with_param("n", a.len())
            .with_param("d", a.dim())
            .with_param("taus", taus.iter().map(num::format_rational).collect::<Vec<_>>())
            .with_param(
                "deltas",
                found.region.deltas().iter().map(num::format_rational).collect::<Vec<_>>(),
            )
            .with_param("q", found.q.clone())
            .with_param("log_ratios", found.logs.iter().map(|l| num::format_f64(*l)).collect::<Vec<_>>())
            .with_param("p", num::format_rational(&found.p))
            .with_param("p_threshold", if found.all_zero { 0 } else { 1 })
            .with_param("outside_mass", num::format_rational(&found.outside))
            .with_param("rank_cap", cfg.rank_cap)
    };
    let mut rank_report = echo(BoundReport::new(id, rank as f64, rhs), "rank");
    let mut mass_report = echo(BoundReport::new(id, mass, rhs.powi(3)), "mass");
    if vacuous {
        let reason = if found.q.iter().any(|q| *q == 0.0) {
            "q-zero"
        } else {
            "delta-zero"
        };
        rank_report.flag(reason);
        mass_report.flag(reason);
    }
    let mut flags = BTreeMap::new();
    flags.insert("search_exhaustive".to_string(), found.exhaustive);
    flags.insert("p_positive".to_string(), found.p.is_positive());
    StructureReport {
        reports: vec![rank_report, mass_report],
        combined: found.region.combined(),
        region: found.region,
        rank,
        outside_mass: found.outside,
        p: found.p,
        q: found.q,
        rhs,
        flags,
        consequence_count: None,
        verdict: Verdict::WitnessFound,
    }
}

/// Per coordinate, searches `K₁(u^{(j)})` minimizing the projected
/// `M*`-mass outside `[K₁(u^{(j)})]_{δ_j}`, then evaluates
///
/// ```text
/// R = Σ r_j                          against  S = Σ_j (|log q_j| + log(τ_j/δ_j) + 1)
/// p(1) · M*(Rᵈ \ ×_j [K₁(u^{(j)})]_{δ_j})  against  S³
/// ```
///
/// with `q_j = Q(F_a^{(j)}, τ_j)`. When every `τ_j = δ_j = 0`, `p(1)` is
/// replaced by `p(0)` and each log ratio is 0. A coordinate with
/// `δ_j = 0 < τ_j` or `q_j = 0` makes both clauses vacuous.
pub fn verify_thm3(
    a: &WeightVector,
    dist: &DiscreteDist,
    taus: &[Rational],
    deltas: &[Rational],
    cfg: &StructureConfig,
) -> Result<StructureReport> {
    let found = search_region(a, dist, taus, deltas, cfg)?;
    let rhs: f64 = found
        .q
        .iter()
        .zip(&found.logs)
        .map(|(q, l)| q.ln().abs() + l + 1.0)
        .sum();
    let mut report = assemble(a, taus, found, rhs, InequalityId::Thm3, cfg);
    report.verdict = if report.p.is_positive() {
        Verdict::WitnessFound
    } else {
        Verdict::HypothesesFail
    };
    Ok(report)
}

/// Same search as [`verify_thm3`], measured against `d((A+B) log n + 1)` and
/// its cube, under the hypotheses `τ_j/δ_j ≤ n^B` and `q_j ≥ n^{−A}`
/// (checked and flagged). A third report compares the number of entries
/// outside the region, `M*(outside)/2`, with `d³((A+B) log n + 1)³ / (2p)`.
pub fn verify_thm4(
    a: &WeightVector,
    dist: &DiscreteDist,
    taus: &[Rational],
    deltas: &[Rational],
    a_exp: f64,
    b_exp: f64,
    cfg: &StructureConfig,
) -> Result<StructureReport> {
    for (name, value) in [("A", a_exp), ("B", b_exp)] {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(Error::NonPositive { name, value });
        }
    }
    let n = a.len() as f64;
    let d = a.dim() as f64;
    let found = search_region(a, dist, taus, deltas, cfg)?;
    let ratio_ok = taus.iter().zip(deltas).all(|(t, dl)| {
        if dl.is_zero() {
            t.is_zero()
        } else {
            num::to_f64(&(t / dl)) <= n.powf(b_exp)
        }
    });
    let q_ok = found.q.iter().all(|q| *q >= n.powf(-a_exp));
    let rhs = d * ((a_exp + b_exp) * n.ln() + 1.0);
    let outside_entries = num::to_f64(&found.outside) / 2.0;
    let p = num::to_f64(&found.p);

    let mut report = assemble(a, taus, found, rhs, InequalityId::Thm4, cfg);
    for r in report.reports.iter_mut() {
        r.params.insert("A".into(), a_exp.into());
        r.params.insert("B".into(), b_exp.into());
    }
    let count_rhs = if p > 0.0 {
        rhs.powi(3) / (2.0 * p)
    } else {
        f64::INFINITY
    };
    let mut count = BoundReport::new(InequalityId::Thm4, outside_entries, count_rhs);
    count.params = report.reports[1].params.clone();
    count.params.insert("clause".into(), "consequence".into());
    if p == 0.0 {
        count.flag("p-zero");
    }
    report.reports.push(count);
    report.consequence_count = Some(n - outside_entries);
    report.flags.insert("hyp_ratio".into(), ratio_ok);
    report.flags.insert("hyp_q".into(), q_ok);
    if !(ratio_ok && q_ok) {
        for r in report.reports.iter_mut() {
            r.flag("hypotheses-fail");
        }
    }
    report.verdict = if ratio_ok && q_ok && p > 0.0 {
        Verdict::WitnessFound
    } else {
        Verdict::HypothesesFail
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inverse::{plant, PlantSpec};
    use crate::num::{int, ratio};
    use proptest::prelude::*;

    fn rad() -> DiscreteDist {
        DiscreteDist::rademacher()
    }

    #[test]
    fn equal_entries() {
        let a = WeightVector::scalars(vec![ratio(5, 2); 9]).unwrap();
        let rep = verify_thm3(&a, &rad(), &[ratio(1, 2)], &[ratio(1, 2)], &StructureConfig::default()).unwrap();
        assert_eq!(rep.region.blocks(), &[vec![ratio(5, 2)]]);
        assert_eq!(rep.rank, 1);
        assert!(rep.outside_mass.is_zero());
        // G = {−2: 1/4, 0: 1/2, 2: 1/4}, so p(1) = 1/2
        assert_eq!(rep.p, ratio(1, 2));
        let q = rep.q[0];
        assert_eq!(q, 126.0 / 512.0);
        assert!((rep.rhs - (q.ln().abs() + 1.0)).abs() < 1e-15);
        assert_eq!(rep.reports[0].lhs, 1.0);
        assert_eq!(rep.reports[1].lhs, 0.0);
    }

    #[test]
    fn zero_tolerances_use_p_at_zero() {
        let dist = DiscreteDist::new(vec![int(0), ratio(1, 2)], vec![ratio(1, 2), ratio(1, 2)]).unwrap();
        let a = WeightVector::scalars(vec![int(1), int(1), int(3)]).unwrap();
        let rep = verify_thm3(&a, &dist, &[int(0)], &[int(0)], &StructureConfig::default()).unwrap();
        // X₁ − X₂ ∈ {−1/2, 0, 1/2}: p(1) = 0 but p(0) = 1/2
        assert_eq!(rep.p, ratio(1, 2));
        assert_eq!(rep.reports[0].params["p_threshold"], 0);
        assert_eq!(rep.reports[0].params["log_ratios"][0], num::format_f64(0.0).as_str());
        assert!((rep.rhs - (rep.q[0].ln().abs() + 1.0)).abs() < 1e-15);
        assert_eq!(rep.verdict, Verdict::WitnessFound);

        let mixed = verify_thm3(&a, &dist, &[int(1)], &[int(1)], &StructureConfig::default()).unwrap();
        assert!(mixed.p.is_zero());
        assert_eq!(mixed.verdict, Verdict::HypothesesFail);
    }

    #[test]
    fn zero_delta_is_vacuous() {
        let a = WeightVector::ones(4).unwrap();
        let rep = verify_thm3(&a, &rad(), &[int(1)], &[int(0)], &StructureConfig::default()).unwrap();
        assert!(rep.reports.iter().all(|r| r.vacuous));
        assert!(rep.reports[0].flags.contains(&"delta-zero".to_string()));
    }

    #[test]
    fn tolerance_errors() {
        let a = WeightVector::ones(4).unwrap();
        let cfg = StructureConfig::default();
        assert_eq!(
            verify_thm3(&a, &rad(), &[int(0)], &[int(1)], &cfg).unwrap_err(),
            Error::ToleranceOrder(0)
        );
        assert!(matches!(
            verify_thm3(&a, &rad(), &[int(1), int(1)], &[int(1)], &cfg),
            Err(Error::CoordinateCount { .. })
        ));
        assert!(verify_thm3(&a, &rad(), &[int(1)], &[int(-1)], &cfg).is_err());
    }

    fn planted_product(d: usize, seed: u64) -> crate::inverse::PlantedInstance {
        let generators = match d {
            1 => vec![vec![int(1)], vec![ratio(17, 4)]],
            _ => vec![vec![int(2), int(0)], vec![int(0), ratio(7, 3)]],
        };
        plant(&PlantSpec {
            generators: Some(generators),
            rank: 2,
            limits: vec![1, 1],
            n: 40,
            d,
            noise: 1e-3,
            outlier_fraction: 0.1,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn planted_outliers_are_all_that_remains() {
        for d in [1, 2] {
            let inst = planted_product(d, 11);
            let deltas = vec![ratio(1, 100); d];
            let rep = verify_thm3(&inst.a, &rad(), &deltas, &deltas, &StructureConfig::default()).unwrap();
            assert_eq!(rep.outside_mass, int(2 * inst.outliers.len() as i64), "d = {d}");
        }
    }

    #[test]
    fn thm4_matches_thm3_witness() {
        let inst = planted_product(1, 5);
        let deltas = [ratio(1, 100)];
        let cfg = StructureConfig::default();
        let t3 = verify_thm3(&inst.a, &rad(), &deltas, &deltas, &cfg).unwrap();
        let t4 = verify_thm4(&inst.a, &rad(), &deltas, &deltas, 1.0, 1.0, &cfg).unwrap();
        assert_eq!(t3.region, t4.region);
        assert_eq!(t3.outside_mass, t4.outside_mass);
        assert!((t4.rhs - (2.0 * 40f64.ln() + 1.0)).abs() < 1e-12);
        assert_eq!(t4.reports.len(), 3);
        assert_eq!(t4.consequence_count, Some(36.0));
        assert!(t4.flags["hyp_ratio"]);
        assert!((t4.rank as f64) < t4.rhs);
    }

    #[test]
    fn thm4_ratio_gate() {
        let a = WeightVector::ones(4).unwrap();
        let rep = verify_thm4(&a, &rad(), &[int(100)], &[int(1)], 1.0, 1.0, &StructureConfig::default()).unwrap();
        assert!(!rep.flags["hyp_ratio"]);
        assert_eq!(rep.verdict, Verdict::HypothesesFail);
        assert!(rep.reports.iter().all(|r| r.flags.contains(&"hypotheses-fail".to_string())));
    }

    #[test]
    fn report_round_trips() {
        let inst = planted_product(2, 3);
        let deltas = vec![ratio(1, 10); 2];
        let rep = verify_thm4(&inst.a, &rad(), &deltas, &deltas, 1.0, 1.0, &StructureConfig::default()).unwrap();
        let s = serde_json::to_string(&rep).unwrap();
        let back: StructureReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back, rep);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn outside_mass_shrinks_with_rank(
            xs in prop::collection::vec(-20i64..20, 1..10),
            ys in prop::collection::vec(-20i64..20, 1..10),
        ) {
            // independent coordinates: each entry lives on one axis
            let mut entries: Vec<Vec<Rational>> = xs.iter().map(|&x| vec![int(x), int(0)]).collect();
            entries.extend(ys.iter().map(|&y| vec![int(0), int(y)]));
            let a = WeightVector::new(2, entries).unwrap();
            let deltas = [ratio(1, 2), ratio(1, 2)];
            let mut last = None;
            for rank_cap in 1..=3 {
                let cfg = StructureConfig { rank_cap, ..StructureConfig::default() };
                let rep = verify_thm3(&a, &rad(), &deltas, &deltas, &cfg).unwrap();
                if let Some(prev) = last {
                    prop_assert!(rep.outside_mass <= prev);
                }
                last = Some(rep.outside_mass);
            }
        }
    }
}
