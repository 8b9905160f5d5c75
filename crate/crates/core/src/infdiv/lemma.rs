use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::Serialize;

use super::{esseen_integral, mass_at_zero, EsseenBound, EsseenConfig, Error, Result, SmoothingLaw, ZeroMassConfig};
use crate::concentration::{
    q_monte_carlo, q_weighted_sum, substream_seed, ConcentrationResult, CoordinateOptions, MCConfig,
};
use crate::dist::{DiscreteDist, SumLawOptions, WeightVector};
use crate::num::{self, Rational};
use crate::report::{BoundReport, InequalityId};

#[derive(Debug, Clone, Default)]
pub struct LemmaConfig {
    pub esseen: EsseenConfig,
    pub mc: MCConfig,
    pub sum: SumLawOptions,
    pub zero: ZeroMassConfig,
}

/// Upper estimate of `Q(H^λ, δ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothingQ {
    /// Present for `d = 1` when the quadrature converged.
    pub esseen: Option<EsseenBound>,
    pub mc_value: f64,
    pub mc_stderr: f64,
    /// `min(esseen bound, mc + 3·stderr, 1)`.
    pub upper: f64,
    /// `"esseen"` or `"monte-carlo"`, whichever attains `upper`.
    pub source: &'static str,
}

pub fn q_smoothing(law: &SmoothingLaw, delta: f64, cfg: &LemmaConfig) -> Result<SmoothingQ> {
    if !(delta > 0.0) {
        return Err(Error::NonPositive {
            name: "delta",
            value: delta,
        });
    }
    let esseen = if law.dim() == 1 {
        match esseen_integral(law, delta, &cfg.esseen) {
            Ok(b) => Some(b),
            Err(Error::QuadratureBudget { .. }) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let mc = q_monte_carlo(law, delta, &cfg.mc)?;
    let mc_upper = (mc.value + 3.0 * mc.stderr).min(1.0);
    let (upper, source) = match esseen {
        Some(b) if b.bound <= mc_upper => (b.bound, "esseen"),
        _ => (mc_upper, "monte-carlo"),
    };
    Ok(SmoothingQ {
        esseen,
        mc_value: mc.value,
        mc_stderr: mc.stderr,
        upper,
        source,
    })
}

fn q_of_sum(a: &WeightVector, dist: &DiscreteDist, lambda: &Rational, cfg: &LemmaConfig) -> Result<ConcentrationResult> {
    let opts = CoordinateOptions {
        sum: cfg.sum,
        mc: MCConfig {
            seed: substream_seed(cfg.mc.seed, u64::MAX),
            ..cfg.mc.clone()
        },
    };
    Ok(q_weighted_sum(a, dist, lambda, &opts)?)
}

fn lhs_params(report: BoundReport, q: &ConcentrationResult) -> BoundReport {
    let r = report
        .with_param("lhs_method", serde_json::to_value(q.method).expect("method"))
        .with_param("lhs_stderr", q.stderr);
    match &q.exact {
        Some(v) => r.with_param("lhs_exact", num::format_rational(v)),
        None => r,
    }
}

/// `Q(F_a, τ)` against `(1+⌊ϰ/δ⌋)^d · Q(H^{p(τ/ϰ)}, δ)`, with `⌊x⌋` the
/// largest integer strictly below `x`.
pub fn lemma1_rhs(
    a: &WeightVector,
    dist: &DiscreteDist,
    tau: &Rational,
    kappa: &Rational,
    delta: &Rational,
    cfg: &LemmaConfig,
) -> Result<BoundReport> {
    if !kappa.is_positive() {
        return Err(Error::NonPositive {
            name: "kappa",
            value: num::to_f64(kappa),
        });
    }
    if !delta.is_positive() {
        return Err(Error::NonPositive {
            name: "delta",
            value: num::to_f64(delta),
        });
    }
    if tau.is_negative() {
        return Err(Error::Negative {
            name: "tau",
            value: num::to_f64(tau),
        });
    }
    let d = a.dim();
    let p = dist.symmetrize().tail_mass(&(tau / kappa))?;
    let floor: BigInt = num::floor_strict(&(kappa / delta));
    let factor_exact = num_traits::pow(Rational::from_integer(floor + 1), d);
    let factor = num::to_f64(&factor_exact);
    let lhs = q_of_sum(a, dist, tau, cfg)?;

    let base = |r: BoundReport| {
        lhs_params(r, &lhs)
            .with_param("n", a.len())
            .with_param("d", d)
            .with_param("tau", num::format_rational(tau))
            .with_param("kappa", num::format_rational(kappa))
            .with_param("delta", num::format_rational(delta))
            .with_param("p", num::format_rational(&p))
            .with_param("factor", num::format_rational(&factor_exact))
    };
    if p.is_zero() {
        return Ok(base(BoundReport::vacuous(InequalityId::Lemma1, lhs.value, "p-zero")));
    }
    let h = SmoothingLaw::new(a.clone(), p.clone())?;
    let q = q_smoothing(&h, num::to_f64(delta), cfg)?;
    let mut report = base(BoundReport::new(InequalityId::Lemma1, lhs.value, factor * q.upper))
        .with_param("q_h_upper", q.upper)
        .with_param("q_h_source", q.source)
        .with_param("q_h_mc", q.mc_value)
        .with_param("q_h_mc_stderr", q.mc_stderr);
    if let Some(b) = q.esseen {
        report = report
            .with_param("q_h_esseen", b.bound)
            .with_param("esseen_integral", b.integral)
            .with_param("esseen_constant", cfg.esseen.constant);
    } else if d == 1 {
        report.flag("esseen-unavailable");
    }
    Ok(report)
}

/// `Q(F_a, 0)` against `H^{p(0)}{0}`.
pub fn eq11366_report(a: &WeightVector, dist: &DiscreteDist, cfg: &LemmaConfig) -> Result<BoundReport> {
    let lhs = q_of_sum(a, dist, &Rational::zero(), cfg)?;
    let p0 = dist.symmetrize().tail_mass(&Rational::zero())?;
    let h = SmoothingLaw::new(a.clone(), p0.clone())?;
    let z = mass_at_zero(&h, &cfg.zero)?;
    let report = BoundReport::new(InequalityId::Eq11366, lhs.value, z.value);
    Ok(lhs_params(report, &lhs)
        .with_param("n", a.len())
        .with_param("d", a.dim())
        .with_param("p0", num::format_rational(&p0))
        .with_param("h_zero_method", serde_json::to_value(z.method).expect("method"))
        .with_param("h_zero_truncated_mass", z.truncated_mass)
        .with_param("h_zero_stderr", z.stderr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{int, ratio};

    fn binomial(n: u64, k: u64) -> u64 {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    fn quick() -> LemmaConfig {
        LemmaConfig {
            mc: MCConfig {
                sample_count: 20_000,
                seed: 7,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn rademacher_ones_sixteen() {
        let a = WeightVector::ones(16).unwrap();
        let r = lemma1_rhs(&a, &DiscreteDist::rademacher(), &int(0), &int(1), &ratio(1, 2), &quick()).unwrap();
        assert_eq!(r.lhs, binomial(16, 8) as f64 / 65536.0);
        assert_eq!(r.params["lhs_exact"], "6435/32768");
        // ⌊2⌋ = 1 under the strict convention
        assert_eq!(r.params["factor"], "2");
        assert_eq!(r.params["p"], "1/2");
        assert!(r.implied_constant.unwrap().is_finite());
        assert!(!r.vacuous);
    }

    #[test]
    fn point_mass_is_vacuous() {
        let a = WeightVector::ones(3).unwrap();
        let r = lemma1_rhs(&a, &DiscreteDist::point_mass(int(1)), &int(0), &int(1), &int(1), &quick()).unwrap();
        assert!(r.vacuous);
        assert_eq!(r.flags, vec!["p-zero"]);
        assert_eq!(r.lhs, 1.0);
    }

    #[test]
    fn rejects_nonpositive_scales() {
        let a = WeightVector::ones(2).unwrap();
        let f = DiscreteDist::rademacher();
        assert!(lemma1_rhs(&a, &f, &int(0), &int(0), &int(1), &quick()).is_err());
        assert!(lemma1_rhs(&a, &f, &int(0), &int(1), &int(0), &quick()).is_err());
        assert!(lemma1_rhs(&a, &f, &int(-1), &int(1), &int(1), &quick()).is_err());
    }

    #[test]
    fn esseen_dominates_monte_carlo() {
        for k in 0..10u64 {
            let n = 2 + k as usize;
            let a = WeightVector::scalars((1..=n as i64).map(|i| ratio(i * i % 7 + 1, 2))).unwrap();
            let h = SmoothingLaw::new(a, ratio(1 + k as i64, 4)).unwrap();
            let cfg = LemmaConfig {
                mc: MCConfig {
                    sample_count: 20_000,
                    seed: 100 + k,
                    ..Default::default()
                },
                ..Default::default()
            };
            let q = q_smoothing(&h, 0.5, &cfg).unwrap();
            let b = q.esseen.unwrap();
            assert!(b.bound >= q.mc_value - 3.0 * q.mc_stderr, "case {k}: {q:?}");
            assert!(q.upper <= b.bound && q.upper <= q.mc_value + 3.0 * q.mc_stderr);
        }
    }

    #[test]
    fn smoothing_concentration_decreases_with_intensity() {
        let a = WeightVector::from_f64s(&[1.0, 0.7, 2.2]).unwrap();
        let cfg = quick();
        let mut last: Option<(f64, f64)> = None;
        for k in 0..6 {
            let h = SmoothingLaw::new(a.clone(), int(k)).unwrap();
            let q = q_smoothing(&h, 0.3, &cfg).unwrap();
            if let Some((v, s)) = last {
                assert!(q.mc_value <= v + 3.0 * (s * s + q.mc_stderr * q.mc_stderr).sqrt());
            }
            last = Some((q.mc_value, q.mc_stderr));
        }
    }

    #[test]
    fn atom_at_zero_report() {
        let a = WeightVector::ones(6).unwrap();
        let r = eq11366_report(&a, &DiscreteDist::rademacher(), &quick()).unwrap();
        assert_eq!(r.lhs, 20.0 / 64.0);
        assert_eq!(r.params["p0"], "1/2");
        // H^{1/2}{0} for six unit weights is Skellam(3/4, 3/4) at zero
        let mu: f64 = 0.75;
        let fact = |m: i32| (1..=m).map(f64::from).product::<f64>();
        let oracle: f64 = (0..40).map(|m| mu.powi(2 * m) / fact(m).powi(2)).sum::<f64>() * (-2.0 * mu).exp();
        assert!((r.rhs_unconstanted.unwrap() - oracle).abs() < 1e-10);
    }
}
