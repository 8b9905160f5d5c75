use num_traits::{Signed, Zero};

use super::search::{beta, SearchConfig};
use super::{Error, Result};
use crate::concentration::{q_weighted_sum, CoordinateOptions};
use crate::dist::{AtomicMeasure, DiscreteDist, WeightVector};
use crate::num::{self, Rational};
use crate::report::{BoundReport, InequalityId};

#[derive(Debug, Clone, Default)]
pub struct Thm1Config {
    pub search: SearchConfig,
    /// Law of `S_a` (exact budget, Monte Carlo fallback).
    pub lhs: CoordinateOptions,
}

/// `Q(F_a, τ)` against
///
/// ```text
/// (1 + ⌊ϰ/δ⌋) · (1/(m √β) + 1/β^{(r+1)/2}),   β = β_{r,m}((p(τ/ϰ)/4)·M*, δ)
/// ```
///
/// A zero `β` makes the bound vacuous (flag `beta-zero`), as does
/// `p(τ/ϰ) = 0` (flag `p-zero`).
#[allow(clippy::too_many_arguments)]
pub fn thm1_rhs(
    a: &WeightVector,
    dist: &DiscreteDist,
    tau: &Rational,
    kappa: &Rational,
    delta: &Rational,
    r: usize,
    m: u64,
    cfg: &Thm1Config,
) -> Result<BoundReport> {
    if a.dim() != 1 {
        return Err(Error::NotOneDimensional(a.dim()));
    }
    for (name, v) in [("kappa", kappa), ("delta", delta)] {
        if !v.is_positive() {
            return Err(Error::NonPositive {
                name,
                value: num::to_f64(v),
            });
        }
    }
    if tau.is_negative() {
        return Err(Error::NegativeTolerance(num::to_f64(tau)));
    }
    let p = dist.symmetrize().tail_mass(&(tau / kappa))?;
    let factor = Rational::from_integer(num::floor_strict(&(kappa / delta)) + 1);
    let lhs = q_weighted_sum(a, dist, tau, &cfg.lhs)?;

    let params = |report: BoundReport| {
        let report = report
            .with_param("n", a.len())
            .with_param("r", r)
            .with_param("m", m)
            .with_param("tau", num::format_rational(tau))
            .with_param("kappa", num::format_rational(kappa))
            .with_param("delta", num::format_rational(delta))
            .with_param("p", num::format_rational(&p))
            .with_param("factor", num::format_rational(&factor))
            .with_param("lhs_method", serde_json::to_value(lhs.method).expect("method"))
            .with_param("lhs_stderr", lhs.stderr);
        match &lhs.exact {
            Some(v) => report.with_param("lhs_exact", num::format_rational(v)),
            None => report,
        }
    };
    if p.is_zero() {
        return Ok(params(BoundReport::vacuous(InequalityId::Thm1, lhs.value, "p-zero")));
    }
    let levy = AtomicMeasure::levy_base(a).scaled(&(&p / Rational::from_integer(4.into())));
    let b = beta(&levy, r, m, delta, &cfg.search)?;
    let with_beta = |report: BoundReport| {
        params(report)
            .with_param("beta", num::format_rational(&b.value))
            .with_param("beta_witness", b.witness.to_json())
            .with_param("beta_exhaustive", b.exhaustive)
            .with_param("beta_candidates", b.candidates)
    };
    if b.value.is_zero() {
        return Ok(with_beta(BoundReport::vacuous(InequalityId::Thm1, lhs.value, "beta-zero")));
    }
    let beta_f = num::to_f64(&b.value);
    let rhs = num::to_f64(&factor) * (1.0 / (m as f64 * beta_f.sqrt()) + beta_f.powf(-((r + 1) as f64) / 2.0));
    Ok(with_beta(BoundReport::new(InequalityId::Thm1, lhs.value, rhs)))
}
