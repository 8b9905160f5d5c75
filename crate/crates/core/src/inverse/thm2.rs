use num_traits::{One, Signed, Zero};

use super::{fit_gap, Error, FitConfig, InversePrincipleReport, Result, Verdict};
use crate::concentration::{q_coordinate_bounds, q_weighted_sum, CoordinateOptions};
use crate::dist::{DiscreteDist, WeightVector};
use crate::num::{self, Rational};
use crate::report::{BoundReport, InequalityId};

/// Parameters of the structural statement for `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct Thm2Params {
    pub tau: Rational,
    pub eps: f64,
    pub theta: f64,
    /// Exponent `A` in `q_j ≥ n^{−A}`.
    pub a_exp: f64,
    /// Exponent `B` in `n^{−B} ≤ ρ_n ≤ 1`.
    pub b_exp: f64,
    pub rho_n: Rational,
    /// `None` picks [`default_n_prime`].
    pub n_prime: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Thm2Config {
    pub fit: FitConfig,
    pub rank_cap: usize,
    /// Largest accepted `|K| / Π_j max{q_j^{-1} ρ_n^{-1} (n')^{-1/2}, 1}`.
    pub ratio_threshold: f64,
    /// Volume cap of the fit; `None` uses `⌊threshold · bound⌋`.
    pub volume_cap: Option<u64>,
    pub coordinates: CoordinateOptions,
}

impl Default for Thm2Config {
    fn default() -> Self {
        Thm2Config {
            fit: FitConfig::default(),
            rank_cap: 4,
            ratio_threshold: 10.0,
            volume_cap: None,
            coordinates: CoordinateOptions::default(),
        }
    }
}

const MAX_DEFAULT_VOLUME: f64 = 10_000.0;

/// The rounded geometric midpoint of `[ε n^θ, n]`, clamped to `[1, n]`.
pub fn default_n_prime(n: usize, eps: f64, theta: f64) -> usize {
    let n_f = n as f64;
    let lo = (eps * n_f.powf(theta)).clamp(1.0, n_f.max(1.0));
    ((lo * n_f).sqrt().round() as usize).clamp(1, n.max(1))
}

/// Runs the fit with tolerance `τ ρ_n` and compares the fitted cardinality
/// with the per-coordinate product bound and with the single-`q` bound.
///
/// Hypotheses are checked and flagged; the fit runs regardless, but a failed
/// hypothesis turns the verdict into [`Verdict::HypothesesFail`].
pub fn verify_thm2(
    a: &WeightVector,
    dist: &DiscreteDist,
    params: &Thm2Params,
    cfg: &Thm2Config,
) -> Result<InversePrincipleReport> {
    let n = a.len();
    let d = a.dim();
    if params.tau.is_negative() {
        return Err(crate::gap::Error::NegativeTolerance(num::to_f64(&params.tau)).into());
    }
    if !params.rho_n.is_positive() {
        return Err(Error::NonPositive {
            name: "rho_n",
            value: num::to_f64(&params.rho_n),
        });
    }
    let n_prime = params
        .n_prime
        .unwrap_or_else(|| default_n_prime(n, params.eps, params.theta));
    if n_prime == 0 || n_prime > n {
        return Err(Error::NPrimeOutOfRange { n_prime, n });
    }
    let n_f = n as f64;
    let rho = num::to_f64(&params.rho_n);
    let p1 = dist.symmetrize().tail_mass(&Rational::one())?;

    let qs = q_coordinate_bounds(a, dist, &params.tau, &cfg.coordinates)?;
    let q_floor = n_f.powf(-params.a_exp);
    let components: Vec<f64> = qs
        .q
        .iter()
        .map(|q| (1.0 / (q.value * rho * (n_prime as f64).sqrt())).max(1.0))
        .collect();
    let bound: f64 = components.iter().product();
    let joint = q_weighted_sum(a, dist, &params.tau, &cfg.coordinates)?;
    let single_bound = (1.0 / (joint.value * (n_prime as f64).sqrt())).max(1.0);

    let volume_cap = cfg.volume_cap.unwrap_or_else(|| {
        let v = (cfg.ratio_threshold * bound).floor();
        if v.is_finite() {
            v.clamp(1.0, MAX_DEFAULT_VOLUME) as u64
        } else {
            MAX_DEFAULT_VOLUME as u64
        }
    });
    let tol = &params.tau * &params.rho_n;
    let mut report = fit_gap(a, &tol, n_prime, cfg.rank_cap.max(d), volume_cap, &cfg.fit)?;
    for ((c, q), b) in report.coordinates.iter_mut().zip(&qs.q).zip(&components) {
        c.q = Some(q.value);
        c.bound_component = Some(*b);
    }

    let card = report.cardinality as f64;
    let flags = &mut report.flags;
    flags.insert("spread".into(), p1.is_positive());
    flags.insert("hyp_q".into(), qs.q.iter().all(|q| q.value >= q_floor));
    flags.insert("hyp_rho".into(), rho <= 1.0 && rho >= n_f.powf(-params.b_exp));
    flags.insert(
        "hyp_n_prime".into(),
        (n_prime as f64) >= params.eps * n_f.powf(params.theta) && n_prime <= n,
    );
    flags.insert("cardinality".into(), card <= cfg.ratio_threshold * bound);
    let hypotheses = ["spread", "hyp_q", "hyp_rho", "hyp_n_prime"]
        .iter()
        .all(|k| flags[*k]);
    let structure = ["coverage", "rank", "volume", "cardinality"]
        .iter()
        .all(|k| flags[*k]);
    report.verdict = match (hypotheses, structure) {
        (false, _) => Verdict::HypothesesFail,
        (true, true) => Verdict::WitnessFound,
        (true, false) => Verdict::NotFound,
    };

    let p = &mut report.params;
    p.insert("tau".into(), num::format_rational(&params.tau).into());
    p.insert("rho_n".into(), num::format_rational(&params.rho_n).into());
    p.insert("eps".into(), params.eps.into());
    p.insert("theta".into(), params.theta.into());
    p.insert("A".into(), params.a_exp.into());
    p.insert("B".into(), params.b_exp.into());
    p.insert("p1".into(), num::format_rational(&p1).into());
    p.insert("q".into(), qs.q.iter().map(|q| q.value).collect::<Vec<_>>().into());
    p.insert("q_joint".into(), joint.value.into());
    p.insert("ratio_threshold".into(), cfg.ratio_threshold.into());

    let echo = |r: BoundReport| {
        r.with_param("n", n)
            .with_param("d", d)
            .with_param("n_prime", n_prime)
            .with_param("tau", num::format_rational(&params.tau))
            .with_param("rho_n", num::format_rational(&params.rho_n))
            .with_param("rank", report.rank)
    };
    let mut thm2 = echo(BoundReport::new(InequalityId::Thm2, card, bound))
        .with_param("components", components.clone());
    let mut single = echo(BoundReport::new(InequalityId::Eq12sp, card, single_bound))
        .with_param("q_joint", joint.value)
        .with_param("q_joint_stderr", joint.stderr);
    if !hypotheses {
        thm2.flag("hypotheses-fail");
        single.flag("hypotheses-fail");
    }
    if qs.q.iter().any(|q| q.value.is_zero()) {
        thm2.flag("q-zero");
    }
    report.bounds = vec![thm2, single];
    Ok(report)
}
