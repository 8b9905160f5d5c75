//! The concentration function `Q(F, λ) = sup_x P(Y ∈ x + λB)` with `B` the
//! closed ball of radius `1/2`.
//!
//! For one-dimensional discrete laws the supremum is computed exactly. A
//! window `[x, x + λ]` can always be slid right until its left endpoint hits
//! an atom without losing mass, so it suffices to try every atom as the left
//! endpoint; a two-pointer sweep does that in linear time. Everything else
//! goes through the seeded Monte Carlo estimator in [`mc`].

pub mod mc;
mod samplers;

use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

pub use mc::{q_monte_carlo, substream_seed, MCConfig, McRng, Sampler};
pub use samplers::{DiscreteSampler, UniformBoxSampler, WeightedSumSampler};

use crate::dist::{self, joint_sum_law, weighted_sum_law, DiscreteDist, SumLawOptions, WeightVector};
use crate::num::{self, Rational};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("window length {0} is negative")]
    NegativeLength(f64),
    #[error("Q at λ = 0 is degenerate for a sampler without atoms")]
    DegenerateWindow,
    #[error("sample_count must be at least 1")]
    NoSamples,
    #[error("window multiplier must be at least 1")]
    ZeroMultiplier,
    #[error(transparent)]
    Dist(#[from] dist::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    MonteCarlo,
}

/// A value of `Q`, exact or estimated.
///
/// `stderr` is zero exactly when `method` is [`Method::Exact`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationResult {
    pub value: f64,
    pub exact: Option<Rational>,
    pub method: Method,
    pub stderr: f64,
    /// A center attaining (or, for Monte Carlo, estimating) the supremum.
    pub center: Vec<f64>,
}

impl ConcentrationResult {
    pub fn from_exact(value: Rational, center: Vec<f64>) -> Self {
        ConcentrationResult {
            value: num::to_f64(&value),
            exact: Some(value),
            method: Method::Exact,
            stderr: 0.0,
            center,
        }
    }

    /// `{value, stderr, method, center}`; exact values are `"p/q"` strings.
    pub fn to_json(&self) -> serde_json::Value {
        let value = match &self.exact {
            Some(v) => num::to_json(v),
            None => serde_json::json!(self.value),
        };
        serde_json::json!({
            "value": value,
            "stderr": self.stderr,
            "method": self.method,
            "center": self.center,
        })
    }
}

/// Exact `Q(F, λ)` for a one-dimensional discrete law.
pub fn q_exact(f: &DiscreteDist, lambda: &Rational) -> Result<ConcentrationResult> {
    let (value, left) = q_exact_value(f, lambda)?;
    let center = num::to_f64(&(left + lambda / Rational::from_integer(2.into())));
    Ok(ConcentrationResult::from_exact(value, vec![center]))
}

/// The exact supremum together with the left endpoint of a maximizing
/// window (the leftmost one among ties).
pub fn q_exact_value(f: &DiscreteDist, lambda: &Rational) -> Result<(Rational, Rational)> {
    if lambda.is_negative() {
        return Err(Error::NegativeLength(num::to_f64(lambda)));
    }
    let atoms = f.atoms();
    let weights = f.weights();
    let mut best = Rational::zero();
    let mut best_left = 0;
    let mut mass = Rational::zero();
    let mut j = 0;
    for i in 0..atoms.len() {
        while j < atoms.len() && &atoms[j] - &atoms[i] <= *lambda {
            mass += &weights[j];
            j += 1;
        }
        if mass > best {
            best = mass.clone();
            best_left = i;
        }
        mass -= &weights[i];
    }
    Ok((best, atoms[best_left].clone()))
}

/// Both sides of `Q(F, mλ) ≤ m·Q(F, λ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowRegularity {
    #[serde(with = "num::serde_rational")]
    pub lhs: Rational,
    #[serde(with = "num::serde_rational")]
    pub rhs: Rational,
    pub holds: bool,
}

/// Checks the covering inequality `Q(F, mλ) ≤ m·Q(F, λ)` exactly: a window
/// of length `mλ` is covered by `m` windows of length `λ`.
pub fn q_window_regularity(f: &DiscreteDist, lambda: &Rational, m: u32) -> Result<WindowRegularity> {
    if m == 0 {
        return Err(Error::ZeroMultiplier);
    }
    let m = Rational::from_integer(m.into());
    let (lhs, _) = q_exact_value(f, &(lambda * &m))?;
    let (q, _) = q_exact_value(f, lambda)?;
    let rhs = q * m;
    Ok(WindowRegularity {
        holds: lhs <= rhs,
        lhs,
        rhs,
    })
}

#[derive(Debug, Clone, Default)]
pub struct CoordinateOptions {
    pub sum: SumLawOptions,
    /// Used when a coordinate law exceeds the exact budget.
    pub mc: MCConfig,
}

/// Per-coordinate concentrations `q_j = Q(F_a^{(j)}, τ)` and aggregates.
#[derive(Debug, Clone)]
pub struct CoordinateBounds {
    pub q: Vec<ConcentrationResult>,
    /// Coordinates whose projection of `a` vanishes (`q_j = 1`).
    pub zero_coordinates: Vec<usize>,
    /// `min_j q_j`.
    pub min: f64,
    /// `Π_j q_j`, exact when every `q_j` is.
    pub product: f64,
    pub product_exact: Option<Rational>,
    /// Every `a_k` has at most one nonzero coordinate, so the coordinates of
    /// `S_a` are independent and `Q(F_a, τ) ≤ Π_j q_j`.
    pub independent: bool,
    /// Exact joint `Q(F_a, 0)` (largest atom of the joint law) when `τ = 0`
    /// and the joint law fits the budget.
    pub joint_at_zero: Option<Rational>,
}

pub fn q_coordinate_bounds(
    a: &WeightVector,
    dist: &DiscreteDist,
    tau: &Rational,
    opts: &CoordinateOptions,
) -> Result<CoordinateBounds> {
    if tau.is_negative() {
        return Err(Error::NegativeLength(num::to_f64(tau)));
    }
    let mut q = Vec::with_capacity(a.dim());
    let mut zero_coordinates = Vec::new();
    for j in 0..a.dim() {
        let proj = a.project(j)?;
        if proj.is_zero() {
            zero_coordinates.push(j);
            q.push(ConcentrationResult::from_exact(Rational::one(), vec![0.0]));
            continue;
        }
        q.push(coordinate_q(&proj, dist, tau, opts, j as u64)?);
    }
    let min = q.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
    let product = q.iter().map(|r| r.value).product();
    let product_exact = q
        .iter()
        .map(|r| r.exact.clone())
        .collect::<Option<Vec<_>>>()
        .map(|v| v.into_iter().product());
    let joint_at_zero = if tau.is_zero() {
        joint_sum_law(a, dist, opts.sum.budget)
            .ok()
            .and_then(|law| law.into_iter().map(|(_, w)| w).max())
    } else {
        None
    };
    Ok(CoordinateBounds {
        q,
        zero_coordinates,
        min,
        product,
        product_exact,
        independent: a.has_single_coordinate_entries(),
        joint_at_zero,
    })
}

/// `Q(F_a, λ)` for `S_a = Σ X_k a_k`.
///
/// Exact when the law of `S_a` fits the budget: through the one-dimensional
/// sweep for `d = 1`, and as the largest joint atom when `λ = 0`. Otherwise a
/// seeded Monte Carlo estimate.
pub fn q_weighted_sum(
    a: &WeightVector,
    dist: &DiscreteDist,
    lambda: &Rational,
    opts: &CoordinateOptions,
) -> Result<ConcentrationResult> {
    if lambda.is_negative() {
        return Err(Error::NegativeLength(num::to_f64(lambda)));
    }
    let exact = if a.dim() == 1 {
        match weighted_sum_law(a, dist, &opts.sum) {
            Ok(law) => Some(q_exact(&law, lambda)?),
            Err(dist::Error::BudgetExceeded { .. }) => None,
            Err(e) => return Err(e.into()),
        }
    } else if lambda.is_zero() {
        match joint_sum_law(a, dist, opts.sum.budget) {
            Ok(law) => {
                let (x, w) = law
                    .into_iter()
                    .max_by(|p, q| p.1.cmp(&q.1).then_with(|| q.0.cmp(&p.0)))
                    .expect("nonempty law");
                Some(ConcentrationResult::from_exact(w, x.iter().map(num::to_f64).collect()))
            }
            Err(dist::Error::BudgetExceeded { .. }) => None,
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };
    match exact {
        Some(q) => Ok(q),
        None => {
            let sampler = WeightedSumSampler::new(a, dist);
            q_monte_carlo(&sampler, num::to_f64(lambda), &opts.mc)
        }
    }
}

fn coordinate_q(
    proj: &WeightVector,
    dist: &DiscreteDist,
    tau: &Rational,
    opts: &CoordinateOptions,
    stream: u64,
) -> Result<ConcentrationResult> {
    match weighted_sum_law(proj, dist, &opts.sum) {
        Ok(law) => q_exact(&law, tau),
        Err(dist::Error::BudgetExceeded { .. }) => {
            let sampler = WeightedSumSampler::new(proj, dist);
            let cfg = MCConfig {
                seed: substream_seed(opts.mc.seed, stream),
                ..opts.mc.clone()
            };
            q_monte_carlo(&sampler, tau.to_f64().unwrap_or(f64::INFINITY), &cfg)
        }
        Err(e) => Err(e.into()),
    }
}
