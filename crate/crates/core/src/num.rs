//! Exact rational scalars.
//!
//! Every atom position, weight and tolerance in the exact paths of this crate
//! is a [`Rational`]. Finite `f64` inputs are converted exactly (every finite
//! double is a dyadic rational), so nothing is rounded on the way in.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumError {
    #[error("cannot parse {0:?} as a rational number")]
    Parse(String),
    #[error("non-finite float {0} has no rational value")]
    NonFinite(f64),
    #[error("zero denominator in {0:?}")]
    ZeroDenominator(String),
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

/// Exact value of a finite double.
pub fn from_f64(x: f64) -> Result<Rational, NumError> {
    if !x.is_finite() {
        return Err(NumError::NonFinite(x));
    }
    if x == 0.0 {
        return Ok(Rational::zero());
    }
    Rational::from_float(x).ok_or(NumError::NonFinite(x))
}

/// Shorthand for literals in tests and examples. Panics on NaN/inf.
pub fn r(x: f64) -> Rational {
    from_f64(x).expect("finite literal")
}

pub fn to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        if x.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Largest integer strictly less than `x` (so `floor_strict(2) == 1`).
pub fn floor_strict(x: &Rational) -> BigInt {
    x.ceil().to_integer() - BigInt::one()
}

/// Parses `"p/q"`, integers, and decimals with an optional exponent
/// (`"-1.25e-3"`). Decimals are read exactly, `"0.1"` is `1/10`.
pub fn parse_rational(s: &str) -> Result<Rational, NumError> {
    let t = s.trim();
    if let Some((p, q)) = t.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| NumError::Parse(s.into()))?;
        let q: BigInt = q.trim().parse().map_err(|_| NumError::Parse(s.into()))?;
        if q.is_zero() {
            return Err(NumError::ZeroDenominator(s.into()));
        }
        return Ok(Rational::new(p, q));
    }
    parse_decimal(t).ok_or_else(|| NumError::Parse(s.into()))
}

fn parse_decimal(t: &str) -> Option<Rational> {
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().ok()?),
        None => (t, 0),
    };
    let (neg, body) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("0{whole}{frac}").parse().ok()?;
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut v = Rational::from_integer(digits);
    if scale >= 0 {
        v *= Rational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        v /= Rational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if neg { -v } else { v })
}

/// `"p/q"`, or `"p"` for integers.
pub fn format_rational(x: &Rational) -> String {
    x.to_string()
}

pub fn lcm_of_denominators<'a>(values: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    values
        .into_iter()
        .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()))
}

/// Serde adapter: writes `"p/q"` strings, reads strings or JSON numbers.
/// JSON numbers go through their shortest decimal text, so `0.1` reads as
/// `1/10` rather than the nearest double.
pub mod serde_rational {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        from_json(&v).map_err(de::Error::custom)
    }
}

pub mod serde_rational_vec {
    use super::*;

    pub fn serialize<S: Serializer>(xs: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        let strs: Vec<String> = xs.iter().map(format_rational).collect();
        strs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let v = Vec::<serde_json::Value>::deserialize(d)?;
        v.iter()
            .map(|x| from_json(x).map_err(de::Error::custom))
            .collect()
    }
}

pub fn from_json(v: &serde_json::Value) -> Result<Rational, NumError> {
    match v {
        serde_json::Value::String(s) => parse_rational(s),
        serde_json::Value::Number(n) => parse_rational(&n.to_string()),
        other => Err(NumError::Parse(other.to_string())),
    }
}

pub fn to_json(x: &Rational) -> serde_json::Value {
    serde_json::Value::String(format_rational(x))
}

/// Display wrapper printing a rational as `p/q (≈ float)`.
pub struct Approx<'a>(pub &'a Rational);

impl fmt::Display for Approx<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (≈ {})", self.0, to_f64(self.0))
    }
}

/// 17 significant digits, the round-trip width for doubles.
pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}
