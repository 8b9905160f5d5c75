//! Implied-constant reports for inequalities whose constants are only known
//! to exist.
//!
//! Each report pairs a left-hand side with the right-hand side stripped of
//! its unspecified constant and records `lhs / rhs` as the smallest constant
//! that would make the instance hold.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InequalityId {
    Lemma1,
    Eq11366,
    Thm1,
    Thm2,
    Thm3,
    Thm4,
    Eq12sp,
}

impl InequalityId {
    pub fn as_str(self) -> &'static str {
        match self {
            InequalityId::Lemma1 => "lemma1",
            InequalityId::Eq11366 => "eq11366",
            InequalityId::Thm1 => "thm1",
            InequalityId::Thm2 => "thm2",
            InequalityId::Thm3 => "thm3",
            InequalityId::Thm4 => "thm4",
            InequalityId::Eq12sp => "eq12sp",
        }
    }
}

impl fmt::Display for InequalityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inequality_id: InequalityId,
    pub lhs: f64,
    /// `None` when the right-hand side is infinite (vacuous bound).
    pub rhs_unconstanted: Option<f64>,
    /// `lhs / rhs_unconstanted`; `None` when vacuous.
    pub implied_constant: Option<f64>,
    pub vacuous: bool,
    pub flags: Vec<String>,
    pub params: BTreeMap<String, serde_json::Value>,
}

impl BoundReport {
    /// Builds a report; an infinite or NaN right-hand side marks it vacuous.
    pub fn new(id: InequalityId, lhs: f64, rhs: f64) -> Self {
        let finite = rhs.is_finite();
        BoundReport {
            inequality_id: id,
            lhs,
            rhs_unconstanted: finite.then_some(rhs),
            implied_constant: finite.then(|| if rhs > 0.0 { lhs / rhs } else { f64::INFINITY })
                .filter(|c| c.is_finite()),
            vacuous: !finite,
            flags: Vec::new(),
            params: BTreeMap::new(),
        }
    }

    pub fn vacuous(id: InequalityId, lhs: f64, reason: &str) -> Self {
        let mut r = Self::new(id, lhs, f64::INFINITY);
        r.flags.push(reason.to_string());
        r
    }

    pub fn with_param(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn flag(&mut self, flag: impl Into<String>) {
        self.flags.push(flag.into());
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }

    /// `lhs ≤ c · rhs` for the given constant.
    pub fn holds_with(&self, c: f64) -> bool {
        match self.rhs_unconstanted {
            Some(rhs) => self.lhs <= c * rhs,
            None => true,
        }
    }

    pub const CSV_HEADER: [&'static str; 7] = [
        "inequality_id",
        "lhs",
        "rhs_unconstanted",
        "implied_constant",
        "vacuous",
        "flags",
        "params",
    ];

    pub fn csv_record(&self) -> Vec<String> {
        let opt = |x: Option<f64>| x.map(crate::num::format_f64).unwrap_or_default();
        vec![
            self.inequality_id.to_string(),
            crate::num::format_f64(self.lhs),
            opt(self.rhs_unconstanted),
            opt(self.implied_constant),
            self.vacuous.to_string(),
            self.flags.join(";"),
            serde_json::to_string(&self.params).expect("params serialize"),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn implied_constant_is_the_ratio() {
        let r = BoundReport::new(InequalityId::Lemma1, 0.25, 0.5).with_param("n", 4);
        assert_eq!(r.implied_constant, Some(0.5));
        assert!(r.holds_with(0.5));
        assert!(!r.holds_with(0.49));
        assert!(!r.vacuous);
    }

    #[test]
    fn infinite_rhs_is_vacuous() {
        let r = BoundReport::vacuous(InequalityId::Thm1, 0.3, "beta-zero");
        assert!(r.vacuous);
        assert_eq!(r.rhs_unconstanted, None);
        assert_eq!(r.implied_constant, None);
        assert!(r.holds_with(0.0));
        let json = serde_json::to_string(&r).unwrap();
        let back: BoundReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        assert!(json.contains("\"inequality_id\":\"thm1\""));
    }

    #[test]
    fn csv_record_matches_header() {
        let r = BoundReport::new(InequalityId::Eq12sp, 1.0, 3.0);
        assert_eq!(r.csv_record().len(), BoundReport::CSV_HEADER.len());
    }
}
