//! Verification records shared by the suites.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// Passes when the residual is below the tolerance.
    Below,
    /// Passes when the measured deviation exceeds the threshold (negative controls).
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check_name: String,
    pub points_tested: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckResult {
    pub fn below(name: &str, points: usize, residual: f64, tolerance: f64) -> Self {
        Self {
            check_name: name.to_string(),
            points_tested: points,
            max_residual: residual,
            tolerance,
            relation: Relation::Below,
            pass: residual < tolerance,
            note: None,
        }
    }

    pub fn above(name: &str, points: usize, deviation: f64, threshold: f64) -> Self {
        Self {
            check_name: name.to_string(),
            points_tested: points,
            max_residual: deviation,
            tolerance: threshold,
            relation: Relation::Above,
            pass: deviation > threshold,
            note: None,
        }
    }

    /// A check whose computation itself failed.
    pub fn errored(name: &str, points: usize, tolerance: f64, err: impl std::fmt::Display) -> Self {
        Self {
            check_name: name.to_string(),
            points_tested: points,
            max_residual: f64::NAN,
            tolerance,
            relation: Relation::Below,
            pass: false,
            note: Some(err.to_string()),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// NaN-propagating running maximum.
pub fn worst(acc: f64, x: f64) -> f64 {
    if acc.is_nan() || x.is_nan() {
        f64::NAN
    } else {
        acc.max(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    /// Conventions and other values fixed while running the suite.
    pub records: BTreeMap<String, String>,
}

impl SuiteReport {
    pub fn new(suite: &str, seed: u64) -> Self {
        Self { suite: suite.to_string(), seed, ..Default::default() }
    }

    pub fn push(&mut self, c: CheckResult) {
        self.checks.push(c);
    }

    pub fn record(&mut self, key: &str, value: impl Into<String>) {
        self.records.insert(key.to_string(), value.into());
    }

    /// Orders checks by name.
    pub fn finish(mut self) -> Self {
        self.checks.sort_by(|a, b| a.check_name.cmp(&b.check_name));
        self
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Re-judges the named check against a new tolerance; false when no such check exists.
    pub fn override_tolerance(&mut self, name: &str, tolerance: f64) -> bool {
        let Some(c) = self.checks.iter_mut().find(|c| c.check_name == name) else {
            return false;
        };
        c.tolerance = tolerance;
        c.pass = match c.relation {
            Relation::Below => c.max_residual < tolerance,
            Relation::Above => c.max_residual > tolerance,
        };
        true
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.check_name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nan_fails_both_relations() {
        assert!(!CheckResult::below("a", 1, f64::NAN, 1.0).pass);
        assert!(!CheckResult::above("a", 1, f64::NAN, 1.0).pass);
        assert!(worst(worst(0.0, f64::NAN), 1.0).is_nan());
    }

    #[test]
    fn finish_sorts_by_name() {
        let mut r = SuiteReport::new("s", 1);
        r.push(CheckResult::below("b", 1, 0.0, 1.0));
        r.push(CheckResult::below("a", 1, 2.0, 1.0));
        let r = r.finish();
        assert_eq!(r.checks[0].check_name, "a");
        assert!(!r.passed());
        let mut r = r;
        assert!(r.override_tolerance("a", 3.0));
        assert!(r.passed());
        assert!(!r.override_tolerance("c", 3.0));
    }
}
