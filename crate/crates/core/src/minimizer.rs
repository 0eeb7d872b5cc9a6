//! Budgeted selection of the highest-scoring tests.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::risk_aggregation::TestScore;
use crate::{Error, Result};

/// Fraction of the suite to keep, in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Budget(f64);

impl Budget {
    pub const CANONICAL: [f64; 3] = [0.25, 0.50, 0.75];

    pub fn new(fraction: f64) -> Result<Self> {
        if fraction > 0.0 && fraction <= 1.0 {
            Ok(Budget(fraction))
        } else {
            Err(Error::invalid(format!(
                "budget must lie in (0, 1], got {fraction}"
            )))
        }
    }

    pub fn canonical() -> Vec<Budget> {
        Self::CANONICAL.iter().map(|&f| Budget(f)).collect()
    }

    pub fn fraction(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Budget {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Budget::new(value)
    }
}

impl From<Budget> for f64 {
    fn from(b: Budget) -> f64 {
        b.0
    }
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for Budget {
    type Err = Error;

    /// Accepts a fraction (`0.5`) or a percentage (`50%`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (number, scale) = match s.strip_suffix('%') {
            Some(p) => (p, 100.0),
            None => (s, 1.0),
        };
        let value: f64 = number
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("budget `{s}` is not a number")))?;
        Budget::new(value / scale)
    }
}

/// Products like `0.29 * 100` land a hair below the intended `.5`
/// boundary; this slack absorbs that without moving genuine fractions.
const ROUNDING_SLACK: f64 = 1e-9;

/// `round_half_up(n * fraction)`, at least one test for a non-empty suite.
pub fn budget_count(n_tests: usize, budget: Budget) -> usize {
    if n_tests == 0 {
        return 0;
    }
    let raw = (n_tests as f64 * budget.0 + 0.5 + ROUNDING_SLACK).floor() as usize;
    raw.clamp(1, n_tests)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizationResult {
    /// Kept tests, best first.
    pub selected: Vec<String>,
    /// Dropped tests, best first.
    pub excluded: Vec<String>,
    pub scores: BTreeMap<String, f64>,
    pub config_fingerprint: String,
}

impl MinimizationResult {
    pub fn with_fingerprint(mut self, fingerprint: impl Into<String>) -> Self {
        self.config_fingerprint = fingerprint.into();
        self
    }

    /// One test id per line, newline-terminated.
    pub fn selected_lines(&self) -> String {
        self.selected.iter().map(|id| format!("{id}\n")).collect()
    }
}

/// Ranks tests by score (descending, ties by ascending id) and keeps the
/// first [`budget_count`] of them.
pub fn select(scores: &BTreeMap<String, TestScore>, budget: Budget) -> MinimizationResult {
    let mut ranked: Vec<(&str, f64)> = scores
        .iter()
        .map(|(id, s)| (id.as_str(), s.score))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let keep = budget_count(ranked.len(), budget);
    let mut ids = ranked.iter().map(|(id, _)| id.to_string());
    let selected: Vec<String> = ids.by_ref().take(keep).collect();
    let excluded: Vec<String> = ids.collect();
    MinimizationResult {
        selected,
        excluded,
        scores: scores.iter().map(|(id, s)| (id.clone(), s.score)).collect(),
        config_fingerprint: String::new(),
    }
}
