//! Collapsing a test's class risks into one score.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::temporal_risk::RiskTable;
use crate::{Error, Result};

/// Central-tendency operators. Min, Max, Sum and standard deviation are
/// deliberately not offered: they chase outliers or dependency counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationOp {
    Avg,
    GMean,
    HMean,
    Median,
}

impl AggregationOp {
    pub const ALL: [AggregationOp; 4] = [
        AggregationOp::Avg,
        AggregationOp::GMean,
        AggregationOp::HMean,
        AggregationOp::Median,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AggregationOp::Avg => "avg",
            AggregationOp::GMean => "gmean",
            AggregationOp::HMean => "hmean",
            AggregationOp::Median => "median",
        }
    }
}

impl fmt::Display for AggregationOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AggregationOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "avg" | "mean" => Ok(AggregationOp::Avg),
            "gmean" => Ok(AggregationOp::GMean),
            "hmean" => Ok(AggregationOp::HMean),
            "median" => Ok(AggregationOp::Median),
            other => Err(Error::invalid(format!(
                "unsupported aggregation operator `{other}` (expected avg, gmean, hmean or median)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestScore {
    pub test_id: String,
    pub score: f64,
    pub dep_count: usize,
    /// Dependencies with positive risk, i.e. the ones that were aggregated.
    pub nonzero_dep_count: usize,
}

/// Aggregates strictly positive values. The input is sorted before any
/// reduction so the result does not depend on input order.
pub fn aggregate(values: &[f64], op: AggregationOp) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("cannot aggregate an empty set of risks"));
    }
    if let Some(bad) = values.iter().find(|v| **v <= 0.0 || !v.is_finite()) {
        return Err(Error::invalid(format!(
            "aggregated risks must be finite and positive, got {bad}"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(aggregate_sorted(&sorted, op))
}

pub(crate) fn aggregate_sorted(sorted: &[f64], op: AggregationOp) -> f64 {
    let n = sorted.len() as f64;
    match op {
        AggregationOp::Avg => sorted.iter().sum::<f64>() / n,
        AggregationOp::GMean => (sorted.iter().map(|v| v.ln()).sum::<f64>() / n).exp(),
        AggregationOp::HMean => n / sorted.iter().map(|v| v.recip()).sum::<f64>(),
        AggregationOp::Median => median_sorted(sorted),
    }
}

/// Middle element, or the mean of the middle pair for even lengths.
pub(crate) fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Scores one test from the risks of its dependency classes.
///
/// Classes missing from `risks` count as risk 0. Zero-risk classes are left
/// out of the aggregation; a test with nothing left scores 0.
pub fn score_test(
    test_id: &str,
    deps: &BTreeSet<String>,
    risks: &RiskTable,
    op: AggregationOp,
) -> TestScore {
    let mut values: Vec<f64> = deps
        .iter()
        .filter_map(|c| risks.get(c).map(|r| r.score))
        .filter(|&r| r > 0.0)
        .collect();
    values.sort_by(f64::total_cmp);
    let score = if values.is_empty() {
        0.0
    } else {
        aggregate_sorted(&values, op)
    };
    TestScore {
        test_id: test_id.to_string(),
        score,
        dep_count: deps.len(),
        nonzero_dep_count: values.len(),
    }
}

pub fn score_tests(
    deps: &BTreeMap<String, BTreeSet<String>>,
    risks: &RiskTable,
    op: AggregationOp,
) -> BTreeMap<String, TestScore> {
    deps.iter()
        .map(|(id, classes)| (id.clone(), score_test(id, classes, risks, op)))
        .collect()
}
