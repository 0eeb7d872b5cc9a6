//! Time-decayed class risk.
//!
//! A class's risk is the sum over its change events of
//! `weight * exp(-alpha * age_days)`, where the weight is 1 (change
//! frequency) or `ln(1 + churn)` (change extent) and `alpha = ln 2 / T` for
//! a half-life of `T` days. The static horizon drops the decay entirely and
//! weights every event uniformly regardless of age.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::change_history::{ChangeEvent, ClassHistory};
use crate::{Error, Result};

pub const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeMetric {
    /// Every event weighs 1.
    Frequency,
    /// Every event weighs `ln(1 + added + deleted + modified)`.
    Extent,
}

impl ChangeMetric {
    pub const ALL: [ChangeMetric; 2] = [ChangeMetric::Frequency, ChangeMetric::Extent];

    pub fn as_str(self) -> &'static str {
        match self {
            ChangeMetric::Frequency => "frequency",
            ChangeMetric::Extent => "extent",
        }
    }
}

impl fmt::Display for ChangeMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChangeMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "frequency" | "freq" => Ok(ChangeMetric::Frequency),
            "extent" | "ext" => Ok(ChangeMetric::Extent),
            other => Err(Error::invalid(format!("unknown change metric `{other}`"))),
        }
    }
}

/// Temporal horizon: a half-life in days, or no decay at all.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Horizon {
    HalfLifeDays(f64),
    Static,
}

impl Horizon {
    pub fn half_life(days: f64) -> Result<Self> {
        alpha_from_half_life(days)?;
        Ok(Horizon::HalfLifeDays(days))
    }

    /// The canonical sweep horizons, 1 to 512 days in powers of two.
    pub fn canonical() -> Vec<Horizon> {
        (0..10)
            .map(|k| Horizon::HalfLifeDays(f64::from(1u32 << k)))
            .collect()
    }

    /// Decay rate per day; `None` for the static horizon.
    pub fn alpha(&self) -> Option<f64> {
        match *self {
            Horizon::HalfLifeDays(t) => Some(std::f64::consts::LN_2 / t),
            Horizon::Static => None,
        }
    }
}

impl fmt::Display for Horizon {
    /// `static`, or the half-life in days (integral values without a
    /// fractional part).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Horizon::Static => f.write_str("static"),
            Horizon::HalfLifeDays(t) => write!(f, "{t}"),
        }
    }
}

impl FromStr for Horizon {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("static") {
            return Ok(Horizon::Static);
        }
        let days: f64 = s.parse().map_err(|_| {
            Error::invalid(format!(
                "horizon must be a number of days or `static`, got `{s}`"
            ))
        })?;
        Horizon::half_life(days)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskConfig {
    pub metric: ChangeMetric,
    pub horizon: Horizon,
    /// Evaluation time, seconds since the Unix epoch.
    pub reference_time: i64,
}

impl RiskConfig {
    pub fn new(metric: ChangeMetric, horizon: Horizon, reference_time: i64) -> Result<Self> {
        if let Horizon::HalfLifeDays(t) = horizon {
            alpha_from_half_life(t)?;
        }
        Ok(Self {
            metric,
            horizon,
            reference_time,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRisk {
    pub class_id: String,
    pub score: f64,
}

pub type RiskTable = BTreeMap<String, ClassRisk>;

/// `ln(2) / T`.
pub fn alpha_from_half_life(half_life_days: f64) -> Result<f64> {
    if half_life_days <= 0.0 || !half_life_days.is_finite() {
        return Err(Error::invalid(format!(
            "half-life must be a positive number of days, got {half_life_days}"
        )));
    }
    Ok(std::f64::consts::LN_2 / half_life_days)
}

/// Fractional days between the event and `reference_time`. Negative for
/// events after the reference time.
pub fn event_age_days(event: &ChangeEvent, reference_time: i64) -> f64 {
    (reference_time - event.timestamp) as f64 / SECONDS_PER_DAY
}

pub fn event_weight(event: &ChangeEvent, metric: ChangeMetric) -> f64 {
    match metric {
        ChangeMetric::Frequency => 1.0,
        ChangeMetric::Extent => (1.0 + event.churn() as f64).ln(),
    }
}

/// Decayed risk of one class. Events later than the reference time are
/// ignored; the remaining terms are summed in history order.
pub fn class_risk(history: &ClassHistory, cfg: &RiskConfig) -> ClassRisk {
    let alpha = cfg.horizon.alpha();
    let score = history
        .events
        .iter()
        .filter_map(|event| {
            let age = event_age_days(event, cfg.reference_time);
            if age < 0.0 {
                return None;
            }
            let decay = alpha.map_or(1.0, |a| (-a * age).exp());
            Some(event_weight(event, cfg.metric) * decay)
        })
        .fold(0.0, |acc, term| acc + term);
    ClassRisk {
        class_id: history.class_id.clone(),
        score,
    }
}

pub fn risk_table(histories: &BTreeMap<String, ClassHistory>, cfg: &RiskConfig) -> RiskTable {
    histories
        .iter()
        .map(|(id, h)| (id.clone(), class_risk(h, cfg)))
        .collect()
}
