//! Fault-preservation metrics and configuration sweeps.
//!
//! A labeled version knows which tests reveal its fault. Minimizing its
//! suite under a configuration yields an [`VersionOutcome`] holding the
//! Accuracy (share of fault-revealing tests kept) and whether any of them
//! survived. Over many versions, the FDR is the share that kept at least one.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::change_history::ClassHistory;
use crate::dependency_graph::{
    build_dependency_map, test_class_filter, test_entry_points, CallGraph, DependencyMap,
    EntryPoint, EntrySelector,
};
use crate::minimizer::{select, Budget, MinimizationResult};
use crate::risk_aggregation::{aggregate_sorted, median_sorted, score_tests, AggregationOp};
use crate::temporal_risk::{risk_table, ChangeMetric, Horizon, RiskConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionLabel {
    pub version_id: String,
    /// Evaluation time of the version, seconds since the Unix epoch.
    pub as_of: i64,
    pub fault_revealing_tests: BTreeSet<String>,
}

impl VersionLabel {
    pub fn ensure_labeled(&self) -> Result<()> {
        if self.fault_revealing_tests.is_empty() {
            return Err(Error::UnlabeledVersion(self.version_id.clone()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionOutcome {
    pub version_id: String,
    pub accuracy: f64,
    pub detected: bool,
    /// Seconds spent in ingestion and every pipeline stage.
    pub wall_time: f64,
    pub config_fingerprint: String,
}

/// One point of the configuration space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub metric: ChangeMetric,
    pub horizon: Horizon,
    pub operator: AggregationOp,
    pub budget: Budget,
}

impl RunConfig {
    pub fn fingerprint(&self, as_of: i64) -> String {
        format!(
            "metric={};horizon={};aggregate={};budget={};as_of={}",
            self.metric, self.horizon, self.operator, self.budget, as_of
        )
    }
}

/// Everything needed to minimize one version's suite.
#[derive(Debug, Clone)]
pub struct VersionInput {
    pub histories: BTreeMap<String, ClassHistory>,
    pub graph: CallGraph,
    pub entries: Vec<EntryPoint>,
    pub test_class_filter: BTreeSet<String>,
    pub label: VersionLabel,
    /// Time already spent reading and consolidating inputs.
    pub ingest_time: Duration,
}

impl VersionInput {
    pub fn new(
        histories: BTreeMap<String, ClassHistory>,
        graph: CallGraph,
        selector: &EntrySelector,
        extra_exclusions: &[String],
        label: VersionLabel,
    ) -> Self {
        let entries = test_entry_points(&graph, selector);
        let test_class_filter = test_class_filter(&entries, extra_exclusions);
        Self {
            histories,
            graph,
            entries,
            test_class_filter,
            label,
            ingest_time: Duration::ZERO,
        }
    }

    pub fn with_ingest_time(mut self, ingest_time: Duration) -> Self {
        self.ingest_time = ingest_time;
        self
    }

    pub fn dependency_map(&self) -> DependencyMap {
        build_dependency_map(&self.graph, &self.entries, &self.test_class_filter)
    }
}

/// Scores and ranks every test of a dependency map.
pub fn minimize(
    histories: &BTreeMap<String, ClassHistory>,
    deps: &DependencyMap,
    risk_cfg: &RiskConfig,
    operator: AggregationOp,
    budget: Budget,
) -> MinimizationResult {
    let risks = risk_table(histories, risk_cfg);
    let scores = score_tests(&deps.deps, &risks, operator);
    select(&scores, budget)
}

/// `|selected ∩ F| / |F|`.
pub fn accuracy(selected: &[String], label: &VersionLabel) -> Result<f64> {
    label.ensure_labeled()?;
    let kept: HashSet<&str> = selected.iter().map(String::as_str).collect();
    let hits = label
        .fault_revealing_tests
        .iter()
        .filter(|t| kept.contains(t.as_str()))
        .count();
    Ok(hits as f64 / label.fault_revealing_tests.len() as f64)
}

/// Share of outcomes that kept at least one fault-revealing test.
pub fn fdr(outcomes: &[VersionOutcome]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::invalid("FDR needs at least one version outcome"));
    }
    let detected = outcomes.iter().filter(|o| o.detected).count();
    Ok(detected as f64 / outcomes.len() as f64)
}

/// Runs the whole pipeline for one version and configuration, returning
/// the minimized suite alongside its outcome.
pub fn run_version_detailed(
    input: &VersionInput,
    cfg: &RunConfig,
) -> Result<(VersionOutcome, MinimizationResult)> {
    input.label.ensure_labeled()?;
    let started = Instant::now();
    let risk_cfg = RiskConfig::new(cfg.metric, cfg.horizon, input.label.as_of)?;
    let deps = input.dependency_map();
    let fingerprint = cfg.fingerprint(input.label.as_of);
    let result = minimize(&input.histories, &deps, &risk_cfg, cfg.operator, cfg.budget)
        .with_fingerprint(fingerprint.clone());
    let acc = accuracy(&result.selected, &input.label)?;
    let elapsed = started.elapsed() + input.ingest_time;
    Ok((
        VersionOutcome {
            version_id: input.label.version_id.clone(),
            accuracy: acc,
            detected: acc > 0.0,
            wall_time: elapsed.as_secs_f64(),
            config_fingerprint: fingerprint,
        },
        result,
    ))
}

pub fn run_version(input: &VersionInput, cfg: &RunConfig) -> Result<VersionOutcome> {
    run_version_detailed(input, cfg).map(|(outcome, _)| outcome)
}

/// min, Q1, mean, median, Q3, max.
///
/// Quartiles are medians of the lower and upper halves (the middle element
/// is excluded from both halves for odd lengths).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Descriptive {
    pub min: f64,
    pub q1: f64,
    pub mean: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Descriptive {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid(
                "descriptive statistics need at least one value",
            ));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let (lower, upper) = if n == 1 {
            (&sorted[..], &sorted[..])
        } else {
            (&sorted[..n / 2], &sorted[n.div_ceil(2)..])
        };
        Ok(Self {
            min: sorted[0],
            q1: median_sorted(lower),
            mean: aggregate_sorted(&sorted, AggregationOp::Avg),
            median: median_sorted(&sorted),
            q3: median_sorted(upper),
            max: sorted[n - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub metrics: Vec<ChangeMetric>,
    pub horizons: Vec<Horizon>,
    pub operators: Vec<AggregationOp>,
    pub budgets: Vec<Budget>,
}

impl SweepGrid {
    /// 2 metrics x 10 half-lives (1..512 days) x 4 operators, at the 25,
    /// 50 and 75% budgets.
    pub fn canonical() -> Self {
        Self {
            metrics: ChangeMetric::ALL.to_vec(),
            horizons: Horizon::canonical(),
            operators: AggregationOp::ALL.to_vec(),
            budgets: Budget::canonical(),
        }
    }

    pub fn with_static(mut self) -> Self {
        if !self.horizons.contains(&Horizon::Static) {
            self.horizons.push(Horizon::Static);
        }
        self
    }

    pub fn cells_per_budget(&self) -> usize {
        self.metrics.len() * self.horizons.len() * self.operators.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells_per_budget() == 0 || self.budgets.is_empty() {
            return Err(Error::invalid("sweep grid has an empty dimension"));
        }
        Ok(())
    }

    fn configs(&self) -> Vec<RunConfig> {
        let mut out = Vec::with_capacity(self.cells_per_budget() * self.budgets.len());
        for &metric in &self.metrics {
            for &horizon in &self.horizons {
                for &operator in &self.operators {
                    for &budget in &self.budgets {
                        out.push(RunConfig {
                            metric,
                            horizon,
                            operator,
                            budget,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub config: RunConfig,
    pub mean_accuracy: f64,
    pub fdr: f64,
    pub accuracy: Descriptive,
    pub mean_time_s: f64,
    /// In dataset order.
    pub outcomes: Vec<VersionOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub grid: SweepGrid,
    /// Ordered metric, horizon, operator, budget as listed in the grid.
    pub cells: Vec<SweepCell>,
}

pub const SWEEP_CSV_HEADER: &str = "metric,horizon_days,operator,budget,mean_accuracy,fdr,min_acc,q1_acc,median_acc,q3_acc,max_acc,mean_time_s";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatmapValue {
    MeanAccuracy,
    Fdr,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_CSV_HEADER);
        out.push('\n');
        for cell in &self.cells {
            let c = &cell.config;
            let a = &cell.accuracy;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                c.metric,
                c.horizon,
                c.operator,
                c.budget,
                cell.mean_accuracy,
                cell.fdr,
                a.min,
                a.q1,
                a.median,
                a.q3,
                a.max,
                cell.mean_time_s
            );
        }
        out
    }

    /// Horizon rows by operator columns, one block of rows per metric, for
    /// a single budget.
    pub fn heatmap_csv(&self, budget: Budget, value: HeatmapValue) -> String {
        let mut out = String::from("metric,horizon_days");
        for op in &self.grid.operators {
            let _ = write!(out, ",{op}");
        }
        out.push('\n');
        for metric in &self.grid.metrics {
            for horizon in &self.grid.horizons {
                let _ = write!(out, "{metric},{horizon}");
                for op in &self.grid.operators {
                    let cell = self.cells.iter().find(|c| {
                        c.config.metric == *metric
                            && c.config.horizon == *horizon
                            && c.config.operator == *op
                            && c.config.budget == budget
                    });
                    match cell {
                        Some(c) => {
                            let v = match value {
                                HeatmapValue::MeanAccuracy => c.mean_accuracy,
                                HeatmapValue::Fdr => c.fdr,
                            };
                            let _ = write!(out, ",{v}");
                        }
                        None => out.push(','),
                    }
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Evaluates every grid configuration on every version.
///
/// Dependency maps are computed once per version and risk tables once per
/// `(version, metric, horizon)`, then shared by all operators and budgets.
/// Versions run in parallel on the current rayon pool.
pub fn run_sweep(dataset: &[VersionInput], grid: &SweepGrid) -> Result<SweepReport> {
    grid.validate()?;
    if dataset.is_empty() {
        return Err(Error::invalid("sweep needs at least one version"));
    }
    for input in dataset {
        input.label.ensure_labeled()?;
    }
    let configs = grid.configs();

    let per_version: Vec<Vec<VersionOutcome>> = dataset
        .par_iter()
        .map(|input| sweep_version(input, grid, configs.len()))
        .collect::<Result<_>>()?;

    let cells = configs
        .iter()
        .enumerate()
        .map(|(idx, config)| {
            let outcomes: Vec<VersionOutcome> =
                per_version.iter().map(|v| v[idx].clone()).collect();
            let accs: Vec<f64> = outcomes.iter().map(|o| o.accuracy).collect();
            let accuracy = Descriptive::from_values(&accs)?;
            let times: Vec<f64> = outcomes.iter().map(|o| o.wall_time).collect();
            Ok(SweepCell {
                config: *config,
                mean_accuracy: accuracy.mean,
                fdr: fdr(&outcomes)?,
                accuracy,
                mean_time_s: times.iter().sum::<f64>() / times.len() as f64,
                outcomes,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SweepReport {
        grid: grid.clone(),
        cells,
    })
}

/// Outcomes for one version in `grid.configs()` order.
fn sweep_version(
    input: &VersionInput,
    grid: &SweepGrid,
    n_configs: usize,
) -> Result<Vec<VersionOutcome>> {
    let as_of = input.label.as_of;
    let started = Instant::now();
    let deps = input.dependency_map();
    let shared_time = started.elapsed() + input.ingest_time;

    let mut outcomes = Vec::with_capacity(n_configs);
    for &metric in &grid.metrics {
        for &horizon in &grid.horizons {
            let risk_started = Instant::now();
            let risks = risk_table(&input.histories, &RiskConfig::new(metric, horizon, as_of)?);
            let risk_time = risk_started.elapsed();
            for &operator in &grid.operators {
                let score_started = Instant::now();
                let scores = score_tests(&deps.deps, &risks, operator);
                let score_time = score_started.elapsed();
                for &budget in &grid.budgets {
                    let select_started = Instant::now();
                    let config = RunConfig {
                        metric,
                        horizon,
                        operator,
                        budget,
                    };
                    let result = select(&scores, budget);
                    let acc = accuracy(&result.selected, &input.label)?;
                    let wall = shared_time + risk_time + score_time + select_started.elapsed();
                    outcomes.push(VersionOutcome {
                        version_id: input.label.version_id.clone(),
                        accuracy: acc,
                        detected: acc > 0.0,
                        wall_time: wall.as_secs_f64(),
                        config_fingerprint: config.fingerprint(as_of),
                    });
                }
            }
        }
    }
    Ok(outcomes)
}
