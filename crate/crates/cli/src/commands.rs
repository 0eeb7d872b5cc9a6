use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;
use trtm_core::dependency_graph::{build_dependency_map, test_class_filter, test_entry_points};
use trtm_core::evaluation::{
    fdr, minimize as minimize_suite, run_sweep, run_version_detailed, Descriptive, HeatmapValue,
    RunConfig, SweepGrid, VersionInput, VersionOutcome,
};
use trtm_core::minimizer::{budget_count, Budget, MinimizationResult};
use trtm_core::temporal_risk::{risk_table, Horizon, RiskConfig, RiskTable};

use crate::failure::{CliResult, Failure};
use crate::manifest::Manifest;
use crate::{EvaluateArgs, MinimizeArgs, ScoreArgs, SweepArgs};

fn seed_check() -> bool {
    std::env::var("TRTM_SEED_CHECK").is_ok_and(|v| v == "1")
}

fn check_risks(table: &RiskTable) {
    for (class, risk) in table {
        assert_eq!(class, &risk.class_id);
        assert!(
            risk.score.is_finite() && risk.score >= 0.0,
            "risk of {class} is {}",
            risk.score
        );
    }
}

fn check_selection(result: &MinimizationResult, budget: Budget) {
    let n = result.selected.len() + result.excluded.len();
    assert_eq!(
        result.scores.len(),
        n,
        "every test must be scored exactly once"
    );
    assert_eq!(result.selected.len(), budget_count(n, budget));
    let ranked: Vec<&String> = result.selected.iter().chain(&result.excluded).collect();
    for pair in ranked.windows(2) {
        let (a, b) = (result.scores[pair[0]], result.scores[pair[1]]);
        assert!(
            a > b || (a == b && pair[0] < pair[1]),
            "{} ranked before {}",
            pair[0],
            pair[1]
        );
    }
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| Failure::write(path, &e))
}

fn prepare_dir(dir: PathBuf) -> CliResult<PathBuf> {
    fs::create_dir_all(&dir).map_err(|e| Failure::write(&dir, &e))?;
    Ok(dir)
}

fn required_output(flag: Option<PathBuf>, manifest: Option<&Manifest>) -> CliResult<PathBuf> {
    flag.or_else(|| manifest.and_then(Manifest::output_dir))
        .ok_or_else(|| {
            Failure::usage("no output directory: pass --output or set output_dir in the manifest")
        })
        .and_then(prepare_dir)
}

fn to_json(value: &impl serde::Serialize) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report values serialize");
    text.push('\n');
    text
}

fn reference_time(flag: Option<i64>, manifest: &Manifest) -> CliResult<i64> {
    if let Some(t) = flag {
        return Ok(t);
    }
    match manifest.label()? {
        Some(label) => Ok(label.as_of),
        None => Err(Failure::usage(
            "no reference time: pass --as-of or give the manifest a label file",
        )),
    }
}

fn risk_csv(table: &RiskTable) -> String {
    let mut out = String::from("class_id,risk\n");
    for (class, risk) in table {
        out.push_str(&format!("{class},{}\n", risk.score));
    }
    out
}

pub fn score(args: ScoreArgs) -> CliResult<()> {
    let manifest = Manifest::load(&args.manifest)?;
    let as_of = reference_time(args.as_of, &manifest)?;
    let cfg = RiskConfig::new(args.risk.metric, args.risk.horizon, as_of)?;
    let table = risk_table(&manifest.histories()?, &cfg);
    if seed_check() {
        check_risks(&table);
    }
    let csv = risk_csv(&table);
    match args.output.or_else(|| manifest.output_dir()) {
        Some(dir) => write_file(&prepare_dir(dir)?.join("risk.csv"), &csv),
        None => io::stdout()
            .write_all(csv.as_bytes())
            .map_err(|e| Failure::write(Path::new("<stdout>"), &e)),
    }
}

pub fn minimize(args: MinimizeArgs) -> CliResult<()> {
    let manifest = Manifest::load(&args.manifest)?;
    let as_of = reference_time(args.as_of, &manifest)?;
    let histories = manifest.histories()?;
    let graph = manifest.graph(args.input.format)?;
    let entries = test_entry_points(&graph, &manifest.entry_selector);
    let filter = test_class_filter(&entries, &manifest.exclude_classes);
    let deps = build_dependency_map(&graph, &entries, &filter);

    let run = RunConfig {
        metric: args.risk.metric,
        horizon: args.risk.horizon,
        operator: args.selection.aggregate,
        budget: args.selection.budget,
    };
    let risk_cfg = RiskConfig::new(run.metric, run.horizon, as_of)?;
    let result = minimize_suite(&histories, &deps, &risk_cfg, run.operator, run.budget)
        .with_fingerprint(run.fingerprint(as_of));
    if seed_check() {
        check_selection(&result, run.budget);
    }

    let dir = required_output(args.input.output, Some(&manifest))?;
    write_file(&dir.join("selected.txt"), &result.selected_lines())?;
    write_file(&dir.join("result.json"), &to_json(&result))
}

fn load_versions(
    paths: &[PathBuf],
    args_format: Option<trtm_core::dependency_graph::EdgeFormat>,
) -> CliResult<Vec<VersionInput>> {
    let inputs: Vec<VersionInput> = paths
        .par_iter()
        .map(|p| Manifest::load(p)?.version_input(args_format))
        .collect::<CliResult<_>>()?;
    let mut seen = std::collections::BTreeSet::new();
    for input in &inputs {
        if !seen.insert(&input.label.version_id) {
            return Err(Failure::usage(format!(
                "version {} appears twice",
                input.label.version_id
            )));
        }
    }
    Ok(inputs)
}

pub const OUTCOMES_HEADER: &str = "version_id,accuracy,detected,wall_time_s";

pub fn outcomes_csv(outcomes: &[VersionOutcome]) -> String {
    let mut out = format!("{OUTCOMES_HEADER}\n");
    for o in outcomes {
        out.push_str(&format!(
            "{},{},{},{}\n",
            o.version_id,
            o.accuracy,
            u8::from(o.detected),
            o.wall_time
        ));
    }
    out
}

pub fn evaluate(args: EvaluateArgs) -> CliResult<()> {
    let output = required_output(args.input.output, None)?;
    let inputs = load_versions(&args.manifests, args.input.format)?;
    let run = RunConfig {
        metric: args.risk.metric,
        horizon: args.risk.horizon,
        operator: args.selection.aggregate,
        budget: args.selection.budget,
    };
    let checking = seed_check();
    let outcomes: Vec<VersionOutcome> = inputs
        .par_iter()
        .map(|input| {
            let (outcome, result) = run_version_detailed(input, &run)?;
            if checking {
                check_selection(&result, run.budget);
            }
            Ok(outcome)
        })
        .collect::<trtm_core::Result<_>>()?;

    let accuracies: Vec<f64> = outcomes.iter().map(|o| o.accuracy).collect();
    let flags: Vec<f64> = outcomes
        .iter()
        .map(|o| f64::from(u8::from(o.detected)))
        .collect();
    let summary = json!({
        "metric": run.metric,
        "horizon": run.horizon.to_string(),
        "aggregate": run.operator,
        "budget": run.budget,
        "versions": outcomes.len(),
        "accuracy": Descriptive::from_values(&accuracies)?,
        "detected": Descriptive::from_values(&flags)?,
        "fdr": fdr(&outcomes)?,
    });
    write_file(&output.join("outcomes.csv"), &outcomes_csv(&outcomes))?;
    write_file(&output.join("summary.json"), &to_json(&summary))
}

pub fn sweep(args: SweepArgs) -> CliResult<()> {
    let output = required_output(args.input.output, None)?;
    let mut grid = SweepGrid::canonical();
    if !args.metrics.is_empty() {
        grid.metrics = args.metrics;
    }
    if !args.horizons.is_empty() {
        grid.horizons = args.horizons;
    }
    if !args.operators.is_empty() {
        grid.operators = args.operators;
    }
    if !args.budgets.is_empty() {
        grid.budgets = args.budgets;
    }
    if args.include_static && !grid.horizons.contains(&Horizon::Static) {
        grid = grid.with_static();
    }
    let inputs = load_versions(&args.manifests, args.input.format)?;
    let report = run_sweep(&inputs, &grid)?;

    write_file(&output.join("sweep.csv"), &report.to_csv())?;
    for budget in &grid.budgets {
        for (name, value) in [
            ("accuracy", HeatmapValue::MeanAccuracy),
            ("fdr", HeatmapValue::Fdr),
        ] {
            let path = output.join(format!("heatmap_{name}_{budget}.csv"));
            write_file(&path, &report.heatmap_csv(*budget, value))?;
        }
    }
    Ok(())
}
