use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use trtm_core::change_history::{consolidate, parse_change_log, SourceRootConfig};
use trtm_core::dependency_graph::{parse_callgraph_edges, EdgeFormat, EntrySelector};
use trtm_core::evaluation::{run_version, RunConfig, VersionInput, VersionLabel};
use trtm_core::minimizer::Budget;
use trtm_core::risk_aggregation::AggregationOp;
use trtm_core::stats::{
    cliffs_delta, fisher_exact_2x2, wilcoxon_signed_rank, ContingencyTable2x2, PairedSample,
};
use trtm_core::temporal_risk::{risk_table, ChangeMetric, Horizon, RiskConfig};
use trtm_testkit::micro_fixture_dir;

fn trtm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trtm"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Manifest pointing at the shipped fixture, with the given label file.
fn micro_manifest(dir: &Path, name: &str, label: &str) -> PathBuf {
    let fixture = micro_fixture_dir();
    let manifest = serde_json::json!({
        "project_id": "micro",
        "change_log": fixture.join("changes.jsonl"),
        "callgraph": fixture.join("callgraph.txt"),
        "labels": fixture.join(label),
    });
    let path = dir.join(name);
    fs::write(&path, manifest.to_string()).unwrap();
    path
}

fn parse_risk_csv(csv: &str) -> Vec<(String, f64)> {
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("class_id,risk"));
    lines
        .map(|l| {
            let (c, r) = l.split_once(',').unwrap();
            (c.to_string(), r.parse().unwrap())
        })
        .collect()
}

fn micro_input(label: &str) -> VersionInput {
    let fixture = micro_fixture_dir();
    let events =
        parse_change_log(fs::read(fixture.join("changes.jsonl")).unwrap().as_slice()).unwrap();
    let graph = parse_callgraph_edges(
        fs::read(fixture.join("callgraph.txt")).unwrap().as_slice(),
        EdgeFormat::CallgraphText,
    )
    .unwrap()
    .graph;
    let label: VersionLabel =
        serde_json::from_slice(&fs::read(fixture.join(label)).unwrap()).unwrap();
    VersionInput::new(
        consolidate(&events, &SourceRootConfig::default()),
        graph,
        &EntrySelector::default(),
        &[],
        label,
    )
}

#[test]
fn static_frequency_scores_are_event_counts() {
    let dir = tempfile::tempdir().unwrap();
    let m = micro_manifest(dir.path(), "m.json", "label.json");
    let csv = ok(&trtm(&[
        "score",
        p(&m),
        "--metric",
        "frequency",
        "--horizon",
        "static",
    ]));
    let expected = [
        ("org.acme.A", 5.0),
        ("org.acme.B", 3.0),
        ("org.acme.C", 2.0),
        ("org.acme.FooTest", 1.0),
    ];
    let got = parse_risk_csv(&csv);
    assert_eq!(got.len(), expected.len());
    for ((c, r), (ec, er)) in got.iter().zip(expected) {
        assert_eq!((c.as_str(), *r), (ec, er));
    }
}

#[test]
fn decayed_scores_match_library() {
    let dir = tempfile::tempdir().unwrap();
    let m = micro_manifest(dir.path(), "m.json", "label.json");
    let out = dir.path().join("scores");
    ok(&trtm(&[
        "score",
        p(&m),
        "--horizon",
        "32",
        "--as-of",
        "1700000000",
        "--output",
        p(&out),
    ]));
    let got = parse_risk_csv(&fs::read_to_string(out.join("risk.csv")).unwrap());
    let cfg = RiskConfig::new(
        ChangeMetric::Extent,
        Horizon::HalfLifeDays(32.0),
        1_700_000_000,
    )
    .unwrap();
    let table = risk_table(&micro_input("label.json").histories, &cfg);
    assert_eq!(got.len(), table.len());
    for (class, risk) in got {
        assert_eq!(risk, table[&class].score, "{class}");
    }
}

#[test]
fn missing_and_malformed_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = trtm(&["score", p(&dir.path().join("absent.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.json"));

    fs::write(
        dir.path().join("bad.jsonl"),
        "{\"path\":\"A.java\",\"ts\":5,\"add\":1,\"del\":0,\"commit\":\"c\"}\nnot json\n",
    )
    .unwrap();
    fs::write(dir.path().join("cg.txt"), "").unwrap();
    fs::write(
        dir.path().join("m.json"),
        r#"{"project_id":"x","change_log":"bad.jsonl","callgraph":"cg.txt"}"#,
    )
    .unwrap();
    let out = trtm(&["score", p(&dir.path().join("m.json")), "--as-of", "10"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    // no label and no --as-of
    let out = trtm(&["score", p(&dir.path().join("m.json"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn minimize_writes_deterministic_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let m = micro_manifest(dir.path(), "m.json", "label.json");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&trtm(&[
            "minimize",
            p(&m),
            "--budget",
            "0.5",
            "--output",
            p(out),
        ]));
    }
    let selected = fs::read_to_string(a.join("selected.txt")).unwrap();
    assert_eq!(
        selected,
        "org.acme.FooTest#testAlpha\norg.acme.FooTest#testBoth\n"
    );
    for file in ["selected.txt", "result.json"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap()
        );
    }
    let result: Value = serde_json::from_slice(&fs::read(a.join("result.json")).unwrap()).unwrap();
    assert_eq!(result["excluded"].as_array().unwrap().len(), 2);

    let zero = trtm(&["minimize", p(&m), "--budget", "0.0", "--output", p(&a)]);
    assert_eq!(zero.status.code(), Some(1));
}

#[test]
fn seed_checks_pass_on_the_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let m = micro_manifest(dir.path(), "m.json", "label.json");
    let out = Command::new(env!("CARGO_BIN_EXE_trtm"))
        .args([
            "minimize",
            p(&m),
            "--budget",
            "75%",
            "--output",
            p(dir.path()),
        ])
        .env("TRTM_SEED_CHECK", "1")
        .output()
        .unwrap();
    ok(&out);
    assert_eq!(
        fs::read_to_string(dir.path().join("selected.txt"))
            .unwrap()
            .lines()
            .count(),
        3
    );
}

#[test]
fn evaluate_matches_library_runs() {
    let dir = tempfile::tempdir().unwrap();
    let m1 = micro_manifest(dir.path(), "m1.json", "label.json");
    let m2 = micro_manifest(dir.path(), "m2.json", "label_second.json");
    let out = dir.path().join("eval");
    ok(&trtm(&[
        "evaluate",
        p(&m1),
        p(&m2),
        "--metric",
        "frequency",
        "--horizon",
        "8",
        "--aggregate",
        "hmean",
        "--budget",
        "0.25",
        "--output",
        p(&out),
        "--jobs",
        "2",
    ]));
    let csv = fs::read_to_string(out.join("outcomes.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    let cfg = RunConfig {
        metric: ChangeMetric::Frequency,
        horizon: Horizon::HalfLifeDays(8.0),
        operator: AggregationOp::HMean,
        budget: Budget::new(0.25).unwrap(),
    };
    for (row, label) in rows.iter().zip(["label.json", "label_second.json"]) {
        let expected = run_version(&micro_input(label), &cfg).unwrap();
        assert_eq!(row[0], expected.version_id);
        assert_eq!(row[1].parse::<f64>().unwrap(), expected.accuracy);
        assert_eq!(row[2], if expected.detected { "1" } else { "0" });
    }
    let summary: Value =
        serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["fdr"], 0.5);
    assert_eq!(summary["accuracy"]["median"], 0.5);

    let all = dir.path().join("all");
    ok(&trtm(&[
        "evaluate",
        p(&m1),
        p(&m2),
        "--budget",
        "0.5",
        "--output",
        p(&all),
    ]));
    let summary: Value =
        serde_json::from_slice(&fs::read(all.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["fdr"], 1.0);
}

#[test]
fn label_problems_exit_with_code_four() {
    let dir = tempfile::tempdir().unwrap();
    let missing = micro_manifest(dir.path(), "m.json", "no_such_label.json");
    let out = trtm(&[
        "evaluate",
        p(&missing),
        "--output",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(4));

    fs::write(
        dir.path().join("empty.json"),
        r#"{"version_id":"v","as_of":1700000000,"fault_revealing_tests":[]}"#,
    )
    .unwrap();
    let fixture = micro_fixture_dir();
    let manifest = serde_json::json!({
        "project_id": "micro",
        "change_log": fixture.join("changes.jsonl"),
        "callgraph": fixture.join("callgraph.txt"),
        "labels": "empty.json",
    });
    fs::write(dir.path().join("unlabeled.json"), manifest.to_string()).unwrap();
    let out = trtm(&[
        "evaluate",
        p(&dir.path().join("unlabeled.json")),
        "--output",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn sweep_writes_one_row_per_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let m1 = micro_manifest(dir.path(), "m1.json", "label.json");
    let out = dir.path().join("sweep");
    ok(&trtm(&["sweep", p(&m1), "--output", p(&out)]));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 80 * 3);

    let small = dir.path().join("small");
    ok(&trtm(&[
        "sweep",
        p(&m1),
        "--metric",
        "extent",
        "--horizon",
        "32",
        "--aggregate",
        "gmean",
        "--aggregate",
        "avg",
        "--budget",
        "50%",
        "--include-static",
        "--output",
        p(&small),
    ]));
    let csv = fs::read_to_string(small.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
    let heat = fs::read_to_string(small.join("heatmap_fdr_0.5.csv")).unwrap();
    assert_eq!(
        heat,
        "metric,horizon_days,gmean,avg\nextent,32,1,1\nextent,static,1,1\n"
    );
}

fn write_outcomes(path: &Path, rows: &[(&str, f64, bool)]) {
    let mut text = String::from("version_id,accuracy,detected,wall_time_s\n");
    for (v, acc, det) in rows {
        text.push_str(&format!("{v},{acc},{},0.1\n", u8::from(*det)));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn compare_identical_outcomes_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    write_outcomes(
        &a,
        &[("v1", 1.0, true), ("v2", 0.5, true), ("v3", 0.0, false)],
    );
    let report: Value = serde_json::from_str(&ok(&trtm(&["compare", p(&a), p(&a)]))).unwrap();
    assert_eq!(
        report["accuracy"]["wilcoxon"]["status"],
        "degenerate sample"
    );
    assert_eq!(report["accuracy"]["cliffs_delta"], 0.0);
    assert_eq!(report["detection"]["fisher"]["p_two_sided"], 1.0);
}

#[test]
fn compare_matches_stats_module() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let acc_a = [1.0, 0.5, 1.0, 0.75, 1.0, 0.25, 1.0, 1.0];
    let acc_b = [0.5, 0.5, 0.0, 0.25, 1.0, 0.0, 0.5, 0.0];
    let ids: Vec<String> = (0..acc_a.len()).map(|i| format!("v{i}")).collect();
    let rows = |acc: &[f64]| -> Vec<(&str, f64, bool)> {
        ids.iter()
            .zip(acc)
            .map(|(id, x)| (id.as_str(), *x, *x > 0.0))
            .collect()
    };
    write_outcomes(&a, &rows(&acc_a));
    write_outcomes(&b, &rows(&acc_b));
    let report_path = dir.path().join("report.json");
    ok(&trtm(&[
        "compare",
        p(&a),
        p(&b),
        "--bonferroni-m",
        "4",
        "--output",
        p(&report_path),
    ]));
    let report: Value = serde_json::from_slice(&fs::read(&report_path).unwrap()).unwrap();

    let pairs: Vec<(f64, f64)> = acc_a.iter().copied().zip(acc_b).collect();
    let w = wilcoxon_signed_rank(&PairedSample::new(pairs).unwrap()).unwrap();
    let f = fisher_exact_2x2(ContingencyTable2x2::new(8, 0, 5, 3).unwrap());
    assert_eq!(report["accuracy"]["wilcoxon"]["p_two_sided"], w.p_two_sided);
    assert_eq!(
        report["accuracy"]["wilcoxon"]["p_adjusted"],
        (w.p_two_sided * 4.0).min(1.0)
    );
    assert_eq!(
        report["accuracy"]["cliffs_delta"],
        cliffs_delta(&acc_a, &acc_b).unwrap()
    );
    assert_eq!(report["detection"]["fisher"]["p_two_sided"], f.p_two_sided);
    assert_eq!(
        report["detection"]["fisher"]["p_adjusted"],
        (f.p_two_sided * 4.0).min(1.0)
    );
    assert_eq!(report["detection"]["fisher"]["odds_ratio"], "inf");
}

#[test]
fn compare_rejects_misaligned_versions() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    write_outcomes(&a, &[("v1", 1.0, true), ("v2", 0.0, false)]);
    write_outcomes(&b, &[("v1", 1.0, true), ("v3", 0.0, false)]);
    let out = trtm(&["compare", p(&a), p(&b)]);
    assert_eq!(out.status.code(), Some(5));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("v2") && err.contains("v3"), "{err}");
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(trtm(&["--help"]).status.code(), Some(0));
    assert_eq!(trtm(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        trtm(&["score", "m.json", "--metric", "sum"]).status.code(),
        Some(1)
    );
    assert_eq!(
        trtm(&["minimize", "m.json", "--aggregate", "max"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        trtm(&["--jobs", "0", "compare", "a", "b"]).status.code(),
        Some(1)
    );
}
