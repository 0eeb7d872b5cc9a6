//! Paired comparison of two `outcomes.csv` files.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Deserialize;
use serde_json::{json, Value};
use trtm_core::stats::{
    bonferroni, cliffs_delta, fisher_exact_2x2, wilcoxon_signed_rank, ContingencyTable2x2,
    PairedSample, WilcoxonMethod,
};

use crate::failure::{CliResult, ExitCode, Failure};
use crate::CompareArgs;

#[derive(Debug, Deserialize)]
struct OutcomeRow {
    version_id: String,
    accuracy: f64,
    detected: String,
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    accuracy: f64,
    detected: bool,
}

fn read_outcomes(path: &Path) -> CliResult<BTreeMap<String, Outcome>> {
    let file = std::fs::File::open(path).map_err(|e| Failure::missing(path, &e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut rows = BTreeMap::new();
    for (i, record) in reader.deserialize::<OutcomeRow>().enumerate() {
        // header is line 1
        let line = i + 2;
        let parse_err = |msg: String| {
            Failure::new(
                ExitCode::Parse,
                format!("{}: {msg} at line {line}", path.display()),
            )
        };
        let row = record.map_err(|e| parse_err(e.to_string()))?;
        let detected = match row.detected.trim() {
            "1" | "true" => true,
            "0" | "false" => false,
            other => {
                return Err(parse_err(format!(
                    "detected must be 0/1 or true/false, got `{other}`"
                )))
            }
        };
        if !(0.0..=1.0).contains(&row.accuracy) {
            return Err(parse_err(format!(
                "accuracy {} outside [0, 1]",
                row.accuracy
            )));
        }
        let outcome = Outcome {
            accuracy: row.accuracy,
            detected,
        };
        if rows.insert(row.version_id.clone(), outcome).is_some() {
            return Err(Failure::new(
                ExitCode::Alignment,
                format!(
                    "{}: version {} listed twice",
                    path.display(),
                    row.version_id
                ),
            ));
        }
    }
    Ok(rows)
}

fn number(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn missing_list(
    from: &BTreeMap<String, Outcome>,
    other: &BTreeMap<String, Outcome>,
) -> Vec<String> {
    from.keys()
        .filter(|k| !other.contains_key(*k))
        .cloned()
        .collect()
}

/// Builds the comparison report for two aligned outcome sets.
fn report(
    a: &BTreeMap<String, Outcome>,
    b: &BTreeMap<String, Outcome>,
    m: usize,
) -> CliResult<Value> {
    let only_a = missing_list(a, b);
    let only_b = missing_list(b, a);
    if !only_a.is_empty() || !only_b.is_empty() {
        return Err(Failure::new(
            ExitCode::Alignment,
            format!(
                "version ids do not align; missing from B: [{}]; missing from A: [{}]",
                only_a.join(", "),
                only_b.join(", ")
            ),
        ));
    }
    if a.is_empty() {
        return Err(Failure::usage("outcome files contain no versions"));
    }

    let acc_a: Vec<f64> = a.values().map(|o| o.accuracy).collect();
    let acc_b: Vec<f64> = b.values().map(|o| o.accuracy).collect();
    let pairs: Vec<(f64, f64)> = acc_a.iter().copied().zip(acc_b.iter().copied()).collect();
    let wilcoxon = wilcoxon_signed_rank(&PairedSample::new(pairs)?);

    let count =
        |set: &BTreeMap<String, Outcome>| set.values().filter(|o| o.detected).count() as u64;
    let (hits_a, hits_b) = (count(a), count(b));
    let n = a.len() as u64;
    let table = ContingencyTable2x2::new(hits_a, n - hits_a, hits_b, n - hits_b)?;
    let fisher = fisher_exact_2x2(table);

    let mut raw_p = vec![fisher.p_two_sided];
    if let Ok(w) = &wilcoxon {
        raw_p.push(w.p_two_sided);
    }
    let adjusted = bonferroni(&raw_p, m)?;

    let wilcoxon_json = match wilcoxon {
        Ok(w) => json!({
            "status": "ok",
            "statistic": w.statistic,
            "w_plus": w.w_plus,
            "w_minus": w.w_minus,
            "n_effective": w.n_effective,
            "method": match w.method {
                WilcoxonMethod::Exact => "exact",
                WilcoxonMethod::Normal => "normal",
            },
            "p_two_sided": w.p_two_sided,
            "p_adjusted": adjusted[1],
        }),
        Err(trtm_core::Error::DegenerateSample) => json!({ "status": "degenerate sample" }),
        Err(other) => return Err(other.into()),
    };

    Ok(json!({
        "versions": n,
        "bonferroni_m": m,
        "accuracy": {
            "mean_a": acc_a.iter().sum::<f64>() / n as f64,
            "mean_b": acc_b.iter().sum::<f64>() / n as f64,
            "wilcoxon": wilcoxon_json,
            "cliffs_delta": cliffs_delta(&acc_a, &acc_b)?,
        },
        "detection": {
            "detected_a": hits_a,
            "detected_b": hits_b,
            "fisher": {
                "table": [[table.a, table.b], [table.c, table.d]],
                "p_two_sided": fisher.p_two_sided,
                "p_adjusted": adjusted[0],
                "odds_ratio": number(fisher.odds_ratio),
            },
        },
    }))
}

pub fn compare(args: CompareArgs) -> CliResult<()> {
    let a = read_outcomes(&args.a)?;
    let b = read_outcomes(&args.b)?;
    let value = report(&a, &b, args.bonferroni_m)?;
    let mut text = serde_json::to_string_pretty(&value).expect("report serializes");
    text.push('\n');
    match args.output {
        Some(path) => std::fs::write(&path, text).map_err(|e| Failure::write(&path, &e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::write(Path::new("<stdout>"), &e)),
    }
}
