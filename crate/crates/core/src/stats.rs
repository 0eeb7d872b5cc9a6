//! Paired and categorical significance tests used to compare two
//! minimization approaches over the same versions.
//!
//! - Wilcoxon signed-rank for paired continuous outcomes (Accuracy)
//! - Fisher's exact test and the cross-product odds ratio for 2x2
//!   detected/undetected tables (FDR)
//! - Cliff's delta as effect size
//! - Bonferroni adjustment

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::factorial::ln_binomial;

use crate::{Error, Result};

/// Below this many non-zero differences the Wilcoxon p-value is exact.
pub const WILCOXON_EXACT_LIMIT: usize = 10;

/// Largest sample the exact Wilcoxon distribution is computed for.
pub const WILCOXON_EXACT_MAX: usize = 64;

/// Relative slack when deciding whether a table is "as extreme" as the
/// observed one.
const FISHER_RELATIVE_SLACK: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    pairs: Vec<(f64, f64)>,
}

impl PairedSample {
    pub fn new(pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::invalid(
                "paired sample must contain at least one pair",
            ));
        }
        if pairs.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Error::invalid("paired sample contains non-finite values"));
        }
        Ok(Self { pairs })
    }

    pub fn from_differences(diffs: &[f64]) -> Result<Self> {
        Self::new(diffs.iter().map(|&d| (d, 0.0)).collect())
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WilcoxonMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// `min(W+, W-)`.
    pub statistic: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    pub p_two_sided: f64,
    pub n_effective: usize,
    pub method: WilcoxonMethod,
}

/// Signed ranks of the non-zero differences `a - b`, as doubled midranks
/// (so every rank is an integer). Zero differences are dropped.
pub fn signed_doubled_ranks(sample: &PairedSample) -> Vec<(u64, bool)> {
    let mut diffs: Vec<f64> = sample
        .pairs
        .iter()
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    diffs.sort_by(|x, y| x.abs().total_cmp(&y.abs()));

    let mut ranked = Vec::with_capacity(diffs.len());
    let mut start = 0;
    while start < diffs.len() {
        let mut end = start;
        while end + 1 < diffs.len() && diffs[end + 1].abs() == diffs[start].abs() {
            end += 1;
        }
        // positions start..=end hold 1-based ranks start+1..=end+1
        let doubled = (start + 1 + end + 1) as u64;
        ranked.extend(diffs[start..=end].iter().map(|d| (doubled, *d > 0.0)));
        start = end + 1;
    }
    ranked
}

/// Exact two-sided p-value of the signed-rank statistic: the share of the
/// `2^n` equally likely sign assignments whose `min(W+, W-)` is at most the
/// observed one. Ranks and the statistic are doubled integers.
pub fn wilcoxon_exact_p(doubled_ranks: &[u64], doubled_statistic: u64) -> Result<f64> {
    let n = doubled_ranks.len();
    if n == 0 || n > WILCOXON_EXACT_MAX {
        return Err(Error::invalid(format!(
            "exact signed-rank distribution needs 1..={WILCOXON_EXACT_MAX} ranks, got {n}"
        )));
    }
    let total: u64 = doubled_ranks.iter().sum();
    // counts[s] = number of subsets whose (doubled) rank sum is s
    let mut counts = vec![0u128; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in doubled_ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let extreme: u128 = counts
        .iter()
        .enumerate()
        .filter(|(s, _)| (*s as u64).min(total - *s as u64) <= doubled_statistic)
        .map(|(_, c)| *c)
        .sum();
    Ok((extreme as f64 / 2f64.powi(n as i32)).min(1.0))
}

/// Normal-approximation two-sided p with tie-corrected variance and a
/// continuity correction of 0.5.
pub fn wilcoxon_normal_p(doubled_ranks: &[u64], statistic: f64) -> f64 {
    let n = doubled_ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = doubled_ranks.to_vec();
    sorted.sort_unstable();
    let tie_term: f64 = sorted
        .chunk_by(|a, b| a == b)
        .map(|group| {
            let t = group.len() as f64;
            t * t * t - t
        })
        .sum();
    let variance = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    let mut d = statistic - mean;
    if d != 0.0 {
        d -= 0.5 * d.signum();
    }
    let z = d / variance.sqrt();
    clamp_p(erfc(z.abs() / std::f64::consts::SQRT_2))
}

pub fn wilcoxon_signed_rank(sample: &PairedSample) -> Result<WilcoxonResult> {
    let ranked = signed_doubled_ranks(sample);
    if ranked.is_empty() {
        return Err(Error::DegenerateSample);
    }
    let doubled_plus: u64 = ranked.iter().filter(|(_, pos)| *pos).map(|(r, _)| r).sum();
    let doubled_total: u64 = ranked.iter().map(|(r, _)| r).sum();
    let doubled_minus = doubled_total - doubled_plus;
    let doubled_stat = doubled_plus.min(doubled_minus);
    let ranks: Vec<u64> = ranked.iter().map(|(r, _)| *r).collect();
    let n = ranks.len();
    let statistic = doubled_stat as f64 / 2.0;

    let (p, method) = if n < WILCOXON_EXACT_LIMIT {
        (
            wilcoxon_exact_p(&ranks, doubled_stat)?,
            WilcoxonMethod::Exact,
        )
    } else {
        (wilcoxon_normal_p(&ranks, statistic), WilcoxonMethod::Normal)
    };
    Ok(WilcoxonResult {
        statistic,
        w_plus: doubled_plus as f64 / 2.0,
        w_minus: doubled_minus as f64 / 2.0,
        p_two_sided: clamp_p(p),
        n_effective: n,
        method,
    })
}

/// `[[a, b], [c, d]]`: rows are approaches, columns detected/undetected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable2x2 {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl ContingencyTable2x2 {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Result<Self> {
        if a + b + c + d == 0 {
            return Err(Error::invalid("contingency table is empty"));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn transpose(self) -> Self {
        Self {
            a: self.a,
            b: self.c,
            c: self.b,
            d: self.d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherResult {
    pub p_two_sided: f64,
    /// `(a*d)/(b*c)`; `+inf` when only the denominator vanishes and NaN when
    /// both do.
    pub odds_ratio: f64,
}

/// Two-sided Fisher exact test (sum of all same-margin tables no more
/// probable than the observed one).
pub fn fisher_exact_2x2(table: ContingencyTable2x2) -> FisherResult {
    let ContingencyTable2x2 { a, b, c, d } = table;
    let row1 = a + b;
    let row2 = c + d;
    let col1 = a + c;
    let n = row1 + row2;
    let log_denominator = ln_binomial(n, col1);
    let pmf = |k: u64| (ln_binomial(row1, k) + ln_binomial(row2, col1 - k) - log_denominator).exp();

    let lo = col1.saturating_sub(row2);
    let hi = row1.min(col1);
    let observed = pmf(a);
    let threshold = observed * (1.0 + FISHER_RELATIVE_SLACK);
    // Normalizing by the summed support cancels rounding in the log-space
    // terms and makes the all-tables case exactly 1.
    let (extreme, total) = (lo..=hi).map(pmf).fold((0.0, 0.0), |(e, t), p| {
        (if p <= threshold { e + p } else { e }, t + p)
    });
    let p = extreme / total;

    FisherResult {
        p_two_sided: clamp_p(p),
        odds_ratio: odds_ratio(table),
    }
}

pub fn odds_ratio(table: ContingencyTable2x2) -> f64 {
    let num = table.a as f64 * table.d as f64;
    let den = table.b as f64 * table.c as f64;
    if den == 0.0 {
        if num > 0.0 {
            f64::INFINITY
        } else {
            f64::NAN
        }
    } else {
        num / den
    }
}

/// `(#(a_i > b_j) - #(a_i < b_j)) / (|a| |b|)`.
pub fn cliffs_delta(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("Cliff's delta needs two non-empty samples"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::invalid("Cliff's delta needs finite values"));
    }
    let mut sorted_b = b.to_vec();
    sorted_b.sort_by(f64::total_cmp);
    let mut dominance: i64 = 0;
    for &x in a {
        let below = sorted_b.partition_point(|&y| y < x) as i64;
        let at_or_below = sorted_b.partition_point(|&y| y <= x) as i64;
        let above = sorted_b.len() as i64 - at_or_below;
        dominance += below - above;
    }
    Ok(dominance as f64 / (a.len() as f64 * b.len() as f64))
}

/// Multiplies each p-value by `m`, capped at 1.
pub fn bonferroni(p_values: &[f64], m: usize) -> Result<Vec<f64>> {
    if p_values.is_empty() || m < p_values.len() {
        return Err(Error::invalid(format!(
            "Bonferroni needs m >= number of p-values >= 1 (m = {m}, {} p-values)",
            p_values.len()
        )));
    }
    Ok(p_values.iter().map(|p| (p * m as f64).min(1.0)).collect())
}

fn clamp_p(p: f64) -> f64 {
    p.clamp(f64::MIN_POSITIVE, 1.0)
}
