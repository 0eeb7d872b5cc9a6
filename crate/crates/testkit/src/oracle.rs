//! Naive reference implementations.
//!
//! These follow the textbook definitions as directly as possible: boolean
//! closure matrices, exhaustive sign enumeration, exact integer
//! hypergeometric probabilities, pairwise counting. Floating-point formulas
//! are evaluated in the same term order as the documented definitions so
//! exact equality with the library is meaningful.

use std::collections::{BTreeMap, BTreeSet};

use trtm_core::change_history::ChangeEvent;
use trtm_core::dependency_graph::MethodRef;

use crate::project::MicroProject;

/// Dense index over every node of an edge list plus extra nodes.
pub struct NodeIndex {
    pub nodes: Vec<MethodRef>,
    pub index: BTreeMap<MethodRef, usize>,
}

impl NodeIndex {
    pub fn new<'a>(
        edges: &'a [(MethodRef, MethodRef)],
        extra: impl IntoIterator<Item = &'a MethodRef>,
    ) -> Self {
        let set: BTreeSet<MethodRef> = edges
            .iter()
            .flat_map(|(a, b)| [a.clone(), b.clone()])
            .chain(extra.into_iter().cloned())
            .collect();
        let nodes: Vec<MethodRef> = set.into_iter().collect();
        let index = nodes
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, m)| (m, i))
            .collect();
        Self { nodes, index }
    }

    fn adjacency(&self, edges: &[(MethodRef, MethodRef)]) -> Vec<Vec<bool>> {
        let n = self.nodes.len();
        let mut adj = vec![vec![false; n]; n];
        for (a, b) in edges {
            adj[self.index[a]][self.index[b]] = true;
        }
        adj
    }
}

/// Paths of length >= 1, by Warshall's algorithm.
#[allow(clippy::needless_range_loop)]
pub fn closure_warshall(index: &NodeIndex, edges: &[(MethodRef, MethodRef)]) -> Vec<Vec<bool>> {
    let mut reach = index.adjacency(edges);
    let n = reach.len();
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    reach
}

/// Paths of length >= 1, by squaring `R <- R | R*R` until it stops changing.
pub fn closure_by_squaring(index: &NodeIndex, edges: &[(MethodRef, MethodRef)]) -> Vec<Vec<bool>> {
    let mut reach = index.adjacency(edges);
    let n = reach.len();
    loop {
        let mut next = reach.clone();
        for i in 0..n {
            for j in 0..n {
                if !next[i][j] {
                    next[i][j] = (0..n).any(|k| reach[i][k] && reach[k][j]);
                }
            }
        }
        if next == reach {
            return reach;
        }
        reach = next;
    }
}

pub fn reachable_from_closure(
    index: &NodeIndex,
    closure: &[Vec<bool>],
    entry: &MethodRef,
    filter: &BTreeSet<String>,
) -> BTreeSet<String> {
    let Some(&i) = index.index.get(entry) else {
        return BTreeSet::new();
    };
    closure[i]
        .iter()
        .enumerate()
        .filter(|(_, r)| **r)
        .map(|(j, _)| index.nodes[j].class_id.clone())
        .filter(|c| !filter.contains(c))
        .collect()
}

fn class_of_path(path: &str) -> Option<String> {
    let stem = path.strip_suffix(".java")?;
    let rel = stem
        .strip_prefix("src/main/java/")
        .or_else(|| stem.strip_prefix("src/test/java/"))
        .unwrap_or(stem);
    Some(rel.replace('/', "."))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleMetric {
    Frequency,
    Extent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleOp {
    Avg,
    GMean,
    HMean,
    Median,
}

/// `sum w_i * exp(-alpha * age_i)` over events with non-negative age,
/// in (timestamp, commit) order.
pub fn oracle_class_risks(
    events: &[ChangeEvent],
    as_of: i64,
    metric: OracleMetric,
    half_life: Option<f64>,
) -> BTreeMap<String, f64> {
    let mut by_class: BTreeMap<String, Vec<&ChangeEvent>> = BTreeMap::new();
    for e in events {
        if let Some(c) = class_of_path(&e.path) {
            by_class.entry(c).or_default().push(e);
        }
    }
    let mut risks = BTreeMap::new();
    for (class, mut evs) in by_class {
        evs.sort_by(|a, b| (a.timestamp, &a.commit_id).cmp(&(b.timestamp, &b.commit_id)));
        let mut total = 0.0;
        for e in evs {
            let age = (as_of - e.timestamp) as f64 / 86_400.0;
            if age < 0.0 {
                continue;
            }
            let w = match metric {
                OracleMetric::Frequency => 1.0,
                OracleMetric::Extent => (1.0 + (e.added + e.deleted + e.modified) as f64).ln(),
            };
            let decay = match half_life {
                Some(t) => (-(std::f64::consts::LN_2 / t) * age).exp(),
                None => 1.0,
            };
            total += w * decay;
        }
        risks.insert(class, total);
    }
    risks
}

/// Operator over the positive values, summed in ascending order.
pub fn oracle_aggregate(values: &[f64], op: OracleOp) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| *x > 0.0).collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len() as f64;
    match op {
        OracleOp::Avg => {
            let mut s = 0.0;
            for x in &v {
                s += x;
            }
            s / n
        }
        OracleOp::GMean => {
            let mut s = 0.0;
            for x in &v {
                s += x.ln();
            }
            (s / n).exp()
        }
        OracleOp::HMean => {
            let mut s = 0.0;
            for x in &v {
                s += 1.0 / x;
            }
            n / s
        }
        OracleOp::Median => {
            let m = v.len();
            if m % 2 == 1 {
                v[m / 2]
            } else {
                (v[m / 2 - 1] + v[m / 2]) / 2.0
            }
        }
    }
}

/// Exact round-half-up of `n * quarters / 4`, at least one test.
pub fn oracle_budget_count(n: usize, quarters: usize) -> usize {
    if n == 0 {
        return 0;
    }
    ((2 * n * quarters + 4) / 8).clamp(1, n)
}

pub fn oracle_select(scores: &BTreeMap<String, f64>, keep: usize) -> Vec<String> {
    let mut ranked: Vec<(&String, f64)> = scores.iter().map(|(k, v)| (k, *v)).collect();
    // bubble sort: slow, obviously correct
    for i in 0..ranked.len() {
        for j in 0..ranked.len() - 1 - i {
            let (a, b) = (&ranked[j], &ranked[j + 1]);
            let out_of_order = b.1 > a.1 || (b.1 == a.1 && b.0 < a.0);
            if out_of_order {
                ranked.swap(j, j + 1);
            }
        }
    }
    ranked
        .into_iter()
        .take(keep)
        .map(|(k, _)| k.clone())
        .collect()
}

/// Dependency sets of every test in the project.
pub fn oracle_dependencies(project: &MicroProject) -> BTreeMap<String, BTreeSet<String>> {
    let index = NodeIndex::new(&project.edges, &project.tests);
    let closure = closure_warshall(&index, &project.edges);
    let filter: BTreeSet<String> = project.tests.iter().map(|t| t.class_id.clone()).collect();
    project
        .tests
        .iter()
        .map(|t| {
            (
                t.test_id(),
                reachable_from_closure(&index, &closure, t, &filter),
            )
        })
        .collect()
}

/// Selected tests for one configuration, from scratch.
pub fn oracle_pipeline(
    project: &MicroProject,
    metric: OracleMetric,
    half_life: Option<f64>,
    op: OracleOp,
    quarters: usize,
) -> Vec<String> {
    let risks = oracle_class_risks(&project.events, project.as_of, metric, half_life);
    oracle_select_by_risk(&oracle_dependencies(project), &risks, op, quarters)
}

/// Scores every test from precomputed dependency sets and keeps the top.
pub fn oracle_select_by_risk(
    deps: &BTreeMap<String, BTreeSet<String>>,
    risks: &BTreeMap<String, f64>,
    op: OracleOp,
    quarters: usize,
) -> Vec<String> {
    let scores: BTreeMap<String, f64> = deps
        .iter()
        .map(|(t, classes)| {
            let values: Vec<f64> = classes
                .iter()
                .map(|c| risks.get(c).copied().unwrap_or(0.0))
                .collect();
            (t.clone(), oracle_aggregate(&values, op))
        })
        .collect();
    oracle_select(&scores, oracle_budget_count(scores.len(), quarters))
}

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Two-sided Fisher p by enumerating every same-margin table with exact
/// integer probabilities; "as extreme" means probability at most
/// `observed * (1 + 1e-7)`.
pub fn fisher_enumeration(a: u64, b: u64, c: u64, d: u64) -> f64 {
    let (r1, r2, c1) = (a + b, c + d, a + c);
    let total = binomial(r1 + r2, c1);
    let weight = |k: u64| binomial(r1, k) * binomial(r2, c1 - k);
    let observed = weight(a);
    let lo = c1.saturating_sub(r2);
    let hi = r1.min(c1);
    let extreme: u128 = (lo..=hi)
        .map(weight)
        .filter(|w| w * 10_000_000 <= observed * 10_000_001)
        .sum();
    extreme as f64 / total as f64
}

/// Midranks of `|d|` over the non-zero differences.
pub fn naive_midranks(diffs: &[f64]) -> Vec<f64> {
    let nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    nz.iter()
        .map(|d| {
            let less = nz.iter().filter(|x| x.abs() < d.abs()).count() as f64;
            let equal = nz.iter().filter(|x| x.abs() == d.abs()).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

/// `(W+, W-, exact two-sided p)` by trying all `2^n` sign assignments.
pub fn wilcoxon_enumeration(diffs: &[f64]) -> (f64, f64, f64) {
    let nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let ranks = naive_midranks(&nz);
    let total: f64 = ranks.iter().sum();
    let w_plus: f64 = nz
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let observed = w_plus.min(total - w_plus);
    let n = ranks.len();
    let mut extreme: u64 = 0;
    for mask in 0u64..(1 << n) {
        let s: f64 = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| ranks[i])
            .sum();
        if s.min(total - s) <= observed + 1e-9 {
            extreme += 1;
        }
    }
    (w_plus, total - w_plus, extreme as f64 / (1u64 << n) as f64)
}

pub fn cliffs_pairwise(a: &[f64], b: &[f64]) -> f64 {
    let mut greater = 0i64;
    let mut less = 0i64;
    for x in a {
        for y in b {
            if x > y {
                greater += 1;
            } else if x < y {
                less += 1;
            }
        }
    }
    (greater - less) as f64 / (a.len() * b.len()) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fisher_oracle_reference_value() {
        assert!((fisher_enumeration(1, 9, 11, 3) - 0.0027594561852200836).abs() < 1e-15);
    }

    #[test]
    fn wilcoxon_oracle_small() {
        assert_eq!(wilcoxon_enumeration(&[1.0, 2.0, 3.0]), (6.0, 0.0, 0.25));
        assert_eq!(naive_midranks(&[1.0, -1.0, 3.0]), vec![1.5, 1.5, 3.0]);
    }

    #[test]
    fn closures_agree() {
        let m = |c: &str, n: &str| MethodRef::new(c, n);
        let edges = vec![
            (m("T", "t"), m("A", "x")),
            (m("A", "x"), m("A", "y")),
            (m("A", "y"), m("A", "x")),
            (m("A", "y"), m("B", "z")),
        ];
        let idx = NodeIndex::new(&edges, []);
        assert_eq!(
            closure_warshall(&idx, &edges),
            closure_by_squaring(&idx, &edges)
        );
    }

    #[test]
    fn budget_rule() {
        assert_eq!(oracle_budget_count(5, 2), 3);
        assert_eq!(oracle_budget_count(4, 2), 2);
        assert_eq!(oracle_budget_count(3, 1), 1);
        assert_eq!(oracle_budget_count(6, 1), 2);
        assert_eq!(oracle_budget_count(2, 3), 2);
    }
}
