//! Static test-to-class dependencies.
//!
//! Call graphs come from an external static analyzer (java-callgraph text
//! output, or plain `caller,callee` CSV pairs). Every selected test method is
//! an entry point; the production classes it can reach through one or more
//! call edges form its dependency set.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MethodRef {
    pub class_id: String,
    pub method_name: String,
    /// Parameter list as printed by the analyzer, e.g. `(int,java.lang.String)`.
    /// Empty when the input format carries none.
    pub descriptor: String,
}

impl MethodRef {
    pub fn new(class_id: impl Into<String>, method_name: impl Into<String>) -> Self {
        Self {
            class_id: class_id.into(),
            method_name: method_name.into(),
            descriptor: String::new(),
        }
    }

    /// `class#method`; overloads share one test id.
    pub fn test_id(&self) -> String {
        format!("{}#{}", self.class_id, self.method_name)
    }

    /// Short class name (after the last `.`).
    pub fn simple_class_name(&self) -> &str {
        self.class_id.rsplit('.').next().unwrap_or(&self.class_id)
    }
}

impl fmt::Display for MethodRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}#{}{}",
            self.class_id, self.method_name, self.descriptor
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeFormat {
    /// `M:<class>:<method> (<X>)<class>:<method>` lines.
    CallgraphText,
    /// `caller_class#caller_method,callee_class#callee_method` lines.
    #[serde(alias = "csv-pairs")]
    Csv,
}

impl FromStr for EdgeFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "callgraph-text" | "callgraph" | "text" => Ok(EdgeFormat::CallgraphText),
            "csv" | "csv-pairs" => Ok(EdgeFormat::Csv),
            other => Err(Error::invalid(format!(
                "unknown call-graph format `{other}`"
            ))),
        }
    }
}

/// Directed method-level call graph. Every endpoint is a node, including
/// callees without outgoing edges.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CallGraph {
    edges: BTreeMap<MethodRef, BTreeSet<MethodRef>>,
}

impl CallGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_edge(&mut self, caller: MethodRef, callee: MethodRef) {
        self.edges.entry(callee.clone()).or_default();
        self.edges.entry(caller).or_default().insert(callee);
    }

    pub fn add_node(&mut self, node: MethodRef) {
        self.edges.entry(node).or_default();
    }

    pub fn nodes(&self) -> impl Iterator<Item = &MethodRef> {
        self.edges.keys()
    }

    pub fn node_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.values().map(BTreeSet::len).sum()
    }

    pub fn contains(&self, node: &MethodRef) -> bool {
        self.edges.contains_key(node)
    }

    pub fn successors(&self, node: &MethodRef) -> impl Iterator<Item = &MethodRef> {
        self.edges.get(node).into_iter().flatten()
    }
}

/// A parsed call graph with non-fatal diagnostics.
#[derive(Debug, Clone, Default)]
pub struct ParsedCallGraph {
    pub graph: CallGraph,
    pub warnings: Vec<String>,
}

const INVOCATION_TAGS: [&str; 5] = ["M", "I", "O", "S", "D"];

pub fn parse_callgraph_edges<R: BufRead>(input: R, format: EdgeFormat) -> Result<ParsedCallGraph> {
    let mut parsed = ParsedCallGraph::default();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let edge = match format {
            EdgeFormat::CallgraphText => parse_text_line(line, line_no, &mut parsed.warnings)?,
            EdgeFormat::Csv => Some(parse_csv_line(line, line_no)?),
        };
        if let Some((caller, callee)) = edge {
            parsed.graph.add_edge(caller, callee);
        }
    }
    Ok(parsed)
}

fn parse_text_line(
    line: &str,
    line_no: usize,
    warnings: &mut Vec<String>,
) -> Result<Option<(MethodRef, MethodRef)>> {
    if line.starts_with("C:") {
        return Ok(None);
    }
    let body = line
        .strip_prefix("M:")
        .ok_or_else(|| Error::parse(line_no, "expected `M:` or `C:` call-graph line"))?;
    let (caller, rest) = body
        .split_once(' ')
        .ok_or_else(|| Error::parse(line_no, "missing callee in method edge"))?;
    let (tag, callee) = rest
        .trim_start()
        .strip_prefix('(')
        .and_then(|r| r.split_once(')'))
        .ok_or_else(|| Error::parse(line_no, "missing invocation type `(X)` before callee"))?;
    if !INVOCATION_TAGS.contains(&tag) {
        warnings.push(format!(
            "unknown invocation type `({tag})` at line {line_no}"
        ));
    }
    let caller = parse_endpoint(caller, ':', line_no)?;
    let callee = parse_endpoint(callee, ':', line_no)?;
    Ok(Some((caller, callee)))
}

fn parse_csv_line(line: &str, line_no: usize) -> Result<(MethodRef, MethodRef)> {
    let (caller, callee) = line
        .split_once(',')
        .ok_or_else(|| Error::parse(line_no, "expected `caller,callee` pair"))?;
    Ok((
        parse_endpoint(caller.trim(), '#', line_no)?,
        parse_endpoint(callee.trim(), '#', line_no)?,
    ))
}

fn parse_endpoint(text: &str, separator: char, line_no: usize) -> Result<MethodRef> {
    let (class_id, method) = text
        .split_once(separator)
        .ok_or_else(|| Error::parse(line_no, format!("endpoint `{text}` lacks `{separator}`")))?;
    let (method_name, descriptor) = match method.find('(') {
        Some(i) => method.split_at(i),
        None => (method, ""),
    };
    if class_id.is_empty() || method_name.is_empty() {
        return Err(Error::parse(
            line_no,
            format!("endpoint `{text}` has an empty class or method"),
        ));
    }
    Ok(MethodRef {
        class_id: class_id.to_string(),
        method_name: method_name.to_string(),
        descriptor: descriptor.to_string(),
    })
}

/// Which call-graph nodes are test methods.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntrySelector {
    /// Test ids of the form `class#method`.
    Explicit(Vec<String>),
    Pattern(EntryPattern),
}

/// Name rules; absent fields match everything. Class rules apply to the
/// simple class name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryPattern {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_suffix: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_prefix: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method_prefix: Option<String>,
}

impl EntryPattern {
    pub fn matches(&self, method: &MethodRef) -> bool {
        let class = method.simple_class_name();
        self.class_suffix
            .as_deref()
            .is_none_or(|s| class.ends_with(s))
            && self
                .class_prefix
                .as_deref()
                .is_none_or(|p| class.starts_with(p))
            && self
                .method_prefix
                .as_deref()
                .is_none_or(|p| method.method_name.starts_with(p))
    }
}

impl Default for EntrySelector {
    /// JUnit-style naming: `*Test` classes, `test*` methods.
    fn default() -> Self {
        EntrySelector::Pattern(EntryPattern {
            class_suffix: Some("Test".into()),
            class_prefix: None,
            method_prefix: Some("test".into()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct EntryPoint {
    pub method: MethodRef,
    /// Explicitly requested but absent from the graph.
    pub isolated: bool,
}

pub fn test_entry_points(graph: &CallGraph, selector: &EntrySelector) -> Vec<EntryPoint> {
    let mut entries: Vec<EntryPoint> = match selector {
        EntrySelector::Pattern(pattern) => graph
            .nodes()
            .filter(|m| pattern.matches(m))
            .map(|m| EntryPoint {
                method: m.clone(),
                isolated: false,
            })
            .collect(),
        EntrySelector::Explicit(ids) => {
            let wanted: BTreeSet<(&str, &str)> = ids
                .iter()
                .map(|id| id.split_once('#').unwrap_or((id.as_str(), "")))
                .collect();
            let mut found: BTreeSet<(&str, &str)> = BTreeSet::new();
            let mut entries = Vec::new();
            for node in graph.nodes() {
                let key = (node.class_id.as_str(), node.method_name.as_str());
                if wanted.contains(&key) {
                    found.insert(key);
                    entries.push(EntryPoint {
                        method: node.clone(),
                        isolated: false,
                    });
                }
            }
            entries.extend(wanted.difference(&found).map(|(class, method)| EntryPoint {
                method: MethodRef::new(*class, *method),
                isolated: true,
            }));
            entries
        }
    };
    entries.sort();
    entries
}

/// Classes of the entry points plus any extra exclusions.
pub fn test_class_filter<'a, I>(entries: &[EntryPoint], extra: I) -> BTreeSet<String>
where
    I: IntoIterator<Item = &'a String>,
{
    entries
        .iter()
        .map(|e| e.method.class_id.clone())
        .chain(extra.into_iter().cloned())
        .collect()
}

/// Classes of every method reachable from `entry` through at least one
/// edge, minus the filtered (test) classes. Traversal continues through
/// filtered classes.
pub fn reachable_classes(
    graph: &CallGraph,
    entry: &MethodRef,
    test_class_filter: &BTreeSet<String>,
) -> BTreeSet<String> {
    let mut visited: BTreeSet<&MethodRef> = BTreeSet::new();
    let mut stack: Vec<&MethodRef> = graph.successors(entry).collect();
    let mut classes = BTreeSet::new();
    while let Some(node) = stack.pop() {
        if !visited.insert(node) {
            continue;
        }
        if !test_class_filter.contains(&node.class_id) {
            classes.insert(node.class_id.clone());
        }
        stack.extend(graph.successors(node).filter(|n| !visited.contains(n)));
    }
    classes
}

/// `test_id -> Deps(test)`. Every entry gets a key, even with an empty set.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyMap {
    pub deps: BTreeMap<String, BTreeSet<String>>,
}

impl DependencyMap {
    pub fn len(&self) -> usize {
        self.deps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deps.is_empty()
    }
}

pub fn build_dependency_map(
    graph: &CallGraph,
    entries: &[EntryPoint],
    filter: &BTreeSet<String>,
) -> DependencyMap {
    let per_entry: Vec<(String, BTreeSet<String>)> = entries
        .par_iter()
        .map(|e| {
            (
                e.method.test_id(),
                reachable_classes(graph, &e.method, filter),
            )
        })
        .collect();
    let mut deps: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (id, classes) in per_entry {
        deps.entry(id).or_default().extend(classes);
    }
    DependencyMap { deps }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(class: &str, method: &str) -> MethodRef {
        MethodRef::new(class, method)
    }

    fn graph(edges: &[(&str, &str)]) -> CallGraph {
        let mut g = CallGraph::new();
        for (a, b) in edges {
            let (ac, am) = a.split_once('#').unwrap();
            let (bc, bm) = b.split_once('#').unwrap();
            g.add_edge(m(ac, am), m(bc, bm));
        }
        g
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_callgraph_text() {
        let input = "C:a.TestFoo a.Foo\nM:a.TestFoo:test1 (M)a.Foo:bar\nM:a.Foo:bar(int,java.lang.String) (S)a.Baz:qux()\n";
        let parsed = parse_callgraph_edges(input.as_bytes(), EdgeFormat::CallgraphText).unwrap();
        let g = parsed.graph;
        assert!(parsed.warnings.is_empty());
        assert_eq!(g.edge_count(), 2);
        let succ: Vec<_> = g.successors(&m("a.TestFoo", "test1")).cloned().collect();
        assert_eq!(succ, vec![m("a.Foo", "bar")]);
        let bar = MethodRef {
            descriptor: "(int,java.lang.String)".into(),
            ..m("a.Foo", "bar")
        };
        assert!(g.contains(&bar));
    }

    #[test]
    fn csv_matches_text() {
        let text = parse_callgraph_edges(
            &b"M:a.TestFoo:test1 (M)a.Foo:bar"[..],
            EdgeFormat::CallgraphText,
        )
        .unwrap()
        .graph;
        let csv = parse_callgraph_edges(&b"a.TestFoo#test1,a.Foo#bar\n"[..], EdgeFormat::Csv)
            .unwrap()
            .graph;
        assert_eq!(text, csv);
        let empty = parse_callgraph_edges(&b""[..], EdgeFormat::Csv)
            .unwrap()
            .graph;
        assert_eq!(empty.node_count(), 0);
    }

    #[test]
    fn unknown_tag_warns_but_keeps_edge() {
        let parsed =
            parse_callgraph_edges(&b"M:a.T:t (Z)a.Foo:bar"[..], EdgeFormat::CallgraphText).unwrap();
        assert_eq!(parsed.graph.edge_count(), 1);
        assert_eq!(parsed.warnings.len(), 1);
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let cases: &[(&str, EdgeFormat, usize)] = &[
            ("M:a.T:t (M)a.F:b\nhello", EdgeFormat::CallgraphText, 2),
            ("M:a.T:t a.F:b", EdgeFormat::CallgraphText, 1),
            ("M:a.T:t", EdgeFormat::CallgraphText, 1),
            ("M::t (M)a.F:b", EdgeFormat::CallgraphText, 1),
            ("a.T#t;a.F#b", EdgeFormat::Csv, 1),
            ("\na.T#t,a.F", EdgeFormat::Csv, 2),
        ];
        for (input, format, line) in cases {
            match parse_callgraph_edges(input.as_bytes(), *format) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, *line, "{input:?}"),
                other => panic!("{input:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn pattern_selector() {
        let g = graph(&[
            ("a.FooTest#testX", "a.Foo#bar"),
            ("a.FooTest#setUp", "a.Foo#bar"),
        ]);
        let entries = test_entry_points(&g, &EntrySelector::default());
        assert_eq!(entries.len(), 1);
        assert_eq!(entries[0].method, m("a.FooTest", "testX"));
        assert!(!entries[0].isolated);
    }

    #[test]
    fn explicit_selector_keeps_missing_ids() {
        let g = graph(&[("a.FooTest#testX", "a.Foo#bar")]);
        let sel = EntrySelector::Explicit(vec!["a.FooTest#testX".into(), "a.FooTest#gone".into()]);
        let entries = test_entry_points(&g, &sel);
        assert_eq!(entries.len(), 2);
        let isolated: Vec<_> = entries.iter().filter(|e| e.isolated).collect();
        assert_eq!(isolated.len(), 1);
        assert_eq!(isolated[0].method.test_id(), "a.FooTest#gone");

        let filter = test_class_filter(&entries, []);
        let deps = build_dependency_map(&g, &entries, &filter);
        assert_eq!(deps.deps["a.FooTest#gone"], BTreeSet::new());
        assert_eq!(deps.deps["a.FooTest#testX"], set(&["a.Foo"]));
    }

    #[test]
    fn selector_json_shapes() {
        let explicit: EntrySelector = serde_json::from_str(r#"{"explicit": ["a.T#t"]}"#).unwrap();
        assert_eq!(explicit, EntrySelector::Explicit(vec!["a.T#t".into()]));
        let pattern: EntrySelector = serde_json::from_str(
            r#"{"pattern": {"class_suffix": "Test", "method_prefix": "test"}}"#,
        )
        .unwrap();
        assert_eq!(pattern, EntrySelector::default());
    }

    #[test]
    fn transitive_chain() {
        let g = graph(&[("T#t", "A#m"), ("A#m", "B#n")]);
        assert_eq!(
            reachable_classes(&g, &m("T", "t"), &set(&["T"])),
            set(&["A", "B"])
        );
    }

    #[test]
    fn leaf_entry_reaches_nothing() {
        let g = graph(&[("A#m", "B#n")]);
        assert!(reachable_classes(&g, &m("B", "n"), &set(&[])).is_empty());
        assert!(reachable_classes(&g, &m("Nope", "x"), &set(&[])).is_empty());
    }

    #[test]
    fn cycles_terminate() {
        let g = graph(&[
            ("T#t", "A#m"),
            ("A#m", "A#m2"),
            ("A#m2", "A#m"),
            ("A#m", "A#m"),
        ]);
        assert_eq!(
            reachable_classes(&g, &m("T", "t"), &set(&["T"])),
            set(&["A"])
        );
    }

    #[test]
    fn traversal_passes_through_filtered_classes() {
        let g = graph(&[("T#t", "Helper#h"), ("Helper#h", "A#m")]);
        assert_eq!(
            reachable_classes(&g, &m("T", "t"), &set(&["T", "Helper"])),
            set(&["A"])
        );
    }

    #[test]
    fn shared_callee() {
        let g = graph(&[("T#a", "A#m"), ("T#b", "A#m"), ("T#b", "B#m")]);
        let entries = test_entry_points(
            &g,
            &EntrySelector::Explicit(vec!["T#a".into(), "T#b".into()]),
        );
        let filter = test_class_filter(&entries, []);
        let deps = build_dependency_map(&g, &entries, &filter);
        assert_eq!(deps.deps["T#a"], set(&["A"]));
        assert_eq!(deps.deps["T#b"], set(&["A", "B"]));
    }

    #[test]
    fn overloads_merge_into_one_test_id() {
        let mut g = CallGraph::new();
        let t1 = MethodRef {
            descriptor: "()".into(),
            ..m("T", "t")
        };
        let t2 = MethodRef {
            descriptor: "(int)".into(),
            ..m("T", "t")
        };
        g.add_edge(t1, m("A", "a"));
        g.add_edge(t2, m("B", "b"));
        let entries = test_entry_points(&g, &EntrySelector::Explicit(vec!["T#t".into()]));
        assert_eq!(entries.len(), 2);
        let deps = build_dependency_map(&g, &entries, &test_class_filter(&entries, []));
        assert_eq!(deps.deps.len(), 1);
        assert_eq!(deps.deps["T#t"], set(&["A", "B"]));
    }
}
