//! Randomized micro-projects: change events, a call graph and a test list.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use rand::Rng;
use trtm_core::change_history::ChangeEvent;
use trtm_core::dependency_graph::{CallGraph, EntrySelector, MethodRef};
use trtm_core::evaluation::{VersionInput, VersionLabel};

pub const AS_OF: i64 = 1_700_000_000;

#[derive(Debug, Clone, Copy)]
pub struct ProjectShape {
    pub max_prod_classes: usize,
    pub max_tests: usize,
    pub max_edges: usize,
    pub max_events: usize,
}

impl Default for ProjectShape {
    fn default() -> Self {
        Self {
            max_prod_classes: 20,
            max_tests: 40,
            max_edges: 200,
            max_events: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MicroProject {
    pub as_of: i64,
    pub prod_classes: Vec<String>,
    pub tests: Vec<MethodRef>,
    pub edges: Vec<(MethodRef, MethodRef)>,
    pub events: Vec<ChangeEvent>,
}

pub fn class_path(class_id: &str) -> String {
    let root = if class_id.starts_with("t.") {
        "src/test/java"
    } else {
        "src/main/java"
    };
    format!("{root}/{}.java", class_id.replace('.', "/"))
}

impl MicroProject {
    pub fn random<R: Rng>(rng: &mut R, shape: ProjectShape) -> Self {
        let n_prod = rng.gen_range(1..=shape.max_prod_classes);
        let n_test_classes = rng.gen_range(1..=4);
        let n_tests = rng.gen_range(1..=shape.max_tests);
        let n_edges = rng.gen_range(0..=shape.max_edges);
        let n_events = rng.gen_range(0..=shape.max_events);

        let prod_classes: Vec<String> = (0..n_prod).map(|i| format!("p.C{i}")).collect();
        let test_classes: Vec<String> =
            (0..n_test_classes).map(|j| format!("t.T{j}Test")).collect();

        let prod_methods: Vec<MethodRef> = prod_classes
            .iter()
            .flat_map(|c| {
                let k = rng.gen_range(1..=3);
                (0..k).map(move |m| MethodRef::new(c.clone(), format!("m{m}")))
            })
            .collect();
        let tests: Vec<MethodRef> = (0..n_tests)
            .map(|k| {
                MethodRef::new(
                    test_classes[rng.gen_range(0..n_test_classes)].clone(),
                    format!("test{k}"),
                )
            })
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let helpers: Vec<MethodRef> = test_classes
            .iter()
            .map(|c| MethodRef::new(c.clone(), "helper"))
            .collect();
        let external = [
            MethodRef::new("java.util.List", "size"),
            MethodRef::new("java.lang.String", "trim"),
        ];

        let mut edges = Vec::with_capacity(n_edges);
        for _ in 0..n_edges {
            let roll: f64 = rng.gen();
            let caller = if roll < 0.4 {
                tests[rng.gen_range(0..tests.len())].clone()
            } else if roll < 0.5 {
                helpers[rng.gen_range(0..helpers.len())].clone()
            } else {
                prod_methods[rng.gen_range(0..prod_methods.len())].clone()
            };
            let roll: f64 = rng.gen();
            let callee = if roll < 0.85 {
                prod_methods[rng.gen_range(0..prod_methods.len())].clone()
            } else if roll < 0.95 {
                helpers[rng.gen_range(0..helpers.len())].clone()
            } else {
                external[rng.gen_range(0..external.len())].clone()
            };
            edges.push((caller, callee));
        }

        let events = (0..n_events)
            .map(|i| {
                let class = if rng.gen_bool(0.1) {
                    &test_classes[rng.gen_range(0..n_test_classes)]
                } else {
                    &prod_classes[rng.gen_range(0..n_prod)]
                };
                let age_days: f64 = rng.gen_range(-30.0..700.0);
                ChangeEvent {
                    timestamp: AS_OF - (age_days * 86_400.0) as i64,
                    added: rng.gen_range(0..30),
                    deleted: rng.gen_range(0..30),
                    modified: rng.gen_range(0..10),
                    commit_id: format!("c{i:03}"),
                    path: class_path(class),
                    renamed_from: None,
                }
            })
            .collect();

        Self {
            as_of: AS_OF,
            prod_classes,
            tests,
            edges,
            events,
        }
    }

    pub fn graph(&self) -> CallGraph {
        let mut g = CallGraph::new();
        for (a, b) in &self.edges {
            g.add_edge(a.clone(), b.clone());
        }
        g
    }

    pub fn test_ids(&self) -> Vec<String> {
        self.tests.iter().map(MethodRef::test_id).collect()
    }

    pub fn selector(&self) -> EntrySelector {
        EntrySelector::Explicit(self.test_ids())
    }

    /// A label whose fault-revealing tests are a deterministic subset.
    pub fn label(&self, version_id: &str, stride: usize) -> VersionLabel {
        let stride = stride.max(1);
        let faults: BTreeSet<String> = self.test_ids().into_iter().step_by(stride).collect();
        VersionLabel {
            version_id: version_id.to_string(),
            as_of: self.as_of,
            fault_revealing_tests: faults,
        }
    }

    pub fn version_input(&self, label: VersionLabel) -> VersionInput {
        let histories = trtm_core::change_history::consolidate(
            &self.events,
            &trtm_core::change_history::SourceRootConfig::default(),
        );
        VersionInput::new(histories, self.graph(), &self.selector(), &[], label)
    }

    pub fn changes_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            let record = serde_json::json!({
                "path": e.path,
                "ts": e.timestamp,
                "add": e.added,
                "del": e.deleted,
                "mod": e.modified,
                "commit": e.commit_id,
            });
            let _ = writeln!(out, "{record}");
        }
        out
    }

    pub fn callgraph_text(&self) -> String {
        let mut out = String::new();
        for (a, b) in &self.edges {
            let _ = writeln!(
                out,
                "M:{}:{}() (M){}:{}()",
                a.class_id, a.method_name, b.class_id, b.method_name
            );
        }
        out
    }

    /// Writes inputs, a label and a CLI manifest into `dir`; returns the
    /// manifest path.
    pub fn write_inputs(
        &self,
        dir: &Path,
        version_id: &str,
        stride: usize,
    ) -> io::Result<std::path::PathBuf> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("changes.jsonl"), self.changes_jsonl())?;
        fs::write(dir.join("callgraph.txt"), self.callgraph_text())?;
        let label = self.label(version_id, stride);
        fs::write(
            dir.join("label.json"),
            serde_json::to_string_pretty(&serde_json::json!({
                "version_id": label.version_id,
                "as_of": label.as_of,
                "fault_revealing_tests": label.fault_revealing_tests,
            }))?,
        )?;
        let manifest = serde_json::json!({
            "project_id": version_id,
            "change_log": "changes.jsonl",
            "callgraph": "callgraph.txt",
            "callgraph_format": "callgraph-text",
            "entry_selector": { "explicit": self.test_ids() },
            "labels": "label.json",
        });
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(path)
    }
}
