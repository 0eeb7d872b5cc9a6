//! Run manifests: one JSON file per project version naming its inputs.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Deserialize;
use trtm_core::change_history::{
    consolidate, parse_change_log, parse_git_numstat, ChangeEvent, ClassHistory, SourceRootConfig,
};
use trtm_core::dependency_graph::{parse_callgraph_edges, CallGraph, EdgeFormat, EntrySelector};
use trtm_core::evaluation::{VersionInput, VersionLabel};

use crate::failure::{CliResult, ExitCode, Failure};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeLogFormat {
    #[default]
    Jsonl,
    Numstat,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub project_id: String,
    pub change_log: PathBuf,
    #[serde(default)]
    pub change_log_format: ChangeLogFormat,
    pub callgraph: PathBuf,
    #[serde(default = "default_edge_format")]
    pub callgraph_format: EdgeFormat,
    #[serde(default)]
    pub entry_selector: EntrySelector,
    #[serde(default)]
    pub source_roots: Option<Vec<String>>,
    #[serde(default)]
    pub extensions: Option<Vec<String>>,
    /// Helper classes to keep out of dependency sets besides the test classes.
    #[serde(default)]
    pub exclude_classes: Vec<String>,
    #[serde(default)]
    pub labels: Option<PathBuf>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,

    #[serde(skip)]
    base_dir: PathBuf,
}

fn default_edge_format() -> EdgeFormat {
    EdgeFormat::CallgraphText
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::missing(path, &e))
}

impl Manifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let reader = open(path)?;
        let mut manifest: Manifest = serde_json::from_reader(reader)
            .map_err(|e| Failure::new(ExitCode::Parse, format!("{}: {e}", path.display())))?;
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(manifest)
    }

    /// Paths inside a manifest are relative to the manifest's directory.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        self.base_dir.join(path)
    }

    pub fn output_dir(&self) -> Option<PathBuf> {
        self.output_dir.as_deref().map(|p| self.resolve(p))
    }

    fn source_roots(&self) -> CliResult<SourceRootConfig> {
        let defaults = SourceRootConfig::default();
        let roots = self
            .source_roots
            .clone()
            .unwrap_or_else(|| defaults.roots().to_vec());
        let extensions = self
            .extensions
            .clone()
            .unwrap_or_else(|| defaults.extensions().to_vec());
        SourceRootConfig::new(roots, extensions)
            .map_err(|e| Failure::usage(format!("manifest: {e}")))
    }

    pub fn events(&self) -> CliResult<Vec<ChangeEvent>> {
        let path = self.resolve(&self.change_log);
        let reader = open(&path)?;
        match self.change_log_format {
            ChangeLogFormat::Jsonl => {
                parse_change_log(reader).map_err(|e| Failure::in_file(&path, e))
            }
            ChangeLogFormat::Numstat => {
                let log = parse_git_numstat(reader).map_err(|e| Failure::in_file(&path, e))?;
                for warning in &log.warnings {
                    eprintln!("warning: {}: {warning}", path.display());
                }
                Ok(log.events)
            }
        }
    }

    pub fn histories(&self) -> CliResult<BTreeMap<String, ClassHistory>> {
        let cfg = self.source_roots()?;
        Ok(consolidate(&self.events()?, &cfg))
    }

    pub fn graph(&self, format_override: Option<EdgeFormat>) -> CliResult<CallGraph> {
        let path = self.resolve(&self.callgraph);
        let format = format_override.unwrap_or(self.callgraph_format);
        let parsed =
            parse_callgraph_edges(open(&path)?, format).map_err(|e| Failure::in_file(&path, e))?;
        for warning in &parsed.warnings {
            eprintln!("warning: {}: {warning}", path.display());
        }
        Ok(parsed.graph)
    }

    /// The version label, if the manifest names one.
    pub fn label(&self) -> CliResult<Option<VersionLabel>> {
        let Some(rel) = &self.labels else {
            return Ok(None);
        };
        let path = self.resolve(rel);
        let reader = File::open(&path).map_err(|e| {
            Failure::new(
                ExitCode::Label,
                format!("cannot read label file {}: {e}", path.display()),
            )
        })?;
        let label: VersionLabel = serde_json::from_reader(BufReader::new(reader))
            .map_err(|e| Failure::new(ExitCode::Label, format!("{}: {e}", path.display())))?;
        Ok(Some(label))
    }

    pub fn required_label(&self) -> CliResult<VersionLabel> {
        let label = self.label()?.ok_or_else(|| {
            Failure::new(
                ExitCode::Label,
                format!("project {} has no label file", self.project_id),
            )
        })?;
        label.ensure_labeled()?;
        Ok(label)
    }

    /// Reads, parses and consolidates everything for one labeled version.
    pub fn version_input(&self, format_override: Option<EdgeFormat>) -> CliResult<VersionInput> {
        let started = Instant::now();
        let label = self.required_label()?;
        let histories = self.histories()?;
        let graph = self.graph(format_override)?;
        let input = VersionInput::new(
            histories,
            graph,
            &self.entry_selector,
            &self.exclude_classes,
            label,
        );
        Ok(input.with_ingest_time(started.elapsed()))
    }
}
