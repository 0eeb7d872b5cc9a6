//! Change-history ingestion.
//!
//! Raw change records arrive either as normalized JSONL (one record per
//! line) or as `git log --numstat` output wrapped with `COMMIT <hash> <ts>`
//! headers. Paths are resolved to logical class names, and every path that
//! ever held the same class (explicit renames or identical class names) is
//! merged into one chronologically ordered [`ClassHistory`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One commit-level modification of one file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeEvent {
    /// Commit time, seconds since the Unix epoch.
    pub timestamp: i64,
    pub added: u64,
    pub deleted: u64,
    pub modified: u64,
    pub commit_id: String,
    pub path: String,
    /// Previous path when the commit renamed or moved the file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub renamed_from: Option<String>,
}

impl ChangeEvent {
    /// Lines added + deleted + modified.
    pub fn churn(&self) -> u64 {
        self.added + self.deleted + self.modified
    }

    fn order_key(&self) -> (i64, &str, &str) {
        (self.timestamp, &self.commit_id, &self.path)
    }
}

/// Consolidated, time-ordered modification events of one logical class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassHistory {
    pub class_id: String,
    pub events: Vec<ChangeEvent>,
}

/// How repository paths map onto class names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceRootConfig {
    roots: Vec<String>,
    extensions: Vec<String>,
}

impl SourceRootConfig {
    /// Roots are stored longest first so the longest matching prefix wins.
    pub fn new<R, E>(roots: R, extensions: E) -> Result<Self>
    where
        R: IntoIterator,
        R::Item: Into<String>,
        E: IntoIterator,
        E::Item: Into<String>,
    {
        let mut roots: Vec<String> = roots
            .into_iter()
            .map(|r| {
                normalize_separators(&r.into())
                    .trim_matches('/')
                    .to_string()
            })
            .filter(|r| !r.is_empty())
            .collect();
        if roots.is_empty() {
            return Err(Error::invalid("at least one source root is required"));
        }
        roots.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        roots.dedup();

        let extensions: Vec<String> = extensions
            .into_iter()
            .map(|e| e.into().trim_start_matches('.').to_string())
            .filter(|e| !e.is_empty())
            .collect();
        if extensions.is_empty() {
            return Err(Error::invalid(
                "at least one class file extension is required",
            ));
        }
        Ok(Self { roots, extensions })
    }

    pub fn roots(&self) -> &[String] {
        &self.roots
    }

    pub fn extensions(&self) -> &[String] {
        &self.extensions
    }
}

impl Default for SourceRootConfig {
    /// Maven/Gradle and Defects4J-style Java layouts.
    fn default() -> Self {
        Self::new(
            [
                "src/main/java",
                "src/test/java",
                "src/java",
                "src/test",
                "source",
                "src",
            ],
            ["java"],
        )
        .expect("default config is valid")
    }
}

#[derive(Deserialize)]
struct JsonlRecord {
    path: String,
    ts: i64,
    add: i64,
    del: i64,
    #[serde(rename = "mod", default)]
    modified: i64,
    commit: String,
    #[serde(default)]
    renamed_from: Option<String>,
}

/// Parses the normalized change-event JSONL format.
///
/// Blank lines are skipped. Errors carry the 1-based line number.
pub fn parse_change_log<R: BufRead>(input: R) -> Result<Vec<ChangeEvent>> {
    let mut events = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let record: JsonlRecord = serde_json::from_str(trimmed)
            .map_err(|e| Error::parse(line_no, format!("malformed change record ({e})")))?;
        if record.add < 0 || record.del < 0 || record.modified < 0 {
            return Err(Error::parse(line_no, "negative line count"));
        }
        if record.ts <= 0 {
            return Err(Error::parse(line_no, "non-positive timestamp"));
        }
        events.push(ChangeEvent {
            timestamp: record.ts,
            added: record.add as u64,
            deleted: record.del as u64,
            modified: record.modified as u64,
            commit_id: record.commit,
            path: record.path,
            renamed_from: record.renamed_from,
        });
    }
    Ok(events)
}

/// Output of the numstat adapter: events plus non-fatal diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NumstatLog {
    pub events: Vec<ChangeEvent>,
    pub warnings: Vec<String>,
}

/// Parses `git log --numstat` output whose commits are introduced by
/// `COMMIT <hash> <unix_ts>` header lines (e.g. `--format='COMMIT %H %at'`).
///
/// numstat reports only added/deleted counts, so `modified` is always 0.
pub fn parse_git_numstat<R: BufRead>(input: R) -> Result<NumstatLog> {
    let mut out = NumstatLog::default();
    let mut current: Option<(String, i64)> = None;

    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if line.starts_with("COMMIT") {
            current = Some(parse_commit_header(&line, line_no)?);
            continue;
        }

        let mut fields = line.splitn(3, '\t');
        let (Some(add), Some(del), Some(path)) = (fields.next(), fields.next(), fields.next())
        else {
            return Err(Error::parse(line_no, "unrecognized numstat line"));
        };
        let Some((commit_id, timestamp)) = current.as_ref() else {
            return Err(Error::parse(
                line_no,
                "file change before any commit header",
            ));
        };

        let (added, deleted) = match (add, del) {
            ("-", "-") => {
                out.warnings.push(format!(
                    "binary file `{path}` at line {line_no}: counts set to 0"
                ));
                (0, 0)
            }
            _ => (parse_count(add, line_no)?, parse_count(del, line_no)?),
        };
        let (path, renamed_from) = split_rename(path);
        out.events.push(ChangeEvent {
            timestamp: *timestamp,
            added,
            deleted,
            modified: 0,
            commit_id: commit_id.clone(),
            path,
            renamed_from,
        });
    }
    Ok(out)
}

fn parse_commit_header(line: &str, line_no: usize) -> Result<(String, i64)> {
    let bad = || Error::parse(line_no, "unparseable commit header");
    let mut parts = line.split_whitespace();
    if parts.next() != Some("COMMIT") {
        return Err(bad());
    }
    let hash = parts.next().ok_or_else(bad)?;
    let ts: i64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    if parts.next().is_some() || ts <= 0 {
        return Err(bad());
    }
    Ok((hash.to_string(), ts))
}

fn parse_count(field: &str, line_no: usize) -> Result<u64> {
    field
        .parse()
        .map_err(|_| Error::parse(line_no, format!("invalid line count `{field}`")))
}

/// Expands git's rename notation. Returns `(new_path, Some(old_path))` for
/// `a/{old => new}/b` or `old => new`, otherwise the path unchanged.
fn split_rename(path: &str) -> (String, Option<String>) {
    const ARROW: &str = " => ";
    if !path.contains(ARROW) {
        return (path.to_string(), None);
    }
    if let (Some(open), Some(close)) = (path.find('{'), path.rfind('}')) {
        if open < close {
            let inner = &path[open + 1..close];
            if let Some((old, new)) = inner.split_once(ARROW) {
                let prefix = &path[..open];
                let suffix = &path[close + 1..];
                return (
                    tidy_path(&format!("{prefix}{new}{suffix}")),
                    Some(tidy_path(&format!("{prefix}{old}{suffix}"))),
                );
            }
        }
    }
    let (old, new) = path.split_once(ARROW).expect("checked above");
    (tidy_path(new), Some(tidy_path(old)))
}

/// `{ => dir}` leaves an empty component behind; collapse it.
fn tidy_path(path: &str) -> String {
    let mut s = path.trim().to_string();
    while s.contains("//") {
        s = s.replace("//", "/");
    }
    s.trim_start_matches('/').to_string()
}

fn normalize_separators(path: &str) -> String {
    path.replace('\\', "/")
}

/// Maps a repository path to a dotted class name.
///
/// The longest matching source root is stripped; when no root matches, the
/// whole path is used. Files whose extension is not a class extension yield
/// `None`.
pub fn path_to_class(path: &str, cfg: &SourceRootConfig) -> Option<String> {
    let path = normalize_separators(path);
    let path = path.trim_start_matches("./").trim_start_matches('/');
    let (stem, ext) = path.rsplit_once('.')?;
    if stem.is_empty() || stem.ends_with('/') || !cfg.extensions.iter().any(|e| e == ext) {
        return None;
    }
    let rel = cfg
        .roots
        .iter()
        .find_map(|root| {
            stem.strip_prefix(root.as_str())
                .and_then(|rest| rest.strip_prefix('/'))
        })
        .unwrap_or(stem);
    if rel.is_empty() {
        return None;
    }
    Some(rel.replace('/', "."))
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new() -> Self {
        Self { parent: Vec::new() }
    }

    fn push(&mut self) -> usize {
        self.parent.push(self.parent.len());
        self.parent.len() - 1
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Groups events into per-class histories.
///
/// Paths are linked through `renamed_from` chains and through resolving to
/// the same class name; each linked group becomes one history named after
/// the class of its most recent event. Events for non-class files are
/// dropped, duplicate `(commit_id, path)` pairs keep their first occurrence,
/// and each history is ordered by `(timestamp, commit_id, path)`.
pub fn consolidate<'a>(
    events: &'a [ChangeEvent],
    cfg: &SourceRootConfig,
) -> BTreeMap<String, ClassHistory> {
    let mut seen: HashSet<(&str, &str)> = HashSet::new();
    let mut kept: Vec<(&'a ChangeEvent, String)> = Vec::new();
    for event in events {
        let Some(class_id) = path_to_class(&event.path, cfg) else {
            continue;
        };
        if seen.insert((event.commit_id.as_str(), event.path.as_str())) {
            kept.push((event, class_id));
        }
    }

    let mut sets = DisjointSet::new();
    let mut path_node: HashMap<&str, usize> = HashMap::new();
    let mut node_of = |path: &'a str, sets: &mut DisjointSet| -> usize {
        *path_node.entry(path).or_insert_with(|| sets.push())
    };

    let mut class_node: HashMap<&str, usize> = HashMap::new();
    let mut event_node = Vec::with_capacity(kept.len());
    for (event, class_id) in &kept {
        let node = node_of(&event.path, &mut sets);
        if let Some(prev) = event.renamed_from.as_deref() {
            let prev_node = node_of(prev, &mut sets);
            sets.union(node, prev_node);
        }
        match class_node.get(class_id.as_str()) {
            Some(&other) => sets.union(node, other),
            None => {
                class_node.insert(class_id.as_str(), node);
            }
        }
        event_node.push(node);
    }

    let mut groups: BTreeMap<usize, Vec<(&ChangeEvent, &str)>> = BTreeMap::new();
    for ((event, class_id), node) in kept.iter().zip(event_node) {
        let root = sets.find(node);
        groups
            .entry(root)
            .or_default()
            .push((event, class_id.as_str()));
    }

    let mut histories = BTreeMap::new();
    for (_, mut members) in groups {
        members.sort_by(|a, b| a.0.order_key().cmp(&b.0.order_key()));
        let class_id = members.last().expect("groups are non-empty").1.to_string();
        let events = members.into_iter().map(|(e, _)| e.clone()).collect();
        histories.insert(class_id.clone(), ClassHistory { class_id, events });
    }
    histories
}

/// All events of all histories, in class order then chronological order.
pub fn flatten(histories: &BTreeMap<String, ClassHistory>) -> Vec<ChangeEvent> {
    histories
        .values()
        .flat_map(|h| h.events.iter().cloned())
        .collect()
}
