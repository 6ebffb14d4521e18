//! On-disk case store.
//!
//! Layout, one directory per case:
//!
//! ```text
//! <root>/<case_id>/bundle.v1.json
//! <root>/<case_id>/bundle.v2.json
//! <root>/<case_id>/log.jsonl
//! ```
//!
//! Every mutation writes the full bundle for the new version (temp file,
//! fsync, rename) and then appends one line to `log.jsonl` (fsync). The log is
//! the source of truth: a version exists once its log line is complete. A torn
//! trailing line or a bundle file newer than the log is crash debris and is
//! cleaned up when the store is opened.
//!
//! Each log line carries the JSON Patch from the previous bundle to the new
//! one, so replaying the log from an empty document rebuilds any version.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use lexverify_core::constraint::{validate_bundle, ConstraintBundle, ValidationError};
use lexverify_core::engine::{CheckKind, Verdict};
use lexverify_core::maxsmt::CorrectionResult;
use lexverify_core::verification::IllegalTermReport;

const LOG: &str = "log.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("case `{0}` not found")]
    NotFound(String),
    #[error("case `{case_id}` version {version} not found")]
    VersionNotFound { case_id: String, version: u64 },
    #[error("version conflict on `{case_id}`: expected {expected}, current {current}")]
    VersionConflict { case_id: String, expected: u64, current: u64 },
    #[error("invalid case id `{0}`: use letters, digits, `.`, `_` and `-`, not starting with `.`")]
    InvalidCaseId(String),
    #[error("bundle is invalid: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<ValidationError>),
    #[error("corrupt store entry {path}: {message}")]
    Corrupt { path: String, message: String },
    #[error("store I/O on {path}: {source}")]
    Io { path: String, source: io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.display().to_string(), source }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operation {
    Create,
    Update,
    /// A what-if session's working bundle written back to the case.
    Commit,
    RecordResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "result", rename_all = "snake_case")]
pub enum StoredResult {
    Verdict(Verdict),
    Correction(CorrectionResult),
    IllegalTerms(IllegalTermReport),
}

/// One line of `log.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub version: u64,
    pub timestamp: DateTime<Utc>,
    pub actor: String,
    pub operation: Operation,
    /// JSON Patch from the previous version's bundle (`null` before version 1).
    pub diff: json_patch::Patch,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<StoredResult>,
}

/// The most recent result of each kind.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LatestResults {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consistency: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub illegality: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correction: Option<CorrectionResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub illegal_terms: Option<IllegalTermReport>,
}

impl LatestResults {
    fn absorb(&mut self, result: &StoredResult) {
        match result {
            StoredResult::Verdict(v) if v.check == CheckKind::Consistency => self.consistency = Some(v.clone()),
            StoredResult::Verdict(v) => self.illegality = Some(v.clone()),
            StoredResult::Correction(c) => self.correction = Some(c.clone()),
            StoredResult::IllegalTerms(r) => self.illegal_terms = Some(r.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case_id: String,
    pub version: u64,
    pub bundle: ConstraintBundle,
    pub history: Vec<HistoryEntry>,
    pub latest: LatestResults,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub case_id: String,
    pub version: u64,
    pub updated_at: DateTime<Utc>,
    pub meta: BTreeMap<String, String>,
}

/// Cases whose id starts with `id_prefix` and whose bundle meta contains every
/// pair in `meta`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseFilter {
    #[serde(default)]
    pub id_prefix: Option<String>,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl CaseFilter {
    pub fn matches(&self, case_id: &str, meta: &BTreeMap<String, String>) -> bool {
        self.id_prefix.as_deref().is_none_or(|p| case_id.starts_with(p))
            && self.meta.iter().all(|(k, v)| meta.get(k) == Some(v))
    }
}

pub fn valid_case_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id.len() <= 128
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
}

/// Exact bytes of a stored bundle file.
pub fn bundle_bytes(bundle: &ConstraintBundle) -> String {
    let mut s = bundle.to_json_pretty();
    s.push('\n');
    s
}

fn bundle_file(version: u64) -> String {
    format!("bundle.v{version}.json")
}

pub struct Store {
    root: PathBuf,
    // Serializes writers in this process; the version check does the rest.
    write_lock: Mutex<()>,
}

impl Store {
    /// Opens (creating if needed) the store at `root` and recovers every case
    /// to its last complete log line.
    pub fn open(root: impl Into<PathBuf>) -> Result<Store, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        let store = Store { root, write_lock: Mutex::new(()) };
        for id in store.case_dirs()? {
            store.recover(&id)?;
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn case_dir(&self, case_id: &str) -> Result<PathBuf, StoreError> {
        if !valid_case_id(case_id) {
            return Err(StoreError::InvalidCaseId(case_id.into()));
        }
        Ok(self.root.join(case_id))
    }

    fn case_dirs(&self) -> Result<Vec<String>, StoreError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.root).map_err(io_err(&self.root))? {
            let entry = entry.map_err(io_err(&self.root))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if entry.path().is_dir() && valid_case_id(&name) {
                ids.push(name);
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// Truncates a torn final log line and removes temp files and bundle files
    /// beyond the last logged version.
    fn recover(&self, case_id: &str) -> Result<(), StoreError> {
        let dir = self.case_dir(case_id)?;
        let log = dir.join(LOG);
        let text = match fs::read(&log) {
            Ok(bytes) => bytes,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(io_err(&log)(e)),
        };
        let complete = text.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        if complete < text.len() {
            let f = OpenOptions::new().write(true).open(&log).map_err(io_err(&log))?;
            f.set_len(complete as u64).map_err(io_err(&log))?;
            f.sync_all().map_err(io_err(&log))?;
        }
        let version = self.read_history(case_id)?.last().map_or(0, |e| e.version);
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let entry = entry.map_err(io_err(&dir))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            let stale = name.starts_with(".tmp")
                || name
                    .strip_prefix("bundle.v")
                    .and_then(|r| r.strip_suffix(".json"))
                    .and_then(|n| n.parse::<u64>().ok())
                    .is_some_and(|n| n > version);
            if stale {
                fs::remove_file(entry.path()).map_err(io_err(&entry.path()))?;
            }
        }
        sync_dir(&dir)
    }

    /// Complete log lines only; a torn trailing line is not yet a version.
    fn read_history(&self, case_id: &str) -> Result<Vec<HistoryEntry>, StoreError> {
        let log = self.case_dir(case_id)?.join(LOG);
        let text = match fs::read_to_string(&log) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io_err(&log)(e)),
        };
        let complete = text.rfind('\n').map_or("", |i| &text[..i]);
        let mut out: Vec<HistoryEntry> = Vec::new();
        for (n, line) in complete.lines().enumerate() {
            let entry: HistoryEntry = serde_json::from_str(line)
                .map_err(|e| StoreError::Corrupt { path: format!("{}:{}", log.display(), n + 1), message: e.to_string() })?;
            if entry.version != n as u64 + 1 {
                return Err(StoreError::Corrupt {
                    path: format!("{}:{}", log.display(), n + 1),
                    message: format!("expected version {}, found {}", n + 1, entry.version),
                });
            }
            out.push(entry);
        }
        Ok(out)
    }

    pub fn current_version(&self, case_id: &str) -> Result<u64, StoreError> {
        Ok(self.read_history(case_id)?.last().map_or(0, |e| e.version))
    }

    /// The bundle as written at `version`.
    pub fn bundle_at(&self, case_id: &str, version: u64) -> Result<ConstraintBundle, StoreError> {
        let current = self.current_version(case_id)?;
        if current == 0 {
            return Err(StoreError::NotFound(case_id.into()));
        }
        if version == 0 || version > current {
            return Err(StoreError::VersionNotFound { case_id: case_id.into(), version });
        }
        let path = self.case_dir(case_id)?.join(bundle_file(version));
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|e| StoreError::Corrupt { path: path.display().to_string(), message: e.to_string() })
    }

    /// Raw bytes of the bundle file at `version`.
    pub fn bundle_file_bytes(&self, case_id: &str, version: u64) -> Result<String, StoreError> {
        let path = self.case_dir(case_id)?.join(bundle_file(version));
        fs::read_to_string(&path).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => StoreError::VersionNotFound { case_id: case_id.into(), version },
            _ => io_err(&path)(e),
        })
    }

    /// Rebuilds the bundle at `version` from the log's patches alone.
    pub fn replay(&self, case_id: &str, version: u64) -> Result<ConstraintBundle, StoreError> {
        let history = self.read_history(case_id)?;
        if history.is_empty() {
            return Err(StoreError::NotFound(case_id.into()));
        }
        if version == 0 || version as usize > history.len() {
            return Err(StoreError::VersionNotFound { case_id: case_id.into(), version });
        }
        let mut doc = serde_json::Value::Null;
        for entry in &history[..version as usize] {
            json_patch::patch(&mut doc, &entry.diff).map_err(|e| StoreError::Corrupt {
                path: format!("{case_id} v{}", entry.version),
                message: format!("patch does not apply: {e}"),
            })?;
        }
        serde_json::from_value(doc)
            .map_err(|e| StoreError::Corrupt { path: format!("{case_id} v{version}"), message: e.to_string() })
    }

    pub fn get_case(&self, case_id: &str) -> Result<CaseRecord, StoreError> {
        let history = self.read_history(case_id)?;
        let Some(last) = history.last() else {
            return Err(StoreError::NotFound(case_id.into()));
        };
        let version = last.version;
        let bundle = self.bundle_at(case_id, version)?;
        let mut latest = LatestResults::default();
        for r in history.iter().filter_map(|e| e.result.as_ref()) {
            latest.absorb(r);
        }
        Ok(CaseRecord { case_id: case_id.into(), version, bundle, history, latest })
    }

    pub fn list_cases(&self, filter: &CaseFilter) -> Result<Vec<CaseSummary>, StoreError> {
        let mut out = Vec::new();
        for id in self.case_dirs()? {
            let history = self.read_history(&id)?;
            let Some(last) = history.last() else { continue };
            let bundle = self.bundle_at(&id, last.version)?;
            if filter.matches(&id, &bundle.meta) {
                out.push(CaseSummary { case_id: id, version: last.version, updated_at: last.timestamp, meta: bundle.meta });
            }
        }
        Ok(out)
    }

    /// Creates (`expected_version` 0) or replaces the case named by
    /// `bundle.case_id`. Returns the new version once it is durable.
    pub fn put_case(
        &self,
        bundle: &ConstraintBundle,
        expected_version: u64,
        actor: &str,
        operation: Operation,
    ) -> Result<u64, StoreError> {
        let mut bundle = bundle.clone();
        bundle.normalize_facts();
        let errors = validate_bundle(&bundle);
        if !errors.is_empty() {
            return Err(StoreError::Invalid(errors));
        }
        let operation = match (operation, expected_version) {
            (Operation::RecordResult, _) => Operation::Update,
            (_, 0) => Operation::Create,
            (op, _) => op,
        };
        self.append(&bundle.case_id.clone(), Some(expected_version), actor, operation, Some(bundle), None)
    }

    /// Appends `result` to the case history as a new version; the bundle is
    /// unchanged.
    pub fn record_result(&self, case_id: &str, result: StoredResult, actor: &str) -> Result<u64, StoreError> {
        self.append(case_id, None, actor, Operation::RecordResult, None, Some(result))
    }

    fn append(
        &self,
        case_id: &str,
        // None: on top of whatever is current.
        expected_version: Option<u64>,
        actor: &str,
        operation: Operation,
        bundle: Option<ConstraintBundle>,
        result: Option<StoredResult>,
    ) -> Result<u64, StoreError> {
        let dir = self.case_dir(case_id)?;
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        let current = self.current_version(case_id)?;
        if let Some(expected) = expected_version.filter(|&e| e != current) {
            return Err(StoreError::VersionConflict { case_id: case_id.into(), expected, current });
        }
        let previous = if current == 0 { None } else { Some(self.bundle_at(case_id, current)?) };
        let bundle = match (bundle, &previous) {
            (Some(b), _) => b,
            (None, Some(p)) => p.clone(),
            (None, None) => return Err(StoreError::NotFound(case_id.into())),
        };
        let version = current + 1;
        let before = previous.as_ref().map_or(serde_json::Value::Null, |b| serde_json::to_value(b).expect("bundle serializes"));
        let after = serde_json::to_value(&bundle).expect("bundle serializes");
        let entry = HistoryEntry {
            version,
            timestamp: Utc::now(),
            actor: actor.into(),
            operation,
            diff: json_patch::diff(&before, &after),
            result,
        };

        if current == 0 {
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
            sync_dir(&self.root)?;
        }
        write_atomic(&dir, &bundle_file(version), bundle_bytes(&bundle).as_bytes())?;
        let mut line = serde_json::to_string(&entry).expect("history entry serializes");
        line.push('\n');
        let log = dir.join(LOG);
        let mut f = OpenOptions::new().create(true).append(true).open(&log).map_err(io_err(&log))?;
        f.write_all(line.as_bytes()).map_err(io_err(&log))?;
        f.sync_all().map_err(io_err(&log))?;
        if current == 0 {
            sync_dir(&dir)?;
        }
        Ok(version)
    }
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), StoreError> {
    let mut tmp = tempfile::Builder::new().prefix(".tmp-").tempfile_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(tmp.path()))?;
    tmp.as_file().sync_all().map_err(io_err(dir))?;
    let target = dir.join(name);
    tmp.persist(&target).map_err(|e| io_err(&target)(e.error))?;
    sync_dir(dir)
}

fn sync_dir(dir: &Path) -> Result<(), StoreError> {
    File::open(dir).and_then(|d| d.sync_all()).map_err(io_err(dir))
}
