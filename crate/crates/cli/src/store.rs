//! Design documents, the decision log, and their single-file store.
//!
//! The store is an append-only JSON-lines journal: every mutation is one
//! line, written and fsynced before the in-memory index changes. Opening the
//! file replays it. A torn final line (crash mid-write) is cut off; damage
//! anywhere else is reported rather than skipped.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use bop2te::boundary::DecisionRecord;
use bop2te::design::DesignSpec;
use bop2te::optimizer::{GridVariant, OptimizationResult, SearchMethod};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::DesignConfig;
use crate::error::AppError;

pub const STORE_ENV: &str = "BOP2TE_STORE";
pub const DEFAULT_STORE_FILE: &str = "bop2te-store.jsonl";

fn sha256_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("domain types serialize");
    hex::encode(Sha256::digest(bytes))
}

/// Saved trial settings together with the boundaries derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignDocument {
    pub id: String,
    pub spec: DesignSpec,
    pub search: SearchMethod,
    pub grid: GridVariant,
    pub result: Option<OptimizationResult>,
    /// Hash of `(spec, search, grid)`.
    pub spec_hash: String,
    /// `spec_hash` of the inputs `result` was computed from.
    pub result_spec_hash: Option<String>,
    pub result_hash: Option<String>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    #[serde(default)]
    pub annotation: String,
}

impl DesignDocument {
    pub fn new(config: &DesignConfig, result: Option<OptimizationResult>) -> Self {
        let now = Utc::now();
        let mut doc = DesignDocument {
            id: uuid::Uuid::new_v4().to_string(),
            spec: config.spec.clone(),
            search: config.search,
            grid: config.grid,
            result: None,
            spec_hash: String::new(),
            result_spec_hash: None,
            result_hash: None,
            created_at: now,
            updated_at: now,
            annotation: config.annotation.clone(),
        };
        doc.spec_hash = doc.compute_spec_hash();
        if let Some(r) = result {
            doc.set_result(r);
        }
        doc
    }

    pub fn config(&self) -> DesignConfig {
        DesignConfig {
            spec: self.spec.clone(),
            search: self.search,
            grid: self.grid,
            annotation: self.annotation.clone(),
        }
    }

    pub fn compute_spec_hash(&self) -> String {
        sha256_json(&(&self.spec, self.search, self.grid))
    }

    pub fn set_result(&mut self, result: OptimizationResult) {
        self.result_hash = Some(result_hash(&result));
        self.result_spec_hash = Some(self.spec_hash.clone());
        self.result = Some(result);
        self.updated_at = Utc::now();
    }

    /// The stored result was produced from exactly this spec.
    pub fn is_consistent(&self) -> bool {
        let spec_ok = self.spec_hash == self.compute_spec_hash();
        match &self.result {
            None => spec_ok && self.result_hash.is_none(),
            Some(r) => {
                spec_ok
                    && self.result_spec_hash.as_deref() == Some(self.spec_hash.as_str())
                    && self.result_hash.as_deref() == Some(result_hash(r).as_str())
            }
        }
    }
}

pub fn result_hash(result: &OptimizationResult) -> String {
    sha256_json(result)
}

/// One interim decision recorded against a design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionLogEntry {
    pub document_id: String,
    /// Position in this document's log, from 1.
    pub sequence: usize,
    pub recorded_at: DateTime<Utc>,
    #[serde(flatten)]
    pub record: DecisionRecord,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum Record {
    PutDocument { document: Box<DesignDocument> },
    AppendDecision { entry: DecisionLogEntry },
}

#[derive(Default)]
struct Index {
    documents: BTreeMap<String, DesignDocument>,
    decisions: HashMap<String, Vec<DecisionLogEntry>>,
}

impl Index {
    fn apply(&mut self, record: Record) {
        match record {
            Record::PutDocument { document } => {
                self.documents.insert(document.id.clone(), *document);
            }
            Record::AppendDecision { entry } => {
                self.decisions.entry(entry.document_id.clone()).or_default().push(entry);
            }
        }
    }
}

struct Inner {
    journal: Option<File>,
    index: Index,
}

pub struct Store {
    path: Option<PathBuf>,
    inner: Mutex<Inner>,
}

impl Store {
    /// A store that lives only as long as the process.
    pub fn in_memory() -> Self {
        Store { path: None, inner: Mutex::new(Inner { journal: None, index: Index::default() }) }
    }

    /// Path from `BOP2TE_STORE`, else `bop2te-store.jsonl` in the working directory.
    pub fn default_path() -> PathBuf {
        std::env::var_os(STORE_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_STORE_FILE))
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, AppError> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(&path)?;
        let mut index = Index::default();

        let mut reader = BufReader::new(&file);
        let mut good_len: u64 = 0;
        let mut line = String::new();
        let mut line_no = 0;
        let mut torn = false;
        loop {
            line.clear();
            let read = reader.read_line(&mut line)?;
            if read == 0 {
                break;
            }
            line_no += 1;
            let complete = line.ends_with('\n');
            let text = line.trim();
            if text.is_empty() {
                good_len += read as u64;
                continue;
            }
            match serde_json::from_str::<Record>(text) {
                Ok(record) if complete => {
                    index.apply(record);
                    good_len += read as u64;
                }
                _ if !complete => {
                    torn = true;
                    break;
                }
                Err(e) => {
                    return Err(AppError::Internal(format!(
                        "store {} is corrupt at line {line_no}: {e}",
                        path.display()
                    )))
                }
                Ok(_) => unreachable!(),
            }
        }
        drop(reader);
        if torn {
            file.set_len(good_len)?;
            file.sync_all()?;
        }
        file.seek(SeekFrom::End(0))?;
        Ok(Store { path: Some(path), inner: Mutex::new(Inner { journal: Some(file), index }) })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        // A panic while holding the lock cannot leave a half-applied record:
        // the index only changes after the journal write succeeded.
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn commit(inner: &mut Inner, record: Record) -> Result<(), AppError> {
        if let Some(file) = inner.journal.as_mut() {
            let mut line = serde_json::to_vec(&record)?;
            line.push(b'\n');
            file.write_all(&line)?;
            file.sync_data()?;
        }
        inner.index.apply(record);
        Ok(())
    }

    pub fn put_document(&self, document: DesignDocument) -> Result<(), AppError> {
        let mut inner = self.lock();
        Self::commit(&mut inner, Record::PutDocument { document: Box::new(document) })
    }

    pub fn document(&self, id: &str) -> Result<DesignDocument, AppError> {
        self.lock()
            .index
            .documents
            .get(id)
            .cloned()
            .ok_or_else(|| AppError::NotFound(format!("no design with id `{id}`")))
    }

    pub fn documents(&self) -> Vec<DesignDocument> {
        self.lock().index.documents.values().cloned().collect()
    }

    pub fn decisions(&self, id: &str) -> Result<Vec<DecisionLogEntry>, AppError> {
        let inner = self.lock();
        if !inner.index.documents.contains_key(id) {
            return Err(AppError::NotFound(format!("no design with id `{id}`")));
        }
        Ok(inner.index.decisions.get(id).cloned().unwrap_or_default())
    }

    /// Builds and appends a log entry atomically with respect to other
    /// appends for any document.
    pub fn append_decision(
        &self,
        id: &str,
        build: impl FnOnce(&DesignDocument, &[DecisionLogEntry]) -> Result<DecisionRecord, AppError>,
    ) -> Result<DecisionLogEntry, AppError> {
        let mut inner = self.lock();
        let doc =
            inner.index.documents.get(id).ok_or_else(|| AppError::NotFound(format!("no design with id `{id}`")))?;
        let log = inner.index.decisions.get(id).map(Vec::as_slice).unwrap_or_default();
        let record = build(doc, log)?;
        let entry =
            DecisionLogEntry { document_id: id.to_string(), sequence: log.len() + 1, recorded_at: Utc::now(), record };
        Self::commit(&mut inner, Record::AppendDecision { entry: entry.clone() })?;
        Ok(entry)
    }
}
