//! Contract ingestion, deduplication, validity filtering, persistence and
//! corpus statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::Command;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

use crate::diff::CodeChange;
use crate::hash::normalize_newlines;
use crate::lexer::{tokenize, TokenKind, TokenStream};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("no .sol files found in the given paths")]
    EmptyInput,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("compiler hook `{command}` could not be run: {source}")]
    HookFailure {
        command: String,
        #[source]
        source: io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io { path: path.to_path_buf(), source }
}

/// A deduplicated Solidity source unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contract {
    pub id: String,
    pub uri: String,
    pub name: Vec<String>,
    /// LF-normalized source text.
    pub source: String,
    pub line_count: usize,
    pub vocab_count: usize,
}

impl Contract {
    pub fn from_source(uri: impl Into<String>, source: &str) -> Self {
        let source = normalize_newlines(source);
        let stream = tokenize(&source);
        Self::with_stream(uri.into(), source, &stream)
    }

    fn with_stream(uri: String, source: String, stream: &TokenStream) -> Self {
        Self {
            id: stream.source_id.clone(),
            uri,
            name: declared_names(stream),
            line_count: 1 + source.bytes().filter(|&b| b == b'\n').count(),
            vocab_count: stream.vocab_count(),
            source,
        }
    }

    /// Final path component of `uri`.
    pub fn file_name(&self) -> &str {
        self.uri.rsplit('/').next().unwrap_or(&self.uri)
    }
}

/// Names following `contract`, `interface` or `library`.
fn declared_names(stream: &TokenStream) -> Vec<String> {
    stream
        .tokens
        .windows(2)
        .filter(|w| {
            matches!(w[0].text.as_str(), "contract" | "interface" | "library")
                && w[1].kind == TokenKind::Identifier
        })
        .map(|w| w[1].text.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestFailure {
    pub path: String,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub contracts: Vec<Contract>,
    pub failures: Vec<IngestFailure>,
}

fn is_sol(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "sol")
}

fn display_path(path: &Path) -> String {
    path.to_string_lossy().replace('\\', "/")
}

/// Reads every `.sol` file under `paths`. Directories are walked in sorted
/// order; a file's uri is its path relative to the directory given.
/// Unreadable files are collected in `failures` rather than aborting.
pub fn ingest<P: AsRef<Path>>(paths: &[P]) -> Result<Ingested, CorpusError> {
    let mut files: Vec<(PathBuf, String)> = Vec::new();
    let mut failures = Vec::new();
    for root in paths {
        let root = root.as_ref();
        if root.is_file() {
            if is_sol(root) {
                files.push((root.to_path_buf(), display_path(root)));
            }
            continue;
        }
        if !root.exists() {
            failures.push(IngestFailure { path: display_path(root), error: "path does not exist".into() });
            continue;
        }
        for entry in WalkDir::new(root).sort_by_file_name() {
            match entry {
                Ok(e) if e.file_type().is_file() && is_sol(e.path()) => {
                    let rel = e.path().strip_prefix(root).unwrap_or(e.path());
                    files.push((e.path().to_path_buf(), display_path(rel)));
                }
                Ok(_) => {}
                Err(err) => failures.push(IngestFailure {
                    path: err.path().map(display_path).unwrap_or_default(),
                    error: err.to_string(),
                }),
            }
        }
    }
    if files.is_empty() {
        return Err(CorpusError::EmptyInput);
    }

    let loaded: Vec<Result<Contract, IngestFailure>> = files
        .par_iter()
        .map(|(path, uri)| {
            let bytes = fs::read(path)
                .map_err(|e| IngestFailure { path: display_path(path), error: e.to_string() })?;
            let text = String::from_utf8(bytes).map_err(|e| IngestFailure {
                path: display_path(path),
                error: format!("not valid utf-8: {e}"),
            })?;
            Ok(Contract::from_source(uri.clone(), &text))
        })
        .collect();

    let mut contracts = Vec::with_capacity(loaded.len());
    for item in loaded {
        match item {
            Ok(c) => contracts.push(c),
            Err(f) => failures.push(f),
        }
    }
    Ok(Ingested { contracts, failures })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedDuplicate {
    pub id: String,
    pub kept: String,
    pub dropped: String,
}

/// Distinct sources that declare the same contract name. Reported only;
/// never used to delete anything.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameCollision {
    pub name: String,
    pub uris: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupReport {
    pub dropped: Vec<DroppedDuplicate>,
    pub name_collisions: Vec<NameCollision>,
}

/// Keeps the first contract for each id, in input order.
pub fn dedup(contracts: Vec<Contract>) -> (Vec<Contract>, DedupReport) {
    let mut first_uri: BTreeMap<String, String> = BTreeMap::new();
    let mut unique = Vec::new();
    let mut report = DedupReport::default();
    for c in contracts {
        if let Some(kept) = first_uri.get(&c.id) {
            report.dropped.push(DroppedDuplicate {
                id: c.id.clone(),
                kept: kept.clone(),
                dropped: c.uri.clone(),
            });
        } else {
            first_uri.insert(c.id.clone(), c.uri.clone());
            unique.push(c);
        }
    }

    let mut by_name: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for c in &unique {
        for n in &c.name {
            by_name.entry(n).or_default().push(&c.uri);
        }
    }
    report.name_collisions = by_name
        .into_iter()
        .filter(|(_, uris)| uris.len() > 1)
        .map(|(name, uris)| NameCollision {
            name: name.to_string(),
            uris: uris.into_iter().map(str::to_string).collect(),
        })
        .collect();
    (unique, report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    EmptyTokenStream,
    UnbalancedDelimiter,
    LexError,
    CompilerRejected,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::EmptyTokenStream => "empty-token-stream",
            RejectReason::UnbalancedDelimiter => "unbalanced-delimiter",
            RejectReason::LexError => "lex-error",
            RejectReason::CompilerRejected => "compiler-rejected",
        }
    }
}

/// Lexer-level well-formedness: clean lex, at least one token, and
/// properly nested `()`, `[]`, `{}`.
pub fn check_well_formed(source: &str) -> Result<(), RejectReason> {
    let stream = tokenize(source);
    if !stream.is_clean() {
        return Err(RejectReason::LexError);
    }
    if stream.tokens.is_empty() {
        return Err(RejectReason::EmptyTokenStream);
    }
    let mut stack = Vec::new();
    for t in &stream.tokens {
        if t.kind != TokenKind::Punctuation {
            continue;
        }
        match t.text.as_str() {
            "(" => stack.push(')'),
            "[" => stack.push(']'),
            "{" => stack.push('}'),
            ")" | "]" | "}" => {
                let close = t.text.chars().next();
                if stack.pop() != close {
                    return Err(RejectReason::UnbalancedDelimiter);
                }
            }
            _ => {}
        }
    }
    if stack.is_empty() {
        Ok(())
    } else {
        Err(RejectReason::UnbalancedDelimiter)
    }
}

/// External compile check, run as `<program> [args..] <file>`; exit 0 means
/// the contract is functional.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompilerHook {
    pub command: String,
}

impl CompilerHook {
    pub fn new(command: impl Into<String>) -> Self {
        Self { command: command.into() }
    }

    pub fn accepts(&self, contract: &Contract) -> Result<bool, CorpusError> {
        let hook_err = |source| CorpusError::HookFailure { command: self.command.clone(), source };
        let mut parts = self.command.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| hook_err(io::Error::new(io::ErrorKind::InvalidInput, "empty command")))?;
        let dir = tempfile::tempdir().map_err(hook_err)?;
        let file = dir.path().join(format!("{}.sol", contract.id));
        fs::write(&file, &contract.source).map_err(hook_err)?;
        let status = Command::new(program)
            .args(parts)
            .arg(&file)
            .stdout(std::process::Stdio::null())
            .stderr(std::process::Stdio::null())
            .status()
            .map_err(hook_err)?;
        Ok(status.success())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub id: String,
    pub uri: String,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default)]
pub struct Validity {
    pub functional: Vec<Contract>,
    pub rejected: Vec<Rejection>,
    pub warnings: Vec<String>,
}

/// Splits contracts into functional and rejected. Without a hook, or once
/// the hook fails to spawn, the lexer-level check is used.
pub fn validity_filter(contracts: Vec<Contract>, hook: Option<&CompilerHook>) -> Validity {
    let mut out = Validity::default();
    let mut hook = hook;
    for c in contracts {
        let verdict = match hook.map(|h| h.accepts(&c)) {
            Some(Ok(true)) => Ok(()),
            Some(Ok(false)) => Err(RejectReason::CompilerRejected),
            Some(Err(e)) => {
                let msg = format!("{e}; falling back to lexer check");
                log::warn!("{msg}");
                out.warnings.push(msg);
                hook = None;
                check_well_formed(&c.source)
            }
            None => check_well_formed(&c.source),
        };
        match verdict {
            Ok(()) => out.functional.push(c),
            Err(reason) => out.rejected.push(Rejection { id: c.id.clone(), uri: c.uri.clone(), reason }),
        }
    }
    out
}

/// One line of `index.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexRecord {
    pub id: String,
    pub uri: String,
    pub name: Vec<String>,
    pub line_count: usize,
    pub vocab_count: usize,
}

impl From<&Contract> for IndexRecord {
    fn from(c: &Contract) -> Self {
        Self {
            id: c.id.clone(),
            uri: c.uri.clone(),
            name: c.name.clone(),
            line_count: c.line_count,
            vocab_count: c.vocab_count,
        }
    }
}

pub const INDEX_FILE: &str = "index.json";

/// Writes `<dir>/<id>.sol` for every contract plus `<dir>/index.json`.
pub fn write_store(dir: &Path, contracts: &[Contract]) -> Result<(), CorpusError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for c in contracts {
        let path = dir.join(format!("{}.sol", c.id));
        fs::write(&path, &c.source).map_err(io_err(&path))?;
    }
    let index: Vec<IndexRecord> = contracts.iter().map(IndexRecord::from).collect();
    let path = dir.join(INDEX_FILE);
    crate::io::write_json(&path, &index).map_err(io_err(&path))
}

/// Loads a store written by [`write_store`], in index order.
pub fn read_store(dir: &Path) -> Result<Vec<Contract>, CorpusError> {
    let path = dir.join(INDEX_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let index: Vec<IndexRecord> =
        serde_json::from_str(&text).map_err(|source| CorpusError::Json { path: path.clone(), source })?;
    index
        .into_iter()
        .map(|rec| {
            let path = dir.join(format!("{}.sol", rec.id));
            let source = fs::read_to_string(&path).map_err(io_err(&path))?;
            Ok(Contract {
                id: rec.id,
                uri: rec.uri,
                name: rec.name,
                source,
                line_count: rec.line_count,
                vocab_count: rec.vocab_count,
            })
        })
        .collect()
}

/// Which contracts the line/vocabulary statistics cover.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatsScope {
    /// Contracts with changes when any changes are supplied, else all.
    #[default]
    Auto,
    All,
    Changed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total_collected: usize,
    pub unique_functional: usize,
    pub removed_nonfunctional_or_duplicate: usize,
    pub contracts_with_changes: usize,
    pub total_lines: usize,
    pub total_vocab: usize,
    pub avg_lines: f64,
    pub avg_vocab: f64,
    pub min_lines: usize,
    pub max_lines: usize,
    pub min_vocab: usize,
    pub max_vocab: usize,
}

impl CorpusStats {
    /// Copy with averages rounded to 3 decimals, as printed in reports.
    pub fn rounded(&self) -> Self {
        let r = |x: f64| (x * 1000.0).round() / 1000.0;
        Self { avg_lines: r(self.avg_lines), avg_vocab: r(self.avg_vocab), ..self.clone() }
    }
}

/// `total_collected` is the pre-dedup, pre-validity count; `contracts` the
/// unique functional set.
pub fn corpus_stats(
    total_collected: usize,
    contracts: &[Contract],
    changes: &[CodeChange],
    scope: StatsScope,
) -> Result<CorpusStats, CorpusError> {
    if contracts.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let changed: BTreeSet<&str> = changes.iter().map(|c| c.contract_id.as_str()).collect();
    let with_changes: Vec<&Contract> = contracts.iter().filter(|c| changed.contains(c.id.as_str())).collect();
    let use_changed = match scope {
        StatsScope::Auto => !changes.is_empty(),
        StatsScope::All => false,
        StatsScope::Changed => true,
    };
    let population: Vec<&Contract> =
        if use_changed { with_changes.clone() } else { contracts.iter().collect() };
    if population.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let n = population.len() as f64;
    let lines = population.iter().map(|c| c.line_count);
    let vocab = population.iter().map(|c| c.vocab_count);
    let total_lines: usize = lines.clone().sum();
    let total_vocab: usize = vocab.clone().sum();
    Ok(CorpusStats {
        total_collected,
        unique_functional: contracts.len(),
        removed_nonfunctional_or_duplicate: total_collected.saturating_sub(contracts.len()),
        contracts_with_changes: with_changes.len(),
        total_lines,
        total_vocab,
        avg_lines: total_lines as f64 / n,
        avg_vocab: total_vocab as f64 / n,
        min_lines: lines.clone().min().unwrap_or(0),
        max_lines: lines.max().unwrap_or(0),
        min_vocab: vocab.clone().min().unwrap_or(0),
        max_vocab: vocab.max().unwrap_or(0),
    })
}
