//! Unified-diff parsing, comment-only filtering, keyword clustering and
//! seeded per-cluster sampling of code changes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::{content_hash, normalize_newlines, stage_seed};
use crate::lexer::{strip_comments, tokenize_unhashed};

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("malformed diff at line {line}: {reason}")]
    MalformedDiff { line: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid manifest: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

fn malformed(line: usize, reason: impl Into<String>) -> DiffError {
    DiffError::MalformedDiff { line, reason: reason.into() }
}

/// A context-free change block. Start lines follow `diff -U0` conventions:
/// when a side is empty its start is the line *before* the change point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    pub old_start: usize,
    pub old_len: usize,
    pub new_start: usize,
    pub new_len: usize,
    pub removed_lines: Vec<String>,
    pub added_lines: Vec<String>,
}

impl Hunk {
    /// First new-file line index (0-based) this hunk occupies or follows.
    fn new_index(&self) -> usize {
        if self.new_len == 0 {
            self.new_start
        } else {
            self.new_start - 1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClusterLabel {
    StandardCompliance,
    Storage,
    PragmaChanges,
    ContractOracle,
    Assembly,
    Upgradability,
    Testing,
    Random,
}

impl ClusterLabel {
    pub const ALL: [ClusterLabel; 8] = [
        ClusterLabel::StandardCompliance,
        ClusterLabel::Storage,
        ClusterLabel::PragmaChanges,
        ClusterLabel::ContractOracle,
        ClusterLabel::Assembly,
        ClusterLabel::Upgradability,
        ClusterLabel::Testing,
        ClusterLabel::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClusterLabel::StandardCompliance => "StandardCompliance",
            ClusterLabel::Storage => "Storage",
            ClusterLabel::PragmaChanges => "PragmaChanges",
            ClusterLabel::ContractOracle => "ContractOracle",
            ClusterLabel::Assembly => "Assembly",
            ClusterLabel::Upgradability => "Upgradability",
            ClusterLabel::Testing => "Testing",
            ClusterLabel::Random => "Random",
        }
    }
}

impl fmt::Display for ClusterLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeChange {
    pub id: String,
    pub contract_id: String,
    pub hunks: Vec<Hunk>,
    pub cluster: Option<ClusterLabel>,
}

impl CodeChange {
    pub fn new(id: impl Into<String>, contract_id: impl Into<String>) -> Self {
        Self { id: id.into(), contract_id: contract_id.into(), hunks: Vec::new(), cluster: None }
    }

    pub fn from_diff(
        id: impl Into<String>,
        contract_id: impl Into<String>,
        text: &str,
    ) -> Result<Self, DiffError> {
        Ok(Self { hunks: parse_diff(text)?, ..Self::new(id, contract_id) })
    }

    fn removed_text(&self) -> String {
        self.hunks.iter().flat_map(|h| &h.removed_lines).cloned().collect::<Vec<_>>().join("\n")
    }

    fn added_text(&self) -> String {
        self.hunks.iter().flat_map(|h| &h.added_lines).cloned().collect::<Vec<_>>().join("\n")
    }
}

fn parse_range(s: &str) -> Option<(usize, usize)> {
    match s.split_once(',') {
        Some((start, len)) => Some((start.parse().ok()?, len.parse().ok()?)),
        None => Some((s.parse().ok()?, 1)),
    }
}

fn parse_hunk_header(line: &str) -> Option<((usize, usize), (usize, usize))> {
    let rest = line.strip_prefix("@@ -")?;
    let (ranges, _) = rest.split_once(" @@")?;
    let (old, new) = ranges.split_once(" +")?;
    Some((parse_range(old)?, parse_range(new)?))
}

/// Parses a single-file unified diff into context-free hunks. Hunks with
/// context are split into one [`Hunk`] per contiguous run of changes, so the
/// result matches what `diff -U0` reports for the same edit.
pub fn parse_diff(text: &str) -> Result<Vec<Hunk>, DiffError> {
    let lines: Vec<&str> = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();
    let mut hunks: Vec<Hunk> = Vec::new();
    let mut file_headers = 0usize;
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        let lineno = i + 1;
        if line.starts_with("--- ") && lines.get(i + 1).is_some_and(|n| n.starts_with("+++ ")) {
            file_headers += 1;
            if file_headers > 1 {
                return Err(malformed(lineno, "diff touches more than one file"));
            }
            i += 2;
            continue;
        }
        if !line.starts_with("@@") {
            if !hunks.is_empty()
                && !line.is_empty()
                && !line.starts_with("diff ")
                && !line.starts_with("index ")
            {
                return Err(malformed(lineno, "unexpected line outside a hunk"));
            }
            i += 1;
            continue;
        }
        let ((old_start, old_len), (new_start, new_len)) =
            parse_hunk_header(line).ok_or_else(|| malformed(lineno, "bad hunk header"))?;
        i += 1;

        let mut old_left = old_len;
        let mut new_left = new_len;
        let mut cur_old = if old_len == 0 { old_start + 1 } else { old_start };
        let mut cur_new = if new_len == 0 { new_start + 1 } else { new_start };
        let mut run: Option<Hunk> = None;
        let flush = |run: &mut Option<Hunk>, hunks: &mut Vec<Hunk>| {
            if let Some(h) = run.take() {
                hunks.push(h);
            }
        };
        while old_left > 0 || new_left > 0 {
            let Some(&body) = lines.get(i) else {
                return Err(malformed(i + 1, "hunk shorter than its header"));
            };
            let (tag, content) = match body.chars().next() {
                Some(c @ (' ' | '-' | '+' | '\\')) => (c, &body[1..]),
                None => (' ', ""),
                Some(_) => return Err(malformed(i + 1, "unexpected line in hunk body")),
            };
            let start_run = |run: &mut Option<Hunk>, cur_old: usize, cur_new: usize| {
                run.get_or_insert_with(|| Hunk {
                    old_start: cur_old,
                    old_len: 0,
                    new_start: cur_new,
                    new_len: 0,
                    removed_lines: Vec::new(),
                    added_lines: Vec::new(),
                });
            };
            match tag {
                ' ' => {
                    if old_left == 0 || new_left == 0 {
                        return Err(malformed(i + 1, "context line exceeds hunk header counts"));
                    }
                    flush(&mut run, &mut hunks);
                    old_left -= 1;
                    new_left -= 1;
                    cur_old += 1;
                    cur_new += 1;
                }
                '-' => {
                    if old_left == 0 {
                        return Err(malformed(i + 1, "more removed lines than the header states"));
                    }
                    start_run(&mut run, cur_old, cur_new);
                    let h = run.as_mut().expect("run started");
                    h.removed_lines.push(content.to_string());
                    h.old_len += 1;
                    old_left -= 1;
                    cur_old += 1;
                }
                '+' => {
                    if new_left == 0 {
                        return Err(malformed(i + 1, "more added lines than the header states"));
                    }
                    start_run(&mut run, cur_old, cur_new);
                    let h = run.as_mut().expect("run started");
                    h.added_lines.push(content.to_string());
                    h.new_len += 1;
                    new_left -= 1;
                    cur_new += 1;
                }
                _ => {} // "\ No newline at end of file"
            }
            i += 1;
        }
        flush(&mut run, &mut hunks);
        while lines.get(i).is_some_and(|l| l.starts_with('\\')) {
            i += 1;
        }
    }
    for h in &mut hunks {
        if h.old_len == 0 {
            h.old_start -= 1;
        }
        if h.new_len == 0 {
            h.new_start -= 1;
        }
    }
    for pair in hunks.windows(2) {
        if pair[1].old_start < pair[0].old_start + pair[0].old_len {
            return Err(malformed(0, "hunks overlap or are out of order"));
        }
    }
    Ok(hunks)
}

/// Rebuilds the pre-change file from the post-change file, or `None` when
/// the hunks do not fit `new_source`.
pub fn reconstruct_old(change: &CodeChange, new_source: &str) -> Option<String> {
    let new_lines: Vec<&str> = new_source.split('\n').collect();
    let mut old: Vec<&str> = Vec::with_capacity(new_lines.len());
    let mut cursor = 0usize;
    for h in &change.hunks {
        let at = h.new_index();
        if at < cursor || at + h.new_len > new_lines.len() {
            return None;
        }
        if new_lines[at..at + h.new_len].iter().zip(&h.added_lines).any(|(a, b)| a != b) {
            return None;
        }
        old.extend_from_slice(&new_lines[cursor..at]);
        old.extend(h.removed_lines.iter().map(String::as_str));
        cursor = at + h.new_len;
    }
    old.extend_from_slice(&new_lines[cursor..]);
    Some(old.join("\n"))
}

fn squeeze(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

fn pick_lines(text: &str, ranges: impl Iterator<Item = (usize, usize)>) -> String {
    let lines: Vec<&str> = text.split('\n').collect();
    let mut out = String::new();
    for (start, len) in ranges {
        for line in lines.iter().skip(start.saturating_sub(1)).take(len) {
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

/// True when the change only touches comments (or whitespace). With the
/// post-change `contract` source, comment state spanning hunk boundaries is
/// resolved against the full files.
pub fn is_comment_only(change: &CodeChange, contract: Option<&str>) -> bool {
    let full = contract.map(normalize_newlines).and_then(|new_src| {
        let old_src = reconstruct_old(change, &new_src)?;
        let old_code = pick_lines(
            &strip_comments(&old_src),
            change.hunks.iter().filter(|h| h.old_len > 0).map(|h| (h.old_start, h.old_len)),
        );
        let new_code = pick_lines(
            &strip_comments(&new_src),
            change.hunks.iter().filter(|h| h.new_len > 0).map(|h| (h.new_start, h.new_len)),
        );
        Some((old_code, new_code))
    });
    let (old_code, new_code) = full
        .unwrap_or_else(|| (strip_comments(&change.removed_text()), strip_comments(&change.added_text())));
    squeeze(&old_code) == squeeze(&new_code)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordRule {
    pub label: ClusterLabel,
    pub keywords: Vec<String>,
}

/// Ordered (label, keywords) list; the first rule that matches wins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KeywordMap(pub Vec<KeywordRule>);

impl Default for KeywordMap {
    fn default() -> Self {
        let rule = |label, words: &[&str]| KeywordRule {
            label,
            keywords: words.iter().map(|w| w.to_string()).collect(),
        };
        KeywordMap(vec![
            rule(
                ClusterLabel::StandardCompliance,
                &["ERC20", "ERC721", "ERC165", "interface", "transferFrom", "approve"],
            ),
            rule(ClusterLabel::Storage, &["storage", "sstore", "sload", "slot", "mapping"]),
            rule(ClusterLabel::PragmaChanges, &["pragma", "solidity"]),
            rule(ClusterLabel::ContractOracle, &["oracle", "price", "feed", "chainlink"]),
            rule(ClusterLabel::Assembly, &["assembly", "mload", "mstore", "delegatecall"]),
            rule(ClusterLabel::Upgradability, &["upgrade", "proxy", "implementation", "initializer"]),
            rule(ClusterLabel::Testing, &["test", "assert", "mock", "truffle", "hardhat"]),
        ])
    }
}

/// Assigns the first label whose keywords intersect the token texts of the
/// change's added and removed lines (case-insensitive); `Random` otherwise.
pub fn cluster(change: &CodeChange, map: &KeywordMap) -> ClusterLabel {
    let mut words = BTreeSet::new();
    for text in [change.removed_text(), change.added_text()] {
        words.extend(tokenize_unhashed(&text).tokens.into_iter().map(|t| t.text.to_lowercase()));
    }
    map.0
        .iter()
        .find(|rule| rule.keywords.iter().any(|k| words.contains(&k.to_lowercase())))
        .map_or(ClusterLabel::Random, |rule| rule.label)
}

/// `{label: [change ids]}` with every label present.
pub fn cluster_index(changes: &[CodeChange]) -> BTreeMap<ClusterLabel, Vec<String>> {
    let mut out: BTreeMap<ClusterLabel, Vec<String>> =
        ClusterLabel::ALL.iter().map(|l| (*l, Vec::new())).collect();
    for c in changes {
        out.entry(c.cluster.unwrap_or(ClusterLabel::Random)).or_default().push(c.id.clone());
    }
    for ids in out.values_mut() {
        ids.sort();
    }
    out
}

pub const PRAGMA_SAMPLE: usize = 48;

/// Sample size for a cluster of `size` changes.
pub fn sample_size(label: ClusterLabel, size: usize) -> usize {
    match label {
        ClusterLabel::Upgradability => size,
        ClusterLabel::PragmaChanges => size.min(PRAGMA_SAMPLE),
        _ => size.div_ceil(10),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub seed: u64,
    pub clusters: BTreeMap<ClusterLabel, Vec<String>>,
}

impl Sample {
    pub fn len(&self) -> usize {
        self.clusters.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Draws each cluster's sample without replacement. Changes are sorted by
/// (contract id, change id) first, so input order does not matter.
pub fn sample_clusters(changes: &[CodeChange], seed: u64) -> Sample {
    let mut groups: BTreeMap<ClusterLabel, Vec<&CodeChange>> = BTreeMap::new();
    for c in changes {
        groups.entry(c.cluster.unwrap_or(ClusterLabel::Random)).or_default().push(c);
    }
    let mut clusters = BTreeMap::new();
    for (label, mut members) in groups {
        members.sort_by(|a, b| (&a.contract_id, &a.id).cmp(&(&b.contract_id, &b.id)));
        let k = sample_size(label, members.len());
        let mut rng = ChaCha8Rng::seed_from_u64(stage_seed(seed, &format!("sample:{label}")));
        let mut picked: Vec<String> = rand::seq::index::sample(&mut rng, members.len(), k)
            .into_iter()
            .map(|i| members[i].id.clone())
            .collect();
        picked.sort();
        clusters.insert(label, picked);
    }
    Sample { seed, clusters }
}

/// A diff to load, with the post-change contract source when known.
#[derive(Debug, Clone)]
pub struct DiffInput {
    pub change_id: String,
    pub contract_id: String,
    pub text: String,
    pub contract_source: Option<String>,
}

fn read(path: &Path) -> Result<String, DiffError> {
    fs::read_to_string(path).map_err(|source| DiffError::Io { path: path.to_path_buf(), source })
}

/// Loads diffs from a directory of `<contract-id>.diff` / `.patch` files or
/// from a JSON manifest mapping diff path to contract path. Relative paths in
/// a manifest resolve against the manifest's directory.
pub fn load_diff_inputs(path: &Path) -> Result<Vec<DiffInput>, DiffError> {
    let stem = |p: &Path| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|source| DiffError::Io { path: path.to_path_buf(), source })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "diff" || e == "patch"))
            .collect();
        files.sort();
        return files
            .into_iter()
            .map(|f| {
                let id = stem(&f);
                Ok(DiffInput {
                    change_id: id.clone(),
                    contract_id: id,
                    text: read(&f)?,
                    contract_source: None,
                })
            })
            .collect();
    }
    let manifest: BTreeMap<String, String> = serde_json::from_str(&read(path)?)
        .map_err(|source| DiffError::Manifest { path: path.to_path_buf(), source })?;
    let base = path.parent().unwrap_or(Path::new("."));
    manifest
        .into_iter()
        .map(|(diff, contract)| {
            let diff_path = base.join(&diff);
            let source = read(&base.join(&contract))?;
            Ok(DiffInput {
                change_id: stem(&diff_path),
                contract_id: content_hash(&source),
                text: read(&diff_path)?,
                contract_source: Some(normalize_newlines(&source)),
            })
        })
        .collect()
}
