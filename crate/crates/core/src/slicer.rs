//! Line-window code slices around findings, class balancing and the
//! stratified train/eval split.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::corpus::Contract;
use crate::detectors::{Finding, VulnClass};
use crate::hash::stage_seed;
use crate::io::{read_json, read_jsonl, write_json, write_jsonl};
use crate::lexer::tokenize_unhashed;

pub const DEFAULT_WINDOW: usize = 3;
pub const DEFAULT_RATIO: f64 = 0.75;
pub const TRAIN_FILE: &str = "train.jsonl";
pub const EVAL_FILE: &str = "eval.jsonl";

#[derive(Debug, Error)]
pub enum SlicerError {
    #[error("ratio must lie strictly between 0 and 1, got {0}")]
    BadRatio(f64),
    #[error("dataset has no split")]
    NotSplit,
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SlicerWarning {
    EmptyClass(SliceLabel),
    DegenerateClass(SliceLabel),
}

impl fmt::Display for SlicerWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlicerWarning::EmptyClass(l) => write!(f, "class {l} has no slices"),
            SlicerWarning::DegenerateClass(l) => {
                write!(f, "class {l} has fewer than 2 slices; all placed in train")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SliceLabel {
    Vuln(VulnClass),
    Clean,
}

impl SliceLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SliceLabel::Vuln(c) => c.as_str(),
            SliceLabel::Clean => "CLEAN",
        }
    }
}

impl fmt::Display for SliceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SliceLabel {
    type Err = SlicerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "CLEAN" {
            return Ok(SliceLabel::Clean);
        }
        s.parse().map(SliceLabel::Vuln).map_err(|_| SlicerError::UnknownLabel(s.to_string()))
    }
}

impl Serialize for SliceLabel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for SliceLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slice {
    pub slice_id: String,
    pub contract_id: String,
    pub label: SliceLabel,
    pub code: String,
    /// Inclusive 1-based line span.
    pub line_span: [usize; 2],
    pub window: usize,
}

impl Slice {
    fn new(
        contract: &Contract,
        lines: &[&str],
        label: SliceLabel,
        (s, e): (usize, usize),
        window: usize,
    ) -> Self {
        let short = &contract.id[..contract.id.len().min(16)];
        Slice {
            slice_id: format!("{short}-{label}-{s}-{e}"),
            contract_id: contract.id.clone(),
            label,
            code: lines[s - 1..e].join("\n"),
            line_span: [s, e],
            window,
        }
    }

    pub fn overlaps(&self, (s, e): (usize, usize)) -> bool {
        self.line_span[0] <= e && s <= self.line_span[1]
    }
}

/// Slices one contract. Same-class findings closer than `window` lines are
/// merged; each group becomes one slice widened by `window` lines and
/// clipped to the file. Lines outside every finding are cut into CLEAN
/// slices of `2 * window + 1` lines; shorter leftovers are dropped.
pub fn slice_contract(contract: &Contract, findings: &[Finding], window: usize) -> Vec<Slice> {
    let lines: Vec<&str> = contract.source.split('\n').collect();
    let n = lines.len();
    let mut by_class: BTreeMap<VulnClass, Vec<(usize, usize)>> = BTreeMap::new();
    let mut flagged = vec![false; n + 1];
    for f in findings.iter().filter(|f| f.contract_id == contract.id) {
        let (s, e) = (f.lines.0.clamp(1, n), f.lines.1.clamp(1, n));
        by_class.entry(f.vuln_class).or_default().push((s, e));
        flagged[s..=e].iter_mut().for_each(|x| *x = true);
    }

    let mut out = Vec::new();
    for (class, mut spans) in by_class {
        spans.sort_unstable();
        let mut groups: Vec<(usize, usize)> = Vec::new();
        for (s, e) in spans {
            match groups.last_mut() {
                Some(g) if s <= g.1 + window => g.1 = g.1.max(e),
                _ => groups.push((s, e)),
            }
        }
        for (s, e) in groups {
            let span = (s.saturating_sub(window).max(1), (e + window).min(n));
            out.push(Slice::new(contract, &lines, SliceLabel::Vuln(class), span, window));
        }
    }

    let piece = 2 * window + 1;
    let mut line = 1;
    while line <= n {
        if flagged[line] {
            line += 1;
            continue;
        }
        let run_start = line;
        while line <= n && !flagged[line] {
            line += 1;
        }
        let mut s = run_start;
        while s + piece <= line {
            out.push(Slice::new(contract, &lines, SliceLabel::Clean, (s, s + piece - 1), window));
            s += piece;
        }
    }
    out.sort_by(|a, b| a.line_span.cmp(&b.line_span).then(a.label.cmp(&b.label)));
    out
}

/// Keeps slices whose code contains an `assembly` token.
pub fn require_assembly(slices: Vec<Slice>) -> Vec<Slice> {
    slices
        .into_iter()
        .filter(|s| tokenize_unhashed(&s.code).tokens.iter().any(|t| t.is("assembly")))
        .collect()
}

/// Per-class caps: 1000 for five trained classes and 592 for IE.
pub fn default_caps() -> BTreeMap<SliceLabel, usize> {
    VulnClass::TRAINED
        .into_iter()
        .map(|c| (SliceLabel::Vuln(c), if c == VulnClass::IE { 592 } else { 1000 }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train_ids: Vec<String>,
    pub eval_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Sorted by (label, slice_id).
    pub slices: Vec<Slice>,
    pub per_class_counts: BTreeMap<SliceLabel, usize>,
    pub seed: u64,
    pub window: usize,
    pub caps: BTreeMap<SliceLabel, usize>,
    pub ratio: Option<f64>,
    pub split: Option<Split>,
}

/// `dataset.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: u64,
    pub window: usize,
    pub caps: BTreeMap<SliceLabel, usize>,
    pub ratio: Option<f64>,
    pub counts: BTreeMap<SliceLabel, usize>,
}

fn counts(slices: &[Slice]) -> BTreeMap<SliceLabel, usize> {
    let mut m = BTreeMap::new();
    for s in slices {
        *m.entry(s.label).or_insert(0) += 1;
    }
    m
}

fn label_rng(seed: u64, stage: &str, label: SliceLabel) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stage_seed(seed, &format!("{stage}/{label}")))
}

/// Draws up to `caps[c]` slices of each capped class uniformly without
/// replacement. Classes absent from `caps` are dropped.
pub fn balance(
    slices: &[Slice],
    caps: &BTreeMap<SliceLabel, usize>,
    seed: u64,
) -> (Dataset, Vec<SlicerWarning>) {
    let mut warnings = Vec::new();
    let mut kept = Vec::new();
    let window = slices.first().map_or(DEFAULT_WINDOW, |s| s.window);
    for (&label, &cap) in caps {
        let mut pool: Vec<&Slice> = slices.iter().filter(|s| s.label == label).collect();
        pool.sort_by(|a, b| a.slice_id.cmp(&b.slice_id));
        pool.dedup_by(|a, b| a.slice_id == b.slice_id);
        if pool.is_empty() {
            warnings.push(SlicerWarning::EmptyClass(label));
            continue;
        }
        if pool.len() <= cap {
            kept.extend(pool.into_iter().cloned());
        } else {
            let mut idx = sample(&mut label_rng(seed, "balance", label), pool.len(), cap).into_vec();
            idx.sort_unstable();
            kept.extend(idx.into_iter().map(|i| pool[i].clone()));
        }
    }
    let per_class_counts = counts(&kept);
    let ds = Dataset {
        slices: kept,
        per_class_counts,
        seed,
        window,
        caps: caps.clone(),
        ratio: None,
        split: None,
    };
    (ds, warnings)
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Stratified split; each class puts `round(ratio * size)` slices (half up)
/// in train. With `strict`, all slices of one contract land on the same
/// side, so per-class counts only approximate the target.
pub fn split(
    mut dataset: Dataset,
    ratio: f64,
    seed: u64,
    strict: bool,
) -> Result<(Dataset, Vec<SlicerWarning>), SlicerError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(SlicerError::BadRatio(ratio));
    }
    let mut warnings = Vec::new();
    let mut by_label: BTreeMap<SliceLabel, Vec<&Slice>> = BTreeMap::new();
    for s in &dataset.slices {
        by_label.entry(s.label).or_default().push(s);
    }
    let mut train: BTreeSet<String> = BTreeSet::new();
    let mut targets = BTreeMap::new();
    for (&label, pool) in &by_label {
        if pool.len() < 2 {
            warnings.push(SlicerWarning::DegenerateClass(label));
            train.extend(pool.iter().map(|s| s.slice_id.clone()));
            targets.insert(label, pool.len());
            continue;
        }
        let k = round_half_up(ratio * pool.len() as f64);
        targets.insert(label, k);
        if !strict {
            let mut ids: Vec<&str> = pool.iter().map(|s| s.slice_id.as_str()).collect();
            ids.sort_unstable();
            ids.shuffle(&mut label_rng(seed, "split", label));
            train.extend(ids[..k].iter().map(|s| s.to_string()));
        }
    }
    if strict {
        train = strict_train_set(&dataset.slices, &targets, seed);
    }
    let (train_ids, eval_ids) =
        dataset.slices.iter().map(|s| s.slice_id.clone()).partition(|id| train.contains(id));
    dataset.split = Some(Split { train_ids, eval_ids });
    dataset.ratio = Some(ratio);
    Ok((dataset, warnings))
}

/// Greedy contract-level assignment: contracts are visited in seeded order
/// and go to train when that lowers the total distance to the per-class
/// train targets.
fn strict_train_set(slices: &[Slice], targets: &BTreeMap<SliceLabel, usize>, seed: u64) -> BTreeSet<String> {
    let mut by_contract: BTreeMap<&str, Vec<&Slice>> = BTreeMap::new();
    for s in slices {
        by_contract.entry(&s.contract_id).or_default().push(s);
    }
    let mut contracts: Vec<&str> = by_contract.keys().copied().collect();
    contracts.shuffle(&mut ChaCha8Rng::seed_from_u64(stage_seed(seed, "split/strict")));
    let mut have: BTreeMap<SliceLabel, usize> = BTreeMap::new();
    let mut train = BTreeSet::new();
    for c in contracts {
        let group = &by_contract[c];
        let add = counts(&group.iter().map(|s| (*s).clone()).collect::<Vec<_>>());
        let gain: i64 = add
            .iter()
            .map(|(l, &n)| {
                let h = *have.get(l).unwrap_or(&0) as i64;
                let t = targets[l] as i64;
                (h - t).abs() - (h + n as i64 - t).abs()
            })
            .sum();
        if gain > 0 {
            for (l, n) in add {
                *have.entry(l).or_insert(0) += n;
            }
            train.extend(group.iter().map(|s| s.slice_id.clone()));
        }
    }
    train
}

/// A line of `train.jsonl` / `eval.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceRecord {
    pub slice_id: String,
    pub contract_id: String,
    pub label: SliceLabel,
    pub code: String,
    pub line_span: [usize; 2],
}

impl From<&Slice> for SliceRecord {
    fn from(s: &Slice) -> Self {
        SliceRecord {
            slice_id: s.slice_id.clone(),
            contract_id: s.contract_id.clone(),
            label: s.label,
            code: s.code.clone(),
            line_span: s.line_span,
        }
    }
}

impl Dataset {
    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            seed: self.seed,
            window: self.window,
            caps: self.caps.clone(),
            ratio: self.ratio,
            counts: self.per_class_counts.clone(),
        }
    }

    pub fn records(&self, ids: &[String]) -> Vec<SliceRecord> {
        let wanted: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
        self.slices.iter().filter(|s| wanted.contains(s.slice_id.as_str())).map(SliceRecord::from).collect()
    }
}

/// Writes `train.jsonl` and `eval.jsonl` under `dir`.
pub fn emit_jsonl(dataset: &Dataset, dir: &Path) -> Result<(), SlicerError> {
    let split = dataset.split.as_ref().ok_or(SlicerError::NotSplit)?;
    write_jsonl(&dir.join(TRAIN_FILE), &dataset.records(&split.train_ids))?;
    write_jsonl(&dir.join(EVAL_FILE), &dataset.records(&split.eval_ids))?;
    Ok(())
}

pub fn write_meta(dataset: &Dataset, path: &Path) -> Result<(), SlicerError> {
    Ok(write_json(path, &dataset.meta())?)
}

/// Rebuilds a split dataset from `emit_jsonl` output and its metadata.
pub fn read_dataset(dir: &Path, meta_path: &Path) -> Result<Dataset, SlicerError> {
    let meta: DatasetMeta = read_json(meta_path)?;
    let train: Vec<SliceRecord> = read_jsonl(&dir.join(TRAIN_FILE))?;
    let eval: Vec<SliceRecord> = read_jsonl(&dir.join(EVAL_FILE))?;
    let train_set: BTreeSet<String> = train.iter().map(|r| r.slice_id.clone()).collect();
    let mut slices: Vec<Slice> = train
        .into_iter()
        .chain(eval)
        .map(|r| Slice {
            slice_id: r.slice_id,
            contract_id: r.contract_id,
            label: r.label,
            code: r.code,
            line_span: r.line_span,
            window: meta.window,
        })
        .collect();
    slices.sort_by(|a, b| (a.label, &a.slice_id).cmp(&(b.label, &b.slice_id)));
    let (train_ids, eval_ids) =
        slices.iter().map(|s| s.slice_id.clone()).partition(|id| train_set.contains(id));
    Ok(Dataset {
        per_class_counts: counts(&slices),
        slices,
        seed: meta.seed,
        window: meta.window,
        caps: meta.caps,
        ratio: meta.ratio,
        split: Some(Split { train_ids, eval_ids }),
    })
}
