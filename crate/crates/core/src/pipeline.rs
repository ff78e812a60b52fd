//! Run configuration and the stages of the end-to-end pipeline. Every stage
//! reads its inputs from and writes its outputs to the output directory, so
//! running the stages one by one gives the same tree as `run_pipeline`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::{predict_records, train, LinearModel, TrainConfig, DEFAULT_FEATURE_BITS};
use crate::corpus::{
    corpus_stats, dedup, ingest, read_store, validity_filter, write_store, CompilerHook, Contract,
    DedupReport, IngestFailure, Rejection, StatsScope,
};
use crate::detectors::{
    detect, emit_labels_json, intersect_labels, run_tool, Finding, LabelDocument, LabelMeta, Ruleset,
    DEFAULT_TOLERANCE,
};
use crate::diff::{
    cluster, cluster_index, is_comment_only, load_diff_inputs, sample_clusters, CodeChange, KeywordMap,
};
use crate::eval::{read_predictions, render_report, report_from_predictions, ReportFormat};
use crate::io::{read_json, read_jsonl, write_json, write_jsonl};
use crate::slicer::{
    balance, default_caps, emit_jsonl, read_dataset, require_assembly, slice_contract, split, write_meta,
    Slice, SliceLabel, SliceRecord, DEFAULT_RATIO, DEFAULT_WINDOW, EVAL_FILE, TRAIN_FILE,
};

pub const CORPUS_DIR: &str = "corpus";
pub const INGEST_REPORT: &str = "ingest_report.json";
pub const STATS_FILE: &str = "stats.json";
pub const CHANGES_FILE: &str = "changes.json";
pub const CLUSTERS_FILE: &str = "clusters.json";
pub const SAMPLE_FILE: &str = "sample.json";
pub const LABELS_DIR: &str = "labels";
pub const SLICES_FILE: &str = "slices.jsonl";
pub const DATASET_DIR: &str = "dataset";
pub const DATASET_META: &str = "dataset.json";
pub const MODEL_FILE: &str = "model.json";
pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const REPORT_TXT: &str = "report.txt";
pub const REPORT_JSON: &str = "report.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TIMINGS_FILE: &str = "timings.json";

const EPOCH_TIMESTAMP: &str = "1970-01-01T00:00:00Z";

type BoxError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("stage {stage} failed: {source}")]
    StageFailure {
        stage: Stage,
        #[source]
        source: BoxError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Ingest,
    Cluster,
    Stats,
    Sample,
    Detect,
    Label,
    Slice,
    Split,
    TrainBaseline,
    Evaluate,
    Report,
}

impl Stage {
    pub const ORDER: [Stage; 11] = [
        Stage::Ingest,
        Stage::Cluster,
        Stage::Stats,
        Stage::Sample,
        Stage::Detect,
        Stage::Label,
        Stage::Slice,
        Stage::Split,
        Stage::TrainBaseline,
        Stage::Evaluate,
        Stage::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Cluster => "cluster",
            Stage::Stats => "stats",
            Stage::Sample => "sample",
            Stage::Detect => "detect",
            Stage::Label => "label",
            Stage::Slice => "slice",
            Stage::Split => "split",
            Stage::TrainBaseline => "train-baseline",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSettings {
    pub lr: f64,
    pub l2: f64,
    pub epochs: usize,
    pub feature_bits: u32,
}

impl Default for BaselineSettings {
    fn default() -> Self {
        let d = TrainConfig::default();
        BaselineSettings { lr: d.lr, l2: d.l2, epochs: d.epochs, feature_bits: DEFAULT_FEATURE_BITS }
    }
}

/// Settings shared by every stage. Relative paths in a config file are
/// resolved against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus_dir: Option<PathBuf>,
    /// Directory of `<contract-id>.diff` files or a diff manifest.
    pub diffs_dir: Option<PathBuf>,
    pub ruleset_path: Option<PathBuf>,
    pub tool_cmds: Vec<String>,
    pub compiler_cmd: Option<String>,
    pub window: usize,
    pub caps: BTreeMap<SliceLabel, usize>,
    pub ratio: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub tolerance: usize,
    /// Slice only tool-confirmed findings. Defaults to on when tools are
    /// configured.
    pub require_confirmation: Option<bool>,
    pub require_assembly: bool,
    /// Keep all slices of a contract on one side of the split.
    pub strict_split: bool,
    pub keyword_map: Option<KeywordMap>,
    pub stats_scope: StatsScope,
    pub baseline: BaselineSettings,
    /// Label timestamp; falls back to SOURCE_DATE_EPOCH, then the Unix epoch.
    pub timestamp: Option<String>,
    /// Also write per-stage wall-clock times to `timings.json`.
    pub timings: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus_dir: None,
            diffs_dir: None,
            ruleset_path: None,
            tool_cmds: Vec::new(),
            compiler_cmd: None,
            window: DEFAULT_WINDOW,
            caps: default_caps(),
            ratio: DEFAULT_RATIO,
            seed: 0,
            output_dir: PathBuf::from("out"),
            tolerance: DEFAULT_TOLERANCE,
            require_confirmation: None,
            require_assembly: false,
            strict_split: false,
            keyword_map: None,
            stats_scope: StatsScope::Auto,
            baseline: BaselineSettings::default(),
            timestamp: None,
            timings: false,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let mut cfg: RunConfig =
            read_json(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.corpus_dir.as_mut().map(resolve);
        cfg.diffs_dir.as_mut().map(resolve);
        cfg.ruleset_path.as_mut().map(resolve);
        resolve(&mut cfg.output_dir);
        Ok(cfg)
    }

    /// Checks the settings and the input paths the given stage reads.
    pub fn validate(&self, stage: Stage) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return bad(format!("ratio must lie strictly between 0 and 1, got {}", self.ratio));
        }
        if self.baseline.feature_bits == 0 || self.baseline.feature_bits > 24 {
            return bad(format!("feature_bits must be in 1..=24, got {}", self.baseline.feature_bits));
        }
        if stage == Stage::Ingest {
            match &self.corpus_dir {
                None => return bad("corpus_dir is required".into()),
                Some(p) if !p.exists() => return bad(format!("corpus_dir {} does not exist", p.display())),
                _ => {}
            }
        }
        if let Some(p) = self.diffs_dir.as_ref().filter(|p| !p.exists()) {
            return bad(format!("diffs_dir {} does not exist", p.display()));
        }
        if let Some(p) = self.ruleset_path.as_ref().filter(|p| !p.exists()) {
            return bad(format!("ruleset_path {} does not exist", p.display()));
        }
        Ok(())
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }

    pub fn requires_confirmation(&self) -> bool {
        self.require_confirmation.unwrap_or(!self.tool_cmds.is_empty())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.baseline.lr,
            l2: self.baseline.l2,
            epochs: self.baseline.epochs,
            seed: self.seed,
            feature_bits: self.baseline.feature_bits,
        }
    }

    fn ruleset(&self) -> Result<Ruleset, BoxError> {
        Ok(match &self.ruleset_path {
            Some(p) => Ruleset::load(p)?,
            None => Ruleset::default_rules(),
        })
    }

    fn label_timestamp(&self) -> String {
        if let Some(t) = &self.timestamp {
            return t.clone();
        }
        std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|s| s.trim().parse::<u64>().ok())
            .map(|secs| humantime::format_rfc3339_seconds(UNIX_EPOCH + Duration::from_secs(secs)).to_string())
            .unwrap_or_else(|| EPOCH_TIMESTAMP.to_string())
    }
}

/// Named counts a stage reports.
pub type Counts = BTreeMap<String, usize>;

fn counts<const N: usize>(items: [(&str, usize); N]) -> Counts {
    items.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: Stage,
    pub counts: Counts,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub stages: Vec<StageSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestReport {
    pub total_collected: usize,
    pub unique_functional: usize,
    pub read_failures: Vec<IngestFailure>,
    pub duplicates: DedupReport,
    pub rejected: Vec<Rejection>,
    pub warnings: Vec<String>,
}

fn fail(stage: Stage) -> impl Fn(BoxError) -> PipelineError {
    move |source| PipelineError::StageFailure { stage, source }
}

fn boxed<E: std::error::Error + Send + Sync + 'static>(e: E) -> BoxError {
    Box::new(e)
}

/// Runs one stage against the output directory.
pub fn run_stage(cfg: &RunConfig, stage: Stage) -> Result<Counts, PipelineError> {
    cfg.validate(stage)?;
    let result = match stage {
        Stage::Ingest => stage_ingest(cfg),
        Stage::Cluster => stage_cluster(cfg),
        Stage::Stats => stage_stats(cfg),
        Stage::Sample => stage_sample(cfg),
        Stage::Detect => stage_detect(cfg),
        Stage::Label => stage_label(cfg),
        Stage::Slice => stage_slice(cfg),
        Stage::Split => stage_split(cfg),
        Stage::TrainBaseline => stage_train(cfg),
        Stage::Evaluate => stage_evaluate(cfg),
        Stage::Report => stage_report(cfg, &cfg.out(PREDICTIONS_FILE)),
    };
    result.map_err(fail(stage))
}

/// Every stage in order, then `summary.json`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunSummary, PipelineError> {
    for stage in Stage::ORDER {
        cfg.validate(stage)?;
    }
    let mut summary = RunSummary { seed: cfg.seed, stages: Vec::new() };
    let mut timings: BTreeMap<&str, f64> = BTreeMap::new();
    for stage in Stage::ORDER {
        let start = Instant::now();
        let counts = run_stage(cfg, stage)?;
        let secs = start.elapsed().as_secs_f64();
        log::info!("{stage}: {secs:.3}s {counts:?}");
        timings.insert(stage.as_str(), secs);
        summary.stages.push(StageSummary { stage, counts });
    }
    write_json(&cfg.out(SUMMARY_FILE), &summary).map_err(|e| fail(Stage::Report)(boxed(e)))?;
    if cfg.timings {
        write_json(&cfg.out(TIMINGS_FILE), &timings).map_err(|e| fail(Stage::Report)(boxed(e)))?;
    }
    Ok(summary)
}

fn stage_ingest(cfg: &RunConfig) -> Result<Counts, BoxError> {
    let corpus_dir = cfg.corpus_dir.as_ref().ok_or("corpus_dir is required")?;
    let ingested = ingest(&[corpus_dir])?;
    let total = ingested.contracts.len() + ingested.failures.len();
    let (unique, duplicates) = dedup(ingested.contracts);
    let hook = cfg.compiler_cmd.as_ref().map(CompilerHook::new);
    let validity = validity_filter(unique, hook.as_ref());
    write_store(&cfg.out(CORPUS_DIR), &validity.functional)?;
    let report = IngestReport {
        total_collected: total,
        unique_functional: validity.functional.len(),
        read_failures: ingested.failures,
        duplicates,
        rejected: validity.rejected,
        warnings: validity.warnings,
    };
    write_json(&cfg.out(INGEST_REPORT), &report)?;
    Ok(counts([
        ("total_collected", report.total_collected),
        ("read_failures", report.read_failures.len()),
        ("duplicates", report.duplicates.dropped.len()),
        ("rejected", report.rejected.len()),
        ("unique_functional", report.unique_functional),
    ]))
}

fn load_store(cfg: &RunConfig) -> Result<Vec<Contract>, BoxError> {
    Ok(read_store(&cfg.out(CORPUS_DIR))?)
}

fn stage_cluster(cfg: &RunConfig) -> Result<Counts, BoxError> {
    let contracts = load_store(cfg)?;
    let sources: BTreeMap<&str, &str> =
        contracts.iter().map(|c| (c.id.as_str(), c.source.as_str())).collect();
    let inputs = match &cfg.diffs_dir {
        Some(p) => load_diff_inputs(p)?,
        None => Vec::new(),
    };
    let map = cfg.keyword_map.clone().unwrap_or_default();
    let mut changes = Vec::new();
    let mut comment_only = 0;
    for input in &inputs {
        let mut change = CodeChange::from_diff(&input.change_id, &input.contract_id, &input.text)?;
        let source =
            input.contract_source.as_deref().or_else(|| sources.get(input.contract_id.as_str()).copied());
        if change.hunks.is_empty() || is_comment_only(&change, source) {
            comment_only += 1;
            continue;
        }
        change.cluster = Some(cluster(&change, &map));
        changes.push(change);
    }
    changes.sort_by(|a, b| (&a.contract_id, &a.id).cmp(&(&b.contract_id, &b.id)));
    write_json(&cfg.out(CHANGES_FILE), &changes)?;
    let index = cluster_index(&changes);
    write_json(&cfg.out(CLUSTERS_FILE), &index)?;
    let mut c =
        counts([("diffs", inputs.len()), ("dropped_comment_only", comment_only), ("changes", changes.len())]);
    c.extend(index.iter().map(|(l, ids)| (format!("cluster:{l}"), ids.len())));
    Ok(c)
}

fn load_changes(cfg: &RunConfig) -> Result<Vec<CodeChange>, BoxError> {
    Ok(read_json(&cfg.out(CHANGES_FILE))?)
}

fn stage_stats(cfg: &RunConfig) -> Result<Counts, BoxError> {
    let contracts = load_store(cfg)?;
    let report: IngestReport = read_json(&cfg.out(INGEST_REPORT))?;
    let changes = load_changes(cfg)?;
    let stats = corpus_stats(report.total_collected, &contracts, &changes, cfg.stats_scope)?;
    write_json(&cfg.out(STATS_FILE), &stats.rounded())?;
    Ok(counts([
        ("unique_functional", stats.unique_functional),
        ("contracts_with_changes", stats.contracts_with_changes),
        ("total_lines", stats.total_lines),
        ("total_vocab", stats.total_vocab),
    ]))
}

fn stage_sample(cfg: &RunConfig) -> Result<Counts, BoxError> {
    let changes = load_changes(cfg)?;
    let sample = sample_clusters(&changes, cfg.seed);
    write_json(&cfg.out(SAMPLE_FILE), &sample)?;
    Ok(counts([("changes", changes.len()), ("sampled", sample.len())]))
}

fn label_path(cfg: &RunConfig, id: &str) -> PathBuf {
    cfg.out(LABELS_DIR).join(format!("{id}.json"))
}

fn stage_detect(cfg: &RunConfig) -> Result<Counts, BoxError> {
    let contracts = load_store(cfg)?;
    let ruleset = cfg.ruleset()?;
    let meta = LabelMeta {
        tool_versions: BTreeMap::new(),
        ruleset_hash: ruleset.hash(),
        timestamp: cfg.label_timestamp(),
        seed: None,
    };
    let docs: Vec<LabelDocument> =
        contracts.par_iter().map(|c| emit_labels_json(c, &detect(c, &ruleset), meta.clone())).collect();
    let labels_dir = cfg.out(LABELS_DIR);
    if labels_dir.exists() {
        std::fs::remove_dir_all(&labels_dir)?;
    }
    for doc in &docs {
        write_json(&label_path(cfg, &doc.id), doc)?;
    }
    let findings: usize = docs.iter().map(|d| d.findings.len()).sum();
    Ok(counts([("contracts", docs.len()), ("findings", findings)]))
}

fn load_labels(cfg: &RunConfig, contracts: &[Contract]) -> Result<Vec<LabelDocument>, BoxError> {
    contracts
        .iter()
        .map(|c| read_json(&label_path(cfg, &c.id)).map_err(|e| format!("labels for {}: {e}", c.id).into()))
        .collect()
}

/// Confirms findings against the configured tools.
fn stage_label(cfg: &RunConfig) -> Result<Counts, BoxError> {
    let contracts = load_store(cfg)?;
    let docs = load_labels(cfg, &contracts)?;
    let corpus_dir = std::path::absolute(cfg.out(CORPUS_DIR))?;
    let updated: Vec<LabelDocument> = contracts
        .par_iter()
        .zip(docs)
        .map(|(c, doc)| -> Result<LabelDocument, BoxError> {
            let path = corpus_dir.join(format!("{}.sol", c.id));
            let mut tool_findings = Vec::new();
            for cmd in &cfg.tool_cmds {
                tool_findings.extend(run_tool(cmd, &path)?);
            }
            let findings = intersect_labels(doc.to_findings(Some(&c.source)), &tool_findings, cfg.tolerance);
            let mut meta = doc.meta.clone();
            meta.record_tools(&tool_findings);
            Ok(emit_labels_json(c, &findings, meta))
        })
        .collect::<Result<_, _>>()?;
    let mut confirmed = 0;
    for doc in &updated {
        confirmed += doc.findings.iter().filter(|f| f.confirmed).count();
        write_json(&label_path(cfg, &doc.id), doc)?;
    }
    let findings = updated.iter().map(|d| d.findings.len()).sum();
    Ok(counts([("tools", cfg.tool_cmds.len()), ("findings", findings), ("confirmed", confirmed)]))
}

fn stage_slice(cfg: &RunConfig) -> Result<Counts, BoxError> {
    let contracts = load_store(cfg)?;
    let docs = load_labels(cfg, &contracts)?;
    let confirmed_only = cfg.requires_confirmation();
    let slices: Vec<Slice> = contracts
        .par_iter()
        .zip(&docs)
        .flat_map_iter(|(c, doc)| {
            let all: Vec<Finding> = doc.to_findings(Some(&c.source));
            let mut out: Vec<Slice> = if confirmed_only {
                let kept: Vec<Finding> = all.iter().filter(|f| f.confirmed).cloned().collect();
                let mut v: Vec<Slice> = slice_contract(c, &kept, cfg.window)
                    .into_iter()
                    .filter(|s| s.label != SliceLabel::Clean)
                    .collect();
                v.extend(
                    slice_contract(c, &all, cfg.window).into_iter().filter(|s| s.label == SliceLabel::Clean),
                );
                v
            } else {
                slice_contract(c, &all, cfg.window)
            };
            out.sort_by(|a, b| a.line_span.cmp(&b.line_span).then(a.label.cmp(&b.label)));
            out
        })
        .collect();
    write_jsonl(&cfg.out(SLICES_FILE), &slices)?;
    let mut c = counts([("slices", slices.len())]);
    for s in &slices {
        *c.entry(format!("label:{}", s.label)).or_insert(0) += 1;
    }
    Ok(c)
}

fn stage_split(cfg: &RunConfig) -> Result<Counts, BoxError> {
    let mut slices: Vec<Slice> = read_jsonl(&cfg.out(SLICES_FILE))?;
    if cfg.require_assembly {
        slices = require_assembly(slices);
    }
    let (mut dataset, warnings) = balance(&slices, &cfg.caps, cfg.seed);
    dataset.window = cfg.window;
    let (dataset, split_warnings) = split(dataset, cfg.ratio, cfg.seed, cfg.strict_split)?;
    for w in warnings.iter().chain(&split_warnings) {
        log::warn!("{w}");
    }
    let dir = cfg.out(DATASET_DIR);
    emit_jsonl(&dataset, &dir)?;
    write_meta(&dataset, &cfg.out(DATASET_META))?;
    let sp = dataset.split.as_ref().expect("split populated");
    Ok(counts([
        ("input_slices", slices.len()),
        ("dataset", dataset.slices.len()),
        ("train", sp.train_ids.len()),
        ("eval", sp.eval_ids.len()),
        ("warnings", warnings.len() + split_warnings.len()),
    ]))
}

fn stage_train(cfg: &RunConfig) -> Result<Counts, BoxError> {
    let records: Vec<SliceRecord> = read_jsonl(&cfg.out(DATASET_DIR).join(TRAIN_FILE))?;
    let outcome = train(&records, &cfg.train_config())?;
    outcome.model.save(&cfg.out(MODEL_FILE))?;
    Ok(counts([
        ("train_examples", records.len()),
        ("classes", outcome.model.classes.len()),
        ("epochs", outcome.model.epochs),
    ]))
}

fn stage_evaluate(cfg: &RunConfig) -> Result<Counts, BoxError> {
    let model = LinearModel::load(&cfg.out(MODEL_FILE))?;
    let records: Vec<SliceRecord> = read_jsonl(&cfg.out(DATASET_DIR).join(EVAL_FILE))?;
    let preds = predict_records(&model, &records);
    write_jsonl(&cfg.out(PREDICTIONS_FILE), &preds)?;
    let correct = preds.iter().filter(|p| p.true_label == p.pred_label).count();
    Ok(counts([("predictions", preds.len()), ("correct", correct)]))
}

/// Renders `report.txt` and `report.json` from a predictions file.
pub fn stage_report(cfg: &RunConfig, predictions: &Path) -> Result<Counts, BoxError> {
    let preds = read_predictions(predictions)?;
    let report = report_from_predictions(&preds, None)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    std::fs::write(cfg.out(REPORT_TXT), render_report(&report, ReportFormat::Plain))?;
    std::fs::write(cfg.out(REPORT_JSON), render_report(&report, ReportFormat::Json))?;
    Ok(counts([("samples", report.matrix.total() as usize), ("classes", report.matrix.classes.len())]))
}

/// Reads back a split dataset written by the split stage.
pub fn load_dataset(cfg: &RunConfig) -> Result<crate::slicer::Dataset, PipelineError> {
    read_dataset(&cfg.out(DATASET_DIR), &cfg.out(DATASET_META)).map_err(|e| fail(Stage::Split)(boxed(e)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_paths_resolve_against_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"corpus_dir": "c", "output_dir": "/abs/out", "seed": 9}"#).unwrap();
        let cfg = RunConfig::from_file(&path).unwrap();
        assert_eq!(cfg.corpus_dir.unwrap(), dir.path().join("c"));
        assert_eq!(cfg.output_dir, PathBuf::from("/abs/out"));
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.window, 3);
    }

    #[test]
    fn unknown_config_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"windwo": 2}"#).unwrap();
        assert!(matches!(RunConfig::from_file(&path), Err(PipelineError::Config(_))));
    }

    #[test]
    fn confirmation_default_follows_tools() {
        let mut cfg = RunConfig::default();
        assert!(!cfg.requires_confirmation());
        cfg.tool_cmds.push("tool".into());
        assert!(cfg.requires_confirmation());
        cfg.require_confirmation = Some(false);
        assert!(!cfg.requires_confirmation());
    }

    #[test]
    fn empty_corpus_fails_at_ingest() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            corpus_dir: Some(dir.path().to_path_buf()),
            output_dir: dir.path().join("out"),
            ..RunConfig::default()
        };
        match run_pipeline(&cfg) {
            Err(PipelineError::StageFailure { stage: Stage::Ingest, source }) => {
                assert!(source.to_string().contains("no .sol files"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_ratio_is_a_config_error() {
        let cfg = RunConfig { ratio: 1.5, ..RunConfig::default() };
        assert!(matches!(cfg.validate(Stage::Split), Err(PipelineError::Config(_))));
    }

    #[test]
    fn timestamp_default_is_fixed() {
        let cfg = RunConfig { timestamp: Some("2024-01-01T00:00:00Z".into()), ..RunConfig::default() };
        assert_eq!(cfg.label_timestamp(), "2024-01-01T00:00:00Z");
    }
}
