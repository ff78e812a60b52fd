use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use soley_core::pipeline::{
    run_pipeline, run_stage, stage_report, PipelineError, RunConfig, Stage, CORPUS_DIR, PREDICTIONS_FILE,
};
use soley_core::slicer::SliceLabel;

const USAGE_ERROR: u8 = 2;
const DATA_ERROR: u8 = 1;

/// Curate Solidity corpora, detect vulnerabilities, build sliced datasets
/// and train and evaluate a baseline classifier.
#[derive(Debug, Parser)]
#[command(name = "soley", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Read, deduplicate and validate contracts into the corpus store.
    Ingest(Common),
    /// Corpus statistics (stats.json).
    Stats(Common),
    /// Run regex rules and assembly heuristics; write labels/.
    Detect(Common),
    /// Confirm findings against external tools.
    Label(Common),
    /// Parse diffs, drop comment-only changes and cluster the rest.
    Cluster(Common),
    /// Draw the per-cluster sample (sample.json).
    Sample(Common),
    /// Cut labeled contracts into slices (slices.jsonl).
    Slice(Common),
    /// Balance and split slices into dataset/{train,eval}.jsonl.
    Split(Common),
    /// Train the hashed n-gram logistic regression baseline.
    TrainBaseline(Common),
    /// Predict the eval split with the baseline model.
    Evaluate(Common),
    /// Render report.{txt,json} from a predictions file.
    Report {
        #[command(flatten)]
        common: Common,
        /// Predictions JSONL (defaults to <out>/predictions.jsonl).
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Every stage in order.
    Pipeline(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Directory of <contract-id>.diff files, or a diff manifest.
    #[arg(long)]
    diffs: Option<PathBuf>,
    /// Ruleset JSON (defaults to the bundled rules).
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    ratio: Option<f64>,
    /// Per-class caps, e.g. RE=1000,IE=592,CLEAN=500. Replaces the defaults.
    #[arg(long, value_parser = parse_cap, value_delimiter = ',')]
    caps: Option<Vec<(SliceLabel, usize)>>,
    /// External analysis command; repeatable.
    #[arg(long = "tool", env = "SOLEY_TOOL_CMDS", value_delimiter = ';')]
    tools: Option<Vec<String>>,
    /// Compiler command used as the validity check.
    #[arg(long, env = "SOLEY_COMPILER_CMD")]
    compiler: Option<String>,
    #[arg(long)]
    tolerance: Option<usize>,
    #[arg(long)]
    require_confirmation: Option<bool>,
    /// Keep only slices containing inline assembly.
    #[arg(long)]
    require_assembly: bool,
    /// Keep each contract's slices on one side of the split.
    #[arg(long)]
    strict_split: bool,
    #[arg(long)]
    timestamp: Option<String>,
    /// Write per-stage times to timings.json.
    #[arg(long)]
    timings: bool,
}

fn parse_cap(s: &str) -> Result<(SliceLabel, usize), String> {
    let (label, n) = s.split_once('=').ok_or_else(|| format!("expected LABEL=N, got `{s}`"))?;
    let label = label.trim().parse::<SliceLabel>().map_err(|e| e.to_string())?;
    let n = n.trim().parse().map_err(|_| format!("bad cap `{n}`"))?;
    Ok((label, n))
}

impl Common {
    fn config(self) -> Result<RunConfig, PipelineError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.corpus {
            cfg.corpus_dir = Some(v);
        }
        if let Some(v) = self.diffs {
            cfg.diffs_dir = Some(v);
        }
        if let Some(v) = self.rules {
            cfg.ruleset_path = Some(v);
        }
        if let Some(v) = self.out {
            cfg.output_dir = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.window {
            cfg.window = v;
        }
        if let Some(v) = self.ratio {
            cfg.ratio = v;
        }
        if let Some(v) = self.caps {
            cfg.caps = v.into_iter().collect::<BTreeMap<_, _>>();
        }
        if let Some(v) = self.tools {
            cfg.tool_cmds = v.into_iter().filter(|t| !t.trim().is_empty()).collect();
        }
        if let Some(v) = self.compiler {
            cfg.compiler_cmd = Some(v);
        }
        if let Some(v) = self.tolerance {
            cfg.tolerance = v;
        }
        if let Some(v) = self.require_confirmation {
            cfg.require_confirmation = Some(v);
        }
        cfg.require_assembly |= self.require_assembly;
        cfg.strict_split |= self.strict_split;
        if let Some(v) = self.timestamp {
            cfg.timestamp = Some(v);
        }
        cfg.timings |= self.timings;
        Ok(cfg)
    }
}

fn stage_of(command: &Command) -> Option<Stage> {
    Some(match command {
        Command::Ingest(_) => Stage::Ingest,
        Command::Stats(_) => Stage::Stats,
        Command::Detect(_) => Stage::Detect,
        Command::Label(_) => Stage::Label,
        Command::Cluster(_) => Stage::Cluster,
        Command::Sample(_) => Stage::Sample,
        Command::Slice(_) => Stage::Slice,
        Command::Split(_) => Stage::Split,
        Command::TrainBaseline(_) => Stage::TrainBaseline,
        Command::Evaluate(_) => Stage::Evaluate,
        Command::Report { .. } | Command::Pipeline(_) => return None,
    })
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn run(command: Command) -> Result<(), PipelineError> {
    let stage = stage_of(&command);
    match command {
        Command::Pipeline(common) => {
            let summary = run_pipeline(&common.config()?)?;
            print_json(&summary);
        }
        Command::Report { common, predictions } => {
            let cfg = common.config()?;
            let path = predictions.unwrap_or_else(|| cfg.out(PREDICTIONS_FILE));
            let counts = stage_report(&cfg, &path)
                .map_err(|source| PipelineError::StageFailure { stage: Stage::Report, source })?;
            print_json(&counts);
        }
        Command::Ingest(common)
        | Command::Stats(common)
        | Command::Detect(common)
        | Command::Label(common)
        | Command::Cluster(common)
        | Command::Sample(common)
        | Command::Slice(common)
        | Command::Split(common)
        | Command::TrainBaseline(common)
        | Command::Evaluate(common) => {
            let stage = stage.expect("stage subcommand");
            let cfg = common.config()?;
            // A corpus given to a later stage is ingested first when no store exists.
            let store_missing = !cfg.out(CORPUS_DIR).join("index.json").exists();
            if stage != Stage::Ingest && store_missing && cfg.corpus_dir.is_some() {
                log::info!("no corpus store in {}; ingesting first", cfg.output_dir.display());
                run_stage(&cfg, Stage::Ingest)?;
            }
            print_json(&run_stage(&cfg, stage)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(USAGE_ERROR) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ PipelineError::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(USAGE_ERROR)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(DATA_ERROR)
        }
    }
}
