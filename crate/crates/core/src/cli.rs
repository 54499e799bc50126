//! The `chess-modulo` command line: dataset preparation, evaluation runs,
//! single-position solving and report generation.
//!
//! Settings resolve flags first, then environment variables, then the JSON
//! config file named by `--config` / `CHESS_MODULO_CONFIG`.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chess::Position;
use crate::datasets::{
    build_corpus, expand_puzzle, generate_selfplay_corpus, open_puzzles, read_all, sample_eval_set, theme_split,
    write_puzzles, DatasetError, Puzzle, SelfPlayPlan,
};
use crate::engine::{EngineConfig, EngineError, EngineLimits, EngineSession, Evaluation, Evaluator, MateOracle};
use crate::metrics::{read_transcripts, render_report, MetricsError, MetricsReport, ReportFormat, DEFAULT_CONFIDENCE};
use crate::model::{ModelEndpoint, ModelError, ModelFactory};
use crate::runner::{
    render_trace, run_modulo, run_tasks, AttemptTask, AttemptTranscript, InferenceConfig, InferenceMode, RunError,
    TRANSCRIPT_SCHEMA_VERSION,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ENDPOINT: i32 = 3;
pub const EXIT_ENGINE: i32 = 4;
pub const EXIT_UNSOLVED: i32 = 5;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRANSCRIPTS_FILE: &str = "transcripts.jsonl";
pub const SAMPLES_FILE: &str = "samples.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("endpoint error: {0}")]
    Endpoint(ModelError),
    #[error("engine error: {0}")]
    Engine(#[from] EngineError),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Dataset(DatasetError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("no move was accepted within {0} queries")]
    Unsolved(u32),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Endpoint(_) => EXIT_ENDPOINT,
            CliError::Engine(_) => EXIT_ENGINE,
            CliError::File { .. } | CliError::Io(_) | CliError::Dataset(_) => EXIT_IO,
            CliError::Metrics(MetricsError::Io(_) | MetricsError::Transcript { .. }) => EXIT_IO,
            CliError::Metrics(_) => EXIT_CONFIG,
            CliError::Unsolved(_) => EXIT_UNSOLVED,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> CliError {
        match e {
            ModelError::Engine(e) => CliError::Engine(e),
            ModelError::Config(m) => CliError::Config(m),
            e => CliError::Endpoint(e),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> CliError {
        match e {
            DatasetError::Engine(e) => CliError::Engine(e),
            e @ (DatasetError::NotEnough { .. } | DatasetError::Invalid(_)) => CliError::Config(e.to_string()),
            e => CliError::Dataset(e),
        }
    }
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> CliError {
        match e {
            RunError::Engine(e) => CliError::Engine(e),
            RunError::Model(e) => e.into(),
            RunError::Io(e) => CliError::Io(e),
            e => CliError::Config(e.to_string()),
        }
    }
}

fn file_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::File {
        path: path.to_owned(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "chess-modulo", version, about = "Chess puzzle evaluation with verifier feedback")]
pub struct Cli {
    /// JSON file with default settings (lowest precedence).
    #[arg(long, global = true, env = "CHESS_MODULO_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Hold out validation puzzles per theme and list the training remainder.
    Split(SplitArgs),
    /// Play the base engine against every skill level and label the positions.
    Selfplay(SelfplayArgs),
    /// Run one inference mode over sampled puzzles.
    Eval(EvalArgs),
    /// Solve one position with the verifier loop and print the exchange.
    Solve(SolveArgs),
    /// Recompute the metrics tables from saved transcripts.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Puzzle CSV, plain or zstd-compressed.
    #[arg(long)]
    pub puzzles: PathBuf,
    #[arg(long)]
    pub holdout: Option<usize>,
    #[arg(long, env = "CHESS_MODULO_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// UCI engine executable.
    #[arg(long, env = "STOCKFISH_PATH")]
    pub engine: Option<PathBuf>,
    /// `engine` for a UCI engine, `mate-search` for the built-in exhaustive mate finder.
    #[arg(long)]
    pub oracle: Option<String>,
    /// Oracle search depth.
    #[arg(long)]
    pub depth: Option<u32>,
    /// Oracle time per search in seconds.
    #[arg(long)]
    pub movetime: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SelfplayArgs {
    #[arg(long, env = "STOCKFISH_PATH")]
    pub engine: Option<PathBuf>,
    /// Skill levels, as a range `0..20` or a list `0,5,10`.
    #[arg(long)]
    pub levels: Option<String>,
    #[arg(long)]
    pub games_per_level: Option<u32>,
    #[arg(long)]
    pub depth: Option<u32>,
    /// Seconds per move.
    #[arg(long)]
    pub movetime: Option<f64>,
    #[arg(long)]
    pub random_opening_plies: Option<u32>,
    #[arg(long)]
    pub max_plies: Option<usize>,
    #[arg(long, env = "CHESS_MODULO_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "CHESS_MODULO_WORKERS")]
    pub workers: Option<usize>,
    /// Write the manifest and stop.
    #[arg(long)]
    pub plan_only: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Endpoint description: a JSON file, or inline JSON.
    #[arg(long, env = "CHESS_MODULO_ENDPOINT")]
    pub endpoint: Option<String>,
    /// Puzzle CSV to sample from, usually the validation set written by `split`.
    #[arg(long)]
    pub puzzles: Option<PathBuf>,
    #[arg(long)]
    pub mode: Option<String>,
    /// Comma-separated themes.
    #[arg(long)]
    pub themes: Option<String>,
    /// Puzzles sampled per theme.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, env = "CHESS_MODULO_SEED")]
    pub seed: Option<u64>,
    /// Query budget for pass@k and modulo.
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Model name in the report.
    #[arg(long)]
    pub label: Option<String>,
    #[command(flatten)]
    pub oracle: OracleArgs,
    #[arg(long, env = "CHESS_MODULO_WORKERS")]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub fen: String,
    #[arg(long, env = "CHESS_MODULO_ENDPOINT")]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub k: Option<u32>,
    #[command(flatten)]
    pub oracle: OracleArgs,
    /// Directory for the manifest and transcript.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directory, or a transcripts file.
    #[arg(long)]
    pub transcripts: PathBuf,
    #[arg(long, default_value = "markdown")]
    pub format: ReportFormat,
    #[arg(long)]
    pub confidence: Option<f64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Defaults read from `--config`. Every key is optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub engine: Option<PathBuf>,
    pub oracle: Option<String>,
    pub depth: Option<u32>,
    pub movetime: Option<f64>,
    pub endpoint: Option<Value>,
    pub puzzles: Option<PathBuf>,
    pub mode: Option<String>,
    pub themes: Option<Vec<String>>,
    pub n: Option<usize>,
    pub k: Option<u32>,
    pub temperature: Option<f64>,
    pub seed: Option<u64>,
    pub holdout: Option<usize>,
    pub workers: Option<usize>,
    pub levels: Option<String>,
    pub games_per_level: Option<u32>,
    pub confidence: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = fs::read_to_string(path).map_err(file_err(path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Written first by every command that has an output directory. With a
/// scripted endpoint it pins down everything needed to repeat the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Input file name to SHA-256 of its bytes.
    #[serde(default)]
    pub datasets: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_seed: Option<u64>,
    #[serde(default)]
    pub sample_seeds: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<ModelEndpoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inference: Option<InferenceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engine: Option<EngineConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<EngineLimits>,
    #[serde(default)]
    pub parameters: BTreeMap<String, Value>,
}

impl RunManifest {
    pub fn new(command: &str) -> RunManifest {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            command: command.to_owned(),
            datasets: BTreeMap::new(),
            split_seed: None,
            sample_seeds: BTreeMap::new(),
            endpoint: None,
            inference: None,
            oracle: None,
            engine: None,
            limits: None,
            parameters: BTreeMap::new(),
        }
    }

    fn param(mut self, key: &str, v: impl Serialize) -> RunManifest {
        self.parameters
            .insert(key.to_owned(), serde_json::to_value(v).expect("parameters serialize"));
        self
    }

    pub fn read(dir: &Path) -> Result<Option<RunManifest>, CliError> {
        let path = dir.join(MANIFEST_FILE);
        match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text)
                .map(Some)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(file_err(&path)(e)),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir).map_err(file_err(dir))?;
        write_json(&dir.join(MANIFEST_FILE), self)
    }
}

/// The judge used for critics and grading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OracleSpec {
    Engine { engine: EngineConfig },
    MateSearch { plies: u32 },
}

impl OracleSpec {
    pub fn open(&self) -> Result<Oracle, EngineError> {
        Ok(match self {
            OracleSpec::Engine { engine } => Oracle::Engine(EngineSession::open(engine)?),
            OracleSpec::MateSearch { plies } => Oracle::MateSearch(MateOracle::new(*plies)),
        })
    }
}

pub enum Oracle {
    Engine(EngineSession),
    MateSearch(MateOracle),
}

impl Evaluator for Oracle {
    fn evaluate(&mut self, p: &Position, limits: &EngineLimits) -> Result<Evaluation, EngineError> {
        match self {
            Oracle::Engine(e) => e.evaluate(p, limits),
            Oracle::MateSearch(m) => m.evaluate(p, limits),
        }
    }

    fn name(&self) -> String {
        match self {
            Oracle::Engine(e) => e.name(),
            Oracle::MateSearch(m) => m.name(),
        }
    }
}

fn resolve_oracle(a: &OracleArgs, file: &FileConfig) -> Result<(OracleSpec, EngineLimits), CliError> {
    let kind = a.oracle.clone().or_else(|| file.oracle.clone()).unwrap_or_else(|| "engine".into());
    let spec = match kind.as_str() {
        "engine" => OracleSpec::Engine {
            engine: EngineConfig::new(resolve_engine(a.engine.clone(), file)?),
        },
        "mate-search" => OracleSpec::MateSearch {
            plies: MateOracle::default().max_plies,
        },
        other => return Err(CliError::Config(format!("unknown oracle `{other}`"))),
    };
    let limits = resolve_limits(a.depth.or(file.depth), a.movetime.or(file.movetime), EngineLimits::ground_truth())?;
    Ok((spec, limits))
}

fn resolve_engine(flag: Option<PathBuf>, file: &FileConfig) -> Result<PathBuf, CliError> {
    flag.or_else(|| file.engine.clone())
        .or_else(crate::engine::locate_engine)
        .ok_or_else(|| CliError::Config("no engine: pass --engine or set STOCKFISH_PATH".into()))
}

fn resolve_limits(depth: Option<u32>, movetime: Option<f64>, fallback: EngineLimits) -> Result<EngineLimits, CliError> {
    if depth.is_none() && movetime.is_none() {
        return Ok(fallback);
    }
    EngineLimits::new(depth, movetime).map_err(|e| CliError::Config(e.to_string()))
}

fn resolve_endpoint(flag: Option<&str>, file: &FileConfig) -> Result<ModelEndpoint, CliError> {
    let value: Value = match (flag, &file.endpoint) {
        (Some(s), _) if s.trim_start().starts_with('{') => {
            serde_json::from_str(s).map_err(|e| CliError::Config(format!("--endpoint: {e}")))?
        }
        (Some(path), _) => {
            let path = Path::new(path);
            let text = fs::read_to_string(path).map_err(file_err(path))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        (None, Some(v)) => v.clone(),
        (None, None) => return Err(CliError::Config("no endpoint: pass --endpoint".into())),
    };
    serde_json::from_value(value).map_err(|e| CliError::Config(format!("endpoint: {e}")))
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// `0..20` (inclusive) or `0,5,10`.
pub fn parse_levels(s: &str) -> Result<Vec<u8>, CliError> {
    let bad = |why: String| CliError::Config(format!("levels `{s}`: {why}"));
    let num = |t: &str| t.trim().parse::<u8>().map_err(|e| bad(e.to_string()));
    let levels: Vec<u8> = if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
        if a > b {
            return Err(bad("empty range".into()));
        }
        (a..=b).collect()
    } else {
        s.split(',').map(num).collect::<Result<_, _>>()?
    };
    if let Some(l) = levels.iter().find(|&&l| l > 20) {
        return Err(bad(format!("level {l} is above 20")));
    }
    Ok(levels)
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let mut f = File::open(path).map_err(file_err(path))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(file_err(path))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

fn dataset_name(path: &Path) -> String {
    path.file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(v).expect("values serialize");
    text.push('\n');
    fs::write(path, text).map_err(file_err(path))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path).map_err(file_err(path))?))
}

/// Parses arguments and runs, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Split(a) => cmd_split(&a, &file),
        Command::Selfplay(a) => cmd_selfplay(&a, &file),
        Command::Eval(a) => cmd_eval(&a, &file).map(|_| ()),
        Command::Solve(a) => {
            let t = cmd_solve(&a, &file)?;
            print!("{}", render_trace(&t));
            match t.accepted_move {
                Some(m) => {
                    println!("{m}");
                    Ok(())
                }
                None => Err(CliError::Unsolved(t.queries_used)),
            }
        }
        Command::Report(a) => {
            let text = cmd_report(&a, &file)?;
            match &a.out {
                Some(p) => fs::write(p, text).map_err(file_err(p)),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
    }
}

/// Writes `manifest.json`, `split.json` (ids and counts),
/// `validation.csv` and `train_ids.txt` under `--out`.
pub fn cmd_split(a: &SplitArgs, file: &FileConfig) -> Result<(), CliError> {
    let holdout = a.holdout.or(file.holdout).unwrap_or(crate::datasets::DEFAULT_HOLDOUT);
    let seed = a.seed.or(file.seed).unwrap_or(0);
    let mut manifest = RunManifest::new("split").param("holdout", holdout);
    manifest.split_seed = Some(seed);
    manifest
        .datasets
        .insert(dataset_name(&a.puzzles), sha256_file(&a.puzzles)?);
    manifest.write(&a.out)?;

    let split = theme_split(|| open_puzzles(&a.puzzles), holdout, seed)?;
    write_json(&a.out.join("split.json"), &split.manifest)?;
    let mut w = create(&a.out.join("validation.csv"))?;
    write_puzzles(&mut w, &split.validation)?;
    w.flush()?;
    let mut w = create(&a.out.join("train_ids.txt"))?;
    for id in &split.manifest.train_ids {
        writeln!(w, "{id}")?;
    }
    w.flush()?;
    log::info!(
        "split: {} validation puzzles over {} themes, {} train",
        split.validation.len(),
        split.manifest.theme_counts.len(),
        split.manifest.train_ids.len()
    );
    Ok(())
}

/// Writes `manifest.json`, then `games.pgn`, `corpus.txt` and `stats.json`.
pub fn cmd_selfplay(a: &SelfplayArgs, file: &FileConfig) -> Result<(), CliError> {
    let engine = EngineConfig::new(resolve_engine(a.engine.clone(), file)?);
    let levels = parse_levels(a.levels.as_deref().or(file.levels.as_deref()).unwrap_or("0..20"))?;
    let limits = resolve_limits(
        a.depth.or(file.depth).or(Some(15)),
        a.movetime.or(file.movetime).or(Some(10.0)),
        EngineLimits::depth(15),
    )?;
    let mut plan = SelfPlayPlan::new(engine, levels, a.games_per_level.or(file.games_per_level).unwrap_or(50), limits);
    plan.seed = a.seed.or(file.seed).unwrap_or(0);
    plan.workers = a.workers.or(file.workers).unwrap_or_else(default_workers);
    plan.random_opening_plies = a.random_opening_plies.unwrap_or(0);
    if let Some(m) = a.max_plies {
        plan.max_plies = m;
    }
    plan.validate()?;

    let mut manifest = RunManifest::new("selfplay")
        .param("plan", &plan)
        .param("planned_games", plan.total_games());
    manifest.engine = Some(plan.base.clone());
    manifest.limits = Some(plan.limits);
    manifest.write(&a.out)?;
    if a.plan_only {
        return Ok(());
    }

    let out = generate_selfplay_corpus(&plan, |cfg: &EngineConfig| EngineSession::open(cfg))?;
    if !out.games.is_empty() && out.stats.aborted == out.games.len() {
        let reason = match &out.games[0].outcome {
            crate::engine::GameOutcome::Aborted { reason } => reason.clone(),
            _ => unreachable!("every game was aborted"),
        };
        return Err(EngineError::Protocol(format!("every game aborted; first: {reason}")).into());
    }
    let mut w = create(&a.out.join("games.pgn"))?;
    for g in &out.games {
        write!(w, "{}", g.to_pgn())?;
        writeln!(w)?;
    }
    w.flush()?;
    let corpus = build_corpus(out.records, create(&a.out.join("corpus.txt"))?)?;
    write_json(
        &a.out.join("stats.json"),
        &serde_json::json!({ "selfplay": out.stats, "corpus": corpus }),
    )?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub theme: String,
    pub puzzle_id: String,
    pub fen: String,
    pub moves: Vec<String>,
    pub rating: i32,
}

/// What `cmd_eval` produced.
#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub tasks: usize,
    pub resumed: usize,
    pub transcripts: Vec<AttemptTranscript>,
    pub report: MetricsReport,
}

fn model_label(endpoint: &ModelEndpoint) -> String {
    match endpoint {
        ModelEndpoint::Http(h) => h.model.clone(),
        ModelEndpoint::Scripted { .. } => "scripted".to_owned(),
        ModelEndpoint::EngineAsModel { engine, .. } => engine.label(),
    }
}

/// Samples puzzles per theme, runs every solver position, and writes
/// `manifest.json`, `samples.json`, `transcripts.jsonl` and
/// `report.{md,csv,json}` under `--out`. Positions already present in
/// `transcripts.jsonl` from an identical earlier run are skipped.
pub fn cmd_eval(a: &EvalArgs, file: &FileConfig) -> Result<EvalOutcome, CliError> {
    let endpoint = resolve_endpoint(a.endpoint.as_deref(), file)?;
    let mode: InferenceMode = a
        .mode
        .as_deref()
        .or(file.mode.as_deref())
        .unwrap_or("normal")
        .parse()
        .map_err(|e: RunError| CliError::Config(e.to_string()))?;
    let themes: Vec<String> = match (&a.themes, &file.themes) {
        (Some(t), _) => t.split(',').map(|s| s.trim().to_owned()).filter(|s| !s.is_empty()).collect(),
        (None, Some(t)) => t.clone(),
        (None, None) => vec!["mateIn1".into(), "mateIn2".into(), "mateIn3".into()],
    };
    if themes.is_empty() {
        return Err(CliError::Config("no themes given".into()));
    }
    let n = a.n.or(file.n).unwrap_or(100);
    if n == 0 {
        return Err(CliError::Config("--n must be at least 1".into()));
    }
    let seed = a.seed.or(file.seed).unwrap_or(0);
    let puzzles_path = a
        .puzzles
        .clone()
        .or_else(|| file.puzzles.clone())
        .ok_or_else(|| CliError::Config("no puzzles: pass --puzzles".into()))?;
    let mut cfg = InferenceConfig::new(mode);
    if let Some(k) = a.k.or(file.k) {
        cfg.k = k;
    }
    cfg.temperature = a.temperature.or(file.temperature);
    let (oracle, limits) = resolve_oracle(&a.oracle, file)?;
    cfg.grading.oracle_limits = limits;
    cfg.critic.oracle_limits = limits;
    cfg.validate()?;
    let label = a.label.clone().unwrap_or_else(|| model_label(&endpoint));
    let mut workers = a.workers.or(file.workers).unwrap_or_else(default_workers).max(1);
    if !endpoint.supports_parallel() && workers > 1 {
        log::info!("scripted endpoint: running on one worker");
        workers = 1;
    }

    let mut manifest = RunManifest::new("eval")
        .param("themes", &themes)
        .param("n", n)
        .param("label", &label);
    manifest
        .datasets
        .insert(dataset_name(&puzzles_path), sha256_file(&puzzles_path)?);
    manifest.sample_seeds = themes.iter().map(|t| (t.clone(), seed)).collect();
    manifest.endpoint = Some(endpoint.clone());
    manifest.inference = Some(cfg.clone());
    manifest.oracle = Some(oracle.clone());
    manifest.limits = Some(limits);

    let transcripts_path = a.out.join(TRANSCRIPTS_FILE);
    let done = load_existing(&transcripts_path)?;
    if !done.is_empty() {
        match RunManifest::read(&a.out)? {
            Some(prev) if prev == manifest => {}
            _ => {
                return Err(CliError::Config(format!(
                    "{} holds transcripts from a different run; use a fresh --out",
                    a.out.display()
                )))
            }
        }
    }
    manifest.write(&a.out)?;

    let (puzzles, load) = read_all(&puzzles_path)?;
    if load.skipped > 0 {
        log::warn!("{}: skipped {} malformed rows", puzzles_path.display(), load.skipped);
    }
    let (samples, tasks) = sample_tasks(&puzzles, &themes, n, seed)?;
    write_json(&a.out.join(SAMPLES_FILE), &samples)?;

    let seen: HashSet<(String, u32)> = done.iter().map(|t| (t.puzzle_id.clone(), t.index)).collect();
    let pending: Vec<AttemptTask> = tasks.iter().filter(|t| !seen.contains(&t.key())).cloned().collect();
    log::info!(
        "{}: {} positions, {} already done, {} to run on {workers} workers",
        label,
        tasks.len(),
        tasks.len() - pending.len(),
        pending.len()
    );

    let factory = ModelFactory::new(endpoint)?;
    let mut sink = BufWriter::new(
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(&transcripts_path)
            .map_err(file_err(&transcripts_path))?,
    );
    let summary = run_tasks(
        &pending,
        &cfg,
        workers,
        || factory.instance(),
        || oracle.open(),
        |t| {
            writeln!(sink, "{}", t.to_json_line())?;
            sink.flush()
        },
    )?;
    drop(sink);
    if summary.attempted > 0 && summary.errors == summary.attempted {
        return Err(CliError::Endpoint(ModelError::Transport {
            attempts: summary.attempted as u32,
            message: "every attempt failed; see transcripts for the errors".into(),
        }));
    }

    let transcripts = load_existing(&transcripts_path)?;
    let report = build_report(&label, &transcripts, &themes, DEFAULT_CONFIDENCE)?;
    for (ext, format) in [("md", ReportFormat::Markdown), ("csv", ReportFormat::Csv), ("json", ReportFormat::Json)] {
        let path = a.out.join(format!("report.{ext}"));
        fs::write(&path, render_report(&report, format)).map_err(file_err(&path))?;
    }
    Ok(EvalOutcome {
        tasks: tasks.len(),
        resumed: done.len(),
        transcripts,
        report,
    })
}

/// Per theme, `n` sampled puzzles expanded into their solver positions. A
/// puzzle drawn under two themes is attempted once.
pub fn sample_tasks(
    puzzles: &[Puzzle],
    themes: &[String],
    n: usize,
    seed: u64,
) -> Result<(Vec<SampleEntry>, Vec<AttemptTask>), CliError> {
    let mut samples = Vec::new();
    let mut tasks = Vec::new();
    let mut taken = HashSet::new();
    for theme in themes {
        for z in sample_eval_set(puzzles, theme, n, seed)? {
            samples.push(SampleEntry {
                theme: theme.clone(),
                puzzle_id: z.id.clone(),
                fen: z.fen.clone(),
                moves: z.moves.iter().map(|m| m.to_string()).collect(),
                rating: z.rating,
            });
            if taken.insert(z.id.clone()) {
                tasks.extend(expand_puzzle(&z)?.iter().map(|t| t.to_attempt()));
            }
        }
    }
    Ok((samples, tasks))
}

pub fn build_report(
    label: &str,
    ts: &[AttemptTranscript],
    themes: &[String],
    confidence: f64,
) -> Result<MetricsReport, CliError> {
    let mut r = MetricsReport::new(confidence)?;
    r.add_model(label, ts)?;
    r.add_themes(label, ts, themes, false)?;
    Ok(r)
}

/// Reads the transcripts of an earlier run. A torn final line left by an
/// interrupted run is cut off so the file can be appended to.
fn load_existing(path: &Path) -> Result<Vec<AttemptTranscript>, CliError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(file_err(path)(e)),
    };
    let complete = match text.rfind('\n') {
        Some(i) => i + 1,
        None => 0,
    };
    if complete < text.len() {
        log::warn!("{}: dropping an incomplete final line", path.display());
        let f = OpenOptions::new().write(true).open(path).map_err(file_err(path))?;
        f.set_len(complete as u64).map_err(file_err(path))?;
    }
    let ts = read_transcripts(text[..complete].as_bytes())?;
    check_schema(&ts)?;
    Ok(ts)
}

fn check_schema(ts: &[AttemptTranscript]) -> Result<(), CliError> {
    match ts.iter().find(|t| t.schema_version != TRANSCRIPT_SCHEMA_VERSION) {
        Some(t) => Err(CliError::Config(format!(
            "transcript schema version {} is not supported (expected {TRANSCRIPT_SCHEMA_VERSION})",
            t.schema_version
        ))),
        None => Ok(()),
    }
}

/// Runs one verifier-loop attempt on `--fen`. The move is judged by the
/// oracle, since there is no recorded solution.
pub fn cmd_solve(a: &SolveArgs, file: &FileConfig) -> Result<AttemptTranscript, CliError> {
    let p = Position::from_fen(&a.fen).map_err(|e| CliError::Config(format!("--fen: {e}")))?;
    if p.legal_moves().is_empty() {
        return Err(CliError::Config("--fen: the position is terminal".into()));
    }
    let endpoint = resolve_endpoint(a.endpoint.as_deref(), file)?;
    let mut cfg = InferenceConfig::new(InferenceMode::Modulo);
    if let Some(k) = a.k.or(file.k) {
        cfg.k = k;
    }
    let (oracle, limits) = resolve_oracle(&a.oracle, file)?;
    cfg.grading.oracle_limits = limits;
    cfg.critic.oracle_limits = limits;
    cfg.validate()?;
    if let Some(out) = &a.out {
        let mut manifest = RunManifest::new("solve").param("fen", &a.fen);
        manifest.endpoint = Some(endpoint.clone());
        manifest.inference = Some(cfg.clone());
        manifest.oracle = Some(oracle.clone());
        manifest.limits = Some(limits);
        manifest.write(out)?;
    }
    let mut model = ModelFactory::new(endpoint)?.instance()?;
    let mut judge = oracle.open()?;
    let task = AttemptTask::for_position("solve", &p, None);
    let t = run_modulo(&mut model, &mut judge, &task, &cfg);
    if let Some(out) = &a.out {
        let path = out.join(TRANSCRIPTS_FILE);
        fs::write(&path, t.to_json_line() + "\n").map_err(file_err(&path))?;
    }
    if let Some(e) = &t.error {
        log::warn!("attempt ended early: {e}");
    }
    Ok(t)
}

/// Rebuilds the report from a run directory. Labels and themes come from
/// the run's manifest when present, so the output matches the in-run report.
pub fn cmd_report(a: &ReportArgs, file: &FileConfig) -> Result<String, CliError> {
    let (path, manifest) = if a.transcripts.is_dir() {
        (a.transcripts.join(TRANSCRIPTS_FILE), RunManifest::read(&a.transcripts)?)
    } else {
        (a.transcripts.clone(), None)
    };
    let f = File::open(&path).map_err(file_err(&path))?;
    let ts = read_transcripts(BufReader::new(f))?;
    if ts.is_empty() {
        return Err(CliError::Config(format!("{}: no transcripts", path.display())));
    }
    check_schema(&ts)?;
    let param = |k: &str| manifest.as_ref().and_then(|m| m.parameters.get(k).cloned());
    let label = param("label")
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_else(|| "model".to_owned());
    let themes: Vec<String> = match param("themes") {
        Some(v) => serde_json::from_value(v).map_err(|e| CliError::Config(format!("manifest themes: {e}")))?,
        None => {
            let mut all: Vec<String> = ts.iter().flat_map(|t| t.themes.iter().cloned()).collect();
            all.sort();
            all.dedup();
            all.retain(|t| t.starts_with("mateIn"));
            all
        }
    };
    let confidence = a.confidence.or(file.confidence).unwrap_or(DEFAULT_CONFIDENCE);
    let report = build_report(&label, &ts, &themes, confidence)?;
    Ok(render_report(&report, a.format))
}

/// Lines of a file, for callers comparing outputs.
pub fn read_lines(path: &Path) -> Result<Vec<String>, CliError> {
    let f = File::open(path).map_err(file_err(path))?;
    BufReader::new(f).lines().collect::<Result<_, _>>().map_err(file_err(path))
}
