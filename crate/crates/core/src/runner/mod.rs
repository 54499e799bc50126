//! The four inference modes and the records they leave behind.

mod modulo;
mod pool;
mod trace;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chess::{Move, Position};
use crate::engine::{EngineError, EngineEval, Evaluator};
use crate::model::{GenerationParams, ModelError, TextModel};
use crate::response::{count_tokens, extract_move, ParseOutcome, RawResponse};
use crate::verify::{eval_phrase, grade, GradingPolicy, Verdict};

pub use modulo::run_modulo;
pub use pool::{run_tasks, RunSummary};
pub use trace::render_trace;

pub const TRANSCRIPT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("cheating mode needs an evaluation hint")]
    MissingHint,
    #[error("query budget K must be at least 1")]
    ZeroBudget,
    #[error("unknown inference mode `{0}`")]
    UnknownMode(String),
    #[error("position is terminal")]
    TerminalPosition,
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("transcript sink: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceMode {
    Normal,
    Cheating,
    #[serde(alias = "pass10")]
    PassAtK,
    Modulo,
}

impl InferenceMode {
    pub const ALL: [InferenceMode; 4] = [
        InferenceMode::Normal,
        InferenceMode::Cheating,
        InferenceMode::PassAtK,
        InferenceMode::Modulo,
    ];

    pub fn default_temperature(self) -> f64 {
        match self {
            InferenceMode::Normal | InferenceMode::Cheating => 0.0,
            InferenceMode::PassAtK | InferenceMode::Modulo => 0.7,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InferenceMode::Normal => "normal",
            InferenceMode::Cheating => "cheating",
            InferenceMode::PassAtK => "pass_at_k",
            InferenceMode::Modulo => "modulo",
        }
    }
}

impl fmt::Display for InferenceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InferenceMode {
    type Err = RunError;

    fn from_str(s: &str) -> Result<InferenceMode, RunError> {
        match s.to_ascii_lowercase().as_str() {
            "normal" => Ok(InferenceMode::Normal),
            "cheating" => Ok(InferenceMode::Cheating),
            "pass10" | "pass_at_k" | "pass-at-k" | "passk" => Ok(InferenceMode::PassAtK),
            "modulo" => Ok(InferenceMode::Modulo),
            _ => Err(RunError::UnknownMode(s.to_owned())),
        }
    }
}

pub const BASE_PROMPT: &str = "You are a chess engine. Given the following board position in FEN notation, provide the single best move in UCI format.\n\nFEN: {fen}\n\nBest move:";
pub const CHEATING_PREFIX: &str = "The current evaluation of this position is: {eval} for you.\n";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub id: String,
    /// `{fen}` is replaced by the position.
    pub base: String,
    /// `{eval}` is replaced by the evaluation phrase.
    pub cheating_prefix: String,
}

impl Default for PromptTemplate {
    fn default() -> PromptTemplate {
        PromptTemplate {
            id: "standard-v1".to_owned(),
            base: BASE_PROMPT.to_owned(),
            cheating_prefix: CHEATING_PREFIX.to_owned(),
        }
    }
}

impl PromptTemplate {
    pub fn build(&self, p: &Position, mode: InferenceMode, hint: Option<EngineEval>) -> Result<String, RunError> {
        let base = self.base.replace("{fen}", &p.to_fen());
        if mode != InferenceMode::Cheating {
            return Ok(base);
        }
        let hint = hint.ok_or(RunError::MissingHint)?;
        let prefix = self.cheating_prefix.replace("{eval}", &eval_phrase(hint, false));
        Ok(prefix + &base)
    }
}

/// The prompt for `p` under `mode` with the standard template.
pub fn build_prompt(p: &Position, mode: InferenceMode, hint: Option<EngineEval>) -> Result<String, RunError> {
    PromptTemplate::default().build(p, mode, hint)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub mode: InferenceMode,
    /// Query budget for pass@k and modulo.
    pub k: u32,
    /// Overrides the mode's default temperature.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    pub max_tokens: u32,
    pub stop: Vec<String>,
    /// Offline grading against the recorded solution.
    pub grading: GradingPolicy,
    /// Critic #2 inside the modulo loop.
    pub critic: GradingPolicy,
    pub template: PromptTemplate,
    /// Consecutive parse failures that trigger a context reset.
    pub reset_after: u32,
}

impl InferenceConfig {
    pub fn new(mode: InferenceMode) -> InferenceConfig {
        let gen = GenerationParams::default();
        InferenceConfig {
            mode,
            k: 10,
            temperature: None,
            max_tokens: gen.max_tokens,
            stop: gen.stop,
            grading: GradingPolicy::default(),
            critic: GradingPolicy::for_modulo(),
            template: PromptTemplate::default(),
            reset_after: 3,
        }
    }

    pub fn with_k(mut self, k: u32) -> InferenceConfig {
        self.k = k;
        self
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
            .unwrap_or_else(|| self.mode.default_temperature())
    }

    pub fn generation(&self) -> GenerationParams {
        GenerationParams {
            temperature: self.temperature(),
            max_tokens: self.max_tokens,
            stop: self.stop.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.k == 0 {
            return Err(RunError::ZeroBudget);
        }
        self.generation().validate()?;
        Ok(())
    }

    /// Queries allowed per attempt.
    pub fn budget(&self) -> u32 {
        match self.mode {
            InferenceMode::Normal | InferenceMode::Cheating => 1,
            InferenceMode::PassAtK | InferenceMode::Modulo => self.k,
        }
    }
}

/// One position to attempt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptTask {
    pub puzzle_id: String,
    /// 1-based index of the solver move within its puzzle.
    pub index: u32,
    pub fen: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<Move>,
    #[serde(default)]
    pub themes: Vec<String>,
    /// Known evaluation of the position, used as the cheating hint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_hint: Option<EngineEval>,
}

impl AttemptTask {
    pub fn position(&self) -> Position {
        Position::from_fen(&self.fen).expect("task FEN was validated on construction")
    }

    pub fn for_position(id: impl Into<String>, p: &Position, ground_truth: Option<Move>) -> AttemptTask {
        AttemptTask {
            puzzle_id: id.into(),
            index: 1,
            fen: p.to_fen(),
            ground_truth,
            themes: Vec::new(),
            eval_hint: None,
        }
    }

    pub fn key(&self) -> (String, u32) {
        (self.puzzle_id.clone(), self.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalVerdict {
    Correct,
    Incorrect,
    /// Every query failed to yield a legal move.
    ParseFailure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub prompt: String,
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_usage: Option<u64>,
    pub tokens: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<u64>,
    #[serde(default)]
    pub retries: u32,
    pub parse: ParseOutcome,
    /// Critic verdict (modulo mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    /// Offline grade of the parsed move.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graded: Option<bool>,
    /// The context was reset to the base prompt before this query.
    #[serde(default)]
    pub reset_before: bool,
    /// The verdict's feedback was added to the context for the next query.
    #[serde(default)]
    pub feedback_appended: bool,
}

impl Turn {
    fn new(prompt: String, raw: &RawResponse, parse: ParseOutcome) -> Turn {
        Turn {
            prompt,
            response: raw.text.clone(),
            token_usage: raw.token_usage,
            tokens: count_tokens(raw),
            latency_ms: raw.latency.map(|d| d.as_millis() as u64),
            retries: raw.retries,
            parse,
            verdict: None,
            graded: None,
            reset_before: false,
            feedback_appended: false,
        }
    }

    fn failed(prompt: String, err: &ModelError) -> Turn {
        Turn {
            prompt,
            response: String::new(),
            token_usage: None,
            tokens: 0,
            latency_ms: None,
            retries: 0,
            parse: ParseOutcome::ParseFailure(format!("query failed: {err}")),
            verdict: None,
            graded: None,
            reset_before: false,
            feedback_appended: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptTranscript {
    pub schema_version: u32,
    pub puzzle_id: String,
    pub index: u32,
    pub fen: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<Move>,
    #[serde(default)]
    pub themes: Vec<String>,
    pub mode: InferenceMode,
    pub turns: Vec<Turn>,
    pub queries_used: u32,
    pub resets: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accepted_move: Option<Move>,
    #[serde(rename = "final")]
    pub final_verdict: FinalVerdict,
    pub total_tokens: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl AttemptTranscript {
    fn start(task: &AttemptTask, mode: InferenceMode) -> AttemptTranscript {
        AttemptTranscript {
            schema_version: TRANSCRIPT_SCHEMA_VERSION,
            puzzle_id: task.puzzle_id.clone(),
            index: task.index,
            fen: task.fen.clone(),
            ground_truth: task.ground_truth,
            themes: task.themes.clone(),
            mode,
            turns: Vec::new(),
            queries_used: 0,
            resets: 0,
            accepted_move: None,
            final_verdict: FinalVerdict::ParseFailure,
            total_tokens: 0,
            error: None,
        }
    }

    fn push(&mut self, turn: Turn) {
        self.queries_used += 1;
        self.total_tokens += turn.tokens;
        self.turns.push(turn);
    }

    /// Correct if some move was graded correct, a parse failure if nothing
    /// parsed, otherwise incorrect.
    fn settle(&mut self) {
        self.final_verdict = if self.turns.iter().any(|t| t.graded == Some(true)) {
            FinalVerdict::Correct
        } else if self.turns.iter().all(|t| !t.parse.is_parsed()) {
            FinalVerdict::ParseFailure
        } else {
            FinalVerdict::Incorrect
        };
    }

    pub fn is_correct(&self) -> bool {
        self.final_verdict == FinalVerdict::Correct
    }

    pub fn is_parse_failure(&self) -> bool {
        self.final_verdict == FinalVerdict::ParseFailure
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("transcripts always serialize")
    }
}

/// Grades a parsed move. Without a recorded solution the oracle's own best
/// move and the policy's improvement rule decide.
fn grade_move<E: Evaluator + ?Sized>(
    p: &Position,
    m: &Move,
    task: &AttemptTask,
    oracle: &mut E,
    policy: &GradingPolicy,
) -> Result<bool, EngineError> {
    match &task.ground_truth {
        Some(gt) => grade(p, m, gt, oracle, policy),
        None => {
            let best = oracle.best_move(p, &policy.oracle_limits)?;
            Ok(best == *m || grade(p, m, &best, oracle, policy)?)
        }
    }
}

fn check_task(task: &AttemptTask, cfg: &InferenceConfig) -> Result<Position, RunError> {
    cfg.validate()?;
    let p = task.position();
    if p.legal_moves().is_empty() {
        return Err(RunError::TerminalPosition);
    }
    Ok(p)
}

/// Queries up to `budget` times with a fixed prompt, grading each parsed
/// move and stopping at the first correct one.
fn run_independent<M, E>(
    model: &mut M,
    oracle: &mut E,
    task: &AttemptTask,
    cfg: &InferenceConfig,
    mode: InferenceMode,
    prompt: String,
) -> AttemptTranscript
where
    M: TextModel + ?Sized,
    E: Evaluator + ?Sized,
{
    let mut t = AttemptTranscript::start(task, mode);
    let p = task.position();
    let params = cfg.generation();
    let budget = if mode == InferenceMode::PassAtK { cfg.k } else { 1 };
    for _ in 0..budget {
        let raw = match model.complete(&prompt, &params) {
            Ok(r) => r,
            Err(e) => {
                t.push(Turn::failed(prompt.clone(), &e));
                t.error = Some(e.to_string());
                break;
            }
        };
        let parse = extract_move(&raw.text, &p);
        let mut turn = Turn::new(prompt.clone(), &raw, parse);
        if let Some(m) = turn.parse.parsed() {
            match grade_move(&p, &m, task, oracle, &cfg.grading) {
                Ok(g) => turn.graded = Some(g),
                Err(e) => {
                    t.push(turn);
                    t.error = Some(e.to_string());
                    break;
                }
            }
        }
        let done = turn.graded == Some(true);
        t.push(turn);
        if done {
            break;
        }
    }
    t.settle();
    t
}

fn setup_failure(task: &AttemptTask, mode: InferenceMode, err: RunError) -> AttemptTranscript {
    let mut t = AttemptTranscript::start(task, mode);
    t.error = Some(err.to_string());
    t.settle();
    t
}

/// One query with the plain prompt.
pub fn run_normal<M, E>(model: &mut M, oracle: &mut E, task: &AttemptTask, cfg: &InferenceConfig) -> AttemptTranscript
where
    M: TextModel + ?Sized,
    E: Evaluator + ?Sized,
{
    let prompt = match check_task(task, cfg) {
        Ok(p) => cfg.template.build(&p, InferenceMode::Normal, None),
        Err(e) => return setup_failure(task, InferenceMode::Normal, e),
    };
    match prompt {
        Ok(prompt) => run_independent(model, oracle, task, cfg, InferenceMode::Normal, prompt),
        Err(e) => setup_failure(task, InferenceMode::Normal, e),
    }
}

/// One query with the evaluation stated up front. The hint comes from the
/// task when known, otherwise from the oracle.
pub fn run_cheating<M, E>(model: &mut M, oracle: &mut E, task: &AttemptTask, cfg: &InferenceConfig) -> AttemptTranscript
where
    M: TextModel + ?Sized,
    E: Evaluator + ?Sized,
{
    let mode = InferenceMode::Cheating;
    let p = match check_task(task, cfg) {
        Ok(p) => p,
        Err(e) => return setup_failure(task, mode, e),
    };
    let hint = match task.eval_hint {
        Some(h) => h,
        None => match oracle.evaluate(&p, &cfg.grading.oracle_limits) {
            Ok(e) => e.eval,
            Err(e) => return setup_failure(task, mode, e.into()),
        },
    };
    match cfg.template.build(&p, mode, Some(hint)) {
        Ok(prompt) => run_independent(model, oracle, task, cfg, mode, prompt),
        Err(e) => setup_failure(task, mode, e),
    }
}

/// Up to K independent queries with the plain prompt.
pub fn run_pass_at_k<M, E>(model: &mut M, oracle: &mut E, task: &AttemptTask, cfg: &InferenceConfig) -> AttemptTranscript
where
    M: TextModel + ?Sized,
    E: Evaluator + ?Sized,
{
    let mode = InferenceMode::PassAtK;
    let prompt = match check_task(task, cfg) {
        Ok(p) => cfg.template.build(&p, InferenceMode::Normal, None),
        Err(e) => return setup_failure(task, mode, e),
    };
    match prompt {
        Ok(prompt) => run_independent(model, oracle, task, cfg, mode, prompt),
        Err(e) => setup_failure(task, mode, e),
    }
}

/// Dispatches on `cfg.mode`.
pub fn run_attempt<M, E>(model: &mut M, oracle: &mut E, task: &AttemptTask, cfg: &InferenceConfig) -> AttemptTranscript
where
    M: TextModel + ?Sized,
    E: Evaluator + ?Sized,
{
    match cfg.mode {
        InferenceMode::Normal => run_normal(model, oracle, task, cfg),
        InferenceMode::Cheating => run_cheating(model, oracle, task, cfg),
        InferenceMode::PassAtK => run_pass_at_k(model, oracle, task, cfg),
        InferenceMode::Modulo => run_modulo(model, oracle, task, cfg),
    }
}
