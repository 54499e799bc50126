//! Gateway to an external UCI engine.
//!
//! Scores are kept exactly as UCI reports them: relative to the side to move
//! in the position that was searched. Callers that need the previous mover's
//! view use [`EngineEval::flipped`].

mod cache;
mod mate;
mod selfplay;
mod session;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::chess::{Move, Position};

pub use cache::EvalCache;
pub use mate::MateOracle;
pub use selfplay::{
    play_game, play_game_from, play_selfplay_game, Game, GameOutcome, PlayedMove, DEFAULT_MAX_PLIES,
};
pub use session::{parse_info_score, EngineSession};

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("failed to spawn engine `{path}`: {source}")]
    Spawn {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("engine i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("engine did not complete the UCI handshake within {0:?}")]
    HandshakeTimeout(Duration),
    #[error("engine did not answer within {0:?}")]
    Timeout(Duration),
    #[error("engine does not support option `{0}`")]
    UnknownOption(String),
    #[error("engine protocol violation: {0}")]
    Protocol(String),
    #[error("engine process exited")]
    Exited,
    #[error("position is terminal; there is no move to play")]
    TerminalPosition,
    #[error("invalid engine configuration: {0}")]
    Config(String),
}

/// Search budget for one request. At least one bound is always set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EngineLimits {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub movetime_ms: Option<u64>,
}

impl EngineLimits {
    pub fn new(depth: Option<u32>, movetime_secs: Option<f64>) -> Result<EngineLimits, EngineError> {
        let movetime_ms = match movetime_secs {
            None => None,
            Some(s) if s.is_finite() && s > 0.0 => {
                let ms = (s * 1000.0).round();
                if ms < 1.0 {
                    return Err(EngineError::Config(format!(
                        "movetime {s}s is below the 1 ms protocol resolution"
                    )));
                }
                Some(ms as u64)
            }
            Some(s) => {
                return Err(EngineError::Config(format!("movetime must be positive, got {s}")))
            }
        };
        let limits = EngineLimits { depth, movetime_ms };
        limits.validate()?;
        Ok(limits)
    }

    pub fn depth(depth: u32) -> EngineLimits {
        EngineLimits {
            depth: Some(depth),
            movetime_ms: None,
        }
    }

    /// Ground-truth limits used when nothing else is configured.
    pub fn ground_truth() -> EngineLimits {
        EngineLimits::depth(20)
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        match (self.depth, self.movetime_ms) {
            (None, None) => Err(EngineError::Config(
                "at least one of depth or movetime must be set".into(),
            )),
            (Some(0), _) => Err(EngineError::Config("depth must be at least 1".into())),
            (_, Some(0)) => Err(EngineError::Config("movetime must be positive".into())),
            _ => Ok(()),
        }
    }

    pub fn movetime(&self) -> Option<Duration> {
        self.movetime_ms.map(Duration::from_millis)
    }

    /// The `go` command for these limits.
    pub fn go_command(&self) -> String {
        let mut cmd = String::from("go");
        if let Some(d) = self.depth {
            cmd.push_str(&format!(" depth {d}"));
        }
        if let Some(ms) = self.movetime_ms {
            cmd.push_str(&format!(" movetime {ms}"));
        }
        cmd
    }
}

impl Default for EngineLimits {
    fn default() -> EngineLimits {
        EngineLimits::ground_truth()
    }
}

fn default_engine_path() -> PathBuf {
    PathBuf::from("stockfish")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    #[serde(default = "default_engine_path")]
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub args: Vec<String>,
    /// `Skill Level` UCI option, 0..=20.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skill_level: Option<u8>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub options: BTreeMap<String, String>,
}

impl EngineConfig {
    pub fn new(path: impl Into<PathBuf>) -> EngineConfig {
        EngineConfig {
            path: path.into(),
            args: Vec::new(),
            skill_level: None,
            options: BTreeMap::new(),
        }
    }

    pub fn with_skill_level(mut self, level: u8) -> EngineConfig {
        self.skill_level = Some(level);
        self
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        match self.skill_level {
            Some(l) if l > 20 => Err(EngineError::Config(format!(
                "skill level must be within 0..=20, got {l}"
            ))),
            _ => Ok(()),
        }
    }

    /// Short human label, e.g. `stockfish` or `stockfish (level 3)`.
    pub fn label(&self) -> String {
        let name = self
            .path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.path.display().to_string());
        match self.skill_level {
            Some(l) => format!("{name} (level {l})"),
            None => format!("{name} (base)"),
        }
    }

    /// Every `setoption` the session sends after the handshake, in order.
    pub fn setoption_commands(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        if let Some(l) = self.skill_level {
            out.push(("Skill Level".to_owned(), l.to_string()));
        }
        for (k, v) in &self.options {
            out.push((k.clone(), v.clone()));
        }
        out
    }
}

/// Engine verdict on a position, from the side to move's point of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineEval {
    Centipawns(i32),
    /// `k > 0`: the side to move mates in `k` of its own moves.
    /// `k < 0`: the side to move is mated in `-k`.
    MateIn(i32),
    /// The game is over by checkmate.
    TerminalMate,
    TerminalStalemate,
}

impl EngineEval {
    /// The same verdict seen by the other side. Terminal verdicts carry no side.
    pub fn flipped(self) -> EngineEval {
        match self {
            EngineEval::Centipawns(cp) => EngineEval::Centipawns(-cp),
            EngineEval::MateIn(k) => EngineEval::MateIn(-k),
            t => t,
        }
    }

    pub fn mate_distance(self) -> Option<i32> {
        match self {
            EngineEval::MateIn(k) => Some(k),
            _ => None,
        }
    }

    /// Sort key in the mover's favour: faster own mates rank highest,
    /// faster opposing mates lowest. `TerminalMate` here means the mover has
    /// just delivered mate, which is how it appears after a move.
    pub fn rank(self) -> i64 {
        const MATE: i64 = 1_000_000;
        match self {
            EngineEval::TerminalMate => MATE,
            EngineEval::MateIn(k) if k > 0 => MATE - k as i64,
            EngineEval::MateIn(k) => -MATE - k as i64,
            EngineEval::Centipawns(cp) => cp as i64,
            EngineEval::TerminalStalemate => 0,
        }
    }
}

impl fmt::Display for EngineEval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EngineEval::Centipawns(cp) => write!(f, "{cp} cp"),
            EngineEval::MateIn(k) => write!(f, "mate {k}"),
            EngineEval::TerminalMate => f.write_str("checkmate"),
            EngineEval::TerminalStalemate => f.write_str("stalemate"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evaluation {
    pub eval: EngineEval,
    pub best: Option<Move>,
}

/// Anything that can judge a position: a live engine session, or a
/// deterministic stand-in in tests.
pub trait Evaluator {
    fn evaluate(&mut self, p: &Position, limits: &EngineLimits) -> Result<Evaluation, EngineError>;

    fn best_move(&mut self, p: &Position, limits: &EngineLimits) -> Result<Move, EngineError> {
        self.evaluate(p, limits)?
            .best
            .ok_or(EngineError::TerminalPosition)
    }

    fn name(&self) -> String {
        "evaluator".to_owned()
    }
}

impl<E: Evaluator + ?Sized> Evaluator for &mut E {
    fn evaluate(&mut self, p: &Position, limits: &EngineLimits) -> Result<Evaluation, EngineError> {
        (**self).evaluate(p, limits)
    }

    fn name(&self) -> String {
        (**self).name()
    }
}

impl<E: Evaluator + ?Sized> Evaluator for Box<E> {
    fn evaluate(&mut self, p: &Position, limits: &EngineLimits) -> Result<Evaluation, EngineError> {
        (**self).evaluate(p, limits)
    }

    fn name(&self) -> String {
        (**self).name()
    }
}

/// Terminal verdict for positions with no legal moves.
pub fn terminal_eval(p: &Position) -> Option<EngineEval> {
    if p.is_checkmate() {
        Some(EngineEval::TerminalMate)
    } else if p.is_stalemate() {
        Some(EngineEval::TerminalStalemate)
    } else {
        None
    }
}

/// Finds an engine executable: `$STOCKFISH_PATH`, then `stockfish` on `$PATH`.
pub fn locate_engine() -> Option<PathBuf> {
    if let Some(p) = std::env::var_os("STOCKFISH_PATH") {
        let p = PathBuf::from(p);
        if p.exists() {
            return Some(p);
        }
    }
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path)
        .map(|dir| dir.join("stockfish"))
        .find(|candidate| candidate.is_file())
}
