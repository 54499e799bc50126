//! Puzzle ingestion, theme splits, training corpora and engine self-play.

mod corpus;
mod puzzle;
mod selfplay;
mod split;

use std::path::PathBuf;

use crate::engine::EngineError;

pub use corpus::{build_corpus, read_corpus, CorpusRecord, CorpusStats};
pub use puzzle::{
    expand_puzzle, load_puzzles, open_puzzles, read_all, write_puzzles, EvalClass, LoadReport, PositionTask, Puzzle,
    PuzzleReader, PUZZLE_HEADER,
};
pub use selfplay::{generate_selfplay_corpus, LevelTally, Pairing, SelfPlayOutput, SelfPlayPlan, SelfPlayStats};
pub use split::{sample_eval_set, theme_split, Split, SplitManifest, DEDUP_KEY_KIND, DEFAULT_HOLDOUT};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot open {path}: {source}")]
    Open {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unexpected puzzle CSV header: {0}")]
    Header(String),
    #[error("CSV: {0}")]
    Csv(String),
    #[error("puzzle {id} is corrupt: {reason}")]
    Corrupt { id: String, reason: String },
    #[error("theme {theme} has {available} validation puzzles, {wanted} requested")]
    NotEnough {
        theme: String,
        wanted: usize,
        available: usize,
    },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Engine(#[from] EngineError),
}
