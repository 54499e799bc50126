use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::chess::{Move, Position};

use super::DatasetError;

/// A (position, best move) training pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub fen: String,
    pub best: Move,
}

impl CorpusRecord {
    pub fn new(p: &Position, best: Move) -> Result<CorpusRecord, DatasetError> {
        if !p.is_legal(&best) {
            return Err(DatasetError::Invalid(format!("{best} is not legal in {}", p.to_fen())));
        }
        Ok(CorpusRecord { fen: p.to_fen(), best })
    }

    /// `<FEN>;<uci>`
    pub fn to_line(&self) -> String {
        format!("{};{}", self.fen, self.best)
    }

    pub fn parse_line(line: &str) -> Result<CorpusRecord, DatasetError> {
        let bad = |why: &str| DatasetError::Invalid(format!("corpus line `{line}`: {why}"));
        let (fen, mv) = line.trim_end().rsplit_once(';').ok_or_else(|| bad("no `;`"))?;
        let p = Position::from_fen(fen).map_err(|e| bad(&e.to_string()))?;
        let best = mv.parse::<Move>().map_err(|e| bad(&e.to_string()))?;
        CorpusRecord::new(&p, best).map_err(|e| bad(&e.to_string()))
    }

    pub fn position(&self) -> Position {
        Position::from_fen(&self.fen).expect("corpus FEN was validated")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub records: usize,
    pub unique_positions: usize,
    /// Positions that appear with more than one distinct best move.
    pub conflicting_positions: usize,
}

/// Writes one record per line and reports duplication. Every record is
/// kept, including repeats and conflicting labels.
pub fn build_corpus<W: Write>(
    records: impl IntoIterator<Item = CorpusRecord>,
    mut sink: W,
) -> Result<CorpusStats, DatasetError> {
    let mut labels: HashMap<String, Vec<Move>> = HashMap::new();
    let mut n = 0;
    for r in records {
        writeln!(sink, "{}", r.to_line())?;
        let moves = labels.entry(r.position().dedup_key()).or_default();
        if !moves.contains(&r.best) {
            moves.push(r.best);
        }
        n += 1;
    }
    sink.flush()?;
    let stats = CorpusStats {
        records: n,
        unique_positions: labels.len(),
        conflicting_positions: labels.values().filter(|m| m.len() > 1).count(),
    };
    log::info!(
        "corpus: {} records, {} unique positions, {} conflicting",
        stats.records,
        stats.unique_positions,
        stats.conflicting_positions
    );
    Ok(stats)
}

pub fn read_corpus<R: BufRead>(r: R) -> Result<Vec<CorpusRecord>, DatasetError> {
    r.lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| CorpusRecord::parse_line(&l?))
        .collect()
}
