use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chess::{Move, Position};
use crate::engine::EngineEval;
use crate::runner::AttemptTask;

use super::DatasetError;

/// Column order of the public puzzle export.
pub const PUZZLE_HEADER: [&str; 10] = [
    "PuzzleId",
    "FEN",
    "Moves",
    "Rating",
    "RatingDeviation",
    "Popularity",
    "NbPlays",
    "Themes",
    "GameUrl",
    "OpeningTags",
];

const ZSTD_MAGIC: [u8; 4] = [0x28, 0xb5, 0x2f, 0xfd];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Puzzle {
    pub id: String,
    /// Position before the opponent's setup move.
    pub fen: String,
    pub moves: Vec<Move>,
    pub rating: i32,
    pub themes: Vec<String>,
    #[serde(default)]
    pub game_url: String,
}

impl Puzzle {
    pub fn has_theme(&self, theme: &str) -> bool {
        self.themes.iter().any(|t| t == theme)
    }

    /// N for a `mateInN` puzzle.
    pub fn mate_in(&self) -> Option<u32> {
        self.themes
            .iter()
            .find_map(|t| t.strip_prefix("mateIn").and_then(|n| n.parse().ok()))
    }

    pub fn start(&self) -> Result<Position, DatasetError> {
        Position::from_fen(&self.fen).map_err(|e| DatasetError::Corrupt {
            id: self.id.clone(),
            reason: e.to_string(),
        })
    }

    /// Every position along the line, starting with `fen`.
    pub fn line(&self) -> Result<Vec<Position>, DatasetError> {
        let mut p = self.start()?;
        let mut out = Vec::with_capacity(self.moves.len() + 1);
        for (i, m) in self.moves.iter().enumerate() {
            let next = p.apply_move(m).map_err(|_| DatasetError::Corrupt {
                id: self.id.clone(),
                reason: format!("move {} ({m}) is illegal", i + 1),
            })?;
            out.push(p);
            p = next;
        }
        out.push(p);
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let corrupt = |reason: String| DatasetError::Corrupt {
            id: self.id.clone(),
            reason,
        };
        if self.moves.len() < 2 {
            return Err(corrupt(format!("{} move(s); need a setup move and a reply", self.moves.len())));
        }
        if let Some(n) = self.mate_in() {
            if self.moves.len() != 2 * n as usize {
                return Err(corrupt(format!("mateIn{n} with {} moves", self.moves.len())));
            }
        }
        self.line().map(|_| ())
    }

    fn to_record(&self) -> [String; 10] {
        [
            self.id.clone(),
            self.fen.clone(),
            self.moves.iter().map(Move::to_uci).collect::<Vec<_>>().join(" "),
            self.rating.to_string(),
            "0".into(),
            "0".into(),
            "0".into(),
            self.themes.join(" "),
            self.game_url.clone(),
            String::new(),
        ]
    }
}

/// What to expect from the mover's side: a forced mate in k, or nothing known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalClass {
    MateIn(u32),
    Cp,
}

/// One solver move of a puzzle, ready to be attempted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PositionTask {
    pub puzzle_id: String,
    /// 1-based solver move number.
    pub index: u32,
    pub position: Position,
    pub solution: Move,
    pub eval_class: EvalClass,
    pub themes: Vec<String>,
}

impl PositionTask {
    pub fn to_attempt(&self) -> AttemptTask {
        AttemptTask {
            puzzle_id: self.puzzle_id.clone(),
            index: self.index,
            fen: self.position.to_fen(),
            ground_truth: Some(self.solution),
            themes: self.themes.clone(),
            eval_hint: match self.eval_class {
                EvalClass::MateIn(k) => Some(EngineEval::MateIn(k as i32)),
                EvalClass::Cp => None,
            },
        }
    }
}

/// Splits a puzzle into its solver moves. The setup move is applied first,
/// then each solver move is a task and each opponent reply is played through.
pub fn expand_puzzle(z: &Puzzle) -> Result<Vec<PositionTask>, DatasetError> {
    z.validate()?;
    let line = z.line()?;
    let n = z.mate_in();
    Ok((1..z.moves.len())
        .step_by(2)
        .map(|i| {
            let index = (i as u32).div_ceil(2);
            PositionTask {
                puzzle_id: z.id.clone(),
                index,
                position: line[i].clone(),
                solution: z.moves[i],
                eval_class: n.map_or(EvalClass::Cp, |n| EvalClass::MateIn(n - index + 1)),
                themes: z.themes.clone(),
            }
        })
        .collect())
}

/// Rows that were skipped while reading.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub rows: u64,
    pub loaded: u64,
    pub skipped: u64,
    /// The first few skipped rows, as (line, reason).
    pub examples: Vec<(u64, String)>,
}

const REPORT_EXAMPLES: usize = 20;

impl LoadReport {
    fn skip(&mut self, line: u64, reason: String) {
        log::debug!("skipping puzzle row at line {line}: {reason}");
        self.skipped += 1;
        if self.examples.len() < REPORT_EXAMPLES {
            self.examples.push((line, reason));
        }
    }
}

/// Streams puzzles from CSV. Malformed rows are skipped and counted; only
/// I/O failures end the stream with an error.
pub struct PuzzleReader<R: Read> {
    rows: csv::StringRecordsIntoIter<R>,
    report: LoadReport,
    failed: bool,
}

impl<R: Read> PuzzleReader<R> {
    pub fn new(source: R) -> Result<PuzzleReader<R>, DatasetError> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(source);
        let header = csv.headers().map_err(|e| DatasetError::Csv(e.to_string()))?;
        let found: Vec<&str> = header.iter().collect();
        if found.len() < 9 || found[..9] != PUZZLE_HEADER[..9] {
            return Err(DatasetError::Header(found.join(",")));
        }
        Ok(PuzzleReader {
            rows: csv.into_records(),
            report: LoadReport::default(),
            failed: false,
        })
    }

    pub fn report(&self) -> &LoadReport {
        &self.report
    }
}

fn parse_row(row: &csv::StringRecord) -> Result<Puzzle, String> {
    let field = |i: usize| row.get(i).ok_or_else(|| format!("missing column {}", PUZZLE_HEADER[i]));
    let moves = field(2)?
        .split_whitespace()
        .map(|m| m.parse::<Move>().map_err(|e| format!("move `{m}`: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    let rating = field(3)?.trim().parse().map_err(|_| format!("rating `{}`", field(3).unwrap_or("")))?;
    let z = Puzzle {
        id: field(0)?.to_owned(),
        fen: field(1)?.to_owned(),
        moves,
        rating,
        themes: field(7)?.split_whitespace().map(str::to_owned).collect(),
        game_url: field(8)?.to_owned(),
    };
    z.validate().map_err(|e| e.to_string())?;
    Ok(z)
}

impl<R: Read> Iterator for PuzzleReader<R> {
    type Item = Result<Puzzle, DatasetError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let row = match self.rows.next()? {
                Ok(row) => row,
                Err(e) => {
                    let line = e.position().map_or(0, |p| p.line());
                    if let csv::ErrorKind::Io(_) = e.kind() {
                        self.failed = true;
                        return Some(Err(DatasetError::Csv(e.to_string())));
                    }
                    self.report.rows += 1;
                    self.report.skip(line, e.to_string());
                    continue;
                }
            };
            self.report.rows += 1;
            let line = row.position().map_or(0, |p| p.line());
            match parse_row(&row) {
                Ok(z) => {
                    self.report.loaded += 1;
                    return Some(Ok(z));
                }
                Err(reason) => self.report.skip(line, reason),
            }
        }
    }
}

/// Reads puzzles from any byte stream, transparently decompressing zstd.
pub fn load_puzzles<R: Read + 'static>(source: R) -> Result<PuzzleReader<Box<dyn Read>>, DatasetError> {
    let mut source = BufReader::new(source);
    let compressed = {
        let head = io::BufRead::fill_buf(&mut source)?;
        head.starts_with(&ZSTD_MAGIC)
    };
    let reader: Box<dyn Read> = if compressed {
        Box::new(
            ruzstd::decoding::StreamingDecoder::new(source)
                .map_err(|e| DatasetError::Csv(format!("zstd: {e}")))?,
        )
    } else {
        Box::new(source)
    };
    PuzzleReader::new(reader)
}

pub fn open_puzzles(path: &Path) -> Result<PuzzleReader<Box<dyn Read>>, DatasetError> {
    let f = File::open(path).map_err(|e| DatasetError::Open {
        path: path.to_owned(),
        source: e,
    })?;
    load_puzzles(f)
}

/// Reads every well-formed puzzle into memory.
pub fn read_all(path: &Path) -> Result<(Vec<Puzzle>, LoadReport), DatasetError> {
    let mut reader = open_puzzles(path)?;
    let puzzles = reader.by_ref().collect::<Result<Vec<_>, _>>()?;
    Ok((puzzles, reader.report().clone()))
}

/// Writes puzzles in the public export schema. Popularity and play counts
/// are not tracked and are written as zero.
pub fn write_puzzles<'a, W: Write>(w: W, puzzles: impl IntoIterator<Item = &'a Puzzle>) -> Result<(), DatasetError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(PUZZLE_HEADER)
        .map_err(|e| DatasetError::Csv(e.to_string()))?;
    for z in puzzles {
        out.write_record(z.to_record())
            .map_err(|e| DatasetError::Csv(e.to_string()))?;
    }
    out.flush()?;
    Ok(())
}
