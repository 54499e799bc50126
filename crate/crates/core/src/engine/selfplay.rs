use std::collections::HashMap;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::{EngineConfig, EngineError, EngineLimits, EngineSession, Evaluator};
use crate::chess::{render_san, Color, Move, PgnGame, Position};

pub const DEFAULT_MAX_PLIES: usize = 512;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GameOutcome {
    Checkmate { winner: Color },
    Stalemate,
    FiftyMoveRule,
    ThreefoldRepetition,
    InsufficientMaterial,
    /// Ply limit reached or an engine failed mid-game.
    Aborted { reason: String },
}

impl GameOutcome {
    pub fn result_tag(&self) -> &'static str {
        match self {
            GameOutcome::Checkmate { winner: Color::White } => "1-0",
            GameOutcome::Checkmate { winner: Color::Black } => "0-1",
            GameOutcome::Aborted { .. } => "*",
            _ => "1/2-1/2",
        }
    }

    pub fn termination(&self) -> String {
        match self {
            GameOutcome::Checkmate { .. } => "checkmate".into(),
            GameOutcome::Stalemate => "stalemate".into(),
            GameOutcome::FiftyMoveRule => "fifty-move rule".into(),
            GameOutcome::ThreefoldRepetition => "threefold repetition".into(),
            GameOutcome::InsufficientMaterial => "insufficient material".into(),
            GameOutcome::Aborted { reason } => format!("aborted: {reason}"),
        }
    }

    pub fn is_aborted(&self) -> bool {
        matches!(self, GameOutcome::Aborted { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayedMove {
    pub side: Color,
    #[serde(rename = "move")]
    pub mv: Move,
    pub san: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Game {
    pub white: String,
    pub black: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round: Option<u32>,
    pub start_fen: String,
    pub moves: Vec<PlayedMove>,
    pub outcome: GameOutcome,
}

impl Game {
    pub fn start(&self) -> Position {
        Position::from_fen(&self.start_fen).expect("game start FEN is valid")
    }

    /// Every position in which a move was played, paired with that move.
    pub fn positions(&self) -> Vec<(Position, Move)> {
        let mut p = self.start();
        let mut out = Vec::with_capacity(self.moves.len());
        for pm in &self.moves {
            let next = p.apply_move(&pm.mv).expect("recorded moves are legal");
            out.push((p, pm.mv));
            p = next;
        }
        out
    }

    pub fn final_position(&self) -> Position {
        let mut p = self.start();
        for pm in &self.moves {
            p = p.apply_move(&pm.mv).expect("recorded moves are legal");
        }
        p
    }

    pub fn to_pgn_game(&self) -> PgnGame {
        let result = self.outcome.result_tag().to_owned();
        let mut tags = vec![
            ("Event".to_owned(), "Engine self-play".to_owned()),
            ("Site".to_owned(), "?".to_owned()),
            ("Date".to_owned(), "????.??.??".to_owned()),
            (
                "Round".to_owned(),
                self.round.map_or_else(|| "?".to_owned(), |r| r.to_string()),
            ),
            ("White".to_owned(), self.white.clone()),
            ("Black".to_owned(), self.black.clone()),
            ("Result".to_owned(), result.clone()),
            ("Termination".to_owned(), self.outcome.termination()),
            ("PlyCount".to_owned(), self.moves.len().to_string()),
        ];
        let start = self.start();
        if start != Position::starting() {
            tags.push(("SetUp".to_owned(), "1".to_owned()));
            tags.push(("FEN".to_owned(), self.start_fen.clone()));
        }
        PgnGame {
            tags,
            start,
            moves: self.moves.iter().map(|m| m.mv).collect(),
            result,
        }
    }

    pub fn to_pgn(&self) -> String {
        self.to_pgn_game().to_pgn()
    }
}

fn adjudicate(p: &Position, seen: &HashMap<String, u32>) -> Option<GameOutcome> {
    if p.is_checkmate() {
        return Some(GameOutcome::Checkmate {
            winner: !p.side_to_move(),
        });
    }
    if p.is_stalemate() {
        return Some(GameOutcome::Stalemate);
    }
    if p.is_insufficient_material() {
        return Some(GameOutcome::InsufficientMaterial);
    }
    if seen.get(&p.dedup_key()).copied().unwrap_or(0) >= 3 {
        return Some(GameOutcome::ThreefoldRepetition);
    }
    if p.halfmove_clock() >= 100 {
        return Some(GameOutcome::FiftyMoveRule);
    }
    None
}

/// Plays `white` against `black` from `start` until the game ends or
/// `max_plies` moves have been made. Engine failures abort the game rather
/// than failing the call.
pub fn play_game_from<W: Evaluator + ?Sized, B: Evaluator + ?Sized>(
    start: Position,
    white: &mut W,
    black: &mut B,
    limits: &EngineLimits,
    max_plies: usize,
) -> Game {
    let mut game = Game {
        white: white.name(),
        black: black.name(),
        round: None,
        start_fen: start.to_fen(),
        moves: Vec::new(),
        outcome: GameOutcome::Aborted {
            reason: "not started".into(),
        },
    };
    let mut p = start;
    let mut seen: HashMap<String, u32> = HashMap::new();
    *seen.entry(p.dedup_key()).or_default() += 1;
    loop {
        if let Some(outcome) = adjudicate(&p, &seen) {
            game.outcome = outcome;
            break;
        }
        if game.moves.len() >= max_plies {
            game.outcome = GameOutcome::Aborted {
                reason: format!("reached {max_plies} plies"),
            };
            break;
        }
        let side = p.side_to_move();
        let answer = match side {
            Color::White => white.best_move(&p, limits),
            Color::Black => black.best_move(&p, limits),
        };
        let m = match answer {
            Ok(m) if p.is_legal(&m) => m,
            Ok(m) => {
                game.outcome = GameOutcome::Aborted {
                    reason: format!("engine returned illegal move {m}"),
                };
                break;
            }
            Err(e) => {
                warn!("aborting game after {} plies: {e}", game.moves.len());
                game.outcome = GameOutcome::Aborted {
                    reason: e.to_string(),
                };
                break;
            }
        };
        let san = render_san(&p, &m).expect("move checked legal");
        p = p.apply_move(&m).expect("move checked legal");
        *seen.entry(p.dedup_key()).or_default() += 1;
        game.moves.push(PlayedMove { side, mv: m, san });
    }
    game
}

/// Plays from the initial position; no opening book is used.
pub fn play_game<W: Evaluator + ?Sized, B: Evaluator + ?Sized>(
    white: &mut W,
    black: &mut B,
    limits: &EngineLimits,
    max_plies: usize,
) -> Game {
    play_game_from(Position::starting(), white, black, limits, max_plies)
}

/// Opens one session per side and plays a game from the initial position.
pub fn play_selfplay_game(
    white: &EngineConfig,
    black: &EngineConfig,
    limits: &EngineLimits,
    max_plies: usize,
) -> Result<Game, EngineError> {
    limits.validate()?;
    let mut w = EngineSession::open(white)?;
    let mut b = EngineSession::open(black)?;
    let game = play_game(&mut w, &mut b, limits, max_plies);
    info!(
        "{} vs {}: {} after {} plies",
        game.white,
        game.black,
        game.outcome.termination(),
        game.moves.len()
    );
    Ok(game)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{EngineEval, Evaluation};

    /// Plays the first legal move in generation order.
    struct FirstMove;

    impl Evaluator for FirstMove {
        fn evaluate(&mut self, p: &Position, _: &EngineLimits) -> Result<Evaluation, EngineError> {
            Ok(Evaluation {
                eval: EngineEval::Centipawns(0),
                best: p.legal_moves().first().copied(),
            })
        }

        fn name(&self) -> String {
            "first-move".into()
        }
    }

    struct Broken;

    impl Evaluator for Broken {
        fn evaluate(&mut self, _: &Position, _: &EngineLimits) -> Result<Evaluation, EngineError> {
            Err(EngineError::Exited)
        }
    }

    #[test]
    fn zero_plies_is_an_empty_aborted_game() {
        let g = play_game(&mut FirstMove, &mut FirstMove, &EngineLimits::depth(1), 0);
        assert!(g.moves.is_empty());
        assert!(g.outcome.is_aborted());
        assert_eq!(g.outcome.result_tag(), "*");
    }

    #[test]
    fn engine_failure_aborts() {
        let g = play_game(&mut FirstMove, &mut Broken, &EngineLimits::depth(1), 10);
        assert_eq!(g.moves.len(), 1);
        assert!(g.outcome.is_aborted());
    }

    #[test]
    fn deterministic_players_reach_a_rule_based_end() {
        let g = play_game(&mut FirstMove, &mut FirstMove, &EngineLimits::depth(1), DEFAULT_MAX_PLIES);
        assert!(!g.outcome.is_aborted(), "{:?}", g.outcome);
        for (i, pm) in g.moves.iter().enumerate() {
            let expected = if i % 2 == 0 { Color::White } else { Color::Black };
            assert_eq!(pm.side, expected);
        }
        let parsed = crate::chess::parse_pgn(&g.to_pgn()).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0].moves.len(), g.moves.len());
        assert_eq!(parsed[0].result, g.outcome.result_tag());
    }

    #[test]
    fn checkmate_ends_the_game() {
        let start = Position::from_fen("3r4/6Rp/pk6/1p3B2/5N2/P3pbP1/1P5P/4K3 b - - 3 36").unwrap();
        struct Mate;
        impl Evaluator for Mate {
            fn evaluate(&mut self, _: &Position, _: &EngineLimits) -> Result<Evaluation, EngineError> {
                Ok(Evaluation {
                    eval: EngineEval::MateIn(1),
                    best: Some("d8d1".parse().unwrap()),
                })
            }
        }
        let g = play_game_from(start, &mut FirstMove, &mut Mate, &EngineLimits::depth(1), 10);
        assert_eq!(g.outcome, GameOutcome::Checkmate { winner: Color::Black });
        assert_eq!(g.moves[0].san, "Rd1#");
        assert!(g.to_pgn().contains("[FEN "));
    }
}
