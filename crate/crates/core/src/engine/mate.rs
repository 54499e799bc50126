use super::{terminal_eval, EngineError, EngineEval, EngineLimits, Evaluation, Evaluator};
use crate::chess::{Move, PieceKind, Position};

/// Exhaustive short-mate finder. Proves mates (for either side) up to a ply
/// horizon and otherwise reports a material count. Needs no external engine,
/// which makes it a deterministic oracle for mate-in-1 and mate-in-2 work.
#[derive(Debug, Clone, Copy)]
pub struct MateOracle {
    pub max_plies: u32,
}

impl Default for MateOracle {
    fn default() -> MateOracle {
        MateOracle { max_plies: 3 }
    }
}

const MATE: i32 = 100_000;

fn material(p: &Position) -> i32 {
    let us = p.side_to_move();
    let value = |k: PieceKind| match k {
        PieceKind::Pawn => 100,
        PieceKind::Knight | PieceKind::Bishop => 300,
        PieceKind::Rook => 500,
        PieceKind::Queen => 900,
        PieceKind::King => 0,
    };
    PieceKind::ALL
        .iter()
        .map(|&k| value(k) * (p.pieces(us, k).count() as i32 - p.pieces(!us, k).count() as i32))
        .sum()
}

/// Negamax over mate scores only: `MATE - ply` for a forced win, `-(MATE - ply)`
/// for a forced loss, 0 when nothing is proven within `depth`.
fn search(p: &Position, depth: u32, ply: i32, mut alpha: i32, beta: i32) -> i32 {
    let moves = p.legal_moves();
    if moves.is_empty() {
        return if p.is_check() { -(MATE - ply) } else { 0 };
    }
    if depth == 0 {
        return 0;
    }
    let mut best = -MATE;
    for m in &moves {
        let score = -search(&p.play_unchecked(m), depth - 1, ply + 1, -beta, -alpha);
        best = best.max(score);
        alpha = alpha.max(score);
        if alpha >= beta {
            break;
        }
    }
    best
}

impl MateOracle {
    pub fn new(max_plies: u32) -> MateOracle {
        MateOracle { max_plies }
    }

    fn solve(&self, p: &Position) -> (EngineEval, Move) {
        let moves = p.legal_moves();
        // Iterative deepening so the shortest mate is the one reported.
        for depth in 1..=self.max_plies {
            let mut best: Option<(i32, Move)> = None;
            for m in &moves {
                let score = -search(&p.play_unchecked(m), depth - 1, 1, -MATE, MATE);
                if best.is_none_or(|(b, _)| score > b) {
                    best = Some((score, *m));
                }
            }
            let (score, m) = best.expect("non-terminal position has moves");
            if score > 0 {
                let plies = MATE - score;
                return (EngineEval::MateIn((plies + 1) / 2), m);
            }
            if score < 0 {
                let plies = MATE + score;
                return (EngineEval::MateIn(-(plies / 2)), m);
            }
        }
        (EngineEval::Centipawns(material(p)), moves[0])
    }
}

impl Evaluator for MateOracle {
    fn evaluate(&mut self, p: &Position, limits: &EngineLimits) -> Result<Evaluation, EngineError> {
        limits.validate()?;
        if let Some(eval) = terminal_eval(p) {
            return Ok(Evaluation { eval, best: None });
        }
        let (eval, best) = self.solve(p);
        Ok(Evaluation {
            eval,
            best: Some(best),
        })
    }

    fn name(&self) -> String {
        format!("mate-oracle ({} plies)", self.max_plies)
    }
}
