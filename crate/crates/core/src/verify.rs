//! The two hard critics of the modulo loop, and the offline grader.

use serde::{Deserialize, Serialize};

use crate::chess::{render_uci, Move, Position};
use crate::engine::{EngineError, EngineEval, EngineLimits, Evaluator};
use crate::response::{extract_move, ParseOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    InvalidMove,
    ValidButInaccurate,
    Correct,
}

impl VerdictKind {
    /// Verifier tag shown in traces.
    pub fn tag(self) -> &'static str {
        match self {
            VerdictKind::InvalidMove => "[INVALID MOVE: CANNOT PARSE VALID UCI/SAN MOVE STRING]",
            VerdictKind::ValidButInaccurate => {
                "[VALID BUT INACCURATE MOVE: DOES NOT IMPROVE EVALUATION FROM THE ORIGINAL POSITION]"
            }
            VerdictKind::Correct => "[MOVE CORRECT]",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<String>,
    /// Evaluation after the move, from the mover's side.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resulting_eval: Option<EngineEval>,
}

impl Verdict {
    pub fn invalid(feedback: String) -> Verdict {
        Verdict {
            kind: VerdictKind::InvalidMove,
            feedback: Some(feedback),
            resulting_eval: None,
        }
    }

    pub fn is_correct(&self) -> bool {
        self.kind == VerdictKind::Correct
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "threshold_cp")]
pub enum CpRule {
    /// Only the recorded solution counts in non-mate positions.
    GroundTruthOnly,
    /// Accept when the move loses at most this many centipawns.
    ImproveByThreshold(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradingPolicy {
    pub oracle_limits: EngineLimits,
    pub mate_rule_enabled: bool,
    pub cp_rule: CpRule,
}

impl Default for GradingPolicy {
    fn default() -> GradingPolicy {
        GradingPolicy {
            oracle_limits: EngineLimits::ground_truth(),
            mate_rule_enabled: true,
            cp_rule: CpRule::GroundTruthOnly,
        }
    }
}

impl GradingPolicy {
    /// Policy for Critic #2 inside the modulo loop, where positions need not
    /// carry a mate evaluation.
    pub fn for_modulo() -> GradingPolicy {
        GradingPolicy {
            cp_rule: CpRule::ImproveByThreshold(0),
            ..GradingPolicy::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidityOutcome {
    Parsed(Move),
    Rejection { feedback: String, reason: String },
}

fn move_list(moves: impl IntoIterator<Item = Move>) -> String {
    moves
        .into_iter()
        .map(|m| render_uci(&m))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Critic #1 feedback: every legal move, in generation order.
pub fn validity_feedback(p: &Position) -> String {
    format!(
        "The move you provided is invalid. Please provide one of the following legal moves in the position:\n\n{}",
        move_list(p.legal_moves())
    )
}

/// Critic #1: is there a legal move in the response at all?
pub fn critic_validity(p: &Position, response: &str) -> ValidityOutcome {
    match extract_move(response, p) {
        ParseOutcome::Parsed(m) => ValidityOutcome::Parsed(m),
        ParseOutcome::ParseFailure(reason) => ValidityOutcome::Rejection {
            feedback: validity_feedback(p),
            reason,
        },
    }
}

/// Whether `after` (the position after the move, seen by the mover) is an
/// improvement over `before` (the mover's eval of the original position).
pub fn improves(before: EngineEval, after: EngineEval, policy: &GradingPolicy) -> bool {
    if policy.mate_rule_enabled {
        if let EngineEval::MateIn(n) = before {
            if n > 0 {
                // A shallow oracle may report a longer mate than exists, so any
                // strictly shorter forced mate qualifies.
                return match after {
                    EngineEval::TerminalMate => true,
                    EngineEval::MateIn(j) => j >= 1 && j < n,
                    _ => false,
                };
            }
        }
    }
    match policy.cp_rule {
        CpRule::GroundTruthOnly => false,
        CpRule::ImproveByThreshold(t) => after.rank() >= before.rank() - t as i64,
    }
}

/// Wording used for an evaluation inside Critic #2 feedback. `mate_context`
/// is set when the original position had a forced mate for the mover.
pub fn eval_phrase(e: EngineEval, mate_context: bool) -> String {
    match e {
        EngineEval::MateIn(k) if k > 0 => format!("Mate in {k}"),
        EngineEval::MateIn(k) => format!("Mated in {}", -k),
        EngineEval::Centipawns(_) if mate_context => "no forced mate".to_owned(),
        EngineEval::Centipawns(cp) => format!("{cp} centipawns"),
        EngineEval::TerminalMate => "checkmate".to_owned(),
        EngineEval::TerminalStalemate => "stalemate".to_owned(),
    }
}

pub fn accuracy_feedback(m: &Move, before: EngineEval, after: EngineEval, alternatives: &[Move]) -> String {
    let mate_context = matches!(before, EngineEval::MateIn(k) if k > 0);
    format!(
        "The move you provided ({}) is valid but does not improve the evaluation of the position. \
         The current position is {} for you and the move you provided gives a position with the \
         evaluation of {}. Please try one of the following alternative legal moves instead:\n\n{}",
        render_uci(m),
        eval_phrase(before, mate_context),
        eval_phrase(after, mate_context),
        move_list(alternatives.iter().copied())
    )
}

/// Evaluations of `p` (mover's view) and of `p` after `m` (also mover's view),
/// plus the oracle's best move in `p`.
fn before_after<E: Evaluator + ?Sized>(
    p: &Position,
    m: &Move,
    oracle: &mut E,
    limits: &EngineLimits,
) -> Result<(EngineEval, Option<Move>, EngineEval), EngineError> {
    let before = oracle.evaluate(p, limits)?;
    let next = p
        .apply_move(m)
        .map_err(|e| EngineError::Protocol(format!("critic given an illegal move: {e}")))?;
    let after = oracle.evaluate(&next, limits)?.eval.flipped();
    Ok((before.eval, before.best, after))
}

/// Critic #2. `rejected` holds every move already turned down in this loop;
/// they are left out of the suggested alternatives.
pub fn critic_accuracy<E: Evaluator + ?Sized>(
    p: &Position,
    m: &Move,
    oracle: &mut E,
    policy: &GradingPolicy,
    rejected: &[Move],
) -> Result<Verdict, EngineError> {
    let (before, best, after) = before_after(p, m, oracle, &policy.oracle_limits)?;
    if best == Some(*m) || improves(before, after, policy) {
        return Ok(Verdict {
            kind: VerdictKind::Correct,
            feedback: None,
            resulting_eval: Some(after),
        });
    }
    let alternatives: Vec<Move> = p
        .legal_moves()
        .into_iter()
        .filter(|o| o != m && !rejected.contains(o))
        .collect();
    Ok(Verdict {
        kind: VerdictKind::ValidButInaccurate,
        feedback: Some(accuracy_feedback(m, before, after, &alternatives)),
        resulting_eval: Some(after),
    })
}

/// Offline correctness: the recorded solution, or an alternatively good move
/// under `policy`.
pub fn grade<E: Evaluator + ?Sized>(
    p: &Position,
    m: &Move,
    ground_truth: &Move,
    oracle: &mut E,
    policy: &GradingPolicy,
) -> Result<bool, EngineError> {
    if m == ground_truth {
        return Ok(true);
    }
    if !p.is_legal(m) {
        return Ok(false);
    }
    if !policy.mate_rule_enabled && policy.cp_rule == CpRule::GroundTruthOnly {
        return Ok(false);
    }
    let (before, _, after) = before_after(p, m, oracle, &policy.oracle_limits)?;
    Ok(improves(before, after, policy))
}
