use crate::chess::Move;
use crate::engine::{EvalCache, Evaluator};
use crate::model::TextModel;
use crate::response::{sanitize, ParseOutcome};
use crate::verify::{critic_accuracy, critic_validity, Verdict, ValidityOutcome};

use super::{check_task, grade_move, setup_failure, AttemptTask, AttemptTranscript, InferenceConfig, InferenceMode, Turn};

/// What the previous query produced, for deciding whether new feedback is
/// worth adding to the context.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Nothing,
    Failure,
    Move(Move),
}

/// The conversation sent to the model: the base prompt followed by
/// alternating model and critic turns.
struct Context {
    base: String,
    exchanges: Vec<(String, String)>,
}

impl Context {
    fn render(&self) -> String {
        if self.exchanges.is_empty() {
            return self.base.clone();
        }
        let mut out = self.base.clone();
        for (said, feedback) in &self.exchanges {
            out.push_str("\n\nModel: ");
            out.push_str(said);
            out.push_str("\n\nUser: ");
            out.push_str(feedback);
        }
        out.push_str("\n\nBest move:");
        out
    }
}

/// Queries the model until both critics accept a move or the budget runs
/// out. The accepted move is then graded for reporting.
pub fn run_modulo<M, E>(model: &mut M, oracle: &mut E, task: &AttemptTask, cfg: &InferenceConfig) -> AttemptTranscript
where
    M: TextModel + ?Sized,
    E: Evaluator + ?Sized,
{
    let mode = InferenceMode::Modulo;
    let p = match check_task(task, cfg) {
        Ok(p) => p,
        Err(e) => return setup_failure(task, mode, e),
    };
    let base = match cfg.template.build(&p, InferenceMode::Normal, None) {
        Ok(b) => b,
        Err(e) => return setup_failure(task, mode, e),
    };
    let mut oracle = EvalCache::new(oracle);
    let params = cfg.generation();
    let mut t = AttemptTranscript::start(task, mode);
    let mut ctx = Context {
        base,
        exchanges: Vec::new(),
    };
    let mut previous = Outcome::Nothing;
    let mut failures_in_row = 0;
    let mut rejected: Vec<Move> = Vec::new();

    for _ in 0..cfg.k {
        let mut reset = false;
        if failures_in_row >= cfg.reset_after {
            log::debug!("{}: resetting context after {failures_in_row} parse failures", task.puzzle_id);
            ctx.exchanges.clear();
            previous = Outcome::Nothing;
            failures_in_row = 0;
            t.resets += 1;
            reset = true;
        }
        let prompt = ctx.render();
        let raw = match model.complete(&prompt, &params) {
            Ok(r) => r,
            Err(e) => {
                let mut turn = Turn::failed(prompt, &e);
                turn.reset_before = reset;
                t.push(turn);
                t.error = Some(e.to_string());
                break;
            }
        };

        let (outcome, parse, verdict) = match critic_validity(&p, &raw.text) {
            ValidityOutcome::Rejection { feedback, reason } => {
                failures_in_row += 1;
                (Outcome::Failure, ParseOutcome::ParseFailure(reason), Verdict::invalid(feedback))
            }
            ValidityOutcome::Parsed(m) => {
                failures_in_row = 0;
                match critic_accuracy(&p, &m, &mut oracle, &cfg.critic, &rejected) {
                    Ok(v) => (Outcome::Move(m), ParseOutcome::Parsed(m), v),
                    Err(e) => {
                        let mut turn = Turn::new(prompt, &raw, ParseOutcome::Parsed(m));
                        turn.reset_before = reset;
                        t.push(turn);
                        t.error = Some(e.to_string());
                        break;
                    }
                }
            }
        };

        let mut turn = Turn::new(prompt, &raw, parse);
        turn.reset_before = reset;
        if verdict.is_correct() {
            let m = turn.parse.parsed().expect("accepted moves are parsed");
            t.accepted_move = Some(m);
            match grade_move(&p, &m, task, &mut oracle, &cfg.grading) {
                Ok(g) => turn.graded = Some(g),
                Err(e) => t.error = Some(e.to_string()),
            }
            turn.verdict = Some(verdict);
            t.push(turn);
            break;
        }

        if let Outcome::Move(m) = outcome {
            if !rejected.contains(&m) {
                rejected.push(m);
            }
        }
        if outcome != previous {
            let said = sanitize(&raw.text).trim().to_owned();
            let feedback = verdict.feedback.clone().unwrap_or_default();
            ctx.exchanges.push((said, feedback));
            turn.feedback_appended = true;
            previous = outcome;
        }
        turn.verdict = Some(verdict);
        t.push(turn);
    }
    t.settle();
    t
}
