use std::fmt::Write;

use super::AttemptTranscript;

const WIDTH: usize = 72;

fn boxed(out: &mut String, title: &str, body: &str) {
    let _ = writeln!(out, "+-- {title} {}", "-".repeat(WIDTH.saturating_sub(title.len() + 5)));
    for line in body.lines() {
        let _ = writeln!(out, "| {line}");
    }
    let _ = writeln!(out, "+{}", "-".repeat(WIDTH - 1));
}

/// Renders a transcript as the user / model / verifier exchange. Only the
/// opening prompt is shown in full; later user boxes carry just the feedback.
pub fn render_trace(t: &AttemptTranscript) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "puzzle {} #{} ({})", t.puzzle_id, t.index, t.mode);
    let mut pending_feedback: Option<&str> = None;
    for (i, turn) in t.turns.iter().enumerate() {
        if i == 0 || turn.reset_before {
            if turn.reset_before {
                let _ = writeln!(out, "[CONTEXT RESET]");
            }
            boxed(&mut out, "User", &turn.prompt);
        } else if let Some(feedback) = pending_feedback {
            boxed(&mut out, "User", feedback);
        } else {
            boxed(&mut out, "User", "(same context re-sent)");
        }
        boxed(&mut out, "Model", turn.response.trim());
        pending_feedback = None;
        if let Some(v) = &turn.verdict {
            boxed(&mut out, "Verifier", v.kind.tag());
            if turn.feedback_appended {
                pending_feedback = v.feedback.as_deref();
            }
        } else if let Some(g) = turn.graded {
            boxed(&mut out, "Grade", if g { "correct" } else { "incorrect" });
        }
    }
    let accepted = t.accepted_move.map_or_else(|| "none".to_owned(), |m| m.to_uci());
    let _ = writeln!(
        out,
        "final: {:?}, accepted: {accepted}, queries: {}, resets: {}, tokens: {}",
        t.final_verdict, t.queries_used, t.resets, t.total_tokens
    );
    if let Some(e) = &t.error {
        let _ = writeln!(out, "error: {e}");
    }
    out
}
