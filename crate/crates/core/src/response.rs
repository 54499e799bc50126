//! Turning raw model text into a legal move, or a recorded parse failure.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::chess::{parse_move_text, Move, MoveTextError, Position};

/// Role tags models tend to hallucinate when continuing a transcript.
const ROLE_TAGS: [&str; 2] = ["Model:", "User:"];

/// Text returned by a model for one query.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RawResponse {
    pub text: String,
    /// Completion tokens as reported by the endpoint.
    pub token_usage: Option<u64>,
    pub latency: Option<Duration>,
    /// Transport retries spent before this response arrived.
    pub retries: u32,
}

impl RawResponse {
    pub fn text(text: impl Into<String>) -> RawResponse {
        RawResponse {
            text: text.into(),
            ..RawResponse::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseOutcome {
    Parsed(Move),
    ParseFailure(String),
}

impl ParseOutcome {
    pub fn is_parsed(&self) -> bool {
        matches!(self, ParseOutcome::Parsed(_))
    }

    pub fn parsed(&self) -> Option<Move> {
        match self {
            ParseOutcome::Parsed(m) => Some(*m),
            ParseOutcome::ParseFailure(_) => None,
        }
    }
}

/// Removes every `Model:` / `User:` role tag, keeping all other text in order.
pub fn sanitize(text: &str) -> String {
    let mut out = text.to_owned();
    // Removing one tag can splice a new one together ("MoUser:del:"), so loop
    // until nothing changes.
    loop {
        let before = out.len();
        for tag in ROLE_TAGS {
            out = out.replace(tag, "");
        }
        if out.len() == before {
            return out;
        }
    }
}

fn is_separator(c: char) -> bool {
    c.is_whitespace()
        || matches!(
            c,
            ',' | ';' | ':' | '.' | '(' | ')' | '[' | ']' | '{' | '}' | '"' | '\'' | '`' | '*' | '/'
                | '\\' | '<' | '>' | '|'
        )
}

pub fn tokenize(text: &str) -> impl Iterator<Item = &str> {
    text.split(is_separator).filter(|t| !t.is_empty())
}

/// Finds the first token that names a legal move in `p`.
///
/// Well-formed but illegal move strings are failures too: Critic #1 accepts
/// only moves that can be played.
pub fn extract_move(text: &str, p: &Position) -> ParseOutcome {
    let clean = sanitize(text);
    let mut first_error: Option<MoveTextError> = None;
    for token in tokenize(&clean) {
        match parse_move_text(token, p) {
            Ok(m) => return ParseOutcome::Parsed(m),
            Err(e) => {
                // An illegal or ambiguous move explains the failure better than
                // the surrounding prose does.
                let informative = !matches!(e, MoveTextError::NoParse(_));
                if first_error.is_none()
                    || (informative && matches!(first_error, Some(MoveTextError::NoParse(_))))
                {
                    first_error = Some(e);
                }
            }
        }
    }
    ParseOutcome::ParseFailure(match first_error {
        None => "empty response".to_owned(),
        Some(e) => e.to_string(),
    })
}

/// Endpoint-reported usage when present, otherwise whitespace-delimited words.
pub fn count_tokens(r: &RawResponse) -> u64 {
    r.token_usage
        .unwrap_or_else(|| r.text.split_whitespace().count() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PIN_FEN: &str = "2q1nk1r/2r1pp1p/1p1p2p1/1R6/5B2/2Q1P3/5PPP/2R3K1 w - - 0 22";
    const ROOK_MATE_FEN: &str = "3r4/6Rp/pk6/1p3B2/5N2/P3pbP1/1P5P/4K3 b - - 3 36";

    fn pos(fen: &str) -> Position {
        Position::from_fen(fen).unwrap()
    }

    #[test]
    fn sanitize_strips_role_tags() {
        assert_eq!(sanitize("Model:\nRxc7").trim(), "Rxc7");
        assert_eq!(sanitize("Model:\nRxc7"), "\nRxc7");
        assert_eq!(sanitize("d8d1"), "d8d1");
        assert_eq!(sanitize("User: try again Model: e2e4"), " try again  e2e4");
        assert_eq!(sanitize("MoUser:del: x"), " x");
    }

    #[test]
    fn extracts_plain_uci() {
        assert_eq!(
            extract_move("d8d1", &pos(ROOK_MATE_FEN)),
            ParseOutcome::Parsed("d8d1".parse().unwrap())
        );
    }

    #[test]
    fn illegal_san_is_a_parse_failure() {
        let out = extract_move("Rxc7", &pos(PIN_FEN));
        assert!(matches!(out, ParseOutcome::ParseFailure(ref r) if r.contains("not a legal move")));
    }

    #[test]
    fn finds_move_inside_prose() {
        assert_eq!(
            extract_move("I will play f3e2 here", &pos(ROOK_MATE_FEN)),
            ParseOutcome::Parsed("f3e2".parse().unwrap())
        );
        assert_eq!(
            extract_move("Model: Best move: Rd1#.", &pos(ROOK_MATE_FEN)),
            ParseOutcome::Parsed("d8d1".parse().unwrap())
        );
        assert_eq!(
            extract_move("36... Rd1#", &pos(ROOK_MATE_FEN)),
            ParseOutcome::Parsed("d8d1".parse().unwrap())
        );
    }

    #[test]
    fn first_legal_token_wins() {
        assert_eq!(
            extract_move("Rxc7 then f3e2 or d8d1", &pos(ROOK_MATE_FEN)),
            ParseOutcome::Parsed("f3e2".parse().unwrap())
        );
    }

    #[test]
    fn empty_responses_fail() {
        for text in ["", "   \n\t", "Model:", "User: Model:"] {
            assert!(!extract_move(text, &pos(ROOK_MATE_FEN)).is_parsed(), "{text:?}");
        }
    }

    #[test]
    fn token_counts() {
        let r = RawResponse {
            token_usage: Some(178),
            ..RawResponse::text("whatever text")
        };
        assert_eq!(count_tokens(&r), 178);
        assert_eq!(count_tokens(&RawResponse::text("")), 0);
        assert_eq!(count_tokens(&RawResponse::text("Best move: d8d1")), 3);
    }
}
