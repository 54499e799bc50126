//! Minimal PGN archive support: export-format writer and a reader for the
//! same subset (tag pairs, SAN movetext, comments, move numbers, result).

use super::notation::{parse_move_text, render_san, MoveTextError};
use super::position::{FenError, Position};
use super::types::Move;

#[derive(Debug, thiserror::Error)]
pub enum PgnError {
    #[error("malformed tag pair on line {line}: {text}")]
    Tag { line: usize, text: String },
    #[error("bad FEN tag: {0}")]
    Fen(#[from] FenError),
    #[error("game {game}, ply {ply}: {source}")]
    Move {
        game: usize,
        ply: usize,
        #[source]
        source: MoveTextError,
    },
    #[error("unterminated comment in game {0}")]
    Comment(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PgnGame {
    /// Tag pairs in output order.
    pub tags: Vec<(String, String)>,
    pub start: Position,
    pub moves: Vec<Move>,
    /// `1-0`, `0-1`, `1/2-1/2` or `*`.
    pub result: String,
}

const RESULTS: [&str; 4] = ["1-0", "0-1", "1/2-1/2", "*"];

impl PgnGame {
    pub fn tag(&self, name: &str) -> Option<&str> {
        self.tags
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    /// Renders the game. `SetUp`/`FEN` tags are added when the game does not
    /// start from the initial position. Panics if a move is illegal.
    pub fn to_pgn(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.tags {
            out.push_str(&format!("[{k} \"{}\"]\n", escape(v)));
        }
        if self.start != Position::starting() && self.tag("FEN").is_none() {
            out.push_str("[SetUp \"1\"]\n");
            out.push_str(&format!("[FEN \"{}\"]\n", self.start.to_fen()));
        }
        out.push('\n');

        let mut tokens = Vec::with_capacity(self.moves.len() * 3 / 2 + 1);
        let mut p = self.start.clone();
        for (i, m) in self.moves.iter().enumerate() {
            let white = p.side_to_move() == super::types::Color::White;
            if white {
                tokens.push(format!("{}.", p.fullmove_number()));
            } else if i == 0 {
                tokens.push(format!("{}...", p.fullmove_number()));
            }
            tokens.push(render_san(&p, m).expect("PGN moves are legal"));
            p = p.apply_move(m).expect("PGN moves are legal");
        }
        tokens.push(self.result.clone());

        let mut line_len = 0;
        for t in tokens {
            if line_len > 0 && line_len + 1 + t.len() > 79 {
                out.push('\n');
                line_len = 0;
            } else if line_len > 0 {
                out.push(' ');
                line_len += 1;
            }
            line_len += t.len();
            out.push_str(&t);
        }
        out.push_str("\n\n");
        out
    }
}

fn escape(v: &str) -> String {
    v.replace('\\', "\\\\").replace('"', "\\\"")
}

fn unescape(v: &str) -> String {
    let mut out = String::with_capacity(v.len());
    let mut chars = v.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            if let Some(n) = chars.next() {
                out.push(n);
            }
        } else {
            out.push(c);
        }
    }
    out
}

fn parse_tag(line: &str) -> Option<(String, String)> {
    let inner = line.strip_prefix('[')?.strip_suffix(']')?;
    let (name, rest) = inner.split_once(char::is_whitespace)?;
    let value = rest.trim().strip_prefix('"')?.strip_suffix('"')?;
    Some((name.to_owned(), unescape(value)))
}

fn is_move_number(t: &str) -> bool {
    let digits = t.trim_end_matches('.');
    digits.len() < t.len() && !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
}

/// Parses every game in a PGN archive and replays it through the rules.
pub fn parse_pgn(text: &str) -> Result<Vec<PgnGame>, PgnError> {
    let mut games = Vec::new();
    let mut tags: Vec<(String, String)> = Vec::new();
    let mut movetext = String::new();

    let mut finish = |tags: &mut Vec<(String, String)>, movetext: &mut String| -> Result<(), PgnError> {
        if tags.is_empty() && movetext.trim().is_empty() {
            return Ok(());
        }
        let game = build_game(games.len() + 1, std::mem::take(tags), std::mem::take(movetext))?;
        games.push(game);
        Ok(())
    };

    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.starts_with('[') {
            if !movetext.trim().is_empty() {
                finish(&mut tags, &mut movetext)?;
            }
            let tag = parse_tag(trimmed).ok_or_else(|| PgnError::Tag {
                line: i + 1,
                text: trimmed.to_owned(),
            })?;
            tags.push(tag);
        } else if !trimmed.is_empty() {
            movetext.push_str(trimmed);
            movetext.push(' ');
        }
    }
    finish(&mut tags, &mut movetext)?;
    Ok(games)
}

fn build_game(index: usize, tags: Vec<(String, String)>, movetext: String) -> Result<PgnGame, PgnError> {
    let start = match tags.iter().find(|(k, _)| k == "FEN") {
        Some((_, fen)) => Position::from_fen(fen)?,
        None => Position::starting(),
    };
    let mut p = start.clone();
    let mut moves = Vec::new();
    let mut result = tags
        .iter()
        .find(|(k, _)| k == "Result")
        .map(|(_, v)| v.clone())
        .unwrap_or_else(|| "*".to_owned());

    let mut rest = movetext.as_str();
    let mut cleaned = String::with_capacity(rest.len());
    while let Some(open) = rest.find('{') {
        cleaned.push_str(&rest[..open]);
        let close = rest[open..].find('}').ok_or(PgnError::Comment(index))?;
        cleaned.push(' ');
        rest = &rest[open + close + 1..];
    }
    cleaned.push_str(rest);

    for token in cleaned.split_whitespace() {
        if RESULTS.contains(&token) {
            result = token.to_owned();
            continue;
        }
        // "12.e4" style: strip a glued move number.
        let token = match token.rfind('.') {
            Some(dot) if is_move_number(&token[..=dot]) => &token[dot + 1..],
            _ => token,
        };
        if token.is_empty() || token.starts_with('$') {
            continue;
        }
        let m = parse_move_text(token, &p).map_err(|source| PgnError::Move {
            game: index,
            ply: moves.len() + 1,
            source,
        })?;
        p = p.apply_move(&m).expect("parse_move_text returns legal moves");
        moves.push(m);
    }
    Ok(PgnGame {
        tags,
        start,
        moves,
        result,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mv(s: &str) -> Move {
        s.parse().unwrap()
    }

    #[test]
    fn writes_and_reads_back() {
        let game = PgnGame {
            tags: vec![
                ("Event".into(), "Test \"quoted\"".into()),
                ("White".into(), "a".into()),
                ("Black".into(), "b".into()),
                ("Result".into(), "0-1".into()),
            ],
            start: Position::starting(),
            moves: ["f2f3", "e7e5", "g2g4", "d8h4"].map(mv).to_vec(),
            result: "0-1".into(),
        };
        let text = game.to_pgn();
        assert!(text.ends_with("1. f3 e5 2. g4 Qh4# 0-1\n\n"), "{text}");
        let back = parse_pgn(&text).unwrap();
        assert_eq!(back, vec![game]);
    }

    #[test]
    fn non_initial_start_gets_fen_tag() {
        let start = Position::from_fen("3r4/6Rp/pk6/1p3B2/5N2/P3pbP1/1P5P/4K3 b - - 3 36").unwrap();
        let game = PgnGame {
            tags: vec![("Result".into(), "0-1".into())],
            start: start.clone(),
            moves: vec![mv("d8d1")],
            result: "0-1".into(),
        };
        let text = game.to_pgn();
        assert!(text.contains("[SetUp \"1\"]"));
        assert!(text.contains("36... Rd1# 0-1"), "{text}");
        let back = parse_pgn(&text).unwrap();
        assert_eq!(back[0].start, start);
        assert_eq!(back[0].moves, vec![mv("d8d1")]);
    }

    #[test]
    fn reads_comments_and_multiple_games() {
        let text = "[Event \"x\"]\n\n1.e4 {best by test} e5 2. Nf3 *\n\n[Event \"y\"]\n\n1. d4 1-0\n";
        let games = parse_pgn(text).unwrap();
        assert_eq!(games.len(), 2);
        assert_eq!(games[0].moves, ["e2e4", "e7e5", "g1f3"].map(mv).to_vec());
        assert_eq!(games[0].result, "*");
        assert_eq!(games[1].result, "1-0");
    }

    #[test]
    fn illegal_movetext_is_reported() {
        let err = parse_pgn("[Event \"x\"]\n\n1. e5 *\n").unwrap_err();
        assert!(matches!(err, PgnError::Move { game: 1, ply: 1, .. }));
    }
}
