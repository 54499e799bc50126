//! Move text: UCI and SAN, in both directions.

use super::position::{IllegalMoveError, Position};
use super::types::{Move, PieceKind, Square};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MoveTextError {
    #[error("`{0}` is neither UCI nor SAN")]
    NoParse(String),
    #[error("`{0}` is not a legal move in this position")]
    Illegal(String),
    #[error("`{0}` matches more than one legal move")]
    AmbiguousSan(String),
}

/// Pattern of a SAN token with annotations already stripped.
#[derive(Debug, Clone, PartialEq, Eq)]
enum San {
    CastleKing,
    CastleQueen,
    Normal {
        kind: PieceKind,
        file: Option<u8>,
        rank: Option<u8>,
        to: Square,
        promotion: Option<PieceKind>,
    },
}

fn parse_san(token: &str) -> Option<San> {
    match token {
        "O-O" | "0-0" => return Some(San::CastleKing),
        "O-O-O" | "0-0-0" => return Some(San::CastleQueen),
        _ => {}
    }
    let bytes = token.as_bytes();
    if !token.is_ascii() || bytes.len() < 2 {
        return None;
    }
    let mut rest = bytes;

    let kind = match rest[0] {
        b'N' => PieceKind::Knight,
        b'B' => PieceKind::Bishop,
        b'R' => PieceKind::Rook,
        b'Q' => PieceKind::Queen,
        b'K' => PieceKind::King,
        _ => PieceKind::Pawn,
    };
    if kind != PieceKind::Pawn {
        rest = &rest[1..];
    }

    let mut promotion = None;
    if let Some(&last) = rest.last() {
        if let Some(k) = PieceKind::from_char(last as char).filter(|_| last.is_ascii_uppercase()) {
            if !k.is_promotion_target() {
                return None;
            }
            promotion = Some(k);
            rest = &rest[..rest.len() - 1];
            if rest.last() == Some(&b'=') {
                rest = &rest[..rest.len() - 1];
            }
        }
    }
    if promotion.is_some() && kind != PieceKind::Pawn {
        return None;
    }

    if rest.len() < 2 {
        return None;
    }
    let (head, dest) = rest.split_at(rest.len() - 2);
    let to: Square = std::str::from_utf8(dest).ok()?.parse().ok()?;

    let mut head = head;
    if let Some((&last, init)) = head.split_last() {
        if last == b'x' || last == b'-' {
            head = init;
        }
    }
    let (mut file, mut rank) = (None, None);
    match head {
        [] => {}
        [f @ b'a'..=b'h'] => file = Some(f - b'a'),
        [r @ b'1'..=b'8'] => rank = Some(r - b'1'),
        [f @ b'a'..=b'h', r @ b'1'..=b'8'] => {
            file = Some(f - b'a');
            rank = Some(r - b'1');
        }
        _ => return None,
    }
    if kind == PieceKind::Pawn && rank.is_some() {
        return None;
    }
    Some(San::Normal {
        kind,
        file,
        rank,
        to,
        promotion,
    })
}

fn strip_annotations(token: &str) -> &str {
    token.trim_end_matches(['+', '#', '!', '?'])
}

fn resolve_san(p: &Position, san: &San, original: &str) -> Result<Move, MoveTextError> {
    let legal = p.legal_moves();
    let candidates: Vec<Move> = match san {
        San::CastleKing | San::CastleQueen => {
            let to_file = if *san == San::CastleKing { 6 } else { 2 };
            legal
                .into_iter()
                .filter(|m| p.is_castling(m) && m.to.file() == to_file)
                .collect()
        }
        San::Normal {
            kind,
            file,
            rank,
            to,
            promotion,
        } => legal
            .into_iter()
            .filter(|m| {
                m.to == *to
                    && m.promotion == *promotion
                    && p.piece_at(m.from).map(|pc| pc.kind) == Some(*kind)
                    && file.is_none_or(|f| m.from.file() == f)
                    && rank.is_none_or(|r| m.from.rank() == r)
                    && !(*kind == PieceKind::King && p.is_castling(m))
            })
            .collect(),
    };
    match candidates.as_slice() {
        [] => Err(MoveTextError::Illegal(original.to_owned())),
        [m] => Ok(*m),
        _ => Err(MoveTextError::AmbiguousSan(original.to_owned())),
    }
}

/// Interprets `token` as UCI first, then SAN, and resolves it against the
/// legal moves of `p`. Trailing `+ # ! ?` annotations are ignored.
pub fn parse_move_text(token: &str, p: &Position) -> Result<Move, MoveTextError> {
    let stripped = strip_annotations(token.trim());
    if let Ok(m) = stripped.to_ascii_lowercase().parse::<Move>() {
        return if p.is_legal(&m) {
            Ok(m)
        } else {
            Err(MoveTextError::Illegal(token.to_owned()))
        };
    }
    match parse_san(stripped) {
        Some(san) => resolve_san(p, &san, token),
        None => Err(MoveTextError::NoParse(token.to_owned())),
    }
}

pub fn render_uci(m: &Move) -> String {
    m.to_uci()
}

/// Standard algebraic notation with minimal disambiguation and check/mate suffix.
pub fn render_san(p: &Position, m: &Move) -> Result<String, IllegalMoveError> {
    let next = p.apply_move(m)?;
    let mut out = String::new();
    if p.is_castling(m) {
        out.push_str(if m.to.file() == 6 { "O-O" } else { "O-O-O" });
    } else {
        let kind = p.piece_at(m.from).expect("legal move has a mover").kind;
        let capture = p.is_capture(m);
        if kind == PieceKind::Pawn {
            if capture {
                out.push(m.from.file_char());
            }
        } else {
            out.push(kind.char_upper());
            let rivals: Vec<Move> = p
                .legal_moves()
                .into_iter()
                .filter(|o| {
                    o.to == m.to
                        && o.from != m.from
                        && p.piece_at(o.from).map(|pc| pc.kind) == Some(kind)
                })
                .collect();
            if !rivals.is_empty() {
                let file_unique = rivals.iter().all(|o| o.from.file() != m.from.file());
                let rank_unique = rivals.iter().all(|o| o.from.rank() != m.from.rank());
                if file_unique {
                    out.push(m.from.file_char());
                } else if rank_unique {
                    out.push(m.from.rank_char());
                } else {
                    out.push(m.from.file_char());
                    out.push(m.from.rank_char());
                }
            }
        }
        if capture {
            out.push('x');
        }
        out.push_str(&m.to.to_string());
        if let Some(promo) = m.promotion {
            out.push('=');
            out.push(promo.char_upper());
        }
    }
    if next.is_checkmate() {
        out.push('#');
    } else if next.is_check() {
        out.push('+');
    }
    Ok(out)
}
