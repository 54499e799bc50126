use std::fmt;
use std::str::FromStr;

use super::bitboard::{
    bishop_attacks, king_attacks, knight_attacks, pawn_attacks, rook_attacks, Bitboard,
};
use super::types::{Color, Move, Piece, PieceKind, Square};

pub const STARTING_FEN: &str = "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct CastlingRights {
    pub white_king: bool,
    pub white_queen: bool,
    pub black_king: bool,
    pub black_queen: bool,
}

impl CastlingRights {
    pub const ALL: CastlingRights = CastlingRights {
        white_king: true,
        white_queen: true,
        black_king: true,
        black_queen: true,
    };

    pub fn any(&self) -> bool {
        self.white_king || self.white_queen || self.black_king || self.black_queen
    }

    pub fn king_side(&self, color: Color) -> bool {
        match color {
            Color::White => self.white_king,
            Color::Black => self.black_king,
        }
    }

    pub fn queen_side(&self, color: Color) -> bool {
        match color {
            Color::White => self.white_queen,
            Color::Black => self.black_queen,
        }
    }

    fn clear_color(&mut self, color: Color) {
        match color {
            Color::White => {
                self.white_king = false;
                self.white_queen = false;
            }
            Color::Black => {
                self.black_king = false;
                self.black_queen = false;
            }
        }
    }

    /// Drops any right whose rook home square is touched.
    fn touch(&mut self, sq: Square) {
        match sq.index() {
            0 => self.white_queen = false,
            7 => self.white_king = false,
            56 => self.black_queen = false,
            63 => self.black_king = false,
            _ => {}
        }
    }

    fn to_fen(self) -> String {
        let mut s = String::new();
        for (flag, c) in [
            (self.white_king, 'K'),
            (self.white_queen, 'Q'),
            (self.black_king, 'k'),
            (self.black_queen, 'q'),
        ] {
            if flag {
                s.push(c);
            }
        }
        if s.is_empty() {
            s.push('-');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FenError {
    #[error("expected 6 space-separated fields, found {0}")]
    FieldCount(usize),
    #[error("malformed piece placement: {0}")]
    Placement(String),
    #[error("malformed side to move `{0}`")]
    SideToMove(String),
    #[error("malformed castling field `{0}`")]
    Castling(String),
    #[error("castling right `{0}` does not match king and rook placement")]
    CastlingPlacement(char),
    #[error("malformed en passant field `{0}`")]
    EnPassant(String),
    #[error("en passant square {0} is not consistent with a double pawn push")]
    EnPassantInconsistent(Square),
    #[error("malformed or out-of-range {field} `{value}`")]
    Clock { field: &'static str, value: String },
    #[error("{color} has {count} kings, expected exactly one")]
    KingCount { color: Color, count: u32 },
    #[error("pawn on the first or last rank")]
    PawnOnBackRank,
    #[error("side not to move ({0}) is in check")]
    OpponentInCheck(Color),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("illegal move {mv} in position {fen}")]
pub struct IllegalMoveError {
    pub mv: Move,
    pub fen: String,
}

/// A complete chess position.
///
/// Values are immutable once built; every constructor enforces the usual
/// validity rules (one king each, side not to move not in check, en passant
/// square backed by a double push), so code downstream can rely on them.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Position {
    by_color: [Bitboard; 2],
    by_kind: [Bitboard; 6],
    side_to_move: Color,
    castling: CastlingRights,
    en_passant: Option<Square>,
    halfmove_clock: u32,
    fullmove_number: u32,
}

impl Default for Position {
    fn default() -> Position {
        Position::starting()
    }
}

impl fmt::Debug for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Position({})", self.to_fen())
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_fen())
    }
}

impl FromStr for Position {
    type Err = FenError;

    fn from_str(s: &str) -> Result<Position, FenError> {
        Position::from_fen(s)
    }
}

impl Position {
    pub fn starting() -> Position {
        Position::from_fen(STARTING_FEN).expect("starting FEN is valid")
    }

    pub fn from_fen(text: &str) -> Result<Position, FenError> {
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(FenError::FieldCount(fields.len()));
        }

        let mut pos = Position {
            by_color: [Bitboard::EMPTY; 2],
            by_kind: [Bitboard::EMPTY; 6],
            side_to_move: Color::White,
            castling: CastlingRights::default(),
            en_passant: None,
            halfmove_clock: 0,
            fullmove_number: 1,
        };

        let ranks: Vec<&str> = fields[0].split('/').collect();
        if ranks.len() != 8 {
            return Err(FenError::Placement(format!(
                "expected 8 ranks, found {}",
                ranks.len()
            )));
        }
        for (i, rank_text) in ranks.iter().enumerate() {
            let rank = 7 - i as u8;
            let mut file = 0u8;
            let mut last_was_digit = false;
            for c in rank_text.chars() {
                if let Some(d) = c.to_digit(10) {
                    if !(1..=8).contains(&d) || last_was_digit {
                        return Err(FenError::Placement(format!("bad run length in `{rank_text}`")));
                    }
                    file += d as u8;
                    last_was_digit = true;
                } else {
                    let piece = Piece::from_fen_char(c).ok_or_else(|| {
                        FenError::Placement(format!("unknown piece `{c}`"))
                    })?;
                    if file >= 8 {
                        return Err(FenError::Placement(format!("rank `{rank_text}` too long")));
                    }
                    let sq = Square::from_coords(file, rank).expect("in range");
                    pos.put(sq, piece);
                    file += 1;
                    last_was_digit = false;
                }
                if file > 8 {
                    return Err(FenError::Placement(format!("rank `{rank_text}` too long")));
                }
            }
            if file != 8 {
                return Err(FenError::Placement(format!("rank `{rank_text}` too short")));
            }
        }

        pos.side_to_move = match fields[1] {
            "w" => Color::White,
            "b" => Color::Black,
            other => return Err(FenError::SideToMove(other.to_owned())),
        };

        if fields[2] != "-" {
            let mut seen = String::new();
            for c in fields[2].chars() {
                if seen.contains(c) {
                    return Err(FenError::Castling(fields[2].to_owned()));
                }
                seen.push(c);
                match c {
                    'K' => pos.castling.white_king = true,
                    'Q' => pos.castling.white_queen = true,
                    'k' => pos.castling.black_king = true,
                    'q' => pos.castling.black_queen = true,
                    _ => return Err(FenError::Castling(fields[2].to_owned())),
                }
            }
        }

        if fields[3] != "-" {
            let sq: Square = fields[3]
                .parse()
                .map_err(|_| FenError::EnPassant(fields[3].to_owned()))?;
            pos.en_passant = Some(sq);
        }

        pos.halfmove_clock = fields[4].parse().map_err(|_| FenError::Clock {
            field: "halfmove clock",
            value: fields[4].to_owned(),
        })?;
        pos.fullmove_number = match fields[5].parse::<u32>() {
            Ok(n) if n >= 1 => n,
            _ => {
                return Err(FenError::Clock {
                    field: "fullmove number",
                    value: fields[5].to_owned(),
                })
            }
        };

        pos.validate()?;
        Ok(pos)
    }

    fn validate(&self) -> Result<(), FenError> {
        for color in Color::ALL {
            let count = self.pieces(color, PieceKind::King).count();
            if count != 1 {
                return Err(FenError::KingCount { color, count });
            }
        }
        if (self.by_kind[PieceKind::Pawn.index()] & (Bitboard::rank(0) | Bitboard::rank(7)))
            .any()
        {
            return Err(FenError::PawnOnBackRank);
        }
        for (flag, c, color, king_sq, rook_sq) in [
            (self.castling.white_king, 'K', Color::White, 4, 7),
            (self.castling.white_queen, 'Q', Color::White, 4, 0),
            (self.castling.black_king, 'k', Color::Black, 60, 63),
            (self.castling.black_queen, 'q', Color::Black, 60, 56),
        ] {
            if flag
                && (self.piece_at(Square::new(king_sq)) != Some(Piece::new(color, PieceKind::King))
                    || self.piece_at(Square::new(rook_sq))
                        != Some(Piece::new(color, PieceKind::Rook)))
            {
                return Err(FenError::CastlingPlacement(c));
            }
        }
        if let Some(ep) = self.en_passant {
            let us = self.side_to_move;
            let (ep_rank, pushed_delta, origin_delta) = match us {
                Color::White => (5, -8i8, 8i8),
                Color::Black => (2, 8, -8),
            };
            let consistent = ep.rank() == ep_rank
                && self.piece_at(ep).is_none()
                && ep.offset(origin_delta).is_some_and(|s| self.piece_at(s).is_none())
                && ep.offset(pushed_delta).is_some_and(|s| {
                    self.piece_at(s) == Some(Piece::new(!us, PieceKind::Pawn))
                });
            if !consistent {
                return Err(FenError::EnPassantInconsistent(ep));
            }
        }
        let them = !self.side_to_move;
        if self.is_attacked(self.king_square(them), self.side_to_move) {
            return Err(FenError::OpponentInCheck(them));
        }
        Ok(())
    }

    pub fn to_fen(&self) -> String {
        format!(
            "{} {} {} {} {} {}",
            self.placement_fen(),
            self.side_to_move.fen_char(),
            self.castling.to_fen(),
            self.en_passant.map_or("-".to_owned(), |s| s.to_string()),
            self.halfmove_clock,
            self.fullmove_number
        )
    }

    fn placement_fen(&self) -> String {
        let mut out = String::with_capacity(64);
        for rank in (0..8).rev() {
            let mut empty = 0;
            for file in 0..8 {
                let sq = Square::from_coords(file, rank).expect("in range");
                match self.piece_at(sq) {
                    Some(p) => {
                        if empty > 0 {
                            out.push(char::from(b'0' + empty));
                            empty = 0;
                        }
                        out.push(p.fen_char());
                    }
                    None => empty += 1,
                }
            }
            if empty > 0 {
                out.push(char::from(b'0' + empty));
            }
            if rank > 0 {
                out.push('/');
            }
        }
        out
    }

    /// Identity of the position for deduplication: placement, side to move,
    /// castling rights and an en passant square only when a capture there is
    /// actually legal. Clocks are ignored.
    pub fn dedup_key(&self) -> String {
        let ep = match self.en_passant {
            Some(ep) if self.legal_moves().iter().any(|m| self.is_en_passant(m)) => ep.to_string(),
            _ => "-".to_owned(),
        };
        format!(
            "{} {} {} {}",
            self.placement_fen(),
            self.side_to_move.fen_char(),
            self.castling.to_fen(),
            ep
        )
    }

    #[inline]
    pub fn side_to_move(&self) -> Color {
        self.side_to_move
    }

    #[inline]
    pub fn castling(&self) -> CastlingRights {
        self.castling
    }

    #[inline]
    pub fn en_passant(&self) -> Option<Square> {
        self.en_passant
    }

    #[inline]
    pub fn halfmove_clock(&self) -> u32 {
        self.halfmove_clock
    }

    #[inline]
    pub fn fullmove_number(&self) -> u32 {
        self.fullmove_number
    }

    #[inline]
    pub fn occupied(&self) -> Bitboard {
        self.by_color[0] | self.by_color[1]
    }

    #[inline]
    pub fn color_pieces(&self, color: Color) -> Bitboard {
        self.by_color[color.index()]
    }

    #[inline]
    pub fn kind_pieces(&self, kind: PieceKind) -> Bitboard {
        self.by_kind[kind.index()]
    }

    #[inline]
    pub fn pieces(&self, color: Color, kind: PieceKind) -> Bitboard {
        self.by_color[color.index()] & self.by_kind[kind.index()]
    }

    pub fn piece_at(&self, sq: Square) -> Option<Piece> {
        let color = if self.by_color[0].contains(sq) {
            Color::White
        } else if self.by_color[1].contains(sq) {
            Color::Black
        } else {
            return None;
        };
        let kind = PieceKind::ALL
            .into_iter()
            .find(|k| self.by_kind[k.index()].contains(sq))?;
        Some(Piece { color, kind })
    }

    pub fn king_square(&self, color: Color) -> Square {
        self.pieces(color, PieceKind::King)
            .lsb()
            .expect("validated positions always have a king")
    }

    /// Pieces of `by` attacking `sq`, given an explicit occupancy.
    pub fn attackers_with(&self, sq: Square, by: Color, occupied: Bitboard) -> Bitboard {
        let them = self.by_color[by.index()];
        let diag = self.by_kind[PieceKind::Bishop.index()] | self.by_kind[PieceKind::Queen.index()];
        let ortho = self.by_kind[PieceKind::Rook.index()] | self.by_kind[PieceKind::Queen.index()];
        them & ((pawn_attacks(!by, sq) & self.by_kind[PieceKind::Pawn.index()])
            | (knight_attacks(sq) & self.by_kind[PieceKind::Knight.index()])
            | (king_attacks(sq) & self.by_kind[PieceKind::King.index()])
            | (bishop_attacks(sq, occupied) & diag)
            | (rook_attacks(sq, occupied) & ortho))
    }

    pub fn attackers(&self, sq: Square, by: Color) -> Bitboard {
        self.attackers_with(sq, by, self.occupied())
    }

    pub fn is_attacked(&self, sq: Square, by: Color) -> bool {
        self.attackers(sq, by).any()
    }

    pub fn checkers(&self) -> Bitboard {
        let us = self.side_to_move;
        self.attackers(self.king_square(us), !us)
    }

    pub fn is_check(&self) -> bool {
        self.checkers().any()
    }

    pub fn is_capture(&self, m: &Move) -> bool {
        self.color_pieces(!self.side_to_move).contains(m.to) || self.is_en_passant(m)
    }

    pub fn is_en_passant(&self, m: &Move) -> bool {
        Some(m.to) == self.en_passant
            && self.pieces(self.side_to_move, PieceKind::Pawn).contains(m.from)
            && m.from.file() != m.to.file()
    }

    pub fn is_castling(&self, m: &Move) -> bool {
        self.pieces(self.side_to_move, PieceKind::King).contains(m.from)
            && (m.from.file() as i8 - m.to.file() as i8).abs() == 2
            && m.from.rank() == m.to.rank()
    }

    /// Applies `m` after checking it is legal.
    pub fn apply_move(&self, m: &Move) -> Result<Position, IllegalMoveError> {
        if self.is_legal(m) {
            Ok(self.play_unchecked(m))
        } else {
            Err(IllegalMoveError {
                mv: *m,
                fen: self.to_fen(),
            })
        }
    }

    pub fn is_legal(&self, m: &Move) -> bool {
        self.legal_moves().contains(m)
    }

    #[inline]
    fn put(&mut self, sq: Square, piece: Piece) {
        self.by_color[piece.color.index()].set(sq);
        self.by_kind[piece.kind.index()].set(sq);
    }

    #[inline]
    fn remove(&mut self, sq: Square, piece: Piece) {
        self.by_color[piece.color.index()].clear(sq);
        self.by_kind[piece.kind.index()].clear(sq);
    }

    /// Plays a pseudo-legal move without verifying king safety.
    pub(crate) fn play_unchecked(&self, m: &Move) -> Position {
        let mut next = self.clone();
        let us = self.side_to_move;
        let mover = self.piece_at(m.from).expect("move from an occupied square");
        let captured = self.piece_at(m.to);
        let en_passant = mover.kind == PieceKind::Pawn && Some(m.to) == self.en_passant
            && m.from.file() != m.to.file();

        next.en_passant = None;
        if let Some(c) = captured {
            next.remove(m.to, c);
        }
        next.remove(m.from, mover);
        let placed = match m.promotion {
            Some(kind) => Piece::new(us, kind),
            None => mover,
        };
        next.put(m.to, placed);

        if en_passant {
            let victim = Square::new(match us {
                Color::White => m.to.index() as u8 - 8,
                Color::Black => m.to.index() as u8 + 8,
            });
            next.remove(victim, Piece::new(!us, PieceKind::Pawn));
        }

        if mover.kind == PieceKind::King {
            next.castling.clear_color(us);
            let df = m.to.file() as i8 - m.from.file() as i8;
            if df.abs() == 2 {
                let rank = m.from.rank();
                let (rook_from, rook_to) = if df > 0 { (7, 5) } else { (0, 3) };
                let rf = Square::from_coords(rook_from, rank).expect("in range");
                let rt = Square::from_coords(rook_to, rank).expect("in range");
                let rook = Piece::new(us, PieceKind::Rook);
                next.remove(rf, rook);
                next.put(rt, rook);
            }
        }
        next.castling.touch(m.from);
        next.castling.touch(m.to);

        if mover.kind == PieceKind::Pawn && (m.to.rank() as i8 - m.from.rank() as i8).abs() == 2 {
            next.en_passant = Some(Square::new((m.from.index() as u8 + m.to.index() as u8) / 2));
        }

        next.halfmove_clock = if mover.kind == PieceKind::Pawn || captured.is_some() {
            0
        } else {
            self.halfmove_clock + 1
        };
        if us == Color::Black {
            next.fullmove_number += 1;
        }
        next.side_to_move = !us;
        next
    }

    pub fn is_checkmate(&self) -> bool {
        self.is_check() && self.legal_moves().is_empty()
    }

    pub fn is_stalemate(&self) -> bool {
        !self.is_check() && self.legal_moves().is_empty()
    }

    /// King-and-minor-piece-or-less endings where mate is impossible.
    pub fn is_insufficient_material(&self) -> bool {
        let heavy = self.kind_pieces(PieceKind::Pawn)
            | self.kind_pieces(PieceKind::Rook)
            | self.kind_pieces(PieceKind::Queen);
        if heavy.any() {
            return false;
        }
        let minors = self.kind_pieces(PieceKind::Knight) | self.kind_pieces(PieceKind::Bishop);
        minors.count() <= 1
    }
}
