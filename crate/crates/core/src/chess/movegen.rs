//! Legal move generation.
//!
//! Moves come out in a fixed, reproducible order: non-pawn pieces by
//! descending origin square (targets descending), then castling (king side
//! first), pawn captures, single pushes, double pushes and en passant. When the
//! side to move is in check, king moves are listed first. Feedback messages
//! print this list verbatim, so the order is part of the observable contract.

use super::bitboard::{
    bishop_attacks, king_attacks, knight_attacks, pawn_attacks, queen_attacks, rook_attacks, Bitboard,
};
use super::position::Position;
use super::types::{Color, Move, PieceKind, Square};

fn push_pawn_move(out: &mut Vec<Move>, from: Square, to: Square) {
    if to.rank() == 0 || to.rank() == 7 {
        for kind in PieceKind::PROMOTIONS {
            out.push(Move::with_promotion(from, to, kind));
        }
    } else {
        out.push(Move::new(from, to));
    }
}

impl Position {
    /// Pseudo-legal moves: correct piece movement, but the mover's king may be
    /// left attacked. Castling is already fully checked here.
    pub(crate) fn pseudo_legal_moves(&self) -> Vec<Move> {
        let us = self.side_to_move();
        let ours = self.color_pieces(us);
        let theirs = self.color_pieces(!us);
        let occupied = self.occupied();
        let mut out = Vec::with_capacity(64);

        let non_pawns = ours & !self.kind_pieces(PieceKind::Pawn);
        for from in non_pawns.iter_rev() {
            let kind = self.piece_at(from).expect("occupied").kind;
            let attacks = match kind {
                PieceKind::Knight => knight_attacks(from),
                PieceKind::Bishop => bishop_attacks(from, occupied),
                PieceKind::Rook => rook_attacks(from, occupied),
                PieceKind::Queen => queen_attacks(from, occupied),
                PieceKind::King => king_attacks(from),
                PieceKind::Pawn => unreachable!(),
            };
            for to in (attacks & !ours).iter_rev() {
                out.push(Move::new(from, to));
            }
        }

        self.castling_moves(&mut out);

        let pawns = self.pieces(us, PieceKind::Pawn);
        for from in pawns.iter_rev() {
            for to in (pawn_attacks(us, from) & theirs).iter_rev() {
                push_pawn_move(&mut out, from, to);
            }
        }

        let (single, double) = match us {
            Color::White => {
                let single = Bitboard(pawns.0 << 8) & !occupied;
                (single, Bitboard(single.0 << 8) & !occupied & Bitboard::rank(3))
            }
            Color::Black => {
                let single = Bitboard(pawns.0 >> 8) & !occupied;
                (single, Bitboard(single.0 >> 8) & !occupied & Bitboard::rank(4))
            }
        };
        let back: i8 = if us == Color::White { -8 } else { 8 };
        for to in single.iter_rev() {
            let from = to.offset(back).expect("on board");
            push_pawn_move(&mut out, from, to);
        }
        for to in double.iter_rev() {
            let from = to.offset(2 * back).expect("on board");
            out.push(Move::new(from, to));
        }

        if let Some(ep) = self.en_passant() {
            let capturers = pawns & pawn_attacks(!us, ep);
            for from in capturers.iter_rev() {
                out.push(Move::new(from, ep));
            }
        }

        out
    }

    fn castling_moves(&self, out: &mut Vec<Move>) {
        let us = self.side_to_move();
        let rights = self.castling();
        if !rights.king_side(us) && !rights.queen_side(us) {
            return;
        }
        let king = self.king_square(us);
        if self.is_attacked(king, !us) {
            return;
        }
        let rank = king.rank();
        let occupied = self.occupied();
        let sq = |file| Square::from_coords(file, rank).expect("in range");

        if rights.king_side(us) {
            let empty = [sq(5), sq(6)];
            if empty.iter().all(|s| !occupied.contains(*s))
                && empty.iter().all(|s| !self.is_attacked(*s, !us))
            {
                out.push(Move::new(king, sq(6)));
            }
        }
        if rights.queen_side(us) {
            let empty = [sq(3), sq(2), sq(1)];
            if empty.iter().all(|s| !occupied.contains(*s))
                && [sq(3), sq(2)].iter().all(|s| !self.is_attacked(*s, !us))
            {
                out.push(Move::new(king, sq(2)));
            }
        }
    }

    fn leaves_king_safe(&self, m: &Move) -> bool {
        let us = self.side_to_move();
        let next = self.play_unchecked(m);
        !next.is_attacked(next.king_square(us), !us)
    }

    /// Every legal move in the position, in generation order.
    pub fn legal_moves(&self) -> Vec<Move> {
        let mut moves: Vec<Move> = self
            .pseudo_legal_moves()
            .into_iter()
            .filter(|m| self.leaves_king_safe(m))
            .collect();
        if self.is_check() {
            let king = self.king_square(self.side_to_move());
            // Stable partition: king moves first, everything else keeps its order.
            let (mut kings, others): (Vec<Move>, Vec<Move>) =
                moves.into_iter().partition(|m| m.from == king);
            kings.extend(others);
            moves = kings;
        }
        moves
    }

    pub fn legal_move_count(&self) -> usize {
        self.pseudo_legal_moves()
            .iter()
            .filter(|m| self.leaves_king_safe(m))
            .count()
    }
}

/// Leaf count of the legal move tree at exactly `depth` plies.
pub fn perft(p: &Position, depth: u32) -> u64 {
    match depth {
        0 => 1,
        1 => p.legal_move_count() as u64,
        _ => p
            .legal_moves()
            .iter()
            .map(|m| perft(&p.play_unchecked(m), depth - 1))
            .sum(),
    }
}
