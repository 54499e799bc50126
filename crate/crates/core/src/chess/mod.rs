//! Chess rules kernel: board state, FEN, legal moves, SAN/UCI text.

mod bitboard;
mod movegen;
mod notation;
mod pgn;
mod position;
mod types;

pub use bitboard::Bitboard;
pub use movegen::perft;
pub use notation::{parse_move_text, render_san, render_uci, MoveTextError};
pub use pgn::{parse_pgn, PgnError, PgnGame};
pub use position::{CastlingRights, FenError, IllegalMoveError, Position, STARTING_FEN};
pub use types::{Color, Move, ParseMoveError, ParseSquareError, Piece, PieceKind, Square};
