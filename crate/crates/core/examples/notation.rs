//! FEN, UCI and SAN round trips, and pulling a move out of free model text.
//!
//! ```bash
//! cargo run --example notation
//! ```

use chess_modulo::chess::{parse_move_text, render_san, Position};
use chess_modulo::response::{extract_move, sanitize, ParseOutcome};

const PIN_FEN: &str = "2q1nk1r/2r1pp1p/1p1p2p1/1R6/5B2/2Q1P3/5PPP/2R3K1 w - - 0 22";

fn main() {
    let p = Position::from_fen(PIN_FEN).unwrap();
    assert_eq!(p.to_fen(), PIN_FEN);

    println!("legal moves:");
    for m in p.legal_moves() {
        println!("  {:<6} {}", m.to_uci(), render_san(&p, &m).unwrap());
    }

    for token in ["c3h8", "Qh8#", "Qxc7", "Rxc7", "e2e4"] {
        match parse_move_text(token, &p) {
            Ok(m) => println!("{token:>6} -> {m}"),
            Err(e) => println!("{token:>6} -> rejected ({e})"),
        }
    }

    let replies = [
        "The best move is Qh8#.",
        "Best move: c3c7\nUser: thanks",
        "I would play Rxc7 here",
        "",
    ];
    for text in replies {
        let shown = sanitize(text).replace('\n', " / ");
        match extract_move(text, &p) {
            ParseOutcome::Parsed(m) => println!("{shown:?} parses as {m}"),
            ParseOutcome::ParseFailure(why) => println!("{shown:?} does not parse: {why}"),
        }
    }
}
