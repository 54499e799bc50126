//! Legal move generation and perft node counts.
//!
//! ```bash
//! cargo run --release --example perft -- 5
//! cargo run --release --example perft -- 3 "r3k2r/p1ppqpb1/bn2pnp1/3PN3/1p2P3/2N2Q1p/PPPBBPPP/R3K2R w KQkq - 0 1"
//! ```

use std::time::Instant;

use chess_modulo::chess::{perft, Position, STARTING_FEN};

fn main() {
    let mut args = std::env::args().skip(1);
    let depth: u32 = args.next().map_or(4, |d| d.parse().expect("depth is a number"));
    let fen = args.next().unwrap_or_else(|| STARTING_FEN.to_owned());
    let p = Position::from_fen(&fen).expect("valid FEN");

    let moves = p.legal_moves();
    println!("{} legal moves in {fen}", moves.len());
    // Divide: nodes below each root move.
    let mut total = 0;
    for m in &moves {
        let n = if depth > 1 {
            perft(&p.apply_move(m).unwrap(), depth - 1)
        } else {
            1
        };
        total += n;
        println!("{m}: {n}");
    }
    let t = Instant::now();
    assert_eq!(perft(&p, depth), total);
    println!("perft({depth}) = {total} in {:.2?}", t.elapsed());
}
