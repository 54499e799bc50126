//! Talks UCI to a local engine: evaluates a position and plays out its line.
//! The engine comes from `STOCKFISH_PATH` or `stockfish` on `PATH`.
//!
//! ```bash
//! cargo run --example engine_analysis -- "3r4/6Rp/pk6/1p3B2/5N2/P3pbP1/1P5P/4K3 b - - 3 36" 18
//! ```

use chess_modulo::chess::{render_san, Position};
use chess_modulo::engine::{locate_engine, EngineConfig, EngineLimits, EngineSession, Evaluator};

fn main() {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let fen = args
        .next()
        .unwrap_or_else(|| "3r4/6Rp/pk6/1p3B2/5N2/P3pbP1/1P5P/4K3 b - - 3 36".to_owned());
    let depth: u32 = args.next().map_or(15, |d| d.parse().expect("depth is a number"));
    let Some(path) = locate_engine() else {
        eprintln!("no engine found; set STOCKFISH_PATH");
        std::process::exit(4);
    };

    let mut engine = EngineSession::open(&EngineConfig::new(path)).expect("engine starts");
    let limits = EngineLimits::depth(depth);
    let mut p = Position::from_fen(&fen).expect("valid FEN");
    println!("{}", engine.name());
    for _ in 0..6 {
        let e = engine.evaluate(&p, &limits).expect("search finishes");
        let Some(best) = e.best else {
            println!("{:?}", e.eval);
            break;
        };
        println!("{:<45} {:?}  best {}", p.to_fen(), e.eval, render_san(&p, &best).unwrap());
        p = p.apply_move(&best).unwrap();
    }
}
