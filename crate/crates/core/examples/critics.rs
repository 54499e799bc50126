//! The two critics on their own: legality first, then whether the move
//! keeps or improves the evaluation. Uses a local engine when one is
//! installed, otherwise the built-in mate search.
//!
//! ```bash
//! cargo run --example critics
//! ```

use chess_modulo::chess::Position;
use chess_modulo::engine::{locate_engine, EngineConfig, EngineLimits, EngineSession, Evaluator, MateOracle};
use chess_modulo::verify::{critic_accuracy, critic_validity, GradingPolicy, ValidityOutcome};

const ROOK_MATE_FEN: &str = "3r4/6Rp/pk6/1p3B2/5N2/P3pbP1/1P5P/4K3 b - - 3 36";

fn main() {
    let mut oracle: Box<dyn Evaluator> = match locate_engine() {
        Some(path) => Box::new(EngineSession::open(&EngineConfig::new(path)).expect("engine starts")),
        None => Box::new(MateOracle::default()),
    };
    let policy = GradingPolicy {
        oracle_limits: EngineLimits::depth(15),
        ..GradingPolicy::for_modulo()
    };
    let p = Position::from_fen(ROOK_MATE_FEN).unwrap();
    println!("oracle: {}", oracle.name());

    for reply in ["Rxc7", "f3e2", "d8d1"] {
        println!("\n> {reply}");
        match critic_validity(&p, reply) {
            ValidityOutcome::Rejection { feedback, .. } => println!("{feedback}"),
            ValidityOutcome::Parsed(m) => {
                let v = critic_accuracy(&p, &m, &mut oracle, &policy, &[]).expect("oracle answers");
                println!("{}", v.kind.tag());
                if let Some(f) = v.feedback {
                    println!("{f}");
                }
            }
        }
    }
}
