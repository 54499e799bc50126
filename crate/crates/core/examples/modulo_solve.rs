//! One verifier-loop attempt with a scripted model, printed as the
//! user / model / verifier exchange.
//!
//! ```bash
//! cargo run --example modulo_solve
//! cargo run --example modulo_solve -- "<FEN>" reply1 reply2 ...
//! ```

use chess_modulo::chess::Position;
use chess_modulo::engine::{locate_engine, EngineConfig, EngineLimits, EngineSession, Evaluator, MateOracle};
use chess_modulo::model::ScriptedModel;
use chess_modulo::runner::{render_trace, run_modulo, AttemptTask, InferenceConfig, InferenceMode};

fn main() {
    let mut args = std::env::args().skip(1);
    let fen = args
        .next()
        .unwrap_or_else(|| "3r4/6Rp/pk6/1p3B2/5N2/P3pbP1/1P5P/4K3 b - - 3 36".to_owned());
    let mut replies: Vec<String> = args.collect();
    if replies.is_empty() {
        replies = vec!["Ke8".into(), "f3e2".into(), "d8d1".into()];
    }

    let mut oracle: Box<dyn Evaluator> = match locate_engine() {
        Some(path) => Box::new(EngineSession::open(&EngineConfig::new(path)).expect("engine starts")),
        None => Box::new(MateOracle::default()),
    };
    let mut cfg = InferenceConfig::new(InferenceMode::Modulo);
    cfg.critic.oracle_limits = EngineLimits::depth(15);
    cfg.grading.oracle_limits = EngineLimits::depth(15);

    let p = Position::from_fen(&fen).expect("valid FEN");
    let task = AttemptTask::for_position("example", &p, None);
    let mut model = ScriptedModel::new(replies);
    let t = run_modulo(&mut model, &mut oracle, &task, &cfg);
    print!("{}", render_trace(&t));
}
