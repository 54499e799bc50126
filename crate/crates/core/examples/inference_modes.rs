//! Normal, pass@k and modulo inference over the mate-puzzle fixture with a
//! noisy stand-in model, followed by the accuracy table.
//!
//! The model answers the mate-search best move with probability `skill`,
//! a random legal move otherwise, and now and then something unparseable.
//!
//! ```bash
//! cargo run --release --example inference_modes -- 0.4
//! ```

use std::path::Path;

use chess_modulo::datasets::{expand_puzzle, read_all, sample_eval_set};
use chess_modulo::engine::{EngineLimits, Evaluator, MateOracle};
use chess_modulo::metrics::{render_report, MetricsReport, ReportFormat, DEFAULT_CONFIDENCE};
use chess_modulo::model::{fen_from_prompt, GenerationParams, ModelError, TextModel};
use chess_modulo::response::RawResponse;
use chess_modulo::runner::{run_tasks, AttemptTask, InferenceConfig, InferenceMode};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct NoisyModel {
    skill: f64,
    rng: ChaCha8Rng,
    solver: MateOracle,
}

impl TextModel for NoisyModel {
    fn complete(&mut self, prompt: &str, _: &GenerationParams) -> Result<RawResponse, ModelError> {
        let p = fen_from_prompt(prompt).ok_or(ModelError::NoFenInPrompt)?;
        let roll: f64 = self.rng.random();
        let text = if roll < self.skill {
            self.solver.best_move(&p, &EngineLimits::depth(1))?.to_uci()
        } else if roll < 0.9 {
            p.legal_moves().choose(&mut self.rng).expect("non-terminal").to_uci()
        } else {
            "I think the knight should go somewhere".to_owned()
        };
        Ok(RawResponse::text(text))
    }
}

fn main() {
    env_logger::init();
    let skill: f64 = std::env::args().nth(1).map_or(0.4, |s| s.parse().expect("skill in [0, 1]"));
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mate_puzzles.csv");
    let (puzzles, _) = read_all(&fixture).expect("fixture loads");

    let mut tasks: Vec<AttemptTask> = Vec::new();
    for theme in ["mateIn1", "mateIn2"] {
        for z in sample_eval_set(&puzzles, theme, 15, 3).expect("enough puzzles") {
            tasks.extend(expand_puzzle(&z).unwrap().iter().map(|t| t.to_attempt()));
        }
    }

    let mut report = MetricsReport::new(DEFAULT_CONFIDENCE).unwrap();
    for mode in [InferenceMode::Normal, InferenceMode::PassAtK, InferenceMode::Modulo] {
        let cfg = InferenceConfig::new(mode);
        let mut ts = Vec::new();
        run_tasks(
            &tasks,
            &cfg,
            4,
            || {
                Ok(NoisyModel {
                    skill,
                    rng: ChaCha8Rng::seed_from_u64(99),
                    solver: MateOracle::new(3),
                })
            },
            || Ok(MateOracle::new(3)),
            |t| {
                ts.push(t.clone());
                Ok(())
            },
        )
        .expect("run completes");
        let queries: u32 = ts.iter().map(|t| t.queries_used).sum();
        println!("{mode}: {queries} queries over {} positions", ts.len());
        report.add_model("noisy", &ts).unwrap();
    }
    println!("\n{}", render_report(&report, ReportFormat::Markdown));
}
