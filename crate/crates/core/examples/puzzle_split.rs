//! Loads a puzzle CSV (plain or .zst), withholds validation puzzles per
//! theme, and draws a seeded evaluation sample.
//!
//! ```bash
//! cargo run --release --example puzzle_split -- lichess_db_puzzle.csv.zst 1000
//! ```

use std::path::PathBuf;

use chess_modulo::datasets::{expand_puzzle, open_puzzles, sample_eval_set, theme_split};

fn main() {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mate_puzzles.csv"));
    let holdout: usize = args.next().map_or(10, |h| h.parse().expect("holdout is a number"));

    let split = theme_split(|| open_puzzles(&path), holdout, 42).expect("split");
    let m = &split.manifest;
    println!(
        "{} validation, {} train, {} dropped for sharing a position",
        m.validation_ids.len(),
        m.train_ids.len(),
        m.dropped_for_overlap
    );
    for (theme, count) in &m.theme_counts {
        println!("  {theme:<20} {count}");
    }

    let sample = sample_eval_set(&split.validation, "mateIn2", 5.min(m.theme_counts.get("mateIn2").copied().unwrap_or(0)), 7)
        .expect("sample");
    for z in &sample {
        let tasks = expand_puzzle(z).unwrap();
        let solution: Vec<String> = tasks.iter().map(|t| t.solution.to_uci()).collect();
        println!("{} {} -> {}", z.id, tasks[0].position.to_fen(), solution.join(" "));
    }
}
