//! Desk-scale self-play: the base engine against two skill levels, PGN out,
//! every position labeled with the base engine's move.
//!
//! ```bash
//! cargo run --release --example selfplay_corpus -- 0,10 2 5
//! ```

use std::io::stdout;

use chess_modulo::datasets::{build_corpus, generate_selfplay_corpus, SelfPlayPlan};
use chess_modulo::engine::{locate_engine, EngineConfig, EngineLimits, EngineSession};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let levels: Vec<u8> = args
        .next()
        .unwrap_or_else(|| "0,10".into())
        .split(',')
        .map(|l| l.parse().expect("level 0..=20"))
        .collect();
    let games: u32 = args.next().map_or(2, |g| g.parse().unwrap());
    let depth: u32 = args.next().map_or(5, |d| d.parse().unwrap());
    let Some(path) = locate_engine() else {
        eprintln!("no engine found; set STOCKFISH_PATH");
        std::process::exit(4);
    };

    let mut plan = SelfPlayPlan::new(EngineConfig::new(path), levels, games, EngineLimits::depth(depth));
    plan.max_plies = 200;
    plan.workers = 2;
    let out = generate_selfplay_corpus(&plan, |cfg: &EngineConfig| EngineSession::open(cfg)).expect("valid plan");
    for g in &out.games {
        println!("{}", g.to_pgn());
    }
    let stats = build_corpus(out.records.iter().take(5).cloned(), stdout()).unwrap();
    println!("... first {} of {} corpus lines", stats.records, out.records.len());
    println!("{}", serde_json::to_string_pretty(&out.stats).unwrap());
}
