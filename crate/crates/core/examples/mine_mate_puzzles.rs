//! Mines mate-in-N puzzles from engine games and writes them as a
//! puzzle CSV with the usual ten columns.
//!
//! Weak skill levels play each other from short random openings; every
//! position where the side to move has a forced mate in 1 to 3 becomes a
//! puzzle whose setup move is the move that allowed it. The mate distance is
//! confirmed by exhaustive search, so the themes are exact.
//!
//! ```bash
//! cargo run --release --example mine_mate_puzzles -- \
//!     --out crates/core/tests/fixtures/mate_puzzles.csv --mate1 60 --mate2 25 --mate3 25
//! ```

use std::collections::HashSet;
use std::fs::File;
use std::path::PathBuf;

use chess_modulo::chess::Position;
use chess_modulo::datasets::{write_puzzles, Puzzle};
use chess_modulo::engine::{
    locate_engine, play_game_from, EngineConfig, EngineEval, EngineLimits, EngineSession, Evaluator, MateOracle,
};
use clap::Parser;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

#[derive(Parser)]
struct Args {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    engine: Option<PathBuf>,
    #[arg(long, default_value_t = 60)]
    mate1: usize,
    #[arg(long, default_value_t = 25)]
    mate2: usize,
    #[arg(long, default_value_t = 25)]
    mate3: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    max_games: usize,
}

fn random_opening(rng: &mut ChaCha8Rng, plies: usize) -> Position {
    let mut p = Position::starting();
    for _ in 0..plies {
        let Some(m) = p.legal_moves().choose(rng).copied() else { break };
        p = p.apply_move(&m).unwrap();
    }
    p
}

/// The forced line from `p` played out by the engine: solver moves and
/// defender replies, ending in mate after exactly `2k - 1` plies.
fn mating_line(judge: &mut EngineSession, p: &Position, k: u32) -> Option<Vec<chess_modulo::chess::Move>> {
    let limits = EngineLimits::depth(16);
    let mut line = Vec::new();
    let mut q = p.clone();
    for _ in 0..(2 * k - 1) {
        let m = judge.best_move(&q, &limits).ok()?;
        q = q.apply_move(&m).ok()?;
        line.push(m);
        if q.legal_moves().is_empty() {
            break;
        }
    }
    (line.len() == (2 * k - 1) as usize && q.is_checkmate()).then_some(line)
}

fn shortest_mate(p: &Position, k: u32) -> Option<u32> {
    let e = MateOracle::new(2 * k - 1).evaluate(p, &EngineLimits::depth(1)).ok()?;
    match e.eval {
        EngineEval::MateIn(n) if n > 0 => Some(n as u32),
        _ => None,
    }
}

fn puzzle_id(fen: &str, setup: &str) -> String {
    let d = Sha256::digest(format!("{fen} {setup}"));
    hex::encode(&d[..3])
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let path = args.engine.or_else(locate_engine).expect("no engine: pass --engine or set STOCKFISH_PATH");
    let base = EngineConfig::new(path);
    let mut judge = EngineSession::open(&base).expect("engine starts");
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let wanted = [args.mate1, args.mate2, args.mate3];
    let mut found: [Vec<Puzzle>; 3] = Default::default();
    let mut seen = HashSet::new();
    let scan = EngineLimits::depth(10);

    for game_no in 0..args.max_games {
        if found.iter().zip(wanted).all(|(f, w)| f.len() >= w) {
            break;
        }
        let (lw, lb) = (rng.random_range(0..=6u8), rng.random_range(0..=6u8));
        let mut white = EngineSession::open(&base.clone().with_skill_level(lw)).expect("engine starts");
        let mut black = EngineSession::open(&base.clone().with_skill_level(lb)).expect("engine starts");
        let start = random_opening(&mut rng, 6);
        let game = play_game_from(start, &mut white, &mut black, &EngineLimits::depth(5), 300);
        let positions = game.positions();
        for (i, (before, setup)) in positions.iter().enumerate() {
            let p = match positions.get(i + 1) {
                Some((p, _)) => p.clone(),
                None => game.final_position(),
            };
            if p.legal_moves().is_empty() || !seen.insert(p.dedup_key()) {
                continue;
            }
            let Ok(e) = judge.evaluate(&p, &scan) else { continue };
            let EngineEval::MateIn(k) = e.eval else { continue };
            if !(1..=3).contains(&k) || found[k as usize - 1].len() >= wanted[k as usize - 1] {
                continue;
            }
            let k = k as u32;
            if shortest_mate(&p, k) != Some(k) {
                continue;
            }
            let Some(line) = mating_line(&mut judge, &p, k) else { continue };
            let fen = before.to_fen();
            let mut moves = vec![*setup];
            moves.extend(line);
            let extra = ["oneMove", "short", "long"][k as usize - 1];
            let z = Puzzle {
                id: puzzle_id(&fen, &setup.to_uci()),
                fen,
                moves,
                rating: 1500,
                themes: vec!["mate".into(), format!("mateIn{k}"), extra.into()],
                game_url: String::new(),
            };
            if z.validate().is_ok() {
                log::info!("game {game_no}: mateIn{k} {}", z.id);
                found[k as usize - 1].push(z);
            }
        }
    }
    let all: Vec<Puzzle> = found.into_iter().flatten().collect();
    write_puzzles(File::create(&args.out).expect("output file"), &all).expect("write puzzles");
    println!("wrote {} puzzles to {}", all.len(), args.out.display());
}
