use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chess::{Color, Position};
use crate::engine::{
    play_game_from, EngineConfig, EngineError, EngineLimits, EvalCache, Evaluator, Game, GameOutcome,
    DEFAULT_MAX_PLIES,
};

use super::{CorpusRecord, DatasetError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfPlayPlan {
    pub base: EngineConfig,
    pub levels: Vec<u8>,
    pub games_per_level: u32,
    /// Search limits for moves played in the games.
    pub limits: EngineLimits,
    /// Search limits for the base engine's corpus labels.
    pub label_limits: EngineLimits,
    pub max_plies: usize,
    /// Random legal moves played before the engines take over; zero keeps
    /// every game starting from the initial position.
    pub random_opening_plies: u32,
    pub seed: u64,
    pub workers: usize,
}

impl SelfPlayPlan {
    pub fn new(base: EngineConfig, levels: Vec<u8>, games_per_level: u32, limits: EngineLimits) -> SelfPlayPlan {
        SelfPlayPlan {
            base,
            levels,
            games_per_level,
            limits,
            label_limits: limits,
            max_plies: DEFAULT_MAX_PLIES,
            random_opening_plies: 0,
            seed: 0,
            workers: 1,
        }
    }

    /// Levels 0 to 20, fifty games each.
    pub fn full_scale(base: EngineConfig, limits: EngineLimits) -> SelfPlayPlan {
        SelfPlayPlan::new(base, (0..=20).collect(), 50, limits)
    }

    pub fn total_games(&self) -> usize {
        self.levels.len() * self.games_per_level as usize
    }

    /// Every game to play. Within a level the base engine alternates
    /// colours, starting with White.
    pub fn schedule(&self) -> Vec<Pairing> {
        let mut out = Vec::with_capacity(self.total_games());
        for &level in &self.levels {
            for g in 0..self.games_per_level {
                out.push(Pairing {
                    round: out.len() as u32 + 1,
                    level,
                    base_is_white: g % 2 == 0,
                });
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        self.base.validate()?;
        self.limits.validate()?;
        self.label_limits.validate()?;
        if let Some(l) = self.levels.iter().find(|&&l| l > 20) {
            return Err(DatasetError::Invalid(format!("skill level {l} is above 20")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pairing {
    pub round: u32,
    pub level: u8,
    pub base_is_white: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelTally {
    pub base_white: u32,
    pub base_black: u32,
    pub base_wins: u32,
    pub level_wins: u32,
    pub draws: u32,
    pub aborted: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelfPlayStats {
    pub games: usize,
    pub aborted: usize,
    /// Labeled position occurrences.
    pub positions: usize,
    pub unique_positions: usize,
    /// Share of occurrences whose position already appeared in an earlier game.
    pub cross_game_overlap: f64,
    pub unlabeled: usize,
    pub per_level: BTreeMap<u8, LevelTally>,
}

#[derive(Debug, Clone)]
pub struct SelfPlayOutput {
    pub games: Vec<Game>,
    pub records: Vec<CorpusRecord>,
    pub stats: SelfPlayStats,
}

struct Played {
    pairing: Pairing,
    game: Game,
    records: Vec<CorpusRecord>,
    unlabeled: usize,
}

fn opening(plan: &SelfPlayPlan, round: u32) -> Position {
    let mut p = Position::starting();
    if plan.random_opening_plies == 0 {
        return p;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed ^ (u64::from(round) << 32));
    for _ in 0..plan.random_opening_plies {
        let Some(m) = p.legal_moves().choose(&mut rng).copied() else {
            break;
        };
        p = p.apply_move(&m).expect("generated move is legal");
    }
    p
}

fn play_one<E: Evaluator>(
    plan: &SelfPlayPlan,
    pairing: Pairing,
    open: &(impl Fn(&EngineConfig) -> Result<E, EngineError> + Sync),
    labeler: &mut Option<EvalCache<E>>,
) -> Played {
    let level_cfg = plan.base.clone().with_skill_level(pairing.level);
    let (white_cfg, black_cfg) = if pairing.base_is_white {
        (&plan.base, &level_cfg)
    } else {
        (&level_cfg, &plan.base)
    };
    let start = opening(plan, pairing.round);
    let mut game = match (open(white_cfg), open(black_cfg)) {
        (Ok(mut w), Ok(mut b)) => play_game_from(start.clone(), &mut w, &mut b, &plan.limits, plan.max_plies),
        (Err(e), _) | (_, Err(e)) => Game {
            white: String::new(),
            black: String::new(),
            round: None,
            start_fen: start.to_fen(),
            moves: Vec::new(),
            outcome: GameOutcome::Aborted { reason: e.to_string() },
        },
    };
    game.white = white_cfg.label();
    game.black = black_cfg.label();
    game.round = Some(pairing.round);

    let mut records = Vec::new();
    let mut unlabeled = 0;
    for (p, _) in game.positions() {
        if labeler.is_none() {
            *labeler = open(&plan.base).ok().map(EvalCache::new);
        }
        let label = match labeler.as_mut() {
            Some(l) => l.best_move(&p, &plan.label_limits),
            None => Err(EngineError::Exited),
        };
        match label.map_err(DatasetError::from).and_then(|m| CorpusRecord::new(&p, m)) {
            Ok(r) => records.push(r),
            Err(e) => {
                log::warn!("round {}: could not label {}: {e}", pairing.round, p.to_fen());
                *labeler = None;
                unlabeled += 1;
            }
        }
    }
    Played {
        pairing,
        game,
        records,
        unlabeled,
    }
}

/// Plays the base engine against each skill level and labels every position
/// reached with the base engine's best move. A game whose engines fail is
/// kept as aborted; the run goes on.
pub fn generate_selfplay_corpus<E, F>(plan: &SelfPlayPlan, open: F) -> Result<SelfPlayOutput, DatasetError>
where
    E: Evaluator,
    F: Fn(&EngineConfig) -> Result<E, EngineError> + Sync,
{
    plan.validate()?;
    let schedule = plan.schedule();
    let next = AtomicUsize::new(0);
    let done: Mutex<Vec<Played>> = Mutex::new(Vec::with_capacity(schedule.len()));
    let workers = plan.workers.clamp(1, schedule.len().max(1));
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| {
                let mut labeler = None;
                loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(&pairing) = schedule.get(i) else { break };
                    let played = play_one(plan, pairing, &open, &mut labeler);
                    log::info!(
                        "round {} (level {}): {} in {} plies",
                        pairing.round,
                        pairing.level,
                        played.game.outcome.termination(),
                        played.game.moves.len()
                    );
                    done.lock().expect("no worker panics while holding the lock").push(played);
                }
            });
        }
    });
    let mut played = done.into_inner().expect("workers have finished");
    played.sort_by_key(|p| p.pairing.round);
    Ok(assemble(played))
}

fn assemble(played: Vec<Played>) -> SelfPlayOutput {
    let mut stats = SelfPlayStats::default();
    let mut first_seen: HashMap<String, usize> = HashMap::new();
    let mut repeats = 0;
    let mut games = Vec::with_capacity(played.len());
    let mut records = Vec::new();
    for (gi, p) in played.into_iter().enumerate() {
        let tally = stats.per_level.entry(p.pairing.level).or_default();
        if p.pairing.base_is_white {
            tally.base_white += 1;
        } else {
            tally.base_black += 1;
        }
        match p.game.outcome {
            GameOutcome::Aborted { .. } => {
                tally.aborted += 1;
                stats.aborted += 1;
            }
            GameOutcome::Checkmate { winner } => {
                let base_color = if p.pairing.base_is_white { Color::White } else { Color::Black };
                if winner == base_color {
                    tally.base_wins += 1;
                } else {
                    tally.level_wins += 1;
                }
            }
            _ => tally.draws += 1,
        }
        for r in &p.records {
            let first = *first_seen.entry(r.position().dedup_key()).or_insert(gi);
            if first != gi {
                repeats += 1;
            }
        }
        stats.unlabeled += p.unlabeled;
        stats.positions += p.records.len();
        records.extend(p.records);
        games.push(p.game);
    }
    stats.games = games.len();
    stats.unique_positions = first_seen.len();
    stats.cross_game_overlap = if stats.positions == 0 {
        0.0
    } else {
        repeats as f64 / stats.positions as f64
    };
    SelfPlayOutput { games, records, stats }
}
