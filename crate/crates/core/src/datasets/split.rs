use std::collections::{BTreeMap, BinaryHeap, HashSet};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DatasetError, Puzzle};

pub const DEFAULT_HOLDOUT: usize = 1000;
pub const DEDUP_KEY_KIND: &str = "fen-placement-side-castling-ep";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub holdout: usize,
    pub dedup_key: String,
    pub seed: u64,
    pub validation_ids: Vec<String>,
    pub train_ids: Vec<String>,
    /// Validation puzzles sampled under each theme. A puzzle sampled under
    /// several themes counts once in the total and once for each theme.
    pub theme_counts: BTreeMap<String, usize>,
    /// Puzzles left out of training because a position also occurs in validation.
    pub dropped_for_overlap: usize,
}

/// The manifest plus the validation puzzles themselves.
#[derive(Debug, Clone)]
pub struct Split {
    pub manifest: SplitManifest,
    pub validation: Vec<Puzzle>,
}

/// Seeded sort key for `id` under `theme`. Sampling the smallest keys is a
/// uniform draw that does not depend on input order.
fn sample_key(seed: u64, theme: &str, id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(theme.as_bytes());
    h.update([0]);
    h.update(id.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}

fn position_keys(z: &Puzzle) -> Vec<String> {
    z.line()
        .map(|line| line.iter().map(|p| p.dedup_key()).collect())
        .unwrap_or_default()
}

/// Withholds up to `holdout` puzzles per theme for validation and puts the
/// rest in training. `source` is called twice and must yield the same
/// puzzles both times. Training puzzles that pass through any validation
/// position are dropped.
pub fn theme_split<I, F>(source: F, holdout: usize, seed: u64) -> Result<Split, DatasetError>
where
    F: Fn() -> Result<I, DatasetError>,
    I: Iterator<Item = Result<Puzzle, DatasetError>>,
{
    if holdout == 0 {
        return Err(DatasetError::Invalid("holdout must be at least 1".into()));
    }
    // Per theme, a max-heap of the `holdout` smallest keys seen so far.
    let mut heaps: BTreeMap<String, BinaryHeap<(u64, String)>> = BTreeMap::new();
    let mut kept: BTreeMap<String, Puzzle> = BTreeMap::new();
    for z in source()? {
        let z = z?;
        let mut wanted = false;
        for theme in &z.themes {
            let key = sample_key(seed, theme, &z.id);
            let heap = heaps.entry(theme.clone()).or_default();
            if heap.len() < holdout {
                heap.push((key, z.id.clone()));
                wanted = true;
            } else if heap.peek().is_some_and(|(top, _)| key < *top) {
                heap.pop();
                heap.push((key, z.id.clone()));
                wanted = true;
            }
        }
        if wanted {
            kept.insert(z.id.clone(), z);
        }
    }

    let mut validation = Vec::new();
    let mut chosen: HashSet<String> = HashSet::new();
    let mut theme_counts = BTreeMap::new();
    for (theme, heap) in heaps {
        let mut picks = heap.into_sorted_vec();
        picks.sort();
        theme_counts.insert(theme, picks.len());
        for (_, id) in picks {
            if chosen.insert(id.clone()) {
                validation.push(kept[&id].clone());
            }
        }
    }
    drop(kept);

    let held: HashSet<String> = validation.iter().flat_map(position_keys).collect();
    let mut train_ids = Vec::new();
    let mut dropped = 0;
    for z in source()? {
        let z = z?;
        if chosen.contains(&z.id) {
            continue;
        }
        if position_keys(&z).iter().any(|k| held.contains(k)) {
            dropped += 1;
        } else {
            train_ids.push(z.id);
        }
    }
    log::info!(
        "split: {} validation, {} train, {dropped} dropped for position overlap",
        validation.len(),
        train_ids.len()
    );
    Ok(Split {
        manifest: SplitManifest {
            holdout,
            dedup_key: DEDUP_KEY_KIND.to_owned(),
            seed,
            validation_ids: validation.iter().map(|z| z.id.clone()).collect(),
            train_ids,
            theme_counts,
            dropped_for_overlap: dropped,
        },
        validation,
    })
}

/// A uniform sample of `n` puzzles carrying `theme`, stable for a given seed.
pub fn sample_eval_set(validation: &[Puzzle], theme: &str, n: usize, seed: u64) -> Result<Vec<Puzzle>, DatasetError> {
    let mut pool: Vec<&Puzzle> = validation.iter().filter(|z| z.has_theme(theme)).collect();
    if n > pool.len() {
        return Err(DatasetError::NotEnough {
            theme: theme.to_owned(),
            wanted: n,
            available: pool.len(),
        });
    }
    pool.sort_by(|a, b| a.id.cmp(&b.id));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample(&mut rng, pool.len(), n)
        .into_iter()
        .map(|i| pool[i].clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chess::Position;
    use proptest::prelude::*;

    /// Distinct puzzles: a lone white king on one of 32 squares walks a step.
    fn synthetic(n: usize, themes: &[&[&str]]) -> Vec<Puzzle> {
        (0..n)
            .map(|i| {
                let (file, rank) = (i % 8, 3 + (i / 8) % 4);
                let rows: Vec<String> = (1..=7)
                    .rev()
                    .map(|r| match r == rank {
                        true => format!("{}K{}", file, 7 - file).replace('0', ""),
                        false => "8".to_owned(),
                    })
                    .collect();
                let fen = format!("7k/{} w - - 0 1", rows.join("/"));
                let p = Position::from_fen(&fen).unwrap();
                let m1 = p.legal_moves()[0];
                let m2 = p.apply_move(&m1).unwrap().legal_moves()[0];
                Puzzle {
                    id: format!("z{i:04}"),
                    fen,
                    moves: vec![m1, m2],
                    rating: 1500,
                    themes: themes[i % themes.len()].iter().map(|s| s.to_string()).collect(),
                    game_url: String::new(),
                }
            })
            .collect()
    }

    fn run(zs: &[Puzzle], holdout: usize, seed: u64) -> Split {
        theme_split(|| Ok(zs.iter().cloned().map(Ok)), holdout, seed).unwrap()
    }

    #[test]
    fn holdout_larger_than_supply_takes_all() {
        let zs = synthetic(5, &[&["fork"]]);
        let s = run(&zs, 1000, 1);
        assert_eq!(s.validation.len(), 5);
        assert!(s.manifest.train_ids.is_empty());
        assert_eq!(s.manifest.theme_counts["fork"], 5);
    }

    #[test]
    fn multi_theme_puzzles_are_counted_once() {
        let zs = synthetic(8, &[&["a", "b"]]);
        let s = run(&zs, 10, 9);
        let m = &s.manifest;
        assert_eq!(m.theme_counts["a"], 8);
        assert_eq!(m.theme_counts["b"], 8);
        assert_eq!(m.validation_ids.len(), 8);
        let unique: HashSet<_> = m.validation_ids.iter().collect();
        assert_eq!(unique.len(), m.validation_ids.len());
    }

    #[test]
    fn split_is_deterministic_and_order_free() {
        let zs = synthetic(32, &[&["a", "b"], &["c"]]);
        let a = run(&zs, 4, 7);
        let mut rev = zs.clone();
        rev.reverse();
        let b = run(&rev, 4, 7);
        assert_eq!(a.manifest.validation_ids, b.manifest.validation_ids);
        let c = run(&zs, 4, 7);
        assert_eq!(a.manifest, c.manifest);
    }

    #[test]
    fn overlapping_training_puzzles_are_dropped() {
        let mut zs = synthetic(4, &[&["solo"]]);
        let mut twin = zs[0].clone();
        twin.id = "twin".into();
        twin.themes = vec!["other".into()];
        zs.push(twin);
        let s = run(&zs, 1, 3);
        // The twin is the only "other" puzzle, so it is held out, and its
        // double can never train.
        assert!(s.manifest.validation_ids.contains(&"twin".to_owned()));
        assert!(!s.manifest.train_ids.contains(&zs[0].id));
        assert_eq!(s.manifest.train_ids.len() + s.manifest.dropped_for_overlap, 3);
    }

    #[test]
    fn eval_sample_is_stable() {
        let zs = synthetic(32, &[&["mateIn1"]]);
        let a = sample_eval_set(&zs, "mateIn1", 10, 42).unwrap();
        assert_eq!(a, sample_eval_set(&zs, "mateIn1", 10, 42).unwrap());
        assert_ne!(a, sample_eval_set(&zs, "mateIn1", 10, 43).unwrap());
        assert!(sample_eval_set(&zs, "mateIn1", 0, 1).unwrap().is_empty());
        assert!(matches!(
            sample_eval_set(&zs, "mateIn1", 33, 1),
            Err(DatasetError::NotEnough { available: 32, .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn train_and_validation_never_share_positions(n in 1usize..32, holdout in 1usize..6, seed: u64) {
            let zs = synthetic(n, &[&["a"], &["b", "c"], &["c"]]);
            let s = run(&zs, holdout, seed);
            let held: HashSet<String> = s.validation.iter().flat_map(position_keys).collect();
            for id in &s.manifest.train_ids {
                let z = zs.iter().find(|z| &z.id == id).unwrap();
                prop_assert!(position_keys(z).iter().all(|k| !held.contains(k)));
            }
            for c in s.manifest.theme_counts.values() {
                prop_assert!(*c <= holdout);
            }
            prop_assert_eq!(
                s.manifest.train_ids.len() + s.validation.len() + s.manifest.dropped_for_overlap,
                zs.len()
            );
        }
    }
}
