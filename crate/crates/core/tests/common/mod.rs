//! Random strategies shared by the integration suites.
#![allow(dead_code)]

use locc_core::montecarlo::sample_state;
use locc_core::strategy::GuessMap;
use locc_core::{BlochVector, FixedStrategy, Geometry, OutcomeHistory, StrategyTree};
use rand::Rng;

pub fn random_tree(geometry: Geometry, copies: usize, rng: &mut impl Rng) -> StrategyTree {
    StrategyTree::from_fn(geometry, copies, |_| sample_state(geometry, rng)).unwrap()
}

/// Random axes with random repetition counts, `N` at most `max_copies`.
pub fn random_fixed(geometry: Geometry, max_copies: usize, rng: &mut impl Rng) -> FixedStrategy {
    let axes = rng.random_range(1..=3usize);
    let mut left = max_copies;
    let mut out = Vec::new();
    for i in 0..axes {
        if left == 0 {
            break;
        }
        let share = if i + 1 == axes {
            left
        } else {
            rng.random_range(1..=left)
        };
        let share = rng.random_range(1..=share);
        out.push((sample_state(geometry, rng), share));
        left -= share;
    }
    FixedStrategy::new(geometry, out).unwrap()
}

pub fn random_guess_map(tree: &StrategyTree, rng: &mut impl Rng) -> GuessMap {
    OutcomeHistory::all(tree.copies())
        .map(|h| (h.bits(), sample_state(tree.geometry(), rng)))
        .collect()
}

pub fn random_unit(geometry: Geometry, rng: &mut impl Rng) -> BlochVector {
    sample_state(geometry, rng)
}
