//! Seeded randomness. Every trial gets its own ChaCha stream derived from
//! `(seed, trial)`, so results do not depend on evaluation order.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{DisappointmentSet, FiniteSpace, UtilityAct};

pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Uniform values in `[lo, hi]`; about one act in five also copies some
/// values onto other states so ties get exercised.
pub fn random_act<R: Rng>(rng: &mut R, space: &Arc<FiniteSpace>, lo: f64, hi: f64) -> UtilityAct {
    let n = space.len();
    let mut values: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..=hi)).collect();
    if n > 1 && rng.gen_bool(0.2) {
        for _ in 0..rng.gen_range(1..n) {
            let from = rng.gen_range(0..n);
            let to = rng.gen_range(0..n);
            values[to] = values[from];
        }
    }
    UtilityAct::new(space.clone(), values).expect("finite values of the right length")
}

/// Strictly positive probabilities for `n` states, normalized.
pub fn random_space<R: Rng>(rng: &mut R, n: usize) -> Arc<FiniteSpace> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let labels = (0..n).map(|i| format!("s{i}")).collect();
    FiniteSpace::new(labels, raw.iter().map(|p| p / total).collect()).expect("valid random space")
}

/// A nonempty proper subset of the states; requires at least two states.
pub fn random_proper_event<R: Rng>(rng: &mut R, n: usize) -> DisappointmentSet {
    assert!(n >= 2, "a proper nonempty event needs two states");
    let size = rng.gen_range(1..n);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.truncate(size);
    DisappointmentSet::new(n, idx).expect("indices in range")
}

pub fn random_permutation<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    perm
}
