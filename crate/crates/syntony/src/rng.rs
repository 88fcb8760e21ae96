//! Seedable random number generation for reproducible experiments.
//!
//! Every stochastic operation in this crate takes either a `&mut SimRng` or a
//! `u64` master seed. `SimRng` is ChaCha8: a named, documented generator whose
//! output is stable across platforms and releases, unlike `StdRng`. Monte
//! Carlo replicas draw from independent ChaCha streams derived from
//! `(master seed, replica index)`, so results do not depend on thread
//! scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type SimRng = ChaCha8Rng;

/// Generator for single-run use, seeded directly from a master seed.
pub fn master_rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Independent stream for one replica of a Monte Carlo experiment.
///
/// Streams with distinct `replica` values never overlap, so replicas may run
/// in parallel in any order and still reproduce bit-identically.
pub fn replica_rng(seed: u64, replica: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngExt;

    #[test]
    fn replica_streams_are_reproducible_and_distinct() {
        let a: f64 = replica_rng(7, 0).random();
        let a2: f64 = replica_rng(7, 0).random();
        let b: f64 = replica_rng(7, 1).random();
        assert_eq!(a, a2);
        assert_ne!(a, b);
    }

    #[test]
    fn master_seed_changes_every_stream() {
        let a: f64 = replica_rng(1, 3).random();
        let b: f64 = replica_rng(2, 3).random();
        assert_ne!(a, b);
    }
}
