//! Deterministic seed derivation.
//!
//! All randomness in the crate flows from a single master seed through
//! [`split_seed`]: per-tree, per-replication and per-column streams are
//! derived with distinct `(stream, index)` tags. Results are therefore
//! independent of thread scheduling — parallel code derives every seed up
//! front and each worker owns its own generator.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags keeping derived seeds from different subsystems disjoint.
#[derive(Clone, Copy, Debug)]
#[repr(u64)]
pub enum Stream {
    Tree = 1,
    Resample = 2,
    DataTrain = 3,
    DataTest = 4,
    Centroids = 5,
    CvFolds = 6,
    Replication = 7,
    ImputeOrder = 8,
    ImputeColumn = 9,
    Classifier = 10,
    ForestWeighted = 11,
    ForestUnweighted = 12,
    RatioFit = 13,
}

/// Derives a child seed from `master` for `(stream, index)`.
///
/// Uses two rounds of the SplitMix64 finalizer; cheap, stateless and
/// collision-resistant for the handful of streams used here.
pub fn split_seed(master: u64, stream: Stream, index: u64) -> u64 {
    let mixed = splitmix64(master ^ splitmix64((stream as u64) << 32 | 0x9E37));
    splitmix64(mixed ^ index.wrapping_mul(0xA24BAED4963EE407))
}

/// The crate-wide deterministic generator.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}
