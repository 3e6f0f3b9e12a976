//! Seeded randomness.
//!
//! Every stochastic operation in this crate draws from [`SeedRng`], an alias for
//! `rand_chacha::ChaCha8Rng`. ChaCha8 is a fully specified stream cipher, so a
//! seed produces the same draw sequence on every platform and toolchain; the
//! same cannot be said for `StdRng` or OS entropy, neither of which is used
//! anywhere in this crate. Seeds are plain `u64` values expanded through
//! `SeedableRng::seed_from_u64`.
//!
//! The composite routines below (shuffle, sampling without replacement,
//! weighted choice) are implemented here instead of pulled from `rand::seq`, so
//! their draw order is pinned by this crate rather than by a dependency's
//! internals.

use rand::RngExt;

pub type SeedRng = rand_chacha::ChaCha8Rng;

/// Build the crate's generator from a bare seed.
pub fn seeded(seed: u64) -> SeedRng {
    use rand::SeedableRng;
    SeedRng::seed_from_u64(seed)
}

/// In-place Fisher–Yates shuffle.
pub fn shuffle<T>(items: &mut [T], rng: &mut SeedRng) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

/// Sample `n` distinct indices from `0..len`, uniformly without replacement.
///
/// Partial Fisher–Yates: after `n` swap steps the prefix is the sample. The
/// returned order is the draw order, not sorted.
pub fn sample_indices(len: usize, n: usize, rng: &mut SeedRng) -> Vec<usize> {
    debug_assert!(n <= len);
    let mut idx: Vec<usize> = (0..len).collect();
    for i in 0..n {
        let j = rng.random_range(i..len);
        idx.swap(i, j);
    }
    idx.truncate(n);
    idx
}

/// Draw one index with probability proportional to `weights[i]`.
///
/// Integer cumulative sums plus a uniform draw in `0..total`, resolved by
/// binary search for the first prefix exceeding the draw.
pub struct WeightedChoice {
    cumulative: Vec<u64>,
    total: u64,
}

impl WeightedChoice {
    /// `None` when all weights are zero.
    pub fn new(weights: impl IntoIterator<Item = u64>) -> Option<Self> {
        let mut cumulative = Vec::new();
        let mut total = 0u64;
        for w in weights {
            total += w;
            cumulative.push(total);
        }
        if total == 0 {
            return None;
        }
        Some(Self { cumulative, total })
    }

    pub fn draw(&self, rng: &mut SeedRng) -> usize {
        let u = rng.random_range(0..self.total);
        // first index whose cumulative sum is > u
        self.cumulative.partition_point(|&c| c <= u)
    }
}
