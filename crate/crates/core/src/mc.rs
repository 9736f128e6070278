//! Seeded Monte Carlo plumbing: stream derivation and worker-count-independent
//! aggregation.
//!
//! Every Monte Carlo operation in this crate derives one independent RNG
//! stream per trial (or per sample) from a single master seed. Trials are
//! grouped into fixed-size blocks; blocks run in parallel and their partial
//! results are merged in block order. Because the stream of trial `i` depends
//! only on `(master, i)` and the merge order is fixed, results are bit
//! identical for any worker count, including a serial run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the `index`-th independent stream under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ index.wrapping_mul(GOLDEN_GAMMA))
}

/// RNG for the `index`-th independent stream under `master`.
pub fn stream_rng(master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, index))
}

/// Fixed block length used to partition trials. Must not depend on the
/// worker count, or aggregation order would change with it.
pub const BLOCK_LEN: u64 = 8192;

/// Runs `body` on consecutive index blocks `[start, end)` covering
/// `0..total`, in parallel, and returns the per-block results in block order.
pub fn run_blocks<T, F>(total: u64, body: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<u64>) -> T + Sync,
{
    let n_blocks = total.div_ceil(BLOCK_LEN);
    (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let start = b * BLOCK_LEN;
            let end = (start + BLOCK_LEN).min(total);
            body(start..end)
        })
        .collect()
}

/// Standard error of a binomial proportion estimate.
pub fn binomial_stderr(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// Mean and standard error of the mean from block sums `(Σx, Σx²)`.
///
/// The block sums are added in block order so the result is independent of
/// how blocks were scheduled.
pub fn mean_and_stderr(block_sums: &[(f64, f64)], n: u64) -> (f64, f64) {
    let (sum, sum_sq) = block_sums
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, x2)| (a + x, b + x2));
    let n_f = n as f64;
    let mean = sum / n_f;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = ((sum_sq - n_f * mean * mean) / (n_f - 1.0)).max(0.0);
    (mean, (var / n_f).sqrt())
}
