//! Seed derivation and the few samplers the simulator needs.
//!
//! Every random draw descends from a single `u64` master seed. Independent
//! components read from separate ChaCha streams so that enabling or disabling
//! one of them never shifts the draws seen by another.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Named substreams of a master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    EmbbArrivals,
    UrllcArrivals,
    RetransmitCoins,
    RandomProfile,
    RandomOrderAllocator,
    /// Monte Carlo chunk `i` of the tagged-packet estimator.
    MonteCarloChunk(u64),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::EmbbArrivals => 1,
            Stream::UrllcArrivals => 2,
            Stream::RetransmitCoins => 3,
            Stream::RandomProfile => 4,
            Stream::RandomOrderAllocator => 5,
            Stream::MonteCarloChunk(i) => (1 << 32) + i,
        }
    }
}

/// Returns the generator for `stream` under `seed`.
pub fn substream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

/// Draws a Poisson(`mean`) variate by sequential-search inversion.
///
/// Exact for any mean, but the expected cost is `O(mean)`; callers only use it
/// with small means.
pub fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let u: f64 = rng.gen();
    let mut k = 0u64;
    let mut pmf = (-mean).exp();
    let mut cdf = pmf;
    while u >= cdf {
        k += 1;
        pmf *= mean / k as f64;
        let next = cdf + pmf;
        // Tail underflow: the remaining mass is below f64 resolution.
        if next == cdf {
            break;
        }
        cdf = next;
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let draw = |stream| {
            let mut rng = substream(7, stream);
            (0..4).map(|_| rng.gen::<u64>()).collect::<Vec<_>>()
        };
        let a = draw(Stream::EmbbArrivals);
        let b = draw(Stream::EmbbArrivals);
        let c = draw(Stream::UrllcArrivals);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn poisson_zero_mean() {
        let mut rng = substream(1, Stream::UrllcArrivals);
        assert!((0..100).all(|_| poisson(&mut rng, 0.0) == 0));
    }

    #[test]
    fn poisson_matches_pmf() {
        let mean = 1.7;
        let n = 400_000;
        let mut rng = substream(11, Stream::UrllcArrivals);
        let mut counts = [0u64; 8];
        let mut sum = 0u64;
        for _ in 0..n {
            let k = poisson(&mut rng, mean);
            sum += k;
            if (k as usize) < counts.len() {
                counts[k as usize] += 1;
            }
        }
        let empirical_mean = sum as f64 / n as f64;
        assert!((empirical_mean - mean).abs() < 0.01, "{empirical_mean}");
        let mut pmf = (-mean).exp();
        for (k, &c) in counts.iter().enumerate() {
            if k > 0 {
                pmf *= mean / k as f64;
            }
            let freq = c as f64 / n as f64;
            let se = (pmf * (1.0 - pmf) / n as f64).sqrt();
            assert!(
                (freq - pmf).abs() < 5.0 * se + 1e-6,
                "k={k} freq={freq} pmf={pmf}"
            );
        }
    }
}
