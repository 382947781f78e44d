//! Deterministic, splittable random streams.
//!
//! Every stochastic operation in this crate takes an explicit `RandomStream`;
//! there is no hidden global randomness. A stream is fully determined by its
//! 64-bit seed, and child streams are derived from `(seed, index)` with a
//! fixed SplitMix64-based mixing function, so trial workers can execute in
//! any order (or in parallel) and still reproduce identical results.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// One SplitMix64 output step. Used only for child-seed derivation.
fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A seeded random stream with deterministic child-stream derivation.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    rng: ChaCha12Rng,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    /// The seed this stream was created from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child stream for `(seed, index)`.
    ///
    /// The child seed is `splitmix64(seed ^ splitmix64(index + 1))`, which
    /// decorrelates adjacent indices. Deriving a child does not advance the
    /// parent stream.
    pub fn child(&self, index: u64) -> Self {
        Self::new(splitmix64(self.seed ^ splitmix64(index.wrapping_add(1))))
    }

    /// Uniform draw from `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Bernoulli draw with success probability `p` (clamped to `[0, 1]`).
    pub fn next_bool(&mut self, p: f64) -> bool {
        if p <= 0.0 {
            return false;
        }
        if p >= 1.0 {
            return true;
        }
        self.rng.random_bool(p)
    }

    /// Fair coin as a bit.
    pub fn next_bit(&mut self) -> u8 {
        u8::from(self.rng.random_bool(0.5))
    }

    /// Uniform index in `0..n`. `n` must be positive.
    pub fn next_index(&mut self, n: usize) -> usize {
        assert!(n > 0, "next_index needs a non-empty range");
        self.rng.random_range(0..n)
    }

    /// `k` distinct indices drawn uniformly from `0..n`, returned sorted.
    ///
    /// Partial Fisher-Yates; `k` is clamped to `n`.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        let k = k.min(n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.next_index(n - i);
            pool.swap(i, j);
        }
        let mut picked: Vec<usize> = pool[..k].to_vec();
        picked.sort_unstable();
        picked
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_sequence() {
        let mut a = RandomStream::new(42);
        let mut b = RandomStream::new(42);
        for _ in 0..1000 {
            assert_eq!(a.next_f64().to_bits(), b.next_f64().to_bits());
        }
    }

    #[test]
    fn children_are_deterministic_and_distinct() {
        let root = RandomStream::new(7);
        let mut c0 = root.child(0);
        let mut c0_again = root.child(0);
        let mut c1 = root.child(1);
        let x = c0.next_f64();
        assert_eq!(x.to_bits(), c0_again.next_f64().to_bits());
        assert_ne!(x.to_bits(), c1.next_f64().to_bits());
    }

    #[test]
    fn child_derivation_does_not_advance_parent() {
        let mut a = RandomStream::new(9);
        let mut b = RandomStream::new(9);
        let _ = b.child(3);
        assert_eq!(a.next_f64().to_bits(), b.next_f64().to_bits());
    }

    #[test]
    fn sample_indices_distinct_sorted() {
        let mut rng = RandomStream::new(1);
        let picked = rng.sample_indices(100, 25);
        assert_eq!(picked.len(), 25);
        for w in picked.windows(2) {
            assert!(w[0] < w[1]);
        }
        assert!(picked.iter().all(|&i| i < 100));
    }

    #[test]
    fn sample_indices_clamps_to_population() {
        let mut rng = RandomStream::new(1);
        let picked = rng.sample_indices(4, 10);
        assert_eq!(picked, vec![0, 1, 2, 3]);
    }

    #[test]
    fn bernoulli_edge_probabilities() {
        let mut rng = RandomStream::new(5);
        assert!(!rng.next_bool(0.0));
        assert!(rng.next_bool(1.0));
    }
}
