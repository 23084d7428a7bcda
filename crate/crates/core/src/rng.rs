//! Seeded, splittable randomness.
//!
//! Every stochastic operation in the crate takes an explicit [`Rng`]. A
//! generator is built from a 64-bit seed and can derive any number of
//! independent children; child `i` is seeded with `mix64(seed ^ i)`, so the
//! derivation depends only on the parent's seed and never on how much of the
//! parent stream has been consumed.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::hashcore::mix64;

#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: Xoshiro256PlusPlus,
}

impl Rng {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            seed,
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Seed of child `index`.
    pub fn child_seed(&self, index: u64) -> u64 {
        mix64(self.seed ^ index)
    }

    /// Independent child generator `index`.
    pub fn split(&self, index: u64) -> Rng {
        Rng::from_seed(self.child_seed(index))
    }

    pub fn bit(&mut self) -> u8 {
        (self.inner.next_u64() >> 63) as u8
    }

    /// `true` with probability `p`. `p` must lie in `[0, 1]`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.inner.random_bool(p)
    }

    /// Uniform integer in `0..bound`.
    pub fn below(&mut self, bound: usize) -> usize {
        self.inner.random_range(0..bound)
    }

    /// Uniform integer in `low..=high`.
    pub fn between(&mut self, low: u64, high: u64) -> u64 {
        self.inner.random_range(low..=high)
    }

    pub fn unit(&mut self) -> f64 {
        self.inner.random()
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::from_seed(11);
        let mut b = Rng::from_seed(11);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn split_ignores_parent_consumption() {
        let parent = Rng::from_seed(5);
        let mut used = parent.clone();
        for _ in 0..17 {
            used.next_u64();
        }
        assert_eq!(parent.split(3).next_u64(), used.split(3).next_u64());
        assert_eq!(parent.child_seed(3), mix64(5 ^ 3));
    }

    #[test]
    fn children_differ() {
        let parent = Rng::from_seed(0);
        let mut c0 = parent.split(0);
        let mut c1 = parent.split(1);
        assert_ne!(c0.next_u64(), c1.next_u64());
    }

    #[test]
    fn between_is_inclusive() {
        let mut rng = Rng::from_seed(9);
        let mut seen = [false; 3];
        for _ in 0..1000 {
            let v = rng.between(1, 3);
            seen[(v - 1) as usize] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }
}
