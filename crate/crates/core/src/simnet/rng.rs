//! Seeded random streams.
//!
//! Every consumer of randomness (topology draws, flow start jitter, the
//! tuner's exploration, dropout masks, weight init, synthetic traces) gets its
//! own ChaCha8 stream derived from the master seed and a label:
//!
//! `sub_seed(master, label) = splitmix64(master ^ fnv1a64(label))`
//!
//! so adding a consumer never perturbs the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for the consumer named `label`.
pub fn stream(master: u64, label: &str) -> SimRng {
    seeded_rng(sub_seed(master, label))
}

pub fn sub_seed(master: u64, label: &str) -> u64 {
    splitmix64(master ^ fnv1a64(label.as_bytes()))
}

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub(crate) fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_seed_same_stream() {
        let mut a = seeded_rng(42);
        let mut b = seeded_rng(42);
        let xs: Vec<u64> = (0..100).map(|_| a.random()).collect();
        let ys: Vec<u64> = (0..100).map(|_| b.random()).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn labelled_streams_are_independent() {
        let mut tuner = stream(42, "tuner");
        let mut predictor = stream(42, "predictor");
        let xs: Vec<u64> = (0..8).map(|_| tuner.random()).collect();
        let ys: Vec<u64> = (0..8).map(|_| predictor.random()).collect();
        assert_ne!(xs, ys);
        assert_ne!(sub_seed(42, "tuner"), sub_seed(43, "tuner"));
    }

    #[test]
    fn uniform_delay_draws_stay_in_range() {
        let mut rng = stream(9, "topology");
        for _ in 0..10_000 {
            let ms: f64 = rng.random_range(1.0..=20.0);
            assert!((1.0..=20.0).contains(&ms));
        }
    }
}
