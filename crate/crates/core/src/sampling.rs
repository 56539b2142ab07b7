//! Seeded random streams and uniform sampling with replacement.
//!
//! Every (domain, processor, round) triple gets its own generator, seeded by
//! an injective packing of the triple pushed through a bijective mixer keyed
//! by the run seed. Distinct triples therefore never share a seed.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// Purpose tag separating otherwise identical (processor, round) streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Domain {
    Sample = 1,
    Adversary = 2,
    Inputs = 3,
    Corruption = 4,
    Blocks = 5,
    Scheduler = 6,
}

/// Largest processor index representable in a stream key.
pub const MAX_PROCESSORS: u32 = 1 << 24;

#[inline]
fn splitmix_finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Packs the triple into 64 bits: 8 bits of domain, 24 of processor, 32 of
/// round.
#[inline]
pub fn stream_key(domain: Domain, processor: u32, round: u32) -> u64 {
    debug_assert!(processor < MAX_PROCESSORS);
    ((domain as u64) << 56) | (((processor & (MAX_PROCESSORS - 1)) as u64) << 32) | round as u64
}

/// Seed for one stream. Injective in (domain, processor, round) for a fixed
/// run seed.
#[inline]
pub fn stream_seed(run_seed: u64, domain: Domain, processor: u32, round: u32) -> u64 {
    let salt = splitmix_finalize(run_seed.wrapping_add(0x9E37_79B9_7F4A_7C15));
    splitmix_finalize(stream_key(domain, processor, round) ^ salt)
}

/// A random stream producing uniform indices.
#[derive(Clone, Debug)]
pub struct SampleStream {
    rng: Xoshiro256PlusPlus,
    spare: Option<u32>,
}

impl SampleStream {
    pub fn new(run_seed: u64, domain: Domain, processor: u32, round: u32) -> Self {
        Self::from_seed(stream_seed(run_seed, domain, processor, round))
    }

    pub fn from_seed(seed: u64) -> Self {
        SampleStream {
            rng: Xoshiro256PlusPlus::seed_from_u64(seed),
            spare: None,
        }
    }

    #[inline]
    pub fn next_u32(&mut self) -> u32 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        let w = self.rng.next_u64();
        self.spare = Some(w as u32);
        (w >> 32) as u32
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform integer in `[0, n)`; exact (rejection on the short zone).
    #[inline]
    pub fn below(&mut self, n: u32) -> u32 {
        assert!(n > 0, "empty range");
        let mut m = self.next_u32() as u64 * n as u64;
        if (m as u32) < n {
            let threshold = n.wrapping_neg() % n;
            while (m as u32) < threshold {
                m = self.next_u32() as u64 * n as u64;
            }
        }
        (m >> 32) as u32
    }

    /// Uniform float in `[0, 1)` with 53 bits of precision.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u32 + 1) as usize;
            items.swap(i, j);
        }
    }
}

/// Draws `k` indices independently and uniformly from `[0, n)`.
pub fn draw_sample(n: u32, k: usize, stream: &mut SampleStream) -> Vec<u32> {
    let mut out = Vec::with_capacity(k);
    fill_sample(n, stream, &mut out, k);
    out
}

/// As [`draw_sample`], reusing `out`.
#[inline]
pub fn fill_sample(n: u32, stream: &mut SampleStream, out: &mut Vec<u32>, k: usize) {
    out.clear();
    for _ in 0..k {
        out.push(stream.below(n));
    }
}
