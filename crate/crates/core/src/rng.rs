//! Counter-based random streams.
//!
//! Every random quantity in the crate is a pure function of a 64-bit seed and
//! a small tuple of integer coordinates (vertex ids, block ids, replication
//! index). Results therefore never depend on thread scheduling.
//!
//! The mixer is the SplitMix64 finalizer; a stream is SplitMix64 started at a
//! derived key, so the `k`-th output is `mix64(key + (k + 1) * GAMMA)`.

use rand::RngCore;

const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// Domain tags keep streams for different purposes disjoint.
pub(crate) mod tag {
    pub const TYPES: u64 = 1;
    pub const NAIVE: u64 = 2;
    pub const BLOCK: u64 = 3;
    pub const RANK1: u64 = 4;
    pub const TREE: u64 = 5;
}

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_133f_11eb);
    z ^ (z >> 31)
}

/// Folds `parts` into `seed`, producing a key for an independent stream.
#[inline]
pub fn stream_key(seed: u64, parts: &[u64]) -> u64 {
    let mut h = mix64(seed.wrapping_add(GAMMA));
    for (pos, &p) in parts.iter().enumerate() {
        let salted = p.wrapping_mul(GAMMA).wrapping_add(pos as u64 + 1);
        h = mix64(h.rotate_left(23) ^ mix64(salted));
    }
    h
}

/// Maps 64 random bits to a double in `[0, 1)` using the top 53 bits.
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A single uniform keyed by `(key, index)`.
#[inline]
pub fn uniform_at(key: u64, index: u64) -> f64 {
    unit_f64(mix64(key ^ mix64(index.wrapping_add(GAMMA))))
}

/// Sequential stream over a derived key; usable wherever `rand` expects an RNG.
#[derive(Clone, Debug)]
pub struct CounterRng {
    state: u64,
}

impl CounterRng {
    pub fn new(seed: u64, parts: &[u64]) -> Self {
        Self {
            state: stream_key(seed, parts),
        }
    }

    #[inline]
    pub fn uniform(&mut self) -> f64 {
        unit_f64(self.next_u64())
    }
}

impl RngCore for CounterRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix64(self.state)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}
