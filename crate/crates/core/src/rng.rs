//! Seeded, reproducible random streams.
//!
//! Every stochastic step in the crate (weight init, shuffling, masking,
//! synthetic data) draws from a ChaCha stream derived from a base seed and
//! a purpose tag, so shuffling in epoch 3 never shares draws with masking
//! in epoch 3, and two runs with the same seed are bit-identical.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// What a derived stream is used for. Each variant owns a disjoint stream.
#[derive(Debug, Clone, Copy)]
pub enum Stream {
    Init,
    Shuffle { epoch: u64 },
    Mask { epoch: u64 },
    DataGen,
    GradCheck,
    Sample,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Init => 0x01,
            Stream::Shuffle { epoch } => 0x0100 | (epoch << 16),
            Stream::Mask { epoch } => 0x0200 | (epoch << 16),
            Stream::DataGen => 0x03,
            Stream::GradCheck => 0x04,
            Stream::Sample => 0x05,
        }
    }
}

/// Derives an independent ChaCha RNG from `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha12Rng {
    // splitmix64 over the combined word decorrelates nearby seeds.
    let mut z = seed ^ stream.tag().wrapping_mul(0x9e37_79b9_7f4a_7c15);
    let mut out = [0u8; 32];
    for chunk in out.chunks_mut(8) {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut x = z;
        x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        x ^= x >> 31;
        chunk.copy_from_slice(&x.to_le_bytes());
    }
    ChaCha12Rng::from_seed(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn streams_are_deterministic() {
        let a: Vec<u64> = (0..8).map(|_| 0u64).collect();
        let _ = a;
        let mut r1 = stream_rng(7, Stream::Init);
        let mut r2 = stream_rng(7, Stream::Init);
        for _ in 0..16 {
            assert_eq!(r1.next_u64(), r2.next_u64());
        }
    }

    #[test]
    fn streams_are_disjoint_per_purpose() {
        let mut a = stream_rng(7, Stream::Shuffle { epoch: 1 });
        let mut b = stream_rng(7, Stream::Mask { epoch: 1 });
        let va: Vec<u64> = (0..4).map(|_| a.next_u64()).collect();
        let vb: Vec<u64> = (0..4).map(|_| b.next_u64()).collect();
        assert_ne!(va, vb);
    }
}
