//! Counter-keyed random streams.
//!
//! Each draw site derives a fresh ChaCha8 generator whose 256-bit key is the
//! tuple `(seed, stream, index, domain)`. A stream is therefore a pure
//! function of its coordinates: worker `k` at step `n` sees the same deviates
//! whatever order the workers are scheduled in, and Monte Carlo blocks can be
//! evaluated in any order or on any thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Domain tags keep streams of unrelated consumers apart under one seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Search = 0x5345_4152_4348,
    Noise = 0x4e4f_4953_45,
    Schedule = 0x5343_4845_44,
    MonteCarlo = 0x4d43,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamKey {
    pub seed: u64,
    pub stream: u64,
    pub domain: Domain,
}

impl StreamKey {
    pub fn new(seed: u64, stream: u64, domain: Domain) -> Self {
        StreamKey {
            seed,
            stream,
            domain,
        }
    }

    /// Generator for position `index` of this stream.
    pub fn at(&self, index: u64) -> StreamRng {
        keyed_rng(self.seed, self.stream, index, self.domain)
    }
}

pub fn keyed_rng(seed: u64, stream: u64, index: u64, domain: Domain) -> StreamRng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&stream.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    key[24..32].copy_from_slice(&(domain as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
