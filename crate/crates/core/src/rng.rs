//! Counter-based random streams addressed by `(seed, sample, layer, substream)`.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Position of a stream in the seed tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StreamPath {
    pub sample_id: u64,
    pub layer_id: u64,
    pub substream_id: u64,
}

/// ChaCha20 keyed by `(master_seed, sample_id, layer_id)`; the substream
/// selects the ChaCha stream number, so every path is a disjoint keystream.
#[derive(Clone, Debug)]
pub struct RngStream {
    master_seed: u64,
    path: StreamPath,
    inner: ChaCha20Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, sample_id: u64, layer_id: u64, substream_id: u64) -> Self {
        let mut state = master_seed;
        let mut h = splitmix(&mut state);
        for (input, mult) in [(sample_id, 0xD6E8_FEB8_6659_FD93u64), (layer_id, 0xC2B2_AE3D_27D4_EB4F)] {
            state = h ^ input.wrapping_mul(mult);
            h = splitmix(&mut state);
        }
        let mut key = [0u8; 32];
        for chunk in key.chunks_mut(8) {
            chunk.copy_from_slice(&h.to_le_bytes());
            h = splitmix(&mut state);
        }
        let mut inner = ChaCha20Rng::from_seed(key);
        inner.set_stream(substream_id);
        Self {
            master_seed,
            path: StreamPath {
                sample_id,
                layer_id,
                substream_id,
            },
            inner,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path(&self) -> StreamPath {
        self.path
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.inner.random_range(0..n)
    }

    /// Poisson draw; zero for a non-positive mean.
    pub fn poisson(&mut self, mean: f64) -> u64 {
        if !(mean > 0.0) {
            return 0;
        }
        let p = rand_distr::Poisson::new(mean).expect("finite positive mean");
        let x: f64 = self.inner.sample(p);
        x as u64
    }
}

impl RngCore for RngStream {
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
