//! Addressable random streams.
//!
//! Every draw the sampler makes belongs to a stream identified by
//! `(master_seed, image_index, stage, position)`. Streams are independent of
//! each other and of the order in which they are created, so an image comes
//! out the same no matter which worker produced it.

use rand::RngCore;
use rand_pcg::Pcg64;

/// Which part of the imaging process a stream feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stage {
    /// Photon count emitted by an object position.
    Source = 1,
    /// Multinomial redistribution of those photons through the PSF.
    Spread = 2,
    /// Local detector noise at a pixel.
    Noise = 3,
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn absorb(h: u64, word: u64) -> u64 {
    mix64(h.wrapping_add(GOLDEN_GAMMA) ^ word)
}

/// Deterministic generator for one `(seed, image, stage, position)` address.
#[derive(Debug, Clone)]
pub struct RngStream {
    inner: Pcg64,
}

impl RngStream {
    pub fn new(master_seed: u64, image_index: u64, stage: Stage, position: u64) -> Self {
        let address = ((stage as u64) << 56) ^ position;
        let h0 = absorb(absorb(mix64(master_seed), image_index), address);
        let h1 = mix64(h0 ^ GOLDEN_GAMMA);
        let state = ((h0 as u128) << 64) | h1 as u128;
        let stream = ((master_seed as u128) << 64) | address as u128;
        Self {
            inner: Pcg64::new(state, stream),
        }
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
