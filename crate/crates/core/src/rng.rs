//! Counter-based keyed random streams.
//!
//! Every random draw in the simulator is addressed by a [`RngKey`]
//! `(seed, frame, x, y, channel)`. The key is folded into a 64-bit stream id
//! and the `i`-th output of the stream is a pure function of `(id, i)`, so a
//! pixel's randomness does not depend on which thread sampled it or in which
//! order.
//!
//! Key folding (frozen, covered by golden tests):
//!
//! ```text
//! h = fmix(seed ^ DOMAIN)
//! h = fmix(h ^ frame)
//! h = fmix(h ^ (x << 32 | y))
//! h = fmix(h ^ channel)
//! ```
//!
//! Stream output `i` (1-based) is `fmix(id + i * GOLDEN)`, where `fmix` is the
//! SplitMix64 finalizer (`z += GOLDEN`, then two xor-shift-multiply rounds).

use serde::{Deserialize, Serialize};

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const PIXEL_DOMAIN: u64 = 0x5350_4144_5049_5845; // "SPADPIXE"

#[inline]
pub fn fmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Address of one pixel-channel sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngKey {
    pub seed: u64,
    pub frame: u64,
    pub x: u32,
    pub y: u32,
    pub channel: u8,
}

impl RngKey {
    pub fn new(seed: u64, frame: u64, x: u32, y: u32, channel: u8) -> Self {
        Self { seed, frame, x, y, channel }
    }

    pub fn stream_id(&self) -> u64 {
        let mut h = fmix(self.seed ^ PIXEL_DOMAIN);
        h = fmix(h ^ self.frame);
        h = fmix(h ^ ((u64::from(self.x) << 32) | u64::from(self.y)));
        fmix(h ^ u64::from(self.channel))
    }
}

/// A counter-based generator: `(id, counter)` fully determines the next draw.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyedStream {
    id: u64,
    counter: u64,
}

pub fn derive_stream(key: &RngKey) -> KeyedStream {
    KeyedStream::from_id(key.stream_id())
}

impl KeyedStream {
    pub fn from_id(id: u64) -> Self {
        Self { id, counter: 0 }
    }

    /// Stream for non-pixel purposes; `domain` separates it from pixel keys.
    pub fn for_domain(domain: u64, seed: u64, index: u64) -> Self {
        Self::from_id(fmix(fmix(seed ^ domain) ^ index))
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        fmix(self.id.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform on the open interval (0, 1); never returns 0 or 1.
    #[inline]
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Exponential variate with the given rate, by inverse CDF.
    #[inline]
    pub fn next_exp(&mut self, rate: f64) -> f64 {
        -self.next_open01().ln() / rate
    }

    /// Standard normal variate (Box-Muller, cosine branch only).
    pub fn next_std_normal(&mut self) -> f64 {
        let u1 = self.next_open01();
        let u2 = self.next_open01();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
