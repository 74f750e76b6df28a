//! Counter-based 64-bit generator used for every random draw in the toolkit.
//!
//! Draw `k` (1-based) of a stream is `mix(key + k * 0x9E3779B97F4A7C15)` with
//! `key = mix(seed ^ mix(stream))` and `mix` the SplitMix64 finalizer. Uniforms
//! take the top 53 bits; normals use one Box–Muller pair per draw (cosine
//! branch only) evaluated with `libm`, so the sequences do not depend on the
//! platform math library. Anything that has to reproduce a split or a synthetic
//! set outside Rust only needs this paragraph.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Named streams, so independent consumers of one seed never overlap.
pub mod stream {
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const SPLIT: u64 = 3;
    pub const CLUSTERS: u64 = 4;
    pub const SAMPLES: u64 = 5;
    pub const POWER_ITERATION: u64 = 6;
    pub const PROBE: u64 = 7;
}

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self {
            key: mix64(seed ^ mix64(stream)),
            counter: 0,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * std::f64::consts::PI * u2)
    }

    /// Integer in `[0, n)` by 128-bit multiply-shift.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Fisher–Yates, walking down from the last index.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
