//! Counter-based pseudo-random numbers with a fixed, documented algorithm.
//!
//! Problem instances must be bit-identical across runs, platforms and
//! implementations, so the generator is pinned here rather than borrowed
//! from a crate whose algorithms may change between versions.
//!
//! * `mix` is the SplitMix64 finalizer.
//! * A stream is keyed by `key = mix(seed ^ stream·0xD1B54A32D192ED03)`.
//! * The `i`-th draw (`i = 0, 1, …`) is `mix(key + (i + 1)·0x9E3779B97F4A7C15)`
//!   with wrapping arithmetic.
//! * Uniforms in `(0, 1)`: `((bits >> 11) + 0.5)·2⁻⁵³`.
//! * Normals: Box–Muller on two consecutive uniforms `u₁, u₂`, keeping only
//!   `√(−2 ln u₁)·cos(2π u₂)`.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const STREAM_MUL: u64 = 0xD1B5_4A32_D192_ED03;

pub fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn stream(seed: u64, stream: u64) -> Self {
        CounterRng {
            key: mix(seed ^ stream.wrapping_mul(STREAM_MUL)),
            counter: 0,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform in the open interval `(0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}
