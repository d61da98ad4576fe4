//! Deterministic random number generation for reproducible simulations.
//!
//! A SplitMix64 generator drives everything: it is counter-based (the state
//! advances by a fixed odd constant and the output is a bijective mix of the
//! state), so independent substreams can be derived from `(seed, path)`
//! without any cross-stream coupling. Gaussian variates come from Box-Muller.

use num_complex::Complex64;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Finalizer from the SplitMix64 reference implementation.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// SplitMix64 stream with substream derivation.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: mix(seed ^ GOLDEN_GAMMA) }
    }

    /// Derive an independent substream from a seed and a path of stream ids.
    ///
    /// Trials use `&[trial_index, stream_id]` so results do not depend on
    /// thread scheduling.
    pub fn substream(seed: u64, path: &[u64]) -> Self {
        let mut state = mix(seed ^ GOLDEN_GAMMA);
        for &id in path {
            state = mix(state.wrapping_add(GOLDEN_GAMMA) ^ mix(id.wrapping_add(GOLDEN_GAMMA)));
        }
        Self { state }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix(self.state)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// A pair of independent standard normal variates (Box-Muller).
    pub fn standard_normal_pair(&mut self) -> (f64, f64) {
        // 1 - u keeps the log argument in (0, 1].
        let u = 1.0 - self.next_f64();
        let r = (-2.0 * u.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * self.next_f64();
        (r * theta.cos(), r * theta.sin())
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.standard_normal_pair().0
    }

    /// Circularly symmetric complex Gaussian with zero mean and unit variance
    /// (`E|z|^2 = 1`).
    pub fn complex_standard_normal(&mut self) -> Complex64 {
        let (x, y) = self.standard_normal_pair();
        Complex64::new(x, y) * std::f64::consts::FRAC_1_SQRT_2
    }
}
