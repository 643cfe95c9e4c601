//! Seeded random number generation for the simulation harness.
//!
//! The generator is SplitMix64 (Steele, Lea & Flood 2014) with the standard
//! constants, so a re-implementation in any language reproduces the exact
//! stream from the same seed. Gaussian variates come from the Box-Muller
//! transform applied to consecutive pairs of uniforms on one stream.

/// SplitMix64 stream. State advances by the golden-ratio increment; output is
/// the finalizer of the advanced state.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform on [0, 1) with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Standard normal stream: Box-Muller on a SplitMix64 stream.
///
/// Pairs of uniforms (u1, u2) map to
/// `r = sqrt(-2 ln u1)`, `(r cos(2 pi u2), r sin(2 pi u2))`;
/// the second variate is buffered for the next call. A zero u1 (probability
/// 2^-53 per draw) is clamped to 2^-53 so the logarithm stays finite.
#[derive(Debug, Clone)]
pub struct GaussianStream {
    uniform: SplitMix64,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        GaussianStream {
            uniform: SplitMix64::new(seed),
            spare: None,
        }
    }

    pub fn next_standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let mut u1 = self.uniform.next_f64();
        if u1 == 0.0 {
            u1 = 1.0 / (1u64 << 53) as f64;
        }
        let u2 = self.uniform.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for slot in out.iter_mut() {
            *slot = self.next_standard_normal();
        }
    }
}

/// Seed for replication `r` of an experiment with base seed `base`.
///
/// XOR keeps every replication reproducible in isolation: re-running a
/// subset of replications regenerates the exact same data.
pub fn replication_seed(base: u64, replication: usize) -> u64 {
    base ^ replication as u64
}
