//! Seed derivation and the pseudo-random streams behind every corruption.
//!
//! FNV-1a-64 hashes the scenario/modality/sample path, SplitMix64 finalizes it and
//! seeds xoshiro256**. All three are implemented here so that the streams are
//! fixed by this crate rather than by a dependency's version.

const FNV_OFFSET: u64 = 14695981039346656037;
const FNV_PRIME: u64 = 1099511628211;
const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

/// xoshiro256** seeded with four successive SplitMix64 outputs.
#[derive(Debug, Clone)]
pub struct Xoshiro256StarStar {
    s: [u64; 4],
}

impl Xoshiro256StarStar {
    pub fn seed_from_u64(seed: u64) -> Self {
        let mut sm = SplitMix64::new(seed);
        Self {
            s: [sm.next_u64(), sm.next_u64(), sm.next_u64(), sm.next_u64()],
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.s;
        let result = s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Unbiased uniform integer in [0, bound) (Lemire's multiply-and-reject).
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "empty range");
        let mut m = self.next_u64() as u128 * bound as u128;
        if (m as u64) < bound {
            let threshold = bound.wrapping_neg() % bound;
            while (m as u64) < threshold {
                m = self.next_u64() as u128 * bound as u128;
            }
        }
        (m >> 64) as u64
    }

    /// Standard normal pair via Box-Muller.
    pub fn normal_pair(&mut self) -> (f64, f64) {
        // 1 - u lies in (0, 1], so the log is finite
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let radius = (-2.0 * u1.ln()).sqrt();
        let (sin, cos) = (std::f64::consts::TAU * u2).sin_cos();
        (radius * cos, radius * sin)
    }
}

/// Identifies one independent random stream within a benchmark run.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SeedContext {
    pub global_seed: u64,
    pub scenario_id: String,
    pub modality: String,
    pub sample_id: String,
}

impl SeedContext {
    pub fn new(global_seed: u64, scenario_id: &str, modality: &str, sample_id: &str) -> Self {
        Self {
            global_seed,
            scenario_id: scenario_id.to_string(),
            modality: modality.to_string(),
            sample_id: sample_id.to_string(),
        }
    }

    /// Same context with `suffix` appended to the scenario id.
    pub fn with_scenario_suffix(&self, suffix: &str) -> Self {
        Self {
            scenario_id: format!("{}{}", self.scenario_id, suffix),
            ..self.clone()
        }
    }

    pub fn stream_seed(&self) -> u64 {
        derive_stream_seed(self)
    }
}

pub fn derive_stream_seed(ctx: &SeedContext) -> u64 {
    let key = format!("{}/{}/{}", ctx.scenario_id, ctx.modality, ctx.sample_id);
    SplitMix64::new(fnv1a64(key.as_bytes()) ^ ctx.global_seed).next_u64()
}

/// Selects `count` distinct indices from `0..n` with a partial Fisher-Yates shuffle.
/// The returned order is the selection order.
pub fn select_indices(n: usize, count: usize, rng: &mut Xoshiro256StarStar) -> Vec<u32> {
    assert!(count <= n, "cannot select {count} of {n}");
    assert!(n <= u32::MAX as usize, "index space too large");
    let mut idx: Vec<u32> = (0..n as u32).collect();
    for i in 0..count {
        let j = i + rng.below((n - i) as u64) as usize;
        idx.swap(i, j);
    }
    idx.truncate(count);
    idx
}
