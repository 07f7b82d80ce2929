/// SplitMix64 generator.
///
/// Also used statelessly: [`mix`] hashes a `(seed, index, lane)` triple so a
/// random signal can be evaluated at any cell without replaying a stream.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        finalize(self.state)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        unit(self.next_u64())
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

pub fn unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Stateless hash of a seed and two indices.
pub fn mix(seed: u64, index: u64, lane: u64) -> u64 {
    let a = finalize(seed.wrapping_add(GOLDEN));
    let b = finalize(a ^ index.wrapping_mul(GOLDEN).wrapping_add(0x6A09_E667_F3BC_C909));
    finalize(b ^ lane.wrapping_mul(0xD1B5_4A32_D192_ED03).wrapping_add(GOLDEN))
}

/// Seed for the `index`-th member of an ensemble.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix(master, index, 0x5EED)
}
