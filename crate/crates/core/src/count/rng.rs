//! SplitMix64, the generator behind every random draw of the counter.
//!
//! State advances by the constant `0x9E3779B97F4A7C15`; each output is the
//! new state passed through the finalizer
//! `z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31`
//! (wrapping arithmetic). Round `i` (1-based) of a run seeded with `s` draws
//! from a generator whose seed is the `i`-th output of a generator seeded
//! with `s`.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> SplitMix64 {
        SplitMix64 { state: seed }
    }

    /// Generator for round `round` (1-based) of a run seeded with `seed`.
    pub fn for_round(seed: u64, round: u64) -> SplitMix64 {
        let mut g = SplitMix64 { state: seed.wrapping_add(round.wrapping_sub(1).wrapping_mul(GAMMA)) };
        SplitMix64::new(g.next_u64())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// One fair bit: the top bit of the next output.
    pub fn next_bit(&mut self) -> bool {
        self.next_u64() >> 63 == 1
    }
}
