//! Seeded, splittable random generator.
//!
//! Every random choice made by the toolkit flows through [`Rng`], a
//! counter-based generator in the SplitMix64 family. The full determinism
//! guarantee of the experiment logs rests on two documented contracts:
//!
//! * **Splitting.** `split(label)` derives a child stream from
//!   `(key, label)` alone, so components can be given independent streams
//!   without coordinating draw counts. The harness uses the labels
//!   `"init"`, `"noise"`, `"policy"`, and `"acq"`.
//! * **Stream consumption.** `uniform` consumes exactly one 64-bit word.
//!   `gaussian` uses the Box–Muller transform: it consumes exactly two
//!   words per *pair* of variates and caches the second variate, so calls
//!   alternate two-words/zero-words. `split` consumes nothing.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn hash_label(label: &str) -> u64 {
    // FNV-1a, then one mix round to spread short labels.
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for byte in label.as_bytes() {
        h ^= u64::from(*byte);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    mix64(h)
}

/// Counter-based generator state. Cheap to clone; clones replay the stream.
#[derive(Debug, Clone)]
pub struct Rng {
    key: u64,
    counter: u64,
    cached_gaussian: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            key: mix64(seed ^ GAMMA),
            counter: 0,
            cached_gaussian: None,
        }
    }

    /// Derives an independent child stream from this stream's key and a
    /// label. Does not advance this stream.
    pub fn split(&self, label: &str) -> Rng {
        Rng {
            key: mix64(self.key ^ hash_label(label).wrapping_mul(GAMMA)),
            counter: 0,
            cached_gaussian: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let word = mix64(self.key.wrapping_add(self.counter.wrapping_mul(GAMMA)));
        self.counter = self.counter.wrapping_add(1);
        word
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`.
    pub fn uniform_index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    /// Standard normal draw (Box–Muller; see module docs for consumption).
    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.cached_gaussian.take() {
            return z;
        }
        // u1 in (0, 1] so the log is finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.cached_gaussian = Some(radius * angle.sin());
        radius * angle.cos()
    }
}
