//! Portable seeded randomness: PCG-XSL-RR 128/64 with a ratio-of-uniforms
//! normal sampler, so bundles are bit-identical across platforms.

use rand_core::RngCore;
use rand_pcg::Pcg64;

// Leva's ratio-of-uniforms bounds for the standard normal.
const LEVA_S: f64 = 0.449871;
const LEVA_T: f64 = -0.386595;
const LEVA_A: f64 = 0.19600;
const LEVA_B: f64 = 0.25472;
const LEVA_R1: f64 = 0.27597;
const LEVA_R2: f64 = 0.27846;
/// 2·sqrt(2/e), the width of the ratio-of-uniforms box in v.
const LEVA_V_SPAN: f64 = 1.7156;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub struct SimRng {
    inner: Pcg64,
}

impl SimRng {
    /// Independent stream `stream` of the generator seeded by `seed`.
    pub fn new(seed: u64, stream: u64) -> Self {
        let hi = splitmix64(seed);
        let lo = splitmix64(hi ^ seed.rotate_left(17));
        let state = ((hi as u128) << 64) | lo as u128;
        Self { inner: Pcg64::new(state, (stream as u128) << 1 | 1) }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal deviate.
    pub fn standard_normal(&mut self) -> f64 {
        loop {
            let u = self.uniform();
            let v = LEVA_V_SPAN * (self.uniform() - 0.5);
            let x = u - LEVA_S;
            let y = v.abs() - LEVA_T;
            let q = x * x + y * (LEVA_A * y - LEVA_B * x);
            if q < LEVA_R1 {
                return v / u;
            }
            if q > LEVA_R2 {
                continue;
            }
            if v * v <= -4.0 * u * u * u.ln() {
                return v / u;
            }
        }
    }

    pub fn normal(&mut self, sigma: f64) -> f64 {
        if sigma == 0.0 {
            0.0
        } else {
            sigma * self.standard_normal()
        }
    }
}
