//! Standard normal CDF kernels and the reproducible random streams.
//!
//! `log_phi_cdf` and `dlog_phi_cdf` are the summand and derivative of every
//! probit log-likelihood in this crate. Below [`TAIL_SWITCH`] they use the
//! asymptotic Mills-ratio series, so neither underflows to `-inf` nor
//! produces `0/0` deep in the lower tail.

use core::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Below this argument the tail series replaces direct evaluation.
pub const TAIL_SWITCH: f64 = -20.0;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

fn check(t: f64) -> Result<f64> {
    if t.is_finite() {
        Ok(t)
    } else {
        Err(Error::Domain("non-finite argument to normal CDF kernel"))
    }
}

/// Standard normal CDF.
pub fn phi_cdf(t: f64) -> Result<f64> {
    check(t).map(phi)
}

/// `log Φ(t)`, finite for every finite `t`.
pub fn log_phi_cdf(t: f64) -> Result<f64> {
    check(t).map(log_phi)
}

/// Inverse Mills ratio `φ(t)/Φ(t) = d/dt log Φ(t)`.
pub fn dlog_phi_cdf(t: f64) -> Result<f64> {
    check(t).map(dlog_phi)
}

pub(crate) fn phi(t: f64) -> f64 {
    if t < 0.0 {
        0.5 * libm::erfc(-t * FRAC_1_SQRT_2)
    } else {
        1.0 - 0.5 * libm::erfc(t * FRAC_1_SQRT_2)
    }
}

pub(crate) fn log_phi(t: f64) -> f64 {
    if t < TAIL_SWITCH {
        let u = -t;
        -0.5 * t * t - libm::log(u) - LN_SQRT_2PI + libm::log(mills_series(u))
    } else if t < 0.0 {
        libm::log(0.5 * libm::erfc(-t * FRAC_1_SQRT_2))
    } else {
        // log(1 - Q(t)) without cancellation
        libm::log1p(-0.5 * libm::erfc(t * FRAC_1_SQRT_2))
    }
}

pub(crate) fn dlog_phi(t: f64) -> f64 {
    if t < TAIL_SWITCH {
        let u = -t;
        u / mills_series(u)
    } else {
        INV_SQRT_2PI * libm::exp(-0.5 * t * t) / phi(t)
    }
}

/// `λ'(t)` where `λ = dlog_phi`; always in `(-1, 0)`.
pub(crate) fn d2log_phi(t: f64, lambda: f64) -> f64 {
    -lambda * (t + lambda)
}

/// `u·Q(u)/φ(u) = 1 - 1/u² + 3/u⁴ - 15/u⁶ + ...`, summed until the terms
/// fall below machine precision or start to grow (asymptotic series).
fn mills_series(u: f64) -> f64 {
    let inv2 = 1.0 / (u * u);
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..64 {
        let next = -term * (2 * n - 1) as f64 * inv2;
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 {
            break;
        }
    }
    sum
}

/// Counter-based random stream addressed by `(seed, stream_id)`.
///
/// Trial `t` of an experiment uses `stream_id = t`, so results do not depend
/// on how trials are scheduled. [`RandomStream::lane`] derives further
/// independent sub-streams of the same trial (channel, training, data).
#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    lane: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self::with_lane(seed, stream_id, 0)
    }

    fn with_lane(seed: u64, stream_id: u64, lane: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&lane.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            lane,
            rng,
        }
    }

    /// Fresh stream for the same `(seed, stream_id)` but an independent key.
    pub fn lane(&self, lane: u64) -> Self {
        Self::with_lane(self.seed, self.stream_id, self.lane.wrapping_add(lane.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Two independent `N(0, 1)` variates.
    pub fn gaussian_pair(&mut self) -> (f64, f64) {
        (self.standard_normal(), self.standard_normal())
    }

    /// `CN(0, 1)`: real and imaginary parts are independent `N(0, 1/2)`.
    pub fn complex_normal(&mut self) -> Complex64 {
        let (re, im) = self.gaussian_pair();
        Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
    }

    /// Uniform index in `0..n` (Lemire's multiply-shift with rejection).
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index range must be non-empty");
        let n = n as u64;
        let zone = n.wrapping_neg() % n;
        loop {
            let m = (self.rng.next_u64() as u128) * (n as u128);
            if (m as u64) >= zone {
                return (m >> 64) as usize;
            }
        }
    }

    /// Uniform phase in `[0, 2π)`.
    pub fn phase(&mut self) -> f64 {
        let bits = self.rng.next_u64() >> 11;
        bits as f64 * (1.0 / (1u64 << 53) as f64) * 2.0 * PI
    }
}
