//! Quantized distributed reception of spatially multiplexed MIMO data.
//!
//! A transmitter with `Nt` antennas sends PSK symbols to `K` single-antenna
//! receive nodes. Each node forwards only the signs of the real and imaginary
//! parts of its observation to a fusion center, which then detects the data
//! (exhaustive ML, relaxed ML on the norm sphere, or zero-forcing) and, in a
//! block-fading setting, estimates every node's channel from quantized
//! training (probit ML or zero-forcing).
//!
//! The crate is `no_std` and only needs `alloc`. Randomness flows exclusively
//! through [`RandomStream`], a counter-based generator addressed by
//! `(seed, stream_id)`.

#![no_std]
// `!(x > 0.0)` is deliberate: NaN must take the rejecting branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod chanest;
pub mod detection;
mod error;
mod likelihood;
mod linalg;
pub mod model;
pub mod numerics;

pub use chanest::{
    corollary1_mse, lemma2_mse, ml_channel_estimate, normalized_mse, zf_channel_estimate,
    zf_channel_estimate_real, zf_closed_form, zf_pseudo_inverse, ChannelEstimate, EstimatorKind, NewtonOptions, SignRefinedTraining, SolverInfo,
};
pub use detection::{
    detect_symbols, ml_estimate_relaxed, ml_receive, sign_refine, zf_receive, DetectionResult,
    SignRefinedChannels,
    SphereOptions, ZfReceiver,
};
pub use error::{Error, Result};
pub use model::{
    draw_channel, draw_symbols, draw_training, make_psk, make_training, quantize, sgn, stack_real,
    transmit_data, transmit_data_with, transmit_training, transmit_training_with, Constellation, NoiseMode, QuantizedBlock, RealLiftedChannel, TrainingBlock,
};
pub use numerics::{dlog_phi_cdf, log_phi_cdf, phi_cdf, RandomStream};

pub use num_complex::Complex64;
