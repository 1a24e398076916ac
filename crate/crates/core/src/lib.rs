//! Turnstile-stream estimation of `F_p = sum |x_i|^p` for `0 < p < 2`.
//!
//! The sketches are generic over the accumulator scalar (`f32` or `f64`);
//! the aliases below fix it to `f64`.

pub mod codec;
pub mod config;
pub mod error;
pub mod field;
pub mod fingerprint;
pub mod fphh;
pub mod generators;
pub mod gme;
pub mod hashing;
pub mod highend;
pub mod light;
pub mod oracle;
pub mod pipeline;
pub mod polyeval;
pub mod prg;
pub mod scalar;
pub mod stable;
pub mod stats;

pub use config::{derive_config, FpConfig, Overrides, StreamUpdate};
pub use error::{Result, SketchError};
pub use field::{Fp, F61};
pub use scalar::Scalar;

/// Amplified estimator over `f64` accumulators.
pub type FpEstimator = pipeline::FpSketch<f64>;
/// Amplified estimator with fixed-point HighEnd counters.
pub type FpEstimatorFixed = pipeline::FpSketch<f64, highend::FixedCounters>;
pub type GmeSketch = gme::GmeSketch<f64>;
pub type FpEstBox = gme::FpEstBox<f64>;
pub type LightState = light::LightState<f64>;
pub type FpHh = fphh::FpHh<f64>;
pub type HighEnd = highend::HighEnd;
