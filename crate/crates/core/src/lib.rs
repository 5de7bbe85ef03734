//! Behavioral simulator for an integrated time-domain reflectometer built
//! from a single differential digital input.
//!
//! The receiver is a 1-bit comparator whose reference input is driven by the
//! rising edge of a jittery internal clock. Because the edge jitter acts as a
//! Gaussian dither, the probability that the comparator reads "1" is a smooth
//! function of the input voltage, and averaging many repeated comparisons
//! turns a 1-bit receiver into a high-resolution one (analog-to-probability
//! conversion). Equivalent-time sampling with PLL phase steps fills in the
//! waveform between real-time samples.
//!
//! The crate is organized along the signal path:
//!
//! - [`channel`]: segmented transmission line, bounce diagram and the clean
//!   reflection waveform.
//! - [`frontend`]: jitter clock, comparator with offset and hysteresis, and
//!   environment noise (system tones, low-frequency drift).
//! - [`sampler`]: the real-time / equivalent-time / repetition schedule,
//!   blind spot and autocalibration.
//! - [`estimator`]: binomial confidence width and probability-to-voltage maps.
//! - [`denoise`]: background subtraction and reference-SET subtraction.
//! - [`analysis`]: waveform reconstruction and impedance inhomogeneity
//!   pattern extraction.
//! - [`scenario`]: scenario files and the built-in presets.
//! - [`pipeline`]: the end-to-end run of one scenario.
//! - [`export`]: CSV readers and writers and an SVG plot.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod channel;
pub mod denoise;
pub mod error;
pub mod estimator;
pub mod export;
pub mod frontend;
pub mod normal;
pub mod pipeline;
pub mod sampler;
pub mod scenario;

pub use error::{Error, Result};
