//! OTFS link-level simulation with a diffusion-based channel denoiser.
//!
//! The crate models a delay-Doppler modulated frame end to end: QPSK or
//! latent payloads are placed on an `N × M` delay-Doppler grid, moved to the
//! time domain through the ISFFT and a rectangular-pulse Heisenberg transform,
//! passed through a sparse doubly dispersive channel with AWGN, demodulated and
//! equalized. A deterministic diffusion sampler then removes residual noise
//! from real-valued latents, driven by a pluggable noise predictor.

pub mod channel;
pub mod detection;
pub mod diffusion;
pub mod error;
pub mod harness;
pub mod mapping;
pub mod params;
pub mod selftest;
pub mod tensor;
pub mod transforms;

pub use error::{Error, Result};
pub use params::{validate_params, DDGrid, OtfsParams, TFGrid, TimeSignal};
