//! End-to-end simulation: configuration, the per-frame pipeline, sweeps,
//! metrics and training-set generation.

mod config;
mod dataset;
mod metrics;
mod pipeline;
pub mod seeds;

pub use config::{
    ChannelConfig, ChannelMode, DenoiserConfig, DenoiserKind, OtfsConfig, PayloadConfig, PayloadKind, RunConfig,
    SweepConfig,
};
pub use dataset::{gen_dataset, write_dataset, Dataset};
pub use metrics::{psnr, to_csv, write_csv, MetricRow, CSV_HEADER};
pub use pipeline::{run_point, sweep, FrameStats, Payload, Pipeline, Received};

use crate::diffusion::{reverse_denoise, NoiseSchedule, Predictor};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Denoises each row of `rx` with unit noise weights.
///
/// `rx` is rank 1 or rank 2 (one latent per row). `csi` is either a single
/// row shared by all latents or one row per latent.
pub fn denoise_tensor(
    rx: &Tensor,
    csi: &Tensor,
    noise_var: f64,
    sched: &NoiseSchedule,
    predictor: &Predictor,
) -> Result<Tensor> {
    if !(noise_var >= 0.0 && noise_var.is_finite()) {
        return Err(Error::Value(format!("noise variance {noise_var} must be non-negative")));
    }
    let values = rx.to_f64()?;
    let dim = *rx.dims().last().expect("rank >= 1");
    if rx.dims().len() > 2 {
        return Err(Error::Value(format!("expected rank 1 or 2, got dims {:?}", rx.dims())));
    }
    let rows = values.len() / dim;
    let csi_values = csi.to_f64()?;
    let csi_dim = *csi.dims().last().expect("rank >= 1");
    let csi_rows = csi_values.len() / csi_dim;
    if csi_rows != 1 && csi_rows != rows {
        return Err(Error::DimMismatch {
            expected: rows,
            got: csi_rows,
        });
    }
    let w = vec![1.0; dim];
    let mut out = Vec::with_capacity(values.len());
    for (i, row) in values.chunks(dim).enumerate() {
        let h = &csi_values[(i % csi_rows) * csi_dim..][..csi_dim];
        out.extend(reverse_denoise(row, h, noise_var, sched, &w, predictor)?);
    }
    Tensor::from_f64(rx.dims().to_vec(), out)
}
