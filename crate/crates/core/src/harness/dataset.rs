use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::pipeline::Pipeline;
use super::seeds::{derive_seed, stage};
use crate::diffusion::{forward_diffuse_with, gaussian_vector};
use crate::error::{Error, Result};
use crate::tensor::{write_tensor, Tensor};

/// Training set for a noise predictor.
///
/// `samples` has one row per example laid out as `[z_t ‖ h_r ‖ t/T ‖ ε]`
/// (width `3·dim + 1`). `sideband` holds the matching `[z0 ‖ w_n]` rows
/// (width `2·dim`) so that `z_t = √ᾱ_t·z0 + √(1−ᾱ_t)·(w_n ⊙ ε)` can be
/// checked.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Tensor,
    pub sideband: Tensor,
    pub latent_dim: usize,
}

/// Builds `count` examples at one operating point. Each example sends a
/// payload through the configured channel and detector to obtain realistic
/// noise weights and CSI, then diffuses the clean latent to a uniformly drawn
/// step.
pub fn gen_dataset(pipeline: &Pipeline, count: usize, snr_db: f64, speed_kmh: f64) -> Result<Dataset> {
    if count == 0 {
        return Err(Error::Value("count must be at least 1".into()));
    }
    let sched = pipeline.schedule();
    let t_steps = sched.t_steps();
    let seed = pipeline.config().sweep.seed;
    let rows = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let payload = pipeline.payload(i);
            let rx = pipeline.receive(&payload, snr_db, speed_kmh, i)?;
            let dim = rx.reference.len();
            let t = ChaCha8Rng::seed_from_u64(derive_seed(seed, stage::DIFFUSION_STEP, i)).random_range(1..=t_steps);
            let eps = gaussian_vector(dim, derive_seed(seed, stage::DIFFUSION_NOISE, i));
            let state = forward_diffuse_with(&rx.reference, t, sched, &rx.w_n, eps)?;
            let mut sample = Vec::with_capacity(3 * dim + 1);
            sample.extend_from_slice(&state.z);
            sample.extend_from_slice(&rx.csi);
            sample.push(t as f64 / t_steps as f64);
            sample.extend_from_slice(&state.eps);
            let mut side = rx.reference;
            side.extend_from_slice(&state.w_n);
            Ok((sample, side))
        })
        .collect::<Result<Vec<_>>>()?;
    let dim = pipeline.latent_dim();
    let (samples, side): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    Ok(Dataset {
        samples: Tensor::from_f64(vec![count, 3 * dim + 1], samples.concat())?,
        sideband: Tensor::from_f64(vec![count, 2 * dim], side.concat())?,
        latent_dim: dim,
    })
}

pub fn write_dataset(ds: &Dataset, out: impl AsRef<Path>, sideband: Option<&Path>) -> Result<()> {
    write_tensor(out, &ds.samples)?;
    if let Some(path) = sideband {
        write_tensor(path, &ds.sideband)?;
    }
    Ok(())
}
