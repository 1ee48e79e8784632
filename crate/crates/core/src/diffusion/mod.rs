//! Latent-space diffusion denoiser.
//!
//! The forward process corrupts a real latent `z0` as
//! `z_t = √ᾱ_t·z0 + √(1−ᾱ_t)·(w ⊙ ε)` where `w` is a per-component noise
//! shaping vector. The reverse process is deterministic: starting from the
//! received latent scaled onto the step-`m` marginal, each step forms the
//! predictor-implied clean estimate and re-noises it to the previous step with
//! the same predicted noise.

mod predictor;

pub use predictor::{load_predictor, save_predictor, Activation, DenseLayer, Mlp, Predictor};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_T_STEPS: usize = 200;
pub const DEFAULT_ALPHA_1: f64 = 0.9999;
pub const DEFAULT_ALPHA_T: f64 = 0.98;

/// Per-step `α_t` and cumulative `ᾱ_t` for `t = 1..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    /// Builds a schedule from explicit `α_t` values, which must lie in `(0, 1)`
    /// and be non-increasing.
    pub fn from_alphas(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::Value("schedule needs at least one step".into()));
        }
        if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(Error::Value(format!("alpha {a} outside (0, 1)")));
        }
        if alphas.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Value("alphas must be non-increasing".into()));
        }
        let alpha_bars = alphas
            .iter()
            .scan(1.0, |acc, a| {
                *acc *= a;
                Some(*acc)
            })
            .collect();
        Ok(Self { alphas, alpha_bars })
    }

    pub fn t_steps(&self) -> usize {
        self.alphas.len()
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    /// `α_t` for `1 ≤ t ≤ T`.
    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t - 1]
    }

    /// `ᾱ_t` for `0 ≤ t ≤ T`, with `ᾱ_0 = 1`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.alpha_bars[t - 1]
        }
    }

    /// Noise-to-signal ratio `(1 − ᾱ_t)/ᾱ_t` of the step-`t` marginal.
    pub fn snr_ratio(&self, t: usize) -> f64 {
        let ab = self.alpha_bar(t);
        (1.0 - ab) / ab
    }

    fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.t_steps() {
            return Err(Error::Range {
                t,
                t_steps: self.t_steps(),
            });
        }
        Ok(())
    }
}

/// `α_t` falling linearly from `alpha_1` at `t = 1` to `alpha_t` at `t = T`.
pub fn linear_schedule(t_steps: usize, alpha_1: f64, alpha_t: f64) -> Result<NoiseSchedule> {
    if t_steps == 0 {
        return Err(Error::Value("t_steps must be at least 1".into()));
    }
    if !(0.0 < alpha_t && alpha_t <= alpha_1 && alpha_1 < 1.0) {
        return Err(Error::Value(format!(
            "need 0 < alpha_T <= alpha_1 < 1, got alpha_1 = {alpha_1}, alpha_T = {alpha_t}"
        )));
    }
    let alphas = if t_steps == 1 {
        vec![alpha_1]
    } else {
        let span = (t_steps - 1) as f64;
        (0..t_steps)
            .map(|i| alpha_1 + i as f64 / span * (alpha_t - alpha_1))
            .collect()
    };
    NoiseSchedule::from_alphas(alphas)
}

/// `[diffusion]` configuration table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionConfig {
    pub t_steps: usize,
    pub alpha_1: f64,
    pub alpha_t: f64,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        Self {
            t_steps: DEFAULT_T_STEPS,
            alpha_1: DEFAULT_ALPHA_1,
            alpha_t: DEFAULT_ALPHA_T,
        }
    }
}

impl DiffusionConfig {
    pub fn schedule(&self) -> Result<NoiseSchedule> {
        linear_schedule(self.t_steps, self.alpha_1, self.alpha_t)
    }
}

/// A diffused latent together with the noise that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    pub z: Vec<f64>,
    pub t: usize,
    pub w_n: Vec<f64>,
    pub eps: Vec<f64>,
}

fn check_weights(w_n: &[f64], len: usize) -> Result<()> {
    if w_n.len() != len {
        return Err(Error::DimMismatch {
            expected: len,
            got: w_n.len(),
        });
    }
    if let Some(w) = w_n.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::Value(format!("noise weight {w} must be positive")));
    }
    Ok(())
}

/// Standard normal vector drawn from a ChaCha8 stream seeded with `seed`.
pub fn gaussian_vector(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Closed-form jump from `z0` to step `t`.
pub fn forward_diffuse(z0: &[f64], t: usize, sched: &NoiseSchedule, w_n: &[f64], seed: u64) -> Result<LatentState> {
    let eps = gaussian_vector(z0.len(), seed);
    forward_diffuse_with(z0, t, sched, w_n, eps)
}

/// [`forward_diffuse`] with caller-supplied noise.
pub fn forward_diffuse_with(
    z0: &[f64],
    t: usize,
    sched: &NoiseSchedule,
    w_n: &[f64],
    eps: Vec<f64>,
) -> Result<LatentState> {
    sched.check_step(t)?;
    check_weights(w_n, z0.len())?;
    if eps.len() != z0.len() {
        return Err(Error::DimMismatch {
            expected: z0.len(),
            got: eps.len(),
        });
    }
    let (a, b) = (sched.alpha_bar(t).sqrt(), (1.0 - sched.alpha_bar(t)).sqrt());
    let z = z0
        .iter()
        .zip(w_n)
        .zip(&eps)
        .map(|((z, w), e)| a * z + b * w * e)
        .collect();
    Ok(LatentState {
        z,
        t,
        w_n: w_n.to_vec(),
        eps,
    })
}

/// One forward transition `z_t = √α_t·z_{t−1} + √(1−α_t)·(w ⊙ ε)`.
pub fn diffuse_step(z_prev: &[f64], t: usize, sched: &NoiseSchedule, w_n: &[f64], eps: &[f64]) -> Result<Vec<f64>> {
    sched.check_step(t)?;
    check_weights(w_n, z_prev.len())?;
    let (a, b) = (sched.alpha(t).sqrt(), (1.0 - sched.alpha(t)).sqrt());
    Ok(z_prev
        .iter()
        .zip(w_n)
        .zip(eps)
        .map(|((z, w), e)| a * z + b * w * e)
        .collect())
}

/// Step whose marginal noise-to-signal ratio is closest to `noise_var_eq`.
/// Ties resolve to the smaller step.
pub fn select_steps(noise_var_eq: f64, sched: &NoiseSchedule) -> usize {
    if noise_var_eq.is_nan() || noise_var_eq <= 0.0 {
        return 0;
    }
    let mut best = (0, noise_var_eq);
    for t in 1..=sched.t_steps() {
        let gap = (sched.snr_ratio(t) - noise_var_eq).abs();
        if gap < best.1 {
            best = (t, gap);
        }
    }
    best.0
}

/// Denoises `y_r` with the step count chosen by [`select_steps`].
pub fn reverse_denoise(
    y_r: &[f64],
    h_r: &[f64],
    noise_var_eq: f64,
    sched: &NoiseSchedule,
    w_n: &[f64],
    predictor: &Predictor,
) -> Result<Vec<f64>> {
    reverse_from(y_r, h_r, select_steps(noise_var_eq, sched), sched, w_n, predictor)
}

/// Runs the deterministic reverse chain from step `m` down to a clean estimate.
pub fn reverse_from(
    y_r: &[f64],
    h_r: &[f64],
    m: usize,
    sched: &NoiseSchedule,
    w_n: &[f64],
    predictor: &Predictor,
) -> Result<Vec<f64>> {
    check_weights(w_n, y_r.len())?;
    if m == 0 {
        return Ok(y_r.to_vec());
    }
    sched.check_step(m)?;
    let mut z: Vec<f64> = y_r.iter().map(|v| sched.alpha_bar(m).sqrt() * v).collect();
    for t in (1..=m).rev() {
        let eps = predictor.predict_eps(&z, h_r, t, sched.t_steps())?;
        let (a, b) = (sched.alpha_bar(t).sqrt(), (1.0 - sched.alpha_bar(t)).sqrt());
        let z0_hat = z.iter().zip(w_n).zip(&eps).map(|((z, w), e)| (z - b * w * e) / a);
        if t == 1 {
            return Ok(z0_hat.collect());
        }
        let (a_prev, b_prev) = (sched.alpha_bar(t - 1).sqrt(), (1.0 - sched.alpha_bar(t - 1)).sqrt());
        z = z0_hat
            .zip(w_n)
            .zip(&eps)
            .map(|((x0, w), e)| a_prev * x0 + b_prev * w * e)
            .collect();
    }
    unreachable!("loop returns at t = 1")
}

/// Noise that makes `y_r = z0 + noise` an exact step-`m` sample for the oracle
/// predictor: `ε = √(ᾱ_m/(1−ᾱ_m))·noise/w`.
pub fn oracle_eps(noise: &[f64], m: usize, sched: &NoiseSchedule, w_n: &[f64]) -> Result<Vec<f64>> {
    sched.check_step(m)?;
    check_weights(w_n, noise.len())?;
    let k = sched.snr_ratio(m).sqrt().recip();
    Ok(noise.iter().zip(w_n).map(|(n, w)| k * n / w).collect())
}

/// Per-component noise weights from per-symbol residual noise standard
/// deviations, normalized to unit mean. Both real components of a symbol share
/// its weight. All ones when every deviation is zero.
pub fn noise_weights(post_eq_noise_std: &[f64], latent_len: usize) -> Vec<f64> {
    let stds: Vec<f64> = (0..latent_len).map(|i| post_eq_noise_std.get(i / 2).copied().unwrap_or(0.0)).collect();
    let mean = stds.iter().sum::<f64>() / latent_len.max(1) as f64;
    if mean > 0.0 && stds.iter().all(|s| *s > 0.0) {
        stds.iter().map(|s| s / mean).collect()
    } else {
        vec![1.0; latent_len]
    }
}
