use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ChannelMode, DenoiserKind, PayloadKind, RunConfig};
use super::metrics::{psnr, MetricRow};
use super::seeds::{derive_seed, stage};
use crate::channel::{add_awgn_with, apply_channel, gen_channel, ChannelSpec};
use crate::detection::{channel_csi, fit_csi, EqualizedFrame, PreparedDetector};
use crate::diffusion::{
    gaussian_vector, load_predictor, noise_weights, oracle_eps, reverse_from, select_steps, NoiseSchedule, Predictor,
};
use crate::error::{Error, Result};
use crate::mapping::{deinterleave, interleave, pack_latent, qpsk_map, unpack_latent, BitBuffer};
use crate::params::{DDGrid, OtfsParams, TimeSignal};
use crate::tensor::read_tensor;
use crate::transforms::OtfsTransform;

/// Transmitted payload of one frame.
#[derive(Debug, Clone)]
pub enum Payload {
    Bits(BitBuffer),
    Latent(Vec<f64>),
}

/// Everything the receiver knows about one frame after detection.
#[derive(Debug, Clone)]
pub struct Received {
    /// Real vector the denoiser works on: the latent estimate, or the
    /// interleaved QPSK symbols in bit mode.
    pub latent: Vec<f64>,
    /// Transmitted counterpart of `latent`.
    pub reference: Vec<f64>,
    /// Latent units per grid unit.
    pub scale: f64,
    pub equalized: EqualizedFrame,
    /// Channel noise as it appears at the detector output, in latent units.
    pub latent_noise: Vec<f64>,
    /// Per-component noise weights.
    pub w_n: Vec<f64>,
    /// Mean per-component noise variance in latent units.
    pub noise_var_eq: f64,
    pub csi: Vec<f64>,
    pub symbol_mse: f64,
}

/// Per-frame outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameStats {
    pub bit_errors: usize,
    pub bits: usize,
    pub symbol_errors: usize,
    pub symbols: usize,
    pub symbol_mse: f64,
    pub latent_mse: f64,
    pub psnr_db: Option<f64>,
    pub steps: usize,
}

/// A configured transmit/receive chain.
pub struct Pipeline {
    cfg: RunConfig,
    params: OtfsParams,
    transform: OtfsTransform,
    schedule: NoiseSchedule,
    predictor: Option<Predictor>,
    latents: Option<Vec<Vec<f64>>>,
}

impl Pipeline {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let params = cfg.params()?;
        let predictor = match cfg.denoiser.kind {
            DenoiserKind::Mlp => {
                let path = cfg.denoiser.weights.as_ref().expect("validated");
                Some(load_predictor(path)?)
            }
            DenoiserKind::Zero => Some(Predictor::Zero),
            DenoiserKind::None | DenoiserKind::Oracle => None,
        };
        let latents = match (&cfg.payload.kind, &cfg.payload.latent_file) {
            (PayloadKind::Latent, Some(path)) => Some(load_latents(path, cfg, &params)?),
            _ => None,
        };
        Ok(Self {
            cfg: cfg.clone(),
            transform: OtfsTransform::for_params(&params),
            schedule: cfg.diffusion.schedule()?,
            params,
            predictor,
            latents,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn params(&self) -> &OtfsParams {
        &self.params
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    pub fn latent_dim(&self) -> usize {
        match (&self.latents, self.cfg.payload.kind) {
            (Some(rows), _) => rows[0].len(),
            (None, PayloadKind::Latent) => self.cfg.payload.latent_dim.unwrap_or(2 * self.params.frame_len()),
            (None, PayloadKind::Bits) => 2 * self.params.frame_len(),
        }
    }

    pub fn payload(&self, frame: u64) -> Payload {
        let seed = derive_seed(self.cfg.sweep.seed, stage::PAYLOAD, frame);
        match self.cfg.payload.kind {
            PayloadKind::Bits => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Payload::Bits(BitBuffer::new(
                    (0..2 * self.params.frame_len()).map(|_| rng.random_range(0..2u8)).collect::<Vec<_>>(),
                ))
            }
            PayloadKind::Latent => match &self.latents {
                Some(rows) => Payload::Latent(rows[frame as usize % rows.len()].clone()),
                None => Payload::Latent(gaussian_vector(self.latent_dim(), seed)),
            },
        }
    }

    fn channel(&self, speed_kmh: f64, frame: u64) -> Result<Option<ChannelSpec>> {
        let ch = &self.cfg.channel;
        Ok(match ch.mode {
            ChannelMode::Awgn => None,
            ChannelMode::Identity => Some(ChannelSpec::identity()),
            ChannelMode::Multipath => Some(gen_channel(
                &self.params,
                speed_kmh,
                ch.n_paths,
                ch.max_delay_tap,
                derive_seed(self.cfg.sweep.seed, stage::CHANNEL, frame),
            )?),
        })
    }

    /// Transmits one frame and runs detection.
    pub fn receive(&self, payload: &Payload, snr_db: f64, speed_kmh: f64, frame: u64) -> Result<Received> {
        let p = &self.params;
        let (grid, scale, reference) = match payload {
            Payload::Bits(bits) => {
                let symbols = qpsk_map(bits)?;
                let reference: Vec<f64> = interleave(&symbols).collect();
                (DDGrid::from_vec(p.n_doppler, p.m_delay, symbols)?, 1.0, reference)
            }
            Payload::Latent(z) => {
                let packed = pack_latent(z, p)?;
                (packed.grid, packed.scale, z.clone())
            }
        };
        let len = reference.len();
        let used = len.div_ceil(2);

        let tx = self.transform.modulate(&grid)?;
        let channel = self.channel(speed_kmh, frame)?;
        let rx = match &channel {
            Some(ch) => apply_channel(&tx, ch, p)?,
            None => tx,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.cfg.sweep.seed, stage::NOISE, frame));
        let noisy = add_awgn_with(&rx, snr_db, &mut rng)?;
        let y = self.transform.demodulate(&noisy.signal)?;
        let noise_dd = self.transform.demodulate(&TimeSignal::new(noisy.noise, p)?)?;

        let (equalized, noise_out) = match &channel {
            None => {
                let std = noisy.noise_var.sqrt();
                let frame = EqualizedFrame {
                    symbols: y,
                    post_eq_noise_std: vec![std; p.frame_len()],
                    csi: vec![1.0; p.frame_len()],
                    iterations: 0,
                    converged: true,
                };
                (frame, noise_dd)
            }
            Some(ch) => {
                let det = PreparedDetector::new(&self.cfg.detector, ch, noisy.noise_var, p)?;
                let frame = det.detect(&y, channel_csi(ch, p));
                let noise_out = det.replay(&noise_dd, frame.iterations);
                (frame, noise_out)
            }
        };

        let symbol_mse = equalized.symbols.as_slice()[..used]
            .iter()
            .zip(&grid.as_slice()[..used])
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            / used as f64;
        let latent = unpack_latent(&equalized.symbols, len, scale)?;
        let latent_noise = unpack_latent(&noise_out, len, scale)?;
        let stds = &equalized.post_eq_noise_std[..used];
        let mean_std = stds.iter().sum::<f64>() / used as f64;
        let w_n = noise_weights(stds, len);
        let csi = fit_csi(&equalized.csi, len);
        Ok(Received {
            latent,
            reference,
            scale,
            latent_noise,
            w_n,
            noise_var_eq: mean_std * mean_std / (2.0 * scale * scale),
            csi,
            symbol_mse,
            equalized,
        })
    }

    /// Runs the configured denoiser; returns the estimate and the step count.
    pub fn denoise(&self, rx: &Received) -> Result<(Vec<f64>, usize)> {
        if self.cfg.denoiser.kind == DenoiserKind::None {
            return Ok((rx.latent.clone(), 0));
        }
        let m = select_steps(rx.noise_var_eq, &self.schedule);
        if m == 0 {
            return Ok((rx.latent.clone(), 0));
        }
        let oracle;
        let predictor = match &self.predictor {
            Some(p) => p,
            None => {
                oracle = Predictor::Oracle(oracle_eps(&rx.latent_noise, m, &self.schedule, &rx.w_n)?);
                &oracle
            }
        };
        let r = reverse_from(&rx.latent, &rx.csi, m, &self.schedule, &rx.w_n, predictor)?;
        Ok((r, m))
    }

    pub fn run_frame(&self, snr_db: f64, speed_kmh: f64, frame: u64) -> Result<FrameStats> {
        let payload = self.payload(frame);
        let rx = self.receive(&payload, snr_db, speed_kmh, frame)?;
        let (estimate, steps) = self.denoise(&rx)?;
        let latent_mse = mse(&estimate, &rx.reference);

        let (bit_errors, bits, symbol_errors, symbols) = match &payload {
            Payload::Bits(tx) => {
                let symbols = deinterleave(&estimate);
                let decided = crate::mapping::qpsk_demap(&symbols);
                let symbol_errors = tx
                    .bits()
                    .chunks(2)
                    .zip(decided.bits().chunks(2))
                    .filter(|(a, b)| a != b)
                    .count();
                (tx.hamming(&decided), tx.len(), symbol_errors, symbols.len())
            }
            Payload::Latent(z) => {
                let wrong: Vec<bool> = z.iter().zip(&estimate).map(|(a, b)| (*a < 0.0) != (*b < 0.0)).collect();
                let symbol_errors = wrong.chunks(2).filter(|c| c.iter().any(|w| *w)).count();
                (wrong.iter().filter(|w| **w).count(), z.len(), symbol_errors, z.len().div_ceil(2))
            }
        };
        let psnr_db = match payload {
            Payload::Latent(_) => Some(psnr(&rx.reference, &estimate, self.cfg.sweep.psnr_peak)?),
            Payload::Bits(_) => None,
        };
        Ok(FrameStats {
            bit_errors,
            bits,
            symbol_errors,
            symbols,
            symbol_mse: rx.symbol_mse,
            latent_mse,
            psnr_db,
            steps,
        })
    }

    /// Simulates `frames_per_point` frames at one operating point.
    pub fn run_point(&self, snr_db: f64, speed_kmh: f64) -> Result<MetricRow> {
        let frames = self.cfg.sweep.frames_per_point;
        let stats = (0..frames as u64)
            .into_par_iter()
            .map(|f| self.run_frame(snr_db, speed_kmh, f))
            .collect::<Result<Vec<_>>>()?;
        Ok(MetricRow::aggregate(snr_db, speed_kmh, &stats))
    }
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len().max(1) as f64
}

fn load_latents(path: &std::path::Path, cfg: &RunConfig, p: &OtfsParams) -> Result<Vec<Vec<f64>>> {
    let t = read_tensor(path)?;
    let values = t.to_f64()?;
    let dim = match t.dims() {
        [d] => *d,
        [_, d] => *d,
        dims => return Err(Error::Config(format!("latent file must be rank 1 or 2, got dims {dims:?}"))),
    };
    if dim > 2 * p.frame_len() {
        return Err(Error::Capacity {
            len: dim,
            capacity: 2 * p.frame_len(),
        });
    }
    if let Some(want) = cfg.payload.latent_dim.filter(|d| *d != dim) {
        return Err(Error::Config(format!("latent file rows hold {dim} values, config says {want}")));
    }
    Ok(values.chunks(dim).map(<[f64]>::to_vec).collect())
}

/// Runs one operating point of `cfg`.
pub fn run_point(cfg: &RunConfig, snr_db: f64, speed_kmh: f64) -> Result<MetricRow> {
    Pipeline::new(cfg)?.run_point(snr_db, speed_kmh)
}

/// Runs every `(speed, snr)` pair; rows are ordered by speed, then SNR.
pub fn sweep(cfg: &RunConfig) -> Result<Vec<MetricRow>> {
    let pipeline = Pipeline::new(cfg)?;
    let mut points: Vec<(f64, f64)> = cfg
        .sweep
        .speeds_kmh
        .iter()
        .flat_map(|&v| cfg.sweep.snr_db.iter().map(move |&s| (v, s)))
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    points
        .into_iter()
        .map(|(speed, snr)| pipeline.run_point(snr, speed))
        .collect()
}
