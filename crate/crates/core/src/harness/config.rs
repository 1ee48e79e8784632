use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detection::DetectorConfig;
use crate::diffusion::DiffusionConfig;
use crate::error::{Error, Result};
use crate::params::{validate_params, OtfsParams, DEFAULT_CARRIER_HZ};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OtfsConfig {
    pub n_doppler: usize,
    pub m_delay: usize,
    pub subcarrier_spacing_hz: f64,
    pub carrier_freq_hz: f64,
}

impl Default for OtfsConfig {
    fn default() -> Self {
        Self {
            n_doppler: 16,
            m_delay: 32,
            subcarrier_spacing_hz: 15e3,
            carrier_freq_hz: DEFAULT_CARRIER_HZ,
        }
    }
}

impl OtfsConfig {
    pub fn paper_scale() -> Self {
        Self {
            n_doppler: 128,
            m_delay: 256,
            ..Self::default()
        }
    }

    pub fn params(&self) -> Result<OtfsParams> {
        OtfsParams::new(self.n_doppler, self.m_delay, self.subcarrier_spacing_hz, self.carrier_freq_hz)
            .and_then(validate_params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ChannelMode {
    /// Random sparse delay-Doppler channel per frame.
    #[default]
    Multipath,
    /// Noise only: no channel and no equalizer.
    Awgn,
    /// Unit channel with the configured detector.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub mode: ChannelMode,
    pub n_paths: usize,
    pub max_delay_tap: usize,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            mode: ChannelMode::Multipath,
            n_paths: 4,
            max_delay_tap: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DenoiserKind {
    /// Skip the diffusion stage.
    #[default]
    None,
    Zero,
    /// Genie predictor fed with the exact noise at the detector output.
    Oracle,
    /// Feed-forward network loaded from `weights`.
    Mlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiserConfig {
    pub kind: DenoiserKind,
    pub weights: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PayloadKind {
    /// Uniform random bits, QPSK mapped.
    #[default]
    Bits,
    /// Real latent vectors, standard normal or read from `latent_file`.
    Latent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PayloadConfig {
    pub kind: PayloadKind,
    /// Latent length; defaults to the full grid capacity `2·N·M`.
    pub latent_dim: Option<usize>,
    /// Rank-1 or rank-2 real tensor of latents, one per row, used cyclically.
    pub latent_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub snr_db: Vec<f64>,
    pub speeds_kmh: Vec<f64>,
    pub frames_per_point: usize,
    pub seed: u64,
    pub psnr_peak: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            snr_db: vec![0.0, 5.0, 10.0, 15.0],
            speeds_kmh: vec![350.0, 500.0, 650.0],
            frames_per_point: 200,
            seed: 1,
            psnr_peak: 1.0,
        }
    }
}

/// Complete simulation configuration, read from TOML.
///
/// Every table is optional:
///
/// ```toml
/// [otfs]
/// n_doppler = 16
/// m_delay = 32
/// [channel]
/// mode = "multipath"   # or "awgn", "identity"
/// n_paths = 4
/// max_delay_tap = 4
/// [detector]
/// kind = "mrc"         # or "lmmse"
/// max_iter = 20
/// damping = 0.5
/// [diffusion]
/// t_steps = 200
/// alpha_1 = 0.9999
/// alpha_t = 0.98
/// [denoiser]
/// kind = "oracle"      # or "none", "zero", "mlp" (with weights = "w.json")
/// [payload]
/// kind = "latent"      # or "bits"
/// [sweep]
/// snr_db = [0, 5, 10, 15]
/// speeds_kmh = [350, 500, 650]
/// frames_per_point = 200
/// seed = 1
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub otfs: OtfsConfig,
    pub channel: ChannelConfig,
    pub detector: DetectorConfig,
    pub diffusion: DiffusionConfig,
    pub denoiser: DenoiserConfig,
    pub payload: PayloadConfig,
    pub sweep: SweepConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(dir) = path.parent() {
            let rebase = |p: &mut Option<PathBuf>| {
                if let Some(inner) = p.as_mut().filter(|p| p.is_relative()) {
                    *inner = dir.join(&*inner);
                }
            };
            rebase(&mut cfg.denoiser.weights);
            rebase(&mut cfg.payload.latent_file);
        }
        Ok(cfg)
    }

    pub fn params(&self) -> Result<OtfsParams> {
        self.otfs.params()
    }

    pub fn validate(&self) -> Result<()> {
        let config = |e: Error| Error::Config(e.to_string());
        let p = self.params().map_err(config)?;
        self.diffusion.schedule().map_err(config)?;
        let fail = |msg: String| Err(Error::Config(msg));
        if self.sweep.snr_db.is_empty() {
            return fail("sweep.snr_db must not be empty".into());
        }
        if self.sweep.speeds_kmh.is_empty() {
            return fail("sweep.speeds_kmh must not be empty".into());
        }
        if self.sweep.snr_db.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return fail("sweep.snr_db entries must be numbers or +inf".into());
        }
        if self.sweep.speeds_kmh.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return fail("sweep.speeds_kmh entries must be non-negative".into());
        }
        if self.sweep.frames_per_point == 0 {
            return fail("sweep.frames_per_point must be at least 1".into());
        }
        if !(self.sweep.psnr_peak > 0.0 && self.sweep.psnr_peak.is_finite()) {
            return fail("sweep.psnr_peak must be positive".into());
        }
        let ch = &self.channel;
        if ch.mode == ChannelMode::Multipath
            && (ch.n_paths == 0 || ch.max_delay_tap >= p.m_delay || ch.n_paths > ch.max_delay_tap + 1)
        {
            return fail(format!(
                "channel needs 1 <= n_paths <= max_delay_tap + 1 and max_delay_tap < {}",
                p.m_delay
            ));
        }
        if self.detector.max_iter == 0 || !(self.detector.damping > 0.0 && self.detector.damping <= 1.0) {
            return fail("detector needs max_iter >= 1 and damping in (0, 1]".into());
        }
        if self.denoiser.kind == DenoiserKind::Mlp && self.denoiser.weights.is_none() {
            return fail("denoiser.kind = \"mlp\" needs denoiser.weights".into());
        }
        if let Some(dim) = self.payload.latent_dim {
            if dim == 0 || dim > 2 * p.frame_len() {
                return fail(format!("payload.latent_dim must lie in 1..={}", 2 * p.frame_len()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.params().unwrap().frame_len(), 512);
    }

    #[test]
    fn full_file() {
        let cfg = RunConfig::from_toml_str(
            r#"
            [otfs]
            n_doppler = 8
            m_delay = 8
            [channel]
            mode = "awgn"
            [detector]
            kind = "lmmse"
            [diffusion]
            t_steps = 50
            [denoiser]
            kind = "oracle"
            [payload]
            kind = "latent"
            latent_dim = 100
            [sweep]
            snr_db = [0, 10]
            speeds_kmh = [500]
            frames_per_point = 3
            seed = 9
            "#,
        )
        .unwrap();
        assert_eq!(cfg.channel.mode, ChannelMode::Awgn);
        assert_eq!(cfg.diffusion.t_steps, 50);
        assert_eq!(cfg.diffusion.alpha_1, 0.9999);
        assert_eq!(cfg.sweep.snr_db, vec![0.0, 10.0]);
        assert_eq!(cfg.payload.latent_dim, Some(100));
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "[sweep]\nsnr_db = []",
            "[sweep]\nframes_per_point = 0",
            "[otfs]\nn_doppler = 12",
            "[channel]\nn_paths = 9\nmax_delay_tap = 4",
            "[denoiser]\nkind = \"mlp\"",
            "[payload]\nlatent_dim = 5000",
            "[detector]\ndamping = 0",
            "[diffusion]\nalpha_1 = 1.5",
            "[unknown]\nx = 1",
            "not toml [",
        ] {
            assert!(matches!(RunConfig::from_toml_str(text), Err(Error::Config(_))), "{text}");
        }
    }
}
