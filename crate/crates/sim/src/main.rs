use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use otfs_core::diffusion::{load_predictor, DiffusionConfig};
use otfs_core::harness::{self, DenoiserKind, OtfsConfig, Pipeline, RunConfig};
use otfs_core::tensor::{read_tensor, write_tensor};

#[derive(Parser)]
#[command(name = "sim", version, about = "OTFS link simulation with diffusion denoising")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep every SNR and speed in the config and write a CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Use a trained predictor instead of the configured denoiser.
        #[arg(long, conflicts_with = "no_denoise")]
        predictor: Option<PathBuf>,
        #[arg(long)]
        no_denoise: bool,
        /// Run on the 128 x 256 grid.
        #[arg(long)]
        paper_scale: bool,
    },
    /// Simulate a single operating point.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        snr: f64,
        #[arg(long)]
        speed: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a noise-prediction training set.
    GenDataset {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write the clean latents and noise weights.
        #[arg(long)]
        sideband: Option<PathBuf>,
        /// Defaults to the first SNR of the sweep.
        #[arg(long, allow_negative_numbers = true)]
        snr: Option<f64>,
        /// Defaults to the first speed of the sweep.
        #[arg(long)]
        speed: Option<f64>,
    },
    /// Denoise received latents with a trained predictor.
    Denoise {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        csi: PathBuf,
        #[arg(long)]
        sigma2: f64,
        #[arg(long)]
        predictor: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Take the noise schedule from this config.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the built-in consistency checks.
    Selftest,
}

/// Failure with the exit code it maps to.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(err: E) -> Self {
        let err = err.into();
        match err.downcast_ref::<otfs_core::Error>() {
            Some(otfs_core::Error::Config(_)) => Failure::Config(err),
            _ => Failure::Runtime(err),
        }
    }
}

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    RunConfig::from_path(path)
        .with_context(|| format!("loading {}", path.display()))
        .map_err(Failure::Config)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Sweep {
            config,
            out,
            predictor,
            no_denoise,
            paper_scale,
        } => {
            let mut cfg = load_config(&config)?;
            if paper_scale {
                cfg.otfs = OtfsConfig {
                    carrier_freq_hz: cfg.otfs.carrier_freq_hz,
                    subcarrier_spacing_hz: cfg.otfs.subcarrier_spacing_hz,
                    ..OtfsConfig::paper_scale()
                };
            }
            if let Some(path) = predictor {
                cfg.denoiser.kind = DenoiserKind::Mlp;
                cfg.denoiser.weights = Some(path);
            }
            if no_denoise {
                cfg.denoiser.kind = DenoiserKind::None;
            }
            cfg.validate()?;
            let rows = harness::sweep(&cfg)?;
            harness::write_csv(&out, &rows)?;
            eprintln!("wrote {} rows to {}", rows.len(), out.display());
        }
        Command::Run { config, snr, speed, out } => {
            let cfg = load_config(&config)?;
            if snr.is_nan() || !(speed >= 0.0 && speed.is_finite()) {
                return Err(Failure::Config(anyhow::anyhow!("invalid --snr or --speed")));
            }
            let row = harness::run_point(&cfg, snr, speed)?;
            harness::write_csv(&out, std::slice::from_ref(&row))?;
            println!("{}", row.to_csv_line());
        }
        Command::GenDataset {
            config,
            count,
            out,
            sideband,
            snr,
            speed,
        } => {
            let cfg = load_config(&config)?;
            if count == 0 {
                return Err(Failure::Config(anyhow::anyhow!("--count must be at least 1")));
            }
            let snr = snr.unwrap_or(cfg.sweep.snr_db[0]);
            let speed = speed.unwrap_or(cfg.sweep.speeds_kmh[0]);
            let pipeline = Pipeline::new(&cfg)?;
            let ds = harness::gen_dataset(&pipeline, count, snr, speed)?;
            harness::write_dataset(&ds, &out, sideband.as_deref())?;
            eprintln!("wrote {count} samples of latent dim {} to {}", ds.latent_dim, out.display());
        }
        Command::Denoise {
            input,
            csi,
            sigma2,
            predictor,
            out,
            config,
        } => {
            let diffusion = match config {
                Some(path) => load_config(&path)?.diffusion,
                None => DiffusionConfig::default(),
            };
            let sched = diffusion.schedule()?;
            let predictor = load_predictor(&predictor)?;
            let rx = read_tensor(&input)?;
            let csi = read_tensor(&csi)?;
            let clean = harness::denoise_tensor(&rx, &csi, sigma2, &sched, &predictor)?;
            write_tensor(&out, &clean)?;
        }
        Command::Selftest => {
            let checks = otfs_core::selftest::run();
            let failed = checks.iter().filter(|c| !c.passed).count();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if failed > 0 {
                return Err(Failure::Runtime(anyhow::anyhow!("{failed} check(s) failed")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
