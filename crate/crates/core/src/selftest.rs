//! Quick consistency checks runnable from a release binary.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{apply_channel, ChannelSpec, PathSpec};
use crate::detection::{lmmse_detect, mrc_detect};
use crate::diffusion::{forward_diffuse, gaussian_vector, linear_schedule, reverse_from, select_steps, Predictor};
use crate::harness::{to_csv, ChannelMode, DenoiserKind, PayloadKind, RunConfig};
use crate::mapping::{qpsk_demap, qpsk_map, BitBuffer};
use crate::params::{DDGrid, OtfsParams};
use crate::transforms::OtfsTransform;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, result: Result<String, String>) -> Check {
    match result {
        Ok(detail) => Check { name, passed: true, detail },
        Err(detail) => Check { name, passed: false, detail },
    }
}

fn random_grid(p: &OtfsParams, rng: &mut ChaCha8Rng) -> DDGrid {
    let data = (0..p.frame_len())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    DDGrid::from_vec(p.n_doppler, p.m_delay, data).expect("sized")
}

fn qpsk_grid(p: &OtfsParams, rng: &mut ChaCha8Rng) -> DDGrid {
    let bits: Vec<u8> = (0..2 * p.frame_len()).map(|_| rng.random_range(0..2)).collect();
    let symbols = qpsk_map(&BitBuffer::new(bits)).expect("even");
    DDGrid::from_vec(p.n_doppler, p.m_delay, symbols).expect("sized")
}

fn transform_round_trip() -> Result<String, String> {
    let p = OtfsParams::desk();
    let t = OtfsTransform::for_params(&p);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x = random_grid(&p, &mut rng);
        let back = t.demodulate(&t.modulate(&x).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        worst = worst.max(back.max_abs_diff(&x));
    }
    if worst < 1e-12 {
        Ok(format!("max error {worst:.2e}"))
    } else {
        Err(format!("max error {worst:.2e}"))
    }
}

fn detectors_agree() -> Result<String, String> {
    let p = OtfsParams::new(8, 8, 15e3, 4e9).map_err(|e| e.to_string())?;
    let t = OtfsTransform::for_params(&p);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for seed in 0..10u32 {
        let ch = ChannelSpec::new(
            vec![
                PathSpec {
                    gain: Complex64::new(0.8, 0.0),
                    delay_tap: 0,
                    doppler_tap: 0,
                },
                PathSpec {
                    gain: Complex64::from_polar(0.6, seed as f64),
                    delay_tap: 1 + (seed % 3) as usize,
                    doppler_tap: (seed % 5) as i64 - 2,
                },
            ],
            &p,
        )
        .map_err(|e| e.to_string())?;
        let x = qpsk_grid(&p, &mut rng);
        let y = t
            .demodulate(&apply_channel(&t.modulate(&x).map_err(|e| e.to_string())?, &ch, &p).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let want = qpsk_demap(x.as_slice());
        let a = lmmse_detect(&y, &ch, 0.0, &p).map_err(|e| e.to_string())?;
        let b = mrc_detect(&y, &ch, 0.0, &p, 20, 0.5).map_err(|e| e.to_string())?;
        if qpsk_demap(a.symbols.as_slice()) != want || qpsk_demap(b.symbols.as_slice()) != want {
            return Err(format!("bit errors on noiseless two-path channel {seed}"));
        }
    }
    let single = ChannelSpec::new(
        vec![PathSpec {
            gain: Complex64::from_polar(1.0, 0.4),
            delay_tap: 2,
            doppler_tap: -1,
        }],
        &p,
    )
    .map_err(|e| e.to_string())?;
    let y = random_grid(&p, &mut rng);
    let a = lmmse_detect(&y, &single, 0.1, &p).map_err(|e| e.to_string())?;
    let b = mrc_detect(&y, &single, 0.1, &p, 20, 0.5).map_err(|e| e.to_string())?;
    let gap = a.symbols.max_abs_diff(&b.symbols);
    if gap < 1e-6 {
        Ok(format!("noiseless BER 0, single-path gap {gap:.1e}"))
    } else {
        Err(format!("single-path gap {gap:.1e}"))
    }
}

fn oracle_sampler() -> Result<String, String> {
    let sched = linear_schedule(200, 0.9999, 0.98).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for m in [1, 10, 50, 200] {
        let z0 = gaussian_vector(64, m as u64);
        let w = vec![1.0; 64];
        let st = forward_diffuse(&z0, m, &sched, &w, 99).map_err(|e| e.to_string())?;
        let y: Vec<f64> = st.z.iter().map(|v| v / sched.alpha_bar(m).sqrt()).collect();
        let r = reverse_from(&y, &[], m, &sched, &w, &Predictor::Oracle(st.eps)).map_err(|e| e.to_string())?;
        let err = r.iter().zip(&z0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = z0.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst = worst.max(err / norm);
    }
    let mut prev = 0;
    for i in 0..100 {
        let m = select_steps(10f64.powf(-5.0 + 0.05 * i as f64), &sched);
        if m < prev {
            return Err("step selection not monotone".into());
        }
        prev = m;
    }
    if worst < 1e-6 {
        Ok(format!("relative error {worst:.1e}"))
    } else {
        Err(format!("relative error {worst:.1e}"))
    }
}

fn lossless_pipeline() -> Result<String, String> {
    let mut cfg = RunConfig::default();
    cfg.channel.mode = ChannelMode::Identity;
    cfg.denoiser.kind = DenoiserKind::None;
    cfg.sweep.snr_db = vec![f64::INFINITY];
    cfg.sweep.speeds_kmh = vec![0.0];
    cfg.sweep.frames_per_point = 4;
    for kind in [PayloadKind::Bits, PayloadKind::Latent] {
        cfg.payload.kind = kind;
        let row = crate::harness::run_point(&cfg, f64::INFINITY, 0.0).map_err(|e| e.to_string())?;
        if row.ber != 0.0 || row.symbol_mse > 1e-12 {
            return Err(format!("{kind:?}: ber {} symbol mse {}", row.ber, row.symbol_mse));
        }
    }
    Ok("bits and latents recovered".into())
}

fn deterministic_sweep() -> Result<String, String> {
    let mut cfg = RunConfig::default();
    cfg.otfs.n_doppler = 8;
    cfg.otfs.m_delay = 8;
    cfg.payload.kind = PayloadKind::Latent;
    cfg.denoiser.kind = DenoiserKind::Oracle;
    cfg.sweep.snr_db = vec![5.0, 10.0];
    cfg.sweep.speeds_kmh = vec![350.0, 650.0];
    cfg.sweep.frames_per_point = 4;
    let a = crate::harness::sweep(&cfg).map_err(|e| e.to_string())?;
    let b = crate::harness::sweep(&cfg).map_err(|e| e.to_string())?;
    if to_csv(&a) == to_csv(&b) {
        Ok(format!("{} rows identical", a.len()))
    } else {
        Err("re-run differs".into())
    }
}

/// Runs every check.
pub fn run() -> Vec<Check> {
    vec![
        check("transform round trip", transform_round_trip()),
        check("detectors", detectors_agree()),
        check("oracle sampler", oracle_sampler()),
        check("lossless pipeline", lossless_pipeline()),
        check("deterministic sweep", deterministic_sweep()),
    ]
}
