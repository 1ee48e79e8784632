//! Doubly dispersive channel: sparse integer delay/Doppler paths applied as a
//! cyclic convolution over the frame, plus AWGN at a per-frame SNR.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{DDGrid, OtfsParams, TimeSignal};
use crate::tensor::Tensor;
use crate::transforms::OtfsTransform;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSpec {
    pub gain: Complex64,
    /// Delay in samples, `0..M`.
    pub delay_tap: usize,
    /// Doppler in bins of `1/(N·T)`, within `(−N/2, N/2]`.
    pub doppler_tap: i64,
}

impl PathSpec {
    fn check(&self, p: &OtfsParams) -> Result<()> {
        let half = (p.n_doppler / 2) as i64;
        if self.delay_tap >= p.m_delay {
            return Err(Error::Value(format!(
                "delay tap {} outside 0..{}",
                self.delay_tap, p.m_delay
            )));
        }
        if self.doppler_tap <= -half || self.doppler_tap > half {
            return Err(Error::Value(format!(
                "Doppler tap {} outside ({}, {}]",
                self.doppler_tap, -half, half
            )));
        }
        if !(self.gain.re.is_finite() && self.gain.im.is_finite()) {
            return Err(Error::Value("path gain is not finite".into()));
        }
        Ok(())
    }
}

/// Sparse delay-Doppler channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    paths: Vec<PathSpec>,
}

impl ChannelSpec {
    pub fn new(paths: Vec<PathSpec>, p: &OtfsParams) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::Value("channel needs at least one path".into()));
        }
        for path in &paths {
            path.check(p)?;
        }
        Ok(Self { paths })
    }

    /// Single unit path with no delay or Doppler.
    pub fn identity() -> Self {
        Self {
            paths: vec![PathSpec {
                gain: Complex64::new(1.0, 0.0),
                delay_tap: 0,
                doppler_tap: 0,
            }],
        }
    }

    pub fn paths(&self) -> &[PathSpec] {
        &self.paths
    }

    /// `Σ |gain|²`.
    pub fn power(&self) -> f64 {
        self.paths.iter().map(|p| p.gain.norm_sqr()).sum()
    }

    /// Rank-2 tensor, one row `[Re g, Im g, delay, doppler]` per path.
    pub fn to_tensor(&self) -> Tensor {
        let values = self
            .paths
            .iter()
            .flat_map(|p| [p.gain.re, p.gain.im, p.delay_tap as f64, p.doppler_tap as f64])
            .collect();
        Tensor::from_f64(vec![self.paths.len(), 4], values).expect("shape is consistent")
    }

    pub fn from_tensor(t: &Tensor, p: &OtfsParams) -> Result<Self> {
        if t.dims().len() != 2 || t.dims()[1] != 4 {
            return Err(Error::Format(format!("channel tensor must be paths × 4, got {:?}", t.dims())));
        }
        let values = t.to_f64()?;
        let paths = values
            .chunks_exact(4)
            .map(|row| {
                if row[2] < 0.0 || row[2].fract() != 0.0 || row[3].fract() != 0.0 {
                    return Err(Error::Format(format!("non-integer taps in row {row:?}")));
                }
                Ok(PathSpec {
                    gain: Complex64::new(row[0], row[1]),
                    delay_tap: row[2] as usize,
                    doppler_tap: row[3] as i64,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(paths, p)
    }
}

/// Bookkeeping for one simulated channel draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub ue_speed_kmh: f64,
    pub snr_db: f64,
    pub seed: u64,
}

/// Maximum Doppler shift `v·f_c/c` for a speed in km/h.
pub fn max_doppler_hz(speed_kmh: f64, carrier_hz: f64) -> Result<f64> {
    if !(speed_kmh >= 0.0 && speed_kmh.is_finite()) {
        return Err(Error::Value(format!("speed {speed_kmh} km/h must be non-negative")));
    }
    Ok(speed_kmh / 3.6 * carrier_hz / SPEED_OF_LIGHT)
}

/// Draws a random sparse channel.
///
/// Path 0 sits at delay 0; the others take distinct delays from
/// `1..=max_delay_tap`. Gains are complex Gaussian normalized to unit total
/// power. Path `i` sees Doppler `ν_max·cos θ_i` with `θ_i` uniform, rounded
/// to the nearest bin. The draw order (delays, gains, angles) does not depend
/// on the speed, so one seed gives the same geometry at every speed.
pub fn gen_channel(
    p: &OtfsParams,
    speed_kmh: f64,
    n_paths: usize,
    max_delay_tap: usize,
    seed: u64,
) -> Result<ChannelSpec> {
    if n_paths == 0 {
        return Err(Error::Value("n_paths must be at least 1".into()));
    }
    if max_delay_tap >= p.m_delay {
        return Err(Error::Value(format!(
            "max_delay_tap {max_delay_tap} must be below M = {}",
            p.m_delay
        )));
    }
    if n_paths > max_delay_tap + 1 {
        return Err(Error::Value(format!(
            "{n_paths} paths need distinct delays but only {} are available",
            max_delay_tap + 1
        )));
    }
    let nu_max = max_doppler_hz(speed_kmh, p.carrier_freq_hz)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut delays = vec![0usize];
    if n_paths > 1 {
        delays.extend(index::sample(&mut rng, max_delay_tap, n_paths - 1).iter().map(|d| d + 1));
    }
    let mut gains: Vec<Complex64> = (0..n_paths)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let norm = gains.iter().map(|g| g.norm_sqr()).sum::<f64>().sqrt();
    gains.iter_mut().for_each(|g| *g /= norm);

    let bins_per_hz = p.n_doppler as f64 * p.symbol_duration_s;
    let paths = delays
        .into_iter()
        .zip(gains)
        .map(|(delay_tap, gain)| {
            let theta: f64 = rng.random_range(0.0..2.0 * PI);
            let doppler_tap = (nu_max * theta.cos() * bins_per_hz).round() as i64;
            PathSpec {
                gain,
                delay_tap,
                doppler_tap,
            }
        })
        .collect();
    ChannelSpec::new(paths, p)
}

/// `y[q] = Σ_i g_i · s[(q − l_i) mod NM] · e^{j2π k_i (q − l_i)/(NM)}`.
pub fn apply_channel(s: &TimeSignal, ch: &ChannelSpec, p: &OtfsParams) -> Result<TimeSignal> {
    s.check_len(p)?;
    let len = p.frame_len();
    let x = s.as_slice();
    let mut y = vec![Complex64::new(0.0, 0.0); len];
    for path in ch.paths() {
        let step = 2.0 * PI * path.doppler_tap as f64 / len as f64;
        for (q, out) in y.iter_mut().enumerate() {
            let src = (q + len - path.delay_tap) % len;
            // q − l and its wrapped form differ by NM, which is a whole turn
            *out += path.gain * x[src] * Complex64::from_polar(1.0, step * src as f64);
        }
    }
    TimeSignal::new(y, p)
}

/// Noise variance for a measured signal power and SNR in dB.
pub fn noise_variance(signal_power: f64, snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        signal_power / 10f64.powf(snr_db / 10.0)
    }
}

/// Circularly symmetric complex Gaussian samples with total variance `noise_var`.
pub fn awgn<R: Rng>(len: usize, noise_var: f64, rng: &mut R) -> Vec<Complex64> {
    let sigma = (noise_var / 2.0).sqrt();
    (0..len)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * sigma
        })
        .collect()
}

/// Received frame together with the exact noise realization that was added.
#[derive(Debug, Clone)]
pub struct NoisyFrame {
    pub signal: TimeSignal,
    pub noise: Vec<Complex64>,
    pub noise_var: f64,
}

/// Adds AWGN with `σ² = P_sig / 10^(snr/10)` where `P_sig` is the measured
/// frame power. An SNR of `+∞` leaves the frame untouched with `σ² = 0`.
pub fn add_awgn_with<R: Rng>(s: &TimeSignal, snr_db: f64, rng: &mut R) -> Result<NoisyFrame> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::Value(format!("SNR {snr_db} dB is not usable")));
    }
    if snr_db == f64::INFINITY {
        return Ok(NoisyFrame {
            signal: s.clone(),
            noise: vec![Complex64::new(0.0, 0.0); s.len()],
            noise_var: 0.0,
        });
    }
    let power = s.power();
    if power.is_nan() || power <= 0.0 {
        return Err(Error::Value("cannot set an SNR on a zero-power signal".into()));
    }
    let noise_var = noise_variance(power, snr_db);
    let noise = awgn(s.len(), noise_var, rng);
    let samples = s.as_slice().iter().zip(&noise).map(|(a, b)| a + b).collect();
    Ok(NoisyFrame {
        signal: TimeSignal::from_raw(samples),
        noise,
        noise_var,
    })
}

/// Seeded AWGN; returns the noisy frame and `σ²`.
pub fn add_awgn(s: &TimeSignal, snr_db: f64, seed: u64) -> Result<(TimeSignal, f64)> {
    let frame = add_awgn_with(s, snr_db, &mut ChaCha8Rng::seed_from_u64(seed))?;
    Ok((frame.signal, frame.noise_var))
}

/// Delay-Doppler impulse response: δ at (0, 0) pushed through the noiseless
/// channel and demodulated.
pub fn effective_dd_response(ch: &ChannelSpec, p: &OtfsParams) -> DDGrid {
    let t = OtfsTransform::for_params(p);
    let tx = t
        .modulate(&DDGrid::delta(p.n_doppler, p.m_delay, 0, 0))
        .expect("grid shaped for p");
    let rx = apply_channel(&tx, ch, p).expect("signal shaped for p");
    t.demodulate(&rx).expect("signal shaped for p")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::{oracle, testutil::random_grid};

    fn p8() -> OtfsParams {
        OtfsParams::new(8, 8, 15e3, 4e9).unwrap()
    }

    fn single(gain: Complex64, delay_tap: usize, doppler_tap: i64) -> ChannelSpec {
        ChannelSpec::new(vec![PathSpec { gain, delay_tap, doppler_tap }], &p8()).unwrap()
    }

    /// Eq. (5) evaluated sample by sample with the unwrapped delay argument.
    fn channel_direct(s: &[Complex64], ch: &ChannelSpec) -> Vec<Complex64> {
        let len = s.len() as i64;
        (0..len)
            .map(|q| {
                ch.paths()
                    .iter()
                    .map(|path| {
                        let shifted = q - path.delay_tap as i64;
                        let phase = 2.0 * PI * (path.doppler_tap * shifted) as f64 / len as f64;
                        path.gain * s[shifted.rem_euclid(len) as usize] * Complex64::from_polar(1.0, phase)
                    })
                    .sum()
            })
            .collect()
    }

    fn dd_through_oracle(x: &DDGrid, ch: &ChannelSpec) -> DDGrid {
        let (n, m) = (x.rows(), x.cols());
        let s = oracle::heisenberg(&oracle::isfft(x));
        let y = channel_direct(&s, ch);
        oracle::sfft(&oracle::wigner(&y, n, m))
    }

    #[test]
    fn doppler_examples() {
        assert_eq!(max_doppler_hz(0.0, 4e9).unwrap(), 0.0);
        // (v / 3.6) · f_c / c
        assert!((max_doppler_hz(500.0, 4e9).unwrap() - 1853.1339).abs() < 1e-3);
        assert!((max_doppler_hz(650.0, 4e9).unwrap() - 2409.0740).abs() < 1e-3);
        assert!(max_doppler_hz(-1.0, 4e9).is_err());
    }

    #[test]
    fn doppler_taps_bounded_at_paper_scale() {
        let p = OtfsParams::full();
        let bound = (max_doppler_hz(650.0, 4e9).unwrap() / 117.1875).round() as i64;
        assert_eq!(bound, 21);
        for seed in 0..50 {
            let ch = gen_channel(&p, 650.0, 5, 32, seed).unwrap();
            assert!(ch.paths().iter().all(|path| path.doppler_tap.abs() <= bound));
        }
    }

    #[test]
    fn zero_speed_has_no_doppler() {
        let ch = gen_channel(&OtfsParams::desk(), 0.0, 5, 4, 3).unwrap();
        assert!(ch.paths().iter().all(|path| path.doppler_tap == 0));
    }

    #[test]
    fn generated_channel_shape() {
        let p = OtfsParams::desk();
        let ch = gen_channel(&p, 500.0, 4, 6, 11).unwrap();
        assert_eq!(ch.paths()[0].delay_tap, 0);
        let mut delays: Vec<_> = ch.paths().iter().map(|path| path.delay_tap).collect();
        delays.sort();
        delays.dedup();
        assert_eq!(delays.len(), 4);
        assert!(delays.iter().all(|&d| d <= 6));
        assert!((ch.power() - 1.0).abs() < 1e-9);
        assert_eq!(ch, gen_channel(&p, 500.0, 4, 6, 11).unwrap());
        assert_ne!(ch, gen_channel(&p, 500.0, 4, 6, 12).unwrap());
    }

    #[test]
    fn too_many_paths_rejected() {
        assert!(matches!(gen_channel(&OtfsParams::desk(), 0.0, 6, 4, 0), Err(Error::Value(_))));
        assert!(gen_channel(&OtfsParams::desk(), 0.0, 2, 32, 0).is_err());
    }

    #[test]
    fn identity_channel_is_lossless() {
        let p = p8();
        let t = OtfsTransform::for_params(&p);
        let s = t.modulate(&random_grid(8, 8, 1)).unwrap();
        assert_eq!(apply_channel(&s, &ChannelSpec::identity(), &p).unwrap(), s);
    }

    #[test]
    fn apply_matches_direct_formula() {
        let p = p8();
        let ch = gen_channel(&p, 650.0, 3, 5, 9).unwrap();
        let s = OtfsTransform::for_params(&p).modulate(&random_grid(8, 8, 2)).unwrap();
        let fast = apply_channel(&s, &ch, &p).unwrap();
        for (a, b) in fast.as_slice().iter().zip(channel_direct(s.as_slice(), &ch)) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn doppler_shift_twists_along_delay() {
        let p = p8();
        let x = random_grid(8, 8, 3);
        for k0 in [-3i64, 1, 4] {
            let ch = single(Complex64::new(1.0, 0.0), 0, k0);
            let t = OtfsTransform::for_params(&p);
            let got = t.demodulate(&apply_channel(&t.modulate(&x).unwrap(), &ch, &p).unwrap()).unwrap();
            assert!(got.max_abs_diff(&dd_through_oracle(&x, &ch)) < 1e-10);
            // circular Doppler shift with phase e^{j2π k0 l / NM}
            for k in 0..8 {
                for l in 0..8 {
                    let src = (k as i64 - k0).rem_euclid(8) as usize;
                    let twist = Complex64::from_polar(1.0, 2.0 * PI * (k0 * l as i64) as f64 / 64.0);
                    assert!((got[(k, l)] - x[(src, l)] * twist).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn delay_shift_wraps_with_quasi_periodic_phase() {
        let p = p8();
        let x = random_grid(8, 8, 4);
        let l0 = 3;
        let ch = single(Complex64::new(1.0, 0.0), l0, 0);
        let t = OtfsTransform::for_params(&p);
        let got = t.demodulate(&apply_channel(&t.modulate(&x).unwrap(), &ch, &p).unwrap()).unwrap();
        assert!(got.max_abs_diff(&dd_through_oracle(&x, &ch)) < 1e-10);
        for k in 0..8 {
            for l in 0..8 {
                let want = if l >= l0 {
                    x[(k, l - l0)]
                } else {
                    x[(k, l + 8 - l0)] * Complex64::from_polar(1.0, -2.0 * PI * k as f64 / 8.0)
                };
                assert!((got[(k, l)] - want).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn apply_is_linear_and_bounded() {
        let p = p8();
        let ch = gen_channel(&p, 650.0, 4, 5, 5).unwrap();
        let t = OtfsTransform::for_params(&p);
        let a = t.modulate(&random_grid(8, 8, 5)).unwrap();
        let b = t.modulate(&random_grid(8, 8, 6)).unwrap();
        let c = Complex64::new(0.3, -1.2);
        let sum = TimeSignal::new(
            a.as_slice().iter().zip(b.as_slice()).map(|(u, v)| u + c * v).collect(),
            &p,
        )
        .unwrap();
        let ya = apply_channel(&a, &ch, &p).unwrap();
        let yb = apply_channel(&b, &ch, &p).unwrap();
        let ys = apply_channel(&sum, &ch, &p).unwrap();
        for ((s, u), v) in ys.as_slice().iter().zip(ya.as_slice()).zip(yb.as_slice()) {
            assert!((s - (u + c * v)).norm() < 1e-12);
        }
        let l1: f64 = ch.paths().iter().map(|path| path.gain.norm()).sum();
        assert!(ya.energy() <= l1 * l1 * a.energy() * (1.0 + 1e-12));
    }

    #[test]
    fn awgn_examples() {
        let p = p8();
        let s = TimeSignal::new(vec![Complex64::new(1.0, 0.0); 64], &p).unwrap();
        let (y, var) = add_awgn(&s, f64::INFINITY, 1).unwrap();
        assert_eq!((y, var), (s.clone(), 0.0));
        assert!((add_awgn(&s, 0.0, 1).unwrap().1 - 1.0).abs() < 1e-15);
        assert!((add_awgn(&s, 13.0, 1).unwrap().1 - 0.05012).abs() < 1e-5);
        assert_eq!(add_awgn(&s, 5.0, 42).unwrap(), add_awgn(&s, 5.0, 42).unwrap());
        let zero = TimeSignal::new(vec![Complex64::new(0.0, 0.0); 64], &p).unwrap();
        assert!(matches!(add_awgn(&zero, 10.0, 1), Err(Error::Value(_))));
    }

    #[test]
    fn awgn_empirical_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let noise = awgn(n, 0.37, &mut rng);
        let var = noise.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
        assert!((var / 0.37 - 1.0).abs() < 0.03, "variance {var}");
    }

    #[test]
    fn effective_response_examples() {
        let p = p8();
        let id = effective_dd_response(&ChannelSpec::identity(), &p);
        assert!(id.max_abs_diff(&DDGrid::delta(8, 8, 0, 0)) < 1e-12);

        let ch = ChannelSpec::new(
            vec![
                PathSpec { gain: Complex64::new(0.6, 0.0), delay_tap: 0, doppler_tap: 1 },
                PathSpec { gain: Complex64::new(0.0, 0.8), delay_tap: 2, doppler_tap: -2 },
            ],
            &p,
        )
        .unwrap();
        let h = effective_dd_response(&ch, &p);
        assert!(h.max_abs_diff(&dd_through_oracle(&DDGrid::delta(8, 8, 0, 0), &ch)) < 1e-10);
        assert!((h.energy() - 1.0).abs() < 1e-9);
        assert!((h[(1, 0)] - Complex64::new(0.6, 0.0)).norm() < 1e-12);
        assert!((h[(6, 2)] - Complex64::new(0.0, 0.8)).norm() < 1e-12);
    }

    #[test]
    fn channel_tensor_round_trip() {
        let p = OtfsParams::desk();
        let ch = gen_channel(&p, 350.0, 5, 4, 8).unwrap();
        assert_eq!(ChannelSpec::from_tensor(&ch.to_tensor(), &p).unwrap(), ch);
    }
}
