//! Frame parameters and the complex grids exchanged between transforms.
//!
//! Grids are stored row-major with `n_doppler` rows and `m_delay` columns.
//! In the delay-Doppler domain the row index `k` is the Doppler bin and the
//! column index `l` the delay bin; in the time-frequency domain the row index
//! `n` is the OFDM-like symbol and the column `m` the subcarrier.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default carrier frequency used when a configuration omits it.
pub const DEFAULT_CARRIER_HZ: f64 = 4.0e9;

/// OTFS frame geometry and numerology.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OtfsParams {
    /// Doppler bins, equal to the number of time symbols per frame.
    pub n_doppler: usize,
    /// Delay bins, equal to the number of subcarriers.
    pub m_delay: usize,
    pub subcarrier_spacing_hz: f64,
    pub carrier_freq_hz: f64,
    /// Symbol duration, `1 / subcarrier_spacing_hz`.
    pub symbol_duration_s: f64,
}

impl OtfsParams {
    /// Builds parameters with `T = 1/Δf` and validates them.
    pub fn new(n_doppler: usize, m_delay: usize, scs_hz: f64, carrier_hz: f64) -> Result<Self> {
        validate_params(OtfsParams {
            n_doppler,
            m_delay,
            subcarrier_spacing_hz: scs_hz,
            carrier_freq_hz: carrier_hz,
            symbol_duration_s: 1.0 / scs_hz,
        })
    }

    /// Reduced frame used by tests and CI sweeps: 16 × 32 at 15 kHz, 4 GHz.
    pub fn desk() -> Self {
        Self::new(16, 32, 15_000.0, DEFAULT_CARRIER_HZ).expect("desk parameters are valid")
    }

    /// Full-size frame: 128 × 256 at 15 kHz, 4 GHz.
    pub fn full() -> Self {
        Self::new(128, 256, 15_000.0, DEFAULT_CARRIER_HZ).expect("full parameters are valid")
    }

    /// Number of symbols (and time samples) per frame.
    pub fn frame_len(&self) -> usize {
        self.n_doppler * self.m_delay
    }

    /// Sample rate of the critically sampled baseband signal, `M·Δf`.
    pub fn sample_rate_hz(&self) -> f64 {
        self.m_delay as f64 * self.subcarrier_spacing_hz
    }

    /// Doppler resolution `1/(N·T)` in Hz.
    pub fn doppler_resolution_hz(&self) -> f64 {
        1.0 / (self.n_doppler as f64 * self.symbol_duration_s)
    }

    /// Delay resolution `1/(M·Δf)` in seconds.
    pub fn delay_resolution_s(&self) -> f64 {
        1.0 / self.sample_rate_hz()
    }
}

/// Checks the frame invariants and returns the parameters unchanged.
pub fn validate_params(p: OtfsParams) -> Result<OtfsParams> {
    for (name, v) in [("n_doppler", p.n_doppler), ("m_delay", p.m_delay)] {
        if v < 2 || !v.is_power_of_two() {
            return Err(Error::Dimension(format!(
                "{name} = {v} must be a power of two and at least 2"
            )));
        }
    }
    for (name, v) in [
        ("subcarrier_spacing_hz", p.subcarrier_spacing_hz),
        ("carrier_freq_hz", p.carrier_freq_hz),
        ("symbol_duration_s", p.symbol_duration_s),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Value(format!("{name} = {v} must be positive and finite")));
        }
    }
    let product = p.symbol_duration_s * p.subcarrier_spacing_hz;
    if (product - 1.0).abs() > 1e-12 {
        return Err(Error::Consistency(format!(
            "symbol duration × subcarrier spacing = {product}, expected 1"
        )));
    }
    Ok(p)
}

macro_rules! complex_grid {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            rows: usize,
            cols: usize,
            data: Vec<Complex64>,
        }

        impl $name {
            /// All-zero grid of the given shape.
            pub fn zeros(rows: usize, cols: usize) -> Self {
                Self { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
            }

            /// All-zero grid shaped for `p`.
            pub fn zeros_for(p: &OtfsParams) -> Self {
                Self::zeros(p.n_doppler, p.m_delay)
            }

            /// Wraps row-major data; rejects wrong lengths and non-finite entries.
            pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
                if rows == 0 || cols == 0 || data.len() != rows * cols {
                    return Err(Error::Dimension(format!(
                        "{} of {rows}×{cols} needs {} entries, got {}",
                        stringify!($name),
                        rows * cols,
                        data.len()
                    )));
                }
                if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::Value(format!("{} has non-finite entries", stringify!($name))));
                }
                Ok(Self { rows, cols, data })
            }

            /// Unit impulse at `(row, col)`.
            pub fn delta(rows: usize, cols: usize, row: usize, col: usize) -> Self {
                let mut g = Self::zeros(rows, cols);
                g[(row, col)] = Complex64::new(1.0, 0.0);
                g
            }

            pub fn rows(&self) -> usize {
                self.rows
            }

            pub fn cols(&self) -> usize {
                self.cols
            }

            pub fn as_slice(&self) -> &[Complex64] {
                &self.data
            }

            pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
                &mut self.data
            }

            pub fn into_vec(self) -> Vec<Complex64> {
                self.data
            }

            /// Squared Frobenius norm.
            pub fn energy(&self) -> f64 {
                self.data.iter().map(|z| z.norm_sqr()).sum()
            }

            /// Errors unless the shape matches `p`.
            pub fn check_dims(&self, p: &OtfsParams) -> Result<()> {
                if self.rows != p.n_doppler || self.cols != p.m_delay {
                    return Err(Error::Dimension(format!(
                        "{} is {}×{}, parameters expect {}×{}",
                        stringify!($name),
                        self.rows,
                        self.cols,
                        p.n_doppler,
                        p.m_delay
                    )));
                }
                Ok(())
            }

            /// Largest entry-wise absolute difference.
            pub fn max_abs_diff(&self, other: &Self) -> f64 {
                assert_eq!((self.rows, self.cols), (other.rows, other.cols));
                self.data
                    .iter()
                    .zip(&other.data)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max)
            }
        }

        impl std::ops::Index<(usize, usize)> for $name {
            type Output = Complex64;
            fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
                &self.data[r * self.cols + c]
            }
        }

        impl std::ops::IndexMut<(usize, usize)> for $name {
            fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
                &mut self.data[r * self.cols + c]
            }
        }
    };
}

complex_grid!(
    /// Delay-Doppler symbol grid `x[k, l]`.
    DDGrid
);
complex_grid!(
    /// Time-frequency grid `X[n, m]`.
    TFGrid
);

/// Critically sampled baseband frame of `N·M` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    samples: Vec<Complex64>,
}

impl TimeSignal {
    pub fn new(samples: Vec<Complex64>, p: &OtfsParams) -> Result<Self> {
        if samples.len() != p.frame_len() {
            return Err(Error::Dimension(format!(
                "time signal has {} samples, frame needs {}",
                samples.len(),
                p.frame_len()
            )));
        }
        Ok(Self { samples })
    }

    pub(crate) fn from_raw(samples: Vec<Complex64>) -> Self {
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Mean power per sample.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.energy() / self.samples.len() as f64
        }
    }

    pub fn check_len(&self, p: &OtfsParams) -> Result<()> {
        if self.samples.len() != p.frame_len() {
            return Err(Error::Dimension(format!(
                "time signal has {} samples, frame needs {}",
                self.samples.len(),
                p.frame_len()
            )));
        }
        Ok(())
    }
}
