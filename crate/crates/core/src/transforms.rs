//! Unitary maps between the delay-Doppler, time-frequency and time domains.
//!
//! With rectangular transmit and receive pulses the Heisenberg transform is an
//! `M`-point inverse DFT per time symbol and the Wigner transform its matched
//! forward DFT, so the pair is exactly bi-orthogonal. Every transform here is
//! scaled to be unitary.
//!
//! Conventions:
//!
//! ```text
//! ISFFT     X[n,m] = 1/√(NM) Σ_k Σ_l x[k,l] e^{j2π(nk/N − ml/M)}
//! SFFT      x[k,l] = 1/√(NM) Σ_n Σ_m X[n,m] e^{−j2π(nk/N − ml/M)}
//! Heisenberg s[nM+q] = 1/√M Σ_m X[n,m] e^{j2π mq/M}
//! Wigner     Y[n,m]  = 1/√M Σ_q s[nM+q] e^{−j2π mq/M}
//! ```

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::params::{DDGrid, OtfsParams, TFGrid, TimeSignal};

/// Cached FFT plans for one frame geometry.
#[derive(Clone)]
pub struct OtfsTransform {
    n: usize,
    m: usize,
    fwd_n: Arc<dyn Fft<f64>>,
    inv_n: Arc<dyn Fft<f64>>,
    fwd_m: Arc<dyn Fft<f64>>,
    inv_m: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for OtfsTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OtfsTransform").field("n", &self.n).field("m", &self.m).finish()
    }
}

impl OtfsTransform {
    pub fn new(n_doppler: usize, m_delay: usize) -> Result<Self> {
        if n_doppler == 0 || m_delay == 0 {
            return Err(Error::Dimension(format!("empty {n_doppler}×{m_delay} frame")));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n: n_doppler,
            m: m_delay,
            fwd_n: planner.plan_fft_forward(n_doppler),
            inv_n: planner.plan_fft_inverse(n_doppler),
            fwd_m: planner.plan_fft_forward(m_delay),
            inv_m: planner.plan_fft_inverse(m_delay),
        })
    }

    pub fn for_params(p: &OtfsParams) -> Self {
        Self::new(p.n_doppler, p.m_delay).expect("validated parameters are nonzero")
    }

    fn check(&self, rows: usize, cols: usize) -> Result<()> {
        if rows != self.n || cols != self.m {
            return Err(Error::Dimension(format!(
                "grid is {rows}×{cols}, transform expects {}×{}",
                self.n, self.m
            )));
        }
        Ok(())
    }

    pub fn isfft(&self, x: &DDGrid) -> Result<TFGrid> {
        self.check(x.rows(), x.cols())?;
        let mut data = x.as_slice().to_vec();
        self.rows_with(&self.fwd_m, &mut data);
        self.cols_with(&self.inv_n, &mut data);
        scale(&mut data, 1.0 / ((self.n * self.m) as f64).sqrt());
        Ok(TFGrid::from_vec(self.n, self.m, data).expect("shape preserved"))
    }

    pub fn sfft(&self, y: &TFGrid) -> Result<DDGrid> {
        self.check(y.rows(), y.cols())?;
        let mut data = y.as_slice().to_vec();
        self.cols_with(&self.fwd_n, &mut data);
        self.rows_with(&self.inv_m, &mut data);
        scale(&mut data, 1.0 / ((self.n * self.m) as f64).sqrt());
        Ok(DDGrid::from_vec(self.n, self.m, data).expect("shape preserved"))
    }

    pub fn heisenberg(&self, x: &TFGrid) -> Result<TimeSignal> {
        self.check(x.rows(), x.cols())?;
        let mut data = x.as_slice().to_vec();
        self.rows_with(&self.inv_m, &mut data);
        scale(&mut data, 1.0 / (self.m as f64).sqrt());
        Ok(TimeSignal::from_raw(data))
    }

    pub fn wigner(&self, s: &TimeSignal) -> Result<TFGrid> {
        if s.len() != self.n * self.m {
            return Err(Error::Dimension(format!(
                "time signal has {} samples, frame needs {}",
                s.len(),
                self.n * self.m
            )));
        }
        let mut data = s.as_slice().to_vec();
        self.rows_with(&self.fwd_m, &mut data);
        scale(&mut data, 1.0 / (self.m as f64).sqrt());
        TFGrid::from_vec(self.n, self.m, data)
    }

    /// ISFFT followed by the Heisenberg transform.
    pub fn modulate(&self, x: &DDGrid) -> Result<TimeSignal> {
        self.heisenberg(&self.isfft(x)?)
    }

    /// Wigner transform followed by the SFFT.
    pub fn demodulate(&self, s: &TimeSignal) -> Result<DDGrid> {
        self.sfft(&self.wigner(s)?)
    }

    fn rows_with(&self, plan: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        // rows are contiguous, so the whole buffer is a batch of M-point transforms
        plan.process(data);
    }

    fn cols_with(&self, plan: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        let mut col = vec![Complex64::new(0.0, 0.0); self.n];
        for c in 0..self.m {
            for (r, v) in col.iter_mut().enumerate() {
                *v = data[r * self.m + c];
            }
            plan.process(&mut col);
            for (r, v) in col.iter().enumerate() {
                data[r * self.m + c] = *v;
            }
        }
    }
}

fn scale(data: &mut [Complex64], s: f64) {
    data.iter_mut().for_each(|z| *z *= s);
}

pub fn isfft(x: &DDGrid) -> Result<TFGrid> {
    OtfsTransform::new(x.rows(), x.cols())?.isfft(x)
}

pub fn sfft(y: &TFGrid) -> Result<DDGrid> {
    OtfsTransform::new(y.rows(), y.cols())?.sfft(y)
}

pub fn heisenberg(x: &TFGrid, p: &OtfsParams) -> Result<TimeSignal> {
    x.check_dims(p)?;
    OtfsTransform::for_params(p).heisenberg(x)
}

pub fn wigner(s: &TimeSignal, p: &OtfsParams) -> Result<TFGrid> {
    s.check_len(p)?;
    OtfsTransform::for_params(p).wigner(s)
}

pub fn otfs_modulate(x: &DDGrid, p: &OtfsParams) -> Result<TimeSignal> {
    x.check_dims(p)?;
    OtfsTransform::for_params(p).modulate(x)
}

pub fn otfs_demodulate(s: &TimeSignal, p: &OtfsParams) -> Result<DDGrid> {
    s.check_len(p)?;
    OtfsTransform::for_params(p).demodulate(s)
}



#[cfg(test)]
mod tests {
    use super::testutil::random_grid;
    use super::*;
    use proptest::prelude::*;

    fn params(n: usize, m: usize) -> OtfsParams {
        OtfsParams::new(n, m, 15_000.0, 4e9).unwrap()
    }

    fn as_tf(g: &DDGrid) -> TFGrid {
        TFGrid::from_vec(g.rows(), g.cols(), g.as_slice().to_vec()).unwrap()
    }

    #[test]
    fn zero_grid_maps_to_zero() {
        let x = DDGrid::zeros(4, 8);
        assert_eq!(isfft(&x).unwrap(), TFGrid::zeros(4, 8));
        assert_eq!(sfft(&TFGrid::zeros(4, 8)).unwrap(), DDGrid::zeros(4, 8));
        let p = params(4, 8);
        let s = TimeSignal::new(vec![Complex64::new(0.0, 0.0); 32], &p).unwrap();
        assert_eq!(wigner(&s, &p).unwrap(), TFGrid::zeros(4, 8));
    }

    #[test]
    fn delta_at_origin_spreads_to_constant_half() {
        let x = DDGrid::delta(2, 2, 0, 0);
        let tf = isfft(&x).unwrap();
        for z in tf.as_slice() {
            assert!((z - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        }
        let back = sfft(&TFGrid::from_vec(2, 2, vec![Complex64::new(0.5, 0.0); 4]).unwrap()).unwrap();
        assert!(back.max_abs_diff(&DDGrid::delta(2, 2, 0, 0)) < 1e-15);
    }

    #[test]
    fn heisenberg_of_delta_fills_first_symbol() {
        let p = params(4, 8);
        let x = TFGrid::delta(4, 8, 0, 0);
        let s = heisenberg(&x, &p).unwrap();
        let amp = 1.0 / 8f64.sqrt();
        for (i, z) in s.as_slice().iter().enumerate() {
            let want = if i < 8 { amp } else { 0.0 };
            assert!((z - Complex64::new(want, 0.0)).norm() < 1e-15, "sample {i}");
        }
    }

    #[test]
    fn wigner_of_constant_first_symbol_is_delta() {
        let p = params(4, 8);
        let mut samples = vec![Complex64::new(0.0, 0.0); 32];
        samples[..8].fill(Complex64::new(1.0 / 8f64.sqrt(), 0.0));
        let y = wigner(&TimeSignal::new(samples, &p).unwrap(), &p).unwrap();
        assert!(y.max_abs_diff(&TFGrid::delta(4, 8, 0, 0)) < 1e-15);
    }

    #[test]
    fn modulated_doppler_delta_has_progressive_phase() {
        // δ at (k=1, l=0), N = M = 4: only delay-0 samples of each block are
        // nonzero, with amplitude 1/√N and phase advancing by 2π/4 per block.
        let p = params(4, 4);
        let s = otfs_modulate(&DDGrid::delta(4, 4, 1, 0), &p).unwrap();
        let direct = oracle::heisenberg(&oracle::isfft(&DDGrid::delta(4, 4, 1, 0)));
        for (i, (a, b)) in s.as_slice().iter().zip(&direct).enumerate() {
            assert!((a - b).norm() < 1e-12, "sample {i}");
        }
        for n in 0..4 {
            let want = Complex64::from_polar(0.5, 2.0 * std::f64::consts::PI * n as f64 / 4.0);
            assert!((s.as_slice()[n * 4] - want).norm() < 1e-12);
            for q in 1..4 {
                assert!(s.as_slice()[n * 4 + q].norm() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_round_trips_on_desk_frame() {
        let p = OtfsParams::desk();
        let t = OtfsTransform::for_params(&p);
        let x = random_grid(16, 32, 7);
        assert!(t.sfft(&t.isfft(&x).unwrap()).unwrap().max_abs_diff(&x) < 1e-12);
        let tf = as_tf(&x);
        assert!(t.wigner(&t.heisenberg(&tf).unwrap()).unwrap().max_abs_diff(&tf) < 1e-12);
        assert!(t.demodulate(&t.modulate(&x).unwrap()).unwrap().max_abs_diff(&x) < 1e-12);
    }

    #[test]
    fn fft_matches_direct_sums() {
        for (n, m) in [(2, 2), (4, 8), (8, 8), (8, 4)] {
            let x = random_grid(n, m, (n * 31 + m) as u64);
            let t = OtfsTransform::new(n, m).unwrap();
            assert!(t.isfft(&x).unwrap().max_abs_diff(&oracle::isfft(&x)) < 1e-10);
            let tf = as_tf(&x);
            assert!(t.sfft(&tf).unwrap().max_abs_diff(&oracle::sfft(&tf)) < 1e-10);
            let s = t.heisenberg(&tf).unwrap();
            let direct = oracle::heisenberg(&tf);
            let err = s.as_slice().iter().zip(&direct).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-10);
            assert!(t.wigner(&s).unwrap().max_abs_diff(&oracle::wigner(s.as_slice(), n, m)) < 1e-10);
        }
    }

    #[test]
    fn mismatched_dims_are_rejected() {
        let p = params(4, 8);
        assert!(matches!(otfs_modulate(&DDGrid::zeros(8, 4), &p), Err(Error::Dimension(_))));
        let t = OtfsTransform::new(4, 8).unwrap();
        assert!(t.isfft(&DDGrid::zeros(4, 4)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn transforms_are_unitary(seed in any::<u64>()) {
            let t = OtfsTransform::new(16, 32).unwrap();
            let x = random_grid(16, 32, seed);
            let e = x.energy();
            let tf = t.isfft(&x).unwrap();
            prop_assert!((tf.energy() - e).abs() <= 1e-12 * e);
            prop_assert!((t.heisenberg(&tf).unwrap().energy() - e).abs() <= 1e-12 * e);
            prop_assert!((t.modulate(&x).unwrap().energy() - e).abs() <= 1e-12 * e);
        }

        #[test]
        fn transforms_are_linear(seed in any::<u64>(), a_re in -2.0..2.0f64, a_im in -2.0..2.0f64, b_re in -2.0..2.0f64) {
            let t = OtfsTransform::new(8, 16).unwrap();
            let x = random_grid(8, 16, seed);
            let y = random_grid(8, 16, seed ^ 0xdead_beef);
            let a = Complex64::new(a_re, a_im);
            let b = Complex64::new(b_re, 0.5);
            let combo: Vec<_> = x.as_slice().iter().zip(y.as_slice()).map(|(u, v)| a * u + b * v).collect();
            let combo = DDGrid::from_vec(8, 16, combo).unwrap();
            let lhs = t.modulate(&combo).unwrap();
            let tx = t.modulate(&x).unwrap();
            let ty = t.modulate(&y).unwrap();
            for ((l, u), v) in lhs.as_slice().iter().zip(tx.as_slice()).zip(ty.as_slice()) {
                prop_assert!((l - (a * u + b * v)).norm() < 1e-12);
            }
        }
    }
}
