//! Delay-Doppler detection.
//!
//! Both detectors work on the sparse DD input-output relation of an integer
//! tap channel: input symbol `(k, l)` reaches `((k + k_i) mod N, (l + l_i) mod M)`
//! through path `i` with coefficient
//!
//! ```text
//! g_i · e^{j2π k_i l/(NM)}                     if l + l_i < M
//! g_i · e^{j2π k_i l/(NM)} · e^{−j2π k'/N}     otherwise (delay wrap, k' = output row)
//! ```
//!
//! [`lmmse_detect`] solves the regularized normal equations densely and is
//! limited to small frames. [`mrc_detect`] is the iterative rake: each sweep
//! combines the path branches of every symbol with maximal-ratio weights on the
//! current residual, so interference from the other symbols is cancelled as
//! their estimates improve.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{effective_dd_response, ChannelSpec};
use crate::error::{Error, Result};
use crate::params::{DDGrid, OtfsParams};

/// Largest frame accepted by the dense path.
pub const DENSE_LIMIT: usize = 4096;
/// Regularization used when the caller reports a noiseless channel.
pub const NOISE_FLOOR: f64 = 1e-12;
/// Relative stopping threshold of the MRC iteration.
pub const MRC_TOL: f64 = 1e-6;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Detector output.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualizedFrame {
    pub symbols: DDGrid,
    /// Per-symbol residual noise standard deviation, row-major.
    pub post_eq_noise_std: Vec<f64>,
    /// Magnitude of the effective DD response scaled to a unit peak, row-major.
    pub csi: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Sparse column form of the DD channel matrix.
#[derive(Debug, Clone)]
pub struct DdChannel {
    n: usize,
    m: usize,
    /// `taps[c]` lists `(row, coefficient)` pairs of column `c`.
    taps: Vec<Vec<(usize, Complex64)>>,
}

impl DdChannel {
    pub fn new(ch: &ChannelSpec, p: &OtfsParams) -> Self {
        let (n, m) = (p.n_doppler, p.m_delay);
        let nm = (n * m) as f64;
        let mut taps = vec![Vec::with_capacity(ch.paths().len()); n * m];
        for k in 0..n {
            for l in 0..m {
                let col = &mut taps[k * m + l];
                for path in ch.paths() {
                    let k_out = (k as i64 + path.doppler_tap).rem_euclid(n as i64) as usize;
                    let mut phase = 2.0 * PI * (path.doppler_tap * l as i64) as f64 / nm;
                    let l_sum = l + path.delay_tap;
                    let l_out = if l_sum < m {
                        l_sum
                    } else {
                        phase -= 2.0 * PI * k_out as f64 / n as f64;
                        l_sum - m
                    };
                    let row = k_out * m + l_out;
                    let coef = path.gain * Complex64::from_polar(1.0, phase);
                    match col.iter_mut().find(|(r, _)| *r == row) {
                        Some((_, c)) => *c += coef,
                        None => col.push((row, coef)),
                    }
                }
            }
        }
        Self { n, m, taps }
    }

    pub fn len(&self) -> usize {
        self.n * self.m
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn column(&self, c: usize) -> &[(usize, Complex64)] {
        &self.taps[c]
    }

    /// `H·x`.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![ZERO; self.len()];
        for (col, &xc) in self.taps.iter().zip(x) {
            for &(row, h) in col {
                y[row] += h * xc;
            }
        }
        y
    }

    /// `Hᴴ·y`.
    pub fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        self.taps
            .iter()
            .map(|col| col.iter().map(|&(row, h)| h.conj() * y[row]).sum())
            .collect()
    }

    /// Column energies `Σ_i |h_ic|²`.
    pub fn column_energy(&self) -> Vec<f64> {
        self.taps
            .iter()
            .map(|col| col.iter().map(|(_, h)| h.norm_sqr()).sum())
            .collect()
    }
}

/// Dense `NM × NM` matrix with `vec(y) = H·vec(x)` for row-major grids.
pub fn build_dd_matrix(ch: &ChannelSpec, p: &OtfsParams) -> Result<DMatrix<Complex64>> {
    let size = p.frame_len();
    if size > DENSE_LIMIT {
        return Err(Error::Size {
            size,
            limit: DENSE_LIMIT,
        });
    }
    let op = DdChannel::new(ch, p);
    let mut h = DMatrix::zeros(size, size);
    for c in 0..size {
        for &(row, coef) in op.column(c) {
            h[(row, c)] += coef;
        }
    }
    Ok(h)
}

/// Flattened `|h_w|` scaled so its largest entry is 1.
pub fn channel_csi(ch: &ChannelSpec, p: &OtfsParams) -> Vec<f64> {
    let mags: Vec<f64> = effective_dd_response(ch, p).as_slice().iter().map(|z| z.norm()).collect();
    let peak = mags.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        mags.iter().map(|v| v / peak).collect()
    } else {
        mags
    }
}

/// Repeats or truncates a CSI vector to `len` entries.
pub fn fit_csi(csi: &[f64], len: usize) -> Vec<f64> {
    if csi.is_empty() {
        return vec![0.0; len];
    }
    csi.iter().copied().cycle().take(len).collect()
}

/// LMMSE equalizer `(HᴴH + σ²I)⁻¹Hᴴ` with its factorization cached.
pub struct LmmseEqualizer {
    h: DMatrix<Complex64>,
    chol: nalgebra::Cholesky<Complex64, nalgebra::Dyn>,
    noise_var: f64,
    n: usize,
    m: usize,
}

impl LmmseEqualizer {
    pub fn new(ch: &ChannelSpec, noise_var: f64, p: &OtfsParams) -> Result<Self> {
        if !(noise_var >= 0.0 && noise_var.is_finite()) {
            return Err(Error::Value(format!("noise variance {noise_var} must be non-negative")));
        }
        let h = build_dd_matrix(ch, p)?;
        let noise_var = noise_var.max(NOISE_FLOOR);
        let mut gram = h.ad_mul(&h);
        for i in 0..gram.nrows() {
            gram[(i, i)] += Complex64::new(noise_var, 0.0);
        }
        let chol = gram.cholesky().ok_or(Error::Singular)?;
        Ok(Self {
            h,
            chol,
            noise_var,
            n: p.n_doppler,
            m: p.m_delay,
        })
    }

    pub fn equalize(&self, y: &DDGrid) -> DDGrid {
        let rhs = self.h.ad_mul(&nalgebra::DVector::from_column_slice(y.as_slice()));
        let x = self.chol.solve(&rhs);
        DDGrid::from_vec(self.n, self.m, x.as_slice().to_vec()).expect("shape preserved")
    }

    /// Diagonal of `σ²(HᴴH + σ²I)⁻¹`.
    pub fn error_variances(&self) -> Vec<f64> {
        let inv = self.chol.inverse();
        (0..inv.nrows()).map(|i| self.noise_var * inv[(i, i)].re).collect()
    }
}

pub fn lmmse_detect(y: &DDGrid, ch: &ChannelSpec, noise_var: f64, p: &OtfsParams) -> Result<EqualizedFrame> {
    y.check_dims(p)?;
    let eq = LmmseEqualizer::new(ch, noise_var, p)?;
    Ok(EqualizedFrame {
        symbols: eq.equalize(y),
        post_eq_noise_std: eq.error_variances().into_iter().map(f64::sqrt).collect(),
        csi: channel_csi(ch, p),
        iterations: 1,
        converged: true,
    })
}

/// Iterative maximal-ratio-combining detector.
///
/// Per symbol `c` the branch outputs are combined as `Σ_i h*_ic r[row_ic]`
/// over the current residual `r = y − H·x̂`. The increment is normalized by
/// `Σ_i |h_ic|² + σ²`, so a noiseless channel gives the classic MRC step and a
/// noisy one shrinks towards the MMSE estimate. The first sweep takes the full
/// step; later sweeps are scaled by `damping`.
pub struct MrcDetector {
    op: DdChannel,
    energy: Vec<f64>,
    noise_var: f64,
    damping: f64,
    n: usize,
    m: usize,
}

/// Result of running the MRC iteration.
#[derive(Debug, Clone)]
pub struct MrcOutcome {
    pub symbols: DDGrid,
    pub iterations: usize,
    pub converged: bool,
}

impl MrcDetector {
    pub fn new(ch: &ChannelSpec, noise_var: f64, p: &OtfsParams, damping: f64) -> Result<Self> {
        if !(damping > 0.0 && damping <= 1.0) {
            return Err(Error::Value(format!("damping {damping} must lie in (0, 1]")));
        }
        if !(noise_var >= 0.0 && noise_var.is_finite()) {
            return Err(Error::Value(format!("noise variance {noise_var} must be non-negative")));
        }
        let op = DdChannel::new(ch, p);
        let energy = op.column_energy();
        Ok(Self {
            op,
            energy,
            noise_var,
            damping,
            n: p.n_doppler,
            m: p.m_delay,
        })
    }

    /// Runs until the update or the normal-equation residual drops below
    /// `MRC_TOL·‖y‖`, or `max_iter` sweeps are done.
    pub fn run(&self, y: &DDGrid, max_iter: usize) -> MrcOutcome {
        self.iterate(y, max_iter, true)
    }

    /// Exactly `sweeps` sweeps with no early exit. For a fixed sweep count the
    /// detector is linear in `y`.
    pub fn run_fixed(&self, y: &DDGrid, sweeps: usize) -> DDGrid {
        self.iterate(y, sweeps, false).symbols
    }

    fn iterate(&self, y: &DDGrid, max_iter: usize, early_exit: bool) -> MrcOutcome {
        let size = self.op.len();
        let mut x = vec![ZERO; size];
        let mut residual = y.as_slice().to_vec();
        let y_norm = y.energy().sqrt();
        let tol = MRC_TOL * y_norm;
        let mut iterations = 0;
        let mut converged = false;

        for sweep in 0..max_iter {
            iterations = sweep + 1;
            let step = if sweep == 0 { 1.0 } else { self.damping };
            let mut update_sq = 0.0;
            for (c, xc) in x.iter_mut().enumerate() {
                let col = self.op.column(c);
                let combined: Complex64 = col.iter().map(|&(row, h)| h.conj() * residual[row]).sum();
                let denom = self.energy[c] + self.noise_var;
                if denom == 0.0 {
                    continue;
                }
                let delta = (combined - *xc * self.noise_var) * (step / denom);
                *xc += delta;
                for &(row, h) in col {
                    residual[row] -= h * delta;
                }
                update_sq += delta.norm_sqr();
            }
            if !early_exit {
                continue;
            }
            let gradient_sq: f64 = self
                .op
                .apply_adjoint(&residual)
                .iter()
                .zip(&x)
                .map(|(g, xc)| (g - xc * self.noise_var).norm_sqr())
                .sum();
            if update_sq.sqrt() <= tol || gradient_sq.sqrt() <= tol {
                converged = true;
                break;
            }
        }
        MrcOutcome {
            symbols: DDGrid::from_vec(self.n, self.m, x).expect("shape preserved"),
            iterations,
            converged,
        }
    }

    /// Per-symbol error variance `σ²/(Σ_i |h_ic|² + σ²)`, ignoring residual interference.
    pub fn error_variances(&self) -> Vec<f64> {
        self.energy
            .iter()
            .map(|&e| {
                if self.noise_var == 0.0 {
                    0.0
                } else {
                    self.noise_var / (e + self.noise_var)
                }
            })
            .collect()
    }
}

pub fn mrc_detect(
    y: &DDGrid,
    ch: &ChannelSpec,
    noise_var: f64,
    p: &OtfsParams,
    max_iter: usize,
    damping: f64,
) -> Result<EqualizedFrame> {
    y.check_dims(p)?;
    if max_iter == 0 {
        return Err(Error::Value("max_iter must be at least 1".into()));
    }
    let det = MrcDetector::new(ch, noise_var, p, damping)?;
    let out = det.run(y, max_iter);
    Ok(EqualizedFrame {
        symbols: out.symbols,
        post_eq_noise_std: det.error_variances().into_iter().map(f64::sqrt).collect(),
        csi: channel_csi(ch, p),
        iterations: out.iterations,
        converged: out.converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Lmmse,
    #[default]
    Mrc,
}

/// Detector selection as read from configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub kind: DetectorKind,
    pub max_iter: usize,
    pub damping: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            kind: DetectorKind::Mrc,
            max_iter: 20,
            damping: 0.5,
        }
    }
}

/// A detector prepared for one channel realization.
pub enum PreparedDetector {
    Lmmse(LmmseEqualizer),
    Mrc { det: MrcDetector, max_iter: usize },
}

impl PreparedDetector {
    pub fn new(cfg: &DetectorConfig, ch: &ChannelSpec, noise_var: f64, p: &OtfsParams) -> Result<Self> {
        match cfg.kind {
            DetectorKind::Lmmse => Ok(Self::Lmmse(LmmseEqualizer::new(ch, noise_var, p)?)),
            DetectorKind::Mrc => {
                if cfg.max_iter == 0 {
                    return Err(Error::Value("max_iter must be at least 1".into()));
                }
                Ok(Self::Mrc {
                    det: MrcDetector::new(ch, noise_var, p, cfg.damping)?,
                    max_iter: cfg.max_iter,
                })
            }
        }
    }

    /// Detects a frame; `csi` is attached by the caller.
    pub fn detect(&self, y: &DDGrid, csi: Vec<f64>) -> EqualizedFrame {
        match self {
            Self::Lmmse(eq) => EqualizedFrame {
                symbols: eq.equalize(y),
                post_eq_noise_std: eq.error_variances().into_iter().map(f64::sqrt).collect(),
                csi,
                iterations: 1,
                converged: true,
            },
            Self::Mrc { det, max_iter } => {
                let out = det.run(y, *max_iter);
                EqualizedFrame {
                    symbols: out.symbols,
                    post_eq_noise_std: det.error_variances().into_iter().map(f64::sqrt).collect(),
                    csi,
                    iterations: out.iterations,
                    converged: out.converged,
                }
            }
        }
    }

    /// Applies the same linear map a previous [`detect`](Self::detect) used,
    /// given its sweep count.
    pub fn replay(&self, y: &DDGrid, iterations: usize) -> DDGrid {
        match self {
            Self::Lmmse(eq) => eq.equalize(y),
            Self::Mrc { det, .. } => det.run_fixed(y, iterations),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_channel, gen_channel, PathSpec};
    use crate::mapping::{qpsk_demap, qpsk_map, BitBuffer};
    use crate::transforms::{testutil::random_grid, OtfsTransform};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(n: usize, m: usize) -> OtfsParams {
        OtfsParams::new(n, m, 15e3, 4e9).unwrap()
    }

    fn qpsk_grid(p: &OtfsParams, seed: u64) -> DDGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bits: Vec<u8> = (0..2 * p.frame_len()).map(|_| rng.random_range(0..2)).collect();
        DDGrid::from_vec(p.n_doppler, p.m_delay, qpsk_map(&BitBuffer::new(bits)).unwrap()).unwrap()
    }

    fn through_channel(x: &DDGrid, ch: &ChannelSpec, p: &OtfsParams) -> DDGrid {
        let t = OtfsTransform::for_params(p);
        t.demodulate(&apply_channel(&t.modulate(x).unwrap(), ch, p).unwrap()).unwrap()
    }

    fn add_noise(y: &DDGrid, var: f64, seed: u64) -> DDGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = crate::channel::awgn(y.as_slice().len(), var, &mut rng);
        let data = y.as_slice().iter().zip(noise).map(|(a, b)| a + b).collect();
        DDGrid::from_vec(y.rows(), y.cols(), data).unwrap()
    }

    fn mse(a: &DDGrid, b: &DDGrid) -> f64 {
        a.as_slice().iter().zip(b.as_slice()).map(|(u, v)| (u - v).norm_sqr()).sum::<f64>()
            / a.as_slice().len() as f64
    }

    #[test]
    fn identity_matrix_for_identity_channel() {
        let p = p(4, 4);
        let h = build_dd_matrix(&ChannelSpec::identity(), &p).unwrap();
        assert_eq!(h, DMatrix::identity(16, 16));
    }

    #[test]
    fn matrix_columns_match_pushed_unit_vectors() {
        let p = p(4, 4);
        let ch = gen_channel(&p, 650.0, 3, 3, 21).unwrap();
        let h = build_dd_matrix(&ch, &p).unwrap();
        for j in 0..16 {
            let resp = through_channel(&DDGrid::delta(4, 4, j / 4, j % 4), &ch, &p);
            for i in 0..16 {
                assert!((h[(i, j)] - resp.as_slice()[i]).norm() < 1e-10, "H[{i},{j}]");
            }
        }
    }

    #[test]
    fn matrix_frobenius_norm() {
        let p = p(8, 8);
        let ch = gen_channel(&p, 500.0, 4, 5, 2).unwrap();
        let h = build_dd_matrix(&ch, &p).unwrap();
        let fro: f64 = h.iter().map(|z| z.norm_sqr()).sum();
        assert!((fro - 64.0 * ch.power()).abs() < 1e-6);
    }

    #[test]
    fn dense_guard() {
        let p = p(128, 64);
        assert!(matches!(build_dd_matrix(&ChannelSpec::identity(), &p), Err(Error::Size { .. })));
        let y = DDGrid::zeros_for(&p);
        assert!(matches!(lmmse_detect(&y, &ChannelSpec::identity(), 0.1, &p), Err(Error::Size { .. })));
    }

    #[test]
    fn sparse_operator_matches_dense() {
        let p = p(8, 8);
        let ch = gen_channel(&p, 650.0, 5, 6, 4).unwrap();
        let op = DdChannel::new(&ch, &p);
        let x = random_grid(8, 8, 10);
        let fast = op.apply(x.as_slice());
        let slow = through_channel(&x, &ch, &p);
        for (a, b) in fast.iter().zip(slow.as_slice()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn lmmse_identity_noiseless_is_exact() {
        let p = p(4, 4);
        let y = random_grid(4, 4, 3);
        let out = lmmse_detect(&y, &ChannelSpec::identity(), 0.0, &p).unwrap();
        assert!(out.symbols.max_abs_diff(&y) < 1e-11);
        assert!(out.post_eq_noise_std.iter().all(|&s| s > 0.0 && s.is_finite()));
    }

    #[test]
    fn lmmse_recovers_noiseless_multipath() {
        let p = p(4, 4);
        let ch = ChannelSpec::new(
            vec![
                PathSpec { gain: Complex64::new(0.8, 0.0), delay_tap: 0, doppler_tap: 0 },
                PathSpec { gain: Complex64::new(0.0, 0.6), delay_tap: 1, doppler_tap: 1 },
            ],
            &p,
        )
        .unwrap();
        let x = random_grid(4, 4, 8);
        let out = lmmse_detect(&through_channel(&x, &ch, &p), &ch, 0.0, &p).unwrap();
        assert!(out.symbols.max_abs_diff(&x) < 1e-8);
    }

    #[test]
    fn lmmse_scalar_mse_on_identity_channel() {
        // 10 dB: σ² = 0.1, scalar LMMSE error σ²/(1+σ²)
        let p = p(8, 8);
        let var = 0.1;
        let mut total = 0.0;
        for f in 0..200 {
            let x = qpsk_grid(&p, f);
            let y = add_noise(&x, var, 1000 + f);
            total += mse(&lmmse_detect(&y, &ChannelSpec::identity(), var, &p).unwrap().symbols, &x);
        }
        let expected = var / (1.0 + var);
        assert!((total / 200.0 / expected - 1.0).abs() < 0.05, "{}", total / 200.0);
    }

    #[test]
    fn mrc_identity_channel_one_iteration() {
        let p = p(8, 8);
        let y = random_grid(8, 8, 1);
        let out = mrc_detect(&y, &ChannelSpec::identity(), 0.0, &p, 20, 0.5).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(out.converged);
        assert!(out.symbols.max_abs_diff(&y) < 1e-15);
    }

    #[test]
    fn mrc_noiseless_multipath_zero_ber() {
        let p = p(8, 8);
        for seed in 0..20 {
            let ch = ChannelSpec::new(
                vec![
                    PathSpec { gain: Complex64::new(0.8, 0.0), delay_tap: 0, doppler_tap: 0 },
                    PathSpec { gain: Complex64::from_polar(0.6, seed as f64), delay_tap: 1 + (seed % 3) as usize, doppler_tap: (seed % 5) as i64 - 2 },
                ],
                &p,
            )
            .unwrap();
            let x = qpsk_grid(&p, seed);
            let y = through_channel(&x, &ch, &p);
            let mrc = mrc_detect(&y, &ch, 0.0, &p, 20, 0.5).unwrap();
            let lmmse = lmmse_detect(&y, &ch, 0.0, &p).unwrap();
            assert_eq!(qpsk_demap(mrc.symbols.as_slice()), qpsk_demap(x.as_slice()));
            assert_eq!(qpsk_demap(lmmse.symbols.as_slice()), qpsk_demap(x.as_slice()));
        }
    }

    #[test]
    fn mrc_within_twice_lmmse_mse() {
        let p = p(8, 8);
        let var = 0.1;
        let (mut mrc, mut lmmse) = (0.0, 0.0);
        for f in 0..100 {
            let ch = gen_channel(&p, 500.0, 3, 3, 77 + f).unwrap();
            let x = qpsk_grid(&p, f);
            let y = add_noise(&through_channel(&x, &ch, &p), var, 5000 + f);
            mrc += mse(&mrc_detect(&y, &ch, var, &p, 20, 0.5).unwrap().symbols, &x);
            lmmse += mse(&lmmse_detect(&y, &ch, var, &p).unwrap().symbols, &x);
        }
        assert!(mrc <= 2.0 * lmmse, "mrc {mrc} lmmse {lmmse}");
    }

    #[test]
    fn mrc_equals_lmmse_on_single_path() {
        let p = p(8, 8);
        for (seed, var) in [(1u64, 0.0f64), (2, 0.05), (3, 0.5)] {
            let ch = gen_channel(&p, 650.0, 1, 0, seed).unwrap();
            let ch = ChannelSpec::new(
                vec![PathSpec { delay_tap: 3, ..ch.paths()[0] }],
                &p,
            )
            .unwrap();
            let y = add_noise(&through_channel(&qpsk_grid(&p, seed), &ch, &p), var.max(0.01), seed);
            let a = mrc_detect(&y, &ch, var, &p, 20, 0.5).unwrap();
            let b = lmmse_detect(&y, &ch, var, &p).unwrap();
            assert!(a.symbols.max_abs_diff(&b.symbols) < 1e-6);
        }
    }

    #[test]
    fn noise_std_positive_when_noisy() {
        let p = p(8, 8);
        let ch = gen_channel(&p, 350.0, 4, 4, 6).unwrap();
        let y = random_grid(8, 8, 6);
        for out in [
            mrc_detect(&y, &ch, 0.2, &p, 5, 0.5).unwrap(),
            lmmse_detect(&y, &ch, 0.2, &p).unwrap(),
        ] {
            assert!(out.post_eq_noise_std.iter().all(|&s| s > 0.0 && s.is_finite()));
            assert!(out.csi.iter().all(|v| v.is_finite()));
            assert_eq!(out.csi.len(), 64);
        }
    }

    #[test]
    fn phase_equivariance() {
        let p = p(8, 8);
        let ch = gen_channel(&p, 500.0, 3, 3, 12).unwrap();
        let rot = Complex64::from_polar(1.0, 0.7);
        let rotated = ChannelSpec::new(
            ch.paths().iter().map(|path| PathSpec { gain: path.gain * rot, ..*path }).collect(),
            &p,
        )
        .unwrap();
        let x = qpsk_grid(&p, 3);
        let y = add_noise(&through_channel(&x, &ch, &p), 0.05, 4);
        let y_rot = DDGrid::from_vec(8, 8, y.as_slice().iter().map(|v| v * rot).collect()).unwrap();
        for kind in [DetectorKind::Mrc, DetectorKind::Lmmse] {
            let cfg = DetectorConfig { kind, ..Default::default() };
            let a = PreparedDetector::new(&cfg, &ch, 0.05, &p).unwrap().detect(&y, vec![]);
            let b = PreparedDetector::new(&cfg, &rotated, 0.05, &p).unwrap().detect(&y_rot, vec![]);
            assert_eq!(qpsk_demap(a.symbols.as_slice()), qpsk_demap(b.symbols.as_slice()));
            // same channel, rotated observation: output rotates
            let c = PreparedDetector::new(&cfg, &ch, 0.05, &p).unwrap().detect(&y_rot, vec![]);
            for (u, v) in a.symbols.as_slice().iter().zip(c.symbols.as_slice()) {
                assert!((u * rot - v).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn lmmse_approaches_zero_forcing() {
        let p = p(8, 8);
        let ch = gen_channel(&p, 650.0, 3, 4, 31).unwrap();
        let x = random_grid(8, 8, 31);
        let out = lmmse_detect(&through_channel(&x, &ch, &p), &ch, 1e-12, &p).unwrap();
        assert!(out.symbols.max_abs_diff(&x) < 1e-6);
    }

    #[test]
    fn replay_is_linear_in_input() {
        let p = p(8, 8);
        let ch = gen_channel(&p, 650.0, 4, 4, 8).unwrap();
        let det = PreparedDetector::new(&DetectorConfig::default(), &ch, 0.1, &p).unwrap();
        let a = random_grid(8, 8, 1);
        let b = random_grid(8, 8, 2);
        let sum = DDGrid::from_vec(8, 8, a.as_slice().iter().zip(b.as_slice()).map(|(u, v)| u + v).collect()).unwrap();
        let (ra, rb, rs) = (det.replay(&a, 7), det.replay(&b, 7), det.replay(&sum, 7));
        for ((s, u), v) in rs.as_slice().iter().zip(ra.as_slice()).zip(rb.as_slice()) {
            assert!((s - u - v).norm() < 1e-12);
        }
    }

    #[test]
    fn invalid_arguments() {
        let p = p(4, 4);
        let y = DDGrid::zeros_for(&p);
        assert!(mrc_detect(&y, &ChannelSpec::identity(), 0.1, &p, 0, 0.5).is_err());
        assert!(mrc_detect(&y, &ChannelSpec::identity(), 0.1, &p, 5, 0.0).is_err());
        assert!(mrc_detect(&y, &ChannelSpec::identity(), 0.1, &p, 5, 1.5).is_err());
    }

    #[test]
    fn csi_fitting() {
        assert_eq!(fit_csi(&[1.0, 0.5], 5), vec![1.0, 0.5, 1.0, 0.5, 1.0]);
        assert_eq!(fit_csi(&[1.0, 0.5, 0.2], 2), vec![1.0, 0.5]);
    }
}
