use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::pipeline::FrameStats;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "snr_db,speed_kmh,ber,ser,symbol_mse,latent_mse,psnr_db,denoise_steps_mean,frames";

/// Aggregated metrics of one operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub snr_db: f64,
    pub speed_kmh: f64,
    pub ber: f64,
    pub ser: f64,
    /// Mean squared symbol error at the detector output.
    pub symbol_mse: f64,
    /// Mean squared latent error after the denoiser.
    pub latent_mse: f64,
    /// Mean per-frame PSNR; latent payloads only.
    pub psnr_db: Option<f64>,
    pub denoise_steps_mean: f64,
    pub frames: usize,
}

impl MetricRow {
    pub fn aggregate(snr_db: f64, speed_kmh: f64, stats: &[FrameStats]) -> Self {
        let frames = stats.len();
        let sum = |f: fn(&FrameStats) -> f64| stats.iter().map(f).sum::<f64>();
        let count = |f: fn(&FrameStats) -> usize| stats.iter().map(f).sum::<usize>();
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let n = frames.max(1) as f64;
        let psnr_db = if stats.iter().all(|s| s.psnr_db.is_some()) && frames > 0 {
            Some(stats.iter().filter_map(|s| s.psnr_db).sum::<f64>() / n)
        } else {
            None
        };
        Self {
            snr_db,
            speed_kmh,
            ber: ratio(count(|s| s.bit_errors), count(|s| s.bits)),
            ser: ratio(count(|s| s.symbol_errors), count(|s| s.symbols)),
            symbol_mse: sum(|s| s.symbol_mse) / n,
            latent_mse: sum(|s| s.latent_mse) / n,
            psnr_db,
            denoise_steps_mean: sum(|s| s.steps as f64) / n,
            frames,
        }
    }

    pub fn to_csv_line(&self) -> String {
        let psnr = self.psnr_db.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.snr_db,
            self.speed_kmh,
            self.ber,
            self.ser,
            self.symbol_mse,
            self.latent_mse,
            psnr,
            self.denoise_steps_mean,
            self.frames
        )
    }
}

pub fn to_csv(rows: &[MetricRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        let _ = writeln!(out, "{}", row.to_csv_line());
    }
    out
}

pub fn write_csv(path: impl AsRef<Path>, rows: &[MetricRow]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_csv(rows)).map_err(|e| Error::io(path, e))
}

/// `10·log10(peak²/mse)`; infinite for identical inputs.
pub fn psnr(reference: &[f64], test: &[f64], peak: f64) -> Result<f64> {
    if reference.len() != test.len() {
        return Err(Error::DimMismatch {
            expected: reference.len(),
            got: test.len(),
        });
    }
    if reference.is_empty() {
        return Err(Error::Value("PSNR of empty tensors".into()));
    }
    let mse = reference.iter().zip(test).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / reference.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psnr_examples() {
        assert_eq!(psnr(&[0.5, 0.1], &[0.5, 0.1], 1.0).unwrap(), f64::INFINITY);
        assert!((psnr(&[0.0], &[0.1], 1.0).unwrap() - 20.0).abs() < 1e-12);
        assert!((psnr(&[0.0, 0.0], &[0.05, -0.05], 1.0).unwrap() - 10.0 * 400f64.log10()).abs() < 1e-12);
        assert!((psnr(&[0.0], &[0.05], 1.0).unwrap() - 26.0206).abs() < 1e-4);
        assert!(matches!(psnr(&[0.0], &[0.0, 1.0], 1.0), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn aggregation() {
        let frame = |bits, psnr| FrameStats {
            bit_errors: bits,
            bits: 10,
            symbol_errors: bits,
            symbols: 5,
            symbol_mse: 0.5,
            latent_mse: 0.25,
            psnr_db: psnr,
            steps: 4,
        };
        let row = MetricRow::aggregate(5.0, 350.0, &[frame(1, Some(10.0)), frame(3, Some(20.0))]);
        assert_eq!(row.ber, 0.2);
        assert_eq!(row.ser, 0.4);
        assert_eq!(row.psnr_db, Some(15.0));
        assert_eq!(row.denoise_steps_mean, 4.0);
        assert_eq!(row.frames, 2);
        assert_eq!(row.to_csv_line(), "5,350,0.2,0.4,0.5,0.25,15,4,2");
        let bits = MetricRow::aggregate(5.0, 350.0, &[frame(0, None)]);
        assert!(bits.to_csv_line().contains(",,"));
    }
}
