//! Gray-coded QPSK mapping and latent-to-grid packing.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::{DDGrid, OtfsParams};

/// A sequence of bits, stored one per byte (`0` or `1`).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BitBuffer {
    bits: Vec<u8>,
}

impl BitBuffer {
    /// Wraps a bit sequence. Any nonzero byte counts as a one.
    pub fn new(bits: impl Into<Vec<u8>>) -> Self {
        let mut bits = bits.into();
        bits.iter_mut().for_each(|b| *b = (*b != 0) as u8);
        Self { bits }
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Unpacks raw bytes, most significant bit first.
    pub fn from_bytes_msb(bytes: &[u8]) -> Self {
        let bits = bytes
            .iter()
            .flat_map(|&byte| (0..8).rev().map(move |i| (byte >> i) & 1))
            .collect();
        Self { bits }
    }

    /// Packs into bytes, most significant bit first; the last byte is zero-padded.
    pub fn to_bytes_msb(&self) -> Vec<u8> {
        self.bits
            .chunks(8)
            .map(|chunk| {
                chunk
                    .iter()
                    .enumerate()
                    .fold(0u8, |acc, (i, &b)| acc | (b << (7 - i)))
            })
            .collect()
    }

    /// Number of positions where `self` and `other` differ.
    pub fn hamming(&self, other: &BitBuffer) -> usize {
        assert_eq!(self.len(), other.len());
        self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count()
    }
}

/// Maps bit pairs `(b1, b0)` to `((1−2b1) + j(1−2b0))/√2`.
pub fn qpsk_map(bits: &BitBuffer) -> Result<Vec<Complex64>> {
    if !bits.len().is_multiple_of(2) {
        return Err(Error::Length(bits.len()));
    }
    Ok(bits
        .bits
        .chunks_exact(2)
        .map(|pair| {
            Complex64::new(
                (1.0 - 2.0 * pair[0] as f64) * FRAC_1_SQRT_2,
                (1.0 - 2.0 * pair[1] as f64) * FRAC_1_SQRT_2,
            )
        })
        .collect())
}

/// Hard quadrant decision. Zero real or imaginary parts decide a zero bit.
pub fn qpsk_demap(symbols: &[Complex64]) -> BitBuffer {
    let bits = symbols
        .iter()
        .flat_map(|z| [(z.re < 0.0) as u8, (z.im < 0.0) as u8])
        .collect();
    BitBuffer { bits }
}

/// A latent vector carried on a delay-Doppler grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedLatent {
    pub grid: DDGrid,
    /// Factor applied to the latent so occupied symbols have unit mean energy.
    pub scale: f64,
    /// Number of real latent components carried.
    pub len: usize,
}

impl PackedLatent {
    /// Number of grid symbols carrying latent components.
    pub fn used_symbols(&self) -> usize {
        self.len.div_ceil(2)
    }
}

/// Packs consecutive real pairs into Re/Im of grid entries, row-major.
///
/// The grid is scaled so occupied symbols have unit average energy; a zero
/// latent keeps scale 1. An odd-length latent leaves the last imaginary part
/// at zero.
pub fn pack_latent(z: &[f64], p: &OtfsParams) -> Result<PackedLatent> {
    let capacity = 2 * p.frame_len();
    if z.len() > capacity {
        return Err(Error::Capacity {
            len: z.len(),
            capacity,
        });
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Value("latent has non-finite components".into()));
    }
    let used = z.len().div_ceil(2);
    let energy: f64 = z.iter().map(|v| v * v).sum();
    let scale = if energy > 0.0 {
        (used as f64 / energy).sqrt()
    } else {
        1.0
    };
    let mut grid = DDGrid::zeros_for(p);
    for (slot, pair) in grid.as_mut_slice().iter_mut().zip(z.chunks(2)) {
        let im = pair.get(1).copied().unwrap_or(0.0);
        *slot = Complex64::new(pair[0], im) * scale;
    }
    Ok(PackedLatent {
        grid,
        scale,
        len: z.len(),
    })
}

/// Reads `len` real components back from a grid and undoes `scale`.
pub fn unpack_latent(g: &DDGrid, len: usize, scale: f64) -> Result<Vec<f64>> {
    let capacity = 2 * g.as_slice().len();
    if len > capacity {
        return Err(Error::Capacity { len, capacity });
    }
    Ok(interleave(g.as_slice())
        .take(len)
        .map(|v| v / scale)
        .collect())
}

/// Re/Im interleaving of complex values.
pub fn interleave(values: &[Complex64]) -> impl Iterator<Item = f64> + '_ {
    values.iter().flat_map(|z| [z.re, z.im])
}

/// Inverse of [`interleave`]; an odd trailing value becomes a real symbol.
pub fn deinterleave(values: &[f64]) -> Vec<Complex64> {
    values
        .chunks(2)
        .map(|c| Complex64::new(c[0], c.get(1).copied().unwrap_or(0.0)))
        .collect()
}
