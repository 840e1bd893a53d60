//! 16-bit binary PGM output for magnitude and error-map images.
//!
//! Format: `P5\n<width> <height>\n65535\n` followed by row-major big-endian
//! u16 samples. Values are magnitudes clipped to [0, 1] (the nominal image
//! peak) and quantized to 65535 levels; the error mode multiplies by 5
//! before clipping so faint residuals stay visible.

use crate::image::ComplexImage;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use thiserror::Error;

pub const PGM_MAX: u16 = u16::MAX;

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed pgm: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmMode {
    /// Magnitudes clipped to [0, 1].
    Magnitude,
    /// Magnitudes × 5, then clipped to [0, 1].
    ErrorX5,
}

fn quantize(mag: f64, mode: PgmMode) -> u16 {
    let gain = match mode {
        PgmMode::Magnitude => 1.0,
        PgmMode::ErrorX5 => 5.0,
    };
    let v = (mag * gain).clamp(0.0, 1.0);
    (v * PGM_MAX as f64).round() as u16
}

pub fn write_image_pgm(img: &ComplexImage, path: &Path, mode: PgmMode) -> Result<(), PgmError> {
    let mut buf = Vec::with_capacity(32 + 2 * img.len());
    write!(buf, "P5\n{} {}\n{}\n", img.nx, img.ny, PGM_MAX)?;
    for z in &img.data {
        buf.extend_from_slice(&quantize(z.norm(), mode).to_be_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

/// Parses a 16-bit binary PGM back into (width, height, samples).
pub fn read_image_pgm(path: &Path) -> Result<(usize, usize, Vec<u16>), PgmError> {
    let bytes = fs::read(path)?;
    let mut pos = 0usize;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(PgmError::Malformed("truncated header".into()));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| {
            PgmError::Malformed("non-ascii header".into())
        })?.to_string());
    }
    if fields[0] != "P5" {
        return Err(PgmError::Malformed(format!("expected P5, got {}", fields[0])));
    }
    let w: usize = fields[1].parse().map_err(|_| PgmError::Malformed("bad width".into()))?;
    let h: usize = fields[2].parse().map_err(|_| PgmError::Malformed("bad height".into()))?;
    if fields[3] != PGM_MAX.to_string() {
        return Err(PgmError::Malformed(format!("expected maxval 65535, got {}", fields[3])));
    }
    pos += 1; // exactly one whitespace byte separates maxval from samples
    let need = 2 * w * h;
    if bytes.len() - pos != need {
        return Err(PgmError::Malformed(format!(
            "expected {need} sample bytes, found {}",
            bytes.len() - pos
        )));
    }
    let samples = bytes[pos..]
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    Ok((w, h, samples))
}
