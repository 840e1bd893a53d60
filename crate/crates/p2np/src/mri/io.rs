//! On-disk formats: the binary k-space container and the trajectory CSV.
//!
//! K-space file layout:
//!   line 1: magic "P2NPKSP1"
//!   line 2: "samples=<M> coils=<L> kind=<trajectory kind>"
//!   then M·L little-endian float64 (re, im) pairs, coil-major.
//!
//! Trajectory CSV: header "kx,ky", one sample per line. Floats are written
//! with Rust's shortest round-trip formatting, so read-back is bitwise exact.

use super::trajectory::Trajectory;
use super::MriError;
use num_complex::Complex64;
use std::io::Write;
use std::path::Path;

pub const KSPACE_MAGIC: &str = "P2NPKSP1";

#[derive(Debug, Clone, PartialEq)]
pub struct KspaceFile {
    pub samples_per_coil: usize,
    pub n_coils: usize,
    pub kind: String,
    /// Coil-major measurement vector of length samples_per_coil · n_coils.
    pub data: Vec<Complex64>,
}

pub fn write_kspace(path: &Path, file: &KspaceFile) -> Result<(), MriError> {
    assert_eq!(
        file.data.len(),
        file.samples_per_coil * file.n_coils,
        "k-space payload does not match the declared dimensions"
    );
    let mut out = Vec::new();
    writeln!(out, "{KSPACE_MAGIC}").unwrap();
    writeln!(out, "samples={} coils={} kind={}", file.samples_per_coil, file.n_coils, file.kind)
        .unwrap();
    for z in &file.data {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_kspace(path: &Path) -> Result<KspaceFile, MriError> {
    let bytes = std::fs::read(path)?;
    let nl1 = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| MriError::HeaderParse("missing magic line".into()))?;
    let magic = String::from_utf8_lossy(&bytes[..nl1]).into_owned();
    if magic != KSPACE_MAGIC {
        return Err(MriError::BadMagic { expected: KSPACE_MAGIC, found: magic });
    }
    let rest = &bytes[nl1 + 1..];
    let nl2 = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| MriError::HeaderParse("missing dimension line".into()))?;
    let header = String::from_utf8_lossy(&rest[..nl2]).into_owned();

    let mut samples = None;
    let mut coils = None;
    let mut kind = None;
    for field in header.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| MriError::HeaderParse(format!("bad field {field:?}")))?;
        match key {
            "samples" => {
                samples = Some(value.parse::<usize>().map_err(|e| {
                    MriError::HeaderParse(format!("bad sample count {value:?}: {e}"))
                })?)
            }
            "coils" => {
                coils = Some(value.parse::<usize>().map_err(|e| {
                    MriError::HeaderParse(format!("bad coil count {value:?}: {e}"))
                })?)
            }
            "kind" => kind = Some(value.to_string()),
            other => return Err(MriError::HeaderParse(format!("unknown field {other:?}"))),
        }
    }
    let samples_per_coil = samples.ok_or_else(|| MriError::HeaderParse("missing samples".into()))?;
    let n_coils = coils.ok_or_else(|| MriError::HeaderParse("missing coils".into()))?;
    let kind = kind.ok_or_else(|| MriError::HeaderParse("missing kind".into()))?;

    let payload = &rest[nl2 + 1..];
    let expected = samples_per_coil * n_coils * 16;
    if payload.len() != expected {
        return Err(MriError::Truncated { expected, got: payload.len() });
    }
    let data = payload
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    Ok(KspaceFile { samples_per_coil, n_coils, kind, data })
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<(), MriError> {
    let mut out = String::from("kx,ky\n");
    for &(kx, ky) in &traj.samples {
        out.push_str(&format!("{kx},{ky}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads back the (kx, ky) pairs of a trajectory CSV.
pub fn read_trajectory_csv(path: &Path) -> Result<Vec<(f64, f64)>, MriError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("kx,ky") => {}
        other => return Err(MriError::HeaderParse(format!("expected kx,ky header, got {other:?}"))),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let (a, b) = line
                .split_once(',')
                .ok_or_else(|| MriError::HeaderParse(format!("line {}: missing comma", i + 2)))?;
            let kx = a
                .parse::<f64>()
                .map_err(|e| MriError::HeaderParse(format!("line {}: {e}", i + 2)))?;
            let ky = b
                .parse::<f64>()
                .map_err(|e| MriError::HeaderParse(format!("line {}: {e}", i + 2)))?;
            Ok((kx, ky))
        })
        .collect()
}
