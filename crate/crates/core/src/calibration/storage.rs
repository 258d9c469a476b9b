//! Coefficient tensor files and measurement manifests.
//!
//! Tensor layout: 4-byte magic `TFCT`, `rows` and `cols` as `u32` LE, then
//! `8·rows·cols` `f64` LE values, plane-major and row-major within a plane.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CoefficientTensor, Measurement, MeasurementSet, N_COEFFS};
use crate::error::{Error, Result};
use crate::grid::{GrayFrame, Grid};
use crate::io;

pub const COEFF_MAGIC: &[u8; 4] = b"TFCT";

pub fn write_coefficients(path: &Path, c: &CoefficientTensor) -> Result<()> {
    let (rows, cols) = c.shape();
    let mut out = Vec::with_capacity(12 + N_COEFFS * rows * cols * 8);
    out.extend_from_slice(COEFF_MAGIC);
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    for plane in c.planes() {
        for v in plane.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    io::write_bytes(path, &out)
}

pub fn read_coefficients(path: &Path) -> Result<CoefficientTensor> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 {
        return Err(Error::format(path, bytes.len() as u64, "truncated header"));
    }
    if &bytes[..4] != COEFF_MAGIC {
        return Err(Error::format(path, 0, "bad magic, expected TFCT"));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let n = rows * cols;
    let need = 12 + N_COEFFS * n * 8;
    if bytes.len() != need {
        return Err(Error::format(
            path,
            bytes.len().min(need) as u64,
            format!("expected {need} bytes for {rows}x{cols} tensor, found {}", bytes.len()),
        ));
    }
    let mut planes = Vec::with_capacity(N_COEFFS);
    for p in 0..N_COEFFS {
        let start = 12 + p * n * 8;
        let data: Vec<f64> = bytes[start..start + n * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::format(path, (start + i * 8) as u64, "non-finite coefficient"));
        }
        planes.push(Grid::from_vec(rows, cols, data)?);
    }
    CoefficientTensor::new(planes)
}

/// One manifest row; `frame_path` is relative to the manifest's directory
/// unless absolute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub t_obj: f64,
    pub t_amb: f64,
    pub frame_path: PathBuf,
}

pub fn load_measurements(manifest: &Path) -> Result<MeasurementSet> {
    let entries: Vec<ManifestEntry> = io::read_json(manifest)?;
    let base = manifest.parent().unwrap_or_else(|| Path::new("."));
    let samples = entries
        .into_iter()
        .map(|e| {
            let p = if e.frame_path.is_absolute() {
                e.frame_path.clone()
            } else {
                base.join(&e.frame_path)
            };
            Ok(Measurement {
                t_obj: e.t_obj,
                t_amb: e.t_amb,
                frame: read_frame(&p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    MeasurementSet::new(samples)
}

/// How measurement frames are stored on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameFormat {
    /// 16-bit PGM; gray levels are rounded.
    #[default]
    Pgm,
    F32,
    /// Lossless.
    F64,
}

impl FrameFormat {
    fn extension(self) -> &'static str {
        match self {
            FrameFormat::Pgm => "pgm",
            FrameFormat::F32 => "f32",
            FrameFormat::F64 => "f64",
        }
    }
}

/// `.pgm` files are PGM, anything else a raw map with a JSON sidecar.
fn read_frame(path: &Path) -> Result<GrayFrame> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) {
        io::read_gray_pgm(path)
    } else {
        io::read_raw_map(path)
    }
}

/// Write frames as 16-bit PGMs next to `manifest` and the manifest itself.
pub fn write_measurements(manifest: &Path, ms: &MeasurementSet) -> Result<()> {
    write_measurements_as(manifest, ms, FrameFormat::Pgm)
}

pub fn write_measurements_as(manifest: &Path, ms: &MeasurementSet, format: FrameFormat) -> Result<()> {
    let base = manifest.parent().unwrap_or_else(|| Path::new("."));
    let mut entries = Vec::with_capacity(ms.len());
    for (k, s) in ms.samples().iter().enumerate() {
        let name = PathBuf::from(format!("frame_{k:04}.{}", format.extension()));
        let path = base.join(&name);
        match format {
            FrameFormat::Pgm => io::write_gray_pgm(&path, &s.frame)?,
            FrameFormat::F32 => io::write_raw_map_as(&path, &s.frame, "gray", io::RawDtype::F32)?,
            FrameFormat::F64 => io::write_raw_map_as(&path, &s.frame, "gray", io::RawDtype::F64)?,
        }
        entries.push(ManifestEntry {
            t_obj: s.t_obj,
            t_amb: s.t_amb,
            frame_path: name,
        });
    }
    io::write_json(manifest, &entries)
}
