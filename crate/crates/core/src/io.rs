//! File formats: binary PGM (P5), raw little-endian `f32` maps with a JSON
//! sidecar, and small JSON helpers.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Mask};

/// A decoded PGM image: raw sample values and the declared maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct Pgm {
    pub pixels: Grid<u16>,
    pub maxval: u16,
}

pub fn write_pgm(path: &Path, pixels: &Grid<u16>, maxval: u16) -> Result<()> {
    if maxval == 0 {
        return Err(Error::Domain("PGM maxval must be positive".into()));
    }
    let mut out = Vec::with_capacity(32 + pixels.len() * 2);
    write!(out, "P5\n{} {}\n{}\n", pixels.cols(), pixels.rows(), maxval).expect("write to Vec");
    if maxval < 256 {
        out.extend(pixels.iter().map(|&v| v.min(maxval) as u8));
    } else {
        for &v in pixels.iter() {
            out.extend_from_slice(&v.min(maxval).to_be_bytes());
        }
    }
    write_bytes(path, &out)
}

pub fn read_pgm(path: &Path) -> Result<Pgm> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(path, &bytes)
}

pub fn decode_pgm(path: &Path, bytes: &[u8]) -> Result<Pgm> {
    let mut pos = 0usize;
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::format(path, 0, "missing P5 magic"));
    }
    pos += 2;
    let width = header_field(path, bytes, &mut pos, "width")?;
    let height = header_field(path, bytes, &mut pos, "height")?;
    let maxval = header_field(path, bytes, &mut pos, "maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::format(path, pos as u64, format!("maxval {maxval} out of range")));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::format(path, pos as u64, "expected whitespace after maxval"));
    }
    pos += 1;
    let bpp = if maxval < 256 { 1 } else { 2 };
    let need = width * height * bpp;
    let raster = &bytes[pos..];
    if raster.len() < need {
        return Err(Error::format(
            path,
            (pos + raster.len()) as u64,
            format!("raster truncated: need {need} bytes, have {}", raster.len()),
        ));
    }
    let data: Vec<u16> = if bpp == 1 {
        raster[..need].iter().map(|&b| b as u16).collect()
    } else {
        raster[..need]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    };
    Ok(Pgm {
        pixels: Grid::from_vec(height, width, data)?,
        maxval: maxval as u16,
    })
}

fn header_field(path: &Path, bytes: &[u8], pos: &mut usize, name: &str) -> Result<usize> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::format(path, start as u64, format!("expected {name}")));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::format(path, start as u64, format!("bad {name}")))
}

/// Gray levels rounded and clamped into `0..=65535`, written as a 16-bit PGM.
pub fn write_gray_pgm(path: &Path, frame: &Grid<f64>) -> Result<()> {
    let px = frame.map(|&v| quantize_u16(v));
    write_pgm(path, &px, u16::MAX)
}

pub fn quantize_u16(v: f64) -> u16 {
    if v.is_nan() {
        0
    } else {
        v.round().clamp(0.0, 65535.0) as u16
    }
}

pub fn read_gray_pgm(path: &Path) -> Result<Grid<f64>> {
    Ok(read_pgm(path)?.pixels.map(|&v| v as f64))
}

pub fn write_mask_pgm(path: &Path, mask: &Mask) -> Result<()> {
    write_pgm(path, &mask.map(|&m| if m { 255 } else { 0 }), 255)
}

pub fn read_mask_pgm(path: &Path) -> Result<Mask> {
    Ok(read_pgm(path)?.pixels.map(|&v| v != 0))
}

/// Sidecar describing a raw `f32` map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawMapSidecar {
    pub height: usize,
    pub width: usize,
    pub dtype: String,
    pub endianness: String,
    pub units: String,
}

/// Sidecar path for a raw map: same stem, `.json` extension.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Sample type of a raw map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RawDtype {
    #[default]
    F32,
    F64,
}

impl RawDtype {
    pub fn name(self) -> &'static str {
        match self {
            RawDtype::F32 => "f32",
            RawDtype::F64 => "f64",
        }
    }

    fn width(self) -> usize {
        match self {
            RawDtype::F32 => 4,
            RawDtype::F64 => 8,
        }
    }
}

pub fn write_raw_map(path: &Path, map: &Grid<f64>, units: &str) -> Result<()> {
    write_raw_map_as(path, map, units, RawDtype::F32)
}

pub fn write_raw_map_as(path: &Path, map: &Grid<f64>, units: &str, dtype: RawDtype) -> Result<()> {
    let mut out = Vec::with_capacity(map.len() * dtype.width());
    for &v in map.iter() {
        match dtype {
            RawDtype::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            RawDtype::F64 => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
    write_bytes(path, &out)?;
    let side = RawMapSidecar {
        height: map.rows(),
        width: map.cols(),
        dtype: dtype.name().into(),
        endianness: "little".into(),
        units: units.into(),
    };
    write_json(&sidecar_path(path), &side)
}

/// Read a raw map of either sample type.
pub fn read_raw_map(path: &Path) -> Result<Grid<f64>> {
    let side: RawMapSidecar = read_json(&sidecar_path(path))?;
    let dtype = match (side.dtype.as_str(), side.endianness.as_str()) {
        ("f32", "little") => RawDtype::F32,
        ("f64", "little") => RawDtype::F64,
        _ => {
            return Err(Error::format(
                sidecar_path(path),
                0,
                format!("unsupported dtype {} / {}", side.dtype, side.endianness),
            ))
        }
    };
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let w = dtype.width();
    let need = side.height * side.width * w;
    if bytes.len() != need {
        return Err(Error::format(
            path,
            bytes.len().min(need) as u64,
            format!(
                "expected {need} bytes for {}x{} {} map, found {}",
                side.height,
                side.width,
                dtype.name(),
                bytes.len()
            ),
        ));
    }
    let data = bytes
        .chunks_exact(w)
        .map(|c| match dtype {
            RawDtype::F32 => f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64,
            RawDtype::F64 => f64::from_le_bytes(c.try_into().expect("8 bytes")),
        })
        .collect();
    Grid::from_vec(side.height, side.width, data)
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.into(),
        source: e,
    })?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.into(),
        source: e,
    })
}
