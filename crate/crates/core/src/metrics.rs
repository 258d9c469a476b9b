//! Masked error metrics and the training loss.
//!
//! Windowed operators (Sobel, SSIM) read neighbours with replicate padding at
//! the image border; a neighbour outside the mask is replaced by the value
//! at the window center, so masked-out pixels never influence any result.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Mask};
use crate::io;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// °C per gray level of the difference-map PGM.
pub const DIFF_MAP_SCALE: f64 = 1e-3;

fn check_pair(a: &Grid<f64>, b: &Grid<f64>, mask: &Mask) -> Result<usize> {
    a.ensure_same_shape(b)?;
    a.ensure_same_shape(mask)?;
    match mask.count_true() {
        0 => Err(Error::EmptyMask),
        n => Ok(n),
    }
}

/// Neighbour `(r + dr, c + dc)` of a valid center under the masking rule.
#[inline]
fn neighbour(img: &Grid<f64>, mask: Option<&Mask>, r: usize, c: usize, dr: isize, dc: isize) -> f64 {
    let (rows, cols) = img.shape();
    let rr = (r as isize + dr).clamp(0, rows as isize - 1) as usize;
    let cc = (c as isize + dc).clamp(0, cols as isize - 1) as usize;
    match mask {
        Some(m) if !*m.get(rr, cc) => *img.get(r, c),
        _ => *img.get(rr, cc),
    }
}

/// Mean of `|x̂ − x|` over the mask.
pub fn mae(x_hat: &Grid<f64>, x: &Grid<f64>, mask: &Mask) -> Result<f64> {
    let n = check_pair(x_hat, x, mask)?;
    let sum: f64 = x_hat
        .iter()
        .zip(x.iter())
        .zip(mask.iter())
        .filter(|(_, &m)| m)
        .map(|((a, b), _)| (a - b).abs())
        .sum();
    Ok(sum / n as f64)
}

const SOBEL_X: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
const SOBEL_Y: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];

/// `sqrt(Gx² + Gy²)` with the 3×3 Sobel kernels and replicate padding.
pub fn sobel_magnitude(img: &Grid<f64>) -> Result<Grid<f64>> {
    sobel_impl(img, None)
}

/// Sobel magnitude under the masking rule; zero at masked-out pixels.
pub fn sobel_magnitude_masked(img: &Grid<f64>, mask: &Mask) -> Result<Grid<f64>> {
    img.ensure_same_shape(mask)?;
    sobel_impl(img, Some(mask))
}

fn sobel_impl(img: &Grid<f64>, mask: Option<&Mask>) -> Result<Grid<f64>> {
    let (rows, cols) = img.shape();
    if rows < 3 || cols < 3 {
        return Err(Error::Domain(format!("Sobel needs at least 3x3, got {rows}x{cols}")));
    }
    Ok(Grid::from_fn(rows, cols, |r, c| {
        if mask.is_some_and(|m| !*m.get(r, c)) {
            return 0.0;
        }
        let (mut gx, mut gy) = (0.0, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                let v = neighbour(img, mask, r, c, i as isize - 1, j as isize - 1);
                gx += SOBEL_X[i][j] * v;
                gy += SOBEL_Y[i][j] * v;
            }
        }
        gx.hypot(gy)
    }))
}

fn gaussian_window() -> [[f64; SSIM_WINDOW]; SSIM_WINDOW] {
    let half = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-(i as f64 - half).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let total: f64 = g.iter().sum::<f64>().powi(2);
    let mut w = [[0.0; SSIM_WINDOW]; SSIM_WINDOW];
    for i in 0..SSIM_WINDOW {
        for j in 0..SSIM_WINDOW {
            w[i][j] = g[i] * g[j] / total;
        }
    }
    w
}

/// Mean local SSIM over valid window centers. `data_range` is the dynamic
/// range the stability constants are relative to (1 for normalized maps).
pub fn ssim(a: &Grid<f64>, b: &Grid<f64>, mask: &Mask, data_range: f64) -> Result<f64> {
    let n = check_pair(a, b, mask)?;
    if !(data_range > 0.0 && data_range.is_finite()) {
        return Err(Error::Domain(format!("SSIM data range must be positive, got {data_range}")));
    }
    let c1 = (SSIM_K1 * data_range).powi(2);
    let c2 = (SSIM_K2 * data_range).powi(2);
    let w = gaussian_window();
    let half = (SSIM_WINDOW / 2) as isize;
    let (rows, cols) = a.shape();
    let mut total = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            if !*mask.get(r, c) {
                continue;
            }
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..SSIM_WINDOW {
                for j in 0..SSIM_WINDOW {
                    let (di, dj) = (i as isize - half, j as isize - half);
                    let va = neighbour(a, Some(mask), r, c, di, dj);
                    let vb = neighbour(b, Some(mask), r, c, di, dj);
                    let wt = w[i][j];
                    ma += wt * va;
                    mb += wt * vb;
                    saa += wt * va * va;
                    sbb += wt * vb * vb;
                    sab += wt * va * vb;
                }
            }
            let va = saa - ma * ma;
            let vb = sbb - mb * mb;
            let cov = sab - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
    }
    Ok(total / n as f64)
}

/// Weights of the gradient and SSIM terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda1: 0.1,
            lambda2: 0.01,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0 && self.lambda1.is_finite() && self.lambda2.is_finite()) {
            return Err(Error::Domain(format!(
                "loss weights must be >= 0, got ({}, {})",
                self.lambda1, self.lambda2
            )));
        }
        Ok(())
    }
}

/// Masked L1 + `λ₁`·masked L1 of Sobel magnitudes + `λ₂`·(1 − SSIM), on
/// maps with unit dynamic range.
pub fn loss(x_hat: &Grid<f64>, x: &Grid<f64>, mask: &Mask, w: &LossWeights) -> Result<f64> {
    loss_with_range(x_hat, x, mask, w, 1.0)
}

pub fn loss_with_range(x_hat: &Grid<f64>, x: &Grid<f64>, mask: &Mask, w: &LossWeights, data_range: f64) -> Result<f64> {
    w.validate()?;
    let fidelity = mae(x_hat, x, mask)?;
    let mut total = fidelity;
    if w.lambda1 > 0.0 {
        let ga = sobel_magnitude_masked(x_hat, mask)?;
        let gb = sobel_magnitude_masked(x, mask)?;
        total += w.lambda1 * mae(&ga, &gb, mask)?;
    }
    if w.lambda2 > 0.0 {
        total += w.lambda2 * (1.0 - ssim(x_hat, x, mask, data_range)?);
    }
    Ok(total)
}

/// Evaluation summary of one estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub mae: f64,
    pub max_abs_error: f64,
    pub valid_pixels: usize,
    /// `(threshold °C, fraction of valid pixels with error ≤ threshold)`.
    pub cumulative: Vec<(f64, f64)>,
    /// `|x̂ − x|`, zero outside the mask.
    #[serde(skip)]
    pub per_pixel_abs_diff: Grid<f64>,
}

/// Thresholds `0.0, 0.1, …, 5.0` °C.
pub fn default_thresholds() -> Vec<f64> {
    (0..=50).map(|i| i as f64 / 10.0).collect()
}

/// MAE, difference map and cumulative error curve. If the largest
/// threshold leaves pixels uncounted, the maximum error is appended so the
/// curve ends at 1.
pub fn error_report(x_hat: &Grid<f64>, x: &Grid<f64>, mask: &Mask, thresholds: &[f64]) -> Result<ErrorReport> {
    let n = check_pair(x_hat, x, mask)?;
    if thresholds.iter().any(|t| !t.is_finite()) || thresholds.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("thresholds must be finite and sorted ascending".into()));
    }
    let diff = x_hat.zip_map(x, |a, b| (a - b).abs())?.zip_map(mask, |&d, &m| if m { d } else { 0.0 })?;
    let mut errs: Vec<f64> = diff.iter().zip(mask.iter()).filter(|(_, &m)| m).map(|(&d, _)| d).collect();
    if errs.iter().any(|e| !e.is_finite()) {
        return Err(Error::Domain("non-finite error inside the mask".into()));
    }
    errs.sort_by(|a, b| a.total_cmp(b));
    let max_abs_error = *errs.last().expect("mask is nonempty");
    let mae = errs.iter().sum::<f64>() / n as f64;
    let frac = |t: f64| errs.partition_point(|&e| e <= t) as f64 / n as f64;
    let mut cumulative: Vec<(f64, f64)> = thresholds.iter().map(|&t| (t, frac(t))).collect();
    if cumulative.last().is_none_or(|&(_, f)| f < 1.0) {
        cumulative.push((max_abs_error, 1.0));
    }
    Ok(ErrorReport {
        mae,
        max_abs_error,
        valid_pixels: n,
        cumulative,
        per_pixel_abs_diff: diff,
    })
}

/// Sidecar of a difference-map PGM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffMapSidecar {
    pub height: usize,
    pub width: usize,
    pub units: String,
    /// Value of one gray level.
    pub scale: f64,
    /// Pixels whose difference exceeded the 16-bit range.
    pub clipped: usize,
}

/// Write `diff` (°C) as a 16-bit PGM with [`DIFF_MAP_SCALE`] °C per level
/// and a JSON sidecar.
pub fn write_diff_map(path: &Path, diff: &Grid<f64>) -> Result<()> {
    let levels = diff.map(|&d| d / DIFF_MAP_SCALE);
    let clipped = levels.iter().filter(|&&v| v.round() > u16::MAX as f64).count();
    io::write_gray_pgm(path, &levels)?;
    let sidecar = DiffMapSidecar {
        height: diff.rows(),
        width: diff.cols(),
        units: "degC".into(),
        scale: DIFF_MAP_SCALE,
        clipped,
    };
    io::write_json(&io::sidecar_path(path), &sidecar)
}
