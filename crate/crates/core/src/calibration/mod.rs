//! Per-pixel radiometric calibration.
//!
//! Each pixel follows
//!
//! ```text
//! I(t_obj, t_amb) = Σᵢ gᵢ·t_ambⁱ·t_obj⁴ + Σᵢ dᵢ·t_ambⁱ,   i = 0..3
//! ```
//!
//! with temperatures in °C. Fitting the eight coefficients from blackbody
//! measurements is a least-squares problem whose design matrix is shared by
//! every pixel. The fitted tensor can be regularized onto a radially
//! symmetric model ([`radial`]) and used to synthesize gray-level frames from
//! temperature maps.

pub mod radial;
mod storage;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GrayFrame, Grid, Mask, TemperatureMap};
use crate::lstsq::LeastSquares;

pub use radial::{fit_radial, radial_map, reconstruct_coeffs, RadialModel, DEFAULT_RADIAL_DEGREE};
pub use storage::{
    load_measurements, read_coefficients, write_coefficients, write_measurements, write_measurements_as, FrameFormat, ManifestEntry,
    COEFF_MAGIC,
};

/// Number of per-pixel coefficients: four gain and four offset terms.
pub const N_COEFFS: usize = 8;

/// Internal scale (°C) applied to object temperatures before they enter the
/// design matrix. `t_obj⁴` spans ~10¹⁰ in raw units.
pub const OBJ_SCALE: f64 = 50.0;
/// Internal scale (°C) applied to ambient temperatures.
pub const AMB_SCALE: f64 = 50.0;

/// Design conditioning (after scaling) below which noiseless round trips are
/// expected to recover coefficients to 1e-6 relative.
pub const ROUNDTRIP_CONDITION_LIMIT: f64 = 1e8;

/// `[t⁴, t⁴·a, t⁴·a², t⁴·a³, 1, a, a², a³]` for `t = t_obj`, `a = t_amb`.
pub fn design_row(t_obj: f64, t_amb: f64) -> [f64; N_COEFFS] {
    let t4 = t_obj * t_obj * t_obj * t_obj;
    let a2 = t_amb * t_amb;
    let a3 = a2 * t_amb;
    [t4, t4 * t_amb, t4 * a2, t4 * a3, 1.0, t_amb, a2, a3]
}

/// Scale dividing the `j`-th design column when temperatures are rescaled.
fn column_scale(j: usize) -> f64 {
    let amb_power = (j % 4) as i32;
    let obj = if j < 4 { OBJ_SCALE.powi(4) } else { 1.0 };
    obj * AMB_SCALE.powi(amb_power)
}

/// Eight coefficient planes ordered `[g0, g1, g2, g3, d0, d1, d2, d3]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTensor {
    planes: Vec<Grid<f64>>,
}

impl CoefficientTensor {
    pub fn new(planes: Vec<Grid<f64>>) -> Result<Self> {
        if planes.len() != N_COEFFS {
            return Err(Error::Domain(format!(
                "coefficient tensor needs {N_COEFFS} planes, got {}",
                planes.len()
            )));
        }
        let shape = planes[0].shape();
        for p in &planes {
            p.ensure_same_shape(&planes[0])?;
            if !p.is_finite() {
                return Err(Error::Domain("coefficient tensor has non-finite values".into()));
            }
        }
        if shape.0 == 0 || shape.1 == 0 {
            return Err(Error::Domain("coefficient tensor is empty".into()));
        }
        Ok(Self { planes })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            planes: vec![Grid::zeros(rows, cols); N_COEFFS],
        }
    }

    /// Spatially uniform tensor with the given per-pixel coefficients.
    pub fn uniform(rows: usize, cols: usize, coeffs: [f64; N_COEFFS]) -> Result<Self> {
        Self::new(coeffs.iter().map(|&v| Grid::filled(rows, cols, v)).collect())
    }

    pub fn shape(&self) -> (usize, usize) {
        self.planes[0].shape()
    }

    pub fn planes(&self) -> &[Grid<f64>] {
        &self.planes
    }

    pub fn plane(&self, i: usize) -> &Grid<f64> {
        &self.planes[i]
    }

    pub fn pixel(&self, r: usize, c: usize) -> [f64; N_COEFFS] {
        std::array::from_fn(|i| *self.planes[i].get(r, c))
    }

    /// Gain `g(t_amb) = Σ gᵢ t_ambⁱ` of one pixel (gray levels per °C⁴).
    pub fn gain_at(&self, r: usize, c: usize, t_amb: f64) -> f64 {
        let p = self.pixel(r, c);
        horner(&p[..4], t_amb)
    }

    /// Offset `d(t_amb) = Σ dᵢ t_ambⁱ` of one pixel (gray levels).
    pub fn offset_at(&self, r: usize, c: usize, t_amb: f64) -> f64 {
        let p = self.pixel(r, c);
        horner(&p[4..], t_amb)
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// One blackbody acquisition.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub t_obj: f64,
    pub t_amb: f64,
    pub frame: GrayFrame,
}

/// Blackbody acquisitions sharing one frame shape.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    samples: Vec<Measurement>,
}

impl MeasurementSet {
    pub fn new(samples: Vec<Measurement>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::Calibration("measurement set is empty".into()))?;
        for s in &samples {
            s.frame.ensure_same_shape(&first.frame)?;
            if !(s.t_obj.is_finite() && s.t_amb.is_finite()) {
                return Err(Error::Calibration("non-finite temperature in measurement set".into()));
            }
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[Measurement] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.samples[0].frame.shape()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    /// Pixels whose RMS residual (gray levels) exceeds this are excluded.
    pub residual_threshold: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            residual_threshold: 25.0,
        }
    }
}

/// Output of [`fit_per_pixel`].
#[derive(Debug, Clone)]
pub struct CalibrationFit {
    pub coefficients: CoefficientTensor,
    /// RMS residual per pixel, gray levels.
    pub residual_rms: Grid<f64>,
    /// `true` for pixels whose residual exceeded the threshold.
    pub excluded: Mask,
    /// Condition number of the scaled, equilibrated design matrix.
    pub condition: f64,
}

impl CalibrationFit {
    pub fn max_residual(&self) -> f64 {
        self.residual_rms.iter().cloned().fold(0.0, f64::max)
    }

    pub fn mean_residual(&self) -> f64 {
        self.residual_rms.mean()
    }
}

/// Solve every pixel's eight coefficients by least squares with the
/// default [`CalibrationOptions`].
pub fn fit_per_pixel(ms: &MeasurementSet) -> Result<CalibrationFit> {
    fit_per_pixel_with(ms, &CalibrationOptions::default())
}

pub fn fit_per_pixel_with(ms: &MeasurementSet, opts: &CalibrationOptions) -> Result<CalibrationFit> {
    let n = ms.len();
    if n < N_COEFFS {
        return Err(Error::Calibration(format!(
            "need at least {N_COEFFS} samples for a rank-{N_COEFFS} design matrix, got {n}"
        )));
    }
    let mut design = Vec::with_capacity(n * N_COEFFS);
    for s in ms.samples() {
        let row = design_row(s.t_obj / OBJ_SCALE, s.t_amb / AMB_SCALE);
        design.extend_from_slice(&row);
    }
    let ls = LeastSquares::new(n, N_COEFFS, &design).map_err(|e| match e {
        Error::Fit(msg) => Error::Calibration(format!("{msg}; vary t_obj and use at least 4 distinct t_amb")),
        other => other,
    })?;

    let (rows, cols) = ms.shape();
    let per_pixel: Vec<([f64; N_COEFFS], f64)> = (0..rows * cols)
        .into_par_iter()
        .map(|idx| {
            let obs: Vec<f64> = ms.samples().iter().map(|s| s.frame.as_slice()[idx]).collect();
            let y = ls.solve(&obs);
            let res = ls.residual(&y, &obs);
            let rms = (res.iter().map(|r| r * r).sum::<f64>() / n as f64).sqrt();
            let coeffs = std::array::from_fn(|j| y[j] / column_scale(j));
            (coeffs, rms)
        })
        .collect();

    let planes = (0..N_COEFFS)
        .map(|j| Grid::from_vec(rows, cols, per_pixel.iter().map(|(c, _)| c[j]).collect()))
        .collect::<Result<Vec<_>>>()?;
    let residual_rms = Grid::from_vec(rows, cols, per_pixel.iter().map(|(_, r)| *r).collect())?;
    let excluded = residual_rms.map(|&r| !(r <= opts.residual_threshold));
    Ok(CalibrationFit {
        coefficients: CoefficientTensor::new(planes)?,
        residual_rms,
        excluded,
        condition: ls.condition(),
    })
}

/// Noiseless, FPN-free gray-level frame of `x` (°C) at ambient `t_amb`.
pub fn synthesize_frame(x: &TemperatureMap, t_amb: f64, c: &CoefficientTensor) -> Result<GrayFrame> {
    if x.shape() != c.shape() {
        return Err(Error::shape(c.shape(), x.shape()));
    }
    let cols = x.cols();
    let data: Vec<f64> = (0..x.len())
        .into_par_iter()
        .map(|idx| {
            let (r, col) = (idx / cols, idx % cols);
            let row = design_row(x.as_slice()[idx], t_amb);
            let p = c.pixel(r, col);
            row.iter().zip(p.iter()).map(|(a, b)| a * b).sum()
        })
        .collect();
    Grid::from_vec(x.rows(), x.cols(), data)
}
