//! Temperature estimation from registered bursts.
//!
//! [`naive_estimate`] inverts a per-pixel affine camera model and averages
//! the registered frames. [`fuse`] applies per-pixel kernels to the
//! normalized frames and adds a scalar offset predicted from the frame means
//! and the ambient temperature.

mod kernels;
mod offset;

use rayon::prelude::*;

use crate::burst::{denormalize_value, Burst, Homography};
use crate::calibration::CoefficientTensor;
use crate::error::{Error, Result};
use crate::grid::{Grid, Mask, TemperatureMap};

pub use kernels::{apply_kernels, kernel_provider, KernelKind, KernelStack, KERNEL_MAGIC};
pub use offset::{fit_offset, offset_eval, offset_features, OffsetFit, OffsetModel, OffsetSample, DEFAULT_NU};

/// Per-pixel affine inverse of the camera: `X = G·I + D`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainOffsetMaps {
    /// °C per gray level.
    pub gain: Grid<f64>,
    /// °C.
    pub offset: Grid<f64>,
}

impl GainOffsetMaps {
    pub fn new(gain: Grid<f64>, offset: Grid<f64>) -> Result<Self> {
        gain.ensure_same_shape(&offset)?;
        if !gain.is_finite() || !offset.is_finite() {
            return Err(Error::Domain("gain/offset maps must be finite".into()));
        }
        if gain.iter().any(|&g| g == 0.0) {
            return Err(Error::Domain("gain map must be nonzero everywhere".into()));
        }
        Ok(Self { gain, offset })
    }

    /// Inverse of the scalar camera `I = g·X + d`.
    pub fn from_scalar(rows: usize, cols: usize, g: f64, d: f64) -> Result<Self> {
        if g == 0.0 {
            return Err(Error::Domain("camera gain must be nonzero".into()));
        }
        Self::new(Grid::filled(rows, cols, 1.0 / g), Grid::filled(rows, cols, -d / g))
    }

    /// Tangent inverse of the calibrated camera at `t_ref` (°C) and ambient
    /// `t_amb`.
    pub fn linearized(c: &CoefficientTensor, t_amb: f64, t_ref: f64) -> Result<Self> {
        let (rows, cols) = c.shape();
        let mut gain = Grid::zeros(rows, cols);
        let mut offset = Grid::zeros(rows, cols);
        for r in 0..rows {
            for col in 0..cols {
                let g = c.gain_at(r, col, t_amb);
                let d = c.offset_at(r, col, t_amb);
                let slope = 4.0 * g * t_ref.powi(3);
                if slope == 0.0 || !slope.is_finite() {
                    return Err(Error::Domain(format!(
                        "camera response is flat at pixel ({r}, {col}) for t_ref = {t_ref}"
                    )));
                }
                let i0 = g * t_ref.powi(4) + d;
                *gain.get_mut(r, col) = 1.0 / slope;
                *offset.get_mut(r, col) = t_ref - i0 / slope;
            }
        }
        Self::new(gain, offset)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.gain.shape()
    }
}

/// Average of the per-frame affine corrections. `G` and `D` are sampled at
/// each frame's pre-registration coordinates of the pivot pixel. Pixels with
/// no valid frame are NaN and false in the returned mask.
pub fn naive_estimate(burst: &Burst, gd: &GainOffsetMaps) -> Result<(TemperatureMap, Mask)> {
    burst.validate()?;
    if gd.shape() != burst.shape() {
        return Err(Error::shape(burst.shape(), gd.shape()));
    }
    let (rows, cols) = burst.shape();
    let gray = burst.gray_frames();
    let back: Vec<Homography> = burst
        .perturbed_inverse_homographies
        .iter()
        .map(|h| h.inverse())
        .collect::<Result<_>>()?;
    let values: Vec<(f64, bool)> = (0..rows * cols)
        .into_par_iter()
        .map(|idx| {
            let (r, c) = (idx / cols, idx % cols);
            let mut acc = 0.0;
            let mut count = 0usize;
            for n in 0..burst.len() {
                if !*burst.masks[n].get(r, c) {
                    continue;
                }
                let Some((x, y)) = back[n].apply(c as f64, r as f64) else {
                    continue;
                };
                let (Some(g), Some(d)) = (gd.gain.sample_bilinear(x, y), gd.offset.sample_bilinear(x, y)) else {
                    continue;
                };
                acc += g * gray[n].get(r, c) + d;
                count += 1;
            }
            if count == 0 {
                (f64::NAN, false)
            } else {
                (acc / count as f64, true)
            }
        })
        .collect();
    let est = Grid::from_vec(rows, cols, values.iter().map(|v| v.0).collect())?;
    let mask = Grid::from_vec(rows, cols, values.iter().map(|v| v.1).collect())?;
    Ok((est, mask))
}

/// Kernel gain term plus predicted offset, converted to °C with the burst's
/// temperature bounds.
pub fn fuse(burst: &Burst, ks: &KernelStack, om: &OffsetModel) -> Result<TemperatureMap> {
    burst.validate()?;
    let gain = apply_kernels(&burst.frames, ks)?;
    let offset = offset_eval(&burst.frame_means(), burst.t_amb, om)?;
    let [lo, hi] = burst.normalization.temperature;
    Ok(gain.map(|&v| denormalize_value(v + offset, lo, hi)))
}

/// Offset target for one training burst: mean normalized truth minus the
/// mean kernel output, over `mask`.
pub fn offset_target(burst: &Burst, ks: &KernelStack, truth: &TemperatureMap, mask: &Mask) -> Result<f64> {
    let gain = apply_kernels(&burst.frames, ks)?;
    let [lo, hi] = burst.normalization.temperature;
    let truth_n = truth.map(|&v| (v - lo) / (hi - lo));
    let t = truth_n.masked_mean(mask).ok_or(Error::EmptyMask)?;
    let g = gain.masked_mean(mask).ok_or(Error::EmptyMask)?;
    Ok(t - g)
}

/// Integer residual translation of each registered frame: frame `n` shows
/// the pivot scene displaced by the returned `(dx, dy)`.
pub fn residual_shifts(burst: &Burst) -> Result<Vec<(i64, i64)>> {
    burst
        .perturbed_inverse_homographies
        .iter()
        .zip(&burst.true_homographies)
        .map(|(reg, truth)| {
            // registered(u) = X((R∘S)⁻¹ u)
            let m = reg.compose(truth)?.inverse()?;
            Ok((m.entry(0, 2).round() as i64, m.entry(1, 2).round() as i64))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::burst::{BurstSpec, Normalization};
    use crate::calibration::RadialModel;

    const NORM: Normalization = Normalization {
        temperature: [0.0, 70.0],
        gray: [0.0, 16383.0],
    };

    fn affine_burst(x: &TemperatureMap, g: f64, d: f64, n: usize) -> Burst {
        let [lo, hi] = NORM.gray;
        let frame = x.map(|&t| (g * t + d - lo) / (hi - lo));
        Burst::stationary(vec![frame; n], 20.0, NORM).unwrap()
    }

    #[test]
    fn naive_inverts_scalar_camera() {
        let x = Grid::from_fn(12, 10, |r, c| 5.0 + 3.0 * r as f64 + 0.7 * c as f64);
        let (g, d) = (41.5, 5230.0);
        let gd = GainOffsetMaps::from_scalar(12, 10, g, d).unwrap();
        for n in [1, 4] {
            let (est, mask) = naive_estimate(&affine_burst(&x, g, d, n), &gd).unwrap();
            assert!(mask.as_slice().iter().all(|&m| m));
            for (a, b) in est.iter().zip(x.iter()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn naive_flags_pixels_without_frames() {
        let x = Grid::filled(4, 4, 30.0);
        let mut b = affine_burst(&x, 40.0, 5000.0, 2);
        for m in &mut b.masks {
            *m.get_mut(1, 2) = false;
        }
        let gd = GainOffsetMaps::from_scalar(4, 4, 40.0, 5000.0).unwrap();
        let (est, mask) = naive_estimate(&b, &gd).unwrap();
        assert!(!*mask.get(1, 2) && est.get(1, 2).is_nan());
        assert_eq!(mask.count_true(), 15);
    }

    #[test]
    fn misregistration_error_concentrates_at_edge() {
        let (rows, cols) = (20, 30);
        let step = |c: f64| if c < 15.0 { 20.0 } else { 40.0 };
        let (g, d) = (40.0, 5000.0);
        let [lo, hi] = NORM.gray;
        let pivot = Grid::from_fn(rows, cols, |_, c| (g * step(c as f64) + d - lo) / (hi - lo));
        let shifted = Grid::from_fn(rows, cols, |_, c| (g * step(c as f64 + 2.0) + d - lo) / (hi - lo));
        let b = Burst::stationary(vec![pivot, shifted], 20.0, NORM).unwrap();
        let gd = GainOffsetMaps::from_scalar(rows, cols, g, d).unwrap();
        let (est, _) = naive_estimate(&b, &gd).unwrap();
        let err = |c: usize| (est.get(10, c) - step(c as f64)).abs();
        let edge = (13..15).map(err).fold(0.0, f64::max);
        let interior = (0..10).chain(18..30).map(err).fold(0.0, f64::max);
        assert!(edge > 5.0 && interior < 1e-9, "edge {edge}, interior {interior}");
    }

    #[test]
    fn linearized_matches_tangent() {
        let c = RadialModel::reference_camera().reconstruct(8, 8).unwrap();
        let gd = GainOffsetMaps::linearized(&c, 20.0, 30.0).unwrap();
        let frame = crate::calibration::synthesize_frame(&Grid::filled(8, 8, 30.0), 20.0, &c).unwrap();
        for r in 0..8 {
            for col in 0..8 {
                let x = gd.gain.get(r, col) * frame.get(r, col) + gd.offset.get(r, col);
                assert!((x - 30.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn fuse_special_cases() {
        let x = Grid::from_fn(6, 6, |r, c| 10.0 + r as f64 + c as f64);
        let b = affine_burst(&x, 40.0, 5000.0, 3);
        let zero = KernelStack::zeros(3, 6, 6, 3).unwrap();
        let om = OffsetModel::constant(0.25);
        let out = fuse(&b, &zero, &om).unwrap();
        assert!(out.iter().all(|&v| (v - 0.25 * 70.0).abs() < 1e-12));

        let single = Burst::stationary(vec![b.frames[0].clone()], 20.0, NORM).unwrap();
        let id = kernel_provider(&KernelKind::Identity, 1, (6, 6), 1).unwrap();
        let out = fuse(&single, &id, &om).unwrap();
        for (o, f) in out.iter().zip(single.frames[0].iter()) {
            assert!((o - (f + 0.25) * 70.0).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_shifts_follow_registration_error() {
        let spec = BurstSpec::stationary(3);
        let c = RadialModel::reference_camera().reconstruct(10, 10).unwrap();
        let mut b = crate::burst::make_burst(&Grid::filled(10, 10, 25.0), 20.0, &c, &spec).unwrap();
        b.perturbed_inverse_homographies[2] = Homography::translation(-2.0, 1.0);
        assert_eq!(residual_shifts(&b).unwrap(), vec![(0, 0), (0, 0), (2, -1)]);
    }
}
