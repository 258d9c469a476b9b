//! Multi-frame burst simulation.
//!
//! A burst is built from a temperature map by sampling camera positions
//! around a pivot frame, rendering each view through the calibrated camera
//! model, applying one shared fixed-pattern multiplier and independent
//! temporal noise per frame, and registering every frame back onto the pivot
//! with slightly wrong (perturbed) inverse homographies.

mod homography;
mod noise;
mod overlap;
mod path;
mod spec;
mod storage;
mod warp;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{synthesize_frame, CoefficientTensor};
use crate::error::{Error, Result};
use crate::grid::{GrayFrame, Grid, Mask, TemperatureMap};

pub use homography::Homography;
pub use noise::{add_noise, generate_fpn, seeded_rng, stream};
pub use overlap::overlap;
pub use path::{perturb, pivot_index, sample_path};
pub use spec::{BurstSpec, PathMode, Perturbation, DEFAULT_SEED};
pub use storage::{load_burst, save_burst, BurstMetadata, BURST_METADATA_FILE};
pub use warp::{warp, warp_masked};

/// `(x − x_min)/(x_max − x_min)`.
pub fn normalize_temperature(x: &TemperatureMap, x_min: f64, x_max: f64) -> Result<TemperatureMap> {
    check_range(x_min, x_max)?;
    Ok(x.map(|&v| normalize_value(v, x_min, x_max)))
}

pub fn denormalize_temperature(x: &TemperatureMap, x_min: f64, x_max: f64) -> Result<TemperatureMap> {
    check_range(x_min, x_max)?;
    Ok(x.map(|&v| denormalize_value(v, x_min, x_max)))
}

/// `(I − I_min)/(I_max − I_min)`.
pub fn normalize_frame(frame: &GrayFrame, i_min: f64, i_max: f64) -> Result<GrayFrame> {
    check_range(i_min, i_max)?;
    Ok(frame.map(|&v| normalize_value(v, i_min, i_max)))
}

pub fn denormalize_frame(frame: &GrayFrame, i_min: f64, i_max: f64) -> Result<GrayFrame> {
    check_range(i_min, i_max)?;
    Ok(frame.map(|&v| denormalize_value(v, i_min, i_max)))
}

#[inline]
pub fn normalize_value(v: f64, lo: f64, hi: f64) -> f64 {
    (v - lo) / (hi - lo)
}

#[inline]
pub fn denormalize_value(v: f64, lo: f64, hi: f64) -> f64 {
    v * (hi - lo) + lo
}

fn check_range(lo: f64, hi: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::Domain(format!("normalization needs max > min, got [{lo}, {hi}]")));
    }
    Ok(())
}

/// Bounds used to map temperatures and gray levels to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub temperature: [f64; 2],
    pub gray: [f64; 2],
}

impl Normalization {
    pub fn from_spec(spec: &BurstSpec) -> Self {
        Self {
            temperature: spec.temperature_range,
            gray: spec.gray_range,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_range(self.temperature[0], self.temperature[1])?;
        check_range(self.gray[0], self.gray[1])
    }
}

/// Scene pre-transform applied before path sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Augmentation {
    pub flip_horizontal: bool,
    pub flip_vertical: bool,
    /// Quarter turns clockwise; odd values only on square scenes.
    pub quarter_turns: u8,
}

impl Augmentation {
    fn sample(rng: &mut impl Rng, square: bool) -> Self {
        let flip_horizontal = rng.random_bool(0.5);
        let flip_vertical = rng.random_bool(0.5);
        let quarter_turns = if square { rng.random_range(0..4) } else { 2 * rng.random_range(0..2) };
        Self {
            flip_horizontal,
            flip_vertical,
            quarter_turns,
        }
    }

    pub fn is_identity(&self) -> bool {
        !self.flip_horizontal && !self.flip_vertical && self.quarter_turns.is_multiple_of(4)
    }

    /// Apply to a map (used for the scene and, by callers, its ground truth).
    pub fn apply<T: Clone>(&self, g: &Grid<T>) -> Grid<T> {
        let (rows, cols) = g.shape();
        let mut out = g.clone();
        if self.flip_horizontal {
            out = Grid::from_fn(rows, cols, |r, c| out.get(r, cols - 1 - c).clone());
        }
        if self.flip_vertical {
            out = Grid::from_fn(rows, cols, |r, c| out.get(rows - 1 - r, c).clone());
        }
        for _ in 0..self.quarter_turns % 4 {
            let (r0, c0) = out.shape();
            out = Grid::from_fn(c0, r0, |r, c| out.get(r0 - 1 - c, r).clone());
        }
        out
    }
}

/// Registered frames of one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Burst {
    /// Registered frames, normalized gray levels. Invalid pixels hold 0.
    pub frames: Vec<GrayFrame>,
    pub masks: Vec<Mask>,
    /// Pivot → frame, as used to render each view.
    pub true_homographies: Vec<Homography>,
    /// Frame → pivot registration actually applied (true inverse plus
    /// perturbation).
    pub perturbed_inverse_homographies: Vec<Homography>,
    /// Overlap of each frame with the pivot under the true homography.
    pub overlaps: Vec<f64>,
    pub pivot: usize,
    pub t_amb: f64,
    pub normalization: Normalization,
    pub seed: u64,
    pub augmentation: Augmentation,
}

impl Burst {
    /// Assemble a burst from already registered, normalized frames.
    pub fn from_frames(
        frames: Vec<GrayFrame>,
        masks: Vec<Mask>,
        registration: Vec<Homography>,
        pivot: usize,
        t_amb: f64,
        normalization: Normalization,
    ) -> Result<Self> {
        let true_homographies = registration.iter().map(|h| h.inverse()).collect::<Result<Vec<_>>>()?;
        let dims = frames.first().map(|f| f.shape()).unwrap_or((0, 0));
        let overlaps = registration.iter().map(|h| overlap(h, dims)).collect();
        let b = Self {
            frames,
            masks,
            true_homographies,
            perturbed_inverse_homographies: registration,
            overlaps,
            pivot,
            t_amb,
            normalization,
            seed: DEFAULT_SEED,
            augmentation: Augmentation::default(),
        };
        b.validate()?;
        Ok(b)
    }

    /// Identity-registered burst with all-true masks.
    pub fn stationary(frames: Vec<GrayFrame>, t_amb: f64, normalization: Normalization) -> Result<Self> {
        let n = frames.len();
        let masks = frames.iter().map(|f| Mask::all_true(f.rows(), f.cols())).collect();
        Self::from_frames(frames, masks, vec![Homography::identity(); n], pivot_index(n), t_amb, normalization)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.frames.len();
        if n == 0 {
            return Err(Error::Domain("burst has no frames".into()));
        }
        if self.masks.len() != n
            || self.true_homographies.len() != n
            || self.perturbed_inverse_homographies.len() != n
            || self.overlaps.len() != n
        {
            return Err(Error::Domain("burst frame, mask and homography counts differ".into()));
        }
        if self.pivot >= n {
            return Err(Error::Domain(format!("pivot {} out of range for {n} frames", self.pivot)));
        }
        for (f, m) in self.frames.iter().zip(&self.masks) {
            f.ensure_same_shape(&self.frames[0])?;
            m.ensure_same_shape(&self.frames[0])?;
        }
        if !self.t_amb.is_finite() {
            return Err(Error::Domain("ambient temperature must be finite".into()));
        }
        self.normalization.validate()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.frames[0].shape()
    }

    /// Frames converted back to gray levels.
    pub fn gray_frames(&self) -> Vec<GrayFrame> {
        let [lo, hi] = self.normalization.gray;
        self.frames.iter().map(|f| f.map(|&v| denormalize_value(v, lo, hi))).collect()
    }

    /// Pixels valid in at least one frame.
    pub fn union_mask(&self) -> Mask {
        let (rows, cols) = self.shape();
        Grid::from_fn(rows, cols, |r, c| self.masks.iter().any(|m| *m.get(r, c)))
    }

    /// Pixels valid in every frame.
    pub fn intersection_mask(&self) -> Mask {
        let (rows, cols) = self.shape();
        Grid::from_fn(rows, cols, |r, c| self.masks.iter().all(|m| *m.get(r, c)))
    }

    /// Spatial mean of each frame over its valid pixels (0 if none).
    pub fn frame_means(&self) -> Vec<f64> {
        self.frames
            .iter()
            .zip(&self.masks)
            .map(|(f, m)| f.masked_mean(m).unwrap_or(0.0))
            .collect()
    }

    /// Map from pivot pixel `(col, row)` to the pre-warp coordinates of
    /// frame `n`.
    pub fn source_coordinates(&self, n: usize, x: f64, y: f64) -> Option<(f64, f64)> {
        self.perturbed_inverse_homographies[n].inverse().ok()?.apply(x, y)
    }
}

/// Render, corrupt and register a burst of `x` (°C) at ambient `t_amb`.
pub fn make_burst(x: &TemperatureMap, t_amb: f64, c: &CoefficientTensor, spec: &BurstSpec) -> Result<Burst> {
    spec.validate()?;
    if x.shape() != c.shape() {
        return Err(Error::shape(c.shape(), x.shape()));
    }
    if !t_amb.is_finite() {
        return Err(Error::Domain("ambient temperature must be finite".into()));
    }
    let augmentation = if spec.augment {
        let mut rng = seeded_rng(spec.seed, noise::stream::AUGMENT);
        Augmentation::sample(&mut rng, x.rows() == x.cols())
    } else {
        Augmentation::default()
    };
    let scene = augmentation.apply(x);
    if scene.shape() != c.shape() {
        return Err(Error::shape(c.shape(), scene.shape()));
    }
    let dims = scene.shape();
    let n = spec.n_frames;
    let pivot = pivot_index(n);
    let path = sample_path(spec, dims)?;

    let mut perturb_rng = seeded_rng(spec.seed, noise::stream::PERTURB);
    let registration = path
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let inv = h.inverse()?;
            if i == pivot {
                Ok(inv)
            } else {
                perturb(&inv, &spec.perturbation, &mut perturb_rng)
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let fpn = noise::generate_fpn(dims.0, dims.1, spec.fpn_range[0], spec.fpn_range[1], spec.seed)?;
    let [g_lo, g_hi] = spec.gray_range;

    let rendered: Vec<(GrayFrame, Mask)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (view, view_mask) = warp(&scene, &path[i])?;
            let clean = synthesize_frame(&view, t_amb, c)?;
            let patterned = clean.zip_map(&fpn, |v, u| v * u)?;
            let mut rng = seeded_rng(spec.seed, noise::stream::NOISE_BASE + i as u64);
            let noisy = noise::add_noise_with(&patterned, spec.noise_sigma2, &mut rng)?;
            let (registered, mask) = warp_masked(&noisy, Some(&view_mask), &registration[i])?;
            let normalized = registered.zip_map(&mask, |&v, &m| if m { normalize_value(v, g_lo, g_hi) } else { 0.0 })?;
            Ok((normalized, mask))
        })
        .collect::<Result<Vec<_>>>()?;

    let overlaps = path
        .iter()
        .map(|h| Ok(overlap(&h.inverse()?, dims)))
        .collect::<Result<Vec<_>>>()?;
    let (frames, masks) = rendered.into_iter().unzip();
    let burst = Burst {
        frames,
        masks,
        true_homographies: path,
        perturbed_inverse_homographies: registration,
        overlaps,
        pivot,
        t_amb,
        normalization: Normalization::from_spec(spec),
        seed: spec.seed,
        augmentation,
    };
    burst.validate()?;
    Ok(burst)
}

/// Ground coverage of a nadir camera moving along the sensor's long axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightGeometry {
    pub gsd_m_per_px: f64,
    pub px_per_frame: f64,
    pub frames_per_object: f64,
}

pub fn flight_geometry(
    height_m: f64,
    focal_mm: f64,
    sensor_mm: f64,
    sensor_px: f64,
    speed_mps: f64,
    fps: f64,
) -> Result<FlightGeometry> {
    for (name, v) in [
        ("height", height_m),
        ("focal length", focal_mm),
        ("sensor size", sensor_mm),
        ("sensor pixels", sensor_px),
        ("speed", speed_mps),
        ("frame rate", fps),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Domain(format!("{name} must be positive, got {v}")));
        }
    }
    let gsd = height_m * sensor_mm / (focal_mm * sensor_px);
    let px_per_frame = (speed_mps / fps) / gsd;
    Ok(FlightGeometry {
        gsd_m_per_px: gsd,
        px_per_frame,
        frames_per_object: sensor_px / px_per_frame,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::RadialModel;

    fn scene(rows: usize, cols: usize) -> TemperatureMap {
        Grid::from_fn(rows, cols, |r, c| 20.0 + 10.0 * ((r as f64 / 7.0).sin() + (c as f64 / 5.0).cos()))
    }

    #[test]
    fn normalization_roundtrip() {
        let x = scene(5, 6);
        let n = normalize_temperature(&x, 0.0, 70.0).unwrap();
        let back = denormalize_temperature(&n, 0.0, 70.0).unwrap();
        for (a, b) in x.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(normalize_value(-3.0, -3.0, 9.0), 0.0);
        assert_eq!(normalize_value(9.0, -3.0, 9.0), 1.0);
        let f = Grid::filled(2, 2, 16383.0);
        assert!(normalize_frame(&f, 0.0, 16383.0).unwrap().iter().all(|&v| v == 1.0));
        assert!(normalize_frame(&f, 1.0, 1.0).is_err());
    }

    #[test]
    fn degenerate_pipeline_equals_synthesis() {
        let c = RadialModel::reference_camera().reconstruct(24, 20).unwrap();
        let x = scene(24, 20);
        let spec = BurstSpec::clean(1);
        let b = make_burst(&x, 18.0, &c, &spec).unwrap();
        let expected = synthesize_frame(&x, 18.0, &c).unwrap();
        let got = &b.gray_frames()[0];
        for (a, e) in got.iter().zip(expected.iter()) {
            assert!((a - e).abs() < 1e-9 * e.abs());
        }
        assert_eq!(b.masks[0].count_true(), 24 * 20);
    }

    #[test]
    fn shared_fpn_constant_scene_frames_identical() {
        let c = RadialModel::reference_camera().reconstruct(16, 16).unwrap();
        let x = Grid::filled(16, 16, 31.0);
        let spec = BurstSpec {
            fpn_range: [0.9, 1.01],
            ..BurstSpec::stationary(5)
        };
        let b = make_burst(&x, 22.0, &c, &spec).unwrap();
        for f in &b.frames[1..] {
            assert_eq!(f, &b.frames[0]);
        }
    }

    #[test]
    fn fpn_extracted_from_constant_scene_is_column_constant() {
        // uniform camera so the only spatial structure is the FPN
        let c = crate::calibration::CoefficientTensor::uniform(12, 18, [3e-4, 0.0, 0.0, 0.0, 6000.0, 0.0, 0.0, 0.0]).unwrap();
        let x = Grid::filled(12, 18, 25.0);
        let with = make_burst(&x, 20.0, &c, &BurstSpec { fpn_range: [0.9, 1.01], ..BurstSpec::stationary(2) }).unwrap();
        let without = make_burst(&x, 20.0, &c, &BurstSpec::stationary(2)).unwrap();
        let a = &with.gray_frames()[1];
        let b = &without.gray_frames()[1];
        let ratio = a.zip_map(b, |p, q| p / q).unwrap();
        for col in 0..18 {
            for r in 1..12 {
                assert!((ratio.get(r, col) - ratio.get(0, col)).abs() < 1e-12);
            }
            assert!((0.9 - 1e-12..=1.01 + 1e-12).contains(ratio.get(0, col)));
        }
    }

    #[test]
    fn same_seed_bit_identical() {
        let c = RadialModel::reference_camera().reconstruct(32, 32).unwrap();
        let x = scene(32, 32);
        let spec = BurstSpec { n_frames: 4, seed: 9, augment: true, ..Default::default() };
        let a = make_burst(&x, 15.0, &c, &spec).unwrap();
        let b = make_burst(&x, 15.0, &c, &spec).unwrap();
        assert_eq!(a, b);
        assert!(a.overlaps.iter().enumerate().all(|(i, &o)| i == a.pivot || (0.6 - 1e-9..=0.8 + 1e-9).contains(&o)));
    }

    #[test]
    fn masks_back_project_inside_source() {
        let c = RadialModel::reference_camera().reconstruct(40, 48).unwrap();
        let x = scene(40, 48);
        let b = make_burst(&x, 15.0, &c, &BurstSpec { n_frames: 5, ..Default::default() }).unwrap();
        for n in 0..b.len() {
            let (rows, cols) = b.shape();
            for r in 0..rows {
                for col in 0..cols {
                    if *b.masks[n].get(r, col) {
                        let (sx, sy) = b.source_coordinates(n, col as f64, r as f64).unwrap();
                        assert!(sx >= 0.0 && sx <= (cols - 1) as f64 && sy >= 0.0 && sy <= (rows - 1) as f64);
                    }
                }
            }
            assert!(b.masks[n].count_true() > 0);
        }
    }

    #[test]
    fn augmentation_apply() {
        let g = Grid::from_fn(2, 3, |r, c| r * 3 + c);
        let a = Augmentation { flip_horizontal: true, ..Default::default() };
        assert_eq!(a.apply(&g).as_slice(), &[2, 1, 0, 5, 4, 3]);
        let rot = Augmentation { quarter_turns: 1, ..Default::default() };
        let r = rot.apply(&g);
        assert_eq!(r.shape(), (3, 2));
        assert_eq!(r.as_slice(), &[3, 0, 4, 1, 5, 2]);
        let full = Augmentation { quarter_turns: 4, ..Default::default() };
        assert_eq!(full.apply(&g), g);
    }

    #[test]
    fn flight_geometry_reference() {
        let fg = flight_geometry(50.0, 9.8, 4.4, 256.0, 10.0, 30.0).unwrap();
        assert!((fg.gsd_m_per_px - 0.087).abs() < 1e-3);
        assert!((fg.px_per_frame - 3.80).abs() < 0.02);
        assert!((fg.frames_per_object - 67.0).abs() < 1.0);
        assert!(flight_geometry(0.0, 9.8, 4.4, 256.0, 10.0, 30.0).is_err());
    }
}
