use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 42;

/// How camera positions are arranged around the pivot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathMode {
    /// Monotone progression along one direction, pivot in the middle.
    Walk,
    /// Independent directions per frame around a fixed point.
    Hover,
}

/// Registration error injected into the inverse homographies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Perturbation {
    /// Translation noise is uniform in `[-max, max]` pixels per axis.
    pub max_translation_px: f64,
    /// Variance of the Gaussian noise added to `h₃₁` and `h₃₂`.
    pub perspective_variance: f64,
}

impl Perturbation {
    pub const NONE: Perturbation = Perturbation {
        max_translation_px: 0.0,
        perspective_variance: 0.0,
    };

    pub fn is_none(&self) -> bool {
        self.max_translation_px == 0.0 && self.perspective_variance == 0.0
    }
}

impl Default for Perturbation {
    fn default() -> Self {
        Self {
            max_translation_px: 2.0,
            perspective_variance: 5e-5,
        }
    }
}

/// Everything needed to turn a temperature map into a burst. Every field is
/// optional in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BurstSpec {
    pub n_frames: usize,
    pub mode: PathMode,
    /// Allowed overlap of each frame with the pivot, as area fractions.
    pub overlap_range: [f64; 2],
    pub perturbation: Perturbation,
    /// Variance of the additive Gaussian noise, gray levels².
    pub noise_sigma2: f64,
    /// Range of the column fixed-pattern multipliers.
    pub fpn_range: [f64; 2],
    pub seed: u64,
    /// Temperature bounds (°C) mapped to `[0, 1]`.
    pub temperature_range: [f64; 2],
    /// Gray-level bounds mapped to `[0, 1]`.
    pub gray_range: [f64; 2],
    /// Random flips/rotations of the scene before path sampling.
    pub augment: bool,
}

impl Default for BurstSpec {
    fn default() -> Self {
        Self {
            n_frames: 7,
            mode: PathMode::Walk,
            overlap_range: [0.60, 0.80],
            perturbation: Perturbation::default(),
            noise_sigma2: 5.0,
            fpn_range: [0.9, 1.01],
            seed: DEFAULT_SEED,
            temperature_range: [0.0, 70.0],
            gray_range: [0.0, 16383.0],
            augment: false,
        }
    }
}

impl BurstSpec {
    /// A spec with no randomness beyond path sampling: no perturbation, FPN
    /// or noise.
    pub fn clean(n_frames: usize) -> Self {
        Self {
            n_frames,
            perturbation: Perturbation::NONE,
            noise_sigma2: 0.0,
            fpn_range: [1.0, 1.0],
            ..Self::default()
        }
    }

    /// Identity-registered frames: every overlap is exactly 1.
    pub fn stationary(n_frames: usize) -> Self {
        Self {
            overlap_range: [1.0, 1.0],
            ..Self::clean(n_frames)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_frames < 1 {
            return Err(Error::Config("n_frames must be >= 1".into()));
        }
        let [lo, hi] = self.overlap_range;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(Error::Config(format!(
                "overlap_range must satisfy 0 < min <= max <= 1, got [{lo}, {hi}]"
            )));
        }
        let p = self.perturbation;
        if !(p.max_translation_px >= 0.0 && p.max_translation_px.is_finite()) {
            return Err(Error::Config("perturbation.max_translation_px must be >= 0".into()));
        }
        if !(p.perspective_variance >= 0.0 && p.perspective_variance.is_finite()) {
            return Err(Error::Config("perturbation.perspective_variance must be >= 0".into()));
        }
        if !(self.noise_sigma2 >= 0.0 && self.noise_sigma2.is_finite()) {
            return Err(Error::Config("noise_sigma2 must be >= 0".into()));
        }
        let [u0, u1] = self.fpn_range;
        if !(u0.is_finite() && u1.is_finite() && u0 <= u1) {
            return Err(Error::Config(format!("fpn_range must satisfy min <= max, got [{u0}, {u1}]")));
        }
        for (name, [a, b]) in [("temperature_range", self.temperature_range), ("gray_range", self.gray_range)] {
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(Error::Config(format!("{name} must satisfy min < max, got [{a}, {b}]")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_fields_are_optional() {
        let s: BurstSpec = serde_json::from_str("{}").unwrap();
        assert_eq!(s, BurstSpec::default());
        let s: BurstSpec = serde_json::from_str(r#"{"n_frames": 3, "mode": "hover", "perturbation": {"max_translation_px": 1}}"#).unwrap();
        assert_eq!(s.n_frames, 3);
        assert_eq!(s.mode, PathMode::Hover);
        assert_eq!(s.perturbation.max_translation_px, 1.0);
        assert_eq!(s.perturbation.perspective_variance, 5e-5);
        assert!(serde_json::from_str::<BurstSpec>(r#"{"n_frame": 3}"#).is_err());
    }

    #[test]
    fn validation() {
        assert!(BurstSpec::default().validate().is_ok());
        let bad = [
            BurstSpec { n_frames: 0, ..Default::default() },
            BurstSpec { overlap_range: [0.8, 0.6], ..Default::default() },
            BurstSpec { overlap_range: [0.0, 0.6], ..Default::default() },
            BurstSpec { overlap_range: [0.6, 1.2], ..Default::default() },
            BurstSpec { noise_sigma2: -1.0, ..Default::default() },
            BurstSpec { fpn_range: [1.1, 1.0], ..Default::default() },
            BurstSpec { gray_range: [5.0, 5.0], ..Default::default() },
        ];
        for s in bad {
            assert!(matches!(s.validate(), Err(Error::Config(_))), "{s:?}");
        }
    }
}
