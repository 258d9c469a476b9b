//! End-to-end experiment helpers shared by the CLI and the tests: kernel
//! selection, offset-fit corpora and frame-count sweeps.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::burst::{make_burst, seeded_rng, stream, Burst, BurstSpec};
use crate::calibration::CoefficientTensor;
use crate::error::{Error, Result};
use crate::fusion::{fit_offset, fuse, kernel_provider, offset_target, residual_shifts, KernelKind, KernelStack, OffsetFit, OffsetModel, OffsetSample};
use crate::grid::{Mask, TemperatureMap};
use crate::metrics::mae;
use crate::scene::{random_scene, SceneKind};

/// Kernel family selected by name: `identity`, `average`, `shifted` or
/// `file:PATH`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum KernelChoice {
    Identity,
    #[default]
    Average,
    /// Shifted deltas undoing each frame's integer registration residual.
    Shifted,
    File(PathBuf),
}

impl FromStr for KernelChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Self::Identity),
            "average" => Ok(Self::Average),
            "shifted" => Ok(Self::Shifted),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(Self::File(PathBuf::from(p))),
                _ => Err(Error::Config(format!(
                    "unknown kernel kind '{s}', expected identity, average, shifted or file:PATH"
                ))),
            },
        }
    }
}

impl fmt::Display for KernelChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => f.write_str("identity"),
            Self::Average => f.write_str("average"),
            Self::Shifted => f.write_str("shifted"),
            Self::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl Serialize for KernelChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for KernelChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Kernel stack of `choice` for `burst`.
pub fn kernels_for(burst: &Burst, choice: &KernelChoice, k: usize) -> Result<KernelStack> {
    let kind = match choice {
        KernelChoice::Identity => KernelKind::Identity,
        KernelChoice::Average => KernelKind::Average,
        KernelChoice::Shifted => KernelKind::ShiftedDelta(residual_shifts(burst)?),
        KernelChoice::File(p) => KernelKind::File(p.clone()),
    };
    kernel_provider(&kind, burst.len(), burst.shape(), k)
}

/// Scenes and bursts drawn for offset fitting or evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSpec {
    pub n_scenes: usize,
    pub scene_kind: SceneKind,
    /// Scene temperatures, °C.
    pub scene_range: [f64; 2],
    /// Ambient temperatures, °C.
    pub t_amb_range: [f64; 2],
    pub burst: BurstSpec,
    pub kernels: KernelChoice,
    pub kernel_size: usize,
    /// Scene `i` uses seed `seed + i` for both the scene and its burst.
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            n_scenes: 200,
            scene_kind: SceneKind::Smooth,
            scene_range: [5.0, 60.0],
            t_amb_range: [-10.0, 50.0],
            burst: BurstSpec::default(),
            kernels: KernelChoice::Average,
            kernel_size: 1,
            seed: crate::burst::DEFAULT_SEED,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        self.burst.validate()?;
        if self.n_scenes == 0 {
            return Err(Error::Config("corpus needs at least one scene".into()));
        }
        for (name, [a, b]) in [("scene_range", self.scene_range), ("t_amb_range", self.t_amb_range)] {
            if !(a.is_finite() && b.is_finite() && a <= b) {
                return Err(Error::Config(format!("{name} must satisfy min <= max, got [{a}, {b}]")));
            }
        }
        if self.kernel_size.is_multiple_of(2) {
            return Err(Error::Config(format!("kernel_size must be odd, got {}", self.kernel_size)));
        }
        Ok(())
    }
}

/// One simulated scene and its burst.
#[derive(Debug, Clone)]
pub struct CorpusItem {
    pub truth: TemperatureMap,
    pub burst: Burst,
}

/// Scene `index` of `corpus` rendered with `n_frames` frames.
pub fn corpus_item(c: &CoefficientTensor, corpus: &CorpusSpec, index: usize, n_frames: usize) -> Result<CorpusItem> {
    let seed = corpus.seed.wrapping_add(index as u64);
    let mut rng = seeded_rng(seed, stream::SCENE);
    let (rows, cols) = c.shape();
    let [lo, hi] = corpus.scene_range;
    let truth = random_scene(corpus.scene_kind, rows, cols, lo, hi, &mut rng)?;
    let [a0, a1] = corpus.t_amb_range;
    let t_amb = if a0 == a1 { a0 } else { rand::Rng::random_range(&mut rng, a0..a1) };
    let spec = BurstSpec {
        n_frames,
        seed,
        ..corpus.burst.clone()
    };
    let burst = make_burst(&truth, t_amb, c, &spec)?;
    // augmentation moves the scene; keep the truth aligned with the pivot
    let truth = burst.augmentation.apply(&truth);
    Ok(CorpusItem { truth, burst })
}

/// Pixels where the fused estimate is compared with the truth: valid in at
/// least one frame.
pub fn evaluation_mask(burst: &Burst) -> Mask {
    burst.union_mask()
}

/// Offset-fit samples for every scene of `corpus`.
pub fn offset_corpus(c: &CoefficientTensor, corpus: &CorpusSpec) -> Result<Vec<OffsetSample>> {
    corpus.validate()?;
    (0..corpus.n_scenes)
        .into_par_iter()
        .map(|i| {
            let item = corpus_item(c, corpus, i, corpus.burst.n_frames)?;
            let ks = kernels_for(&item.burst, &corpus.kernels, corpus.kernel_size)?;
            let target = offset_target(&item.burst, &ks, &item.truth, &evaluation_mask(&item.burst))?;
            Ok(OffsetSample {
                frame_means: item.burst.frame_means(),
                t_amb: item.burst.t_amb,
                target,
            })
        })
        .collect()
}

pub fn fit_offset_on_corpus(c: &CoefficientTensor, corpus: &CorpusSpec, nu: usize) -> Result<OffsetFit> {
    fit_offset(&offset_corpus(c, corpus)?, nu)
}

/// Mean MAE (°C) of [`fuse`] over the scenes of `corpus`, at `n_frames`.
pub fn corpus_mae(c: &CoefficientTensor, corpus: &CorpusSpec, om: &OffsetModel, n_frames: usize) -> Result<Vec<f64>> {
    corpus.validate()?;
    (0..corpus.n_scenes)
        .into_par_iter()
        .map(|i| {
            let item = corpus_item(c, corpus, i, n_frames)?;
            let ks = kernels_for(&item.burst, &corpus.kernels, corpus.kernel_size)?;
            let est = fuse(&item.burst, &ks, om)?;
            mae(&est, &item.truth, &evaluation_mask(&item.burst))
        })
        .collect()
}

/// One row of a frame-count sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_frames: usize,
    pub mae: f64,
}

pub fn sweep_n(c: &CoefficientTensor, corpus: &CorpusSpec, om: &OffsetModel, n_values: &[usize]) -> Result<Vec<SweepRow>> {
    if n_values.is_empty() {
        return Err(Error::Config("sweep needs at least one frame count".into()));
    }
    n_values
        .iter()
        .map(|&n| {
            let maes = corpus_mae(c, corpus, om, n)?;
            Ok(SweepRow {
                n_frames: n,
                mae: maes.iter().sum::<f64>() / maes.len() as f64,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("n_frames,mae\n");
    for r in rows {
        out.push_str(&format!("{},{}\n", r.n_frames, r.mae));
    }
    out
}
