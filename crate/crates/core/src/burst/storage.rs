//! Burst directories: `frame_NNNN.pgm` (16-bit gray levels),
//! `mask_NNNN.pgm` (8-bit) and `burst.json`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{normalize_value, Augmentation, Burst, BurstSpec, Homography, Normalization};
use crate::error::{Error, Result};
use crate::io::{read_gray_pgm, read_json, read_mask_pgm, write_gray_pgm, write_json, write_mask_pgm};

pub const BURST_METADATA_FILE: &str = "burst.json";

/// Everything in a burst except the pixel data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurstMetadata {
    pub n_frames: usize,
    pub height: usize,
    pub width: usize,
    pub pivot: usize,
    pub t_amb: f64,
    pub seed: u64,
    pub normalization: Normalization,
    pub frames: Vec<String>,
    pub masks: Vec<String>,
    pub true_homographies: Vec<Homography>,
    pub perturbed_inverse_homographies: Vec<Homography>,
    pub overlaps: Vec<f64>,
    #[serde(default)]
    pub augmentation: Augmentation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<BurstSpec>,
}

fn frame_name(i: usize) -> String {
    format!("frame_{i:04}.pgm")
}

fn mask_name(i: usize) -> String {
    format!("mask_{i:04}.pgm")
}

/// Write `burst` into `dir`. Frames are stored as gray levels rounded to
/// 16 bits, so a reloaded burst is quantized.
pub fn save_burst(dir: &Path, burst: &Burst, spec: Option<&BurstSpec>) -> Result<()> {
    burst.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let gray = burst.gray_frames();
    for (i, (f, m)) in gray.iter().zip(&burst.masks).enumerate() {
        write_gray_pgm(&dir.join(frame_name(i)), f)?;
        write_mask_pgm(&dir.join(mask_name(i)), m)?;
    }
    let (height, width) = burst.shape();
    let meta = BurstMetadata {
        n_frames: burst.len(),
        height,
        width,
        pivot: burst.pivot,
        t_amb: burst.t_amb,
        seed: burst.seed,
        normalization: burst.normalization,
        frames: (0..burst.len()).map(frame_name).collect(),
        masks: (0..burst.len()).map(mask_name).collect(),
        true_homographies: burst.true_homographies.clone(),
        perturbed_inverse_homographies: burst.perturbed_inverse_homographies.clone(),
        overlaps: burst.overlaps.clone(),
        augmentation: burst.augmentation,
        spec: spec.cloned(),
    };
    write_json(&dir.join(BURST_METADATA_FILE), &meta)
}

pub fn load_burst(dir: &Path) -> Result<(Burst, BurstMetadata)> {
    let meta_path = dir.join(BURST_METADATA_FILE);
    let meta: BurstMetadata = read_json(&meta_path)?;
    let n = meta.n_frames;
    if meta.frames.len() != n
        || meta.masks.len() != n
        || meta.true_homographies.len() != n
        || meta.perturbed_inverse_homographies.len() != n
        || meta.overlaps.len() != n
    {
        return Err(Error::Config(format!(
            "{}: list lengths do not match n_frames = {n}",
            meta_path.display()
        )));
    }
    meta.normalization.validate()?;
    let [lo, hi] = meta.normalization.gray;
    let mut frames = Vec::with_capacity(n);
    let mut masks = Vec::with_capacity(n);
    for (f, m) in meta.frames.iter().zip(&meta.masks) {
        let gray = read_gray_pgm(&dir.join(f))?;
        let mask = read_mask_pgm(&dir.join(m))?;
        if gray.shape() != (meta.height, meta.width) {
            return Err(Error::shape((meta.height, meta.width), gray.shape()));
        }
        let norm = gray.zip_map(&mask, |&v, &ok| if ok { normalize_value(v, lo, hi) } else { 0.0 })?;
        frames.push(norm);
        masks.push(mask);
    }
    let burst = Burst {
        frames,
        masks,
        true_homographies: meta.true_homographies.clone(),
        perturbed_inverse_homographies: meta.perturbed_inverse_homographies.clone(),
        overlaps: meta.overlaps.clone(),
        pivot: meta.pivot,
        t_amb: meta.t_amb,
        normalization: meta.normalization,
        seed: meta.seed,
        augmentation: meta.augmentation,
    };
    burst.validate()?;
    Ok((burst, meta))
}
