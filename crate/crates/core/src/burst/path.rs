//! Camera paths around a pivot frame and registration perturbations.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::noise::{seeded_rng, stream};
use super::overlap::overlap;
use super::spec::{BurstSpec, PathMode, Perturbation};
use super::Homography;
use crate::error::{Error, Result};

/// Index of the pivot frame in an `n`-frame burst.
pub fn pivot_index(n_frames: usize) -> usize {
    n_frames.saturating_sub(1) / 2
}

const OVERLAP_TOL: f64 = 1e-9;
const MAX_ATTEMPTS: usize = 64;

/// Sample `spec.n_frames` homographies, each mapping pivot coordinates to
/// the coordinates of one frame. The pivot's entry is the identity and every
/// other frame overlaps the pivot within `spec.overlap_range`.
///
/// Frames are pure translations of the pivot. In walk mode they progress
/// monotonically along one random direction (farther frames overlap less);
/// in hover mode each frame takes its own direction.
pub fn sample_path(spec: &BurstSpec, dims: (usize, usize)) -> Result<Vec<Homography>> {
    spec.validate()?;
    let (rows, cols) = dims;
    if rows < 2 || cols < 2 {
        return Err(Error::Config(format!("frame {rows}x{cols} too small for path sampling")));
    }
    let n = spec.n_frames;
    let pivot = pivot_index(n);
    let mut rng = seeded_rng(spec.seed, stream::PATH);
    let [lo, hi] = spec.overlap_range;

    let mut targets: Vec<f64> = (0..n.saturating_sub(1))
        .map(|_| if lo == hi { lo } else { rng.random_range(lo..=hi) })
        .collect();
    let walk_angle = rng.random_range(0.0..2.0 * PI);

    // walk: the frame farthest from the pivot gets the smallest overlap
    let order: Vec<usize> = match spec.mode {
        PathMode::Walk => {
            targets.sort_by(|a, b| b.partial_cmp(a).expect("finite overlaps"));
            (0..n).filter(|&i| i != pivot).collect()
        }
        PathMode::Hover => (0..n).filter(|&i| i != pivot).collect(),
    };

    let mut path = vec![Homography::identity(); n];
    for (slot, &frame) in order.iter().enumerate() {
        let (target, angle) = match spec.mode {
            PathMode::Walk => {
                let dist = frame.abs_diff(pivot);
                // frames at equal distance on both sides share a rank
                let rank = walk_rank(dist, frame < pivot, pivot, n);
                let side = if frame < pivot { PI } else { 0.0 };
                (targets[rank], walk_angle + side)
            }
            PathMode::Hover => (targets[slot], rng.random_range(0.0..2.0 * PI)),
        };
        path[frame] = translation_for_overlap(target, angle, dims, lo, hi, &mut rng)?;
    }
    Ok(path)
}

/// Rank of a walk frame in the overlap ordering: frames closer to the pivot
/// get lower ranks, i.e. larger overlaps.
fn walk_rank(dist: usize, before: bool, pivot: usize, n: usize) -> usize {
    let after_count = n - 1 - pivot;
    let mut rank = 0;
    for d in 1..dist {
        if d <= pivot {
            rank += 1;
        }
        if d <= after_count {
            rank += 1;
        }
    }
    if !before && dist <= pivot {
        rank += 1;
    }
    rank
}

/// Translation along `angle` whose projected overlap with the pivot equals
/// `target`, re-drawn when it cannot be placed inside `[lo, hi]`.
fn translation_for_overlap(
    target: f64,
    angle: f64,
    dims: (usize, usize),
    lo: f64,
    hi: f64,
    rng: &mut impl Rng,
) -> Result<Homography> {
    let (mut target, mut angle) = (target, angle);
    for _ in 0..MAX_ATTEMPTS {
        let h = bisect_translation(target, angle, dims);
        let o = overlap(&h.inverse()?, dims);
        if o >= lo - OVERLAP_TOL && o <= hi + OVERLAP_TOL {
            return Ok(h);
        }
        target = if lo == hi { lo } else { rng.random_range(lo..=hi) };
        angle = rng.random_range(0.0..2.0 * PI);
    }
    Err(Error::Config(format!(
        "cannot place a frame with overlap in [{lo}, {hi}] on a {}x{} frame",
        dims.0, dims.1
    )))
}

fn bisect_translation(target: f64, angle: f64, dims: (usize, usize)) -> Homography {
    let (rows, cols) = dims;
    let (dy, dx) = angle.sin_cos();
    let at = |t: f64| {
        // camera displaced by +t·d: pixel u of the frame sees pivot point u + t·d
        Homography::translation(-t * dx, -t * dy)
    };
    if target >= 1.0 {
        return Homography::identity();
    }
    let mut a = 0.0;
    let mut b = (cols as f64).hypot(rows as f64);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let o = at(m).inverse().map(|h| overlap(&h, dims)).unwrap_or(0.0);
        if o > target {
            a = m;
        } else {
            b = m;
        }
        if b - a < 1e-12 {
            break;
        }
    }
    at(0.5 * (a + b))
}

/// Add uniform translation noise to `h₁₃`, `h₂₃` and Gaussian noise to the
/// perspective entries `h₃₁`, `h₃₂`.
pub fn perturb(h: &Homography, p: &Perturbation, rng: &mut impl Rng) -> Result<Homography> {
    if p.is_none() {
        return Ok(*h);
    }
    let mut m = *h.matrix();
    if p.max_translation_px > 0.0 {
        let t = p.max_translation_px;
        m[(0, 2)] += rng.random_range(-t..=t);
        m[(1, 2)] += rng.random_range(-t..=t);
    }
    if p.perspective_variance > 0.0 {
        let normal = Normal::new(0.0, p.perspective_variance.sqrt()).map_err(|e| Error::Domain(e.to_string()))?;
        m[(2, 0)] += normal.sample(rng);
        m[(2, 1)] += normal.sample(rng);
    }
    Homography::new(m)
}
