//! Per-pixel kernel stacks and their application to a burst.
//!
//! File layout: 4-byte magic `TFKS`, then `N`, `h`, `w`, `K` as `u32` LE,
//! then `N·h·w·K·K` `f32` LE values ordered frame, row, column, kernel row,
//! kernel column.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GrayFrame, Grid};
use crate::io;

pub const KERNEL_MAGIC: &[u8; 4] = b"TFKS";
const HEADER_LEN: usize = 20;

/// One `K×K` kernel per frame and pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelStack {
    n_frames: usize,
    rows: usize,
    cols: usize,
    k: usize,
    data: Vec<f32>,
}

impl KernelStack {
    pub fn new(n_frames: usize, rows: usize, cols: usize, k: usize, data: Vec<f32>) -> Result<Self> {
        check_k(k)?;
        if n_frames == 0 || rows == 0 || cols == 0 {
            return Err(Error::Domain("kernel stack dimensions must be positive".into()));
        }
        let need = n_frames * rows * cols * k * k;
        if data.len() != need {
            return Err(Error::Domain(format!("kernel stack needs {need} values, got {}", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("kernel stack has non-finite values".into()));
        }
        Ok(Self { n_frames, rows, cols, k, data })
    }

    pub fn zeros(n_frames: usize, rows: usize, cols: usize, k: usize) -> Result<Self> {
        Self::new(n_frames, rows, cols, k, vec![0.0; n_frames * rows * cols * k * k])
    }

    /// The same kernel for every pixel of frame `n`, given by `per_frame[n]`.
    pub fn spatially_uniform(rows: usize, cols: usize, k: usize, per_frame: &[Vec<f32>]) -> Result<Self> {
        check_k(k)?;
        let mut data = Vec::with_capacity(per_frame.len() * rows * cols * k * k);
        for kern in per_frame {
            if kern.len() != k * k {
                return Err(Error::Domain(format!("kernel needs {} values, got {}", k * k, kern.len())));
            }
            for _ in 0..rows * cols {
                data.extend_from_slice(kern);
            }
        }
        Self::new(per_frame.len(), rows, cols, k, data)
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn kernel_size(&self) -> usize {
        self.k
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Kernel of frame `n` at pixel `(r, c)`, row-major.
    pub fn kernel(&self, n: usize, r: usize, c: usize) -> &[f32] {
        let kk = self.k * self.k;
        let start = ((n * self.rows + r) * self.cols + c) * kk;
        &self.data[start..start + kk]
    }

    pub fn kernel_mut(&mut self, n: usize, r: usize, c: usize) -> &mut [f32] {
        let kk = self.k * self.k;
        let start = ((n * self.rows + r) * self.cols + c) * kk;
        &mut self.data[start..start + kk]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len() * 4);
        out.extend_from_slice(KERNEL_MAGIC);
        for v in [self.n_frames, self.rows, self.cols, self.k] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::format(path, bytes.len() as u64, "truncated kernel header"));
        }
        if &bytes[..4] != KERNEL_MAGIC {
            return Err(Error::format(path, 0, "bad magic, expected TFKS"));
        }
        let field = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes")) as usize;
        let (n, rows, cols, k) = (field(0), field(1), field(2), field(3));
        if k % 2 == 0 {
            return Err(Error::format(path, 16, format!("kernel size must be odd, got {k}")));
        }
        if n == 0 || rows == 0 || cols == 0 {
            return Err(Error::format(path, 4, "zero kernel stack dimension"));
        }
        let count = n
            .checked_mul(rows)
            .and_then(|v| v.checked_mul(cols))
            .and_then(|v| v.checked_mul(k * k))
            .ok_or_else(|| Error::format(path, 4, "kernel stack dimensions overflow"))?;
        let need = HEADER_LEN + count * 4;
        if bytes.len() != need {
            return Err(Error::format(
                path,
                bytes.len().min(need) as u64,
                format!("expected {need} bytes for a {n}x{rows}x{cols}x{k}x{k} stack, found {}", bytes.len()),
            ));
        }
        let data: Vec<f32> = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::format(path, (HEADER_LEN + 4 * i) as u64, "non-finite kernel value"));
        }
        Self::new(n, rows, cols, k, data)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        io::write_bytes(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(path, &bytes)
    }
}

fn check_k(k: usize) -> Result<()> {
    if k.is_multiple_of(2) {
        return Err(Error::Domain(format!("kernel size must be odd and >= 1, got {k}")));
    }
    Ok(())
}

/// Kernel families available without a trained predictor.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelKind {
    /// Centered delta scaled by `1/N` on every frame.
    Identity,
    /// Uniform `1/(N·K²)` box over every frame.
    Average,
    /// Delta at `(−dx, −dy)` from the center, scaled by `1/N`, where frame
    /// `n` sees the pivot scene displaced by `shifts[n] = (dx, dy)`.
    ShiftedDelta(Vec<(i64, i64)>),
    File(PathBuf),
}

/// Build the stack of `kind` for an `n_frames × rows × cols` burst.
pub fn kernel_provider(kind: &KernelKind, n_frames: usize, dims: (usize, usize), k: usize) -> Result<KernelStack> {
    let (rows, cols) = dims;
    check_k(k)?;
    if n_frames == 0 {
        return Err(Error::Domain("kernel stack needs at least one frame".into()));
    }
    let kk = k * k;
    let center = k / 2;
    let scale = 1.0 / n_frames as f32;
    match kind {
        KernelKind::Identity => {
            let mut kern = vec![0.0; kk];
            kern[center * k + center] = scale;
            KernelStack::spatially_uniform(rows, cols, k, &vec![kern; n_frames])
        }
        KernelKind::Average => {
            let kern = vec![1.0 / (n_frames * kk) as f32; kk];
            KernelStack::spatially_uniform(rows, cols, k, &vec![kern; n_frames])
        }
        KernelKind::ShiftedDelta(shifts) => {
            if shifts.len() != n_frames {
                return Err(Error::Config(format!("{} shifts given for {n_frames} frames", shifts.len())));
            }
            let half = center as i64;
            let per_frame = shifts
                .iter()
                .map(|&(dx, dy)| {
                    if dx.abs() > half || dy.abs() > half {
                        return Err(Error::Config(format!(
                            "shift ({dx}, {dy}) does not fit in a {k}x{k} kernel"
                        )));
                    }
                    let mut kern = vec![0.0; kk];
                    let (i, j) = ((half - dy) as usize, (half - dx) as usize);
                    kern[i * k + j] = scale;
                    Ok(kern)
                })
                .collect::<Result<Vec<_>>>()?;
            KernelStack::spatially_uniform(rows, cols, k, &per_frame)
        }
        KernelKind::File(path) => {
            let ks = KernelStack::read(path)?;
            if ks.n_frames() != n_frames || ks.shape() != dims {
                return Err(Error::Config(format!(
                    "{}: stack is {}x{}x{}, burst is {n_frames}x{rows}x{cols}",
                    path.display(),
                    ks.n_frames,
                    ks.rows,
                    ks.cols
                )));
            }
            Ok(ks)
        }
    }
}

/// `Σₙ ⟨𝒦ⁿ_p, patch of frame n at p⟩` for every pixel, with replicate
/// padding at the borders.
pub fn apply_kernels(frames: &[GrayFrame], ks: &KernelStack) -> Result<Grid<f64>> {
    if frames.len() != ks.n_frames {
        return Err(Error::Domain(format!(
            "{} kernel frames for a burst of {}",
            ks.n_frames,
            frames.len()
        )));
    }
    for f in frames {
        if f.shape() != ks.shape() {
            return Err(Error::shape(ks.shape(), f.shape()));
        }
    }
    let (rows, cols) = ks.shape();
    let half = (ks.k / 2) as isize;
    let k = ks.k;
    let data: Vec<f64> = (0..rows * cols)
        .into_par_iter()
        .map(|idx| {
            let (r, c) = (idx / cols, idx % cols);
            let mut acc = 0.0;
            for (n, f) in frames.iter().enumerate() {
                let kern = ks.kernel(n, r, c);
                for i in 0..k {
                    for j in 0..k {
                        let w = kern[i * k + j] as f64;
                        let v = *f.get_clamped(r as isize + i as isize - half, c as isize + j as isize - half);
                        acc += w * v;
                    }
                }
            }
            acc
        })
        .collect();
    Grid::from_vec(rows, cols, data)
}
