//! Dense row-major 2D fields shared by every stage of the pipeline.

use crate::error::{Error, Result};

/// A row-major `rows × cols` field.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Grid<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

/// Scene temperatures in °C.
pub type TemperatureMap = Grid<f64>;
/// Camera gray levels (or their normalized form).
pub type GrayFrame = Grid<f64>;
/// Per-pixel validity.
pub type Mask = Grid<bool>;

impl<T: Clone> Grid<T> {
    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Domain(format!(
                "grid {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// `(rows, cols)`.
    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> &T {
        &self.data[r * self.cols + c]
    }

    #[inline]
    pub fn get_mut(&mut self, r: usize, c: usize) -> &mut T {
        &mut self.data[r * self.cols + c]
    }

    /// Value at `(r, c)` with coordinates clamped into the grid.
    #[inline]
    pub fn get_clamped(&self, r: isize, c: isize) -> &T {
        let r = r.clamp(0, self.rows as isize - 1) as usize;
        let c = c.clamp(0, self.cols as isize - 1) as usize;
        self.get(r, c)
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn zip_map<U, V>(&self, other: &Grid<U>, mut f: impl FnMut(&T, &U) -> V) -> Result<Grid<V>> {
        self.ensure_same_shape(other)?;
        Ok(Grid {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(a, b)).collect(),
        })
    }

    pub fn ensure_same_shape<U>(&self, other: &Grid<U>) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(self.shape(), other.shape()));
        }
        Ok(())
    }
}

impl Grid<f64> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn min_max(&self) -> Option<(f64, f64)> {
        self.data.iter().fold(None, |acc, &v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Mean over pixels where `mask` is true; `None` if none are.
    pub fn masked_mean(&self, mask: &Mask) -> Option<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for (&v, &m) in self.data.iter().zip(mask.as_slice()) {
            if m {
                sum += v;
                n += 1;
            }
        }
        (n > 0).then(|| sum / n as f64)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Bilinear sample at continuous `(x, y)` = `(col, row)`.
    ///
    /// Returns `None` unless all four neighbours are inside the grid.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Option<f64> {
        let (c0, r0, fx, fy) = bilinear_cell(x, y, self.rows, self.cols)?;
        let v00 = *self.get(r0, c0);
        let v01 = *self.get(r0, c0 + 1);
        let v10 = *self.get(r0 + 1, c0);
        let v11 = *self.get(r0 + 1, c0 + 1);
        Some(lerp4(v00, v01, v10, v11, fx, fy))
    }
}

impl Grid<bool> {
    pub fn count_true(&self) -> usize {
        self.data.iter().filter(|&&m| m).count()
    }

    pub fn all_true(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, true)
    }
}

/// Upper-left neighbour and fractional offsets of the bilinear cell holding
/// `(x, y)`. Points exactly on the last row/column are mapped to the cell
/// before it with fraction 1 so integer coordinates stay exact.
pub(crate) fn bilinear_cell(x: f64, y: f64, rows: usize, cols: usize) -> Option<(usize, usize, f64, f64)> {
    if !(x.is_finite() && y.is_finite()) || rows == 0 || cols == 0 {
        return None;
    }
    let max_x = (cols - 1) as f64;
    let max_y = (rows - 1) as f64;
    if x < 0.0 || y < 0.0 || x > max_x || y > max_y {
        return None;
    }
    let (c0, fx) = split_coord(x, cols);
    let (r0, fy) = split_coord(y, rows);
    Some((c0, r0, fx, fy))
}

fn split_coord(v: f64, n: usize) -> (usize, f64) {
    if n == 1 {
        return (0, 0.0);
    }
    let base = v.floor();
    let mut i = base as usize;
    let mut f = v - base;
    if i >= n - 1 {
        i = n - 2;
        f = v - i as f64;
    }
    (i, f)
}

#[inline]
pub(crate) fn lerp4(v00: f64, v01: f64, v10: f64, v11: f64, fx: f64, fy: f64) -> f64 {
    if fx == 0.0 && fy == 0.0 {
        return v00;
    }
    if fx == 1.0 && fy == 0.0 {
        return v01;
    }
    if fx == 0.0 && fy == 1.0 {
        return v10;
    }
    if fx == 1.0 && fy == 1.0 {
        return v11;
    }
    let top = v00 + (v01 - v00) * fx;
    let bottom = v10 + (v11 - v10) * fx;
    top + (bottom - top) * fy
}
