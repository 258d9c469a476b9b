//! Linear least squares through a column-equilibrated SVD.
//!
//! Every fit in the crate solves many right-hand sides against one design
//! matrix (all pixels share the sample temperatures, all coefficient planes
//! share the radial basis), so the solver factorizes once and reuses the
//! solution operator.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Singular values below `RANK_RTOL · σ_max` of the equilibrated design are
/// treated as zero.
pub const RANK_RTOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct LeastSquares {
    /// `n × m` operator mapping observations to coefficients.
    operator: DMatrix<f64>,
    design: DMatrix<f64>,
    rank: usize,
    condition: f64,
}

impl LeastSquares {
    /// Factorize an `m × n` row-major design matrix. Fails with
    /// [`Error::Fit`] when the design does not have full column rank.
    pub fn new(rows: usize, cols: usize, row_major: &[f64]) -> Result<Self> {
        if row_major.len() != rows * cols {
            return Err(Error::Fit(format!(
                "design of {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                row_major.len()
            )));
        }
        if rows < cols {
            return Err(Error::Fit(format!(
                "underdetermined system: {rows} observations for {cols} unknowns"
            )));
        }
        if row_major.iter().any(|v| !v.is_finite()) {
            return Err(Error::Fit("design matrix has non-finite entries".into()));
        }
        let design = DMatrix::from_row_slice(rows, cols, row_major);
        let scales: Vec<f64> = (0..cols)
            .map(|j| {
                let n = design.column(j).norm();
                if n > 0.0 {
                    n
                } else {
                    1.0
                }
            })
            .collect();
        let mut scaled = design.clone();
        for (j, s) in scales.iter().enumerate() {
            scaled.column_mut(j).scale_mut(1.0 / s);
        }
        let svd = scaled.svd(true, true);
        let sv = &svd.singular_values;
        let smax = sv.max();
        let cut = smax * RANK_RTOL;
        let rank = sv.iter().filter(|&&s| s > cut).count();
        let smin = sv.min();
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if rank < cols {
            return Err(Error::Fit(format!(
                "rank-deficient design matrix: rank {rank} < {cols} unknowns"
            )));
        }
        let u = svd.u.expect("requested U");
        let v_t = svd.v_t.expect("requested V^T");
        // x = D⁻¹ V Σ⁻¹ Uᵀ b
        let mut operator = v_t.transpose();
        for (j, s) in sv.iter().enumerate() {
            operator.column_mut(j).scale_mut(1.0 / s);
        }
        let mut operator = operator * u.transpose();
        for (j, s) in scales.iter().enumerate() {
            operator.row_mut(j).scale_mut(1.0 / s);
        }
        Ok(Self {
            operator,
            design,
            rank,
            condition,
        })
    }

    pub fn unknowns(&self) -> usize {
        self.operator.nrows()
    }

    pub fn observations(&self) -> usize {
        self.operator.ncols()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// 2-norm condition number of the column-equilibrated design.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Coefficients minimizing `‖A·x − b‖₂`, with one step of iterative
    /// refinement.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.observations(), "observation count");
        let mut x = self.apply(b);
        let r = self.residual(&x, b);
        for (xi, di) in x.iter_mut().zip(self.apply(&r)) {
            *xi -= di;
        }
        x
    }

    fn apply(&self, b: &[f64]) -> Vec<f64> {
        let m = self.observations();
        (0..self.unknowns())
            .map(|i| {
                let mut acc = 0.0;
                for k in 0..m {
                    acc += self.operator[(i, k)] * b[k];
                }
                acc
            })
            .collect()
    }

    /// `A·x − b`.
    pub fn residual(&self, x: &[f64], b: &[f64]) -> Vec<f64> {
        (0..self.design.nrows())
            .map(|i| {
                let mut acc = 0.0;
                for j in 0..self.design.ncols() {
                    acc += self.design[(i, j)] * x[j];
                }
                acc - b[i]
            })
            .collect()
    }
}
