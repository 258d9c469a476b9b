//! Radially symmetric regularization of coefficient planes.
//!
//! Each plane is replaced by a polynomial `Σⱼ mⱼ·Rʲ` in the distance `R` from
//! the frame center, where row and column coordinates each span
//! `[-0.5, 0.5]` inclusively.

use serde::{Deserialize, Serialize};

use super::{CoefficientTensor, N_COEFFS};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lstsq::LeastSquares;

/// Polynomial degree used when none is requested.
pub const DEFAULT_RADIAL_DEGREE: usize = 6;

/// Coordinate of index `i` on an inclusive `[-0.5, 0.5]` span of `n` points.
///
/// Written as `(2i − (n−1)) / (2(n−1))` so mirrored indices give exactly
/// negated values.
fn span(i: usize, n: usize) -> f64 {
    (2.0 * i as f64 - (n - 1) as f64) / (2.0 * (n - 1) as f64)
}

/// Distance of every pixel from the frame center in the normalized mesh.
pub fn radial_map(h: usize, w: usize) -> Result<Grid<f64>> {
    if h < 2 || w < 2 {
        return Err(Error::Domain(format!("radial map needs h, w >= 2, got {h}x{w}")));
    }
    Ok(Grid::from_fn(h, w, |r, c| {
        let y = span(r, h);
        let x = span(c, w);
        (y * y + x * x).sqrt()
    }))
}

/// Spatial coefficients `m_0..m_M` for each of the eight planes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialModel {
    pub degree: usize,
    /// `planes[i][j]` multiplies `Rʲ` in plane `i`.
    pub planes: Vec<Vec<f64>>,
}

impl RadialModel {
    pub fn new(degree: usize, planes: Vec<Vec<f64>>) -> Result<Self> {
        if planes.len() != N_COEFFS {
            return Err(Error::Domain(format!("radial model needs {N_COEFFS} planes, got {}", planes.len())));
        }
        for p in &planes {
            if p.len() != degree + 1 {
                return Err(Error::Domain(format!(
                    "degree {degree} needs {} coefficients per plane, got {}",
                    degree + 1,
                    p.len()
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain("radial model has non-finite coefficients".into()));
            }
        }
        Ok(Self { degree, planes })
    }

    pub fn zeros(degree: usize) -> Self {
        Self {
            degree,
            planes: vec![vec![0.0; degree + 1]; N_COEFFS],
        }
    }

    /// A plausible uncooled 14-bit camera: gray levels stay inside
    /// `[0, 16383]` for `t_obj ∈ [0, 60]` °C and `t_amb ∈ [-10, 50]` °C, with
    /// gain falling and offset rising toward the corners.
    pub fn reference_camera() -> Self {
        Self {
            degree: 2,
            planes: vec![
                vec![3.0e-4, 0.0, -6.0e-5],
                vec![2.0e-6, 0.0, 1.0e-6],
                vec![-1.0e-8, 0.0, 2.0e-9],
                vec![5.0e-11, 0.0, 0.0],
                vec![6000.0, 0.0, 400.0],
                vec![35.0, 0.0, 8.0],
                vec![0.2, 0.0, 0.05],
                vec![1.0e-3, 0.0, 2.0e-4],
            ],
        }
    }

    pub fn reconstruct(&self, h: usize, w: usize) -> Result<CoefficientTensor> {
        reconstruct_coeffs(self, h, w)
    }
}

fn eval_poly(coeffs: &[f64], r: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &m| acc * r + m)
}

/// Least-squares fit of every plane onto `{Rʲ : j = 0..=degree}`.
pub fn fit_radial(c: &CoefficientTensor, degree: usize) -> Result<RadialModel> {
    let (h, w) = c.shape();
    if degree + 1 > h * w {
        return Err(Error::Domain(format!(
            "radial degree {degree} needs at least {} pixels, frame has {}",
            degree + 1,
            h * w
        )));
    }
    let r = radial_map(h, w)?;
    let cols = degree + 1;
    let mut design = Vec::with_capacity(h * w * cols);
    for &rv in r.iter() {
        let mut p = 1.0;
        for _ in 0..cols {
            design.push(p);
            p *= rv;
        }
    }
    let ls = LeastSquares::new(h * w, cols, &design)?;
    let planes = c.planes().iter().map(|plane| ls.solve(plane.as_slice())).collect();
    RadialModel::new(degree, planes)
}

/// Evaluate `Σⱼ mⱼ·Rʲ` per plane on an `h × w` frame.
pub fn reconstruct_coeffs(rm: &RadialModel, h: usize, w: usize) -> Result<CoefficientTensor> {
    let r = radial_map(h, w)?;
    let planes = rm.planes.iter().map(|m| r.map(|&rv| eval_poly(m, rv))).collect();
    CoefficientTensor::new(planes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corners_and_center() {
        let r = radial_map(7, 7).unwrap();
        let corner = 0.5f64.hypot(0.5);
        for (rr, cc) in [(0, 0), (0, 6), (6, 0), (6, 6)] {
            assert!((r.get(rr, cc) - corner).abs() < 1e-15);
        }
        assert_eq!(*r.get(3, 3), 0.0);
        let r = radial_map(4, 9).unwrap();
        assert!((r.get(3, 8) - corner).abs() < 1e-15);
    }

    #[test]
    fn flips_are_exact() {
        for (h, w) in [(2, 2), (5, 8), (16, 13)] {
            let r = radial_map(h, w).unwrap();
            for i in 0..h {
                for j in 0..w {
                    assert_eq!(r.get(i, j), r.get(h - 1 - i, j));
                    assert_eq!(r.get(i, j), r.get(i, w - 1 - j));
                }
            }
        }
    }

    #[test]
    fn too_small() {
        assert!(radial_map(1, 5).is_err());
        assert!(radial_map(5, 1).is_err());
    }

    #[test]
    fn linear_profile_recovered() {
        let rm = RadialModel::new(1, vec![vec![2.0, 3.0]; 8]).unwrap();
        let c = reconstruct_coeffs(&rm, 20, 24).unwrap();
        let fit = fit_radial(&c, 1).unwrap();
        for p in &fit.planes {
            assert!((p[0] - 2.0).abs() < 1e-9 && (p[1] - 3.0).abs() < 1e-9, "{p:?}");
        }
    }

    #[test]
    fn constant_plane_any_degree() {
        let c = CoefficientTensor::uniform(12, 10, [7.5; 8]).unwrap();
        for degree in 0..=4 {
            let fit = fit_radial(&c, degree).unwrap();
            for p in &fit.planes {
                assert!((p[0] - 7.5).abs() < 1e-8);
                assert!(p[1..].iter().all(|m| m.abs() < 1e-6), "{p:?}");
            }
        }
    }

    #[test]
    fn zero_model_gives_zero_tensor() {
        let c = reconstruct_coeffs(&RadialModel::zeros(3), 5, 6).unwrap();
        assert_eq!(c, CoefficientTensor::zeros(5, 6));
    }

    #[test]
    fn degree_larger_than_pixels_rejected() {
        let c = CoefficientTensor::zeros(2, 2);
        assert!(fit_radial(&c, 4).is_err());
    }

    #[test]
    fn model_validation() {
        assert!(RadialModel::new(2, vec![vec![1.0; 3]; 7]).is_err());
        assert!(RadialModel::new(2, vec![vec![1.0; 2]; 8]).is_err());
    }
}
