use rayon::prelude::*;

use super::Homography;
use crate::error::Result;
use crate::grid::{bilinear_cell, lerp4, Grid, Mask};

/// Resample `frame` into the coordinates of `h`'s destination.
///
/// `h` maps source pixel coordinates to destination coordinates, so each
/// output pixel `u` takes the bilinear sample of `frame` at `h⁻¹(u)`. The
/// mask is true iff all four interpolation neighbours lie inside the source;
/// invalid pixels are set to 0.
pub fn warp(frame: &Grid<f64>, h: &Homography) -> Result<(Grid<f64>, Mask)> {
    warp_masked(frame, None, h)
}

/// Like [`warp`], also requiring every interpolation neighbour to be valid
/// in `source_mask`.
pub fn warp_masked(frame: &Grid<f64>, source_mask: Option<&Mask>, h: &Homography) -> Result<(Grid<f64>, Mask)> {
    if let Some(m) = source_mask {
        frame.ensure_same_shape(m)?;
    }
    let inv = h.inverse()?;
    let (rows, cols) = frame.shape();
    let samples: Vec<(f64, bool)> = (0..rows * cols)
        .into_par_iter()
        .map(|idx| {
            let (r, c) = (idx / cols, idx % cols);
            let Some((x, y)) = inv.apply(c as f64, r as f64) else {
                return (0.0, false);
            };
            if inv.depth(c as f64, r as f64) <= 0.0 {
                return (0.0, false);
            }
            let Some((c0, r0, fx, fy)) = bilinear_cell(x, y, rows, cols) else {
                return (0.0, false);
            };
            if let Some(m) = source_mask {
                // only neighbours carrying weight must be valid
                let needed = [
                    (fx < 1.0 && fy < 1.0, r0, c0),
                    (fx > 0.0 && fy < 1.0, r0, c0 + 1),
                    (fx < 1.0 && fy > 0.0, r0 + 1, c0),
                    (fx > 0.0 && fy > 0.0, r0 + 1, c0 + 1),
                ];
                let ok = needed.iter().all(|&(used, r, c)| !used || *m.get(r, c));
                if !ok {
                    return (0.0, false);
                }
            }
            let v = lerp4(
                *frame.get(r0, c0),
                *frame.get(r0, c0 + 1),
                *frame.get(r0 + 1, c0),
                *frame.get(r0 + 1, c0 + 1),
                fx,
                fy,
            );
            (v, true)
        })
        .collect();
    let out = Grid::from_vec(rows, cols, samples.iter().map(|s| s.0).collect())?;
    let mask = Grid::from_vec(rows, cols, samples.iter().map(|s| s.1).collect())?;
    Ok((out, mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn ramp(rows: usize, cols: usize) -> Grid<f64> {
        Grid::from_fn(rows, cols, |r, c| ((r * 31 + c * 17) % 23) as f64 / 23.0 + 0.01 * c as f64)
    }

    #[test]
    fn identity_is_noop() {
        let f = ramp(9, 11);
        let (w, m) = warp(&f, &Homography::identity()).unwrap();
        assert_eq!(w, f);
        assert_eq!(m.count_true(), 99);
    }

    #[test]
    fn integer_translation_matches_index_shift() {
        let f = ramp(10, 12);
        let (w, m) = warp(&f, &Homography::translation(2.0, 0.0)).unwrap();
        for r in 0..10 {
            for c in 0..12 {
                if c >= 2 {
                    assert!(*m.get(r, c));
                    assert_eq!(w.get(r, c), f.get(r, c - 2));
                } else {
                    assert!(!*m.get(r, c));
                }
            }
        }
    }

    #[test]
    fn singular_homography_fails() {
        let h = Homography::new(nalgebra::Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0)).unwrap();
        assert!(warp(&ramp(3, 3), &h).is_ok());
        // a non-invertible projective map cannot be constructed at all
        assert!(matches!(
            Homography::from_rows([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]]),
            Err(Error::SingularHomography(_))
        ));
    }

    #[test]
    fn source_mask_propagates() {
        let f = ramp(6, 6);
        let mut src = Mask::all_true(6, 6);
        *src.get_mut(3, 3) = false;
        let (_, m) = warp_masked(&f, Some(&src), &Homography::identity()).unwrap();
        assert!(!*m.get(3, 3));
        assert_eq!(m.count_true(), 35);
        let (_, m) = warp_masked(&f, Some(&src), &Homography::translation(0.5, 0.0)).unwrap();
        assert!(!*m.get(3, 3) && !*m.get(3, 4));
    }

    #[test]
    fn roundtrip_through_inverse() {
        let f = Grid::from_fn(40, 48, |r, c| 0.5 + 0.25 * (c as f64 / 12.0).sin() + 0.25 * (r as f64 / 10.0).cos());
        let h = Homography::from_rows([[1.02, 0.03, 3.4], [-0.02, 0.99, -2.7], [1e-4, -5e-5, 1.0]]).unwrap();
        let (fwd, m1) = warp(&f, &h).unwrap();
        let (back, m2) = warp_masked(&fwd, Some(&m1), &h.inverse().unwrap()).unwrap();
        assert!(m2.count_true() > 40 * 48 / 2);
        for r in 0..40 {
            for c in 0..48 {
                if *m2.get(r, c) {
                    assert!((back.get(r, c) - f.get(r, c)).abs() < 1e-3, "({r},{c})");
                }
            }
        }
    }
}
