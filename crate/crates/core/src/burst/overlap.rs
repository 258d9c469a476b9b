//! Area overlap between a projected frame and the pivot frame.

use super::Homography;

type Point = (f64, f64);

/// Fraction of the pivot rectangle `[0, cols] × [0, rows]` covered by the
/// source rectangle mapped through `h` (source → pivot).
///
/// Returns 0 for degenerate projections: a corner behind the camera, a
/// non-convex or zero-area quadrilateral.
pub fn overlap(h: &Homography, dims: (usize, usize)) -> f64 {
    let (rows, cols) = dims;
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    let (w, hgt) = (cols as f64, rows as f64);
    let corners = [(0.0, 0.0), (w, 0.0), (w, hgt), (0.0, hgt)];
    let mut quad = Vec::with_capacity(4);
    for &(x, y) in &corners {
        if h.depth(x, y) <= 0.0 {
            return 0.0;
        }
        match h.apply(x, y) {
            Some(p) if p.0.is_finite() && p.1.is_finite() => quad.push(p),
            _ => return 0.0,
        }
    }
    let quad_area = signed_area(&quad);
    if quad_area.abs() < 1e-12 || !is_convex(&quad) {
        return 0.0;
    }
    if quad_area < 0.0 {
        quad.reverse();
    }
    let clipped = clip_to_rect(&quad, w, hgt);
    (signed_area(&clipped).abs() / (w * hgt)).clamp(0.0, 1.0)
}

pub(crate) fn signed_area(poly: &[Point]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..poly.len() {
        let (x0, y0) = poly[i];
        let (x1, y1) = poly[(i + 1) % poly.len()];
        s += x0 * y1 - x1 * y0;
    }
    0.5 * s
}

fn is_convex(poly: &[Point]) -> bool {
    let n = poly.len();
    let mut sign = 0.0f64;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let c = poly[(i + 2) % n];
        let cross = (b.0 - a.0) * (c.1 - b.1) - (b.1 - a.1) * (c.0 - b.0);
        if cross.abs() < 1e-12 {
            continue;
        }
        if sign == 0.0 {
            sign = cross.signum();
        } else if cross.signum() != sign {
            return false;
        }
    }
    sign != 0.0
}

/// Sutherland-Hodgman clip of a polygon against `[0, w] × [0, h]`.
fn clip_to_rect(poly: &[Point], w: f64, h: f64) -> Vec<Point> {
    // each edge: inside test and intersection with the boundary line
    let edges: [(fn(Point, f64) -> bool, fn(Point, Point, f64) -> Point, f64); 4] = [
        (|p, _| p.0 >= 0.0, |a, b, _| lerp_at_x(a, b, 0.0), 0.0),
        (|p, w| p.0 <= w, |a, b, w| lerp_at_x(a, b, w), w),
        (|p, _| p.1 >= 0.0, |a, b, _| lerp_at_y(a, b, 0.0), 0.0),
        (|p, h| p.1 <= h, |a, b, h| lerp_at_y(a, b, h), h),
    ];
    let mut out = poly.to_vec();
    for (inside, cut, bound) in edges {
        if out.is_empty() {
            break;
        }
        let input = std::mem::take(&mut out);
        for i in 0..input.len() {
            let cur = input[i];
            let prev = input[(i + input.len() - 1) % input.len()];
            let (cin, pin) = (inside(cur, bound), inside(prev, bound));
            if cin {
                if !pin {
                    out.push(cut(prev, cur, bound));
                }
                out.push(cur);
            } else if pin {
                out.push(cut(prev, cur, bound));
            }
        }
    }
    out
}

fn lerp_at_x(a: Point, b: Point, x: f64) -> Point {
    let t = (x - a.0) / (b.0 - a.0);
    (x, a.1 + t * (b.1 - a.1))
}

fn lerp_at_y(a: Point, b: Point, y: f64) -> Point {
    let t = (y - a.1) / (b.1 - a.1);
    (a.0 + t * (b.0 - a.0), y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_disjoint() {
        assert_eq!(overlap(&Homography::identity(), (48, 64)), 1.0);
        assert_eq!(overlap(&Homography::translation(64.0, 0.0), (48, 64)), 0.0);
        assert_eq!(overlap(&Homography::translation(0.0, -48.0), (48, 64)), 0.0);
    }

    #[test]
    fn half_width_translation() {
        let o = overlap(&Homography::translation(32.0, 0.0), (48, 64));
        assert!((o - 0.5).abs() < 1e-9);
        let o = overlap(&Homography::translation(-10.0, 12.0), (48, 64));
        let expected = (1.0 - 10.0 / 64.0) * (1.0 - 12.0 / 48.0);
        assert!((o - expected).abs() < 1e-12);
    }

    #[test]
    fn scaled_down_frame_inside() {
        let h = Homography::from_rows([[0.5, 0.0, 10.0], [0.0, 0.5, 10.0], [0.0, 0.0, 1.0]]).unwrap();
        assert!((overlap(&h, (40, 40)) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn degenerate_projection_is_zero() {
        // corner (w, h) maps behind the camera
        let h = Homography::from_rows([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-0.02, -0.02, 1.0]]).unwrap();
        assert_eq!(overlap(&h, (64, 64)), 0.0);
    }

    #[test]
    fn rotation_about_center_loses_corners() {
        let (cx, cy) = (32.0, 32.0);
        let th: f64 = 0.3;
        let (s, c) = th.sin_cos();
        let h = Homography::from_rows([
            [c, -s, cx - c * cx + s * cy],
            [s, c, cy - s * cx - c * cy],
            [0.0, 0.0, 1.0],
        ])
        .unwrap();
        let o = overlap(&h, (64, 64));
        assert!(o > 0.7 && o < 1.0, "{o}");
    }
}
