use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Determinants with magnitude below this are treated as singular.
const SINGULAR_DET: f64 = 1e-12;

/// Invertible planar projective transform acting on `(x, y) = (col, row)`
/// pixel coordinates. Stored with `h₃₃ = 1` whenever that entry is nonzero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography(Matrix3<f64>);

impl Homography {
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("homography has non-finite entries".into()));
        }
        let m = if m[(2, 2)] != 0.0 { m / m[(2, 2)] } else { m };
        let det = m.determinant();
        if det.abs() < SINGULAR_DET {
            return Err(Error::SingularHomography(det));
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self> {
        Self::new(Matrix3::from_fn(|r, c| rows[r][c]))
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        let mut m = Matrix3::identity();
        m[(0, 2)] = dx;
        m[(1, 2)] = dy;
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Entry at zero-based `(row, col)`.
    pub fn entry(&self, r: usize, c: usize) -> f64 {
        self.0[(r, c)]
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        std::array::from_fn(|r| std::array::from_fn(|c| self.0[(r, c)]))
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self
            .0
            .try_inverse()
            .ok_or_else(|| Error::SingularHomography(self.determinant()))?;
        Self::new(inv)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Homography) -> Result<Self> {
        Self::new(self.0 * other.0)
    }

    /// Map a point; `None` when it lands on or behind the line at infinity.
    pub fn apply(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let v = self.0 * Vector3::new(x, y, 1.0);
        if v.z.abs() < 1e-12 {
            return None;
        }
        Some((v.x / v.z, v.y / v.z))
    }

    /// Projective depth `w` of a mapped point (positive in front).
    pub(crate) fn depth(&self, x: f64, y: f64) -> f64 {
        self.0[(2, 0)] * x + self.0[(2, 1)] * y + self.0[(2, 2)]
    }

    pub fn is_identity(&self) -> bool {
        self.0 == Matrix3::identity()
    }
}

impl Default for Homography {
    fn default() -> Self {
        Self::identity()
    }
}

impl Serialize for Homography {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Homography {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = <[[f64; 3]; 3]>::deserialize(d)?;
        Homography::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_and_rejects_singular() {
        let h = Homography::from_rows([[2.0, 0.0, 4.0], [0.0, 2.0, 6.0], [0.0, 0.0, 2.0]]).unwrap();
        assert_eq!(h, Homography::translation(2.0, 3.0));
        assert!(matches!(
            Homography::from_rows([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0], [0.0, 0.0, 1.0]]),
            Err(Error::SingularHomography(_))
        ));
    }

    #[test]
    fn translation_inverse_is_exact() {
        let t = Homography::translation(2.0, -3.0);
        let inv = t.inverse().unwrap();
        assert_eq!(inv, Homography::translation(-2.0, 3.0));
        assert_eq!(t.compose(&inv).unwrap(), Homography::identity());
    }

    #[test]
    fn compose_and_inverse_roundtrip() {
        let a = Homography::from_rows([[1.01, 0.02, 3.0], [-0.01, 0.99, -1.5], [1e-4, -2e-4, 1.0]]).unwrap();
        let b = Homography::from_rows([[0.98, 0.0, -2.0], [0.03, 1.02, 0.5], [-5e-5, 1e-4, 1.0]]).unwrap();
        let c = Homography::translation(0.5, 0.25);
        let ab_c = a.compose(&b).unwrap().compose(&c).unwrap();
        let a_bc = a.compose(&b.compose(&c).unwrap()).unwrap();
        for (x, y) in [(0.0, 0.0), (10.0, 5.0), (63.0, 63.0)] {
            let p = ab_c.apply(x, y).unwrap();
            let q = a_bc.apply(x, y).unwrap();
            assert!((p.0 - q.0).abs() < 1e-9 && (p.1 - q.1).abs() < 1e-9);
            let back = a.inverse().unwrap().apply(a.apply(x, y).unwrap().0, a.apply(x, y).unwrap().1).unwrap();
            assert!((back.0 - x).abs() < 1e-9 && (back.1 - y).abs() < 1e-9);
        }
    }

    #[test]
    fn json_roundtrip_is_exact() {
        let a = Homography::from_rows([[1.0 / 3.0, 0.1, 2.5], [0.0, 0.7, -1e-7], [3e-5, -7.1e-5, 1.0]]).unwrap();
        let s = serde_json::to_string(&a).unwrap();
        let b: Homography = serde_json::from_str(&s).unwrap();
        assert_eq!(a, b);
    }
}
