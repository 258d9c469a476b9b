//! Synthetic temperature scenes.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, TemperatureMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    /// One temperature everywhere.
    Constant,
    /// Gradient plus a few warm and cold blobs.
    #[default]
    Smooth,
}

/// Draw a scene whose values lie in `[lo, hi]` °C.
pub fn random_scene(kind: SceneKind, rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> Result<TemperatureMap> {
    if rows == 0 || cols == 0 {
        return Err(Error::Domain("scene dimensions must be positive".into()));
    }
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::Domain(format!("scene range must satisfy min <= max, got [{lo}, {hi}]")));
    }
    let draw = |rng: &mut dyn rand::RngCore, a: f64, b: f64| if a == b { a } else { rng.random_range(a..b) };
    match kind {
        SceneKind::Constant => Ok(Grid::filled(rows, cols, draw(rng, lo, hi))),
        SceneKind::Smooth => {
            let span = hi - lo;
            let base = draw(rng, lo + 0.2 * span, lo + 0.8 * span);
            let angle = draw(rng, 0.0, 2.0 * PI);
            let slope = draw(rng, 0.0, 0.3 * span);
            let size = rows.max(cols) as f64;
            let blobs: Vec<(f64, f64, f64, f64)> = (0..4)
                .map(|_| {
                    (
                        draw(rng, 0.0, cols as f64),
                        draw(rng, 0.0, rows as f64),
                        draw(rng, 0.05 * size, 0.25 * size),
                        draw(rng, -0.5 * span, 0.5 * span),
                    )
                })
                .collect();
            let (s, c) = angle.sin_cos();
            Ok(Grid::from_fn(rows, cols, |r, col| {
                let (x, y) = (col as f64, r as f64);
                let u = ((x - cols as f64 / 2.0) * c + (y - rows as f64 / 2.0) * s) / size;
                let mut v = base + slope * u;
                for &(bx, by, rad, amp) in &blobs {
                    let d2 = (x - bx).powi(2) + (y - by).powi(2);
                    v += amp * (-d2 / (2.0 * rad * rad)).exp();
                }
                v.clamp(lo, hi)
            }))
        }
    }
}
