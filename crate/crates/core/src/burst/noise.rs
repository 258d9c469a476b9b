//! Seeded randomness: fixed-pattern noise, temporal noise and the stream
//! layout shared by the burst generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Independent random streams derived from one seed.
pub mod stream {
    pub const PATH: u64 = 1;
    pub const PERTURB: u64 = 2;
    pub const FPN: u64 = 3;
    pub const AUGMENT: u64 = 4;
    pub const SCENE: u64 = 5;
    /// Frame `i` draws its noise from `NOISE_BASE + i`.
    pub const NOISE_BASE: u64 = 1 << 32;
}

/// Deterministic generator for `(seed, stream)`.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Column fixed-pattern multipliers: every row equals one row vector whose
/// entries are i.i.d. uniform in `[u_min, u_max]`.
pub fn generate_fpn(h: usize, w: usize, u_min: f64, u_max: f64, seed: u64) -> Result<Grid<f64>> {
    let mut rng = seeded_rng(seed, stream::FPN);
    fpn_from_rng(h, w, u_min, u_max, &mut rng)
}

pub(crate) fn fpn_from_rng(h: usize, w: usize, u_min: f64, u_max: f64, rng: &mut impl Rng) -> Result<Grid<f64>> {
    if !(u_min.is_finite() && u_max.is_finite() && u_min <= u_max) {
        return Err(Error::Domain(format!("FPN range must satisfy min <= max, got [{u_min}, {u_max}]")));
    }
    let row: Vec<f64> = (0..w)
        .map(|_| if u_min == u_max { u_min } else { rng.random_range(u_min..=u_max) })
        .collect();
    Ok(Grid::from_fn(h, w, |_, c| row[c]))
}

/// Add i.i.d. zero-mean Gaussian noise of variance `sigma2`.
pub fn add_noise(frame: &Grid<f64>, sigma2: f64, seed: u64) -> Result<Grid<f64>> {
    let mut rng = seeded_rng(seed, stream::NOISE_BASE);
    add_noise_with(frame, sigma2, &mut rng)
}

pub(crate) fn add_noise_with(frame: &Grid<f64>, sigma2: f64, rng: &mut impl Rng) -> Result<Grid<f64>> {
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::Domain(format!("noise variance must be >= 0, got {sigma2}")));
    }
    if sigma2 == 0.0 {
        return Ok(frame.clone());
    }
    let normal = Normal::new(0.0, sigma2.sqrt()).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(frame.map(|&v| v + normal.sample(rng)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fpn_properties() {
        let f = generate_fpn(17, 40, 0.9, 1.01, 42).unwrap();
        for c in 0..40 {
            let v = *f.get(0, c);
            assert!((0.9..=1.01).contains(&v));
            for r in 1..17 {
                assert_eq!(*f.get(r, c), v);
            }
        }
        assert_eq!(f, generate_fpn(17, 40, 0.9, 1.01, 42).unwrap());
        assert_ne!(f, generate_fpn(17, 40, 0.9, 1.01, 43).unwrap());
        let ones = generate_fpn(5, 6, 1.0, 1.0, 7).unwrap();
        assert!(ones.iter().all(|&v| v == 1.0));
        assert!(generate_fpn(2, 2, 1.0, 0.5, 1).is_err());
    }

    #[test]
    fn zero_variance_is_identity() {
        let f = Grid::from_fn(4, 4, |r, c| (r + c) as f64);
        assert_eq!(add_noise(&f, 0.0, 1).unwrap(), f);
        assert!(add_noise(&f, -1.0, 1).is_err());
    }

    #[test]
    fn noise_moments() {
        let n = 1000;
        let clean = Grid::filled(n, n, 8000.0);
        let noisy = add_noise(&clean, 5.0, 42).unwrap();
        let diffs: Vec<f64> = noisy.iter().map(|v| v - 8000.0).collect();
        let count = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / count;
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (count - 1.0);
        assert!(mean.abs() < 3.0 * 5.0f64.sqrt() / count.sqrt(), "{mean}");
        assert!((var - 5.0).abs() < 0.05 * 5.0, "{var}");
        assert_eq!(noisy, add_noise(&clean, 5.0, 42).unwrap());
    }
}
