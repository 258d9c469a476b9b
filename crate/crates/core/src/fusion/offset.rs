//! Scalar offset polynomial in frame means and ambient temperature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lstsq::LeastSquares;

pub const DEFAULT_NU: usize = 4;

/// `d̃ = (1/N)·Σₙ Σᵢⱼ δᵢⱼ·meanₙⁱ·t_ambʲ`, `i, j = 0..=ν`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetModel {
    pub nu: usize,
    /// `delta[i][j]` multiplies `meanⁱ·t_ambʲ`.
    pub delta: Vec<Vec<f64>>,
}

impl OffsetModel {
    pub fn new(nu: usize, delta: Vec<Vec<f64>>) -> Result<Self> {
        let m = Self { nu, delta };
        m.validate()?;
        Ok(m)
    }

    pub fn zeros(nu: usize) -> Self {
        Self {
            nu,
            delta: vec![vec![0.0; nu + 1]; nu + 1],
        }
    }

    pub fn constant(value: f64) -> Self {
        Self {
            nu: 0,
            delta: vec![vec![value]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta.len() != self.nu + 1 || self.delta.iter().any(|row| row.len() != self.nu + 1) {
            return Err(Error::Config(format!(
                "offset model of degree {} needs a {}x{} delta matrix",
                self.nu,
                self.nu + 1,
                self.nu + 1
            )));
        }
        if self.delta.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Config("offset model has non-finite coefficients".into()));
        }
        Ok(())
    }

    fn flat(&self) -> Vec<f64> {
        self.delta.iter().flatten().copied().collect()
    }
}

/// Monomials `meanⁱ·t_ambʲ` averaged over frames, ordered like
/// `delta.iter().flatten()`.
pub fn offset_features(frame_means: &[f64], t_amb: f64, nu: usize) -> Vec<f64> {
    let n = frame_means.len() as f64;
    let mut feats = vec![0.0; (nu + 1) * (nu + 1)];
    for &m in frame_means {
        let mut mi = 1.0;
        for i in 0..=nu {
            let mut tj = 1.0;
            for j in 0..=nu {
                feats[i * (nu + 1) + j] += mi * tj;
                tj *= t_amb;
            }
            mi *= m;
        }
    }
    for f in &mut feats {
        *f /= n;
    }
    feats
}

pub fn offset_eval(frame_means: &[f64], t_amb: f64, om: &OffsetModel) -> Result<f64> {
    if frame_means.is_empty() {
        return Err(Error::Domain("offset needs at least one frame mean".into()));
    }
    om.validate()?;
    let feats = offset_features(frame_means, t_amb, om.nu);
    Ok(feats.iter().zip(om.flat()).map(|(f, d)| f * d).sum())
}

/// One training example for the offset fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetSample {
    pub frame_means: Vec<f64>,
    pub t_amb: f64,
    pub target: f64,
}

/// Fitted model with its training residual.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetFit {
    pub model: OffsetModel,
    pub residual_rms: f64,
    pub residuals: Vec<f64>,
}

pub fn fit_offset(samples: &[OffsetSample], nu: usize) -> Result<OffsetFit> {
    let p = (nu + 1) * (nu + 1);
    if samples.len() < p {
        return Err(Error::Fit(format!(
            "offset model of degree {nu} needs at least {p} samples, got {}",
            samples.len()
        )));
    }
    let mut design = Vec::with_capacity(samples.len() * p);
    for s in samples {
        if s.frame_means.is_empty() {
            return Err(Error::Fit("offset sample without frame means".into()));
        }
        design.extend(offset_features(&s.frame_means, s.t_amb, nu));
    }
    let targets: Vec<f64> = samples.iter().map(|s| s.target).collect();
    let ls = LeastSquares::new(samples.len(), p, &design)?;
    let coeffs = ls.solve(&targets);
    let residuals = ls.residual(&coeffs, &targets);
    let residual_rms = (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt();
    let delta = coeffs.chunks(nu + 1).map(|c| c.to_vec()).collect();
    Ok(OffsetFit {
        model: OffsetModel::new(nu, delta)?,
        residual_rms,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::burst::seeded_rng;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn random_samples(rng: &mut impl Rng, count: usize, n: usize) -> Vec<(Vec<f64>, f64)> {
        (0..count)
            .map(|_| {
                let means = (0..n).map(|_| rng.random_range(0.2..0.6)).collect();
                (means, rng.random_range(-10.0..50.0))
            })
            .collect()
    }

    #[test]
    fn constant_polynomial() {
        let om = OffsetModel::constant(0.37);
        assert_eq!(offset_eval(&[0.1, 0.9], 25.0, &om).unwrap(), 0.37);
        assert!(offset_eval(&[], 25.0, &om).is_err());
    }

    #[test]
    fn equal_means_match_single_frame() {
        let om = OffsetModel::new(2, vec![vec![0.1, 0.2, 0.01], vec![1.0, -0.3, 0.0], vec![0.5, 0.0, 0.002]]).unwrap();
        let one = offset_eval(&[0.4], 12.0, &om).unwrap();
        let many = offset_eval(&[0.4; 5], 12.0, &om).unwrap();
        assert!((one - many).abs() < 1e-15);
    }

    #[test]
    fn roundtrip_known_model() {
        let mut rng = seeded_rng(1, 0);
        let truth = OffsetModel::new(
            4,
            (0..5).map(|i| (0..5).map(|j| rng.random_range(-1.0..1.0) / (1.0 + (i + 3 * j) as f64)).collect()).collect(),
        )
        .unwrap();
        let samples: Vec<OffsetSample> = random_samples(&mut rng, 200, 3)
            .into_iter()
            .map(|(m, t)| {
                let target = offset_eval(&m, t / 50.0, &truth).unwrap();
                OffsetSample { frame_means: m, t_amb: t / 50.0, target }
            })
            .collect();
        let fit = fit_offset(&samples, 4).unwrap();
        for (a, b) in fit.model.delta.iter().flatten().zip(truth.delta.iter().flatten()) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn nu_zero_is_mean_of_targets() {
        let samples: Vec<OffsetSample> = [1.0, 2.0, 6.0]
            .iter()
            .map(|&t| OffsetSample { frame_means: vec![0.3], t_amb: 10.0, target: t })
            .collect();
        let fit = fit_offset(&samples, 0).unwrap();
        assert!((fit.model.delta[0][0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn residual_orthogonal_and_noise_level() {
        let mut rng = seeded_rng(2, 0);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let samples: Vec<OffsetSample> = random_samples(&mut rng, 4000, 2)
            .into_iter()
            .map(|(m, t)| {
                let target = 0.3 + m[0] * m[1] - 0.002 * t + noise.sample(&mut rng);
                OffsetSample { frame_means: m, t_amb: t, target }
            })
            .collect();
        let fit = fit_offset(&samples, 2).unwrap();
        assert!((fit.residual_rms - 0.05).abs() < 0.05 * 0.05, "{}", fit.residual_rms);
        for col in 0..9 {
            let dot: f64 = samples
                .iter()
                .zip(&fit.residuals)
                .map(|(s, r)| offset_features(&s.frame_means, s.t_amb, 2)[col] * r)
                .sum();
            let norm: f64 = samples.iter().map(|s| offset_features(&s.frame_means, s.t_amb, 2)[col].powi(2)).sum::<f64>().sqrt();
            assert!(dot.abs() < 1e-9 * norm * (samples.len() as f64).sqrt(), "col {col}: {dot}");
        }
    }

    #[test]
    fn rank_deficiency_and_too_few_samples() {
        let s = OffsetSample { frame_means: vec![0.3], t_amb: 10.0, target: 1.0 };
        assert!(matches!(fit_offset(&vec![s.clone(); 30], 1), Err(Error::Fit(_))));
        assert!(matches!(fit_offset(&vec![s; 3], 1), Err(Error::Fit(_))));
    }

    #[test]
    fn json_shape() {
        let om = OffsetModel::zeros(1);
        let s = serde_json::to_string(&om).unwrap();
        assert_eq!(s, r#"{"nu":1,"delta":[[0.0,0.0],[0.0,0.0]]}"#);
        assert!(serde_json::from_str::<OffsetModel>(r#"{"nu":1,"delta":[[0.0]]}"#).unwrap().validate().is_err());
    }
}
