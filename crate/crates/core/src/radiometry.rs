//! Emission and acquisition physics: Planck's law, the Stefan-Boltzmann law
//! for gray bodies, incident power on the detector, its affine expansion
//! around a reference temperature, and the ambient-dependent gray-level
//! model.
//!
//! Temperatures are in Kelvin where a parameter or field name says so and in
//! °C everywhere else.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Offset between the Kelvin and Celsius scales.
pub const KELVIN_OFFSET: f64 = 273.15;

pub fn celsius_to_kelvin(t: f64) -> f64 {
    t + KELVIN_OFFSET
}

pub fn kelvin_to_celsius(t: f64) -> f64 {
    t - KELVIN_OFFSET
}

/// CODATA 2018 values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Planck constant, J·s.
    pub h: f64,
    /// Speed of light, m/s.
    pub c: f64,
    /// Boltzmann constant, J/K.
    pub k: f64,
    /// Stefan-Boltzmann constant, W·m⁻²·K⁻⁴.
    pub sigma: f64,
}

impl PhysicalConstants {
    pub const CODATA_2018: PhysicalConstants = PhysicalConstants {
        h: 6.626_070_15e-34,
        c: 299_792_458.0,
        k: 1.380_649e-23,
        sigma: 5.670_374_419e-8,
    };
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::CODATA_2018
    }
}

/// A gray-body emitter as seen by the detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Emission {
    temperature_kelvin: f64,
    emissivity: f64,
    gamma: f64,
}

impl Emission {
    /// `gamma` is the geometric coupling between object and detector; zero
    /// is accepted and yields no incident power.
    pub fn new(temperature_kelvin: f64, emissivity: f64, gamma: f64) -> Result<Self> {
        if !(temperature_kelvin.is_finite() && temperature_kelvin > 0.0) {
            return Err(Error::Domain(format!(
                "temperature must be > 0 K, got {temperature_kelvin}"
            )));
        }
        if !(0.0..=1.0).contains(&emissivity) {
            return Err(Error::Domain(format!("emissivity must be in [0, 1], got {emissivity}")));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::Domain(format!("gamma must be finite and >= 0, got {gamma}")));
        }
        Ok(Self {
            temperature_kelvin,
            emissivity,
            gamma,
        })
    }

    pub fn blackbody(temperature_kelvin: f64) -> Result<Self> {
        Self::new(temperature_kelvin, 1.0, 1.0)
    }

    pub fn temperature_kelvin(&self) -> f64 {
        self.temperature_kelvin
    }

    pub fn temperature_celsius(&self) -> f64 {
        kelvin_to_celsius(self.temperature_kelvin)
    }

    pub fn emissivity(&self) -> f64 {
        self.emissivity
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn with_temperature(&self, temperature_kelvin: f64) -> Result<Self> {
        Self::new(temperature_kelvin, self.emissivity, self.gamma)
    }
}

/// First-order expansion `gain·ΔT + offset` of the incident power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineCoefficients {
    pub gain: f64,
    pub offset: f64,
}

impl AffineCoefficients {
    pub fn eval(&self, delta: f64) -> f64 {
        self.gain * delta + self.offset
    }
}

/// Blackbody spectral exitance `2πhc²/λ⁵ · 1/(exp(hc/λkT) − 1)`.
///
/// Underflows smoothly to zero when the exponent is huge.
pub fn planck_spectral_density(t_kelvin: f64, wavelength: f64, consts: &PhysicalConstants) -> Result<f64> {
    if !(t_kelvin.is_finite() && t_kelvin > 0.0) {
        return Err(Error::Domain(format!("temperature must be > 0 K, got {t_kelvin}")));
    }
    if !(wavelength.is_finite() && wavelength > 0.0) {
        return Err(Error::Domain(format!("wavelength must be > 0 m, got {wavelength}")));
    }
    let PhysicalConstants { h, c, k, .. } = *consts;
    let x = h * c / (wavelength * k * t_kelvin);
    let prefactor = 2.0 * PI * h * c * c / wavelength.powi(5);
    // exp_m1 keeps the Rayleigh-Jeans end accurate
    Ok(prefactor / x.exp_m1())
}

/// `σ·ε·T⁴`.
pub fn band_power(emission: &Emission, consts: &PhysicalConstants) -> f64 {
    consts.sigma * emission.emissivity * emission.temperature_kelvin.powi(4)
}

/// `γ·σ·ε·T⁴`.
pub fn incident_power(emission: &Emission, consts: &PhysicalConstants) -> f64 {
    emission.gamma * band_power(emission, consts)
}

/// Linearize the incident power of `emission`'s material around `t0_kelvin`:
/// `gain = 4γεσT₀³`, `offset = γεσT₀⁴`.
pub fn affine_expand(t0_kelvin: f64, emission: &Emission, consts: &PhysicalConstants) -> Result<AffineCoefficients> {
    if !(t0_kelvin.is_finite() && t0_kelvin > 0.0) {
        return Err(Error::Domain(format!("reference temperature must be > 0 K, got {t0_kelvin}")));
    }
    let scale = emission.gamma * emission.emissivity * consts.sigma;
    Ok(AffineCoefficients {
        gain: 4.0 * scale * t0_kelvin.powi(3),
        offset: scale * t0_kelvin.powi(4),
    })
}

/// `I = g(t_amb)·t_obj + d(t_amb)`.
pub fn gray_level(t_obj: f64, t_amb: f64, gain_fn: impl Fn(f64) -> f64, offset_fn: impl Fn(f64) -> f64) -> f64 {
    gain_fn(t_amb) * t_obj + offset_fn(t_amb)
}

/// Lower and upper wavelength bounds (m) used by [`integrated_exitance`].
pub const BAND_LIMITS: (f64, f64) = (0.1e-6, 1000e-6);

/// Integrate Planck's law over `[lo, hi]` metres with adaptive Simpson
/// quadrature in log-wavelength.
///
/// Over [`BAND_LIMITS`] the truncated tails are below 1e-4 of `σT⁴` for
/// 200–400 K: the short tail is suppressed exponentially and the long tail is
/// bounded by the Rayleigh-Jeans estimate `2πckT/(3λ³)`.
pub fn integrated_exitance(t_kelvin: f64, lo: f64, hi: f64, consts: &PhysicalConstants, rel_tol: f64) -> Result<f64> {
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Domain(format!("invalid band [{lo}, {hi}]")));
    }
    planck_spectral_density(t_kelvin, lo, consts)?;
    let f = |u: f64| {
        let lambda = u.exp();
        planck_spectral_density(t_kelvin, lambda, consts).unwrap_or(0.0) * lambda
    };
    let (a, b) = (lo.ln(), hi.ln());
    // a coarse pass fixes the absolute tolerance
    let coarse = simpson(&f, a, b, 64);
    let tol = (coarse.abs() * rel_tol).max(f64::MIN_POSITIVE);
    Ok(adaptive_simpson(&f, a, b, tol, 50))
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    const C: PhysicalConstants = PhysicalConstants::CODATA_2018;

    // Frozen from a 40-digit evaluation with CODATA 2018 constants.
    const PLANCK_300K_10UM: f64 = 31_177_270.203_730_346;
    const SIGMA_300K4: f64 = 459.300_327_939;
    const AFFINE_SUP_REL_ERR_30K: f64 = 0.085_505_258_344_764_52;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn planck_reference_value() {
        let v = planck_spectral_density(300.0, 10e-6, &C).unwrap();
        assert!(rel(v, PLANCK_300K_10UM) < 1e-12, "{v}");
    }

    #[test]
    fn planck_underflows_to_zero() {
        let v = planck_spectral_density(1.0, 1e-6, &C).unwrap();
        assert_eq!(v, 0.0);
        let mut prev = 0.0;
        for t in [2.0, 20.0, 50.0, 100.0] {
            let v = planck_spectral_density(t, 1e-6, &C).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn planck_rejects_bad_inputs() {
        assert!(planck_spectral_density(0.0, 1e-6, &C).is_err());
        assert!(planck_spectral_density(300.0, -1e-6, &C).is_err());
        assert!(planck_spectral_density(f64::NAN, 1e-6, &C).is_err());
    }

    #[test]
    fn planck_strictly_increasing_in_temperature() {
        for &lambda in &[3e-6, 8e-6, 10e-6, 14e-6, 100e-6] {
            let mut prev = 0.0;
            for i in 0..200 {
                let t = 150.0 + i as f64 * 2.0;
                let v = planck_spectral_density(t, lambda, &C).unwrap();
                assert!(v > prev, "T={t} λ={lambda}");
                prev = v;
            }
        }
    }

    #[test]
    fn band_power_cases() {
        let e0 = Emission::new(300.0, 0.0, 1.0).unwrap();
        assert_eq!(band_power(&e0, &C), 0.0);
        let e1 = Emission::blackbody(300.0).unwrap();
        assert!(rel(band_power(&e1, &C), SIGMA_300K4) < 1e-12);
        let e2 = Emission::blackbody(600.0).unwrap();
        assert!(rel(band_power(&e2, &C), 16.0 * band_power(&e1, &C)) < 1e-15);
    }

    #[test]
    fn incident_power_scales_with_gamma() {
        let base = Emission::new(290.0, 0.95, 1.0).unwrap();
        assert_eq!(incident_power(&base, &C), band_power(&base, &C));
        let zero = Emission::new(290.0, 0.95, 0.0).unwrap();
        assert_eq!(incident_power(&zero, &C), 0.0);
        let two = Emission::new(290.0, 0.95, 2.0).unwrap();
        assert_eq!(incident_power(&two, &C), 2.0 * band_power(&base, &C));
    }

    #[test]
    fn emission_validation() {
        assert!(Emission::new(0.0, 0.5, 1.0).is_err());
        assert!(Emission::new(300.0, 1.1, 1.0).is_err());
        assert!(Emission::new(300.0, -0.1, 1.0).is_err());
        assert!(Emission::new(300.0, 0.5, -1.0).is_err());
        let e = Emission::new(celsius_to_kelvin(25.0), 0.9, 1.0).unwrap();
        assert!((e.temperature_celsius() - 25.0).abs() < 1e-12);
    }

    #[test]
    fn affine_expansion_point_and_ratio() {
        let e = Emission::new(300.0, 0.9, 1.7).unwrap();
        let a = affine_expand(300.0, &e, &C).unwrap();
        assert!(rel(a.eval(0.0), incident_power(&e, &C)) < 1e-15);
        assert!(rel(a.gain / a.offset, 4.0 / 300.0) < 1e-15);
        assert!(affine_expand(0.0, &e, &C).is_err());
    }

    #[test]
    fn affine_error_bound_over_30k() {
        let e = Emission::blackbody(300.0).unwrap();
        let a = affine_expand(300.0, &e, &C).unwrap();
        let mut worst: f64 = 0.0;
        for i in -3000..=3000 {
            let dt = i as f64 / 100.0;
            let quartic = incident_power(&e.with_temperature(300.0 + dt).unwrap(), &C);
            worst = worst.max(((a.eval(dt) - quartic) / quartic).abs());
        }
        assert!(rel(worst, AFFINE_SUP_REL_ERR_30K) < 1e-9, "{worst}");
    }

    #[test]
    fn gray_level_model() {
        assert_eq!(gray_level(37.0, 20.0, |_| 0.0, |ta| 100.0 + ta), 120.0);
        let i1 = gray_level(10.0, 5.0, |_| 3.0, |_| 7.0);
        let i2 = gray_level(20.0, 5.0, |_| 3.0, |_| 7.0);
        let i3 = gray_level(30.0, 5.0, |_| 3.0, |_| 7.0);
        assert_eq!(i2 - i1, i3 - i2);
    }

    #[test]
    fn integral_matches_stefan_boltzmann() {
        for t in [250.0, 275.0, 300.0, 325.0, 350.0] {
            let (lo, hi) = BAND_LIMITS;
            let integral = integrated_exitance(t, lo, hi, &C, 1e-10).unwrap();
            let closed = C.sigma * f64::powi(t, 4);
            assert!(rel(integral, closed) < 1e-2, "T={t}: {integral} vs {closed}");
            // truncation only loses the far tails
            assert!(rel(integral, closed) < 1e-4);
        }
    }
}
