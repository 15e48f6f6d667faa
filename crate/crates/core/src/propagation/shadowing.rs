//! Log-normal shadowing: Gaussian in dB, log-normal in linear power.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `10 / ln 10`, the dB ↔ natural-log conversion constant.
pub const XI: f64 = 10.0 / std::f64::consts::LN_10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShadowingSpec {
    pub sigma_db: f64,
    #[serde(default)]
    pub mean_db: f64,
}

impl ShadowingSpec {
    pub fn new(sigma_db: f64) -> Result<Self> {
        let spec = Self { sigma_db, mean_db: 0.0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_db > 0.0 && self.sigma_db.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "shadowing sigma must be positive, got {}",
                self.sigma_db
            )));
        }
        if !self.mean_db.is_finite() {
            return Err(Error::InvalidParameter("shadowing mean must be finite".into()));
        }
        Ok(())
    }
}

/// Density of the linear-scale shadowing factor `ε > 0`.
pub fn shadowing_pdf(spec: &ShadowingSpec, eps_linear: f64) -> Result<f64> {
    spec.validate()?;
    if !(eps_linear > 0.0) {
        return Err(Error::NonPositiveArgument(eps_linear));
    }
    let z = 10.0 * eps_linear.log10() - spec.mean_db;
    let norm = XI / ((2.0 * std::f64::consts::PI).sqrt() * spec.sigma_db * eps_linear);
    Ok(norm * (-z * z / (2.0 * spec.sigma_db * spec.sigma_db)).exp())
}

/// `count` draws of the dB-domain shadowing term, reproducible per seed.
pub fn sample_shadowing(spec: &ShadowingSpec, seed: u64, count: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_with(spec, &mut rng, count))
}

pub(crate) fn sample_with<R: rand::Rng + ?Sized>(spec: &ShadowingSpec, rng: &mut R, count: usize) -> Vec<f64> {
    let normal = Normal::new(spec.mean_db, spec.sigma_db).expect("validated sigma");
    (0..count).map(|_| normal.sample(rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_value() {
        let spec = ShadowingSpec { sigma_db: 9.0, mean_db: 3.0 };
        let eps = 10f64.powf(0.3);
        let expected = XI / ((2.0 * std::f64::consts::PI).sqrt() * 9.0 * eps);
        assert!((shadowing_pdf(&spec, eps).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_arguments() {
        let spec = ShadowingSpec::new(9.0).unwrap();
        assert!(matches!(shadowing_pdf(&spec, 0.0), Err(Error::NonPositiveArgument(_))));
        assert!(shadowing_pdf(&spec, -1.0).is_err());
        assert!(ShadowingSpec::new(0.0).is_err());
    }

    #[test]
    fn change_of_variables() {
        // p_lin(ε) = φ_dB(10·log10 ε) · d(10·log10 ε)/dε, with the derivative ξ/ε.
        for spec in [ShadowingSpec { sigma_db: 9.0, mean_db: 0.0 }, ShadowingSpec { sigma_db: 2.5, mean_db: -4.0 }] {
            for k in -40..=40 {
                let eps = 10f64.powf(f64::from(k) / 10.0);
                let x = 10.0 * eps.log10();
                let phi = (-(x - spec.mean_db).powi(2) / (2.0 * spec.sigma_db.powi(2))).exp()
                    / (spec.sigma_db * (2.0 * std::f64::consts::PI).sqrt());
                let via_transform = phi * 10.0 / (eps * std::f64::consts::LN_10);
                let direct = shadowing_pdf(&spec, eps).unwrap();
                assert!((direct - via_transform).abs() <= 1e-9 * via_transform.max(1e-300));
            }
        }
    }

    #[test]
    fn seeded_sampling() {
        let spec = ShadowingSpec::new(9.0).unwrap();
        let a = sample_shadowing(&spec, 7, 1000).unwrap();
        let b = sample_shadowing(&spec, 7, 1000).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_shadowing(&spec, 8, 1000).unwrap());
        assert!(sample_shadowing(&spec, 7, 0).unwrap().is_empty());
    }
}
