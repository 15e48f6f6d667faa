//! Regression and link statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::{self, Observation};
use crate::propagation::PathLossModel;

/// LoRaWAN frame counters wrap at 2¹⁶ on air.
pub const FCNT_MODULUS: u64 = 1 << 16;

fn check_pair(actual: &[f64], predicted: &[f64]) -> Result<()> {
    if actual.len() != predicted.len() {
        return Err(Error::LengthMismatch { left: actual.len(), right: predicted.len() });
    }
    if actual.is_empty() {
        return Err(Error::Empty);
    }
    Ok(())
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Standard deviation with the uncorrected (1/N) second moment.
pub fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}

pub fn rmse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(actual, predicted)?;
    let sse: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p).powi(2)).sum();
    Ok((sse / actual.len() as f64).sqrt())
}

/// Coefficient of determination `1 − SS_res/SS_tot`. May be negative.
pub fn r_squared(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(actual, predicted)?;
    if actual.len() < 2 {
        return Err(Error::TooFewRecords { needed: 2, got: actual.len() });
    }
    let m = mean(actual);
    let ss_tot: f64 = actual.iter().map(|a| (a - m).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::ConstantActual);
    }
    let ss_res: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub mean: f64,
    /// Fisher–Pearson `g₁ = m₃ / m₂^{3/2}`; zero for a degenerate sample.
    pub skewness: f64,
    pub sigma: f64,
}

pub fn residual_stats(residuals: &[f64]) -> Result<ResidualStats> {
    if residuals.len() < 3 {
        return Err(Error::TooFewRecords { needed: 3, got: residuals.len() });
    }
    let n = residuals.len() as f64;
    let m = mean(residuals);
    let (m2, m3) = residuals.iter().fold((0.0, 0.0), |(s2, s3), r| {
        let d = r - m;
        (s2 + d * d, s3 + d * d * d)
    });
    let (m2, m3) = (m2 / n, m3 / n);
    let skewness = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };
    Ok(ResidualStats { mean: m, skewness, sigma: m2.sqrt() })
}

/// Packet delivery ratio from one device's frame counters, in arrival order.
///
/// A counter smaller than its predecessor is taken as a 16-bit wrap.
/// Duplicates count once.
pub fn pdr(frame_counters: &[u64]) -> Result<f64> {
    if frame_counters.is_empty() {
        return Err(Error::Empty);
    }
    let mut offset = 0;
    let mut prev = frame_counters[0];
    let mut unwrapped: Vec<u64> = Vec::with_capacity(frame_counters.len());
    for &c in frame_counters {
        if c < prev {
            offset += FCNT_MODULUS;
        }
        prev = c;
        unwrapped.push(c + offset);
    }
    let first = unwrapped[0];
    let last = *unwrapped.last().expect("non-empty");
    unwrapped.sort_unstable();
    unwrapped.dedup();
    let expected = last.saturating_sub(first) + 1;
    Ok(unwrapped.len() as f64 / expected as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rmse_db: f64,
    pub r2: f64,
    pub residual_mean_db: f64,
    pub residual_skewness: f64,
    pub shadowing_sigma_db: f64,
    pub n_observations: usize,
}

/// Scores `model` against measured path loss.
pub fn evaluate(model: &PathLossModel, observations: &[Observation]) -> Result<EvalReport> {
    let actual: Vec<f64> = observations.iter().map(|o| o.path_loss_db).collect();
    let predicted = observations
        .iter()
        .map(|o| fitting::predict(model, o))
        .collect::<Result<Vec<f64>>>()?;
    eval_from(&actual, &predicted)
}

pub(crate) fn eval_from(actual: &[f64], predicted: &[f64]) -> Result<EvalReport> {
    let residuals: Vec<f64> = actual.iter().zip(predicted).map(|(a, p)| a - p).collect();
    let stats = residual_stats(&residuals)?;
    Ok(EvalReport {
        rmse_db: rmse(actual, predicted)?,
        r2: r_squared(actual, predicted)?,
        residual_mean_db: stats.mean,
        residual_skewness: stats.skewness,
        shadowing_sigma_db: stats.sigma,
        n_observations: actual.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[0.0, 0.0], &[3.0, -3.0]).unwrap(), 3.0);
        assert!((rmse(&[1.0, 5.0, 9.0], &[3.5, 7.5, 11.5]).unwrap() - 2.5).abs() < 1e-12);
        assert!(matches!(rmse(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(rmse(&[], &[]), Err(Error::Empty)));
    }

    #[test]
    fn r2_examples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(r_squared(&a, &a).unwrap(), 1.0);
        assert_eq!(r_squared(&a, &[2.5; 4]).unwrap(), 0.0);
        assert!(r_squared(&a, &[4.0, 3.0, 2.0, 1.0]).unwrap() < 0.0);
        assert!(matches!(r_squared(&[2.0, 2.0], &[1.0, 3.0]), Err(Error::ConstantActual)));
    }

    #[test]
    fn residual_stats_examples() {
        assert_eq!(residual_stats(&[-1.0, 0.0, 1.0]).unwrap().skewness, 0.0);
        assert!(residual_stats(&[0.0, 0.0, 0.0, 9.0]).unwrap().skewness > 0.0);
        assert!(residual_stats(&[1.0, 2.0]).is_err());
        // [0,0,0,9]: mean 2.25, m2 = 15.1875, m3 = 68.34375 -> g1 = 68.34375 / 15.1875^1.5
        let s = residual_stats(&[0.0, 0.0, 0.0, 9.0]).unwrap();
        assert!((s.skewness - 68.343_75 / 15.1875f64.powf(1.5)).abs() < 1e-12);
        assert!((s.sigma - 15.1875f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn gaussian_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let normal = Normal::new(0.0, 8.0).unwrap();
        let draws: Vec<f64> = (0..1_000_000).map(|_| normal.sample(&mut rng)).collect();
        let s = residual_stats(&draws).unwrap();
        assert!(s.mean.abs() < 0.03, "{s:?}");
        assert!(s.skewness.abs() < 0.01, "{s:?}");
        assert!((s.sigma / 8.0 - 1.0).abs() < 0.005, "{s:?}");
    }

    #[test]
    fn pdr_examples() {
        assert_eq!(pdr(&[0, 1, 2, 3, 4]).unwrap(), 1.0);
        assert_eq!(pdr(&[0, 1, 3, 4]).unwrap(), 0.8);
        assert_eq!(pdr(&[65534, 65535, 0, 2]).unwrap(), 0.8);
        assert_eq!(pdr(&[7, 7, 8]).unwrap(), 1.0);
        assert!(matches!(pdr(&[]), Err(Error::Empty)));
    }

    proptest! {
        #[test]
        fn rmse_symmetric_and_translation_free(
            pairs in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 2..50),
            c in -50.0f64..50.0,
        ) {
            let (a, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let base = rmse(&a, &p).unwrap();
            prop_assert!((base - rmse(&p, &a).unwrap()).abs() < 1e-12);
            let ac: Vec<f64> = a.iter().map(|v| v + c).collect();
            let pc: Vec<f64> = p.iter().map(|v| v + c).collect();
            prop_assert!((base - rmse(&ac, &pc).unwrap()).abs() < 1e-9);
            if let Ok(r2) = r_squared(&a, &p) {
                prop_assert!((r2 - r_squared(&ac, &pc).unwrap()).abs() < 1e-6 * r2.abs().max(1.0));
                prop_assert!(r2 <= 1.0);
            }
            let resid: Vec<f64> = a.iter().zip(&p).map(|(x, y)| x - y).collect();
            if let Ok(s) = residual_stats(&resid) {
                prop_assert!((s.sigma.powi(2) + s.mean.powi(2) - base.powi(2)).abs() < 1e-9 * base.powi(2).max(1.0));
            }
        }

        #[test]
        fn skewness_affine_invariant(
            r in proptest::collection::vec(-10.0f64..10.0, 3..40),
            scale in 0.1f64..10.0,
            shift in -20.0f64..20.0,
        ) {
            let s = residual_stats(&r).unwrap();
            prop_assume!(s.sigma > 1e-3);
            let t: Vec<f64> = r.iter().map(|v| scale * v + shift).collect();
            prop_assert!((residual_stats(&t).unwrap().skewness - s.skewness).abs() < 1e-8);
        }
    }
}
