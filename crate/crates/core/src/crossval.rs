//! K-fold cross-validation of the path-loss models.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fitting::{self, FitConfig, Observation};
use crate::metrics::{self, EvalReport};
use crate::pipeline::kfold;
use crate::propagation::Variant;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation across folds.
    pub std: f64,
}

impl MeanStd {
    fn of(values: &[f64]) -> Self {
        Self { mean: metrics::mean(values), std: metrics::population_std(values) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub fold: usize,
    pub params: Vec<f64>,
    pub converged: bool,
    pub train: EvalReport,
    pub validation: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValReport {
    pub variant: Variant,
    pub seed: u64,
    pub folds: Vec<FoldScore>,
    pub train_rmse_db: MeanStd,
    pub validation_rmse_db: MeanStd,
    pub train_r2: MeanStd,
    pub validation_r2: MeanStd,
    pub validation_residual_mean_db: MeanStd,
    pub validation_residual_skewness: MeanStd,
}

/// Fits on k−1 folds and scores on the held-out one, for every fold.
pub fn cross_validate(
    observations: &[Observation],
    variant: Variant,
    folds: usize,
    seed: u64,
    config: &FitConfig,
) -> Result<CrossValReport> {
    let parts = kfold(observations.len(), folds, seed)?;
    let mut scores = Vec::with_capacity(parts.len());
    for (fold, part) in parts.iter().enumerate() {
        let train: Vec<Observation> = part.train.iter().map(|&i| observations[i]).collect();
        let validation: Vec<Observation> = part.test.iter().map(|&i| observations[i]).collect();
        let report = fitting::fit(&train, variant, config)?;
        let model = report.model();
        scores.push(FoldScore {
            fold,
            params: report.params.clone(),
            converged: report.converged,
            train: metrics::evaluate(&model, &train)?,
            validation: metrics::evaluate(&model, &validation)?,
        });
    }
    let collect = |f: fn(&FoldScore) -> f64| MeanStd::of(&scores.iter().map(f).collect::<Vec<f64>>());
    Ok(CrossValReport {
        variant,
        seed,
        train_rmse_db: collect(|s| s.train.rmse_db),
        validation_rmse_db: collect(|s| s.validation.rmse_db),
        train_r2: collect(|s| s.train.r2),
        validation_r2: collect(|s| s.validation.r2),
        validation_residual_mean_db: collect(|s| s.validation.residual_mean_db),
        validation_residual_skewness: collect(|s| s.validation.residual_skewness),
        folds: scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagation::{EnvVector, WallCounts};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn noisy_mw(n: usize, sigma: f64, seed: u64) -> Vec<Observation> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sigma).unwrap();
        (0..n)
            .map(|_| {
                let distance_m: f64 = rng.random_range(1.0..40.0);
                let walls = WallCounts::new(rng.random_range(0..3), rng.random_range(0..6));
                let clean = 31.3 + 36.2 * distance_m.log10() + 9.74 * f64::from(walls.brick) + 2.64 * f64::from(walls.wood);
                Observation {
                    distance_m,
                    walls,
                    freq_mhz: 868.1,
                    env: EnvVector::default(),
                    snr_db: 0.0,
                    path_loss_db: clean + noise.sample(&mut rng),
                }
            })
            .collect()
    }

    #[test]
    fn recovers_noise_level() {
        let obs = noisy_mw(5000, 6.0, 1);
        let report = cross_validate(&obs, Variant::Mw, 5, 42, &FitConfig::default()).unwrap();
        assert_eq!(report.folds.len(), 5);
        assert!((report.validation_rmse_db.mean / 6.0 - 1.0).abs() < 0.03, "{report:?}");
        assert!(report.train_rmse_db.mean <= report.validation_rmse_db.mean + 0.2);
        assert!(report.validation_residual_mean_db.mean.abs() < 0.3);
    }

    #[test]
    fn deterministic() {
        let obs = noisy_mw(300, 3.0, 2);
        let a = cross_validate(&obs, Variant::Mw, 5, 42, &FitConfig::default()).unwrap();
        let b = cross_validate(&obs, Variant::Mw, 5, 42, &FitConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
