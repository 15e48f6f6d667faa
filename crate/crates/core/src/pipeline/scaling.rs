use serde::{Deserialize, Serialize};

use super::ObservationRecord;
use crate::error::{Error, Result};
use crate::metrics;

/// Row-major matrix of the named columns.
pub(crate) fn feature_matrix(records: &[ObservationRecord], features: &[String]) -> Result<Vec<Vec<f64>>> {
    for name in features {
        if records.first().is_some_and(|r| r.numeric(name).is_none()) {
            return Err(Error::InvalidParameter(format!("unknown feature column {name:?}")));
        }
    }
    Ok(records
        .iter()
        .map(|r| features.iter().map(|name| r.numeric(name).unwrap_or(f64::NAN)).collect())
        .collect())
}

/// Per-column z-scoring with population statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub names: Vec<String>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Scaler {
    fn moments(matrix: &[Vec<f64>], names: &[String]) -> (Vec<f64>, Vec<f64>) {
        (0..names.len())
            .map(|j| {
                let column: Vec<f64> = matrix.iter().map(|row| row[j]).collect();
                (metrics::mean(&column), metrics::population_std(&column))
            })
            .unzip()
    }

    /// Fails on any zero-variance column.
    pub fn fit(matrix: &[Vec<f64>], names: &[String]) -> Result<Self> {
        if matrix.is_empty() {
            return Err(Error::Empty);
        }
        let (means, stds) = Self::moments(matrix, names);
        if let Some(j) = stds.iter().position(|&s| s == 0.0) {
            return Err(Error::ZeroVarianceFeature(names[j].clone()));
        }
        Ok(Self { names: names.to_vec(), means, stds })
    }

    /// Zero-variance columns get unit scale and map to 0.
    pub fn fit_lenient(matrix: &[Vec<f64>], names: &[String]) -> Self {
        let (means, stds) = Self::moments(matrix, names);
        let stds = stds.into_iter().map(|s| if s == 0.0 { 1.0 } else { s }).collect();
        Self { names: names.to_vec(), means, stds }
    }

    pub fn transform(&self, matrix: &[Vec<f64>]) -> Vec<Vec<f64>> {
        matrix
            .iter()
            .map(|row| row.iter().zip(self.means.iter().zip(&self.stds)).map(|(x, (m, s))| (x - m) / s).collect())
            .collect()
    }
}

/// Z-scores the named columns; every column must vary.
pub fn standardize(records: &[ObservationRecord], features: &[String]) -> Result<(Vec<Vec<f64>>, Scaler)> {
    let matrix = feature_matrix(records, features)?;
    let scaler = Scaler::fit(&matrix, features)?;
    Ok((scaler.transform(&matrix), scaler))
}
