//! Least-squares estimation of [`PathLossModel`] coefficients.
//!
//! Both variants are linear in their coefficients, so the Jacobian is the
//! design matrix `[1, 10·log10(d/d₀), W_brick, W_wood (, T, RH, BP, P, C, SNR)]`
//! and the `20·log10(f)` term of the environmental variant is a fixed offset.
//! The solver itself ([`lm`]) is a general Levenberg–Marquardt.

pub mod lm;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics;
use crate::propagation::{EnvField, EnvVector, PathLossModel, Variant, WallCounts, REFERENCE_DISTANCE_M};

pub use lm::{LeastSquaresProblem, LmSettings};

/// One path-loss measurement with everything either variant needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub distance_m: f64,
    pub walls: WallCounts,
    pub freq_mhz: f64,
    pub env: EnvVector,
    pub snr_db: f64,
    /// Measured path loss, the regression target.
    pub path_loss_db: f64,
}

impl Observation {
    /// Design-matrix row for `variant`.
    pub fn regressors(&self, variant: Variant) -> Vec<f64> {
        let mut row = Vec::with_capacity(variant.n_params());
        self.push_regressors(variant, &mut row);
        row
    }

    fn push_regressors(&self, variant: Variant, row: &mut Vec<f64>) {
        row.push(1.0);
        row.push(10.0 * (self.distance_m / REFERENCE_DISTANCE_M).log10());
        row.push(f64::from(self.walls.brick));
        row.push(f64::from(self.walls.wood));
        if variant == Variant::MwEp {
            row.extend(EnvField::ALL.iter().map(|&f| self.env.get(f)));
            row.push(self.snr_db);
        }
    }

    /// Part of the prediction that carries no coefficient.
    pub fn fixed_offset(&self, variant: Variant) -> f64 {
        match variant {
            Variant::Mw => 0.0,
            Variant::MwEp => 20.0 * self.freq_mhz.log10(),
        }
    }

    fn check(&self, variant: Variant) -> Result<()> {
        if !(self.distance_m >= REFERENCE_DISTANCE_M) {
            return Err(Error::DistanceBelowReference { distance: self.distance_m, reference: REFERENCE_DISTANCE_M });
        }
        if variant == Variant::MwEp && !(self.freq_mhz > 0.0) {
            return Err(Error::NonPositiveFrequency(self.freq_mhz));
        }
        Ok(())
    }
}

/// Prediction of `model` for one observation, dispatching on the variant.
pub fn predict(model: &PathLossModel, obs: &Observation) -> Result<f64> {
    match model.variant {
        Variant::Mw => crate::propagation::predict_mw(model, obs.distance_m, obs.walls),
        Variant::MwEp => crate::propagation::predict_mw_ep(
            model,
            obs.distance_m,
            obs.walls,
            obs.freq_mhz,
            &obs.env,
            obs.snr_db,
        ),
    }
}

/// Precomputed design matrix, offsets and targets for one variant.
#[derive(Debug, Clone)]
pub struct PathLossProblem {
    variant: Variant,
    design: DMatrix<f64>,
    offsets: DVector<f64>,
    targets: DVector<f64>,
}

impl PathLossProblem {
    pub fn new(observations: &[Observation], variant: Variant) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::Empty);
        }
        let p = variant.n_params();
        let mut flat = Vec::with_capacity(observations.len() * p);
        for obs in observations {
            obs.check(variant)?;
            obs.push_regressors(variant, &mut flat);
        }
        let design = DMatrix::from_row_slice(observations.len(), p, &flat);
        let offsets = DVector::from_iterator(observations.len(), observations.iter().map(|o| o.fixed_offset(variant)));
        let targets = DVector::from_iterator(observations.len(), observations.iter().map(|o| o.path_loss_db));
        Ok(Self { variant, design, offsets, targets })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn predictions(&self, params: &DVector<f64>) -> DVector<f64> {
        &self.design * params + &self.offsets
    }
}

impl LeastSquaresProblem for PathLossProblem {
    fn n_params(&self) -> usize {
        self.variant.n_params()
    }

    fn n_residuals(&self) -> usize {
        self.targets.len()
    }

    fn residuals(&self, params: &DVector<f64>) -> DVector<f64> {
        &self.targets - self.predictions(params)
    }

    fn jacobian(&self, _params: &DVector<f64>) -> DMatrix<f64> {
        self.design.clone()
    }
}

fn check_dim(params: &[f64], variant: Variant) -> Result<()> {
    if params.len() != variant.n_params() {
        return Err(Error::DimensionMismatch { expected: variant.n_params(), got: params.len() });
    }
    Ok(())
}

/// Residual sum of squares `Σ (PL_exp − PL_pred(α))²`.
pub fn rss(params: &[f64], observations: &[Observation], variant: Variant) -> Result<f64> {
    check_dim(params, variant)?;
    let problem = PathLossProblem::new(observations, variant)?;
    Ok(problem.residuals(&DVector::from_column_slice(params)).norm_squared())
}

/// `∂PL_pred/∂α`, one row per observation.
pub fn jacobian(params: &[f64], observations: &[Observation], variant: Variant) -> Result<DMatrix<f64>> {
    check_dim(params, variant)?;
    let problem = PathLossProblem::new(observations, variant)?;
    Ok(problem.jacobian(&DVector::from_column_slice(params)))
}

/// Starting point: `β₀=40, n=3.5, L_brick=9, L_wood=3`, `θ_j=0`, `k_SNR=−1`.
pub fn default_initial_params(variant: Variant) -> Vec<f64> {
    let mut p = vec![40.0, 3.5, 9.0, 3.0];
    if variant == Variant::MwEp {
        p.extend([0.0; 5]);
        p.push(-1.0);
    }
    p
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Defaults to [`default_initial_params`] when absent.
    pub initial_params: Option<Vec<f64>>,
    #[serde(flatten)]
    pub solver: LmSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub variant: Variant,
    pub param_names: Vec<String>,
    pub params: Vec<f64>,
    /// `sqrt(diag((JᵀJ)⁻¹)·RSS/(N−p))`.
    pub std_errors: Vec<f64>,
    pub rss: f64,
    pub iterations: usize,
    pub converged: bool,
    pub n_observations: usize,
    pub shadowing_sigma_db: f64,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl FitReport {
    pub fn model(&self) -> PathLossModel {
        PathLossModel::from_params(self.variant, &self.params, self.shadowing_sigma_db)
            .expect("report params match the variant")
    }
}

/// Fits `variant` to `observations` by Levenberg–Marquardt.
///
/// Hitting the iteration cap is reported through `converged = false`.
pub fn fit(observations: &[Observation], variant: Variant, config: &FitConfig) -> Result<FitReport> {
    let p = variant.n_params();
    if observations.len() < p + 1 {
        return Err(Error::Underdetermined { observations: observations.len(), params: p, needed: p + 1 });
    }
    let initial = config.initial_params.clone().unwrap_or_else(|| default_initial_params(variant));
    check_dim(&initial, variant)?;

    let problem = PathLossProblem::new(observations, variant)?;
    let outcome = lm::minimize(&problem, DVector::from_vec(initial), &config.solver)?;

    let residuals: Vec<f64> = outcome.residuals.iter().copied().collect();
    let n = residuals.len();
    let sigma_hat_sq = outcome.rss / (n - p) as f64;
    let jtj = problem.design().tr_mul(problem.design());
    let std_errors = match jtj.cholesky() {
        Some(chol) => {
            let inv = chol.inverse();
            (0..p).map(|i| (inv[(i, i)] * sigma_hat_sq).sqrt()).collect()
        }
        None => vec![f64::NAN; p],
    };
    let shadowing_sigma_db = metrics::population_std(&residuals);

    Ok(FitReport {
        variant,
        param_names: variant.param_names().into_iter().map(String::from).collect(),
        params: outcome.params.iter().copied().collect(),
        std_errors,
        rss: outcome.rss,
        iterations: outcome.iterations,
        converged: outcome.converged,
        n_observations: n,
        shadowing_sigma_db,
        residuals,
    })
}
