//! Levenberg–Marquardt for problems of the form `y ≈ f(α)`.
//!
//! The Jacobian supplied by the problem is `∂f/∂α` (of the *predictions*)
//! and residuals are `y − f(α)`, so the damped Gauss–Newton step is
//! `α + (JᵀJ + λI)⁻¹ Jᵀ r`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares problem evaluated at a parameter vector.
pub trait LeastSquaresProblem {
    fn n_params(&self) -> usize;
    fn n_residuals(&self) -> usize;
    /// `y − f(α)`.
    fn residuals(&self, params: &DVector<f64>) -> DVector<f64>;
    /// `∂f/∂α`, one row per residual.
    fn jacobian(&self, params: &DVector<f64>) -> DMatrix<f64>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmSettings {
    pub max_iterations: usize,
    /// Stop once an accepted step improves RSS by less than this fraction.
    pub rss_tolerance: f64,
    pub damping_initial: f64,
    pub damping_up: f64,
    pub damping_down: f64,
}

impl Default for LmSettings {
    fn default() -> Self {
        Self {
            max_iterations: 100_000,
            rss_tolerance: 1e-10,
            damping_initial: 1e-3,
            damping_up: 10.0,
            damping_down: 0.1,
        }
    }
}

impl LmSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidFitConfig(m.to_string()));
        if self.max_iterations < 1 {
            return bad("max_iterations must be at least 1");
        }
        if !(self.rss_tolerance > 0.0) {
            return bad("rss_tolerance must be positive");
        }
        if !(self.damping_initial > 0.0) {
            return bad("damping_initial must be positive");
        }
        if !(self.damping_up > 1.0) {
            return bad("damping_up must exceed 1");
        }
        if !(self.damping_down > 0.0 && self.damping_down < 1.0) {
            return bad("damping_down must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub params: DVector<f64>,
    pub residuals: DVector<f64>,
    pub rss: f64,
    pub iterations: usize,
    pub converged: bool,
    /// RSS after every accepted step, starting with the initial point.
    pub rss_trace: Vec<f64>,
}

const DAMPING_FLOOR: f64 = 1e-20;
const DAMPING_CEILING: f64 = 1e30;

/// Rejects Gram matrices whose column-normalised form is numerically singular.
pub fn check_rank(jtj: &DMatrix<f64>) -> Result<()> {
    let n = jtj.nrows();
    let scale: Vec<f64> = (0..n).map(|i| jtj[(i, i)].sqrt()).collect();
    if scale.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(Error::SingularNormalEquations);
    }
    let normalised = DMatrix::from_fn(n, n, |i, j| jtj[(i, j)] / (scale[i] * scale[j]));
    let eig = normalised.symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(min > max * 1e-13) {
        return Err(Error::SingularNormalEquations);
    }
    Ok(())
}

/// Solves `(JᵀJ + λI)·δ = Jᵀr`.
///
/// The system is symmetrically rescaled to unit diagonal before the Cholesky
/// factorisation; the solution is unchanged but survives columns of very
/// different magnitude.
fn damped_step(jtj: &DMatrix<f64>, gradient: &DVector<f64>, lambda: f64) -> Option<DVector<f64>> {
    let p = jtj.nrows();
    let scale: Vec<f64> = (0..p).map(|i| (jtj[(i, i)] + lambda).sqrt()).collect();
    let scaled = DMatrix::from_fn(p, p, |i, j| {
        let damping = if i == j { lambda } else { 0.0 };
        (jtj[(i, j)] + damping) / (scale[i] * scale[j])
    });
    let rhs = DVector::from_fn(p, |i, _| gradient[i] / scale[i]);
    let z = scaled.cholesky()?.solve(&rhs);
    Some(DVector::from_fn(p, |i, _| z[i] / scale[i]))
}

/// Minimises `‖y − f(α)‖²` from `initial`.
///
/// Each trial step counts as one iteration. λ shrinks by `damping_down`
/// after an accepted step and grows by `damping_up` after a rejected one.
pub fn minimize<P: LeastSquaresProblem>(
    problem: &P,
    initial: DVector<f64>,
    settings: &LmSettings,
) -> Result<LmOutcome> {
    settings.validate()?;
    let p = problem.n_params();
    if initial.len() != p {
        return Err(Error::DimensionMismatch { expected: p, got: initial.len() });
    }

    let mut params = initial;
    let mut residuals = problem.residuals(&params);
    let mut rss = residuals.norm_squared();
    let mut jac = problem.jacobian(&params);
    let mut jtj = jac.tr_mul(&jac);
    check_rank(&jtj)?;
    let mut gradient = jac.tr_mul(&residuals);

    let mut lambda = settings.damping_initial;
    let mut rss_trace = vec![rss];
    let mut converged = rss == 0.0;
    let mut iterations = 0;

    while !converged && iterations < settings.max_iterations {
        iterations += 1;
        let Some(step) = damped_step(&jtj, &gradient, lambda) else {
            lambda = (lambda * settings.damping_up).min(DAMPING_CEILING);
            continue;
        };
        let trial = &params + &step;
        let trial_residuals = problem.residuals(&trial);
        let trial_rss = trial_residuals.norm_squared();

        if trial_rss.is_finite() && trial_rss <= rss {
            let improvement = if rss > 0.0 { (rss - trial_rss) / rss } else { 0.0 };
            params = trial;
            residuals = trial_residuals;
            rss = trial_rss;
            rss_trace.push(rss);
            lambda = (lambda * settings.damping_down).max(DAMPING_FLOOR);
            if improvement < settings.rss_tolerance || rss == 0.0 {
                converged = true;
                break;
            }
            jac = problem.jacobian(&params);
            jtj = jac.tr_mul(&jac);
            gradient = jac.tr_mul(&residuals);
        } else {
            lambda *= settings.damping_up;
            if lambda > DAMPING_CEILING {
                // No descent left at machine precision: stationary point.
                converged = true;
            }
        }
    }

    Ok(LmOutcome { params, residuals, rss, iterations, converged, rss_trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `y = a·exp(b·x)`: genuinely nonlinear, to exercise damping.
    struct Exponential {
        x: Vec<f64>,
        y: Vec<f64>,
    }

    impl LeastSquaresProblem for Exponential {
        fn n_params(&self) -> usize {
            2
        }
        fn n_residuals(&self) -> usize {
            self.x.len()
        }
        fn residuals(&self, p: &DVector<f64>) -> DVector<f64> {
            DVector::from_iterator(
                self.x.len(),
                self.x.iter().zip(&self.y).map(|(x, y)| y - p[0] * (p[1] * x).exp()),
            )
        }
        fn jacobian(&self, p: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::from_fn(self.x.len(), 2, |i, j| {
                let e = (p[1] * self.x[i]).exp();
                if j == 0 {
                    e
                } else {
                    p[0] * self.x[i] * e
                }
            })
        }
    }

    #[test]
    fn recovers_exponential() {
        let x: Vec<f64> = (0..30).map(|i| f64::from(i) * 0.1).collect();
        let y = x.iter().map(|x| 2.5 * (0.7 * x).exp()).collect();
        let problem = Exponential { x, y };
        let out = minimize(&problem, DVector::from_vec(vec![1.0, 0.1]), &LmSettings::default()).unwrap();
        assert!(out.converged);
        assert!((out.params[0] - 2.5).abs() < 1e-6, "{}", out.params);
        assert!((out.params[1] - 0.7).abs() < 1e-6);
        assert!(out.rss_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn iteration_cap_reports_not_converged() {
        let x: Vec<f64> = (0..30).map(|i| f64::from(i) * 0.1).collect();
        let y = x.iter().map(|x| 2.5 * (0.7 * x).exp() + 0.01 * x.sin()).collect();
        let problem = Exponential { x, y };
        let settings = LmSettings { max_iterations: 1, ..LmSettings::default() };
        let out = minimize(&problem, DVector::from_vec(vec![1.0, 0.1]), &settings).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(!out.converged);
    }

    #[test]
    fn settings_validation() {
        assert!(LmSettings { damping_up: 1.0, ..LmSettings::default() }.validate().is_err());
        assert!(LmSettings { damping_down: 1.0, ..LmSettings::default() }.validate().is_err());
        assert!(LmSettings { max_iterations: 0, ..LmSettings::default() }.validate().is_err());
        assert!(LmSettings { rss_tolerance: 0.0, ..LmSettings::default() }.validate().is_err());
    }

    #[test]
    fn rank_check() {
        let full = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!(check_rank(&full).is_ok());
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(check_rank(&singular), Err(Error::SingularNormalEquations)));
        let zero_col = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(check_rank(&zero_col).is_err());
    }
}
