//! Multi-wall log-distance path-loss models.
//!
//! Two variants share one coefficient record:
//!
//! * `Mw`: `β₀ + 10·n·log10(d/d₀) + Σ W_k·L_k`
//! * `MwEp`: the above plus `20·log10(f_MHz) + Σ θ_j·E_j + k_SNR·SNR`
//!
//! Predictions are the deterministic part only; the shadowing term is
//! handled by [`shadowing`] and added explicitly by [`scene`].
//!
//! The frequency term uses MHz, so its constant offset (≈58.8 dB at 868 MHz)
//! is folded into `β₀` when fitting. Intercepts of the two variants are not
//! comparable.

pub mod scene;
pub mod shadowing;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reference distance used throughout, in metres.
pub const REFERENCE_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WallType {
    /// Thin concrete / brick wall (`c_walls` column).
    Brick,
    /// Wood partition (`w_walls` column).
    Wood,
}

impl WallType {
    pub const ALL: [WallType; 2] = [WallType::Brick, WallType::Wood];
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WallCounts {
    pub brick: u32,
    pub wood: u32,
}

impl WallCounts {
    pub fn new(brick: u32, wood: u32) -> Self {
        Self { brick, wood }
    }

    pub fn get(&self, wall: WallType) -> u32 {
        match wall {
            WallType::Brick => self.brick,
            WallType::Wood => self.wood,
        }
    }
}

/// Environmental covariates, in the order `[T, RH, BP, P, C]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvField {
    Temperature,
    Humidity,
    Pressure,
    Pm25,
    Co2,
}

impl EnvField {
    pub const ALL: [EnvField; 5] = [
        EnvField::Temperature,
        EnvField::Humidity,
        EnvField::Pressure,
        EnvField::Pm25,
        EnvField::Co2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnvField::Temperature => "temperature",
            EnvField::Humidity => "humidity",
            EnvField::Pressure => "pressure",
            EnvField::Pm25 => "pm25",
            EnvField::Co2 => "co2",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnvVector {
    pub temperature_c: f64,
    pub humidity_pct: f64,
    pub pressure_hpa: f64,
    pub pm25_ugm3: f64,
    pub co2_ppm: f64,
}

impl EnvVector {
    pub fn get(&self, field: EnvField) -> f64 {
        match field {
            EnvField::Temperature => self.temperature_c,
            EnvField::Humidity => self.humidity_pct,
            EnvField::Pressure => self.pressure_hpa,
            EnvField::Pm25 => self.pm25_ugm3,
            EnvField::Co2 => self.co2_ppm,
        }
    }

    pub fn set(&mut self, field: EnvField, value: f64) {
        match field {
            EnvField::Temperature => self.temperature_c = value,
            EnvField::Humidity => self.humidity_pct = value,
            EnvField::Pressure => self.pressure_hpa = value,
            EnvField::Pm25 => self.pm25_ugm3 = value,
            EnvField::Co2 => self.co2_ppm = value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Mw,
    MwEp,
}

impl Variant {
    /// Length of the coefficient vector fitted for this variant.
    pub fn n_params(self) -> usize {
        match self {
            Variant::Mw => 2 + WallType::ALL.len(),
            Variant::MwEp => 2 + WallType::ALL.len() + EnvField::ALL.len() + 1,
        }
    }

    /// Coefficient names in parameter-vector order.
    pub fn param_names(self) -> Vec<&'static str> {
        let mut names = vec!["intercept_db", "path_loss_exponent", "wall_loss_brick_db", "wall_loss_wood_db"];
        if self == Variant::MwEp {
            names.extend(EnvField::ALL.iter().map(|f| match f {
                EnvField::Temperature => "theta_temperature",
                EnvField::Humidity => "theta_humidity",
                EnvField::Pressure => "theta_pressure",
                EnvField::Pm25 => "theta_pm25",
                EnvField::Co2 => "theta_co2",
            }));
            names.push("snr_coeff");
        }
        names
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Mw => "mw",
            Variant::MwEp => "mw-ep",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "mw" => Ok(Variant::Mw),
            "mw-ep" => Ok(Variant::MwEp),
            other => Err(Error::InvalidParameter(format!("unknown model variant `{other}`"))),
        }
    }
}

/// Coefficients of a fitted or hand-specified path-loss model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathLossModel {
    pub variant: Variant,
    pub intercept_db: f64,
    pub path_loss_exponent: f64,
    pub wall_loss_db: BTreeMap<WallType, f64>,
    #[serde(default)]
    pub env_coeffs: BTreeMap<EnvField, f64>,
    #[serde(default)]
    pub snr_coeff: Option<f64>,
    #[serde(default)]
    pub shadowing_sigma_db: f64,
    #[serde(default = "default_reference_distance")]
    pub reference_distance_m: f64,
}

fn default_reference_distance() -> f64 {
    REFERENCE_DISTANCE_M
}

impl PathLossModel {
    /// Builds a model from a parameter vector in [`Variant::param_names`] order.
    pub fn from_params(variant: Variant, params: &[f64], shadowing_sigma_db: f64) -> Result<Self> {
        if params.len() != variant.n_params() {
            return Err(Error::DimensionMismatch { expected: variant.n_params(), got: params.len() });
        }
        let wall_loss_db = WallType::ALL.iter().copied().zip(params[2..4].iter().copied()).collect();
        let (env_coeffs, snr_coeff) = match variant {
            Variant::Mw => (BTreeMap::new(), None),
            Variant::MwEp => (
                EnvField::ALL.iter().copied().zip(params[4..9].iter().copied()).collect(),
                Some(params[9]),
            ),
        };
        Ok(Self {
            variant,
            intercept_db: params[0],
            path_loss_exponent: params[1],
            wall_loss_db,
            env_coeffs,
            snr_coeff,
            shadowing_sigma_db,
            reference_distance_m: REFERENCE_DISTANCE_M,
        })
    }

    /// Flattens the coefficients into [`Variant::param_names`] order.
    pub fn params(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let mut p = vec![self.intercept_db, self.path_loss_exponent];
        for wall in WallType::ALL {
            p.push(self.wall_loss_db[&wall]);
        }
        if self.variant == Variant::MwEp {
            for field in EnvField::ALL {
                p.push(self.env_coeffs[&field]);
            }
            p.push(self.snr_coeff.unwrap_or_default());
        }
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.reference_distance_m > 0.0) {
            return Err(Error::InvalidModel("reference distance must be positive".into()));
        }
        if !(self.shadowing_sigma_db >= 0.0) {
            return Err(Error::InvalidModel("shadowing sigma must be non-negative".into()));
        }
        if let Some(missing) = WallType::ALL.iter().find(|w| !self.wall_loss_db.contains_key(w)) {
            return Err(Error::InvalidModel(format!("missing wall loss for {missing:?}")));
        }
        match self.variant {
            Variant::Mw => {
                if !self.env_coeffs.is_empty() || self.snr_coeff.is_some() {
                    return Err(Error::InvalidModel(
                        "the mw variant carries no environmental or SNR coefficients".into(),
                    ));
                }
            }
            Variant::MwEp => {
                if let Some(missing) = EnvField::ALL.iter().find(|f| !self.env_coeffs.contains_key(f)) {
                    return Err(Error::InvalidModel(format!("missing coefficient for {}", missing.name())));
                }
                if self.snr_coeff.is_none() {
                    return Err(Error::InvalidModel("mw-ep variant needs an snr_coeff".into()));
                }
            }
        }
        Ok(())
    }

    fn structural(&self, distance_m: f64, walls: WallCounts) -> Result<f64> {
        if !(distance_m >= self.reference_distance_m) {
            return Err(Error::DistanceBelowReference {
                distance: distance_m,
                reference: self.reference_distance_m,
            });
        }
        let wall_sum: f64 = self
            .wall_loss_db
            .iter()
            .map(|(&wall, &loss)| f64::from(walls.get(wall)) * loss)
            .sum();
        Ok(self.intercept_db
            + 10.0 * self.path_loss_exponent * (distance_m / self.reference_distance_m).log10()
            + wall_sum)
    }
}

fn expect_variant(model: &PathLossModel, expected: Variant) -> Result<()> {
    if model.variant != expected {
        return Err(Error::VariantMismatch { expected: expected.as_str(), got: model.variant.as_str() });
    }
    model.validate()
}

/// Deterministic multi-wall path loss in dB.
pub fn predict_mw(model: &PathLossModel, distance_m: f64, walls: WallCounts) -> Result<f64> {
    expect_variant(model, Variant::Mw)?;
    model.structural(distance_m, walls)
}

/// Deterministic multi-wall path loss with environmental and SNR terms, in dB.
pub fn predict_mw_ep(
    model: &PathLossModel,
    distance_m: f64,
    walls: WallCounts,
    freq_mhz: f64,
    env: &EnvVector,
    snr_db: f64,
) -> Result<f64> {
    expect_variant(model, Variant::MwEp)?;
    if !(freq_mhz > 0.0) {
        return Err(Error::NonPositiveFrequency(freq_mhz));
    }
    let env_sum: f64 = model.env_coeffs.iter().map(|(&f, &theta)| theta * env.get(f)).sum();
    Ok(model.structural(distance_m, walls)?
        + 20.0 * freq_mhz.log10()
        + env_sum
        + model.snr_coeff.unwrap_or_default() * snr_db)
}

/// Published coefficient sets for the two variants.
pub mod presets {
    use super::*;

    pub fn deployment_mw() -> PathLossModel {
        PathLossModel::from_params(Variant::Mw, &[31.30, 3.62, 9.74, 2.64], 10.5786)
            .expect("preset has the right dimension")
    }

    pub fn deployment_mw_ep() -> PathLossModel {
        // [β₀, n, L_brick, L_wood, θ_T, θ_RH, θ_BP, θ_P, θ_C, k_SNR]
        PathLossModel::from_params(
            Variant::MwEp,
            &[5.46, 3.20, 8.52, 2.98, -0.005767, -0.074299, -0.011567, -0.153205, -0.002497, -1.982231],
            8.0357,
        )
        .expect("preset has the right dimension")
    }
}
