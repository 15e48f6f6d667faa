//! Link-budget quantities: effective signal power, noise power, per-SF
//! reception thresholds and experimental path loss from RSSI.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Transmitter/receiver constants entering the experimental path loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudgetParams {
    pub tx_power_dbm: f64,
    pub tx_cable_loss_db: f64,
    pub tx_antenna_gain_dbi: f64,
    pub rx_antenna_gain_dbi: f64,
    pub rx_cable_loss_db: f64,
    pub tx_antenna_height_m: f64,
    pub rx_antenna_height_m: f64,
}

impl LinkBudgetParams {
    /// Allocation used by the reference indoor deployment.
    pub const DEPLOYMENT: Self = Self {
        tx_power_dbm: 14.0,
        tx_cable_loss_db: 0.14,
        tx_antenna_gain_dbi: 0.4,
        rx_antenna_gain_dbi: 3.0,
        rx_cable_loss_db: 0.0,
        tx_antenna_height_m: 0.8,
        rx_antenna_height_m: 1.0,
    };

    pub fn validate(&self) -> Result<()> {
        if self.tx_cable_loss_db < 0.0 || self.rx_cable_loss_db < 0.0 {
            return Err(Error::InvalidParameter("cable losses must be non-negative".into()));
        }
        if self.tx_antenna_height_m <= 0.0 || self.rx_antenna_height_m <= 0.0 {
            return Err(Error::InvalidParameter("antenna heights must be positive".into()));
        }
        Ok(())
    }

    /// Net gain `TP − CL_TX + G_TX + G_RX − CL_RX` in dB.
    pub fn net_gain_db(&self) -> f64 {
        self.tx_power_dbm - self.tx_cable_loss_db + self.tx_antenna_gain_dbi
            + self.rx_antenna_gain_dbi
            - self.rx_cable_loss_db
    }
}

impl Default for LinkBudgetParams {
    fn default() -> Self {
        Self::DEPLOYMENT
    }
}

/// Demodulation floor for one spreading factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SfThreshold {
    pub sf: u8,
    pub snr_req_db: f64,
    pub sensitivity_dbm: f64,
}

/// Required SNR and receiver sensitivity for SF7..SF12 at 125 kHz.
pub const SF_THRESHOLDS: [SfThreshold; 6] = [
    SfThreshold { sf: 7, snr_req_db: -7.5, sensitivity_dbm: -123.0 },
    SfThreshold { sf: 8, snr_req_db: -10.0, sensitivity_dbm: -126.0 },
    SfThreshold { sf: 9, snr_req_db: -12.5, sensitivity_dbm: -129.0 },
    SfThreshold { sf: 10, snr_req_db: -15.0, sensitivity_dbm: -132.0 },
    SfThreshold { sf: 11, snr_req_db: -17.5, sensitivity_dbm: -134.5 },
    SfThreshold { sf: 12, snr_req_db: -20.0, sensitivity_dbm: -137.0 },
];

/// A threshold table, the built-in one unless overridden from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThresholdTable(pub Vec<SfThreshold>);

impl Default for ThresholdTable {
    fn default() -> Self {
        Self(SF_THRESHOLDS.to_vec())
    }
}

impl ThresholdTable {
    pub fn get(&self, sf: u8) -> Result<&SfThreshold> {
        self.0.iter().find(|t| t.sf == sf).ok_or(Error::UnknownSf(sf))
    }

    pub fn snr_req(&self, sf: u8) -> Result<f64> {
        self.get(sf).map(|t| t.snr_req_db)
    }

    /// `true` iff ESP clears the sensitivity AND the SNR clears the demodulation floor.
    pub fn receivable(&self, esp_dbm: f64, snr_db: f64, sf: u8) -> Result<bool> {
        let t = self.get(sf)?;
        Ok(esp_dbm >= t.sensitivity_dbm && snr_db >= t.snr_req_db)
    }
}

/// Required SNR from the built-in table.
pub fn snr_req(sf: u8) -> Result<f64> {
    SF_THRESHOLDS
        .iter()
        .find(|t| t.sf == sf)
        .map(|t| t.snr_req_db)
        .ok_or(Error::UnknownSf(sf))
}

/// `10·log10(1 + 10^(snr/10))`: the dB excess of total power over noise.
fn total_over_noise_db(snr_db: f64) -> f64 {
    // ln_1p keeps precision for very negative SNR.
    10.0 * (0.1 * snr_db * std::f64::consts::LN_10).exp().ln_1p() / std::f64::consts::LN_10
}

/// Effective signal power in dBm.
pub fn esp(rssi_dbm: f64, snr_db: f64) -> f64 {
    rssi_dbm + snr_db - total_over_noise_db(snr_db)
}

/// Noise power in dBm.
pub fn noise_power(rssi_dbm: f64, snr_db: f64) -> f64 {
    rssi_dbm - total_over_noise_db(snr_db)
}

/// Path loss implied by a received RSSI under the given link budget.
pub fn experimental_path_loss(params: &LinkBudgetParams, rssi_dbm: f64) -> f64 {
    params.net_gain_db() - rssi_dbm
}

/// [`ThresholdTable::receivable`] against the built-in table.
pub fn receivable(esp_dbm: f64, snr_db: f64, sf: u8) -> Result<bool> {
    ThresholdTable::default().receivable(esp_dbm, snr_db, sf)
}
