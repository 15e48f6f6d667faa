//! Network-side adaptive data rate: SNR margin over a sliding history and a
//! single-step SF / transmit-power adjustment.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link_budget;

pub const DEFAULT_HISTORY_LEN: usize = 20;
pub const DEFAULT_FADE_MARGIN_DB: f64 = 10.0;
pub const DEFAULT_POWER_STEP_DB: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AdrDecision {
    LowerSf,
    RaisePower,
    NoChange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdrState {
    pub current_sf: u8,
    pub current_power_dbm: f64,
    pub snr_history: VecDeque<f64>,
    pub history_capacity: usize,
    pub fade_margin_db: f64,
    pub power_step_db: f64,
    pub max_power_dbm: f64,
    pub min_sf: u8,
}

impl AdrState {
    pub fn new(current_sf: u8, current_power_dbm: f64) -> Self {
        Self {
            current_sf,
            current_power_dbm,
            snr_history: VecDeque::with_capacity(DEFAULT_HISTORY_LEN),
            history_capacity: DEFAULT_HISTORY_LEN,
            fade_margin_db: DEFAULT_FADE_MARGIN_DB,
            power_step_db: DEFAULT_POWER_STEP_DB,
            max_power_dbm: 14.0,
            min_sf: 7,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.history_capacity == 0 {
            return Err(Error::InvalidAdrState("history capacity must be at least 1".into()));
        }
        if self.snr_history.len() > self.history_capacity {
            return Err(Error::InvalidAdrState("history longer than its capacity".into()));
        }
        if !(7..=12).contains(&self.min_sf) || self.current_sf < self.min_sf || self.current_sf > 12 {
            return Err(Error::InvalidAdrState(format!(
                "need 7 <= min_sf ({}) <= current_sf ({}) <= 12",
                self.min_sf, self.current_sf
            )));
        }
        if self.current_power_dbm > self.max_power_dbm {
            return Err(Error::InvalidAdrState(format!(
                "power {} dBm above maximum {} dBm",
                self.current_power_dbm, self.max_power_dbm
            )));
        }
        Ok(())
    }

    /// Appends an uplink SNR, evicting the oldest once the window is full.
    pub fn record_snr(&mut self, snr_db: f64) {
        while self.snr_history.len() >= self.history_capacity {
            self.snr_history.pop_front();
        }
        self.snr_history.push_back(snr_db);
    }
}

/// `max(SNR history) − SNR_req(SF) − M`.
pub fn snr_margin(state: &AdrState) -> Result<f64> {
    let max = state
        .snr_history
        .iter()
        .copied()
        .reduce(f64::max)
        .ok_or(Error::EmptyHistory)?;
    Ok(max - link_budget::snr_req(state.current_sf)? - state.fade_margin_db)
}

/// One ADR decision. Returns the successor state; the input is untouched.
///
/// A positive margin lowers SF by one step. A non-positive margin at the
/// minimum SF raises power by `power_step_db`, clamped to `max_power_dbm`.
/// A non-positive margin above the minimum SF is left alone.
pub fn adr_step(state: &AdrState) -> Result<(AdrState, AdrDecision)> {
    state.validate()?;
    let margin = snr_margin(state)?;
    let mut next = state.clone();
    let decision = if margin > 0.0 {
        if state.current_sf > state.min_sf {
            next.current_sf -= 1;
            AdrDecision::LowerSf
        } else {
            AdrDecision::NoChange
        }
    } else if state.current_sf == state.min_sf {
        let raised = (state.current_power_dbm + state.power_step_db).min(state.max_power_dbm);
        if raised > state.current_power_dbm {
            next.current_power_dbm = raised;
            AdrDecision::RaisePower
        } else {
            AdrDecision::NoChange
        }
    } else {
        log::warn!(
            "SNR margin {margin:.2} dB <= 0 at SF{} above minimum SF{}; leaving settings unchanged",
            state.current_sf,
            state.min_sf
        );
        AdrDecision::NoChange
    };
    Ok((next, decision))
}
