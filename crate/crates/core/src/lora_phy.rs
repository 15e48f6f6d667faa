//! LoRa PHY arithmetic: symbol duration, bit rate, payload symbol count,
//! time on air and hourly duty-cycle accounting.
//!
//! Header flag semantics: `implicit_header = true` corresponds to `H = 1`
//! in the payload-symbol formula, i.e. the explicit PHY header is *absent*
//! and its 20 bits are subtracted. This is the Semtech convention and is the
//! opposite of what a casual reading of "header on" might suggest.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Milliseconds in one hour.
pub const MS_PER_HOUR: f64 = 3_600_000.0;

/// Default regulatory duty-cycle limit (EU868 g1 sub-band, 1%).
pub const DEFAULT_DUTY_CYCLE_LIMIT: f64 = 0.01;

/// PHY parameters for a single LoRa transmission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    /// Spreading factor, 7..=12.
    pub sf: u8,
    /// Channel bandwidth in Hz.
    #[serde(default = "default_bw_hz")]
    pub bw_hz: f64,
    /// `n` in coding rate 4/(4+n), 1..=4.
    #[serde(default = "default_cr_index")]
    pub cr_index: u8,
    #[serde(default = "default_preamble")]
    pub preamble_symbols: u16,
    pub payload_bytes: u16,
    #[serde(default = "default_true")]
    pub crc_on: bool,
    #[serde(default)]
    pub implicit_header: bool,
    #[serde(default)]
    pub low_dr_opt: bool,
}

fn default_bw_hz() -> f64 {
    125_000.0
}
fn default_cr_index() -> u8 {
    1
}
fn default_preamble() -> u16 {
    8
}
fn default_true() -> bool {
    true
}

impl RadioConfig {
    /// SF/125 kHz/CR 4/5 with an 8-symbol preamble, CRC on, explicit header.
    pub fn new(sf: u8, payload_bytes: u16) -> Self {
        Self {
            sf,
            bw_hz: default_bw_hz(),
            cr_index: 1,
            preamble_symbols: 8,
            payload_bytes,
            crc_on: true,
            implicit_header: false,
            low_dr_opt: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(7..=12).contains(&self.sf) {
            return Err(Error::InvalidConfig(format!("SF{} outside 7..=12", self.sf)));
        }
        if !(self.bw_hz.is_finite() && self.bw_hz > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "bandwidth must be positive, got {} Hz",
                self.bw_hz
            )));
        }
        if !(1..=4).contains(&self.cr_index) {
            return Err(Error::InvalidConfig(format!(
                "coding-rate index {} outside 1..=4",
                self.cr_index
            )));
        }
        // Zero is accepted as the empty-payload limiting case.
        if self.payload_bytes > 255 {
            return Err(Error::InvalidConfig(format!(
                "payload of {} bytes exceeds 255",
                self.payload_bytes
            )));
        }
        Ok(())
    }

    /// Coding rate as a fraction, 4/(4+n).
    pub fn coding_rate(&self) -> f64 {
        4.0 / (4.0 + f64::from(self.cr_index))
    }
}

/// Symbol duration `2^SF / BW` in seconds.
pub fn symbol_duration(cfg: &RadioConfig) -> Result<f64> {
    cfg.validate()?;
    Ok(f64::from(1u32 << cfg.sf) / cfg.bw_hz)
}

/// Nominal bit rate `SF · BW / 2^SF · CR` in bit/s.
pub fn bit_rate(cfg: &RadioConfig) -> Result<f64> {
    cfg.validate()?;
    Ok(f64::from(cfg.sf) * cfg.bw_hz / f64::from(1u32 << cfg.sf) * cfg.coding_rate())
}

fn ceil_div(num: i64, den: i64) -> i64 {
    debug_assert!(den > 0);
    let q = num / den;
    if num % den > 0 {
        q + 1
    } else {
        q
    }
}

/// Number of payload symbols, computed on integers so the ceiling is exact.
pub fn payload_symbols(cfg: &RadioConfig) -> Result<u32> {
    cfg.validate()?;
    let sf = i64::from(cfg.sf);
    let de = i64::from(cfg.low_dr_opt);
    let den = 4 * (sf - 2 * de);
    if den <= 0 {
        return Err(Error::InvalidConfig(format!(
            "SF{} with low data-rate optimisation gives a non-positive denominator",
            cfg.sf
        )));
    }
    let num = 8 * i64::from(cfg.payload_bytes) - 4 * sf + 28 + 16 * i64::from(cfg.crc_on)
        - 20 * i64::from(cfg.implicit_header);
    let coded = ceil_div(num, den) * (i64::from(cfg.cr_index) + 4);
    Ok(8 + coded.max(0) as u32)
}

/// Time on air `(N_preamble + 4.25 + N_payload) · T_symbol` in seconds.
pub fn time_on_air(cfg: &RadioConfig) -> Result<f64> {
    let t_sym = symbol_duration(cfg)?;
    let n_pl = payload_symbols(cfg)?;
    Ok((f64::from(cfg.preamble_symbols) + 4.25 + f64::from(n_pl)) * t_sym)
}

/// One line of a transmission schedule: a config sent `count` times per hour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    #[serde(flatten)]
    pub config: RadioConfig,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryAirtime {
    pub sf: u8,
    pub toa_ms: f64,
    pub count: u32,
    pub airtime_ms: f64,
    pub fraction: f64,
    pub exceeds_limit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DutyCycleReport {
    pub total_airtime_ms_per_hour: f64,
    pub duty_cycle_fraction: f64,
    pub per_sf_airtime_ms: BTreeMap<u8, f64>,
    pub limit: f64,
    pub compliant: bool,
    pub entries: Vec<EntryAirtime>,
}

/// Aggregates hourly airtime over a schedule and checks it against `limit`.
///
/// An entry is flagged when its own airtime fraction exceeds the limit; the
/// report is compliant when the aggregate fraction does not.
pub fn duty_cycle(schedule: &[ScheduleEntry], limit: f64) -> Result<DutyCycleReport> {
    if !(limit.is_finite() && limit > 0.0 && limit <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "duty-cycle limit must be in (0, 1], got {limit}"
        )));
    }
    let mut entries = Vec::with_capacity(schedule.len());
    let mut per_sf = BTreeMap::new();
    let mut total = 0.0;
    for entry in schedule {
        let toa_ms = time_on_air(&entry.config)? * 1e3;
        let airtime_ms = toa_ms * f64::from(entry.count);
        let fraction = airtime_ms / MS_PER_HOUR;
        *per_sf.entry(entry.config.sf).or_insert(0.0) += airtime_ms;
        total += airtime_ms;
        entries.push(EntryAirtime {
            sf: entry.config.sf,
            toa_ms,
            count: entry.count,
            airtime_ms,
            fraction,
            exceeds_limit: fraction > limit,
        });
    }
    let duty_cycle_fraction = total / MS_PER_HOUR;
    Ok(DutyCycleReport {
        total_airtime_ms_per_hour: total,
        duty_cycle_fraction,
        per_sf_airtime_ms: per_sf,
        limit,
        compliant: duty_cycle_fraction <= limit,
        entries,
    })
}
