//! Measurement ingestion and the cleaning/splitting pipeline.
//!
//! Stage order is fixed:
//! ingest → dedup → SF filter → non-finite removal → per-device isolation
//! forest → train/test split.

mod clean;
mod ingest;
pub mod isolation_forest;
mod scaling;
mod split;

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::Observation;
use crate::link_budget;
use crate::metrics;
use crate::propagation::{EnvVector, WallCounts};

pub use clean::{audit_derived, dedup_retransmissions, filter_sf, remove_non_finite, AuditReport, DEFAULT_DEDUP_WINDOW_S};
pub use ingest::{ingest, ingest_path, write_records, IngestMode, IngestOutcome, RejectReason, Rejection};
pub use isolation_forest::{IsolationForest, IsolationForestConfig, IsolationResult};
pub use scaling::{standardize, Scaler};
pub use split::{daily_shares, kfold, split, DailyShare, Split, SplitSpec};

/// Column names in file order.
pub const COLUMNS: [&str; 20] = [
    "time", "device_id", "co2", "humidity", "pm25", "pressure", "temperature", "rssi", "snr", "SF",
    "frequency", "f_count", "p_count", "toa", "distance", "c_walls", "w_walls", "exp_pl", "n_power", "esp",
];

/// Features fed to the anomaly filter, in this order.
pub const ANOMALY_FEATURES: [&str; 7] = ["co2", "humidity", "pm25", "pressure", "temperature", "rssi", "snr"];

/// One dataset row. Measurement fields may hold NaN/∞ until
/// [`remove_non_finite`] has run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    /// Naive Europe/Berlin wall-clock time.
    pub time: NaiveDateTime,
    pub device_id: String,
    pub co2_ppm: f64,
    pub humidity_pct: f64,
    pub pm25_ugm3: f64,
    pub pressure_hpa: f64,
    pub temperature_c: f64,
    pub rssi_dbm: f64,
    pub snr_db: f64,
    pub sf: u8,
    pub frequency_mhz: f64,
    pub f_count: u64,
    pub p_count: f64,
    pub toa_s: f64,
    pub distance_m: f64,
    pub c_walls: f64,
    pub w_walls: f64,
    pub exp_pl_db: f64,
    pub n_power_dbm: f64,
    pub esp_dbm: f64,
}

impl ObservationRecord {
    /// Measurement columns by their file name.
    pub fn numeric(&self, column: &str) -> Option<f64> {
        Some(match column {
            "co2" => self.co2_ppm,
            "humidity" => self.humidity_pct,
            "pm25" => self.pm25_ugm3,
            "pressure" => self.pressure_hpa,
            "temperature" => self.temperature_c,
            "rssi" => self.rssi_dbm,
            "snr" => self.snr_db,
            "SF" => f64::from(self.sf),
            "frequency" => self.frequency_mhz,
            "f_count" => self.f_count as f64,
            "p_count" => self.p_count,
            "toa" => self.toa_s,
            "distance" => self.distance_m,
            "c_walls" => self.c_walls,
            "w_walls" => self.w_walls,
            "exp_pl" => self.exp_pl_db,
            "n_power" => self.n_power_dbm,
            "esp" => self.esp_dbm,
            _ => return None,
        })
    }

    /// Name of the first non-finite measurement field, if any.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        COLUMNS[2..].iter().copied().find(|c| !self.numeric(c).is_some_and(f64::is_finite))
    }

    pub fn env(&self) -> EnvVector {
        EnvVector {
            temperature_c: self.temperature_c,
            humidity_pct: self.humidity_pct,
            pressure_hpa: self.pressure_hpa,
            pm25_ugm3: self.pm25_ugm3,
            co2_ppm: self.co2_ppm,
        }
    }

    /// Regression view of the row, with `exp_pl` as the target.
    pub fn to_observation(&self) -> Observation {
        Observation {
            distance_m: self.distance_m,
            walls: WallCounts::new(self.c_walls as u32, self.w_walls as u32),
            freq_mhz: self.frequency_mhz,
            env: self.env(),
            snr_db: self.snr_db,
            path_loss_db: self.exp_pl_db,
        }
    }

    /// ESP and noise power recomputed from RSSI/SNR.
    pub fn derived_power(&self) -> (f64, f64) {
        (link_budget::esp(self.rssi_dbm, self.snr_db), link_budget::noise_power(self.rssi_dbm, self.snr_db))
    }
}

pub fn to_observations(records: &[ObservationRecord]) -> Vec<Observation> {
    records.iter().map(ObservationRecord::to_observation).collect()
}

/// Per-device packet delivery ratio, counters taken in time order.
pub fn device_pdr(records: &[ObservationRecord]) -> Result<BTreeMap<String, f64>> {
    let mut by_device: BTreeMap<&str, Vec<(NaiveDateTime, u64)>> = BTreeMap::new();
    for r in records {
        by_device.entry(&r.device_id).or_default().push((r.time, r.f_count));
    }
    by_device
        .into_iter()
        .map(|(device, mut frames)| {
            frames.sort();
            let counters: Vec<u64> = frames.into_iter().map(|(_, c)| c).collect();
            Ok((device.to_string(), metrics::pdr(&counters)?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub dedup_window_s: f64,
    pub excluded_sf: BTreeSet<u8>,
    pub forest: IsolationForestConfig,
    pub split: SplitSpec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            dedup_window_s: DEFAULT_DEDUP_WINDOW_S,
            excluded_sf: BTreeSet::from([11, 12]),
            forest: IsolationForestConfig::default(),
            split: SplitSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub rows_read: usize,
    pub ingest_rejected: usize,
    pub ingested: usize,
    pub after_dedup: usize,
    pub after_sf_filter: usize,
    pub after_non_finite: usize,
    pub anomalies: usize,
    pub cleaned: usize,
    pub train: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyFlag {
    pub device_id: String,
    pub time: NaiveDateTime,
    pub f_count: u64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub counts: StageCounts,
    pub ingest_rejections: Vec<Rejection>,
    pub non_finite_rejections: Vec<Rejection>,
    pub audit: AuditReport,
    pub anomalies: Vec<AnomalyFlag>,
    /// Records surviving every cleaning stage, in (device, time) order.
    pub cleaned: Vec<ObservationRecord>,
    pub train: Vec<ObservationRecord>,
    pub test: Vec<ObservationRecord>,
    pub daily_shares: Vec<DailyShare>,
    pub pdr_by_device: BTreeMap<String, f64>,
}

/// Runs every stage on already-ingested rows (see [`ingest`] with
/// [`IngestMode::Lenient`], which defers non-finite handling to this run).
pub fn run(ingested: IngestOutcome, config: &PipelineConfig) -> Result<PipelineOutcome> {
    config.forest.validate()?;
    config.split.validate()?;
    let mut counts = StageCounts {
        rows_read: ingested.rows_read,
        ingest_rejected: ingested.rejections.len(),
        ingested: ingested.records.len(),
        ..StageCounts::default()
    };
    let pdr_by_device = device_pdr(&ingested.records)?;

    let deduped = dedup_retransmissions(ingested.records, config.dedup_window_s);
    counts.after_dedup = deduped.len();

    let filtered = filter_sf(deduped, &config.excluded_sf);
    counts.after_sf_filter = filtered.len();

    let (finite, non_finite_rejections) = remove_non_finite(filtered);
    counts.after_non_finite = finite.len();

    let audit = audit_derived(&finite);
    if audit.total_violations() > 0 {
        log::warn!(
            "derived-column audit: {} esp, {} n_power, {} exp_pl mismatches",
            audit.esp_violations,
            audit.noise_violations,
            audit.exp_pl_violations
        );
    }

    let (cleaned, anomalies) = reject_anomalies(finite, &config.forest)?;
    counts.anomalies = anomalies.len();
    counts.cleaned = cleaned.len();
    if cleaned.len() < 2 {
        return Err(Error::TooFewRecords { needed: 2, got: cleaned.len() });
    }

    let parts = split(cleaned.len(), &config.split)?;
    let train: Vec<ObservationRecord> = parts.train.iter().map(|&i| cleaned[i].clone()).collect();
    let test: Vec<ObservationRecord> = parts.test.iter().map(|&i| cleaned[i].clone()).collect();
    counts.train = train.len();
    counts.test = test.len();
    let daily = daily_shares(&cleaned, &parts);

    Ok(PipelineOutcome {
        counts,
        ingest_rejections: ingested.rejections,
        non_finite_rejections,
        audit,
        anomalies,
        cleaned,
        train,
        test,
        daily_shares: daily,
        pdr_by_device,
    })
}

/// Fits one isolation forest per device and drops the flagged rows.
/// Input must be grouped by device (as produced by dedup).
pub fn reject_anomalies(
    records: Vec<ObservationRecord>,
    config: &IsolationForestConfig,
) -> Result<(Vec<ObservationRecord>, Vec<AnomalyFlag>)> {
    let mut kept = Vec::with_capacity(records.len());
    let mut flags = Vec::new();
    let mut groups: BTreeMap<String, Vec<ObservationRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.device_id.clone()).or_default().push(r);
    }
    for (device, group) in groups {
        if group.len() < 2 {
            kept.extend(group);
            continue;
        }
        let matrix = scaling::feature_matrix(&group, &config.features)?;
        let scaler = Scaler::fit_lenient(&matrix, &config.features);
        let scaled = scaler.transform(&matrix);
        let result = IsolationForest::fit(&scaled, config)?.detect(&scaled, config.contamination);
        log::debug!("device {device}: {} of {} rows flagged", result.n_flagged(), group.len());
        for (i, r) in group.into_iter().enumerate() {
            if result.flags[i] {
                flags.push(AnomalyFlag { device_id: r.device_id.clone(), time: r.time, f_count: r.f_count, score: result.scores[i] });
            } else {
                kept.push(r);
            }
        }
    }
    Ok((kept, flags))
}
