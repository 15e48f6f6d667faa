use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{ObservationRecord, RejectReason, Rejection, COLUMNS};
use crate::link_budget::{self, LinkBudgetParams};

pub const DEFAULT_DEDUP_WINDOW_S: f64 = 2.0;

/// Derived columns may disagree with their formulas by this much (dB).
pub const AUDIT_TOLERANCE_DB: f64 = 0.01;

/// Total order over records: time, counter, then every measurement bit-wise.
fn canonical_order(a: &ObservationRecord, b: &ObservationRecord) -> Ordering {
    a.time
        .cmp(&b.time)
        .then(a.f_count.cmp(&b.f_count))
        .then_with(|| {
            COLUMNS[2..]
                .iter()
                .map(|c| a.numeric(c).unwrap().total_cmp(&b.numeric(c).unwrap()))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

/// Drops retransmissions: per device in time order, a frame repeating the
/// previous *kept* frame's counter within `window_s` seconds is removed.
///
/// Output is ordered by (device, time) regardless of input order.
pub fn dedup_retransmissions(records: Vec<ObservationRecord>, window_s: f64) -> Vec<ObservationRecord> {
    let mut by_device: BTreeMap<String, Vec<ObservationRecord>> = BTreeMap::new();
    for r in records {
        by_device.entry(r.device_id.clone()).or_default().push(r);
    }
    let mut out = Vec::new();
    for (_, mut frames) in by_device {
        frames.sort_by(canonical_order);
        let mut last_kept: Option<(chrono::NaiveDateTime, u64)> = None;
        for frame in frames {
            let duplicate = last_kept.is_some_and(|(t, fc)| {
                let gap = (frame.time - t).as_seconds_f64();
                fc == frame.f_count && gap <= window_s
            });
            if !duplicate {
                last_kept = Some((frame.time, frame.f_count));
                out.push(frame);
            }
        }
    }
    out
}

pub fn filter_sf(records: Vec<ObservationRecord>, excluded: &BTreeSet<u8>) -> Vec<ObservationRecord> {
    records.into_iter().filter(|r| !excluded.contains(&r.sf)).collect()
}

/// Splits off rows with any missing or infinite measurement.
pub fn remove_non_finite(records: Vec<ObservationRecord>) -> (Vec<ObservationRecord>, Vec<Rejection>) {
    let mut kept = Vec::with_capacity(records.len());
    let mut rejected = Vec::new();
    for r in records {
        match r.first_non_finite() {
            None => kept.push(r),
            Some(field) => {
                let reason = if r.numeric(field).is_some_and(f64::is_nan) {
                    RejectReason::MissingValue
                } else {
                    RejectReason::NonFinite
                };
                rejected.push(Rejection { line: 0, field: field.to_string(), reason });
            }
        }
    }
    (kept, rejected)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub checked: usize,
    pub esp_violations: usize,
    pub noise_violations: usize,
    pub exp_pl_violations: usize,
}

impl AuditReport {
    pub fn total_violations(&self) -> usize {
        self.esp_violations + self.noise_violations + self.exp_pl_violations
    }
}

/// Checks `esp`, `n_power` and `exp_pl` against their defining formulas.
/// Mismatches are counted, never corrected.
pub fn audit_derived(records: &[ObservationRecord]) -> AuditReport {
    let params = LinkBudgetParams::DEPLOYMENT;
    let mut report = AuditReport { checked: records.len(), ..AuditReport::default() };
    for r in records {
        let (esp, noise) = r.derived_power();
        if !((r.esp_dbm - esp).abs() < AUDIT_TOLERANCE_DB) {
            report.esp_violations += 1;
        }
        if !((r.n_power_dbm - noise).abs() < AUDIT_TOLERANCE_DB) {
            report.noise_violations += 1;
        }
        let pl = link_budget::experimental_path_loss(&params, r.rssi_dbm);
        if !((r.exp_pl_db - pl).abs() < AUDIT_TOLERANCE_DB) {
            report.exp_pl_violations += 1;
        }
    }
    report
}
