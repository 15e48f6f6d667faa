//! Synthetic measurement campaigns with known ground truth.
#![allow(dead_code)]

use std::collections::BTreeSet;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use indoor_lora::link_budget;
use indoor_lora::pipeline::ObservationRecord;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const DEVICES: usize = 10;
pub const CLEAN_PER_DEVICE: usize = 900;
pub const NON_FINITE_PER_DEVICE: usize = 30;
pub const HIGH_SF_PER_DEVICE: usize = 20;
pub const DUPLICATES_PER_DEVICE: usize = 50;
pub const ROWS_PER_DEVICE: usize = CLEAN_PER_DEVICE + NON_FINITE_PER_DEVICE + HIGH_SF_PER_DEVICE + DUPLICATES_PER_DEVICE;

pub type FrameKey = (String, NaiveDateTime, u64);

pub struct Campaign {
    /// Rows in shuffled file order.
    pub records: Vec<ObservationRecord>,
    /// Retransmissions the dedup stage must drop.
    pub duplicates: BTreeSet<FrameKey>,
}

pub fn key(r: &ObservationRecord) -> FrameKey {
    (r.device_id.clone(), r.time, r.f_count)
}

fn start() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2024, 7, 1).unwrap().and_hms_opt(0, 0, 0).unwrap()
}

fn frame(
    rng: &mut ChaCha8Rng,
    device: &str,
    time: NaiveDateTime,
    f_count: u64,
    distance_m: f64,
    walls: (u32, u32),
    sf: u8,
) -> ObservationRecord {
    let noise = Normal::new(0.0, 6.0).unwrap();
    let pl = 31.3 + 36.2 * distance_m.log10() + 9.74 * f64::from(walls.0) + 2.64 * f64::from(walls.1)
        + noise.sample(rng);
    let rssi = ((17.26 - pl) * 100.0).round() / 100.0;
    let snr = (rng.random_range(-5.0..12.0f64) * 100.0).round() / 100.0;
    ObservationRecord {
        time,
        device_id: device.to_string(),
        co2_ppm: rng.random_range(400.0..900.0f64).round(),
        humidity_pct: (rng.random_range(30.0..60.0f64) * 10.0).round() / 10.0,
        pm25_ugm3: (rng.random_range(0.0..20.0f64) * 10.0).round() / 10.0,
        pressure_hpa: (rng.random_range(980.0..1020.0f64) * 10.0).round() / 10.0,
        temperature_c: (rng.random_range(18.0..27.0f64) * 10.0).round() / 10.0,
        rssi_dbm: rssi,
        snr_db: snr,
        sf,
        frequency_mhz: [868.1, 868.3, 868.5][rng.random_range(0..3)],
        f_count,
        p_count: f_count as f64,
        toa_s: 0.071936,
        distance_m,
        c_walls: f64::from(walls.0),
        w_walls: f64::from(walls.1),
        exp_pl_db: 17.26 - rssi,
        n_power_dbm: link_budget::noise_power(rssi, snr),
        esp_dbm: link_budget::esp(rssi, snr),
    }
}

/// `DEVICES × ROWS_PER_DEVICE` rows. Per device, frames are a minute apart;
/// a fixed number carry NaN or SF11/12, and a fixed number are re-sent
/// within one second with the same counter.
pub fn campaign(seed: u64) -> Campaign {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    let mut duplicates = BTreeSet::new();
    for d in 0..DEVICES {
        let device = format!("dev-{d:02}");
        let distance = rng.random_range(2.0..40.0f64).round();
        let walls = (rng.random_range(0..3), rng.random_range(0..5));
        let unique = CLEAN_PER_DEVICE + NON_FINITE_PER_DEVICE + HIGH_SF_PER_DEVICE;
        let mut kinds: Vec<u8> = std::iter::repeat_n(0, CLEAN_PER_DEVICE)
            .chain(std::iter::repeat_n(1, NON_FINITE_PER_DEVICE))
            .chain(std::iter::repeat_n(2, HIGH_SF_PER_DEVICE))
            .collect();
        rand::seq::SliceRandom::shuffle(kinds.as_mut_slice(), &mut rng);
        let mut clean_frames = Vec::new();
        for (i, kind) in kinds.into_iter().enumerate().take(unique) {
            let time = start() + Duration::seconds(60 * i as i64 + d as i64);
            let sf = if kind == 2 { rng.random_range(11..=12) } else { rng.random_range(7..=10) };
            let mut r = frame(&mut rng, &device, time, 100 + i as u64, distance, walls, sf);
            match kind {
                0 => clean_frames.push(records.len()),
                1 => r.pm25_ugm3 = f64::NAN,
                _ => {}
            }
            records.push(r);
        }
        let picks = rand::seq::index::sample(&mut rng, clean_frames.len(), DUPLICATES_PER_DEVICE);
        for p in picks {
            let original = records[clean_frames[p]].clone();
            let mut copy = frame(&mut rng, &device, original.time, original.f_count, distance, walls, original.sf);
            copy.time = original.time + Duration::milliseconds(rng.random_range(1..2000));
            duplicates.insert(key(&copy));
            records.push(copy);
        }
    }
    rand::seq::SliceRandom::shuffle(records.as_mut_slice(), &mut rng);
    Campaign { records, duplicates }
}
