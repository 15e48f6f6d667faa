use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::{Duration, NaiveDate};
use indoor_lora::link_budget;
use indoor_lora::pipeline::{self, ObservationRecord};
use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_indoor-lora"));
    cmd.env_remove("INDOOR_LORA_OUT_DIR");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

/// Deterministic pseudo-noise in [-1, 1).
fn jitter(i: usize, salt: f64) -> f64 {
    ((i as f64 * 12.9898 + salt * 78.233).sin() * 43_758.545_3).fract()
}

/// `rows` frames over five devices, plus a retransmission every 50th frame.
fn measurement_csv(dir: &Path, rows: usize) -> PathBuf {
    let t0 = NaiveDate::from_ymd_opt(2024, 7, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let mut records = Vec::new();
    for i in 0..rows {
        let device = i % 5;
        let distance_m: f64 = [4.0, 12.0, 27.0, 8.0, 18.0][device];
        let (brick, wood) = [(0.0, 1.0), (1.0, 2.0), (2.0, 4.0), (0.0, 3.0), (1.0, 0.0)][device];
        let co2 = 500.0 + 200.0 * jitter(i, 1.0);
        let temperature = 22.0 + 3.0 * jitter(i, 2.0);
        let snr = 4.0 + 6.0 * jitter(i, 3.0);
        let pl = 31.3 + 36.2 * distance_m.log10() + 9.74 * brick + 2.64 * wood - 0.002 * co2 - 0.1 * temperature
            - 1.5 * snr
            + 4.0 * jitter(i, 4.0);
        let rssi = 17.26 - pl;
        let record = ObservationRecord {
            time: t0 + Duration::seconds(20 * i as i64),
            device_id: format!("node-{device}"),
            co2_ppm: co2,
            humidity_pct: 45.0 + 10.0 * jitter(i, 5.0),
            pm25_ugm3: 5.0 + 4.0 * jitter(i, 6.0),
            pressure_hpa: 1000.0 + 8.0 * jitter(i, 7.0),
            temperature_c: temperature,
            rssi_dbm: rssi,
            snr_db: snr,
            sf: 7 + (i % 4) as u8,
            frequency_mhz: 868.1,
            f_count: (i / 5) as u64,
            p_count: (i / 5) as f64,
            toa_s: 0.061696,
            distance_m,
            c_walls: brick,
            w_walls: wood,
            exp_pl_db: pl,
            n_power_dbm: link_budget::noise_power(rssi, snr),
            esp_dbm: link_budget::esp(rssi, snr),
        };
        if i % 50 == 0 {
            let mut copy = record.clone();
            copy.time += Duration::milliseconds(700);
            records.push(copy);
        }
        records.push(record);
    }
    let path = dir.join("measurements.csv");
    pipeline::write_records(fs::File::create(&path).unwrap(), &records).unwrap();
    path
}

#[test]
fn airtime_worked_example() {
    let out = run(&["airtime", "--sf", "7", "--bw", "125000", "--payload", "18", "--crc", "--implicit-header", "--cr", "1"]);
    let v = stdout_json(&out);
    assert!((v["toa_ms"].as_f64().unwrap() - 46.336).abs() < 1e-9);
    assert_eq!(v["n_payload"], 33);
    assert!((v["t_symbol_ms"].as_f64().unwrap() - 1.024).abs() < 1e-12);
    let manifest: Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(manifest["command"], "airtime");
    assert_eq!(manifest["config_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn usage_errors_exit_2() {
    let out = run(&["teleport"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(run(&["airtime", "--sf"]).status.code(), Some(2));
    assert_eq!(run(&["fit", "--variant", "cost231", "--input", "x.csv"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
}

#[test]
fn help_exits_0_everywhere() {
    for sub in [
        vec![],
        vec!["airtime"],
        vec!["duty-cycle"],
        vec!["link-budget"],
        vec!["adr-sim"],
        vec!["predict"],
        vec!["simulate"],
        vec!["pipeline"],
        vec!["pipeline", "run"],
        vec!["fit"],
        vec!["evaluate"],
        vec!["cross-validate"],
    ] {
        let mut args = sub.clone();
        args.push("--help");
        assert_eq!(run(&args).status.code(), Some(0), "{sub:?}");
    }
}

#[test]
fn domain_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let csv = measurement_csv(dir.path(), 2);
    let out = run(&["fit", "--variant", "mw", "--input", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("observations"));
    assert_eq!(run(&["airtime", "--sf", "13", "--payload", "18"]).status.code(), Some(1));
    assert_eq!(run(&["evaluate", "--model", "missing.json", "--input", "missing.csv"]).status.code(), Some(1));
}

#[test]
fn link_budget_and_duty_cycle() {
    let v = stdout_json(&run(&["link-budget", "--rssi", "-73", "--snr", "0", "--sf", "7"]));
    assert!((v["esp_dbm"].as_f64().unwrap() + 76.0103).abs() < 1e-4);
    assert!((v["exp_pl_db"].as_f64().unwrap() - 90.26).abs() < 1e-9);
    assert_eq!(v["receivable"], true);
    let v = stdout_json(&run(&["link-budget", "--rssi", "-73", "--snr", "0"]));
    assert!(v["receivable"].is_null());

    let dir = tempfile::tempdir().unwrap();
    let schedule = dir.path().join("schedule.jsonl");
    fs::write(&schedule, "{\"sf\":7,\"payload_bytes\":18,\"implicit_header\":true,\"count\":5}\n\n{\"sf\":12,\"payload_bytes\":18,\"count\":20}\n")
        .unwrap();
    let v = stdout_json(&run(&["duty-cycle", "--schedule", schedule.to_str().unwrap()]));
    assert_eq!(v["entries"].as_array().unwrap().len(), 2);
    assert!((v["per_sf_airtime_ms"]["7"].as_f64().unwrap() - 231.68).abs() < 1e-9);
    assert_eq!(v["limit"], 0.01);
}

#[test]
fn adr_sim_emits_one_line_per_uplink() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.txt");
    fs::write(&trace, "# uplink SNR\n9.5\n9.5\n9.5\n9.5\n9.5\n9.5\n-30\n").unwrap();
    let out = run(&["adr-sim", "--trace", trace.to_str().unwrap(), "--sf", "10", "--power", "10", "--history", "1"]);
    assert!(out.status.success());
    let lines: Vec<Value> =
        String::from_utf8(out.stdout).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 7);
    let sfs: Vec<u64> = lines.iter().map(|l| l["sf"].as_u64().unwrap()).collect();
    assert_eq!(sfs, [9, 8, 7, 7, 7, 7, 7]);
    assert_eq!(lines[2]["decision"], "LOWER_SF");
    assert_eq!(lines[6]["decision"], "RAISE_POWER");
    assert_eq!(lines[6]["power_dbm"], 12.0);
}

#[test]
fn simulate_is_seeded() {
    let a = run(&["simulate", "--seed", "7", "--max-distance", "20"]);
    let b = run(&["simulate", "--seed", "7", "--max-distance", "20"]);
    let c = run(&["simulate", "--seed", "8", "--max-distance", "20"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("distance,true_pl,noisy_pl,walls_crossed\n"));
    assert_eq!(text.lines().count(), 1 + 191);
}

const PIPELINE_FILES: [&str; 6] =
    ["cleaned.csv", "train.csv", "test.csv", "anomalies.csv", "daily_shares.csv", "summary.json"];

#[test]
fn pipeline_outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let csv = measurement_csv(dir.path(), 3000);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out_dir in [&a, &b] {
        let out = run(&[
            "pipeline", "run", "--input", csv.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap(),
            "--seed", "42", "--contamination", "0.01",
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in PIPELINE_FILES {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let summary: Value = serde_json::from_slice(&fs::read(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["counts"]["rows_read"], 3060);
    assert_eq!(summary["counts"]["after_dedup"], 3000);
    assert_eq!(summary["counts"]["anomalies"], 30);
    let manifest: Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"]["split"], 42);
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let csv = measurement_csv(dir.path(), 600);
    let target = dir.path().join("env-out");
    let out = bin()
        .args(["pipeline", "run", "--input", csv.to_str().unwrap()])
        .env("INDOOR_LORA_OUT_DIR", &target)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(target.join("cleaned.csv").exists());
}

#[test]
fn fit_predict_evaluate_cross_validate() {
    let dir = tempfile::tempdir().unwrap();
    measurement_csv(dir.path(), 900);
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();

    let out = run(&["fit", "--variant", "mw-ep", "--input", &p("measurements.csv"), "--out", &p("model.json"), "--report", &p("report.json")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&fs::read(p("report.json")).unwrap()).unwrap();
    assert_eq!(report["params"].as_array().unwrap().len(), 10);
    assert_eq!(report["converged"], true);
    assert!(report["rss"].as_f64().unwrap() > 0.0);

    let out = run(&["predict", "--model", &p("model.json"), "--distance", "12", "--brick", "1", "--wood", "2"]);
    assert_eq!(out.status.code(), Some(1), "mw-ep prediction without covariates");
    let env = r#"{"temperature_c":22,"humidity_pct":45,"pressure_hpa":1000,"pm25_ugm3":5,"co2_ppm":500}"#;
    let v = stdout_json(&run(&[
        "predict", "--model", &p("model.json"), "--distance", "12", "--brick", "1", "--wood", "2", "--env-json", env,
        "--snr", "4",
    ]));
    let expected = 31.3 + 36.2 * 12f64.log10() + 9.74 + 2.0 * 2.64 - 0.002 * 500.0 - 0.1 * 22.0 - 1.5 * 4.0;
    assert!((v["path_loss_db"].as_f64().unwrap() - expected).abs() < 1.5, "{v}");

    let v = stdout_json(&run(&["evaluate", "--model", &p("model.json"), "--input", &p("measurements.csv")]));
    assert!(v["rmse_db"].as_f64().unwrap() < 3.0);
    assert!(v["r2"].as_f64().unwrap() > 0.9);

    let v = stdout_json(&run(&["cross-validate", "--variant", "mw", "--folds", "5", "--seed", "42", "--input", &p("measurements.csv")]));
    assert_eq!(v["folds"].as_array().unwrap().len(), 5);
    assert!(v["validation_rmse_db"]["std"].as_f64().unwrap() >= 0.0);
}
