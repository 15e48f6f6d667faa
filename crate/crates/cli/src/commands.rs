use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

use indoor_lora::adr::{self, AdrState};
use indoor_lora::crossval;
use indoor_lora::fitting::{self, FitConfig, Observation};
use indoor_lora::link_budget::{self, LinkBudgetParams, ThresholdTable};
use indoor_lora::lora_phy::{self, RadioConfig, ScheduleEntry};
use indoor_lora::metrics;
use indoor_lora::pipeline::{self, IngestMode, PipelineConfig};
use indoor_lora::propagation::scene::{simulate_scene, SceneSpec};
use indoor_lora::propagation::{EnvVector, PathLossModel, Variant, WallCounts};

use crate::manifest::RunManifest;
use crate::{
    AdrSimArgs, AirtimeArgs, CrossValidateArgs, DutyCycleArgs, EvaluateArgs, FitArgs, LinkBudgetArgs, PipelineArgs,
    PredictArgs, SimulateArgs,
};

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

/// Writes to `path` if given, else prints to stdout; records the output.
fn deliver<T: Serialize>(value: &T, path: Option<&Path>, manifest: &mut RunManifest) -> Result<()> {
    match path {
        Some(p) => {
            write_json(p, value)?;
            manifest.outputs.push(p.to_path_buf());
            Ok(())
        }
        None => print_json(value),
    }
}

/// Measurement CSV as regression rows. Malformed rows are dropped with a warning.
fn load_observations(path: &Path, manifest: &mut RunManifest) -> Result<Vec<Observation>> {
    manifest.input(path)?;
    let outcome = pipeline::ingest_path(path, IngestMode::Strict)?;
    if !outcome.rejections.is_empty() {
        log::warn!("{}: {} of {} rows rejected", path.display(), outcome.rejections.len(), outcome.rows_read);
    }
    Ok(pipeline::to_observations(&outcome.records))
}

fn load_fit_config(path: Option<&Path>, manifest: &mut RunManifest) -> Result<FitConfig> {
    match path {
        Some(p) => {
            manifest.input(p)?;
            let config: FitConfig = read_json(p)?;
            config.solver.validate()?;
            Ok(config)
        }
        None => Ok(FitConfig::default()),
    }
}

#[derive(Serialize)]
struct AirtimeOutput {
    t_symbol_ms: f64,
    n_payload: u32,
    toa_ms: f64,
}

pub fn airtime(args: &AirtimeArgs, manifest_path: Option<&Path>) -> Result<()> {
    let mut manifest = RunManifest::new("airtime");
    manifest.config(args)?;
    let cfg = RadioConfig {
        sf: args.sf,
        bw_hz: args.bw,
        cr_index: args.cr,
        preamble_symbols: args.preamble,
        payload_bytes: args.payload,
        crc_on: args.crc,
        implicit_header: args.implicit_header,
        low_dr_opt: args.low_dr_opt,
    };
    print_json(&AirtimeOutput {
        t_symbol_ms: lora_phy::symbol_duration(&cfg)? * 1e3,
        n_payload: lora_phy::payload_symbols(&cfg)?,
        toa_ms: lora_phy::time_on_air(&cfg)? * 1e3,
    })?;
    manifest.emit(manifest_path)
}

pub fn duty_cycle(args: &DutyCycleArgs, manifest_path: Option<&Path>) -> Result<()> {
    let mut manifest = RunManifest::new("duty-cycle");
    manifest.config(args)?;
    manifest.input(&args.schedule)?;
    let file = File::open(&args.schedule).with_context(|| format!("opening {}", args.schedule.display()))?;
    let mut schedule = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ScheduleEntry =
            serde_json::from_str(&line).with_context(|| format!("schedule line {}", i + 1))?;
        schedule.push(entry);
    }
    print_json(&lora_phy::duty_cycle(&schedule, args.limit)?)?;
    manifest.emit(manifest_path)
}

#[derive(Serialize)]
struct LinkBudgetOutput {
    esp_dbm: f64,
    noise_dbm: f64,
    exp_pl_db: f64,
    receivable: Option<bool>,
}

pub fn link_budget(args: &LinkBudgetArgs, manifest_path: Option<&Path>) -> Result<()> {
    let mut manifest = RunManifest::new("link-budget");
    manifest.config(args)?;
    let params = match &args.params {
        Some(p) => {
            manifest.input(p)?;
            let params: LinkBudgetParams = read_json(p)?;
            params.validate()?;
            params
        }
        None => LinkBudgetParams::default(),
    };
    let table = match &args.thresholds {
        Some(p) => {
            manifest.input(p)?;
            read_json::<ThresholdTable>(p)?
        }
        None => ThresholdTable::default(),
    };
    if !(args.rssi.is_finite() && args.snr.is_finite()) {
        bail!("rssi and snr must be finite");
    }
    let esp_dbm = link_budget::esp(args.rssi, args.snr);
    let receivable = args.sf.map(|sf| table.receivable(esp_dbm, args.snr, sf)).transpose()?;
    print_json(&LinkBudgetOutput {
        esp_dbm,
        noise_dbm: link_budget::noise_power(args.rssi, args.snr),
        exp_pl_db: link_budget::experimental_path_loss(&params, args.rssi),
        receivable,
    })?;
    manifest.emit(manifest_path)
}

#[derive(Serialize)]
struct AdrLine {
    uplink: usize,
    snr_db: f64,
    margin_db: f64,
    decision: adr::AdrDecision,
    sf: u8,
    power_dbm: f64,
}

pub fn adr_sim(args: &AdrSimArgs, manifest_path: Option<&Path>) -> Result<()> {
    let mut manifest = RunManifest::new("adr-sim");
    manifest.config(args)?;
    manifest.input(&args.trace)?;
    let mut state = AdrState {
        history_capacity: args.history,
        fade_margin_db: args.fade_margin,
        power_step_db: args.power_step,
        max_power_dbm: args.max_power,
        min_sf: args.min_sf,
        ..AdrState::new(args.sf, args.power)
    };
    state.validate()?;
    let file = File::open(&args.trace).with_context(|| format!("opening {}", args.trace.display()))?;
    let mut out = BufWriter::new(io::stdout().lock());
    let mut uplink = 0;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let snr_db: f64 = text.parse().with_context(|| format!("trace line {}: not a number", i + 1))?;
        if !snr_db.is_finite() {
            bail!("trace line {}: SNR must be finite", i + 1);
        }
        uplink += 1;
        state.record_snr(snr_db);
        let margin_db = adr::snr_margin(&state)?;
        let (next, decision) = adr::adr_step(&state)?;
        state = next;
        serde_json::to_writer(
            &mut out,
            &AdrLine { uplink, snr_db, margin_db, decision, sf: state.current_sf, power_dbm: state.current_power_dbm },
        )?;
        writeln!(out)?;
    }
    out.flush()?;
    manifest.emit(manifest_path)
}

fn parse_env(arg: &str) -> Result<EnvVector> {
    if arg.trim_start().starts_with('{') {
        serde_json::from_str(arg).context("parsing --env-json")
    } else {
        read_json(Path::new(arg))
    }
}

#[derive(Serialize)]
struct PredictOutput {
    variant: Variant,
    path_loss_db: f64,
}

pub fn predict(args: &PredictArgs, manifest_path: Option<&Path>) -> Result<()> {
    let mut manifest = RunManifest::new("predict");
    manifest.config(args)?;
    manifest.input(&args.model)?;
    let model: PathLossModel = read_json(&args.model)?;
    model.validate()?;
    let (env, snr_db) = match model.variant {
        Variant::Mw => (EnvVector::default(), 0.0),
        Variant::MwEp => {
            let Some(env) = &args.env_json else { bail!("an mw-ep model needs --env-json") };
            let Some(snr) = args.snr else { bail!("an mw-ep model needs --snr") };
            (parse_env(env)?, snr)
        }
    };
    let obs = Observation {
        distance_m: args.distance,
        walls: WallCounts::new(args.brick, args.wood),
        freq_mhz: args.freq,
        env,
        snr_db,
        path_loss_db: f64::NAN,
    };
    print_json(&PredictOutput { variant: model.variant, path_loss_db: fitting::predict(&model, &obs)? })?;
    manifest.emit(manifest_path)
}

pub fn simulate(args: &SimulateArgs, manifest_path: Option<&Path>) -> Result<()> {
    let mut manifest = RunManifest::new("simulate");
    manifest.config(args)?;
    manifest.seeds.insert("scene", args.seed);
    let spec = SceneSpec {
        pl0_db: args.pl0,
        exponent: args.exponent,
        sigma_db: args.sigma,
        max_distance_m: args.max_distance,
        step_m: args.step,
        ..SceneSpec::default()
    };
    let scene = simulate_scene(&spec, args.seed)?;
    let sink: Box<dyn Write> = match &args.out {
        Some(p) => {
            manifest.outputs.push(p.clone());
            Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)
        }
        None => Box::new(io::stdout().lock()),
    };
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(["distance", "true_pl", "noisy_pl", "walls_crossed"])?;
    for s in &scene.samples {
        writer.write_record([
            s.distance_m.to_string(),
            s.true_pl_db.to_string(),
            s.noisy_pl_db.to_string(),
            s.walls_crossed.to_string(),
        ])?;
    }
    writer.flush()?;
    manifest.emit(manifest_path)
}

#[derive(Serialize)]
struct PipelineSummary<'a> {
    config: &'a PipelineConfig,
    counts: &'a pipeline::StageCounts,
    audit: &'a pipeline::AuditReport,
    pdr_by_device: &'a std::collections::BTreeMap<String, f64>,
    ingest_rejections: &'a [pipeline::Rejection],
    non_finite_rejections: &'a [pipeline::Rejection],
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn pipeline_run(args: &PipelineArgs, manifest_path: Option<&Path>) -> Result<()> {
    let mut manifest = RunManifest::new("pipeline run");
    let mut config = match &args.config {
        Some(p) => {
            manifest.input(p)?;
            read_json::<PipelineConfig>(p)?
        }
        None => PipelineConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.forest.seed = seed;
        config.split.seed = seed;
    }
    if let Some(c) = args.contamination {
        config.forest.contamination = c;
    }
    manifest.config(&config)?;
    manifest.seeds.insert("isolation_forest", config.forest.seed);
    manifest.seeds.insert("split", config.split.seed);
    manifest.input(&args.input)?;

    let ingested = pipeline::ingest_path(&args.input, IngestMode::Lenient)?;
    let outcome = pipeline::run(ingested, &config)?;
    log::info!("pipeline counts: {:?}", outcome.counts);

    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    let out = |name: &str| -> PathBuf { args.out_dir.join(name) };
    for (name, records) in [("cleaned.csv", &outcome.cleaned), ("train.csv", &outcome.train), ("test.csv", &outcome.test)]
    {
        let path = out(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        pipeline::write_records(BufWriter::new(file), records)?;
        manifest.outputs.push(path);
    }
    write_csv(&out("anomalies.csv"), &outcome.anomalies)?;
    write_csv(&out("daily_shares.csv"), &outcome.daily_shares)?;
    write_json(
        &out("summary.json"),
        &PipelineSummary {
            config: &config,
            counts: &outcome.counts,
            audit: &outcome.audit,
            pdr_by_device: &outcome.pdr_by_device,
            ingest_rejections: &outcome.ingest_rejections,
            non_finite_rejections: &outcome.non_finite_rejections,
        },
    )?;
    manifest.outputs.extend([out("anomalies.csv"), out("daily_shares.csv"), out("summary.json")]);

    let manifest_file = manifest_path.map(Path::to_path_buf).unwrap_or_else(|| out("manifest.json"));
    manifest.emit(Some(&manifest_file))
}

pub fn fit(args: &FitArgs, manifest_path: Option<&Path>) -> Result<()> {
    let mut manifest = RunManifest::new("fit");
    let config = load_fit_config(args.config.as_deref(), &mut manifest)?;
    manifest.config(&(args, &config))?;
    let obs = load_observations(&args.input, &mut manifest)?;
    let report = fitting::fit(&obs, args.variant, &config)?;
    if !report.converged {
        log::warn!("solver stopped after {} iterations without converging", report.iterations);
    }
    if let Some(p) = &args.out {
        write_json(p, &report.model())?;
        manifest.outputs.push(p.clone());
    }
    deliver(&report, args.report.as_deref(), &mut manifest)?;
    manifest.emit(manifest_path)
}

pub fn evaluate(args: &EvaluateArgs, manifest_path: Option<&Path>) -> Result<()> {
    let mut manifest = RunManifest::new("evaluate");
    manifest.config(args)?;
    manifest.input(&args.model)?;
    let model: PathLossModel = read_json(&args.model)?;
    model.validate()?;
    let obs = load_observations(&args.input, &mut manifest)?;
    let report = metrics::evaluate(&model, &obs)?;
    deliver(&report, args.report.as_deref(), &mut manifest)?;
    manifest.emit(manifest_path)
}

pub fn cross_validate(args: &CrossValidateArgs, manifest_path: Option<&Path>) -> Result<()> {
    let mut manifest = RunManifest::new("cross-validate");
    let config = load_fit_config(args.config.as_deref(), &mut manifest)?;
    manifest.config(&(args, &config))?;
    manifest.seeds.insert("folds", args.seed);
    let obs = load_observations(&args.input, &mut manifest)?;
    let report = crossval::cross_validate(&obs, args.variant, args.folds, args.seed, &config)?;
    deliver(&report, args.report.as_deref(), &mut manifest)?;
    manifest.emit(manifest_path)
}
