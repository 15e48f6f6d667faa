//! `indoor-lora`: airtime, link budget, ADR replay, path-loss simulation,
//! the cleaning pipeline, and model fitting/evaluation from the shell.
//!
//! Exit status: 0 on success, 1 on a domain or I/O error, 2 on a usage error.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

/// Variable overriding the default output directory of `pipeline run`.
pub const OUT_DIR_ENV: &str = "INDOOR_LORA_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "indoor-lora", version, about = "LoRaWAN indoor propagation toolkit")]
struct Cli {
    /// Write the run manifest here instead of stderr.
    #[arg(long, global = true, value_name = "FILE")]
    manifest: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Symbol time, payload symbols and time on air of one packet.
    Airtime(AirtimeArgs),
    /// Hourly airtime of a JSON-lines schedule against a duty-cycle limit.
    DutyCycle(DutyCycleArgs),
    /// ESP, noise power and experimental path loss from RSSI/SNR.
    LinkBudget(LinkBudgetArgs),
    /// Replays an SNR trace through the ADR procedure.
    AdrSim(AdrSimArgs),
    /// Path loss predicted by a model file.
    Predict(PredictArgs),
    /// Simulated multi-wall corridor as CSV.
    Simulate(SimulateArgs),
    /// Cleaning pipeline.
    #[command(subcommand)]
    Pipeline(PipelineCommand),
    /// Fits a path-loss model to a measurement CSV.
    Fit(FitArgs),
    /// Scores a model file against a measurement CSV.
    Evaluate(EvaluateArgs),
    /// K-fold cross-validation of a model variant.
    CrossValidate(CrossValidateArgs),
}

#[derive(Debug, Subcommand)]
enum PipelineCommand {
    /// Ingest, dedup, SF filter, non-finite removal, anomaly filter, split.
    Run(PipelineArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct AirtimeArgs {
    #[arg(long)]
    pub sf: u8,
    /// Bandwidth in Hz.
    #[arg(long, default_value_t = 125_000.0)]
    pub bw: f64,
    /// Coding-rate index n of 4/(4+n).
    #[arg(long, default_value_t = 1)]
    pub cr: u8,
    #[arg(long)]
    pub payload: u16,
    #[arg(long, default_value_t = 8)]
    pub preamble: u16,
    #[arg(long)]
    pub crc: bool,
    /// Sets H = 1 in the payload-symbol count.
    #[arg(long)]
    pub implicit_header: bool,
    #[arg(long)]
    pub low_dr_opt: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct DutyCycleArgs {
    /// One JSON object per line: radio config fields plus `count`.
    #[arg(long)]
    pub schedule: PathBuf,
    #[arg(long, default_value_t = indoor_lora::lora_phy::DEFAULT_DUTY_CYCLE_LIMIT)]
    pub limit: f64,
}

#[derive(Debug, Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct LinkBudgetArgs {
    #[arg(long)]
    pub rssi: f64,
    #[arg(long)]
    pub snr: f64,
    /// Adds a receivability verdict for this SF.
    #[arg(long)]
    pub sf: Option<u8>,
    /// JSON link-budget parameters.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// JSON array of `{sf, snr_req_db, sensitivity_dbm}`.
    #[arg(long)]
    pub thresholds: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct AdrSimArgs {
    /// One SNR value (dB) per line.
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long, default_value_t = 12)]
    pub sf: u8,
    #[arg(long, default_value_t = 14.0)]
    pub power: f64,
    #[arg(long, default_value_t = 7)]
    pub min_sf: u8,
    #[arg(long, default_value_t = 14.0)]
    pub max_power: f64,
    #[arg(long, default_value_t = indoor_lora::adr::DEFAULT_HISTORY_LEN)]
    pub history: usize,
    #[arg(long, default_value_t = indoor_lora::adr::DEFAULT_FADE_MARGIN_DB)]
    pub fade_margin: f64,
    #[arg(long, default_value_t = indoor_lora::adr::DEFAULT_POWER_STEP_DB)]
    pub power_step: f64,
}

#[derive(Debug, Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub distance: f64,
    #[arg(long, default_value_t = 0)]
    pub brick: u32,
    #[arg(long, default_value_t = 0)]
    pub wood: u32,
    /// Carrier frequency in MHz.
    #[arg(long, default_value_t = 868.1)]
    pub freq: f64,
    /// Environment vector as inline JSON or a JSON file path.
    #[arg(long)]
    pub env_json: Option<String>,
    #[arg(long)]
    pub snr: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 50.0)]
    pub max_distance: f64,
    #[arg(long, default_value_t = 9.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 3.5)]
    pub exponent: f64,
    #[arg(long, default_value_t = 40.0)]
    pub pl0: f64,
    #[arg(long, default_value_t = 0.1)]
    pub step: f64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PipelineArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, env = OUT_DIR_ENV)]
    pub out_dir: PathBuf,
    /// Seed for the anomaly filter and the split; overrides the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub contamination: Option<f64>,
    /// JSON pipeline configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[arg(long, value_parser = parse_variant)]
    pub variant: indoor_lora::propagation::Variant,
    #[arg(long)]
    pub input: PathBuf,
    /// JSON fit configuration (initial values, solver settings).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model file destination.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report destination; stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CrossValidateArgs {
    #[arg(long, value_parser = parse_variant)]
    pub variant: indoor_lora::propagation::Variant,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn parse_variant(s: &str) -> Result<indoor_lora::propagation::Variant, String> {
    s.parse().map_err(|e: indoor_lora::Error| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let manifest = cli.manifest.as_deref();
    let result = match cli.command {
        Command::Airtime(a) => commands::airtime(&a, manifest),
        Command::DutyCycle(a) => commands::duty_cycle(&a, manifest),
        Command::LinkBudget(a) => commands::link_budget(&a, manifest),
        Command::AdrSim(a) => commands::adr_sim(&a, manifest),
        Command::Predict(a) => commands::predict(&a, manifest),
        Command::Simulate(a) => commands::simulate(&a, manifest),
        Command::Pipeline(PipelineCommand::Run(a)) => commands::pipeline_run(&a, manifest),
        Command::Fit(a) => commands::fit(&a, manifest),
        Command::Evaluate(a) => commands::evaluate(&a, manifest),
        Command::CrossValidate(a) => commands::cross_validate(&a, manifest),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
