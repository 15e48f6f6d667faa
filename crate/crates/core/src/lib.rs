//! Indoor LoRaWAN propagation toolkit.
//!
//! Closed-form LoRa PHY arithmetic (symbol time, time on air, duty cycle),
//! link-budget quantities derived from RSSI/SNR, the ADR decision step,
//! multi-wall log-distance path-loss models with optional environmental
//! covariates, a Levenberg–Marquardt fitter for those models, and the
//! cleaning pipeline (dedup, SF filter, isolation-forest anomaly rejection,
//! splitting) used to prepare measurement data for fitting.

// `!(x > 0.0)` rejects NaN as well; used throughout input validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adr;
pub mod crossval;
pub mod error;
pub mod fitting;
pub mod link_budget;
pub mod lora_phy;
pub mod metrics;
pub mod pipeline;
pub mod propagation;

pub use error::{Error, Result};
