//! Correlation power analysis of AES-128 first-round leakage.
//!
//! The crate contains the attack (hypotheses, Pearson correlation, ranking,
//! streaming accumulation and evolution tracking), a simulator that produces
//! realistic trace campaigns with noise, DC drift, jitter and lost captures, a
//! binary trace file format and summary reporting.

pub mod aes;
pub mod calibrate;
pub mod cpa;
pub mod power_model;
pub mod report;
pub mod sim;
pub mod trace_io;
pub mod traces;

pub use aes::{aes128_encrypt_block, Block, IntermediateTarget};
pub use cpa::{attack, evolution, AttackResult, CpaError, EvolutionSeries};
pub use power_model::{LeakageMetric, Polarity, PowerModelSpec};
pub use sim::{acquire_campaign, LeakageConfig};
pub use traces::{TraceRecord, TraceSet};
