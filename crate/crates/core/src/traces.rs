//! Paired plaintext/trace records, the sole input to the attack.

use ndarray::Array2;
use thiserror::Error;

use crate::aes::Block;

/// Default sample rate stored as metadata on simulated campaigns (2.5 GS/s).
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 2.5e9;

#[derive(Debug, Error, PartialEq)]
pub enum TraceSetError {
    #[error("trace set has no records")]
    Empty,
    #[error("record {index} has {found} samples, expected {expected}")]
    LengthMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
}

/// One acquisition: the plaintext that was encrypted and the waveform recorded
/// while it was. The two never travel separately.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub plaintext: Block,
    pub samples: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    records: Vec<TraceRecord>,
    samples_per_trace: usize,
    pub sample_rate_hz: f64,
    /// Ground-truth key, known for simulated campaigns only.
    pub key_under_test: Option<Block>,
}

impl TraceSet {
    /// Builds a trace set, checking that every trace has `samples_per_trace` samples.
    ///
    /// An empty record list is allowed here; attack operations reject it.
    pub fn new(
        records: Vec<TraceRecord>,
        samples_per_trace: usize,
        sample_rate_hz: f64,
        key_under_test: Option<Block>,
    ) -> Result<Self, TraceSetError> {
        if let Some((index, r)) = records
            .iter()
            .enumerate()
            .find(|(_, r)| r.samples.len() != samples_per_trace)
        {
            return Err(TraceSetError::LengthMismatch {
                index,
                expected: samples_per_trace,
                found: r.samples.len(),
            });
        }
        Ok(TraceSet {
            records,
            samples_per_trace,
            sample_rate_hz,
            key_under_test,
        })
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<TraceRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn samples_per_trace(&self) -> usize {
        self.samples_per_trace
    }

    pub fn plaintexts(&self) -> Vec<Block> {
        self.records.iter().map(|r| r.plaintext).collect()
    }

    /// Traces as an `N x samples_per_trace` matrix in double precision.
    pub fn to_matrix(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.len(), self.samples_per_trace));
        for (mut row, rec) in m.rows_mut().into_iter().zip(&self.records) {
            for (dst, &src) in row.iter_mut().zip(&rec.samples) {
                *dst = f64::from(src);
            }
        }
        m
    }

    /// The first `n` records (all of them if `n` exceeds the length).
    pub fn prefix(&self, n: usize) -> TraceSet {
        TraceSet {
            records: self.records[..n.min(self.len())].to_vec(),
            ..self.clone_metadata()
        }
    }

    /// Same metadata with a different record list of the same trace length.
    pub fn with_records(&self, records: Vec<TraceRecord>) -> Result<TraceSet, TraceSetError> {
        TraceSet::new(
            records,
            self.samples_per_trace,
            self.sample_rate_hz,
            self.key_under_test,
        )
    }

    fn clone_metadata(&self) -> TraceSet {
        TraceSet {
            records: Vec::new(),
            samples_per_trace: self.samples_per_trace,
            sample_rate_hz: self.sample_rate_hz,
            key_under_test: self.key_under_test,
        }
    }
}
