use ndarray::Array2;

use crate::aes::Block;
use crate::power_model::{hypothesize, PowerModelSpec};

use super::CpaError;

/// Number of candidates for one key byte.
pub const CANDIDATES: usize = 256;

/// Predicted leakage of every candidate for one key byte across all traces.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisMatrix {
    pub byte_index: usize,
    /// `256 x N`, candidate by trace.
    pub values: Array2<f64>,
}

/// Prediction for every (plaintext byte, candidate) pair, indexed `[p][k]`.
pub(crate) fn hypothesis_table(spec: &PowerModelSpec) -> Vec<[f64; CANDIDATES]> {
    (0..=255u8)
        .map(|p| {
            let mut row = [0.0; CANDIDATES];
            for (k, v) in row.iter_mut().enumerate() {
                *v = hypothesize(p, k as u8, spec);
            }
            row
        })
        .collect()
}

pub fn build_hypotheses(
    plaintexts: &[Block],
    byte_index: usize,
    spec: &PowerModelSpec,
) -> Result<HypothesisMatrix, CpaError> {
    if byte_index >= Block::LEN {
        return Err(CpaError::ByteIndex(byte_index));
    }
    let table = hypothesis_table(spec);
    let values = Array2::from_shape_fn((CANDIDATES, plaintexts.len()), |(k, i)| {
        table[plaintexts[i][byte_index] as usize][k]
    });
    Ok(HypothesisMatrix { byte_index, values })
}
