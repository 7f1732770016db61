use ndarray::{s, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aes::Block;
use crate::power_model::PowerModelSpec;
use crate::traces::TraceSet;

use super::accumulator::CorrelationAccumulator;
use super::correlation::{
    correlate_centered, peaks, rank_of, rank_scores, CandidateScore, CenteredColumns,
};
use super::hypothesis::build_hypotheses;
use super::CpaError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub best_key: Block,
    /// For each key byte, all 256 candidates ordered by peak |rho|.
    pub per_byte_ranking: Vec<Vec<CandidateScore>>,
    pub model: PowerModelSpec,
}

impl AttackResult {
    /// 1-based rank of `candidate` for key byte `byte`.
    pub fn rank_of(&self, byte: usize, candidate: u8) -> usize {
        1 + self.per_byte_ranking[byte]
            .iter()
            .position(|s| s.candidate == candidate)
            .expect("ranking is a permutation")
    }
}

/// Full-key attack: one hypothesis matrix, surface and ranking per key byte.
pub fn attack(traces: &TraceSet, spec: &PowerModelSpec) -> Result<AttackResult, CpaError> {
    attack_matrix(&traces.plaintexts(), traces.to_matrix().view(), spec)
}

/// Same as [`attack`] on a plaintext list and an `N x samples` trace matrix.
pub fn attack_matrix(
    plaintexts: &[Block],
    traces: ArrayView2<f64>,
    spec: &PowerModelSpec,
) -> Result<AttackResult, CpaError> {
    check_pairs(plaintexts, traces)?;
    let centered = CenteredColumns::new(traces);
    let per_byte_ranking = (0..Block::LEN)
        .into_par_iter()
        .map(|byte| {
            let hyp = build_hypotheses(plaintexts, byte, spec)?;
            let surface = correlate_centered(&centered, &hyp)?;
            Ok(rank_scores(&peaks(surface.rho.view())))
        })
        .collect::<Result<Vec<_>, CpaError>>()?;
    let best_key = Block(std::array::from_fn(|j| per_byte_ranking[j][0].candidate));
    Ok(AttackResult {
        best_key,
        per_byte_ranking,
        model: *spec,
    })
}

fn check_pairs(plaintexts: &[Block], traces: ArrayView2<f64>) -> Result<(), CpaError> {
    if plaintexts.len() != traces.nrows() {
        return Err(CpaError::DimensionMismatch {
            what: "plaintexts vs traces",
            expected: traces.nrows(),
            found: plaintexts.len(),
        });
    }
    if plaintexts.len() < 2 {
        return Err(CpaError::InsufficientData(plaintexts.len()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionPoint {
    pub trace_count: usize,
    /// Indexed by candidate.
    pub peak_abs_rho: Vec<f64>,
    pub true_key_rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ByteEvolution {
    pub byte_index: usize,
    pub points: Vec<EvolutionPoint>,
}

/// Peak |rho| of all candidates, per byte, as traces accumulate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionSeries {
    pub model: PowerModelSpec,
    pub checkpoints: Vec<usize>,
    pub true_key: Option<Block>,
    pub bytes: Vec<ByteEvolution>,
}

impl EvolutionSeries {
    /// Number of bytes whose true key is ranked first at each checkpoint.
    pub fn bytes_recovered(&self) -> Option<Vec<usize>> {
        self.true_key?;
        Some(
            (0..self.checkpoints.len())
                .map(|c| {
                    self.bytes
                        .iter()
                        .filter(|b| b.points[c].true_key_rank == Some(1))
                        .count()
                })
                .collect(),
        )
    }
}

/// Snapshots every candidate's peak |rho| at each checkpoint in one pass over
/// the traces. Uses the trace set's ground-truth key, when present, for ranks.
pub fn evolution(
    traces: &TraceSet,
    spec: &PowerModelSpec,
    checkpoints: &[usize],
) -> Result<EvolutionSeries, CpaError> {
    evolution_matrix(
        &traces.plaintexts(),
        traces.to_matrix().view(),
        spec,
        checkpoints,
        traces.key_under_test,
    )
}

pub fn evolution_matrix(
    plaintexts: &[Block],
    traces: ArrayView2<f64>,
    spec: &PowerModelSpec,
    checkpoints: &[usize],
    true_key: Option<Block>,
) -> Result<EvolutionSeries, CpaError> {
    if plaintexts.len() != traces.nrows() {
        return Err(CpaError::DimensionMismatch {
            what: "plaintexts vs traces",
            expected: traces.nrows(),
            found: plaintexts.len(),
        });
    }
    if checkpoints.is_empty() {
        return Err(CpaError::Checkpoints("no checkpoints given".into()));
    }
    if checkpoints.windows(2).any(|w| w[0] > w[1]) {
        return Err(CpaError::Checkpoints(format!(
            "checkpoints must be ascending: {checkpoints:?}"
        )));
    }
    if checkpoints[0] == 0 || *checkpoints.last().unwrap() > plaintexts.len() {
        return Err(CpaError::Checkpoints(format!(
            "checkpoints must lie in 1..={}: {checkpoints:?}",
            plaintexts.len()
        )));
    }

    let samples = traces.ncols();
    let mut accs = (0..Block::LEN)
        .map(|b| CorrelationAccumulator::new(b, *spec, samples))
        .collect::<Result<Vec<_>, _>>()?;
    let mut bytes: Vec<ByteEvolution> = (0..Block::LEN)
        .map(|byte_index| ByteEvolution {
            byte_index,
            points: Vec::with_capacity(checkpoints.len()),
        })
        .collect();

    let mut seen = 0;
    for &cp in checkpoints {
        if cp > seen {
            let segment = CenteredColumns::new(traces.slice(s![seen..cp, ..]));
            let pts = &plaintexts[seen..cp];
            accs.par_iter_mut()
                .try_for_each(|acc| acc.accumulate_centered(pts, &segment))?;
            seen = cp;
        }
        let snapshots: Vec<Vec<f64>> = accs.par_iter().map(|a| a.peak_abs_rho()).collect();
        for (byte, peak_abs_rho) in snapshots.into_iter().enumerate() {
            let true_key_rank = true_key.map(|k| rank_of(&peak_abs_rho, k[byte]));
            bytes[byte].points.push(EvolutionPoint {
                trace_count: cp,
                peak_abs_rho,
                true_key_rank,
            });
        }
    }

    Ok(EvolutionSeries {
        model: *spec,
        checkpoints: checkpoints.to_vec(),
        true_key,
        bytes,
    })
}
