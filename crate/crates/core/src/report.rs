//! Attack summaries and key verification.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aes::{aes128_encrypt_block, Block};
use crate::cpa::{AttackResult, CandidateScore};
use crate::power_model::PowerModelSpec;

pub const DEFAULT_TOP: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("key verification needs at least one plaintext/ciphertext pair")]
    NoPairs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ByteSummary {
    pub byte_index: usize,
    pub top: Vec<CandidateScore>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_byte: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_rank: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuccessMetrics {
    /// Bytes whose rank-1 candidate is the true byte.
    pub exact: usize,
    /// Bytes whose rank-1 candidate is the true byte or its complement.
    pub up_to_complement: usize,
}

impl SuccessMetrics {
    pub fn fully_recovered(&self) -> bool {
        self.exact == Block::LEN
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub model: PowerModelSpec,
    pub best_key: Block,
    pub bytes: Vec<ByteSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_key: Option<Block>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub success: Option<SuccessMetrics>,
}

pub fn summarize(result: &AttackResult, ground_truth: Option<&Block>) -> Summary {
    summarize_top(result, ground_truth, DEFAULT_TOP)
}

pub fn summarize_top(result: &AttackResult, ground_truth: Option<&Block>, top: usize) -> Summary {
    let bytes = result
        .per_byte_ranking
        .iter()
        .enumerate()
        .map(|(j, ranking)| ByteSummary {
            byte_index: j,
            top: ranking.iter().take(top).copied().collect(),
            true_byte: ground_truth.map(|k| k[j]),
            true_rank: ground_truth.map(|k| result.rank_of(j, k[j])),
        })
        .collect();
    let success = ground_truth.map(|k| {
        let best = &result.best_key;
        SuccessMetrics {
            exact: (0..Block::LEN).filter(|&j| best[j] == k[j]).count(),
            up_to_complement: (0..Block::LEN)
                .filter(|&j| best[j] == k[j] || best[j] == k[j] ^ 0xff)
                .count(),
        }
    });
    Summary {
        model: result.model,
        best_key: result.best_key,
        bytes,
        true_key: ground_truth.copied(),
        success,
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "model:    {}", self.model)?;
        writeln!(f, "best key: {}", self.best_key)?;
        if let Some(k) = &self.true_key {
            writeln!(f, "true key: {k}")?;
        }
        for b in &self.bytes {
            write!(f, "byte {:2}:", b.byte_index)?;
            if let (Some(t), Some(r)) = (b.true_byte, b.true_rank) {
                write!(f, " true {t:02x} rank {r:3} |")?;
            }
            for s in &b.top {
                write!(f, " {:02x}({:.4})", s.candidate, s.peak_abs_rho)?;
            }
            writeln!(f)?;
        }
        if let Some(s) = &self.success {
            writeln!(f, "exact rank-1 bytes:           {}/16", s.exact)?;
            writeln!(f, "rank-1 up to 0xff complement: {}/16", s.up_to_complement)?;
        }
        Ok(())
    }
}

/// True iff `candidate_key` encrypts every known plaintext to its ciphertext.
pub fn verify_key(
    candidate_key: &Block,
    known_pairs: &[(Block, Block)],
) -> Result<bool, ReportError> {
    if known_pairs.is_empty() {
        return Err(ReportError::NoPairs);
    }
    Ok(known_pairs
        .iter()
        .all(|(pt, ct)| aes128_encrypt_block(pt, candidate_key) == *ct))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpa::rank_scores;

    fn result_for(key: Block) -> AttackResult {
        let per_byte_ranking = (0..16)
            .map(|j| {
                let peaks: Vec<(f64, usize)> = (0..256)
                    .map(|k| (if k == key[j] as usize { 0.9 } else { 0.1 }, 0))
                    .collect();
                rank_scores(&peaks)
            })
            .collect();
        AttackResult {
            best_key: key,
            per_byte_ranking,
            model: PowerModelSpec::sbox_hw(),
        }
    }

    #[test]
    fn full_recovery_summary() {
        let key = Block(std::array::from_fn(|i| (i * 17) as u8));
        let s = summarize(&result_for(key), Some(&key));
        let m = s.success.unwrap();
        assert_eq!(m.exact, 16);
        assert!(m.fully_recovered());
        assert!(s
            .bytes
            .iter()
            .all(|b| b.true_rank == Some(1) && b.top.len() == 10));
    }

    #[test]
    fn complement_counts_separately() {
        let key = Block([0x0f; 16]);
        let mut guessed = key;
        guessed[3] ^= 0xff;
        guessed[4] ^= 0x01;
        let s = summarize(&result_for(guessed), Some(&key));
        let m = s.success.unwrap();
        assert_eq!(m.exact, 14);
        assert_eq!(m.up_to_complement, 15);
    }

    #[test]
    fn no_ground_truth_omits_ranks() {
        let key = Block([1; 16]);
        let s = summarize(&result_for(key), None);
        assert!(s.success.is_none());
        assert!(s.bytes.iter().all(|b| b.true_rank.is_none()));
        let json = serde_json::to_string(&s).unwrap();
        assert!(!json.contains("true_rank"));
        assert!(!s.to_string().contains("rank"));
    }

    #[test]
    fn verify_key_cases() {
        let key = Block::from_hex("000102030405060708090a0b0c0d0e0f").unwrap();
        let pairs: Vec<(Block, Block)> = (0..3u8)
            .map(|i| {
                let pt = Block([i; 16]);
                (pt, aes128_encrypt_block(&pt, &key))
            })
            .collect();
        assert_eq!(verify_key(&key, &pairs), Ok(true));
        let mut wrong = key;
        wrong[9] ^= 0x40;
        assert_eq!(verify_key(&wrong, &pairs), Ok(false));
        assert_eq!(verify_key(&key, &[]), Err(ReportError::NoPairs));
    }
}
