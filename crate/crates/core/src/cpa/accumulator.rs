//! Streaming correlation: one pass over the traces, snapshot at any point.
//!
//! State is kept as running means and centered second moments (count, mean of
//! the hypothesis and of the trace, their sums of squared deviations, and the
//! co-moment per candidate and sample). These carry the same information as raw
//! power sums but do not cancel catastrophically when the trace mean is large
//! compared to its spread. Two accumulators combine exactly with the pairwise
//! update, so a campaign may be split into segments in any way.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Zip};

use crate::aes::Block;
use crate::power_model::PowerModelSpec;

use super::correlation::{center_rows, normalize, peaks, CenteredColumns, CorrelationSurface};
use super::hypothesis::{hypothesis_table, CANDIDATES};
use super::CpaError;

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationAccumulator {
    byte_index: usize,
    spec: PowerModelSpec,
    count: usize,
    mean_h: Array1<f64>,
    m2_h: Array1<f64>,
    mean_t: Array1<f64>,
    m2_t: Array1<f64>,
    /// `256 x samples`
    co: Array2<f64>,
}

impl CorrelationAccumulator {
    pub fn new(byte_index: usize, spec: PowerModelSpec, samples: usize) -> Result<Self, CpaError> {
        if byte_index >= Block::LEN {
            return Err(CpaError::ByteIndex(byte_index));
        }
        Ok(CorrelationAccumulator {
            byte_index,
            spec,
            count: 0,
            mean_h: Array1::zeros(CANDIDATES),
            m2_h: Array1::zeros(CANDIDATES),
            mean_t: Array1::zeros(samples),
            m2_t: Array1::zeros(samples),
            co: Array2::zeros((CANDIDATES, samples)),
        })
    }

    pub fn byte_index(&self) -> usize {
        self.byte_index
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn samples(&self) -> usize {
        self.mean_t.len()
    }

    fn hypotheses_for(&self, plaintext: &Block) -> Array1<f64> {
        let p = plaintext[self.byte_index];
        (0..CANDIDATES)
            .map(|k| crate::power_model::hypothesize(p, k as u8, &self.spec))
            .collect()
    }

    /// Folds in one trace. Cost is `O(256 x samples)` regardless of how many
    /// traces came before.
    pub fn accumulate(&mut self, plaintext: &Block, trace: &[f64]) -> Result<(), CpaError> {
        if trace.len() != self.samples() {
            return Err(CpaError::DimensionMismatch {
                what: "trace length vs accumulator",
                expected: self.samples(),
                found: trace.len(),
            });
        }
        let h = self.hypotheses_for(plaintext);
        let t = ArrayView1::from(trace);
        self.count += 1;
        let n = self.count as f64;

        let dh = &h - &self.mean_h;
        self.mean_h.scaled_add(1.0 / n, &dh);
        Zip::from(&mut self.m2_h)
            .and(&dh)
            .and(&h)
            .and(&self.mean_h)
            .for_each(|m2, &d, &x, &m| *m2 += d * (x - m));

        let dt = &t - &self.mean_t;
        self.mean_t.scaled_add(1.0 / n, &dt);
        // deviation from the updated mean
        let dt_new = &t - &self.mean_t;
        Zip::from(&mut self.m2_t)
            .and(&dt)
            .and(&dt_new)
            .for_each(|m2, &a, &b| *m2 += a * b);

        for (mut row, &d) in self.co.rows_mut().into_iter().zip(&dh) {
            if d != 0.0 {
                row.scaled_add(d, &dt_new);
            }
        }
        Ok(())
    }

    pub fn accumulate_record(
        &mut self,
        record: &crate::traces::TraceRecord,
    ) -> Result<(), CpaError> {
        let trace: Vec<f64> = record.samples.iter().map(|&v| f64::from(v)).collect();
        self.accumulate(&record.plaintext, &trace)
    }

    /// Folds in a block of traces at once (`traces` is `N x samples`).
    pub fn accumulate_batch(
        &mut self,
        plaintexts: &[Block],
        traces: ArrayView2<f64>,
    ) -> Result<(), CpaError> {
        if traces.ncols() != self.samples() {
            return Err(CpaError::DimensionMismatch {
                what: "trace length vs accumulator",
                expected: self.samples(),
                found: traces.ncols(),
            });
        }
        let centered = CenteredColumns::new(traces);
        self.accumulate_centered(plaintexts, &centered)
    }

    pub(crate) fn accumulate_centered(
        &mut self,
        plaintexts: &[Block],
        traces: &CenteredColumns,
    ) -> Result<(), CpaError> {
        let n = plaintexts.len();
        if traces.centered.nrows() != n {
            return Err(CpaError::DimensionMismatch {
                what: "plaintexts vs traces",
                expected: traces.centered.nrows(),
                found: n,
            });
        }
        if n == 0 {
            return Ok(());
        }
        let table = hypothesis_table(&self.spec);
        let hyp = Array2::from_shape_fn((CANDIDATES, n), |(k, i)| {
            table[plaintexts[i][self.byte_index] as usize][k]
        });
        let (mean_h, m2_h, hc) = center_rows(hyp.view());
        let segment = CorrelationAccumulator {
            byte_index: self.byte_index,
            spec: self.spec,
            count: n,
            mean_h,
            m2_h,
            mean_t: traces.mean.clone(),
            m2_t: traces.sum_sq.clone(),
            co: hc.dot(&traces.centered),
        };
        self.merge(&segment)
    }

    /// Combines another accumulator over disjoint traces into this one.
    pub fn merge(&mut self, other: &CorrelationAccumulator) -> Result<(), CpaError> {
        if other.byte_index != self.byte_index || other.spec != self.spec {
            return Err(CpaError::IncompatibleAccumulators);
        }
        if other.samples() != self.samples() {
            return Err(CpaError::DimensionMismatch {
                what: "accumulator samples",
                expected: self.samples(),
                found: other.samples(),
            });
        }
        if other.count == 0 {
            return Ok(());
        }
        if self.count == 0 {
            *self = other.clone();
            return Ok(());
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        let weight = na * nb / n;

        let dh = &other.mean_h - &self.mean_h;
        let dt = &other.mean_t - &self.mean_t;

        self.co += &other.co;
        for (mut row, &d) in self.co.rows_mut().into_iter().zip(&dh) {
            if d != 0.0 {
                row.scaled_add(d * weight, &dt);
            }
        }
        self.m2_h += &other.m2_h;
        Zip::from(&mut self.m2_h)
            .and(&dh)
            .for_each(|m, &d| *m += d * d * weight);
        self.m2_t += &other.m2_t;
        Zip::from(&mut self.m2_t)
            .and(&dt)
            .for_each(|m, &d| *m += d * d * weight);
        self.mean_h.scaled_add(nb / n, &dh);
        self.mean_t.scaled_add(nb / n, &dt);
        self.count += other.count;
        Ok(())
    }

    /// Correlation surface over every trace seen so far.
    pub fn snapshot(&self) -> CorrelationSurface {
        let mut rho = self.co.clone();
        normalize(&mut rho, &self.m2_h, &self.m2_t);
        CorrelationSurface {
            byte_index: self.byte_index,
            rho,
        }
    }

    /// Peak |rho| per candidate, with its sample index.
    pub fn peak_scores(&self) -> Vec<(f64, usize)> {
        peaks(self.snapshot().rho.view())
    }

    /// Peak |rho| per candidate.
    pub fn peak_abs_rho(&self) -> Vec<f64> {
        self.peak_scores().into_iter().map(|(p, _)| p).collect()
    }
}
