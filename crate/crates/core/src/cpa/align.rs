//! Integer-shift trace realignment by cross-correlation against a reference.

use rayon::prelude::*;

use crate::traces::{TraceRecord, TraceSet};

use super::CpaError;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Shift to apply to `trace` (see [`apply_shift`]) that maximizes its centered
/// cross-correlation with `reference`. Candidates are scanned outward from zero
/// and only a strictly better score replaces the current one, so ties resolve
/// toward no shift.
pub fn estimate_shift(trace: &[f64], reference: &[f64], max_shift: usize) -> isize {
    let len = trace.len().min(reference.len());
    let mt = mean(trace);
    let mr = mean(reference);
    let score = |d: isize| -> f64 {
        // output[s] = trace[s - d]
        let (lo, hi) = if d >= 0 {
            (d as usize, len)
        } else {
            (0, len.saturating_sub(d.unsigned_abs()))
        };
        (lo..hi)
            .map(|s| (reference[s] - mr) * (trace[(s as isize - d) as usize] - mt))
            .sum()
    };
    let max_shift = max_shift.min(len.saturating_sub(1)) as isize;
    let mut best = (0isize, score(0));
    for m in 1..=max_shift {
        for d in [-m, m] {
            let sc = score(d);
            if sc > best.1 {
                best = (d, sc);
            }
        }
    }
    best.0
}

/// `output[s] = trace[s - shift]`; samples shifted in from outside are the
/// trace's own mean.
pub fn apply_shift(trace: &[f64], shift: isize) -> Vec<f64> {
    let fill = mean(trace);
    let len = trace.len() as isize;
    (0..len)
        .map(|s| {
            let src = s - shift;
            if (0..len).contains(&src) {
                trace[src as usize]
            } else {
                fill
            }
        })
        .collect()
}

fn to_f64(samples: &[f32]) -> Vec<f64> {
    samples.iter().map(|&v| f64::from(v)).collect()
}

/// Aligns every trace to `reference`, returning the new set and the shift applied
/// to each record.
pub fn realign_to(
    traces: &TraceSet,
    reference: &[f64],
    max_shift: usize,
) -> Result<(TraceSet, Vec<isize>), CpaError> {
    if reference.len() != traces.samples_per_trace() {
        return Err(CpaError::DimensionMismatch {
            what: "reference length vs traces",
            expected: traces.samples_per_trace(),
            found: reference.len(),
        });
    }
    let shifts: Vec<isize> = traces
        .records()
        .par_iter()
        .map(|r| estimate_shift(&to_f64(&r.samples), reference, max_shift))
        .collect();
    Ok((shifted(traces, &shifts), shifts))
}

fn shifted(traces: &TraceSet, shifts: &[isize]) -> TraceSet {
    let records = traces
        .records()
        .iter()
        .zip(shifts)
        .map(|(r, &d)| TraceRecord {
            plaintext: r.plaintext,
            samples: if d == 0 {
                r.samples.clone()
            } else {
                apply_shift(&to_f64(&r.samples), d)
                    .into_iter()
                    .map(|v| v as f32)
                    .collect()
            },
        })
        .collect();
    traces
        .with_records(records)
        .expect("shifting preserves trace length")
}

/// Refinement rounds [`realign`] runs after the initial alignment.
pub const DEFAULT_REFINE_PASSES: usize = 4;

/// Aligns every trace to record `reference_index`, then refines.
///
/// One noisy reference trace gives an unreliable cross-correlation, so after the
/// first pass the mean of the aligned set becomes the reference and every
/// original trace is aligned to it again. Each pass re-estimates the shift of
/// the original trace, so no trace ever moves by more than `max_shift`.
pub fn realign(
    traces: &TraceSet,
    reference_index: usize,
    max_shift: usize,
) -> Result<TraceSet, CpaError> {
    realign_with_shifts(traces, reference_index, max_shift, DEFAULT_REFINE_PASSES).map(|(ts, _)| ts)
}

pub fn realign_with_shifts(
    traces: &TraceSet,
    reference_index: usize,
    max_shift: usize,
    refine_passes: usize,
) -> Result<(TraceSet, Vec<isize>), CpaError> {
    let reference = traces
        .records()
        .get(reference_index)
        .ok_or(CpaError::ReferenceIndex {
            index: reference_index,
            len: traces.len(),
        })?;
    let (mut aligned, mut shifts) = realign_to(traces, &to_f64(&reference.samples), max_shift)?;
    for _ in 0..refine_passes {
        let template = mean_trace(&aligned);
        let (next, next_shifts) = realign_to(traces, &template, max_shift)?;
        if next_shifts == shifts {
            break;
        }
        aligned = next;
        shifts = next_shifts;
    }
    Ok((aligned, shifts))
}

/// Pointwise mean of all traces.
pub fn mean_trace(traces: &TraceSet) -> Vec<f64> {
    let mut acc = vec![0.0; traces.samples_per_trace()];
    for r in traces.records() {
        for (a, &v) in acc.iter_mut().zip(&r.samples) {
            *a += f64::from(v);
        }
    }
    let n = traces.len().max(1) as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}
