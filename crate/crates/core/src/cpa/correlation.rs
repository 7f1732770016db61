use std::cmp::Ordering;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::hypothesis::{HypothesisMatrix, CANDIDATES};
use super::CpaError;

/// Pearson coefficient of every (candidate, sample) pair for one key byte.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSurface {
    pub byte_index: usize,
    /// `256 x samples`, every entry in `[-1, 1]`.
    pub rho: Array2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub candidate: u8,
    pub peak_abs_rho: f64,
    /// Sample index where the peak was found.
    pub peak_sample: usize,
}

/// Sample Pearson correlation. Zero when either input has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, CpaError> {
    if x.len() != y.len() {
        return Err(CpaError::DimensionMismatch {
            what: "pearson inputs",
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(CpaError::InsufficientData(x.len()));
    }
    let (mx, vx) = centered(x);
    let (my, vy) = centered(y);
    if vx == 0.0 || vy == 0.0 {
        return Ok(0.0);
    }
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok((cov / (vx * vy).sqrt()).clamp(-1.0, 1.0))
}

fn centered(v: &[f64]) -> (f64, f64) {
    let m = exact_mean(v.iter().copied(), v.len());
    let ss = v.iter().map(|a| (a - m) * (a - m)).sum();
    (m, ss)
}

/// Mean that is exactly the common value when all inputs are equal, so that a
/// constant column centers to exact zeros.
pub(crate) fn exact_mean(values: impl Iterator<Item = f64> + Clone, n: usize) -> f64 {
    let mut it = values.clone();
    let Some(first) = it.next() else { return 0.0 };
    if it.all(|v| v == first) {
        return first;
    }
    values.sum::<f64>() / n as f64
}

/// Column-centered data with per-column sums of squares.
#[derive(Debug, Clone)]
pub(crate) struct CenteredColumns {
    pub mean: Array1<f64>,
    pub sum_sq: Array1<f64>,
    /// `N x columns`
    pub centered: Array2<f64>,
}

impl CenteredColumns {
    pub fn new(data: ArrayView2<f64>) -> Self {
        let n = data.nrows();
        let mean: Array1<f64> = data
            .axis_iter(Axis(1))
            .map(|col| exact_mean(col.iter().copied(), n))
            .collect();
        let centered = &data - &mean;
        let sum_sq = centered.map_axis(Axis(0), |col| col.dot(&col));
        CenteredColumns {
            mean,
            sum_sq,
            centered,
        }
    }
}

/// Row-centered hypothesis values.
pub(crate) fn center_rows(values: ArrayView2<f64>) -> (Array1<f64>, Array1<f64>, Array2<f64>) {
    let n = values.ncols();
    let mean: Array1<f64> = values
        .axis_iter(Axis(0))
        .map(|row| exact_mean(row.iter().copied(), n))
        .collect();
    let centered = &values - &mean.view().insert_axis(Axis(1));
    let sum_sq = centered.map_axis(Axis(1), |row| row.dot(&row));
    (mean, sum_sq, centered)
}

/// Rows as `n * h - sum(h)`, the deviations scaled by `n`. For integer-valued
/// hypotheses this is exact, so a row and its mirror image `c - h` come out
/// as exact negatives of each other and their |rho| ties bit for bit.
fn scaled_center_rows(values: ArrayView2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = values.ncols() as f64;
    let sums = values.sum_axis(Axis(1));
    let centered = &values * n - sums.view().insert_axis(Axis(1));
    let sum_sq = centered.map_axis(Axis(1), |row| row.dot(&row));
    (sum_sq, centered)
}

pub(crate) fn normalize(co: &mut Array2<f64>, sum_sq_h: &Array1<f64>, sum_sq_t: &Array1<f64>) {
    for (mut row, &vh) in co.rows_mut().into_iter().zip(sum_sq_h) {
        for (c, &vt) in row.iter_mut().zip(sum_sq_t) {
            *c = if vh > 0.0 && vt > 0.0 {
                (*c / (vh * vt).sqrt()).clamp(-1.0, 1.0)
            } else {
                0.0
            };
        }
    }
}

/// Batch correlation of every hypothesis row against every trace column.
///
/// `traces` is `N x samples`.
pub fn correlate_matrix(
    traces: ArrayView2<f64>,
    hyp: &HypothesisMatrix,
) -> Result<CorrelationSurface, CpaError> {
    let centered = CenteredColumns::new(traces);
    correlate_centered(&centered, hyp)
}

pub(crate) fn correlate_centered(
    traces: &CenteredColumns,
    hyp: &HypothesisMatrix,
) -> Result<CorrelationSurface, CpaError> {
    let n = traces.centered.nrows();
    if hyp.values.ncols() != n {
        return Err(CpaError::DimensionMismatch {
            what: "hypothesis columns vs traces",
            expected: n,
            found: hyp.values.ncols(),
        });
    }
    if n < 2 {
        return Err(CpaError::InsufficientData(n));
    }
    let (sum_sq_h, hc) = scaled_center_rows(hyp.values.view());
    let mut co = hc.dot(&traces.centered);
    normalize(&mut co, &sum_sq_h, &traces.sum_sq);
    Ok(CorrelationSurface {
        byte_index: hyp.byte_index,
        rho: co,
    })
}

/// `rho[k][s] = pearson(hyp row k, trace column s)`.
pub fn correlate(
    traces: &crate::traces::TraceSet,
    hyp: &HypothesisMatrix,
) -> Result<CorrelationSurface, CpaError> {
    correlate_matrix(traces.to_matrix().view(), hyp)
}

/// Peak |rho| of each candidate and the sample where it occurs.
pub(crate) fn peaks(rho: ArrayView2<f64>) -> Vec<(f64, usize)> {
    rho.axis_iter(Axis(0))
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0.0f64, 0usize), |best, (s, &r)| {
                    if r.abs() > best.0 {
                        (r.abs(), s)
                    } else {
                        best
                    }
                })
        })
        .collect()
}

/// Orders candidates by peak |rho|, largest first; ties go to the smaller candidate.
pub fn rank_scores(peaks: &[(f64, usize)]) -> Vec<CandidateScore> {
    assert_eq!(peaks.len(), CANDIDATES);
    let mut scores: Vec<CandidateScore> = peaks
        .iter()
        .enumerate()
        .map(|(k, &(peak_abs_rho, peak_sample))| CandidateScore {
            candidate: k as u8,
            peak_abs_rho,
            peak_sample,
        })
        .collect();
    scores.sort_by(compare_scores);
    scores
}

fn compare_scores(a: &CandidateScore, b: &CandidateScore) -> Ordering {
    b.peak_abs_rho
        .total_cmp(&a.peak_abs_rho)
        .then(a.candidate.cmp(&b.candidate))
}

pub fn rank_candidates(surface: &CorrelationSurface) -> Vec<CandidateScore> {
    rank_scores(&peaks(surface.rho.view()))
}

/// 1-based rank of `candidate` given the 256 peak values, with the same tie-break
/// as [`rank_scores`].
pub fn rank_of(peak_abs_rho: &[f64], candidate: u8) -> usize {
    let own = peak_abs_rho[candidate as usize];
    1 + peak_abs_rho
        .iter()
        .enumerate()
        .filter(|&(k, &p)| p > own || (p == own && k < candidate as usize))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(pearson(&[3.0; 4], &x).unwrap(), 0.0);
        assert_eq!(pearson(&x, &[0.1; 4]).unwrap(), 0.0);
        assert!(matches!(
            pearson(&x, &x[..3]),
            Err(CpaError::DimensionMismatch { .. })
        ));
        assert_eq!(pearson(&[1.0], &[1.0]), Err(CpaError::InsufficientData(1)));
    }

    #[test]
    fn pearson_known_value() {
        // hand-computed: x = 1..5, y = [2, 1, 4, 3, 5] -> cov 8/4, var 10/4 each
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.0, 1.0, 4.0, 3.0, 5.0];
        assert!((pearson(&x, &y).unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn ranking_picks_unit_peak_and_breaks_ties_low() {
        let mut rho = Array2::from_elem((256, 4), 0.25);
        rho[[0x42, 2]] = 1.0;
        rho[[0x10, 0]] = -0.5;
        rho[[0x08, 3]] = 0.5;
        let surface = CorrelationSurface { byte_index: 0, rho };
        let ranking = rank_candidates(&surface);
        assert_eq!(ranking[0].candidate, 0x42);
        assert_eq!(ranking[0].peak_sample, 2);
        assert_eq!(ranking[1].candidate, 0x08);
        assert_eq!(ranking[2].candidate, 0x10);
        assert_eq!(ranking[3].candidate, 0x00);
        let mut seen: Vec<u8> = ranking.iter().map(|s| s.candidate).collect();
        seen.sort_unstable();
        assert!(seen.iter().copied().eq(0..=255u8));
    }

    #[test]
    fn rank_of_matches_sorted_position() {
        let peaks: Vec<f64> = (0..256).map(|k| ((k * 37) % 11) as f64 / 11.0).collect();
        let ranking = rank_scores(&peaks.iter().map(|&p| (p, 0)).collect::<Vec<_>>());
        for (pos, s) in ranking.iter().enumerate() {
            assert_eq!(rank_of(&peaks, s.candidate), pos + 1);
        }
    }

    #[test]
    fn constant_columns_correlate_to_zero() {
        let traces = ndarray::array![[0.1, 1.0], [0.1, 2.0], [0.1, 3.0]];
        let hyp = HypothesisMatrix {
            byte_index: 0,
            values: Array2::from_shape_fn((256, 3), |(k, i)| (k + i) as f64),
        };
        let s = correlate_matrix(traces.view(), &hyp).unwrap();
        assert!(s.rho.column(0).iter().all(|&r| r == 0.0));
        assert!(s.rho.column(1).iter().all(|&r| (r - 1.0).abs() < 1e-12));
    }
}
