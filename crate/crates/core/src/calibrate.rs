//! Noise calibration for simulated campaigns.
//!
//! Absolute leakage amplitudes of real devices are unknown, so the simulator's
//! noise level is tuned until a campaign behaves like a bench measurement:
//! the full key first comes out somewhere between 200 and 600 averaged traces.
//! The search bisects the noise standard deviation; more noise means more
//! traces are needed.

use crate::aes::Block;
use crate::cpa::{evolution, CpaError};
use crate::power_model::PowerModelSpec;
use crate::sim::{acquire_campaign, LeakageConfig, SimError};

#[derive(Debug, thiserror::Error)]
pub enum CalibrationError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Cpa(#[from] CpaError),
    #[error("no noise level in [{lo}, {hi}] put first full recovery inside the window")]
    NotFound { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTarget {
    pub key: Block,
    pub model: PowerModelSpec,
    pub seed: u64,
    /// Trace counts at which recovery is checked, ascending.
    pub checkpoints: Vec<usize>,
    /// Inclusive window for the first checkpoint with all 16 bytes at rank 1.
    pub window: (usize, usize),
}

impl Default for CalibrationTarget {
    fn default() -> Self {
        CalibrationTarget {
            key: Block(std::array::from_fn(|i| i as u8)),
            model: PowerModelSpec::sbox_hw(),
            seed: 0,
            checkpoints: (1..=12).map(|i| i * 50).collect(),
            window: (200, 600),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub noise_sigma: f64,
    pub first_full_recovery: usize,
    /// Noise levels tried, with the first full-recovery checkpoint each gave.
    pub trials: Vec<(f64, Option<usize>)>,
}

/// First checkpoint at which every key byte ranks first, if any.
pub fn first_full_recovery(
    config: &LeakageConfig,
    target: &CalibrationTarget,
) -> Result<Option<usize>, CalibrationError> {
    let max = *target.checkpoints.last().expect("at least one checkpoint");
    let traces = acquire_campaign(&target.key, max, config, target.seed)?;
    // Lost plaintexts shorten the campaign; only checkpoints that exist count.
    let checkpoints: Vec<usize> = target
        .checkpoints
        .iter()
        .copied()
        .filter(|&c| c <= traces.len())
        .collect();
    if checkpoints.is_empty() {
        return Ok(None);
    }
    let series = evolution(&traces, &target.model, &checkpoints)?;
    let recovered = series
        .bytes_recovered()
        .expect("simulated traces carry the key");
    Ok(checkpoints
        .iter()
        .zip(recovered)
        .find(|&(_, n)| n == Block::LEN)
        .map(|(&c, _)| c))
}

/// Bisects `noise_sigma` in `[lo, hi]` until the first full recovery lands in
/// the target window. `hi` is doubled first if it does not yet defeat the
/// largest checkpoint.
pub fn calibrate_noise_sigma(
    base: &LeakageConfig,
    target: &CalibrationTarget,
    lo: f64,
    hi: f64,
    max_iterations: usize,
) -> Result<Calibration, CalibrationError> {
    let mut trials = Vec::new();
    let eval = |sigma: f64, trials: &mut Vec<(f64, Option<usize>)>| {
        let config = LeakageConfig {
            noise_sigma: sigma,
            ..base.clone()
        };
        let r = first_full_recovery(&config, target);
        if let Ok(ff) = &r {
            trials.push((sigma, *ff));
        }
        r
    };
    let (lo_start, mut hi) = (lo, hi);
    let mut lo = lo;
    let in_window = |c: usize| (target.window.0..=target.window.1).contains(&c);

    for _ in 0..8 {
        match eval(hi, &mut trials)? {
            Some(c) if in_window(c) => {
                return Ok(Calibration {
                    noise_sigma: hi,
                    first_full_recovery: c,
                    trials,
                })
            }
            Some(c) if c < target.window.0 => {
                lo = hi;
                hi *= 2.0;
            }
            _ => break,
        }
    }

    for _ in 0..max_iterations {
        let mid = 0.5 * (lo + hi);
        match eval(mid, &mut trials)? {
            Some(c) if in_window(c) => {
                return Ok(Calibration {
                    noise_sigma: mid,
                    first_full_recovery: c,
                    trials,
                })
            }
            Some(c) if c < target.window.0 => lo = mid,
            _ => hi = mid,
        }
    }
    Err(CalibrationError::NotFound { lo: lo_start, hi })
}
