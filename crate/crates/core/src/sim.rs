//! Synthetic target device and oscilloscope.
//!
//! Each capture is a flat baseline with Gaussian noise and a per-capture DC
//! offset, plus two leak points per state byte: one for the AddRoundKey XOR
//! output and one for the S-box output, each scaled by its Hamming weight.
//! Interrupt jitter translates the whole leaking window by a whole number of
//! samples, and a capture may be lost outright.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aes::{add_round_key_byte, sub_bytes_byte, Block};
use crate::power_model::{hamming_weight, Polarity};
use crate::traces::{TraceRecord, TraceSet, DEFAULT_SAMPLE_RATE_HZ};

/// Noise level at which the default campaign (non-random key, ten repeats,
/// S-box model) first reaches full key recovery between 200 and 600 traces.
/// Obtained with [`crate::calibrate::calibrate_noise_sigma`].
pub const CALIBRATED_NOISE_SIGMA: f64 = 0.08;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("leak window does not fit in the trace: {0}")]
    Geometry(String),
    #[error("repeats must be at least 1")]
    Repeats,
    #[error("drop probability {0} is outside [0, 1)")]
    DropProbability(f64),
    #[error("{name} must be finite and non-negative, got {value}")]
    BadSigma { name: &'static str, value: f64 },
    #[error("{0} must be finite")]
    NonFinite(&'static str),
    #[error("every capture in the group was dropped")]
    EmptyGroup,
    #[error("capture {index} has {found} samples, expected {expected}")]
    LengthMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("a campaign needs at least one plaintext")]
    NoPlaintexts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageConfig {
    pub samples_per_trace: usize,
    /// Sample index where byte 0's slot begins.
    pub trigger_index: usize,
    /// Samples between consecutive state bytes' slots.
    pub byte_spacing: usize,
    pub xor_offset: usize,
    pub sbox_offset: usize,
    /// Volts per unit of Hamming weight.
    pub leak_coefficient: f64,
    pub baseline: f64,
    pub noise_sigma: f64,
    pub drift_sigma: f64,
    pub jitter_max: usize,
    pub drop_probability: f64,
    pub repeats: usize,
    /// Forces zero jitter.
    pub interrupts_disabled: bool,
    /// Forces zero drop probability.
    pub acquisition_delay: bool,
    pub polarity: Polarity,
    pub sample_rate_hz: f64,
}

impl Default for LeakageConfig {
    fn default() -> Self {
        LeakageConfig {
            samples_per_trace: 2500,
            trigger_index: 100,
            byte_spacing: 120,
            xor_offset: 0,
            sbox_offset: 40,
            // 2^-7 keeps noiseless leak levels exactly representable in binary32.
            leak_coefficient: 0.007_812_5,
            baseline: 1.0,
            noise_sigma: CALIBRATED_NOISE_SIGMA,
            drift_sigma: 0.0,
            jitter_max: 0,
            drop_probability: 0.0,
            repeats: 10,
            interrupts_disabled: false,
            acquisition_delay: false,
            polarity: Polarity::Negative,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
        }
    }
}

impl LeakageConfig {
    /// A noise-free, drift-free, jitter-free configuration.
    pub fn noiseless() -> Self {
        LeakageConfig {
            noise_sigma: 0.0,
            drift_sigma: 0.0,
            jitter_max: 0,
            ..Default::default()
        }
    }

    pub fn effective_jitter_max(&self) -> usize {
        if self.interrupts_disabled {
            0
        } else {
            self.jitter_max
        }
    }

    pub fn effective_drop_probability(&self) -> f64 {
        if self.acquisition_delay {
            0.0
        } else {
            self.drop_probability
        }
    }

    /// Sample index of byte `j`'s XOR leak for a capture with zero jitter.
    pub fn xor_leak_index(&self, byte: usize) -> usize {
        self.trigger_index + byte * self.byte_spacing + self.xor_offset
    }

    pub fn sbox_leak_index(&self, byte: usize) -> usize {
        self.trigger_index + byte * self.byte_spacing + self.sbox_offset
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for (name, value) in [
            ("noise_sigma", self.noise_sigma),
            ("drift_sigma", self.drift_sigma),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(SimError::BadSigma { name, value });
            }
        }
        if !self.leak_coefficient.is_finite() {
            return Err(SimError::NonFinite("leak_coefficient"));
        }
        if !self.baseline.is_finite() {
            return Err(SimError::NonFinite("baseline"));
        }
        if self.repeats < 1 {
            return Err(SimError::Repeats);
        }
        if !(0.0..1.0).contains(&self.drop_probability) {
            return Err(SimError::DropProbability(self.drop_probability));
        }
        let last =
            self.trigger_index + 15 * self.byte_spacing + self.xor_offset.max(self.sbox_offset);
        if last >= self.samples_per_trace {
            return Err(SimError::Geometry(format!(
                "last leak point {last} is not below samples_per_trace {}",
                self.samples_per_trace
            )));
        }
        // The shifted window must stay inside the trace too.
        let jitter = self.effective_jitter_max();
        let first = self.trigger_index + self.xor_offset.min(self.sbox_offset);
        if jitter > first || last + jitter >= self.samples_per_trace {
            return Err(SimError::Geometry(format!(
                "jitter of +/-{jitter} moves leak points [{first}, {last}] outside 0..{}",
                self.samples_per_trace
            )));
        }
        Ok(())
    }
}

/// One acquisition as the scope produced it. A dropped capture carries no samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Capture {
    pub plaintext: Block,
    pub samples: Vec<f64>,
    pub dropped: bool,
}

/// Random state for capture `repeat` of plaintext `index` of a campaign.
///
/// Captures get independent streams so a campaign can be simulated in any
/// order and still come out identical.
pub fn capture_rng(seed: u64, index: u64, repeat: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&index.to_le_bytes());
    key[16..24].copy_from_slice(&repeat.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

const PLAINTEXT_STREAM: u64 = u64::MAX;

fn plaintext_for(seed: u64, index: u64) -> Block {
    let mut rng = capture_rng(seed, index, PLAINTEXT_STREAM);
    let mut b = [0u8; 16];
    rng.fill(&mut b);
    Block(b)
}

/// Uniform integer in `[-max, max]` from exactly one draw, whatever `max` is.
fn jitter_from(rng: &mut impl Rng, max: usize) -> isize {
    let span = 2 * max as u128 + 1;
    let u = rng.random::<u64>() as u128;
    ((u * span) >> 64) as isize - max as isize
}

/// Simulates one capture. The draw order (drop, jitter, drift, noise) is fixed
/// and independent of the configuration, so forcing jitter or drops off does
/// not perturb the rest of the stream.
pub fn simulate_capture(
    plaintext: &Block,
    key: &Block,
    config: &LeakageConfig,
    rng: &mut impl Rng,
) -> Result<Capture, SimError> {
    config.validate()?;
    Ok(simulate_capture_unchecked(plaintext, key, config, rng))
}

fn simulate_capture_unchecked(
    plaintext: &Block,
    key: &Block,
    config: &LeakageConfig,
    rng: &mut impl Rng,
) -> Capture {
    let dropped = rng.random::<f64>() < config.effective_drop_probability();
    let shift = jitter_from(rng, config.effective_jitter_max());
    let drift = config.drift_sigma * rng.sample::<f64, _>(StandardNormal);
    if dropped {
        return Capture {
            plaintext: *plaintext,
            samples: Vec::new(),
            dropped: true,
        };
    }

    let level = config.baseline + drift;
    let mut samples: Vec<f64> = (0..config.samples_per_trace)
        .map(|_| level + config.noise_sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();

    let scale = config.polarity.sign() * config.leak_coefficient;
    for j in 0..Block::LEN {
        let x = add_round_key_byte(plaintext[j], key[j]);
        let s = sub_bytes_byte(x);
        let xor_at = (config.xor_leak_index(j) as isize + shift) as usize;
        let sbox_at = (config.sbox_leak_index(j) as isize + shift) as usize;
        samples[xor_at] += scale * f64::from(hamming_weight(x));
        samples[sbox_at] += scale * f64::from(hamming_weight(s));
    }

    Capture {
        plaintext: *plaintext,
        samples,
        dropped: false,
    }
}

/// Pointwise mean of the non-dropped captures in a group.
pub fn average_repeats(captures: &[Capture]) -> Result<Capture, SimError> {
    let mut kept = captures.iter().filter(|c| !c.dropped);
    let first = kept.next().ok_or(SimError::EmptyGroup)?;
    let len = first.samples.len();
    let mut sum = first.samples.clone();
    let mut count = 1usize;
    for (index, c) in captures
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.dropped)
        .skip(1)
    {
        if c.samples.len() != len {
            return Err(SimError::LengthMismatch {
                index,
                expected: len,
                found: c.samples.len(),
            });
        }
        for (acc, v) in sum.iter_mut().zip(&c.samples) {
            *acc += v;
        }
        count += 1;
    }
    if count > 1 {
        let n = count as f64;
        sum.iter_mut().for_each(|v| *v /= n);
    }
    Ok(Capture {
        plaintext: first.plaintext,
        samples: sum,
        dropped: false,
    })
}

/// Simulates a full acquisition campaign: `num_plaintexts` random plaintexts,
/// `repeats` captures each, averaged. Plaintexts whose every capture dropped are
/// omitted.
pub fn acquire_campaign(
    key: &Block,
    num_plaintexts: usize,
    config: &LeakageConfig,
    seed: u64,
) -> Result<TraceSet, SimError> {
    if num_plaintexts == 0 {
        return Err(SimError::NoPlaintexts);
    }
    config.validate()?;

    let records: Vec<Option<TraceRecord>> = (0..num_plaintexts as u64)
        .into_par_iter()
        .map(|i| {
            let plaintext = plaintext_for(seed, i);
            let captures: Vec<Capture> = (0..config.repeats as u64)
                .map(|r| {
                    let mut rng = capture_rng(seed, i, r);
                    simulate_capture_unchecked(&plaintext, key, config, &mut rng)
                })
                .collect();
            average_repeats(&captures).ok().map(|avg| TraceRecord {
                plaintext: avg.plaintext,
                samples: avg.samples.iter().map(|&v| v as f32).collect(),
            })
        })
        .collect();

    let omitted = records.iter().filter(|r| r.is_none()).count();
    if omitted > 0 {
        warn!("{omitted} of {num_plaintexts} plaintexts lost every capture and were omitted");
    }
    let records = records.into_iter().flatten().collect();
    Ok(TraceSet::new(
        records,
        config.samples_per_trace,
        config.sample_rate_hz,
        Some(*key),
    )
    .expect("simulated traces share one length"))
}
