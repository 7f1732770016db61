//! Leakage models: map a hypothesized first-round byte to a predicted power value.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aes::{first_round_intermediate, IntermediateTarget};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LeakageMetric {
    HammingWeight,
    /// Distance between the target operation's input and output byte.
    HammingDistance,
}

/// Sign of the leakage: `Negative` means more set bits draw less power.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Positive,
    #[default]
    Negative,
}

impl Polarity {
    pub fn sign(self) -> f64 {
        match self {
            Polarity::Positive => 1.0,
            Polarity::Negative => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PowerModelSpec {
    pub target: IntermediateTarget,
    pub metric: LeakageMetric,
    pub polarity: Polarity,
}

impl PowerModelSpec {
    pub const fn new(
        target: IntermediateTarget,
        metric: LeakageMetric,
        polarity: Polarity,
    ) -> Self {
        PowerModelSpec {
            target,
            metric,
            polarity,
        }
    }

    /// Hamming weight of the AddRoundKey output.
    pub const fn xor_hw() -> Self {
        Self::new(
            IntermediateTarget::XorOutput,
            LeakageMetric::HammingWeight,
            Polarity::Negative,
        )
    }

    /// Hamming weight of the S-box output.
    pub const fn sbox_hw() -> Self {
        Self::new(
            IntermediateTarget::SboxOutput,
            LeakageMetric::HammingWeight,
            Polarity::Negative,
        )
    }

    pub fn with_polarity(self, polarity: Polarity) -> Self {
        PowerModelSpec { polarity, ..self }
    }
}

impl fmt::Display for PowerModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let target = match self.target {
            IntermediateTarget::XorOutput => "xor",
            IntermediateTarget::SboxOutput => "sbox",
        };
        let metric = match self.metric {
            LeakageMetric::HammingWeight => "hw",
            LeakageMetric::HammingDistance => "hd",
        };
        write!(f, "{target}-{metric}")
    }
}

impl FromStr for PowerModelSpec {
    type Err = String;

    /// Accepts `xor-hw`, `sbox-hw`, `xor-hd` and `sbox-hd`; polarity defaults to negative.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (target, metric) = s
            .split_once('-')
            .ok_or_else(|| format!("unknown power model `{s}`"))?;
        let target = match target {
            "xor" => IntermediateTarget::XorOutput,
            "sbox" => IntermediateTarget::SboxOutput,
            _ => return Err(format!("unknown power model target `{target}`")),
        };
        let metric = match metric {
            "hw" => LeakageMetric::HammingWeight,
            "hd" => LeakageMetric::HammingDistance,
            _ => return Err(format!("unknown power model metric `{metric}`")),
        };
        Ok(PowerModelSpec::new(target, metric, Polarity::default()))
    }
}

#[inline]
pub fn hamming_weight(x: u8) -> u32 {
    x.count_ones()
}

#[inline]
pub fn hamming_distance(a: u8, b: u8) -> u32 {
    hamming_weight(a ^ b)
}

/// Predicted leakage for plaintext byte `p` under key candidate `k`.
///
/// For Hamming distance the reference is the target's input byte: the
/// plaintext byte for the XOR (which makes the prediction depend only on `k`)
/// and the XOR output for the S-box.
pub fn hypothesize(p: u8, k: u8, spec: &PowerModelSpec) -> f64 {
    let out = first_round_intermediate(p, k, spec.target);
    let value = match spec.metric {
        LeakageMetric::HammingWeight => hamming_weight(out),
        LeakageMetric::HammingDistance => {
            let input = match spec.target {
                IntermediateTarget::XorOutput => p,
                IntermediateTarget::SboxOutput => p ^ k,
            };
            hamming_distance(input, out)
        }
    };
    spec.polarity.sign() * value as f64
}
