use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::vector::ProbVec;
use crate::error::{Error, Result};

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(p: &ProbVec) -> f64 {
    entropy_of(p.as_slice())
}

pub(crate) fn entropy_of(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

/// Kullback-Leibler divergence `Σ p_i ln(p_i / q_i)` in nats.
///
/// Terms with `p_i = 0` vanish. If `p` puts mass where `q` has none the result
/// is `+∞`; that is a value, not an error.
pub fn kl(p: &ProbVec, q: &ProbVec) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: q.dim(),
            context: "kl divergence",
        });
    }
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q.iter()) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += pi * (pi / qi).ln();
    }
    // Rounding can leave a tiny negative for p ≈ q.
    Ok(total.max(0.0))
}

/// Unit used when presenting entropies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Nats,
    Bits,
}

impl Units {
    /// Converts a quantity computed in nats. Infinities pass through.
    pub fn from_nats(self, value: f64) -> f64 {
        match self {
            Units::Nats => value,
            Units::Bits => value / std::f64::consts::LN_2,
        }
    }
}

impl FromStr for Units {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nats" => Ok(Units::Nats),
            "bits" => Ok(Units::Bits),
            other => Err(Error::Config {
                field: "units",
                reason: format!("expected \"nats\" or \"bits\", found \"{other}\""),
            }),
        }
    }
}

impl fmt::Display for Units {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Units::Nats => "nats",
            Units::Bits => "bits",
        })
    }
}
