use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on the total mass of a distribution (and on column sums).
pub const SUM_TOL: f64 = 1e-9;

/// Entries in `[-CLAMP_TOL, 0)` are treated as rounding noise and clamped to zero.
pub const CLAMP_TOL: f64 = 1e-12;

/// Checks finiteness and sign of `entries`, clamping rounding noise in place.
///
/// Returns whether anything was clamped.
pub(crate) fn clamp_entries(entries: &mut [f64], offset: usize) -> Result<bool> {
    let mut clamped = false;
    for (i, x) in entries.iter_mut().enumerate() {
        if !x.is_finite() {
            return Err(Error::NonFinite { index: offset + i });
        }
        if *x < 0.0 {
            if *x < -CLAMP_TOL {
                return Err(Error::NegativeEntry {
                    index: offset + i,
                    value: *x,
                });
            }
            *x = 0.0;
            clamped = true;
        }
    }
    Ok(clamped)
}

/// A probability distribution over `d` outcomes.
///
/// Entries are non-negative and sum to one within [`SUM_TOL`]. Construction
/// leaves valid input bit-for-bit untouched; only when a tiny negative entry
/// is clamped is the vector renormalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbVec {
    entries: Vec<f64>,
}

impl ProbVec {
    pub fn new(mut entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty);
        }
        let clamped = clamp_entries(&mut entries, 0)?;
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::BadNormalization { sum, expected: 1.0 });
        }
        if clamped {
            entries.iter_mut().for_each(|x| *x /= sum);
        }
        Ok(Self { entries })
    }

    /// The uniform distribution `id/d`.
    pub fn uniform(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self {
            entries: vec![1.0 / dim as f64; dim],
        }
    }

    /// The point mass on outcome `index` (the unit vector `u_index`).
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(
            index < dim,
            "basis index {index} out of range for dimension {dim}"
        );
        let mut entries = vec![0.0; dim];
        entries[index] = 1.0;
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.entries.iter()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.entries
    }

    /// Product distribution `self ⊗ other`, first factor major.
    pub fn tensor(&self, other: &ProbVec) -> ProbVec {
        let entries = self
            .entries
            .iter()
            .flat_map(|&a| other.entries.iter().map(move |&b| a * b))
            .collect();
        Self { entries }
    }

    /// L1 distance to another vector of the same dimension.
    pub fn l1_distance(&self, other: &ProbVec) -> f64 {
        l1(&self.entries, &other.entries)
    }

    /// True when every entry is strictly positive.
    pub fn has_full_support(&self) -> bool {
        self.entries.iter().all(|&x| x > 0.0)
    }
}

impl Index<usize> for ProbVec {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.entries[index]
    }
}

impl TryFrom<Vec<f64>> for ProbVec {
    type Error = Error;

    fn try_from(entries: Vec<f64>) -> Result<Self> {
        Self::new(entries)
    }
}

impl From<ProbVec> for Vec<f64> {
    fn from(p: ProbVec) -> Self {
        p.entries
    }
}

impl AsRef<[f64]> for ProbVec {
    fn as_ref(&self) -> &[f64] {
        &self.entries
    }
}

pub(crate) fn l1(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_valid_input_unchanged() {
        let p = ProbVec::new(vec![0.3, 0.7]).unwrap();
        assert_eq!(p.as_slice(), &[0.3, 0.7]);
    }

    #[test]
    fn clamps_rounding_noise() {
        let p = ProbVec::new(vec![-5e-13, 1.0]).unwrap();
        assert_eq!(p[0], 0.0);
        assert_eq!(p[1], 1.0);
    }

    #[test]
    fn rejects_real_negatives_and_bad_mass() {
        assert!(matches!(
            ProbVec::new(vec![-1e-6, 1.0 + 1e-6]),
            Err(Error::NegativeEntry { index: 0, .. })
        ));
        assert!(matches!(
            ProbVec::new(vec![0.5, 0.6]),
            Err(Error::BadNormalization { .. })
        ));
        assert!(matches!(ProbVec::new(vec![]), Err(Error::Empty)));
        assert!(matches!(
            ProbVec::new(vec![f64::NAN, 1.0]),
            Err(Error::NonFinite { index: 0 })
        ));
    }

    #[test]
    fn tensor_is_system_major() {
        let p = ProbVec::new(vec![0.5, 0.5]).unwrap();
        let t = ProbVec::new(vec![0.3, 0.7]).unwrap();
        assert_eq!(p.tensor(&t).as_slice(), &[0.15, 0.35, 0.15, 0.35]);
    }

    #[test]
    fn json_is_a_plain_array() {
        let p = ProbVec::new(vec![0.25, 0.75]).unwrap();
        assert_eq!(serde_json::to_string(&p).unwrap(), "[0.25,0.75]");
        let bad: std::result::Result<ProbVec, _> = serde_json::from_str("[0.2,0.2]");
        assert!(bad.is_err());
    }
}
