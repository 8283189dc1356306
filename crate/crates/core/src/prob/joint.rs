use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::matrix::{check_convention, matrix_rows, CONVENTION};
use super::vector::{clamp_entries, ProbVec, SUM_TOL};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointWire {
    convention: String,
    d_s: usize,
    d_e: usize,
    rows: Vec<Vec<f64>>,
}

/// A joint distribution over system × environment, indexed `(s, e)`.
///
/// Flattened views use the system-major composite index `s * d_e + e`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDist {
    m: DMatrix<f64>,
}

impl JointDist {
    pub fn new(mut m: DMatrix<f64>) -> Result<Self> {
        let mass = validate_weights(&mut m)?;
        if (mass.sum - 1.0).abs() > SUM_TOL {
            return Err(Error::BadNormalization {
                sum: mass.sum,
                expected: 1.0,
            });
        }
        if mass.clamped {
            m /= mass.sum;
        }
        Ok(Self { m })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(rows_to_matrix(rows)?)
    }

    /// Rebuilds a joint distribution from its system-major flattening.
    pub fn from_flat(d_s: usize, d_e: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != d_s * d_e {
            return Err(Error::DimensionMismatch {
                expected: d_s * d_e,
                found: flat.len(),
                context: "flattened joint distribution",
            });
        }
        Self::new(DMatrix::from_row_slice(d_s, d_e, flat))
    }

    /// The uncorrelated joint state `p ⊗ t`.
    pub fn product(p: &ProbVec, t: &ProbVec) -> Self {
        Self {
            m: DMatrix::from_fn(p.dim(), t.dim(), |s, e| p[s] * t[e]),
        }
    }

    /// The joint state with `p` on the diagonal: environment is a perfect copy of the system.
    pub fn perfectly_correlated(p: &ProbVec) -> Self {
        Self {
            m: DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(p.as_slice())),
        }
    }

    pub fn d_s(&self) -> usize {
        self.m.nrows()
    }

    pub fn d_e(&self) -> usize {
        self.m.ncols()
    }

    pub fn get(&self, s: usize, e: usize) -> f64 {
        self.m[(s, e)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// System-major flattening, index `s * d_e + e`.
    pub fn to_flat(&self) -> Vec<f64> {
        flatten(&self.m)
    }

    pub fn as_prob_vec(&self) -> ProbVec {
        ProbVec::new(self.to_flat()).expect("joint distribution is normalized")
    }

    /// Row sums: the distribution the experimenter sees on the system.
    pub fn marginal_system(&self) -> ProbVec {
        ProbVec::new(row_sums(&self.m)).expect("marginal of a valid joint distribution")
    }

    /// Column sums: the hidden environment's distribution.
    pub fn marginal_env(&self) -> ProbVec {
        ProbVec::new(col_sums(&self.m)).expect("marginal of a valid joint distribution")
    }

    /// The environment's distribution conditioned on the system being in state `s`.
    pub fn conditional_env_given_system(&self, s: usize) -> Result<ProbVec> {
        if s >= self.d_s() {
            return Err(Error::DimensionMismatch {
                expected: self.d_s(),
                found: s + 1,
                context: "system index",
            });
        }
        let row: Vec<f64> = self.m.row(s).iter().copied().collect();
        let mass: f64 = row.iter().sum();
        if mass <= 0.0 {
            return Err(Error::ZeroMarginal { index: s });
        }
        ProbVec::new(row.into_iter().map(|x| x / mass).collect())
    }

    /// Whether the joint state factorizes as (system marginal) ⊗ (environment marginal)
    /// up to `tol` in max-norm.
    pub fn is_product(&self, tol: f64) -> bool {
        self.product_distance() <= tol
    }

    /// Max-norm distance to the product of the marginals.
    pub fn product_distance(&self) -> f64 {
        let p = self.marginal_system();
        let t = self.marginal_env();
        let mut worst: f64 = 0.0;
        for s in 0..self.d_s() {
            for e in 0..self.d_e() {
                worst = worst.max((self.m[(s, e)] - p[s] * t[e]).abs());
            }
        }
        worst
    }
}

impl Serialize for JointDist {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        JointWire {
            convention: CONVENTION.to_owned(),
            d_s: self.d_s(),
            d_e: self.d_e(),
            rows: matrix_rows(&self.m),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for JointDist {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = JointWire::deserialize(d)?;
        let parse = || -> Result<Self> {
            check_convention(&wire.convention)?;
            let m = rows_to_matrix(&wire.rows)?;
            if m.shape() != (wire.d_s, wire.d_e) {
                return Err(Error::DimensionMismatch {
                    expected: wire.d_s * wire.d_e,
                    found: m.len(),
                    context: "joint distribution shape",
                });
            }
            Self::new(m)
        };
        parse().map_err(serde::de::Error::custom)
    }
}

/// Non-negative joint weights with total mass at most one.
///
/// This is what a measure-and-prepare operation such as `E_jk ⊗ I` leaves
/// behind: a post-selected, sub-normalized joint state.
#[derive(Debug, Clone, PartialEq)]
pub struct JointWeights {
    m: DMatrix<f64>,
}

impl JointWeights {
    pub fn new(mut m: DMatrix<f64>) -> Result<Self> {
        let mass = validate_weights(&mut m)?;
        if mass.sum > 1.0 + SUM_TOL {
            return Err(Error::BadNormalization {
                sum: mass.sum,
                expected: 1.0,
            });
        }
        Ok(Self { m })
    }

    pub fn d_s(&self) -> usize {
        self.m.nrows()
    }

    pub fn d_e(&self) -> usize {
        self.m.ncols()
    }

    pub fn get(&self, s: usize, e: usize) -> f64 {
        self.m[(s, e)]
    }

    pub fn mass(&self) -> f64 {
        self.m.sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        flatten(&self.m)
    }

    pub fn system_weights(&self) -> Vec<f64> {
        row_sums(&self.m)
    }

    pub fn env_weights(&self) -> Vec<f64> {
        col_sums(&self.m)
    }

    /// Promotes to a normalized distribution; fails unless the mass is one.
    pub fn into_dist(self) -> Result<JointDist> {
        JointDist::new(self.m)
    }
}

impl From<JointDist> for JointWeights {
    fn from(p: JointDist) -> Self {
        Self { m: p.m }
    }
}

struct Mass {
    sum: f64,
    clamped: bool,
}

fn validate_weights(m: &mut DMatrix<f64>) -> Result<Mass> {
    if m.is_empty() {
        return Err(Error::Empty);
    }
    let clamped = clamp_entries(m.as_mut_slice(), 0)?;
    Ok(Mass {
        sum: m.sum(),
        clamped,
    })
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch {
            expected: ncols,
            found: bad.len(),
            context: "row length",
        });
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}

fn flatten(m: &DMatrix<f64>) -> Vec<f64> {
    m.row_iter()
        .flat_map(|r| r.iter().copied().collect::<Vec<_>>())
        .collect()
}

fn row_sums(m: &DMatrix<f64>) -> Vec<f64> {
    m.row_iter().map(|r| r.sum()).collect()
}

fn col_sums(m: &DMatrix<f64>) -> Vec<f64> {
    m.column_iter().map(|c| c.sum()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(r: &[&[f64]]) -> JointDist {
        JointDist::from_rows(&r.iter().map(|x| x.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn marginals() {
        assert_eq!(
            rows(&[&[0.5, 0.0], &[0.0, 0.5]])
                .marginal_system()
                .as_slice(),
            &[0.5, 0.5]
        );
        assert_eq!(
            rows(&[&[0.4, 0.1], &[0.1, 0.4]]).marginal_env().as_slice(),
            &[0.5, 0.5]
        );
        assert_eq!(
            rows(&[&[1.0, 0.0], &[0.0, 0.0]])
                .marginal_system()
                .as_slice(),
            &[1.0, 0.0]
        );
    }

    #[test]
    fn conditionals() {
        let c = rows(&[&[0.4, 0.1], &[0.1, 0.4]])
            .conditional_env_given_system(0)
            .unwrap();
        // 0.4 / 0.5 and 0.1 / 0.5
        assert!((c[0] - 0.8).abs() < 1e-15 && (c[1] - 0.2).abs() < 1e-15);

        let diag = rows(&[&[0.5, 0.0], &[0.0, 0.5]]);
        assert_eq!(
            diag.conditional_env_given_system(1).unwrap().as_slice(),
            &[0.0, 1.0]
        );

        let t = ProbVec::new(vec![0.3, 0.7]).unwrap();
        let prod = JointDist::product(&ProbVec::new(vec![0.2, 0.8]).unwrap(), &t);
        for s in 0..2 {
            let c = prod.conditional_env_given_system(s).unwrap();
            assert!(c.l1_distance(&t) < 1e-15);
        }
    }

    #[test]
    fn conditioning_on_zero_marginal_fails() {
        let p = rows(&[&[1.0, 0.0], &[0.0, 0.0]]);
        assert_eq!(
            p.conditional_env_given_system(1),
            Err(Error::ZeroMarginal { index: 1 })
        );
    }

    #[test]
    fn product_detection() {
        let prod = JointDist::product(
            &ProbVec::new(vec![0.5, 0.5]).unwrap(),
            &ProbVec::new(vec![0.3, 0.7]).unwrap(),
        );
        assert!(prod.is_product(1e-12));
        let diag = rows(&[&[0.5, 0.0], &[0.0, 0.5]]);
        assert!(!diag.is_product(1e-9));
        assert!(diag.is_product(0.5));
    }

    #[test]
    fn flattening_is_system_major() {
        let p = rows(&[&[0.1, 0.2, 0.3], &[0.15, 0.15, 0.1]]);
        assert_eq!(p.to_flat(), vec![0.1, 0.2, 0.3, 0.15, 0.15, 0.1]);
        assert_eq!(JointDist::from_flat(2, 3, &p.to_flat()).unwrap(), p);
    }

    #[test]
    fn weights_allow_partial_mass() {
        let w = JointWeights::new(DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(w.mass(), 0.5);
        assert!(w.clone().into_dist().is_err());
        assert!(JointWeights::new(DMatrix::from_element(2, 2, 0.5)).is_err());
    }

    #[test]
    fn json_round_trip() {
        let p = rows(&[&[0.4, 0.1], &[0.1, 0.4]]);
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"d_s\":2"));
        assert_eq!(serde_json::from_str::<JointDist>(&s).unwrap(), p);
        let shape_lie = s.replace("\"d_e\":2", "\"d_e\":3");
        assert!(serde_json::from_str::<JointDist>(&shape_lie).is_err());
    }
}
