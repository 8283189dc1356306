use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::vector::{clamp_entries, ProbVec, SUM_TOL};
use crate::error::{Error, Result};

pub(crate) const CONVENTION: &str = "column-stochastic";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixWire {
    convention: String,
    d_out: usize,
    d_in: usize,
    rows: Vec<Vec<f64>>,
}

fn rows_to_matrix(rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
    if rows.len() != nrows {
        return Err(Error::DimensionMismatch {
            expected: nrows,
            found: rows.len(),
            context: "row count",
        });
    }
    for row in rows {
        if row.len() != ncols {
            return Err(Error::DimensionMismatch {
                expected: ncols,
                found: row.len(),
                context: "row length",
            });
        }
    }
    Ok(DMatrix::from_fn(nrows, ncols, |r, c| rows[r][c]))
}

pub(crate) fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn check_convention(convention: &str) -> Result<()> {
    if convention != CONVENTION {
        return Err(Error::Config {
            field: "convention",
            reason: format!("expected \"{CONVENTION}\", found \"{convention}\""),
        });
    }
    Ok(())
}

#[derive(Clone, Copy)]
enum ColumnMass {
    One,
    AtMostOne,
}

/// Clamps rounding noise and checks every column's mass.
fn validate_columns(m: &mut DMatrix<f64>, mass: ColumnMass) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::Empty);
    }
    let nrows = m.nrows();
    for (c, col) in m.as_mut_slice().chunks_mut(nrows).enumerate() {
        let clamped = clamp_entries(col, c * nrows)?;
        let sum: f64 = col.iter().sum();
        match mass {
            ColumnMass::One => {
                if (sum - 1.0).abs() > SUM_TOL {
                    return Err(Error::BadColumn {
                        column: c,
                        sum,
                        expected: "1",
                    });
                }
                if clamped {
                    col.iter_mut().for_each(|x| *x /= sum);
                }
            }
            ColumnMass::AtMostOne => {
                if sum > 1.0 + SUM_TOL {
                    return Err(Error::BadColumn {
                        column: c,
                        sum,
                        expected: "<= 1",
                    });
                }
            }
        }
    }
    Ok(())
}

/// A column-stochastic matrix: column `k` is the output distribution for
/// input basis state `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochMatrix {
    m: DMatrix<f64>,
}

impl StochMatrix {
    pub fn new(mut m: DMatrix<f64>) -> Result<Self> {
        validate_columns(&mut m, ColumnMass::One)?;
        Ok(Self { m })
    }

    /// Builds a matrix from its rows (the natural way to write one down).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        Self::new(rows_to_matrix(rows, rows.len(), ncols)?)
    }

    /// Builds a matrix from its columns, i.e. the output for each basis input.
    pub fn from_columns<C: AsRef<[f64]>>(columns: &[C]) -> Result<Self> {
        let nrows = columns.first().map_or(0, |c| c.as_ref().len());
        let mut data = Vec::with_capacity(nrows * columns.len());
        for c in columns {
            let c = c.as_ref();
            if c.len() != nrows {
                return Err(Error::DimensionMismatch {
                    expected: nrows,
                    found: c.len(),
                    context: "column length",
                });
            }
            data.extend_from_slice(c);
        }
        Self::new(DMatrix::from_vec(nrows, columns.len(), data))
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: DMatrix::identity(dim, dim),
        }
    }

    /// Deterministic map sending input `i` to output `targets[i]`.
    pub fn deterministic(d_out: usize, targets: &[usize]) -> Result<Self> {
        let mut m = DMatrix::zeros(d_out, targets.len());
        for (i, &t) in targets.iter().enumerate() {
            if t >= d_out {
                return Err(Error::DimensionMismatch {
                    expected: d_out,
                    found: t + 1,
                    context: "deterministic target",
                });
            }
            m[(t, i)] = 1.0;
        }
        Ok(Self { m })
    }

    /// The map sending every input to `p`.
    pub fn constant(p: &ProbVec, d_in: usize) -> Self {
        Self {
            m: DMatrix::from_fn(p.dim(), d_in, |r, _| p[r]),
        }
    }

    pub fn d_out(&self) -> usize {
        self.m.nrows()
    }

    pub fn d_in(&self) -> usize {
        self.m.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.m.is_square()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.m[(row, col)]
    }

    /// Column `col` as a slice (the output distribution for input `col`).
    pub fn column(&self, col: usize) -> &[f64] {
        let n = self.d_out();
        &self.m.as_slice()[col * n..(col + 1) * n]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        matrix_rows(&self.m)
    }

    /// `M·p`.
    pub fn apply(&self, p: &ProbVec) -> Result<ProbVec> {
        ProbVec::new(self.apply_weights(p.as_slice())?)
    }

    /// `M·w` for an arbitrary weight vector (sub-normalized states included).
    pub fn apply_weights(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.d_in() {
            return Err(Error::DimensionMismatch {
                expected: self.d_in(),
                found: w.len(),
                context: "stochastic matrix input",
            });
        }
        let n = self.d_out();
        let mut out = vec![0.0; n];
        for (c, &wc) in w.iter().enumerate() {
            if wc == 0.0 {
                continue;
            }
            for (o, &mc) in out.iter_mut().zip(self.column(c)) {
                *o += mc * wc;
            }
        }
        Ok(out)
    }

    /// Matrix product `self · other`.
    pub fn compose(&self, other: &StochMatrix) -> Result<StochMatrix> {
        if other.d_out() != self.d_in() {
            return Err(Error::DimensionMismatch {
                expected: self.d_in(),
                found: other.d_out(),
                context: "composition",
            });
        }
        StochMatrix::new(&self.m * &other.m)
    }

    /// Largest entrywise absolute difference.
    pub fn max_abs_diff(&self, other: &StochMatrix) -> f64 {
        assert_eq!(self.m.shape(), other.m.shape());
        (&self.m - &other.m).amax()
    }
}

impl Serialize for StochMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixWire {
            convention: CONVENTION.to_owned(),
            d_out: self.d_out(),
            d_in: self.d_in(),
            rows: self.rows(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for StochMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = MatrixWire::deserialize(d)?;
        let parse = || -> Result<Self> {
            check_convention(&wire.convention)?;
            Self::new(rows_to_matrix(&wire.rows, wire.d_out, wire.d_in)?)
        };
        parse().map_err(serde::de::Error::custom)
    }
}

/// A non-negative matrix whose columns have mass at most one, such as the
/// measure-and-prepare operation `E_jk`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubStochMatrix {
    m: DMatrix<f64>,
}

impl SubStochMatrix {
    pub fn new(mut m: DMatrix<f64>) -> Result<Self> {
        validate_columns(&mut m, ColumnMass::AtMostOne)?;
        Ok(Self { m })
    }

    /// The matrix unit `E_jk`: measure outcome `k`, then prepare `j`.
    pub fn matrix_unit(dim: usize, j: usize, k: usize) -> Self {
        assert!(j < dim && k < dim, "matrix unit index out of range");
        let mut m = DMatrix::zeros(dim, dim);
        m[(j, k)] = 1.0;
        Self { m }
    }

    pub fn d_out(&self) -> usize {
        self.m.nrows()
    }

    pub fn d_in(&self) -> usize {
        self.m.ncols()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.m[(row, col)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }
}

impl From<StochMatrix> for SubStochMatrix {
    fn from(s: StochMatrix) -> Self {
        Self { m: s.m }
    }
}

impl From<&StochMatrix> for SubStochMatrix {
    fn from(s: &StochMatrix) -> Self {
        Self { m: s.m.clone() }
    }
}
