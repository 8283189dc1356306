//! Entropy-production bounds for processes with initial correlations.
//!
//! A preparation `ξ` acting on a system with marginal `p` is flattened into
//! the `d²`-dimensional distribution `ξ↑(j,k) = ξ_jk · p_k`. The process map
//! then lifts to a genuine stochastic matrix `Θ♯` on that space whose column
//! `(j,k)` is `Θ[E_jk]/p_k ⊗ id/d`, so that `Θ♯ ξ↑ = Θ[ξ] ⊗ id/d`. Since KL
//! divergence cannot grow under a stochastic map, comparing `ξ↑` and its
//! image against the fixed point `ε` of `Θ♯` gives
//!
//! ```text
//! H(q↑) - H(ξ↑) >= -(q↑ - ξ↑) · ln ε
//! ```
//!
//! For a uniform marginal `ξ↑` is just `vec(ξ)/d`.

use serde::{Deserialize, Serialize};

use crate::dynamics::ProcessMap;
use crate::error::{Error, Result};
use crate::fixed_point::{stationary, FixedPoint};
use crate::json::extended_f64;
use crate::prob::{entropy_of, kl, ProbVec, StochMatrix, Units};

/// Reports with slack at or above `-SLACK_TOL` satisfy the bound.
pub const SLACK_TOL: f64 = 1e-9;

/// A preparation flattened to a distribution over `(j, k)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorizedPrep {
    entries: ProbVec,
    xi: StochMatrix,
    marginal: ProbVec,
}

impl VectorizedPrep {
    pub fn entries(&self) -> &ProbVec {
        &self.entries
    }

    /// Weight of the pair `(j, k)`, i.e. `ξ_jk · p_k`.
    pub fn entry(&self, j: usize, k: usize) -> f64 {
        self.entries[j * self.marginal.dim() + k]
    }

    pub fn xi(&self) -> &StochMatrix {
        &self.xi
    }

    pub fn marginal(&self) -> &ProbVec {
        &self.marginal
    }
}

fn is_exactly_uniform(p: &ProbVec) -> bool {
    p.iter().all(|&x| x == p[0])
}

/// `ξ↑(j,k) = ξ_jk · p_k`, in lexicographic `(j, k)` order.
///
/// When every entry of `p` is equal the entries are computed as `ξ_jk / d`,
/// so the result is bit-for-bit the plain `vec(ξ)/d`.
pub fn vectorize_prep(xi: &StochMatrix, p: &ProbVec) -> Result<VectorizedPrep> {
    let d = p.dim();
    if xi.d_in() != d || xi.d_out() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: xi.d_in().max(xi.d_out()),
            context: "preparation vs marginal",
        });
    }
    let uniform = is_exactly_uniform(p);
    let mut entries = Vec::with_capacity(d * d);
    for j in 0..d {
        for k in 0..d {
            entries.push(if uniform {
                xi.get(j, k) / d as f64
            } else {
                xi.get(j, k) * p[k]
            });
        }
    }
    Ok(VectorizedPrep {
        entries: ProbVec::new(entries)?,
        xi: xi.clone(),
        marginal: p.clone(),
    })
}

/// The stochastic matrix `Θ♯` on vectorized preparations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftedMap {
    matrix: StochMatrix,
    /// `(j, k)` columns with `p_k = 0`, filled with the uniform distribution.
    flags: Vec<(usize, usize)>,
    d_s: usize,
}

impl LiftedMap {
    /// Wraps an arbitrary `d² × d²` stochastic matrix.
    pub fn from_matrix(matrix: StochMatrix) -> Result<Self> {
        let n = matrix.d_in();
        let d_s = (n as f64).sqrt().round() as usize;
        if !matrix.is_square() || d_s * d_s != n {
            return Err(Error::DimensionMismatch {
                expected: d_s * d_s,
                found: n,
                context: "lifted map must be d² × d²",
            });
        }
        Ok(Self {
            matrix,
            flags: Vec::new(),
            d_s,
        })
    }

    pub fn matrix(&self) -> &StochMatrix {
        &self.matrix
    }

    pub fn flags(&self) -> &[(usize, usize)] {
        &self.flags
    }

    pub fn d_s(&self) -> usize {
        self.d_s
    }
}

/// Builds `Θ♯` from a process map.
pub fn lift_theta(theta: &ProcessMap) -> LiftedMap {
    let d = theta.d_s();
    let n = d * d;
    let mut columns = Vec::with_capacity(n);
    let mut flags = Vec::new();
    for j in 0..d {
        for k in 0..d {
            let column = match theta.normalized_output(j, k) {
                Some(nu) => nu.tensor(&ProbVec::uniform(d)).into_vec(),
                None => {
                    flags.push((j, k));
                    vec![1.0 / n as f64; n]
                }
            };
            columns.push(column);
        }
    }
    LiftedMap {
        matrix: StochMatrix::from_columns(&columns).expect("columns are distributions"),
        flags,
        d_s: d,
    }
}

/// Fixed point `ε` of `Θ♯`.
pub fn fixed_point(lifted: &LiftedMap) -> Result<FixedPoint> {
    stationary(&lifted.matrix)
}

/// Both sides of an entropy-production bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondLawReport {
    /// Entropy change, output minus input.
    #[serde(with = "extended_f64")]
    pub lhs: f64,
    /// `-(after - before) · ln ε`.
    #[serde(with = "extended_f64")]
    pub rhs: f64,
    #[serde(with = "extended_f64")]
    pub slack: f64,
    pub satisfied: bool,
    /// Some reference entry vanished where the states differ.
    pub degenerate: bool,
    pub epsilon: ProbVec,
    pub residual: f64,
    pub unique: bool,
}

impl SecondLawReport {
    fn evaluate(before: &[f64], after: &[f64], fp: FixedPoint) -> Self {
        let lhs = entropy_of(after) - entropy_of(before);
        let (rhs, degenerate) = production_bound(before, after, fp.epsilon.as_slice());
        let slack = if rhs == f64::NEG_INFINITY {
            f64::INFINITY
        } else if rhs == f64::INFINITY {
            f64::NEG_INFINITY
        } else {
            lhs - rhs
        };
        Self {
            lhs,
            rhs,
            slack,
            satisfied: slack >= -SLACK_TOL,
            degenerate,
            epsilon: fp.epsilon,
            residual: fp.residual,
            unique: fp.unique,
        }
    }

    /// The same report with `lhs`, `rhs` and `slack` expressed in `units`.
    pub fn in_units(&self, units: Units) -> Self {
        Self {
            lhs: units.from_nats(self.lhs),
            rhs: units.from_nats(self.rhs),
            slack: units.from_nats(self.slack),
            ..self.clone()
        }
    }
}

/// `-Σ_i (after_i - before_i) ln ε_i` with explicit handling of `ε_i = 0`.
///
/// Indices where the two states agree contribute nothing. A vanishing `ε_i`
/// where they differ makes the term infinite; if any such term is `-∞`
/// the input already has infinite divergence from `ε`, the bound is vacuous
/// and the result is `-∞`.
fn production_bound(before: &[f64], after: &[f64], reference: &[f64]) -> (f64, bool) {
    let mut finite = 0.0;
    let mut pos_inf = false;
    let mut neg_inf = false;
    for ((&b, &a), &r) in before.iter().zip(after).zip(reference) {
        let diff = a - b;
        if diff == 0.0 {
            continue;
        }
        if r == 0.0 {
            if diff > 0.0 {
                pos_inf = true;
            } else {
                neg_inf = true;
            }
        } else {
            finite -= diff * r.ln();
        }
    }
    let degenerate = pos_inf || neg_inf;
    let rhs = if neg_inf {
        f64::NEG_INFINITY
    } else if pos_inf {
        f64::INFINITY
    } else {
        finite
    };
    (rhs, degenerate)
}

/// Checks `H(q↑) - H(ξ↑) >= -(q↑ - ξ↑)·ln ε` for one preparation.
pub fn second_law_check(theta: &ProcessMap, xi: &StochMatrix) -> Result<SecondLawReport> {
    let d = theta.d_s();
    let prep = vectorize_prep(xi, theta.marginal())?;
    let q_up = theta.apply(xi)?.tensor(&ProbVec::uniform(d));
    let fp = fixed_point(&lift_theta(theta))?;
    Ok(SecondLawReport::evaluate(
        prep.entries().as_slice(),
        q_up.as_slice(),
        fp,
    ))
}

/// The plain-Markov bound `H(Λp) - H(p) >= -(Λp - p)·ln e` with `Λe = e`.
pub fn spohn_check(lambda: &StochMatrix, p: &ProbVec) -> Result<SecondLawReport> {
    let fp = stationary(lambda)?;
    let q = lambda.apply(p)?;
    Ok(SecondLawReport::evaluate(p.as_slice(), q.as_slice(), fp))
}

/// `kl(p, q) - kl(Mp, Mq)`, non-negative up to rounding.
///
/// An infinite `kl(p, q)` gives `+∞` regardless of the image.
pub fn kl_contractivity_check(m: &StochMatrix, p: &ProbVec, q: &ProbVec) -> Result<f64> {
    let before = kl(p, q)?;
    let after = kl(&m.apply(p)?, &m.apply(q)?)?;
    Ok(if before == f64::INFINITY {
        f64::INFINITY
    } else {
        before - after
    })
}
