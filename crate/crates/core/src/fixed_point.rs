//! Stationary distributions of square stochastic matrices.
//!
//! Small matrices are solved directly from the null space of `M - I`. Large
//! ones, and matrices whose eigenvalue 1 is degenerate, fall back to power
//! iteration on the lazy chain `(I + M)/2` started from the uniform vector.
//! The lazy chain has the same fixed points as `M` but no periodic part, so
//! the iteration converges to the projection of the uniform vector onto the
//! fixed space; that limit is the canonical answer when there are several.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::prob::{l1, ProbVec, StochMatrix};

/// Largest dimension solved by the direct null-space method.
pub const DIRECT_SOLVE_MAX_DIM: usize = 64;
/// Singular values of `M - I` below this count toward the fixed space.
pub const NULLITY_TOL: f64 = 1e-10;
/// Required L1 residual `|Mε - ε|₁`.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Power iteration stops once successive iterates agree to this (L1).
pub const POWER_TOL: f64 = 1e-12;
pub const MAX_ITERATIONS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPoint {
    pub epsilon: ProbVec,
    /// `|Mε - ε|₁`.
    pub residual: f64,
    /// False when the eigenvalue 1 of `M` is degenerate.
    pub unique: bool,
}

/// Computes a fixed point `Mε = ε` of a square stochastic matrix.
pub fn stationary(m: &StochMatrix) -> Result<FixedPoint> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.d_out(),
            found: m.d_in(),
            context: "fixed point of a non-square map",
        });
    }
    let n = m.d_in();
    let a = m.as_matrix() - nalgebra::DMatrix::<f64>::identity(n, n);
    let svd = a.svd(false, true);
    let nullity = svd
        .singular_values
        .iter()
        .filter(|&&s| s < NULLITY_TOL)
        .count();
    let unique = nullity <= 1;

    let mut start = None;
    if unique && n <= DIRECT_SOLVE_MAX_DIM {
        let v_t = svd.v_t.as_ref().expect("requested V^T");
        let (idx, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty");
        let v: Vec<f64> = v_t.row(idx).iter().copied().collect();
        if let Some(eps) = normalize_null_vector(&v) {
            let residual = residual(m, &eps);
            if residual <= RESIDUAL_TOL {
                return Ok(FixedPoint {
                    epsilon: ProbVec::new(eps).expect("normalized"),
                    residual,
                    unique,
                });
            }
            start = Some(eps);
        }
    }

    let start = start.unwrap_or_else(|| vec![1.0 / n as f64; n]);
    let eps = lazy_power_iteration(m, start)?;
    let residual = residual(m, &eps);
    Ok(FixedPoint {
        epsilon: ProbVec::new(eps).expect("normalized"),
        residual,
        unique,
    })
}

/// Scales a null vector onto the simplex, clamping rounding noise.
fn normalize_null_vector(v: &[f64]) -> Option<Vec<f64>> {
    let total: f64 = v.iter().sum();
    if total.abs() < f64::EPSILON {
        return None;
    }
    let mut eps: Vec<f64> = v.iter().map(|x| (x / total).max(0.0)).collect();
    // Entries at the solver's noise floor are structural zeros.
    let floor = 64.0 * f64::EPSILON * eps.iter().copied().fold(0.0, f64::max);
    eps.iter_mut()
        .filter(|x| **x <= floor)
        .for_each(|x| *x = 0.0);
    let total: f64 = eps.iter().sum();
    eps.iter_mut().for_each(|x| *x /= total);
    Some(eps)
}

fn residual(m: &StochMatrix, eps: &[f64]) -> f64 {
    l1(&m.apply_weights(eps).expect("square"), eps)
}

fn lazy_power_iteration(m: &StochMatrix, mut x: Vec<f64>) -> Result<Vec<f64>> {
    let mut step = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        let mx = m.apply_weights(&x).expect("square");
        let next: Vec<f64> = x.iter().zip(&mx).map(|(a, b)| 0.5 * (a + b)).collect();
        step = l1(&next, &x);
        x = next;
        if step <= POWER_TOL {
            let total: f64 = x.iter().sum();
            x.iter_mut().for_each(|v| *v = v.max(0.0) / total);
            return Ok(x);
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
        // |Mx - x|₁ = 2 |x_{n+1} - x_n|₁ for the lazy chain.
        residual: 2.0 * step,
    })
}
