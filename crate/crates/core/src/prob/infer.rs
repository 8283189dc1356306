use nalgebra::DMatrix;

use super::matrix::StochMatrix;
use crate::error::{Error, Result};

/// Singular values below this mark the input states as linearly dependent.
pub const RANK_TOL: f64 = 1e-10;

fn columns_to_matrix<C: AsRef<[f64]>>(cols: &[C], context: &'static str) -> Result<DMatrix<f64>> {
    let nrows = cols.first().map_or(0, |c| c.as_ref().len());
    if nrows == 0 {
        return Err(Error::Empty);
    }
    let mut data = Vec::with_capacity(nrows * cols.len());
    for c in cols {
        let c = c.as_ref();
        if c.len() != nrows {
            return Err(Error::DimensionMismatch {
                expected: nrows,
                found: c.len(),
                context,
            });
        }
        data.extend_from_slice(c);
    }
    Ok(DMatrix::from_vec(nrows, cols.len(), data))
}

/// Recovers the linear map that sends each input state to the matching
/// observed output.
///
/// With the basis states `u_j` as inputs this is just `Σ_j q_j u_jᵀ`. Any
/// other set of `d` linearly independent inputs works as well. When the
/// unique linear solution is not column-stochastic the observations cannot
/// come from a state-independent stochastic map, and
/// [`Error::NotStochastic`] says so.
pub fn infer_stochastic_map<I, O>(inputs: &[I], outputs: &[O]) -> Result<StochMatrix>
where
    I: AsRef<[f64]>,
    O: AsRef<[f64]>,
{
    if inputs.len() != outputs.len() {
        return Err(Error::DimensionMismatch {
            expected: inputs.len(),
            found: outputs.len(),
            context: "number of outputs",
        });
    }
    let u = columns_to_matrix(inputs, "input length")?;
    let q = columns_to_matrix(outputs, "output length")?;
    if !u.is_square() {
        return Err(Error::DimensionMismatch {
            expected: u.nrows(),
            found: u.ncols(),
            context: "number of input states",
        });
    }

    let sigma_min = u.singular_values().min();
    if sigma_min < RANK_TOL {
        return Err(Error::RankDeficient { sigma_min });
    }
    let u_inv = u.try_inverse().ok_or(Error::RankDeficient { sigma_min })?;
    let lambda = q * u_inv;

    StochMatrix::new(lambda).map_err(|e| Error::NotStochastic {
        reason: e.to_string(),
    })
}
