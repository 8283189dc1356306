//! Probability vectors, stochastic matrices, joint distributions and the
//! information measures defined on them.
//!
//! Every matrix is column-stochastic: column `k` holds the output
//! distribution for input basis state `k`, and maps act on column vectors.

mod infer;
mod info;
mod joint;
mod matrix;
mod vector;

pub use infer::{infer_stochastic_map, RANK_TOL};
pub use info::{entropy, kl, Units};
pub use joint::{JointDist, JointWeights};
pub use matrix::{StochMatrix, SubStochMatrix};
pub use vector::{ProbVec, CLAMP_TOL, SUM_TOL};

pub(crate) use info::entropy_of;
pub(crate) use vector::{clamp_entries, l1};
