//! Classical stochastic dynamics when the system starts out correlated with
//! its environment.
//!
//! A joint channel `Γ` acts on system and environment together, and the
//! experimenter controls only a preparation `ξ` on the system. With a
//! product initial state the system evolves by an ordinary stochastic
//! matrix; with correlations it does not, and the object to work with is the
//! process map `Θ` from preparations to output distributions.
//!
//! - [`prob`]: validated distributions, stochastic matrices, joint states,
//!   entropy and divergence.
//! - [`dynamics`]: joint channels, the naive reduced map, preparations and
//!   the process map.
//! - [`second_law`]: the lifted map `Θ♯`, its fixed point and the
//!   entropy-production bound.
//! - [`sampler`]: Monte Carlo tomography of `Θ` with reproducible
//!   substreams.
//! - [`suites`] and [`cli`]: seeded property suites and the `corrstoch`
//!   command line.
//!
//! Matrices are column-stochastic and composite indices are system-major,
//! `i = s·d_E + e`.
//!
//! ```
//! use corrstoch::dynamics::{JointChannel, ProcessMap};
//! use corrstoch::prob::{JointDist, ProbVec, StochMatrix};
//! use corrstoch::second_law::second_law_check;
//!
//! let joint = JointDist::perfectly_correlated(&ProbVec::uniform(2));
//! let theta = ProcessMap::from_channel(&JointChannel::controlled_shift(2), &joint)?;
//! let report = second_law_check(&theta, &StochMatrix::identity(2))?;
//! assert!(report.satisfied);
//! # Ok::<(), corrstoch::Error>(())
//! ```
//!
//! A longer guide lives in the `book/` directory of the repository.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod fixed_point;
pub mod json;
pub mod prob;
pub mod random;
pub mod rng;
pub mod sampler;
pub mod second_law;
pub mod suites;

pub use error::{Error, Result};

// Compiles the guide's code blocks as doctests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/probability.md")]
    mod probability {}
    #[doc = include_str!("../../../book/src/correlated-dynamics.md")]
    mod correlated_dynamics {}
    #[doc = include_str!("../../../book/src/process-map.md")]
    mod process_map {}
    #[doc = include_str!("../../../book/src/second-law.md")]
    mod second_law {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
