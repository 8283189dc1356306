//! Seeded random instances: every distribution and every column is drawn
//! from the flat Dirichlet distribution, i.e. uniformly over the simplex.

use serde::{Deserialize, Serialize};

use crate::dynamics::JointChannel;
use crate::error::{Error, Result};
use crate::prob::{JointDist, ProbVec, StochMatrix};
use crate::rng::SplitMix64;

/// Uniform point on the `(dim - 1)`-simplex via normalized exponentials.
pub fn flat_dirichlet(rng: &mut SplitMix64, dim: usize) -> ProbVec {
    loop {
        let raw: Vec<f64> = (0..dim).map(|_| -(1.0 - rng.next_f64()).ln()).collect();
        let total: f64 = raw.iter().sum();
        if total > 0.0 {
            return ProbVec::new(raw.into_iter().map(|x| x / total).collect())
                .expect("normalized exponentials");
        }
    }
}

pub fn stochastic_matrix(rng: &mut SplitMix64, d_out: usize, d_in: usize) -> StochMatrix {
    let cols: Vec<ProbVec> = (0..d_in).map(|_| flat_dirichlet(rng, d_out)).collect();
    StochMatrix::from_columns(&cols).expect("dirichlet columns")
}

pub fn joint_dist(rng: &mut SplitMix64, d_s: usize, d_e: usize) -> JointDist {
    JointDist::from_flat(d_s, d_e, flat_dirichlet(rng, d_s * d_e).as_slice())
        .expect("dirichlet joint")
}

pub fn joint_channel(rng: &mut SplitMix64, d_s: usize, d_e: usize) -> JointChannel {
    let n = d_s * d_e;
    JointChannel::new(stochastic_matrix(rng, n, n), d_s, d_e).expect("square composite matrix")
}

/// One experiment: dynamics `Γ`, initial joint state `P`, preparation `ξ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceWire")]
pub struct Instance {
    pub gamma: JointChannel,
    pub joint: JointDist,
    pub xi: StochMatrix,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceWire {
    gamma: JointChannel,
    joint: JointDist,
    xi: StochMatrix,
}

impl TryFrom<InstanceWire> for Instance {
    type Error = Error;

    fn try_from(w: InstanceWire) -> Result<Self> {
        Instance::new(w.gamma, w.joint, w.xi)
    }
}

impl Instance {
    pub fn new(gamma: JointChannel, joint: JointDist, xi: StochMatrix) -> Result<Self> {
        if (gamma.d_s(), gamma.d_e()) != (joint.d_s(), joint.d_e()) {
            return Err(Error::DimensionMismatch {
                expected: gamma.d_s() * gamma.d_e(),
                found: joint.d_s() * joint.d_e(),
                context: "instance joint state vs channel",
            });
        }
        if xi.d_in() != joint.d_s() || xi.d_out() != joint.d_s() {
            return Err(Error::DimensionMismatch {
                expected: joint.d_s(),
                found: xi.d_in().max(xi.d_out()),
                context: "instance preparation",
            });
        }
        Ok(Self { gamma, joint, xi })
    }

    /// Draws `Γ`, then `P`, then `ξ` from `rng`.
    pub fn random(rng: &mut SplitMix64, d_s: usize, d_e: usize) -> Self {
        let gamma = joint_channel(rng, d_s, d_e);
        let joint = joint_dist(rng, d_s, d_e);
        let xi = stochastic_matrix(rng, d_s, d_s);
        Self { gamma, joint, xi }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirichlet_is_a_distribution_with_flat_mean() {
        let mut rng = SplitMix64::new(5);
        let n = 20_000;
        let mut mean = [0.0; 3];
        for _ in 0..n {
            let p = flat_dirichlet(&mut rng, 3);
            assert!(p.has_full_support());
            for (m, x) in mean.iter_mut().zip(p.iter()) {
                *m += x / n as f64;
            }
        }
        // Marginal is Beta(1, 2): mean 1/3, sd ≈ 0.236; 5σ/√n ≈ 0.0083.
        for m in mean {
            assert!((m - 1.0 / 3.0).abs() < 0.0083, "{mean:?}");
        }
    }

    #[test]
    fn instances_are_reproducible() {
        let a = Instance::random(&mut SplitMix64::new(11), 3, 2);
        let b = Instance::random(&mut SplitMix64::new(11), 3, 2);
        assert_eq!(a, b);
        assert_eq!(a.gamma.d_s(), 3);
        assert_eq!(a.joint.d_e(), 2);
        let text = serde_json::to_string(&a).unwrap();
        assert_eq!(serde_json::from_str::<Instance>(&text).unwrap(), a);
    }

    #[test]
    fn mismatched_instance_rejected() {
        let mut rng = SplitMix64::new(1);
        let gamma = joint_channel(&mut rng, 2, 2);
        let joint = joint_dist(&mut rng, 2, 3);
        let xi = StochMatrix::identity(2);
        assert!(Instance::new(gamma, joint, xi).is_err());
    }
}
