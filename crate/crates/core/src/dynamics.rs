//! Joint system–environment dynamics and the process map built from
//! measure-and-prepare experiments.
//!
//! The composite space uses the system-major index `i = s * d_e + e`.
//! A [`JointChannel`] is a stochastic matrix on that space. When the initial
//! joint state is correlated, the system alone has no state-independent
//! stochastic map; what *is* well defined is the linear map from the
//! experimenter's preparation `ξ` to the output distribution, stored here as
//! a [`ProcessMap`].

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{
    clamp_entries, JointDist, JointWeights, ProbVec, StochMatrix, SubStochMatrix, SUM_TOL,
};

pub const LAYOUT: &str = "system-major";

/// Stochastic dynamics `Γ` on the joint system–environment space.
#[derive(Debug, Clone, PartialEq)]
pub struct JointChannel {
    gamma: StochMatrix,
    d_s: usize,
    d_e: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelWire {
    layout: String,
    d_s: usize,
    d_e: usize,
    gamma: StochMatrix,
}

impl JointChannel {
    pub fn new(gamma: StochMatrix, d_s: usize, d_e: usize) -> Result<Self> {
        let n = d_s * d_e;
        if d_s == 0 || d_e == 0 {
            return Err(Error::Empty);
        }
        if gamma.d_in() != n || gamma.d_out() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: gamma.d_in().max(gamma.d_out()),
                context: "joint channel size",
            });
        }
        Ok(Self { gamma, d_s, d_e })
    }

    /// A channel that moves each joint state `(s, e)` to `f(s, e)`.
    pub fn deterministic(
        d_s: usize,
        d_e: usize,
        f: impl Fn(usize, usize) -> (usize, usize),
    ) -> Self {
        let targets: Vec<usize> = (0..d_s * d_e)
            .map(|i| {
                let (s, e) = f(i / d_e, i % d_e);
                assert!(s < d_s && e < d_e, "deterministic target out of range");
                s * d_e + e
            })
            .collect();
        let gamma = StochMatrix::deterministic(d_s * d_e, &targets).expect("targets checked");
        Self { gamma, d_s, d_e }
    }

    pub fn identity(d_s: usize, d_e: usize) -> Self {
        Self::deterministic(d_s, d_e, |s, e| (s, e))
    }

    /// Exchanges system and environment.
    pub fn swap(d: usize) -> Self {
        Self::deterministic(d, d, |s, e| (e, s))
    }

    /// Controlled shift `s' = s + e (mod d)`, `e' = e`; for `d = 2` this is CNOT
    /// with the environment as control.
    pub fn controlled_shift(d: usize) -> Self {
        Self::deterministic(d, d, |s, e| ((s + e) % d, e))
    }

    pub fn d_s(&self) -> usize {
        self.d_s
    }

    pub fn d_e(&self) -> usize {
        self.d_e
    }

    pub fn matrix(&self) -> &StochMatrix {
        &self.gamma
    }

    fn check_joint(&self, d_s: usize, d_e: usize) -> Result<()> {
        if (d_s, d_e) != (self.d_s, self.d_e) {
            return Err(Error::DimensionMismatch {
                expected: self.d_s * self.d_e,
                found: d_s * d_e,
                context: "joint state vs channel",
            });
        }
        Ok(())
    }

    /// System marginal of `Γ` applied to flattened joint weights.
    fn system_output(&self, flat: &[f64]) -> Vec<f64> {
        let out = self
            .gamma
            .apply_weights(flat)
            .expect("size checked by caller");
        out.chunks(self.d_e).map(|c| c.iter().sum()).collect()
    }

    /// `tr_E[Γ(u_s ⊗ env)]`.
    fn output_from(&self, s: usize, env: &ProbVec) -> Vec<f64> {
        let mut flat = vec![0.0; self.d_s * self.d_e];
        flat[s * self.d_e..(s + 1) * self.d_e].copy_from_slice(env.as_slice());
        self.system_output(&flat)
    }

    /// The map `x ↦ tr_E[Γ(u_x ⊗ env)]` for a fixed environment state.
    fn map_with_env(&self, env: &ProbVec) -> StochMatrix {
        let cols: Vec<Vec<f64>> = (0..self.d_s).map(|x| self.output_from(x, env)).collect();
        StochMatrix::from_columns(&cols).expect("marginal of a stochastic column")
    }

    /// The reduced map an observer would write down by watching inputs and
    /// outputs: column `s` feeds `Γ` the environment conditioned on `s`.
    pub fn naive_map(&self, joint: &JointDist) -> Result<StochMatrix> {
        self.check_joint(joint.d_s(), joint.d_e())?;
        let cols = (0..self.d_s)
            .map(|s| Ok(self.output_from(s, &joint.conditional_env_given_system(s)?)))
            .collect::<Result<Vec<_>>>()?;
        StochMatrix::from_columns(&cols)
    }

    /// The full reduced map obtained when the environment is conditioned on
    /// the system having been found in `observed`.
    pub fn conditional_map(&self, joint: &JointDist, observed: usize) -> Result<StochMatrix> {
        self.check_joint(joint.d_s(), joint.d_e())?;
        Ok(self.map_with_env(&joint.conditional_env_given_system(observed)?))
    }

    /// Largest distance between conditional maps for different observed
    /// system states, measured in the induced ℓ1 norm (max column L1 sum).
    /// Zero iff the reduced dynamics does not depend on what was observed.
    pub fn conditional_map_discrepancy(&self, joint: &JointDist) -> Result<f64> {
        let maps = (0..self.d_s)
            .map(|s| self.conditional_map(joint, s))
            .collect::<Result<Vec<_>>>()?;
        let mut worst: f64 = 0.0;
        for (a, ma) in maps.iter().enumerate() {
            for mb in &maps[a + 1..] {
                worst = worst.max(induced_l1(ma.as_matrix(), mb.as_matrix()));
            }
        }
        Ok(worst)
    }

    /// The reduced map for an uncorrelated environment in state `t`.
    pub fn product_case_map(&self, env: &ProbVec) -> Result<StochMatrix> {
        if env.dim() != self.d_e {
            return Err(Error::DimensionMismatch {
                expected: self.d_e,
                found: env.dim(),
                context: "environment state",
            });
        }
        Ok(self.map_with_env(env))
    }

    /// Output distribution on the system after preparing with `xi` and running `Γ`.
    pub fn process_output(&self, joint: &JointDist, xi: &StochMatrix) -> Result<ProbVec> {
        self.check_joint(joint.d_s(), joint.d_e())?;
        let prepared = apply_preparation(&SubStochMatrix::from(xi), joint)?;
        ProbVec::new(self.system_output(&prepared.to_flat()))
    }
}

impl Serialize for JointChannel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ChannelWire {
            layout: LAYOUT.to_owned(),
            d_s: self.d_s,
            d_e: self.d_e,
            gamma: self.gamma.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for JointChannel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = ChannelWire::deserialize(d)?;
        if wire.layout != LAYOUT {
            return Err(serde::de::Error::custom(format!(
                "unsupported layout \"{}\", expected \"{LAYOUT}\"",
                wire.layout
            )));
        }
        JointChannel::new(wire.gamma, wire.d_s, wire.d_e).map_err(serde::de::Error::custom)
    }
}

fn induced_l1(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b)
        .column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `(ξ ⊗ I)·P`: operate on the system, leave the environment alone.
///
/// With a stochastic `xi` the result has unit mass and the environment
/// marginal is unchanged; a matrix unit `E_jk` post-selects on `s = k`.
pub fn apply_preparation(xi: &SubStochMatrix, joint: &JointDist) -> Result<JointWeights> {
    if xi.d_in() != joint.d_s() {
        return Err(Error::DimensionMismatch {
            expected: joint.d_s(),
            found: xi.d_in(),
            context: "preparation input",
        });
    }
    if xi.d_out() != joint.d_s() {
        return Err(Error::DimensionMismatch {
            expected: joint.d_s(),
            found: xi.d_out(),
            context: "preparation output",
        });
    }
    JointWeights::new(xi.as_matrix() * joint.as_matrix())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProcessWire {
    d_s: usize,
    basis_outputs: Vec<Vec<f64>>,
    marginal: ProbVec,
}

/// The linear map `Θ` from preparations `ξ` to output distributions.
///
/// Stored as the sub-normalized outputs `Θ[E_jk]` of the `d_s²`
/// measure-and-prepare operations, in lexicographic `(j, k)` order. Each
/// `Θ[E_jk]` has mass `p_k`, the probability that the measurement finds `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessMap {
    d_s: usize,
    basis_outputs: Vec<Vec<f64>>,
    marginal: ProbVec,
}

impl ProcessMap {
    pub fn new(basis_outputs: Vec<Vec<f64>>, marginal: ProbVec) -> Result<Self> {
        let d_s = marginal.dim();
        if basis_outputs.len() != d_s * d_s {
            return Err(Error::DimensionMismatch {
                expected: d_s * d_s,
                found: basis_outputs.len(),
                context: "number of basis outputs",
            });
        }
        let mut basis_outputs = basis_outputs;
        for (idx, out) in basis_outputs.iter_mut().enumerate() {
            if out.len() != d_s {
                return Err(Error::DimensionMismatch {
                    expected: d_s,
                    found: out.len(),
                    context: "basis output length",
                });
            }
            clamp_entries(out, idx * d_s)?;
            let k = idx % d_s;
            let mass: f64 = out.iter().sum();
            if (mass - marginal[k]).abs() > SUM_TOL {
                return Err(Error::BadNormalization {
                    sum: mass,
                    expected: marginal[k],
                });
            }
        }
        Ok(Self {
            d_s,
            basis_outputs,
            marginal,
        })
    }

    /// Tomography with exact arithmetic: run every `E_jk` through `Γ`.
    pub fn from_channel(gamma: &JointChannel, joint: &JointDist) -> Result<Self> {
        gamma.check_joint(joint.d_s(), joint.d_e())?;
        let d = joint.d_s();
        let d_e = joint.d_e();
        let flat = joint.to_flat();
        let mut basis_outputs = Vec::with_capacity(d * d);
        for j in 0..d {
            for k in 0..d {
                // (E_jk ⊗ I)P moves row k of P into row j.
                let mut prepared = vec![0.0; d * d_e];
                prepared[j * d_e..(j + 1) * d_e].copy_from_slice(&flat[k * d_e..(k + 1) * d_e]);
                basis_outputs.push(gamma.system_output(&prepared));
            }
        }
        Self::new(basis_outputs, joint.marginal_system())
    }

    pub fn d_s(&self) -> usize {
        self.d_s
    }

    /// The system marginal `p` the preparations act on.
    pub fn marginal(&self) -> &ProbVec {
        &self.marginal
    }

    /// `Θ[E_jk]`, with mass `p_k`.
    pub fn basis_output(&self, j: usize, k: usize) -> &[f64] {
        &self.basis_outputs[j * self.d_s + k]
    }

    pub fn basis_outputs(&self) -> &[Vec<f64>] {
        &self.basis_outputs
    }

    /// `Θ[E_jk] / p_k`, or `None` when outcome `k` never occurs.
    pub fn normalized_output(&self, j: usize, k: usize) -> Option<ProbVec> {
        let pk = self.marginal[k];
        if pk <= 0.0 {
            return None;
        }
        let v = self.basis_output(j, k).iter().map(|x| x / pk).collect();
        Some(ProbVec::new(v).expect("mass p_k checked at construction"))
    }

    /// `Θ[ξ] = Σ_jk ξ_jk Θ[E_jk]`.
    pub fn apply(&self, xi: &StochMatrix) -> Result<ProbVec> {
        if xi.d_in() != self.d_s || xi.d_out() != self.d_s {
            return Err(Error::DimensionMismatch {
                expected: self.d_s,
                found: xi.d_in().max(xi.d_out()),
                context: "preparation size",
            });
        }
        let mut q = vec![0.0; self.d_s];
        for j in 0..self.d_s {
            for k in 0..self.d_s {
                let x = xi.get(j, k);
                if x == 0.0 {
                    continue;
                }
                for (qi, &b) in q.iter_mut().zip(self.basis_output(j, k)) {
                    *qi += x * b;
                }
            }
        }
        ProbVec::new(q)
    }
}

impl Serialize for ProcessMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ProcessWire {
            d_s: self.d_s,
            basis_outputs: self.basis_outputs.clone(),
            marginal: self.marginal.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ProcessMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = ProcessWire::deserialize(d)?;
        if wire.marginal.dim() != wire.d_s {
            return Err(serde::de::Error::custom(format!(
                "marginal has dimension {}, expected d_s = {}",
                wire.marginal.dim(),
                wire.d_s
            )));
        }
        ProcessMap::new(wire.basis_outputs, wire.marginal).map_err(serde::de::Error::custom)
    }
}
