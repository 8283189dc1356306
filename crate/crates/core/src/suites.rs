//! Seeded property suites over random instances.
//!
//! Each suite draws `trials` independent instances, trial `t` of suite `i`
//! from SplitMix64 substream `t` of the suite's seed (itself stream `i` of the
//! master seed). Trials run in parallel; results are collected in trial
//! order, so the summary is the same for any thread count.

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{apply_preparation, ProcessMap};
use crate::error::Result;
use crate::json::extended_f64;
use crate::prob::{infer_stochastic_map, l1, JointDist, ProbVec, StochMatrix};
use crate::random::{self, Instance};
use crate::rng::SplitMix64;
use crate::second_law::{
    fixed_point, kl_contractivity_check, lift_theta, second_law_check, spohn_check, vectorize_prep,
};

/// Tolerance for identities that hold exactly in real arithmetic.
pub const EXACT_TOL: f64 = 1e-12;
/// Tolerance on fixed-point residuals and the product structure of `ε`.
pub const FIXED_POINT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
pub struct SuiteConfig {
    pub trials: u64,
    pub seed: u64,
    /// Allowed violation of the inequalities (contractivity, entropy bounds).
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteOutcome {
    pub name: &'static str,
    /// What `worst` measures; larger is worse.
    pub measure: &'static str,
    pub trials: u64,
    pub passed: u64,
    #[serde(with = "extended_f64")]
    pub worst: f64,
    #[serde(with = "extended_f64")]
    pub threshold: f64,
    /// Up to five failing trial indices.
    pub failures: Vec<u64>,
}

impl SuiteOutcome {
    pub fn all_passed(&self) -> bool {
        self.passed == self.trials
    }
}

struct Trial {
    value: f64,
    ok: bool,
}

impl Trial {
    fn at_most(value: f64, threshold: f64) -> Self {
        Self {
            value,
            ok: value <= threshold,
        }
    }
}

type TrialFn = fn(&mut SplitMix64, f64) -> Result<Trial>;

struct Suite {
    name: &'static str,
    measure: &'static str,
    /// Pinned threshold, or `None` to use the configured tolerance.
    threshold: Option<f64>,
    trial: TrialFn,
}

fn dims_2_3(rng: &mut SplitMix64) -> (usize, usize) {
    (2 + rng.below(2), 2 + rng.below(2))
}

/// Draws the instance used by the second-law style suites.
pub fn random_instance(rng: &mut SplitMix64) -> Instance {
    let (d_s, d_e) = dims_2_3(rng);
    Instance::random(rng, d_s, d_e)
}

fn kl_contractivity(rng: &mut SplitMix64, tol: f64) -> Result<Trial> {
    let d = [2, 3, 5][rng.below(3)];
    let m = random::stochastic_matrix(rng, d, d);
    let p = random::flat_dirichlet(rng, d);
    let q = random::flat_dirichlet(rng, d);
    Ok(Trial::at_most(-kl_contractivity_check(&m, &p, &q)?, tol))
}

fn second_law(rng: &mut SplitMix64, tol: f64) -> Result<Trial> {
    let inst = random_instance(rng);
    let theta = ProcessMap::from_channel(&inst.gamma, &inst.joint)?;
    let report = second_law_check(&theta, &inst.xi)?;
    Ok(Trial {
        value: -report.slack,
        ok: report.satisfied && report.slack >= -tol,
    })
}

fn lift_validity(rng: &mut SplitMix64, _: f64) -> Result<Trial> {
    let inst = random_instance(rng);
    let d = inst.joint.d_s();
    let theta = ProcessMap::from_channel(&inst.gamma, &inst.joint)?;
    let lifted = lift_theta(&theta);
    let column_error = (0..d * d)
        .map(|c| (lifted.matrix().column(c).iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let fp = fixed_point(&lifted)?;
    // ε = e ⊗ id/d: every block of d entries is flat.
    let structure_error = fp
        .epsilon
        .as_slice()
        .chunks(d)
        .map(|block| {
            let mean = block.iter().sum::<f64>() / d as f64;
            block.iter().map(|x| (x - mean).abs()).sum::<f64>()
        })
        .sum::<f64>();
    Ok(Trial {
        value: fp.residual,
        ok: column_error <= EXACT_TOL
            && fp.residual <= FIXED_POINT_TOL
            && structure_error <= FIXED_POINT_TOL,
    })
}

fn lift_consistency(rng: &mut SplitMix64, _: f64) -> Result<Trial> {
    let inst = random_instance(rng);
    let d = inst.joint.d_s();
    let theta = ProcessMap::from_channel(&inst.gamma, &inst.joint)?;
    let lifted = lift_theta(&theta);
    let prep = vectorize_prep(&inst.xi, theta.marginal())?;
    let image = lifted.matrix().apply(prep.entries())?;
    let target = theta.apply(&inst.xi)?.tensor(&ProbVec::uniform(d));
    Ok(Trial::at_most(image.l1_distance(&target), EXACT_TOL))
}

fn tomography_exactness(rng: &mut SplitMix64, _: f64) -> Result<Trial> {
    let inst = random_instance(rng);
    let theta = ProcessMap::from_channel(&inst.gamma, &inst.joint)?;
    let predicted = theta.apply(&inst.xi)?;
    let actual = inst.gamma.process_output(&inst.joint, &inst.xi)?;
    Ok(Trial::at_most(predicted.l1_distance(&actual), EXACT_TOL))
}

fn product_reduction(rng: &mut SplitMix64, _: f64) -> Result<Trial> {
    let (d_s, d_e) = dims_2_3(rng);
    let gamma = random::joint_channel(rng, d_s, d_e);
    let p = random::flat_dirichlet(rng, d_s);
    let t = random::flat_dirichlet(rng, d_e);
    let xi = random::stochastic_matrix(rng, d_s, d_s);
    let joint = JointDist::product(&p, &t);

    let reduced = gamma.product_case_map(&t)?;
    let theta = ProcessMap::from_channel(&gamma, &joint)?;
    let via_theta = theta.apply(&xi)?;
    let via_map = reduced.apply(&xi.apply(&p)?)?;
    let worst = via_theta
        .l1_distance(&via_map)
        .max(gamma.conditional_map_discrepancy(&joint)?)
        .max(gamma.naive_map(&joint)?.max_abs_diff(&reduced));
    Ok(Trial::at_most(worst, EXACT_TOL))
}

fn theta_linearity(rng: &mut SplitMix64, _: f64) -> Result<Trial> {
    let inst = random_instance(rng);
    let d = inst.joint.d_s();
    let theta = ProcessMap::from_channel(&inst.gamma, &inst.joint)?;
    let other = random::stochastic_matrix(rng, d, d);
    let alpha = rng.next_f64();
    let mixed = StochMatrix::new(inst.xi.as_matrix() * alpha + other.as_matrix() * (1.0 - alpha))?;
    let lhs = theta.apply(&mixed)?;
    let a = theta.apply(&inst.xi)?;
    let b = theta.apply(&other)?;
    let rhs: Vec<f64> = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| alpha * x + (1.0 - alpha) * y)
        .collect();
    Ok(Trial::at_most(l1(lhs.as_slice(), &rhs), EXACT_TOL))
}

fn spohn(rng: &mut SplitMix64, tol: f64) -> Result<Trial> {
    let d = 2 + rng.below(2);
    let lambda = random::stochastic_matrix(rng, d, d);
    let p = random::flat_dirichlet(rng, d);
    let report = spohn_check(&lambda, &p)?;
    Ok(Trial {
        value: -report.slack,
        ok: report.unique && report.satisfied && report.slack >= -tol,
    })
}

fn marginal_consistency(rng: &mut SplitMix64, _: f64) -> Result<Trial> {
    let (d_s, d_e) = dims_2_3(rng);
    let joint = random::joint_dist(rng, d_s, d_e);
    let p = joint.marginal_system();
    let mut mixture = vec![0.0; d_e];
    for s in 0..d_s {
        let c = joint.conditional_env_given_system(s)?;
        for (m, x) in mixture.iter_mut().zip(c.iter()) {
            *m += p[s] * x;
        }
    }
    Ok(Trial::at_most(
        l1(&mixture, joint.marginal_env().as_slice()),
        EXACT_TOL,
    ))
}

fn preparation_env_invariance(rng: &mut SplitMix64, _: f64) -> Result<Trial> {
    let (d_s, d_e) = dims_2_3(rng);
    let joint = random::joint_dist(rng, d_s, d_e);
    let xi = random::stochastic_matrix(rng, d_s, d_s);
    let prepared = apply_preparation(&xi.into(), &joint)?;
    Ok(Trial::at_most(
        l1(&prepared.env_weights(), joint.marginal_env().as_slice()),
        EXACT_TOL,
    ))
}

fn infer_round_trip(rng: &mut SplitMix64, _: f64) -> Result<Trial> {
    let d = [2, 3, 5][rng.below(3)];
    let m = random::stochastic_matrix(rng, d, d);
    let inputs: Vec<ProbVec> = (0..d).map(|i| ProbVec::basis(d, i)).collect();
    let outputs = inputs
        .iter()
        .map(|u| m.apply(u))
        .collect::<Result<Vec<_>>>()?;
    let back = infer_stochastic_map(&inputs, &outputs)?;
    Ok(Trial::at_most(back.max_abs_diff(&m), EXACT_TOL))
}

fn uniform_reduction(rng: &mut SplitMix64, _: f64) -> Result<Trial> {
    let d = 2 + rng.below(4);
    let xi = random::stochastic_matrix(rng, d, d);
    let prep = vectorize_prep(&xi, &ProbVec::uniform(d))?;
    let mismatches = (0..d)
        .flat_map(|j| (0..d).map(move |k| (j, k)))
        .filter(|&(j, k)| prep.entry(j, k).to_bits() != (xi.get(j, k) / d as f64).to_bits())
        .count();
    Ok(Trial::at_most(mismatches as f64, 0.0))
}

const SUITES: &[Suite] = &[
    Suite {
        name: "kl_contractivity",
        measure: "kl(Mp,Mq) - kl(p,q)",
        threshold: None,
        trial: kl_contractivity,
    },
    Suite {
        name: "second_law",
        measure: "-slack",
        threshold: None,
        trial: second_law,
    },
    Suite {
        name: "lift_validity",
        measure: "fixed point residual",
        threshold: Some(FIXED_POINT_TOL),
        trial: lift_validity,
    },
    Suite {
        name: "lift_consistency",
        measure: "|lift(xi_up) - q_up|_1",
        threshold: Some(EXACT_TOL),
        trial: lift_consistency,
    },
    Suite {
        name: "tomography_exactness",
        measure: "|theta(xi) - process_output|_1",
        threshold: Some(EXACT_TOL),
        trial: tomography_exactness,
    },
    Suite {
        name: "product_reduction",
        measure: "max deviation from the product-state map",
        threshold: Some(EXACT_TOL),
        trial: product_reduction,
    },
    Suite {
        name: "theta_linearity",
        measure: "|theta(mix) - mix(theta)|_1",
        threshold: Some(EXACT_TOL),
        trial: theta_linearity,
    },
    Suite {
        name: "spohn",
        measure: "-slack",
        threshold: None,
        trial: spohn,
    },
    Suite {
        name: "marginal_consistency",
        measure: "|sum_s p_s P(E|s) - P_E|_1",
        threshold: Some(EXACT_TOL),
        trial: marginal_consistency,
    },
    Suite {
        name: "preparation_env_invariance",
        measure: "|env marginal change|_1",
        threshold: Some(EXACT_TOL),
        trial: preparation_env_invariance,
    },
    Suite {
        name: "infer_round_trip",
        measure: "max |infer(M u) - M|",
        threshold: Some(EXACT_TOL),
        trial: infer_round_trip,
    },
    Suite {
        name: "uniform_reduction",
        measure: "entries differing from vec(xi)/d",
        threshold: Some(0.0),
        trial: uniform_reduction,
    },
];

/// Names of every suite, in run order.
pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|s| s.name).collect()
}

fn run_suite(index: usize, suite: &Suite, cfg: &SuiteConfig) -> SuiteOutcome {
    let suite_seed = SplitMix64::substream(cfg.seed, index as u64).next_u64();
    let threshold = suite.threshold.unwrap_or(cfg.tolerance);
    let trials: Vec<Trial> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = SplitMix64::substream(suite_seed, t);
            (suite.trial)(&mut rng, cfg.tolerance).unwrap_or(Trial {
                value: f64::INFINITY,
                ok: false,
            })
        })
        .collect();
    let failures: Vec<u64> = trials
        .iter()
        .enumerate()
        .filter(|(_, t)| !t.ok)
        .map(|(i, _)| i as u64)
        .collect();
    SuiteOutcome {
        name: suite.name,
        measure: suite.measure,
        trials: cfg.trials,
        passed: cfg.trials - failures.len() as u64,
        worst: trials
            .iter()
            .map(|t| t.value)
            .fold(f64::NEG_INFINITY, f64::max),
        threshold,
        failures: failures.into_iter().take(5).collect(),
    }
}

/// Runs every suite.
pub fn run_all(cfg: &SuiteConfig) -> Vec<SuiteOutcome> {
    SUITES
        .iter()
        .enumerate()
        .map(|(i, s)| run_suite(i, s, cfg))
        .collect()
}

/// Runs the suite called `name`, if it exists.
pub fn run_one(name: &str, cfg: &SuiteConfig) -> Option<SuiteOutcome> {
    SUITES
        .iter()
        .enumerate()
        .find(|(_, s)| s.name == name)
        .map(|(i, s)| run_suite(i, s, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::JointChannel;

    #[test]
    fn every_suite_passes_briefly() {
        let cfg = SuiteConfig {
            trials: 20,
            seed: 1,
            tolerance: 1e-9,
        };
        for outcome in run_all(&cfg) {
            assert!(outcome.all_passed(), "{outcome:?}");
        }
    }

    #[test]
    fn summaries_are_reproducible() {
        let cfg = SuiteConfig {
            trials: 10,
            seed: 42,
            tolerance: 1e-9,
        };
        let a = crate::json::to_string(&run_all(&cfg)).unwrap();
        let b = crate::json::to_string(&run_all(&cfg)).unwrap();
        assert_eq!(a, b);
        assert!(run_one("no_such_suite", &cfg).is_none());
        assert_eq!(suite_names().len(), 12);
    }

    #[test]
    fn swap_instance_is_a_channel() {
        // Guards the helper used by several suites.
        let g = JointChannel::swap(3);
        assert_eq!(g.matrix().d_in(), 9);
    }
}
