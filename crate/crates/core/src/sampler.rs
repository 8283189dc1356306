//! Monte Carlo tomography of the process map.
//!
//! Each basis operation `E_jk` is realized by post-selection: draw `(s, e)`
//! from `P`, discard the run unless `s = k`, set the system to `j` and let
//! `Γ` act. The histogram of accepted outputs estimates `Θ[E_jk]/p_k` and the
//! acceptance rate estimates `p_k`.
//!
//! Every cell `(j, k)` draws from its own SplitMix64 substream (stream
//! number `j·d_s + k` of the run seed), so the result does not depend on how
//! cells are scheduled across threads.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{JointChannel, ProcessMap};
use crate::error::{Error, Result};
use crate::prob::{JointDist, ProbVec};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    samples: u64,
    seed: u64,
    d_s: usize,
    d_e: usize,
}

impl RunConfig {
    pub fn new(samples: u64, seed: u64, d_s: usize, d_e: usize) -> Result<Self> {
        if samples == 0 {
            return Err(Error::Config {
                field: "samples",
                reason: "must be at least 1".into(),
            });
        }
        if d_s == 0 || d_e == 0 {
            return Err(Error::Config {
                field: "dims",
                reason: "dimensions must be positive".into(),
            });
        }
        Ok(Self {
            samples,
            seed,
            d_s,
            d_e,
        })
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.d_s, self.d_e)
    }
}

/// Inverse-CDF sampler over a fixed discrete distribution.
///
/// Cumulative sums are accumulated left to right; a draw `u ∈ [0,1)` picks
/// the first index whose cumulative mass exceeds `u`. If rounding leaves `u`
/// above the total, the last index with positive mass is returned.
#[derive(Debug, Clone)]
struct Cdf {
    cumulative: Vec<f64>,
    last_positive: usize,
}

impl Cdf {
    fn new(weights: &[f64]) -> Self {
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|&w| {
                acc += w;
                acc
            })
            .collect();
        let last_positive = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
        Self {
            cumulative,
            last_positive,
        }
    }

    fn sample(&self, rng: &mut SplitMix64) -> usize {
        let u = rng.next_f64();
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.last_positive)
    }
}

/// Draws a joint outcome `(s, e)` with probability `P(s, e)`.
pub fn sample_joint(joint: &JointDist, rng: &mut SplitMix64) -> (usize, usize) {
    let i = Cdf::new(&joint.to_flat()).sample(rng);
    (i / joint.d_e(), i % joint.d_e())
}

/// Precomputed samplers for one `(Γ, P)` pair.
struct Machine {
    joint: Cdf,
    columns: Vec<Cdf>,
    d_s: usize,
    d_e: usize,
}

impl Machine {
    fn new(gamma: &JointChannel, joint: &JointDist) -> Result<Self> {
        if (gamma.d_s(), gamma.d_e()) != (joint.d_s(), joint.d_e()) {
            return Err(Error::DimensionMismatch {
                expected: gamma.d_s() * gamma.d_e(),
                found: joint.d_s() * joint.d_e(),
                context: "joint state vs channel",
            });
        }
        let n = gamma.d_s() * gamma.d_e();
        Ok(Self {
            joint: Cdf::new(&joint.to_flat()),
            columns: (0..n).map(|c| Cdf::new(gamma.matrix().column(c))).collect(),
            d_s: gamma.d_s(),
            d_e: gamma.d_e(),
        })
    }

    fn run(&self, j: usize, k: usize, rng: &mut SplitMix64) -> Option<usize> {
        let i = self.joint.sample(rng);
        let (s, e) = (i / self.d_e, i % self.d_e);
        if s != k {
            return None;
        }
        Some(self.columns[j * self.d_e + e].sample(rng) / self.d_e)
    }

    fn cell(&self, j: usize, k: usize, samples: u64, seed: u64) -> (Vec<u64>, u64) {
        let mut rng = SplitMix64::substream(seed, (j * self.d_s + k) as u64);
        let mut hist = vec![0u64; self.d_s];
        let mut accepted = 0;
        for _ in 0..samples {
            if let Some(out) = self.run(j, k, &mut rng) {
                hist[out] += 1;
                accepted += 1;
            }
        }
        (hist, accepted)
    }
}

/// One post-selected run of the basis operation `E_jk`.
///
/// Returns `None` when the measurement does not find the system in `k`,
/// otherwise the system outcome after `Γ`.
pub fn simulate_basis_run(
    gamma: &JointChannel,
    joint: &JointDist,
    j: usize,
    k: usize,
    rng: &mut SplitMix64,
) -> Result<Option<usize>> {
    let machine = Machine::new(gamma, joint)?;
    if j >= machine.d_s || k >= machine.d_s {
        return Err(Error::DimensionMismatch {
            expected: machine.d_s,
            found: j.max(k) + 1,
            context: "basis operation index",
        });
    }
    Ok(machine.run(j, k, rng))
}

/// Output histograms and acceptance counts for every basis operation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpiricalProcess {
    d_s: usize,
    samples: u64,
    seed: u64,
    /// Histogram for cell `j·d_s + k`.
    counts: Vec<Vec<u64>>,
    accepted: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmpiricalWire {
    d_s: usize,
    samples: u64,
    seed: u64,
    counts: Vec<Vec<Vec<u64>>>,
    accepted: Vec<Vec<u64>>,
}

impl EmpiricalProcess {
    /// Assembles counts gathered elsewhere; `counts[j][k]` is the output
    /// histogram for `E_jk`.
    pub fn from_counts(samples: u64, seed: u64, counts: Vec<Vec<Vec<u64>>>) -> Result<Self> {
        let d_s = counts.len();
        let mut flat = Vec::with_capacity(d_s * d_s);
        for (j, row) in counts.into_iter().enumerate() {
            if row.len() != d_s {
                return Err(Error::DimensionMismatch {
                    expected: d_s,
                    found: row.len(),
                    context: "histogram row",
                });
            }
            for (k, hist) in row.into_iter().enumerate() {
                if hist.len() != d_s {
                    return Err(Error::DimensionMismatch {
                        expected: d_s,
                        found: hist.len(),
                        context: "histogram length",
                    });
                }
                let total: u64 = hist.iter().sum();
                if total > samples {
                    return Err(Error::Config {
                        field: "counts",
                        reason: format!(
                            "cell ({j}, {k}) has {total} accepted runs out of {samples}"
                        ),
                    });
                }
                flat.push(hist);
            }
        }
        let accepted = flat.iter().map(|h| h.iter().sum()).collect();
        Ok(Self {
            d_s,
            samples,
            seed,
            counts: flat,
            accepted,
        })
    }

    pub fn d_s(&self) -> usize {
        self.d_s
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn counts(&self, j: usize, k: usize) -> &[u64] {
        &self.counts[j * self.d_s + k]
    }

    pub fn accepted(&self, j: usize, k: usize) -> u64 {
        self.accepted[j * self.d_s + k]
    }

    /// Normalized output histogram for `E_jk`, if any run was accepted.
    pub fn conditional_estimate(&self, j: usize, k: usize) -> Option<Vec<f64>> {
        let a = self.accepted(j, k);
        (a > 0).then(|| {
            self.counts(j, k)
                .iter()
                .map(|&c| c as f64 / a as f64)
                .collect()
        })
    }

    /// One CSV row per `(j, k, output)` with the count and the cell's totals.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["j", "k", "output", "count", "accepted", "samples"])?;
        for j in 0..self.d_s {
            for k in 0..self.d_s {
                for (out, c) in self.counts(j, k).iter().enumerate() {
                    w.write_record(&[
                        j.to_string(),
                        k.to_string(),
                        out.to_string(),
                        c.to_string(),
                        self.accepted(j, k).to_string(),
                        self.samples.to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    fn nested<T: Clone>(&self, flat: &[T]) -> Vec<Vec<T>> {
        flat.chunks(self.d_s).map(<[T]>::to_vec).collect()
    }
}

impl Serialize for EmpiricalProcess {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        EmpiricalWire {
            d_s: self.d_s,
            samples: self.samples,
            seed: self.seed,
            counts: self.nested(&self.counts),
            accepted: self.nested(&self.accepted),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for EmpiricalProcess {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = EmpiricalWire::deserialize(d)?;
        let process = EmpiricalProcess::from_counts(wire.samples, wire.seed, wire.counts)
            .map_err(serde::de::Error::custom)?;
        if process.d_s != wire.d_s || wire.accepted != process.nested(&process.accepted) {
            return Err(serde::de::Error::custom(
                "accepted counts or d_s disagree with the histograms",
            ));
        }
        Ok(process)
    }
}

/// Runs every basis operation `cfg.samples()` times.
pub fn estimate_process(
    gamma: &JointChannel,
    joint: &JointDist,
    cfg: &RunConfig,
) -> Result<EmpiricalProcess> {
    if (gamma.d_s(), gamma.d_e()) != cfg.dims() {
        return Err(Error::Config {
            field: "dims",
            reason: format!(
                "run configured for {:?} but channel is {:?}",
                cfg.dims(),
                (gamma.d_s(), gamma.d_e())
            ),
        });
    }
    let machine = Machine::new(gamma, joint)?;
    let d = machine.d_s;
    let cells: Vec<(Vec<u64>, u64)> = (0..d * d)
        .into_par_iter()
        .map(|cell| machine.cell(cell / d, cell % d, cfg.samples, cfg.seed))
        .collect();
    let (counts, accepted) = cells.into_iter().unzip();
    Ok(EmpiricalProcess {
        d_s: d,
        samples: cfg.samples,
        seed: cfg.seed,
        counts,
        accepted,
    })
}

/// Turns counts into a process map.
///
/// The marginal estimate pools every cell of column `k`:
/// `p̂_k ∝ Σ_j accepted(j,k)`, normalized over `k`. Each basis output is then
/// `p̂_k` times the normalized histogram, so all outputs in column `k` carry
/// the same mass as a [`ProcessMap`] requires.
pub fn reconstruct_theta(empirical: &EmpiricalProcess) -> Result<ProcessMap> {
    let d = empirical.d_s;
    for j in 0..d {
        for k in 0..d {
            if empirical.accepted(j, k) == 0 {
                return Err(Error::ZeroAcceptance { j, k });
            }
        }
    }
    let column_totals: Vec<f64> = (0..d)
        .map(|k| (0..d).map(|j| empirical.accepted(j, k) as f64).sum())
        .collect();
    let grand: f64 = column_totals.iter().sum();
    let marginal = ProbVec::new(column_totals.iter().map(|t| t / grand).collect())?;

    let mut outputs = Vec::with_capacity(d * d);
    for j in 0..d {
        for k in 0..d {
            let cond = empirical
                .conditional_estimate(j, k)
                .expect("acceptance checked");
            outputs.push(cond.into_iter().map(|x| x * marginal[k]).collect());
        }
    }
    ProcessMap::new(outputs, marginal)
}

/// Agreement between sampled histograms and the exact process map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    /// Largest `|Θ̂[E_jk]_i - Θ[E_jk]_i|` over all cells and outputs.
    pub max_abs_error: f64,
    /// Number of `(j, k, output)` entries compared.
    pub entries: usize,
    /// Entries whose normalized frequency is within five binomial standard
    /// deviations of the exact conditional probability.
    pub within_5_sigma: usize,
    pub fraction_within_5_sigma: f64,
}

/// Compares `empirical` against the exact map `exact`.
///
/// For each entry the exact conditional probability `q` has standard error
/// `sqrt(q(1-q)/n)` with `n` the accepted count of the cell. When that error
/// is zero the estimate must match exactly.
pub fn compare_to_exact(empirical: &EmpiricalProcess, exact: &ProcessMap) -> Result<Comparison> {
    let d = empirical.d_s;
    if exact.d_s() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: exact.d_s(),
            context: "exact process map",
        });
    }
    let estimate = reconstruct_theta(empirical)?;
    let mut max_abs_error = 0.0f64;
    let mut within = 0;
    for j in 0..d {
        for k in 0..d {
            for (a, b) in estimate
                .basis_output(j, k)
                .iter()
                .zip(exact.basis_output(j, k))
            {
                max_abs_error = max_abs_error.max((a - b).abs());
            }
            let n = empirical.accepted(j, k) as f64;
            let freq = empirical
                .conditional_estimate(j, k)
                .expect("acceptance checked");
            let cond = exact.normalized_output(j, k);
            for (i, f) in freq.iter().enumerate() {
                let q = cond.as_ref().map_or(0.0, |c| c[i]);
                let sigma = (q * (1.0 - q) / n).sqrt();
                if (f - q).abs() <= 5.0 * sigma || f == &q {
                    within += 1;
                }
            }
        }
    }
    let entries = d * d * d;
    Ok(Comparison {
        max_abs_error,
        entries,
        within_5_sigma: within,
        fraction_within_5_sigma: within as f64 / entries as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::StochMatrix;

    fn diag_half() -> JointDist {
        JointDist::perfectly_correlated(&ProbVec::uniform(2))
    }

    #[test]
    fn run_config_rejects_zero_samples() {
        let err = RunConfig::new(0, 1, 2, 2).unwrap_err();
        assert!(matches!(
            err,
            Error::Config {
                field: "samples",
                ..
            }
        ));
    }

    #[test]
    fn point_mass_always_sampled() {
        let p = JointDist::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let mut rng = SplitMix64::new(3);
        for _ in 0..1000 {
            assert_eq!(sample_joint(&p, &mut rng), (1, 0));
        }
    }

    #[test]
    fn joint_sampling_frequency() {
        let p = diag_half();
        let n = 1_000_000;
        let mut rng = SplitMix64::new(2024);
        let hits = (0..n)
            .filter(|_| sample_joint(&p, &mut rng) == (0, 0))
            .count();
        let freq = hits as f64 / n as f64;
        assert!(
            (freq - 0.5).abs() <= 5.0 * (0.25f64 / n as f64).sqrt(),
            "{freq}"
        );
    }

    #[test]
    fn joint_sampling_is_deterministic() {
        let p = JointDist::from_rows(&[vec![0.1, 0.2], vec![0.3, 0.4]]).unwrap();
        let draw = |seed| {
            let mut rng = SplitMix64::new(seed);
            (0..100)
                .map(|_| sample_joint(&p, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }

    #[test]
    fn basis_run_examples() {
        let p = JointDist::from_rows(&[vec![0.1, 0.2], vec![0.3, 0.4]]).unwrap();
        let mut rng = SplitMix64::new(1);
        let id = JointChannel::identity(2, 2);
        let swap = JointChannel::swap(2);
        for _ in 0..500 {
            if let Some(out) = simulate_basis_run(&id, &p, 1, 0, &mut rng).unwrap() {
                assert_eq!(out, 1);
            }
            // On acceptance the environment equals k, and SWAP outputs it.
            if let Some(out) = simulate_basis_run(&swap, &diag_half(), 0, 1, &mut rng).unwrap() {
                assert_eq!(out, 1);
            }
        }
        assert!(simulate_basis_run(&id, &p, 2, 0, &mut rng).is_err());
    }

    #[test]
    fn acceptance_rate_tracks_marginal() {
        let p = JointDist::from_rows(&[vec![0.1, 0.2], vec![0.3, 0.4]]).unwrap();
        let n = 200_000u64;
        let cfg = RunConfig::new(n, 77, 2, 2).unwrap();
        let emp = estimate_process(&JointChannel::swap(2), &p, &cfg).unwrap();
        let pm = p.marginal_system();
        for j in 0..2 {
            for k in 0..2 {
                let rate = emp.accepted(j, k) as f64 / n as f64;
                let sigma = (pm[k] * (1.0 - pm[k]) / n as f64).sqrt();
                assert!(
                    (rate - pm[k]).abs() <= 5.0 * sigma,
                    "cell ({j},{k}): {rate}"
                );
            }
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut rng = SplitMix64::new(8);
        let inst = crate::random::Instance::random(&mut rng, 3, 2);
        let cfg = RunConfig::new(20_000, 123, 3, 2).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| estimate_process(&inst.gamma, &inst.joint, &cfg).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn exact_counts_reproduce_theta() {
        // With N = 2 and P = diag(1/2, 1/2), exactly one run per cell lands on k.
        let counts = vec![vec![vec![1, 0], vec![0, 1]], vec![vec![1, 0], vec![0, 1]]];
        let emp = EmpiricalProcess::from_counts(2, 0, counts).unwrap();
        let theta = reconstruct_theta(&emp).unwrap();
        let exact = ProcessMap::from_channel(&JointChannel::swap(2), &diag_half()).unwrap();
        assert_eq!(theta, exact);
    }

    #[test]
    fn zero_acceptance_names_the_cell() {
        let p = JointDist::from_rows(&[vec![0.5, 0.5], vec![0.0, 0.0]]).unwrap();
        let cfg = RunConfig::new(1000, 5, 2, 2).unwrap();
        let emp = estimate_process(&JointChannel::swap(2), &p, &cfg).unwrap();
        assert_eq!(
            reconstruct_theta(&emp),
            Err(Error::ZeroAcceptance { j: 0, k: 1 })
        );
    }

    #[test]
    fn swap_reconstruction_predicts_outputs() {
        let cfg = RunConfig::new(1_000_000, 31, 2, 2).unwrap();
        let emp = estimate_process(&JointChannel::swap(2), &diag_half(), &cfg).unwrap();
        let theta = reconstruct_theta(&emp).unwrap();
        let mut rng = SplitMix64::new(4);
        for _ in 0..20 {
            let xi = crate::random::stochastic_matrix(&mut rng, 2, 2);
            let q = theta.apply(&xi).unwrap();
            assert!(q.l1_distance(&ProbVec::uniform(2)) <= 0.01);
        }
        let id = StochMatrix::identity(2);
        assert!(theta.apply(&id).is_ok());
    }

    #[test]
    fn json_and_csv() {
        let cfg = RunConfig::new(100, 1, 2, 2).unwrap();
        let emp = estimate_process(&JointChannel::swap(2), &diag_half(), &cfg).unwrap();
        let text = serde_json::to_string(&emp).unwrap();
        for key in ["counts", "accepted", "samples", "seed"] {
            assert!(text.contains(key));
        }
        assert_eq!(
            serde_json::from_str::<EmpiricalProcess>(&text).unwrap(),
            emp
        );

        let mut buf = Vec::new();
        emp.write_csv(&mut buf).unwrap();
        let csv = String::from_utf8(buf).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("j,k,output,count,accepted,samples"));
        assert_eq!(lines.count(), 8);
    }
}
