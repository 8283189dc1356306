use serde::Serialize;

use super::{CliError, ExperimentConfig, Mode, Outcome, OutputFormat, SCHEMA_VERSION};
use crate::dynamics::{JointChannel, ProcessMap};
use crate::json::{self, extended_f64};
use crate::prob::{JointDist, ProbVec, StochMatrix, Units};
use crate::random::Instance;
use crate::rng::SplitMix64;
use crate::sampler::{compare_to_exact, estimate_process, Comparison, EmpiricalProcess, RunConfig};
use crate::second_law::{lift_theta, second_law_check, spohn_check, SecondLawReport};
use crate::suites::{self, SuiteConfig, SuiteOutcome};

/// Fraction of tomography entries that must fall within five standard errors.
pub const TOMOGRAPHY_PASS_FRACTION: f64 = 0.99;

#[derive(Serialize)]
struct Envelope<'a, T> {
    schema_version: u32,
    mode: &'a str,
    #[serde(flatten)]
    body: T,
}

fn envelope<T: Serialize>(mode: Mode, body: T) -> Result<String, CliError> {
    let mut text = json::to_string_pretty(&Envelope {
        schema_version: SCHEMA_VERSION,
        mode: mode.as_str(),
        body,
    })
    .map_err(|e| CliError::config("output", e.to_string()))?;
    text.push('\n');
    Ok(text)
}

fn outcome(stdout: String, ok: bool, diagnostics: Vec<String>) -> Outcome {
    Outcome {
        stdout,
        diagnostics,
        exit_code: if ok { 0 } else { 1 },
    }
}

fn csv_text<F>(write: F) -> Result<String, CliError>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> Result<(), csv::Error>,
{
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        write(&mut w).map_err(|e| CliError::config("output", e.to_string()))?;
        w.flush()
            .map_err(|e| CliError::config("output", e.to_string()))?;
    }
    Ok(String::from_utf8(buf).expect("csv writes UTF-8"))
}

/// Runs the configured mode.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    match cfg.mode {
        Mode::Demo => demo(cfg),
        Mode::Check => check(cfg),
        Mode::SecondLaw => second_law(cfg),
        Mode::Tomography => tomography(cfg),
        Mode::RandomInstance => random_instance(cfg),
    }
}

fn instance_for(cfg: &ExperimentConfig) -> Instance {
    cfg.instance.clone().unwrap_or_else(|| {
        let mut rng = SplitMix64::new(cfg.seed);
        Instance::random(&mut rng, cfg.dims.0, cfg.dims.1)
    })
}

#[derive(Serialize)]
struct SwapDemo {
    joint: JointDist,
    naive_map: StochMatrix,
    conditional_map_discrepancy: f64,
    output_for_identity: ProbVec,
    second_law: SecondLawReport,
}

#[derive(Serialize)]
struct Preparation {
    xi: StochMatrix,
    /// `ξp`, identical for both preparations.
    p_prime: ProbVec,
    /// `Θ[ξ]`.
    q: ProbVec,
    second_law: SecondLawReport,
}

#[derive(Serialize)]
struct CnotDemo {
    joint: JointDist,
    naive_map: StochMatrix,
    naive_prediction: ProbVec,
    a: Preparation,
    b: Preparation,
}

#[derive(Serialize)]
struct SpohnDemo {
    lambda: StochMatrix,
    p: ProbVec,
    report: SecondLawReport,
}

#[derive(Serialize)]
struct DemoBody {
    units: Units,
    swap: SwapDemo,
    cnot: CnotDemo,
    spohn: SpohnDemo,
    all_satisfied: bool,
}

fn demo(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let units = cfg.units;
    let joint = JointDist::perfectly_correlated(&ProbVec::uniform(2));
    let identity = StochMatrix::identity(2);

    let swap = JointChannel::swap(2);
    let swap_theta = ProcessMap::from_channel(&swap, &joint)?;
    let swap_demo = SwapDemo {
        joint: joint.clone(),
        naive_map: swap.naive_map(&joint)?,
        conditional_map_discrepancy: swap.conditional_map_discrepancy(&joint)?,
        output_for_identity: swap_theta.apply(&identity)?,
        second_law: second_law_check(&swap_theta, &identity)?.in_units(units),
    };

    let cnot = JointChannel::controlled_shift(2);
    let cnot_theta = ProcessMap::from_channel(&cnot, &joint)?;
    let naive = cnot.naive_map(&joint)?;
    let p = joint.marginal_system();
    let prepare = |xi: StochMatrix| -> Result<Preparation, CliError> {
        Ok(Preparation {
            p_prime: xi.apply(&p)?,
            q: cnot_theta.apply(&xi)?,
            second_law: second_law_check(&cnot_theta, &xi)?.in_units(units),
            xi,
        })
    };
    let a = prepare(identity.clone())?;
    let b = prepare(StochMatrix::deterministic(2, &[1, 0])?)?;
    let cnot_demo = CnotDemo {
        joint: joint.clone(),
        naive_prediction: naive.apply(&a.p_prime)?,
        naive_map: naive,
        a,
        b,
    };

    let lambda = StochMatrix::from_rows(&[vec![0.9, 0.5], vec![0.1, 0.5]])?;
    let p0 = ProbVec::basis(2, 0);
    let spohn = SpohnDemo {
        report: spohn_check(&lambda, &p0)?.in_units(units),
        lambda,
        p: p0,
    };

    let all_satisfied = swap_demo.second_law.satisfied
        && cnot_demo.a.second_law.satisfied
        && cnot_demo.b.second_law.satisfied
        && spohn.report.satisfied;
    let body = DemoBody {
        units,
        swap: swap_demo,
        cnot: cnot_demo,
        spohn,
        all_satisfied,
    };
    Ok(outcome(envelope(Mode::Demo, body)?, all_satisfied, vec![]))
}

#[derive(Serialize)]
struct CheckBody<'a> {
    seed: u64,
    trials: u64,
    tolerance: f64,
    all_passed: bool,
    suites: &'a [SuiteOutcome],
}

fn check(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let results = suites::run_all(&SuiteConfig {
        trials: cfg.trials,
        seed: cfg.seed,
        tolerance: cfg.tolerance,
    });
    let all_passed = results.iter().all(SuiteOutcome::all_passed);
    let diagnostics = results
        .iter()
        .filter(|s| !s.all_passed())
        .map(|s| {
            format!(
                "suite {} failed {} of {} trials (worst {} = {}, first failures {:?})",
                s.name,
                s.trials - s.passed,
                s.trials,
                s.measure,
                s.worst,
                s.failures
            )
        })
        .collect();
    let stdout = match cfg.output {
        OutputFormat::Json => envelope(
            Mode::Check,
            CheckBody {
                seed: cfg.seed,
                trials: cfg.trials,
                tolerance: cfg.tolerance,
                all_passed,
                suites: &results,
            },
        )?,
        OutputFormat::Csv => csv_text(|w| {
            w.write_record(["suite", "trials", "passed", "worst", "threshold"])?;
            for s in &results {
                w.write_record([
                    s.name.to_owned(),
                    s.trials.to_string(),
                    s.passed.to_string(),
                    ext_cell(s.worst),
                    ext_cell(s.threshold),
                ])?;
            }
            Ok(())
        })?,
    };
    Ok(outcome(stdout, all_passed, diagnostics))
}

/// A bare extended double, for CSV cells.
#[derive(Serialize)]
#[serde(transparent)]
struct Ext(#[serde(with = "extended_f64")] f64);

fn ext_cell(x: f64) -> String {
    json::to_string(&Ext(x))
        .expect("number")
        .trim_matches('"')
        .to_owned()
}

#[derive(Serialize)]
struct SecondLawBody {
    units: Units,
    seed: Option<u64>,
    instance: Instance,
    theta: ProcessMap,
    /// Columns of the lift filled in because `p_k = 0`.
    lift_flags: Vec<(usize, usize)>,
    report: SecondLawReport,
}

fn second_law(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let instance = instance_for(cfg);
    let theta = ProcessMap::from_channel(&instance.gamma, &instance.joint)?;
    let lift_flags = lift_theta(&theta).flags().to_vec();
    let report = second_law_check(&theta, &instance.xi)?.in_units(cfg.units);
    let mut diagnostics = vec![];
    if !report.unique {
        diagnostics
            .push("fixed point of the lifted map is not unique; using the canonical one".into());
    }
    if report.degenerate {
        diagnostics.push("fixed point has zero entries where the states differ".into());
    }
    if !report.satisfied {
        diagnostics.push(format!("bound violated: slack {}", report.slack));
    }
    let ok = report.satisfied;
    let stdout = match cfg.output {
        OutputFormat::Json => envelope(
            Mode::SecondLaw,
            SecondLawBody {
                units: cfg.units,
                seed: cfg.instance.is_none().then_some(cfg.seed),
                instance,
                theta,
                lift_flags,
                report,
            },
        )?,
        OutputFormat::Csv => csv_text(|w| {
            w.write_record([
                "lhs",
                "rhs",
                "slack",
                "satisfied",
                "degenerate",
                "residual",
                "unique",
            ])?;
            w.write_record([
                ext_cell(report.lhs),
                ext_cell(report.rhs),
                ext_cell(report.slack),
                report.satisfied.to_string(),
                report.degenerate.to_string(),
                ext_cell(report.residual),
                report.unique.to_string(),
            ])
        })?,
    };
    Ok(outcome(stdout, ok, diagnostics))
}

#[derive(Serialize)]
struct TomographyBody {
    seed: u64,
    samples: u64,
    instance: Instance,
    exact: ProcessMap,
    reconstructed: ProcessMap,
    comparison: Comparison,
    /// `|Θ̂[ξ] - Θ[ξ]|₁` for the instance preparation.
    prediction_l1_error: f64,
    passed: bool,
    empirical: EmpiricalProcess,
}

fn tomography(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let instance = instance_for(cfg);
    let run_cfg =
        RunConfig::new(cfg.samples, cfg.seed, cfg.dims.0, cfg.dims.1).map_err(|e| match e {
            crate::Error::Config { field, reason } => CliError::config(field, reason),
            other => other.into(),
        })?;
    let exact = ProcessMap::from_channel(&instance.gamma, &instance.joint)?;
    let empirical = estimate_process(&instance.gamma, &instance.joint, &run_cfg)?;
    if cfg.output == OutputFormat::Csv {
        let mut buf = Vec::new();
        empirical
            .write_csv(&mut buf)
            .map_err(|e| CliError::config("output", e.to_string()))?;
        let comparison = compare_to_exact(&empirical, &exact)?;
        let ok = comparison.fraction_within_5_sigma >= TOMOGRAPHY_PASS_FRACTION;
        return Ok(outcome(
            String::from_utf8(buf).expect("csv writes UTF-8"),
            ok,
            vec![format!(
                "{} of {} entries within 5 sigma; max abs error {}",
                comparison.within_5_sigma, comparison.entries, comparison.max_abs_error
            )],
        ));
    }
    let comparison = compare_to_exact(&empirical, &exact)?;
    let reconstructed = crate::sampler::reconstruct_theta(&empirical)?;
    let prediction_l1_error = reconstructed
        .apply(&instance.xi)?
        .l1_distance(&exact.apply(&instance.xi)?);
    let passed = comparison.fraction_within_5_sigma >= TOMOGRAPHY_PASS_FRACTION;
    let diagnostics = if passed {
        vec![]
    } else {
        vec![format!(
            "only {} of {} entries within 5 sigma",
            comparison.within_5_sigma, comparison.entries
        )]
    };
    let body = TomographyBody {
        seed: cfg.seed,
        samples: cfg.samples,
        instance,
        exact,
        reconstructed,
        comparison,
        prediction_l1_error,
        passed,
        empirical,
    };
    Ok(outcome(
        envelope(Mode::Tomography, body)?,
        passed,
        diagnostics,
    ))
}

#[derive(Serialize)]
struct RandomInstanceBody {
    seed: u64,
    dims: (usize, usize),
    instance: Instance,
}

fn random_instance(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let body = RandomInstanceBody {
        seed: cfg.seed,
        dims: cfg.dims,
        instance: instance_for(cfg),
    };
    Ok(outcome(envelope(Mode::RandomInstance, body)?, true, vec![]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn run_json(text: &str) -> (Value, u8) {
        let cfg = ExperimentConfig::from_json(text).unwrap();
        let out = run(&cfg).unwrap();
        (serde_json::from_str(&out.stdout).unwrap(), out.exit_code)
    }

    #[test]
    fn demo_reports_the_worked_examples() {
        let (v, code) = run_json(r#"{"mode":"demo"}"#);
        assert_eq!(code, 0);
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["cnot"]["a"]["q"], serde_json::json!([1.0, 0.0]));
        assert_eq!(v["cnot"]["b"]["q"], serde_json::json!([0.0, 1.0]));
        assert_eq!(v["cnot"]["a"]["p_prime"], v["cnot"]["b"]["p_prime"]);
        assert_eq!(v["swap"]["conditional_map_discrepancy"], 2.0);
        let lhs = v["spohn"]["report"]["lhs"].as_f64().unwrap();
        assert!((lhs - 0.3251).abs() < 1e-3);
    }

    #[test]
    fn random_instance_round_trips() {
        let (v, _) = run_json(r#"{"mode":"random-instance","seed":3,"dims":[3,2]}"#);
        let inst: Instance = serde_json::from_value(v["instance"].clone()).unwrap();
        let mut rng = SplitMix64::new(3);
        assert_eq!(inst, Instance::random(&mut rng, 3, 2));
    }

    #[test]
    fn secondlaw_csv_has_one_row() {
        let cfg =
            ExperimentConfig::from_json(r#"{"mode":"secondlaw","output":"csv","seed":9}"#).unwrap();
        let out = run(&cfg).unwrap();
        assert_eq!(out.exit_code, 0);
        assert_eq!(out.stdout.lines().count(), 2);
        assert!(out.stdout.starts_with("lhs,rhs,slack"));
    }

    #[test]
    fn tomography_passes_and_is_deterministic() {
        let text = r#"{"mode":"tomography","seed":4,"samples":20000}"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.exit_code, 0, "{:?}", a.diagnostics);
    }

    #[test]
    fn bits_scale_the_report() {
        let (nats, _) = run_json(r#"{"mode":"demo"}"#);
        let (bits, _) = run_json(r#"{"mode":"demo","units":"bits"}"#);
        let n = nats["spohn"]["report"]["lhs"].as_f64().unwrap();
        let b = bits["spohn"]["report"]["lhs"].as_f64().unwrap();
        assert!((b - n / std::f64::consts::LN_2).abs() < 1e-15);
    }
}
