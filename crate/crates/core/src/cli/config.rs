use std::fmt;
use std::str::FromStr;

use serde_json::{Map, Value};

use super::{Args, CliError};
use crate::prob::Units;
use crate::random::Instance;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Demo,
    Check,
    SecondLaw,
    Tomography,
    RandomInstance,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Demo => "demo",
            Self::Check => "check",
            Self::SecondLaw => "secondlaw",
            Self::Tomography => "tomography",
            Self::RandomInstance => "random-instance",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "demo" => Ok(Self::Demo),
            "check" => Ok(Self::Check),
            "secondlaw" => Ok(Self::SecondLaw),
            "tomography" => Ok(Self::Tomography),
            "random-instance" => Ok(Self::RandomInstance),
            other => Err(CliError::config(
                "mode",
                format!("unknown mode {other:?}; expected demo, check, secondlaw, tomography or random-instance"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(CliError::config(
                "output",
                format!("unknown format {other:?}; expected json or csv"),
            )),
        }
    }
}

/// A validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// `(d_S, d_E)`, both at least 2.
    pub dims: (usize, usize),
    pub seed: u64,
    pub trials: u64,
    pub samples: u64,
    pub tolerance: f64,
    pub units: Units,
    pub output: OutputFormat,
    pub instance: Option<Instance>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Demo,
            dims: (2, 2),
            seed: 0,
            trials: 100,
            samples: 100_000,
            tolerance: 1e-9,
            units: Units::Nats,
            output: OutputFormat::Json,
            instance: None,
        }
    }
}

/// Settings gathered from one source before merging.
#[derive(Debug, Default)]
struct Partial {
    mode: Option<Mode>,
    dim_system: Option<usize>,
    dim_env: Option<usize>,
    seed: Option<u64>,
    trials: Option<u64>,
    samples: Option<u64>,
    tolerance: Option<f64>,
    units: Option<Units>,
    output: Option<OutputFormat>,
    instance: Option<Instance>,
}

fn count(field: &str, value: i64, min: i64) -> Result<u64, CliError> {
    if value < min {
        return Err(CliError::config(
            field,
            format!("must be at least {min}, got {value}"),
        ));
    }
    Ok(value as u64)
}

fn dim(field: &str, value: i64) -> Result<usize, CliError> {
    count(field, value, 2).map(|v| v as usize)
}

fn tolerance(value: f64) -> Result<f64, CliError> {
    if !(value.is_finite() && value > 0.0) {
        return Err(CliError::config(
            "tolerance",
            format!("must be positive and finite, got {value}"),
        ));
    }
    Ok(value)
}

fn units(s: &str) -> Result<Units, CliError> {
    s.parse()
        .map_err(|_| CliError::config("units", format!("expected nats or bits, got {s:?}")))
}

fn json_int(field: &str, v: &Value) -> Result<i64, CliError> {
    v.as_i64()
        .ok_or_else(|| CliError::config(field, format!("expected an integer, got {v}")))
}

fn json_str<'a>(field: &str, v: &'a Value) -> Result<&'a str, CliError> {
    v.as_str()
        .ok_or_else(|| CliError::config(field, format!("expected a string, got {v}")))
}

impl Partial {
    fn from_args(args: &Args) -> Result<Self, CliError> {
        Ok(Self {
            mode: args.mode.as_deref().map(str::parse).transpose()?,
            dim_system: args.dim_system.map(|v| dim("dim-system", v)).transpose()?,
            dim_env: args.dim_env.map(|v| dim("dim-env", v)).transpose()?,
            seed: args.seed,
            trials: args.trials.map(|v| count("trials", v, 1)).transpose()?,
            samples: args.samples.map(|v| count("samples", v, 1)).transpose()?,
            tolerance: args.tolerance.map(tolerance).transpose()?,
            units: args.units.as_deref().map(units).transpose()?,
            output: args.output.as_deref().map(str::parse).transpose()?,
            instance: None,
        })
    }

    fn from_json(text: &str) -> Result<Self, CliError> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| CliError::config("config", format!("not valid JSON: {e}")))?;
        let Value::Object(map) = value else {
            return Err(CliError::config("config", "top level must be an object"));
        };
        Self::from_map(&map)
    }

    fn from_map(map: &Map<String, Value>) -> Result<Self, CliError> {
        let mut p = Self::default();
        for (key, v) in map {
            match key.as_str() {
                "mode" => p.mode = Some(json_str("mode", v)?.parse()?),
                "dims" => {
                    let arr = v.as_array().filter(|a| a.len() == 2).ok_or_else(|| {
                        CliError::config("dims", format!("expected [d_S, d_E], got {v}"))
                    })?;
                    p.dim_system = Some(dim("dims", json_int("dims", &arr[0])?)?);
                    p.dim_env = Some(dim("dims", json_int("dims", &arr[1])?)?);
                }
                "seed" => {
                    p.seed = Some(v.as_u64().ok_or_else(|| {
                        CliError::config(
                            "seed",
                            format!("expected a non-negative integer, got {v}"),
                        )
                    })?)
                }
                "trials" => p.trials = Some(count("trials", json_int("trials", v)?, 1)?),
                "samples" => p.samples = Some(count("samples", json_int("samples", v)?, 1)?),
                "tolerance" => {
                    let t = v.as_f64().ok_or_else(|| {
                        CliError::config("tolerance", format!("expected a number, got {v}"))
                    })?;
                    p.tolerance = Some(tolerance(t)?);
                }
                "units" => p.units = Some(units(json_str("units", v)?)?),
                "output" => p.output = Some(json_str("output", v)?.parse()?),
                "instance" => {
                    p.instance = Some(
                        serde_json::from_value(v.clone())
                            .map_err(|e| CliError::config("instance", e.to_string()))?,
                    )
                }
                other => return Err(CliError::config(other, "unknown field")),
            }
        }
        Ok(p)
    }

    /// Fills unset values from `base`.
    fn or(self, base: Self) -> Self {
        Self {
            mode: self.mode.or(base.mode),
            dim_system: self.dim_system.or(base.dim_system),
            dim_env: self.dim_env.or(base.dim_env),
            seed: self.seed.or(base.seed),
            trials: self.trials.or(base.trials),
            samples: self.samples.or(base.samples),
            tolerance: self.tolerance.or(base.tolerance),
            units: self.units.or(base.units),
            output: self.output.or(base.output),
            instance: self.instance.or(base.instance),
        }
    }
}

impl ExperimentConfig {
    /// Reads `--config` if given, then applies flag overrides.
    pub fn from_args(args: &Args) -> Result<Self, CliError> {
        let flags = Partial::from_args(args)?;
        let file = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::config("config", format!("cannot read {}: {e}", path.display()))
                })?;
                Partial::from_json(&text)?
            }
            None => Partial::default(),
        };
        Self::finish(flags.or(file))
    }

    /// Parses a JSON configuration document with no flag overrides.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        Self::finish(Partial::from_json(text)?)
    }

    fn finish(p: Partial) -> Result<Self, CliError> {
        let d = Self::default();
        let mode = p
            .mode
            .ok_or_else(|| CliError::config("mode", "no mode given"))?;
        let inferred = p.instance.as_ref().map(|i| (i.joint.d_s(), i.joint.d_e()));
        let dims = (
            p.dim_system.or(inferred.map(|x| x.0)).unwrap_or(d.dims.0),
            p.dim_env.or(inferred.map(|x| x.1)).unwrap_or(d.dims.1),
        );
        if let Some(inst_dims) = inferred {
            if !matches!(mode, Mode::SecondLaw | Mode::Tomography) {
                return Err(CliError::config(
                    "instance",
                    format!("not used by mode {mode}"),
                ));
            }
            if inst_dims != dims {
                return Err(CliError::config(
                    "dims",
                    format!("{dims:?} disagrees with the instance dimensions {inst_dims:?}"),
                ));
            }
        }
        let output = p.output.unwrap_or_default();
        if output == OutputFormat::Csv && matches!(mode, Mode::Demo | Mode::RandomInstance) {
            return Err(CliError::config(
                "output",
                format!("mode {mode} only writes json"),
            ));
        }
        Ok(Self {
            mode,
            dims,
            seed: p.seed.unwrap_or(d.seed),
            trials: p.trials.unwrap_or(d.trials),
            samples: p.samples.unwrap_or(d.samples),
            tolerance: p.tolerance.unwrap_or(d.tolerance),
            units: p.units.unwrap_or(d.units),
            output,
            instance: p.instance,
        })
    }
}
