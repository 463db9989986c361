use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::rows::{from_rows, SplitDoc};
use crate::model::{validate, MatchingModel, SurplusSplit};
use crate::policy::NumericPolicy;
use crate::simulate::{Calibration, EnergyStatistic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    Identify,
    Estimate,
    Statics,
    Simulate,
    OracleCheck,
    Overid,
    Payoffs,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Identify => "identify",
            Command::Estimate => "estimate",
            Command::Statics => "statics",
            Command::Simulate => "simulate",
            Command::OracleCheck => "oracle-check",
            Command::Overid => "overid",
            Command::Payoffs => "payoffs",
        }
    }
}

/// Model section as written in a config file; every field optional so that
/// missing ones can be reported together.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawModel {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Sigma_X", default, skip_serializing_if = "Option::is_none")]
    pub sigma_x: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Sigma_Y", default, skip_serializing_if = "Option::is_none")]
    pub sigma_y: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitDoc>,
}

/// One `(x, y)` evaluation point for `payoffs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// A config file before validation.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub model: Option<RawModel>,
    /// Scale used by `identify`, `estimate` and `overid` (default 1).
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub moments: Option<PathBuf>,
    #[serde(default)]
    pub sample: Option<PathBuf>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub n_draws: Option<usize>,
    #[serde(default)]
    pub policy: Option<NumericPolicy>,
    #[serde(default)]
    pub points: Option<usize>,
    #[serde(default)]
    pub trunc: Option<f64>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub n_sim: Option<usize>,
    #[serde(default, alias = "n_permutations")]
    pub replications: Option<usize>,
    #[serde(default)]
    pub statistic: Option<EnergyStatistic>,
    #[serde(default)]
    pub calibration: Option<Calibration>,
    #[serde(default)]
    pub pairs: Option<Vec<PairPoint>>,
}

/// Settings of the discretized oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleSettings {
    pub points: usize,
    pub trunc: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Largest accepted elementwise gap between oracle and closed form.
    pub agreement: f64,
}

/// A validated run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<MatchingModel>,
    pub sigma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moments: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample: Option<PathBuf>,
    #[serde(skip)]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_draws: Option<usize>,
    pub policy: NumericPolicy,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSettings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_sim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replications: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub statistic: Option<EnergyStatistic>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<Calibration>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<PairPoint>,
}

/// Read a config file. Syntax, type and unknown-key problems are `Parse` errors.
pub fn read_raw(path: &Path) -> Result<RawConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
        location: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_raw(&text, &path.display().to_string())
}

pub fn parse_raw(text: &str, origin: &str) -> Result<RawConfig> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        location: format!("{origin}:{}:{}", e.line(), e.column()),
        message: e.to_string(),
    })
}

/// Parse and validate a config document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    validate_config(parse_raw(text, "<config>")?)
}

fn build_model(raw: &RawModel, problems: &mut Vec<String>) -> Option<MatchingModel> {
    let sigma = raw.sigma.unwrap_or(1.0);
    if !(sigma.is_finite() && sigma > 0.0) {
        problems.push(format!("model.sigma must be positive, got {sigma}"));
    }
    let mut take = |field: &str, v: &Option<Vec<Vec<f64>>>| match v {
        None => {
            problems.push(format!("model.{field} is required"));
            None
        }
        Some(rows) => from_rows(rows, &format!("model.{field}"))
            .map_err(|e| problems.push(e))
            .ok(),
    };
    let a = take("A", &raw.a);
    let sx = take("Sigma_X", &raw.sigma_x);
    let sy = take("Sigma_Y", &raw.sigma_y);
    let split = match &raw.split {
        None => None,
        Some(s) => {
            let b = from_rows(&s.b, "model.split.B").map_err(|e| problems.push(e)).ok();
            let g = from_rows(&s.gamma, "model.split.Gamma").map_err(|e| problems.push(e)).ok();
            match (b, g) {
                (Some(b), Some(g)) => Some(SurplusSplit {
                    worker_amenity: b,
                    firm_productivity: g,
                    sigma1: s.sigma1,
                    sigma2: s.sigma2,
                }),
                _ => return None,
            }
        }
    };
    let (a, sx, sy) = (a?, sx?, sy?);
    let mut square = |m: crate::matcalc::Matrix, field: &str| {
        if m.is_square() {
            Some(crate::matcalc::SymmetricMatrix::symmetrize(m))
        } else {
            problems.push(format!("model.{field} must be square, got {}x{}", m.nrows(), m.ncols()));
            None
        }
    };
    let (sx, sy) = (square(sx, "Sigma_X"), square(sy, "Sigma_Y"));
    let model = MatchingModel {
        affinity: a,
        sigma,
        sigma_x: sx?,
        sigma_y: sy?,
        split,
    };
    if sigma.is_finite() && sigma > 0.0 {
        let violations = validate(&model, &NumericPolicy::default());
        if !violations.is_empty() {
            problems.extend(violations.iter().map(|v| format!("model: {v}")));
            return None;
        }
    } else {
        return None;
    }
    Some(model)
}

/// Check command-specific requirements, apply defaults, and list every problem found.
pub fn validate_config(raw: RawConfig) -> Result<RunConfig> {
    let mut problems = Vec::new();
    let command = raw.command;
    if command.is_none() {
        problems.push("command is required".to_string());
    }
    let sigma = raw.sigma.unwrap_or(1.0);
    if !(sigma.is_finite() && sigma > 0.0) {
        problems.push(format!("sigma must be positive, got {sigma}"));
    }
    let model = raw.model.as_ref().and_then(|m| build_model(m, &mut problems));
    let model_given = raw.model.is_some();

    let positive = |v: Option<f64>, what: &str, problems: &mut Vec<String>| {
        if let Some(x) = v {
            if !(x.is_finite() && x > 0.0) {
                problems.push(format!("{what} must be positive, got {x}"));
            }
        }
    };
    positive(raw.trunc, "trunc", &mut problems);
    positive(raw.tol, "tol", &mut problems);
    if raw.n_draws == Some(0) {
        problems.push("n_draws must be positive".into());
    }
    if raw.replications == Some(0) {
        problems.push("replications must be positive".into());
    }
    if let Some(EnergyStatistic::Projected { directions: 0 }) = raw.statistic {
        problems.push("statistic.projected.directions must be positive".into());
    }
    if let Some(p) = raw.points {
        if p < 21 {
            problems.push(format!("points must be at least 21, got {p}"));
        }
    }

    let needs_model = |problems: &mut Vec<String>| {
        if !model_given {
            problems.push("model is required".to_string());
        }
    };
    // commands that can use either observed data or draws from the model
    let needs_data = |problems: &mut Vec<String>| {
        if raw.sample.is_none() && (!model_given || raw.seed.is_none() || raw.n_draws.is_none()) {
            problems.push("sample is required (or model, seed and n_draws to simulate one)".to_string());
        }
    };
    match command {
        Some(Command::Solve | Command::Statics | Command::OracleCheck) => needs_model(&mut problems),
        Some(Command::Identify) => {
            if raw.moments.is_none() {
                problems.push("moments is required".to_string());
            }
        }
        Some(Command::Estimate) => needs_data(&mut problems),
        Some(Command::Overid) => {
            needs_data(&mut problems);
            if raw.seed.is_none() {
                problems.push("seed is required for overid".to_string());
            }
        }
        Some(Command::Simulate) => {
            needs_model(&mut problems);
            if raw.seed.is_none() {
                problems.push("seed is required for simulate".to_string());
            }
            if raw.n_draws.is_none() {
                problems.push("n_draws is required for simulate".to_string());
            }
        }
        Some(Command::Payoffs) => {
            needs_model(&mut problems);
            if let Some(m) = &raw.model {
                if m.split.is_none() {
                    problems.push("model.split is required for payoffs".to_string());
                }
            }
            if raw.pairs.is_none() && (raw.seed.is_none() || raw.n_draws.is_none()) {
                problems.push("pairs is required (or seed and n_draws to sample them)".to_string());
            }
            if let (Some(pairs), Some(m)) = (&raw.pairs, &model) {
                for (k, p) in pairs.iter().enumerate() {
                    if p.x.len() != m.m() || p.y.len() != m.n() {
                        problems.push(format!(
                            "pairs[{k}] has dimensions ({}, {}), model has ({}, {})",
                            p.x.len(),
                            p.y.len(),
                            m.m(),
                            m.n()
                        ));
                    }
                }
            }
        }
        None => {}
    }

    let oracle = (command == Some(Command::OracleCheck)).then(|| {
        let dim = model.as_ref().map(|m| m.m().max(m.n())).unwrap_or(1);
        OracleSettings {
            points: raw.points.unwrap_or(if dim == 1 { 201 } else { 41 }),
            trunc: raw.trunc.unwrap_or(5.0),
            tol: raw.tol.unwrap_or(1e-12),
            max_iter: raw.max_iter.unwrap_or(100_000),
            agreement: 1e-2,
        }
    });
    if let (Some(Command::OracleCheck), Some(m)) = (command, &model) {
        if m.m() > 2 || m.n() > 2 {
            problems.push(format!("oracle-check supports dimensions up to 2, model is {}x{}", m.m(), m.n()));
        }
    }

    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    let command = command.expect("checked above");
    let overid = command == Command::Overid;
    Ok(RunConfig {
        command,
        model,
        sigma,
        moments: raw.moments,
        sample: raw.sample,
        output: raw.output,
        csv: raw.csv,
        seed: raw.seed,
        n_draws: raw.n_draws,
        policy: raw.policy.unwrap_or_default(),
        oracle,
        n_sim: overid.then(|| raw.n_sim.unwrap_or(0)),
        replications: overid.then(|| raw.replications.unwrap_or(199)),
        statistic: overid.then(|| raw.statistic.unwrap_or_default()),
        calibration: overid.then(|| raw.calibration.unwrap_or_default()),
        pairs: raw.pairs.unwrap_or_default(),
    })
}
