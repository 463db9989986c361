use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::config::{read_raw, validate_config, Command, RawConfig, RunConfig};
use super::io::{read_moments, read_sample, write_sample};
use crate::equilibrium::{payoffs, solve_with, verify_foc};
use crate::error::{Error, Result};
use crate::identification::{
    decompose_transfers, delta_method, empirical_moments, estimate_from_moments, fitted_model, identify_with,
};
use crate::matcalc::{Matrix, Vector};
use crate::model::rows::{to_rows, MomentDoc};
use crate::model::{Equilibrium, MatchedSample, MatchingModel};
use crate::simulate::{
    coupling_cross_cov, discretize, ipfp_solve, overid_test, replication_rng, sample_joint_with, OverIdConfig,
};
use crate::statics::{fd_equilibrium_jacobians, identification_jacobians, jacobian_set};

pub const SCHEMA: &str = "gauss-match/1";

/// Command-line arguments of the `gauss-match` binary.
#[derive(Debug, Clone, clap::Parser)]
#[command(name = "gauss-match", version, about = "Gaussian matching markets: equilibrium, identification, comparative statics")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON config file.
    #[arg(short = 'c', long = "config")]
    pub config: Option<PathBuf>,
    /// Write the result document here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Grid points per dimension for oracle-check.
    #[arg(long)]
    pub points: Option<usize>,
    /// Grid truncation in marginal standard deviations.
    #[arg(long)]
    pub trunc: Option<f64>,
    /// IPFP marginal tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Only log errors.
    #[arg(long)]
    pub quiet: bool,
    /// Moments JSON for identify.
    #[arg(long)]
    pub moments: Option<PathBuf>,
    /// Matched-pair CSV for estimate and overid.
    #[arg(long)]
    pub sample: Option<PathBuf>,
    /// CSV destination for simulate.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Number of simulated pairs.
    #[arg(long)]
    pub n_draws: Option<usize>,
    /// Heterogeneity scale used by identify, estimate and overid.
    #[arg(long)]
    pub sigma: Option<f64>,
}

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub document: Value,
    /// `false` when the command completed but its check failed (oracle disagreement).
    pub passed: bool,
}

/// Entry point used by the binary; returns the process exit code.
pub fn main() -> i32 {
    main_from(std::env::args_os())
}

pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = if cli.quiet { log::LevelFilter::Error } else { log::LevelFilter::Info };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_env("GAUSS_MATCH_LOG")
        .format_timestamp(None)
        .try_init();

    let outcome = load(&cli).and_then(|(cfg, base)| {
        let out = cfg.output.clone().map(|p| resolve(&base, &p));
        let report = run_in(&cfg, &base)?;
        Ok((report, out))
    });
    match outcome {
        Ok((report, out)) => {
            let mut text = serde_json::to_string_pretty(&report.document).expect("result documents serialize");
            text.push('\n');
            let written = match out {
                Some(p) => std::fs::write(&p, text).map_err(Error::from),
                None => std::io::stdout().write_all(text.as_bytes()).map_err(Error::from),
            };
            if let Err(e) = written {
                return fail(cli.command, &e);
            }
            if report.passed {
                0
            } else {
                1
            }
        }
        Err(e) => fail(cli.command, &e),
    }
}

fn fail(command: Command, e: &Error) -> i32 {
    log::error!("{e}");
    let doc = json!({
        "schema": SCHEMA,
        "command": command.name(),
        "error": { "code": e.code(), "message": e.to_string() },
    });
    eprintln!("{doc}");
    if e.is_usage() {
        2
    } else {
        1
    }
}

/// Merge the config file (if any) with command-line flags and validate.
/// Returns the config and the directory relative paths in the file resolve against.
pub fn load(cli: &Cli) -> Result<(RunConfig, PathBuf)> {
    let (mut raw, base) = match &cli.config {
        Some(p) => (read_raw(p)?, p.parent().map(Path::to_path_buf).unwrap_or_default()),
        None => (RawConfig::default(), PathBuf::new()),
    };
    if let Some(c) = raw.command {
        if c != cli.command {
            return Err(Error::Validation(vec![format!(
                "config command {:?} does not match command line {:?}",
                c.name(),
                cli.command.name()
            )]));
        }
    }
    raw.command = Some(cli.command);
    // flags name paths relative to the working directory
    let cwd_rel = |p: &PathBuf| std::env::current_dir().map(|d| d.join(p)).unwrap_or_else(|_| p.clone());
    if let Some(p) = &cli.moments {
        raw.moments = Some(cwd_rel(p));
    }
    if let Some(p) = &cli.sample {
        raw.sample = Some(cwd_rel(p));
    }
    if let Some(p) = &cli.csv {
        raw.csv = Some(cwd_rel(p));
    }
    if let Some(p) = &cli.out {
        raw.output = Some(cwd_rel(p));
    }
    raw.seed = cli.seed.or(raw.seed);
    raw.points = cli.points.or(raw.points);
    raw.trunc = cli.trunc.or(raw.trunc);
    raw.tol = cli.tol.or(raw.tol);
    raw.n_draws = cli.n_draws.or(raw.n_draws);
    raw.sigma = cli.sigma.or(raw.sigma);
    Ok((validate_config(raw)?, base))
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Run a validated config with paths relative to the working directory.
pub fn run(cfg: &RunConfig) -> Result<Report> {
    run_in(cfg, Path::new(""))
}

fn run_in(cfg: &RunConfig, base: &Path) -> Result<Report> {
    let (result, passed) = match cfg.command {
        Command::Solve => (cmd_solve(cfg)?, true),
        Command::Identify => (cmd_identify(cfg, base)?, true),
        Command::Estimate => (cmd_estimate(cfg, base)?, true),
        Command::Statics => (cmd_statics(cfg)?, true),
        Command::Simulate => (cmd_simulate(cfg, base)?, true),
        Command::OracleCheck => cmd_oracle(cfg)?,
        Command::Overid => (cmd_overid(cfg, base)?, true),
        Command::Payoffs => (cmd_payoffs(cfg)?, true),
    };
    let document = json!({
        "schema": SCHEMA,
        "version": env!("CARGO_PKG_VERSION"),
        "command": cfg.command.name(),
        "config": serde_json::to_value(cfg).expect("configs serialize"),
        "result": result,
    });
    Ok(Report { document, passed })
}

fn model_of(cfg: &RunConfig) -> Result<&MatchingModel> {
    cfg.model
        .as_ref()
        .ok_or_else(|| Error::Validation(vec!["model is required".into()]))
}

/// Solve and log the first-order-condition residuals.
fn solve_logged(model: &MatchingModel, cfg: &RunConfig) -> Result<Equilibrium> {
    let eq = solve_with(model, &cfg.policy)?;
    let foc = verify_foc(model, &eq);
    log::info!(
        "FOC residuals: r1 = {:e} (scale {:e}), r2 = {:e} (scale {:e}), r3 = {:e}",
        foc.r1,
        foc.scale1,
        foc.r2,
        foc.scale2,
        foc.r3
    );
    Ok(eq)
}

fn rows(m: &Matrix) -> Value {
    json!(to_rows(m))
}

fn equilibrium_json(model: &MatchingModel, eq: &Equilibrium) -> Value {
    json!({
        "Sigma_XY": rows(&eq.cross_cov),
        "T": rows(&eq.regression),
        "Sigma_Y_given_X": rows(&eq.cond_var_y),
        "Sigma_X_given_Y": rows(&eq.cond_var_x),
        "Delta": rows(&eq.delta),
        "welfare": eq.welfare,
        "foc": verify_foc(model, eq),
        "meta": eq.meta,
    })
}

fn cmd_solve(cfg: &RunConfig) -> Result<Value> {
    let model = model_of(cfg)?;
    let eq = solve_logged(model, cfg)?;
    Ok(equilibrium_json(model, &eq))
}

fn cmd_identify(cfg: &RunConfig, base: &Path) -> Result<Value> {
    let path = resolve(base, cfg.moments.as_ref().expect("validated"));
    let moments = read_moments(&path, &cfg.policy)?;
    let est = identify_with(&moments, cfg.sigma, &cfg.policy)?;
    let se = if moments.n_obs > 0 {
        let avar = delta_method(&moments, &identification_jacobians(&moments, cfg.sigma)?)?;
        let d: Vec<f64> = avar.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect();
        Some(to_rows(&crate::matcalc::unvec(&d, moments.m(), moments.n())?))
    } else {
        None
    };
    Ok(json!({
        "A": rows(&est.affinity),
        "T": rows(&est.regression),
        "Sigma_Y_given_X": rows(&est.cond_var_y),
        "pinv_form_gap": est.pinv_form_gap,
        "standard_errors": se,
    }))
}

/// Draws from the model's equilibrium; transfers are attached when the model has a split.
pub fn simulate_sample(model: &MatchingModel, eq: &Equilibrium, n: usize, seed: u64) -> Result<MatchedSample> {
    let mut s = sample_joint_with(eq, n, &mut replication_rng(seed, 0))?;
    if model.split.is_some() {
        let mut tau = Vector::zeros(n);
        for k in 0..n {
            tau[k] = payoffs(model, eq, &s.x_row(k), &s.y_row(k))?.transfer;
        }
        s.transfers = Some(tau);
    }
    Ok(s)
}

fn data_of(cfg: &RunConfig, base: &Path) -> Result<MatchedSample> {
    match &cfg.sample {
        Some(p) => read_sample(&resolve(base, p)),
        None => {
            let model = model_of(cfg)?;
            let eq = solve_logged(model, cfg)?;
            let (seed, n) = (cfg.seed.expect("validated"), cfg.n_draws.expect("validated"));
            log::info!("simulating {n} pairs with seed {seed}");
            simulate_sample(model, &eq, n, seed)
        }
    }
}

fn cmd_estimate(cfg: &RunConfig, base: &Path) -> Result<Value> {
    let sample = data_of(cfg, base)?;
    let moments = empirical_moments(&sample)?;
    let est = estimate_from_moments(&moments)?;
    let transfers = match &sample.transfers {
        Some(_) => {
            let fitted = fitted_model(&est, &moments)?;
            let eq = solve_logged(&fitted, cfg)?;
            Some(decompose_transfers(&sample, &eq, &est.affinity)?)
        }
        None => None,
    };
    Ok(json!({
        "n_obs": sample.n_obs(),
        "A": rows(&est.affinity),
        "standard_errors": est.standard_errors().map(|m| to_rows(&m)),
        "avar": est.avar.as_ref().map(|m| to_rows(m)),
        "moments": MomentDoc::from_moments(&moments),
        "transfer_decomposition": transfers,
    }))
}

fn cmd_statics(cfg: &RunConfig) -> Result<Value> {
    let model = model_of(cfg)?;
    let eq = solve_logged(model, cfg)?;
    let set = jacobian_set(model, &eq)?;
    let fd = fd_equilibrium_jacobians(model, &cfg.policy)?;
    let gap = |a: &Matrix, b: &Matrix| (a - b).norm() / b.norm().max(1.0);
    let fd_gap = gap(&set.dsxy_da, &fd.dsxy_da)
        .max(gap(&set.dsxy_dsx, &fd.dsxy_dsx))
        .max(gap(&set.dsxy_dsy, &fd.dsxy_dsy));
    Ok(json!({
        "dA_dSigma_XY": rows(&set.da_dsxy),
        "dA_dSigma_X": rows(&set.da_dsx),
        "dA_dSigma_Y": rows(&set.da_dsy),
        "dSigma_XY_dA": rows(&set.dsxy_da),
        "dSigma_XY_dSigma_X": rows(&set.dsxy_dsx),
        "dSigma_XY_dSigma_Y": rows(&set.dsxy_dsy),
        "Sigma_XY": rows(&eq.cross_cov),
        "inverse_relation_residual": set.inverse_relation_residual(),
        "finite_difference_gap": fd_gap,
    }))
}

fn cmd_simulate(cfg: &RunConfig, base: &Path) -> Result<Value> {
    let model = model_of(cfg)?;
    let eq = solve_logged(model, cfg)?;
    let (seed, n) = (cfg.seed.expect("validated"), cfg.n_draws.expect("validated"));
    let sample = simulate_sample(model, &eq, n, seed)?;
    if let Some(p) = &cfg.csv {
        write_sample(&resolve(base, p), &sample)?;
    }
    let moments = if n >= model.m() + model.n() {
        Some(MomentDoc::from_moments(&empirical_moments(&sample)?))
    } else {
        None
    };
    Ok(json!({
        "n_draws": n,
        "with_transfers": sample.transfers.is_some(),
        "sample_moments": moments,
        "population_Sigma_XY": rows(&eq.cross_cov),
    }))
}

fn cmd_oracle(cfg: &RunConfig) -> Result<(Value, bool)> {
    let model = model_of(cfg)?;
    let settings = cfg.oracle.expect("validated");
    let eq = solve_logged(model, cfg)?;
    let market = discretize(model, settings.points, settings.trunc)?;
    let coupling = ipfp_solve(&market, model.sigma, settings.tol, settings.max_iter)?;
    let oracle = coupling_cross_cov(&market, &coupling);
    let diff = (&oracle - &eq.cross_cov).amax();
    let passed = diff < settings.agreement;
    log::info!("oracle cross-covariance gap {diff:e} after {} IPFP sweeps", coupling.iterations);
    Ok((
        json!({
            "oracle_Sigma_XY": rows(&oracle),
            "closed_form_Sigma_XY": rows(&eq.cross_cov),
            "max_abs_diff": diff,
            "agreement": settings.agreement,
            "iterations": coupling.iterations,
            "final_residual": coupling.final_residual(),
            "grid_mass_x": market.x_mass,
            "grid_mass_y": market.y_mass,
            "status": if passed { "PASS" } else { "FAIL" },
        }),
        passed,
    ))
}

fn cmd_overid(cfg: &RunConfig, base: &Path) -> Result<Value> {
    let sample = data_of(cfg, base)?;
    let oc = OverIdConfig {
        n_sim: cfg.n_sim.unwrap_or(0),
        replications: cfg.replications.unwrap_or(199),
        seed: cfg.seed.expect("validated"),
        statistic: cfg.statistic.unwrap_or_default(),
        calibration: cfg.calibration.unwrap_or_default(),
    };
    let res = overid_test(&sample, &oc)?;
    Ok(serde_json::to_value(res).expect("serializable"))
}

fn cmd_payoffs(cfg: &RunConfig) -> Result<Value> {
    let model = model_of(cfg)?;
    let eq = solve_logged(model, cfg)?;
    let pairs: Vec<(Vector, Vector)> = if cfg.pairs.is_empty() {
        let s = sample_joint_with(&eq, cfg.n_draws.expect("validated"), &mut replication_rng(cfg.seed.expect("validated"), 0))?;
        (0..s.n_obs()).map(|k| (s.x_row(k), s.y_row(k))).collect()
    } else {
        cfg.pairs
            .iter()
            .map(|p| (Vector::from_column_slice(&p.x), Vector::from_column_slice(&p.y)))
            .collect()
    };
    let mut out = Vec::with_capacity(pairs.len());
    let mut worst: f64 = 0.0;
    for (x, y) in &pairs {
        let p = payoffs(model, &eq, x, y)?;
        let surplus = (x.transpose() * &model.affinity * y)[(0, 0)];
        worst = worst.max((p.worker_utility + p.firm_profit - surplus).abs());
        out.push(json!({
            "x": x.as_slice(),
            "y": y.as_slice(),
            "surplus": surplus,
            "payoffs": p,
        }));
    }
    Ok(json!({ "pairs": out, "max_identity_gap": worst }))
}
