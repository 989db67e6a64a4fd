//! The `stlab` command line.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use super::metrics::{emit, run_monte_carlo, OutputFormat};
use super::scenario::{preset, resolve_scenario, Algorithm, OneOrMany, ScenarioConfig, ScenarioError, PRESETS};
use super::trial::{first_block_model, TrialPoint};
use crate::analysis::{capacity_bound, convexity_margin, rk_equivalence, BlockStatistics};
use crate::airlink::noise_pseudo_covariance;
use crate::chest::subspace_channel_svd;
use crate::complexla::{Cholesky, ComplexVector};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "stlab", version, about = "Blind space-time CDMA receiver experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a Monte-Carlo experiment and write its curves.
    Run {
        /// Scenario file or preset name.
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Comma-separated subset of ccm, cmv, trained, mmse.
        #[arg(long, value_delimiter = ',')]
        algos: Option<Vec<String>>,
    },
    /// Evaluate one of the analytical checks on a scenario.
    Analyze {
        #[arg(long, value_enum)]
        check: Check,
        #[arg(long)]
        scenario: String,
    },
    /// List the built-in scenarios.
    Presets,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Check {
    Convexity,
    Capacity,
    Equivalence,
}

/// Failure of a command, split by exit code.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Io { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

fn load(spec: &str) -> Result<ScenarioConfig, CliError> {
    if preset(spec).is_none() && !std::path::Path::new(spec).exists() {
        return Err(CliError::Validation(format!("{spec} is neither a preset nor an existing file")));
    }
    Ok(resolve_scenario(spec)?)
}

/// Executes a parsed command, writing reports to stdout.
pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Presets => {
            for (name, about) in PRESETS {
                println!("{name:<10} {about}");
            }
            Ok(())
        }
        Command::Run {
            scenario,
            trials,
            seed,
            out,
            format,
            algos,
        } => {
            let mut cfg = load(&scenario)?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            if let Some(names) = algos {
                let parsed = names
                    .iter()
                    .map(|n| Algorithm::parse(n).ok_or_else(|| CliError::Validation(format!("unknown algorithm {n:?}"))))
                    .collect::<Result<Vec<_>, _>>()?;
                cfg.receiver_mode = OneOrMany::Many(parsed);
            }
            cfg.validate()?;
            let series = run_monte_carlo(&cfg).map_err(runtime)?;
            let format = match format {
                Format::Csv => OutputFormat::Csv,
                Format::Json => OutputFormat::Json,
            };
            let paths = emit(&series, &out, format).map_err(runtime)?;
            for p in paths {
                println!("{}", p.display());
            }
            Ok(())
        }
        Command::Analyze { check, scenario } => {
            let cfg = load(&scenario)?;
            let report = analyze(&cfg, check)?;
            println!("{}", serde_json::to_string_pretty(&report).map_err(runtime)?);
            Ok(())
        }
    }
}

/// JSON report of one analytical check.
pub fn analyze(cfg: &ScenarioConfig, check: Check) -> Result<serde_json::Value, CliError> {
    let point = TrialPoint::nominal(cfg);
    match check {
        Check::Capacity => {
            let cap = capacity_bound(cfg.chips, cfg.tx_antennas, cfg.lp).map_err(runtime)?;
            let peak = cfg.peak_users();
            Ok(json!({ "capacity": cap, "peak_users": peak, "admitted": cap.admits(peak) }))
        }
        Check::Convexity => {
            let model = first_block_model(cfg, cfg.base_seed, point, 0).map_err(runtime)?;
            let g = model.g.normalized().ok_or_else(|| CliError::Runtime("zero channel".into()))?;
            let est = subspace_channel_svd(&model.covariance, &model.signature.direct, cfg.p, model.noise_var.max(1e-12))
                .map_err(runtime)?;
            let ideal = convexity_margin(cfg.nu, 1.0, &g, &g).map_err(runtime)?;
            let estimated = convexity_margin(cfg.nu, 1.0, &g, &est.ghat).map_err(runtime)?;
            Ok(json!({ "ideal_channel": ideal, "subspace_estimate": estimated }))
        }
        Check::Equivalence => {
            // The fourth-order statistics are enumerated exactly, which is
            // only feasible for the desired user alone.
            let single = ScenarioConfig {
                users: 1,
                dynamic_events: Vec::new(),
                ..cfg.clone()
            };
            let reports = cfg
                .snr_points()
                .into_iter()
                .map(|snr_db| equivalence_at(&single, snr_db))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(json!({ "users": 1, "points": reports }))
        }
    }
}

/// Equivalence report at one SNR for the distortionless filter `R⁻¹p/(pᴴR⁻¹p)`.
pub fn equivalence_at(cfg: &ScenarioConfig, snr_db: f64) -> Result<crate::analysis::EquivalenceReport, CliError> {
    let point = TrialPoint { snr_db, users: cfg.users };
    let model = first_block_model(cfg, cfg.base_seed, point, 0).map_err(runtime)?;
    let p1 = model.signature.direct.mul_vec(&model.g);
    let w = distortionless(&model.covariance, &p1)?;
    let pseudo = noise_pseudo_covariance(model.layout, cfg.chips, cfg.lp, model.noise_var);
    let stats = BlockStatistics::new(model.responses, model.noise_var, pseudo).map_err(runtime)?;
    let rk = stats.cm_weighted_covariance(&w);
    rk_equivalence(&rk, &model.covariance, &w, &p1, 1.0, model.noise_var).map_err(runtime)
}

fn distortionless(r: &crate::complexla::ComplexMatrix, p: &ComplexVector) -> Result<ComplexVector, CliError> {
    let u = Cholesky::new(r).map_err(runtime)?.solve_vec(p);
    let gain = p.dot(&u).re;
    Ok(u.scale_real(1.0 / gain))
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
