//! The `qtomo` command-line tool.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input, 3 sampler
//! failure, 4 finished but not converged (max R-hat at or above
//! [`RHAT_LIMIT`]).

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use qtomo_core::posterior::{ppc, summarize_state, MIN_HDI_SAMPLES};
use qtomo_core::simulate::simulate_counts;
use qtomo_core::{PpcOptions, SamplerConfig, SamplerKind, TomographyModel};

use config::{canonical_digest, load_experiment, load_sim, parse_value, Kind};
use output::{
    manifest_path_for, ppc_csv, read_text, read_trace_csv, to_json_bytes, trace_csv, write_atomic, DiagnosticsJson,
    Manifest, RealizedJson, SamplerJson, SummaryJson,
};

/// Runs with a larger R-hat exit with [`EXIT_NOT_CONVERGED`].
pub const RHAT_LIMIT: f64 = 1.05;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SAMPLER: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Schema(String),
    #[error("{0}")]
    Input(String),
    #[error("sampler failed: {0}")]
    Sampler(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) | CliError::Input(_) => EXIT_INPUT,
            CliError::Sampler(_) => EXIT_SAMPLER,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qtomo", version, about = "Bayesian polarization-qubit state tomography")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a one-qubit experiment config.
    #[command(name = "fit-1q")]
    Fit1Q(FitArgs),
    /// Fit a two-qubit experiment config.
    #[command(name = "fit-2q")]
    Fit2Q(FitArgs),
    /// Simulate a one-qubit dataset from a spec.
    #[command(name = "simulate-1q")]
    Simulate1Q(SimArgs),
    /// Simulate a two-qubit dataset from a spec.
    #[command(name = "simulate-2q")]
    Simulate2Q(SimArgs),
    /// Posterior predictive check of a fitted trace against its config.
    Ppc(PpcArgs),
    /// Rebuild the posterior summary from a trace file.
    Summarize(SummarizeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplerChoice {
    Nuts,
    Rwm,
}

#[derive(Debug, Clone, Args)]
pub struct SamplerArgs {
    #[arg(long, default_value_t = 1000)]
    pub draws: usize,
    #[arg(long, default_value_t = 1000)]
    pub tune: usize,
    #[arg(long, default_value_t = 4)]
    pub chains: usize,
    #[arg(long, default_value_t = 0.8)]
    pub target_accept: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SamplerChoice::Nuts)]
    pub sampler: SamplerChoice,
    #[arg(long, default_value_t = 10)]
    pub max_tree_depth: usize,
}

impl SamplerArgs {
    pub fn to_config(&self) -> Result<SamplerConfig, CliError> {
        let cfg = SamplerConfig {
            chains: self.chains,
            draws: self.draws,
            tune: self.tune,
            target_accept: self.target_accept,
            seed: self.seed,
            kind: match self.sampler {
                SamplerChoice::Nuts => SamplerKind::Nuts,
                SamplerChoice::Rwm => SamplerKind::RandomWalk,
            },
            max_tree_depth: self.max_tree_depth,
        };
        cfg.validate().map_err(|e| CliError::Schema(e.to_string()))?;
        if cfg.chains * cfg.draws < MIN_HDI_SAMPLES {
            return Err(CliError::Schema(format!("chains x draws must be at least {MIN_HDI_SAMPLES}")));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Experiment config (JSON).
    pub config: PathBuf,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long, default_value_t = 0.95)]
    pub hdi_prob: f64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    /// Simulation spec (JSON).
    pub spec: PathBuf,
    /// Overrides the seed in the spec.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PpcArgs {
    /// Trace CSV written by a fit; its manifest must sit alongside.
    pub trace: PathBuf,
    /// The experiment config the trace was fitted to.
    pub config: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SummarizeArgs {
    pub trace: PathBuf,
    #[arg(long, default_value_t = 0.95)]
    pub hdi_prob: f64,
    /// Write `summary.json` here instead of printing it.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// What a successful command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub written: Vec<PathBuf>,
    pub notes: Vec<String>,
}

fn check_hdi_prob(p: f64) -> Result<(), CliError> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(CliError::Schema(format!("--hdi-prob {p} must lie in (0, 1)")))
    }
}

fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn sampler_json(cfg: &SamplerConfig) -> SamplerJson {
    SamplerJson {
        kind: match cfg.kind {
            SamplerKind::Nuts => "nuts".into(),
            SamplerKind::RandomWalk => "rwm".into(),
        },
        chains: cfg.chains,
        draws: cfg.draws,
        tune: cfg.tune,
        target_accept: cfg.target_accept,
        max_tree_depth: cfg.max_tree_depth,
    }
}

fn fit(args: &FitArgs, expected: Kind, command: &str) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let loaded = load_experiment(&read_text(&args.config)?)?;
    if loaded.config.setup.qubits() != expected.qubits() {
        return Err(CliError::Schema(format!("kind: {command} needs a {:?} config", expected)));
    }
    let cfg = args.sampler.to_config()?;
    check_hdi_prob(args.hdi_prob)?;
    let model = TomographyModel::new(loaded.config).map_err(|e| CliError::Schema(e.to_string()))?;
    let trace = model.sample(&cfg).map_err(|e| CliError::Sampler(e.to_string()))?;
    let summary =
        summarize_state(&trace, model.qubits(), args.hdi_prob).map_err(|e| CliError::Sampler(e.to_string()))?;

    let paths = ["trace.csv", "summary.json", "manifest.json"].map(|n| args.out_dir.join(n));
    write_atomic(&paths[0], &trace_csv(&trace))?;
    let summary_json = SummaryJson::new(&summary, &trace, true, model.warnings().to_vec());
    write_atomic(&paths[1], &to_json_bytes(&summary_json))?;
    let manifest = Manifest {
        tool: "qtomo".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        input: file_name(&args.config),
        config_digest: loaded.digest,
        seed: cfg.seed,
        sampler: Some(sampler_json(&cfg)),
        diagnostics: Some(DiagnosticsJson {
            max_rhat: summary.max_rhat,
            min_ess: summary.min_ess,
            divergences: summary.divergences,
        }),
        realized: None,
        outputs: paths[..2].iter().map(|p| file_name(p)).collect(),
        duration_seconds: start.elapsed().as_secs_f64(),
    };
    write_atomic(&paths[2], &to_json_bytes(&manifest))?;

    let mut notes = model.warnings().to_vec();
    notes.push(format!(
        "max R-hat {:.4}, min ESS {:.0}, {} divergences",
        summary.max_rhat, summary.min_ess, summary.divergences
    ));
    let converged = summary.max_rhat < RHAT_LIMIT;
    if !converged {
        notes.push(format!("not converged: max R-hat {:.4} >= {RHAT_LIMIT}", summary.max_rhat));
    }
    Ok(Outcome { exit_code: if converged { 0 } else { EXIT_NOT_CONVERGED }, written: paths.to_vec(), notes })
}

fn simulate(args: &SimArgs, expected: Kind, command: &str) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let text = read_text(&args.spec)?;
    let loaded = load_sim(&text, args.seed)?;
    if loaded.kind() != expected {
        return Err(CliError::Schema(format!("kind: {command} needs a {expected:?} spec")));
    }
    let spec = loaded.spec();
    let sim = simulate_counts(spec).map_err(|e| CliError::Schema(e.to_string()))?;
    let dataset = loaded.dataset_json(sim.counts.clone());
    let paths = ["dataset.json", "manifest.json"].map(|n| args.out_dir.join(n));
    write_atomic(&paths[0], &to_json_bytes(&dataset))?;
    let manifest = Manifest {
        tool: "qtomo".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        input: file_name(&args.spec),
        config_digest: canonical_digest(&parse_value(&text)?),
        seed: spec.seed,
        sampler: None,
        diagnostics: None,
        realized: Some(RealizedJson {
            angle_offsets: sim.realized.angle_offsets.iter().cloned().collect(),
            crosstalk: sim.realized.crosstalk.clone(),
            mean_counts: sim.realized.mean_counts.clone(),
        }),
        outputs: vec![file_name(&paths[0])],
        duration_seconds: start.elapsed().as_secs_f64(),
    };
    write_atomic(&paths[1], &to_json_bytes(&manifest))?;
    Ok(Outcome { exit_code: 0, written: paths.to_vec(), notes: vec![format!("counts {:?}", sim.counts)] })
}

fn run_ppc(args: &PpcArgs) -> Result<Outcome, CliError> {
    let loaded = load_experiment(&read_text(&args.config)?)?;
    let manifest_path = manifest_path_for(&args.trace);
    let manifest: Manifest = serde_json::from_str(&read_text(&manifest_path)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", manifest_path.display())))?;
    if manifest.config_digest != loaded.digest {
        return Err(CliError::Input(format!(
            "config digest {} does not match the trace manifest ({})",
            loaded.digest, manifest.config_digest
        )));
    }
    let (trace, _) = read_trace_csv(&args.trace)?;
    let model = TomographyModel::new(loaded.config).map_err(|e| CliError::Schema(e.to_string()))?;
    let opts = PpcOptions { samples: args.samples, replicates: args.replicates, seed: args.seed };
    let result = ppc(&model, &trace, &opts).map_err(|e| CliError::Input(e.to_string()))?;
    let path = args.out_dir.join("ppc.csv");
    write_atomic(&path, &ppc_csv(&result))?;
    let outside = result.observed.iter().zip(&result.quantiles).filter(|(o, q)| **o < q[0] || **o > q[6]).count();
    Ok(Outcome {
        exit_code: 0,
        written: vec![path],
        notes: vec![format!("{outside} of {} observations outside the 1-99% band", result.observed.len())],
    })
}

fn summarize(args: &SummarizeArgs) -> Result<Outcome, CliError> {
    check_hdi_prob(args.hdi_prob)?;
    let (trace, qubits) = read_trace_csv(&args.trace)?;
    let summary = summarize_state(&trace, qubits, args.hdi_prob).map_err(|e| CliError::Input(e.to_string()))?;
    let bytes = to_json_bytes(&SummaryJson::new(&summary, &trace, false, Vec::new()));
    match &args.out_dir {
        Some(dir) => {
            let path = dir.join("summary.json");
            write_atomic(&path, &bytes)?;
            Ok(Outcome { exit_code: 0, written: vec![path], notes: Vec::new() })
        }
        None => {
            print!("{}", String::from_utf8_lossy(&bytes));
            Ok(Outcome { exit_code: 0, written: Vec::new(), notes: Vec::new() })
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Fit1Q(a) => fit(a, Kind::OneQubit, "fit-1q"),
        Command::Fit2Q(a) => fit(a, Kind::TwoQubit, "fit-2q"),
        Command::Simulate1Q(a) => simulate(a, Kind::OneQubit, "simulate-1q"),
        Command::Simulate2Q(a) => simulate(a, Kind::TwoQubit, "simulate-2q"),
        Command::Ppc(a) => run_ppc(a),
        Command::Summarize(a) => summarize(a),
    }
}

/// Caps chain parallelism from `QTOMO_THREADS`.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("QTOMO_THREADS") else { return Ok(()) };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Schema(format!("QTOMO_THREADS={v} must be a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Input(format!("thread pool: {e}")))
}
