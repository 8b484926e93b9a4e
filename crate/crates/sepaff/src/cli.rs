//! Command-line front end: problem I/O, solve orchestration, bound and gap
//! reporting, oracle cross-checks, and synthetic instance generation.
//!
//! All files are JSON: problem files map one-to-one onto the SAP fields,
//! portfolio files carry a `portfolio` object, and results echo the solver
//! options used. Exit codes are the only channel for solve status:
//! 0 converged, 1 input error, 2 iteration limit, 3 no feasible candidate,
//! 4 oracle refusal.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::admm::{self, InitMode, SolveOptions, SolveStatus, TelemetryRecord};
use crate::oracle::{self, GridSpec, OracleError};
use crate::portfolio::{self, PortfolioSpec};
use crate::pwq::QuadPiece;
use crate::sap::{self, MatrixData, SapProblem, Scaling, Triplet};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("oracle refused the instance: {0}")]
    OracleRefusal(String),
}

/// Constraint matrix wire form: dense rows or sorted sparse triplets.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixRepr {
    Rows(Vec<Vec<f64>>),
    Sparse { nrows: usize, ncols: usize, triplets: Vec<Triplet> },
}

/// On-disk SAP description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemFile {
    pub version: u32,
    #[serde(rename = "A")]
    pub a: MatrixRepr,
    pub b: Vec<f64>,
    /// One piece list per variable.
    pub functions: Vec<Vec<QuadPiece>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e: Option<Vec<f64>>,
}

/// On-disk portfolio description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PortfolioFile {
    pub portfolio: PortfolioSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum InputFile {
    Sap(ProblemFile),
    Portfolio(PortfolioFile),
}

/// Machine-readable solve report written to stdout or `--out`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_best: Option<Vec<f64>>,
    pub o_best: Option<f64>,
    pub d_star: Option<f64>,
    pub gap: Option<f64>,
    pub residual: Option<f64>,
    pub iterations: usize,
    pub status: SolveStatus,
    pub runtime_ms: f64,
    pub options: OptionsEcho,
}

/// Echo of the solver configuration that produced a result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptionsEcho {
    pub eps_res: f64,
    pub eps_obj: f64,
    pub check_every: usize,
    pub patience: usize,
    pub max_iter: usize,
    pub init: String,
    pub scaling: String,
    pub parallel_prox: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Parser)]
#[command(name = "sepaff", about = "Separable-affine solver with envelope bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InitArg {
    Relax,
    Zeros,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScalingArg {
    File,
    Auto,
    None,
}

#[derive(Debug, Args)]
struct SolverFlags {
    #[arg(long, default_value_t = 3e-4)]
    eps_res: f64,
    #[arg(long, default_value_t = 1e-5)]
    eps_obj: f64,
    #[arg(long, default_value_t = 10)]
    check_every: usize,
    #[arg(long, default_value_t = 50)]
    patience: usize,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    #[arg(long, value_enum, default_value_t = InitArg::Relax)]
    init: InitArg,
    #[arg(long, value_enum, default_value_t = ScalingArg::Auto)]
    scaling: ScalingArg,
    /// Reserved for workflows that generate inputs; echoed in the result.
    #[arg(long)]
    seed: Option<u64>,
    /// Write line-delimited check-point records to this path.
    #[arg(long)]
    telemetry: Option<PathBuf>,
    /// Fan the componentwise prox step out across threads.
    #[arg(long, default_value_t = false)]
    parallel_prox: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a problem or portfolio file.
    Solve {
        input: PathBuf,
        #[command(flatten)]
        flags: SolverFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve only the convex relaxation and report the lower bound.
    Relax {
        input: PathBuf,
        #[command(flatten)]
        flags: SolverFlags,
        /// Write the per-component envelope functions to this path.
        #[arg(long)]
        dump_envelopes: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reference value by exhaustive or value-function search (small
    /// instances only).
    Oracle {
        input: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        grid_step: f64,
        #[arg(long, default_value_t = 4_000_000)]
        max_points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic portfolio instance.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        assets: usize,
        #[arg(long, default_value_t = 10)]
        factors: usize,
        #[arg(long, default_value_t = 3)]
        lots: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a batch of generated instances and summarize runtimes and gaps.
    Bench {
        #[arg(long, default_value_t = 3)]
        seeds: u64,
        #[arg(long, default_value_t = 100)]
        assets: usize,
        #[arg(long, default_value_t = 10)]
        factors: usize,
        #[arg(long, default_value_t = 3)]
        lots: usize,
        #[command(flatten)]
        flags: SolverFlags,
    },
}

fn read_input(path: &Path) -> Result<InputFile, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("cannot parse {}: {e}", path.display())))
}

/// A parsed instance: the SAP, optional recovery hook data, optional file
/// scaling, and the shape needed for automatic scaling.
struct LoadedProblem {
    problem: SapProblem,
    built: Option<portfolio::BuiltPortfolio>,
    file_scaling: Option<Scaling>,
    portfolio_shape: Option<(usize, usize)>,
}

fn load_problem(input: InputFile) -> Result<LoadedProblem, CliError> {
    match input {
        InputFile::Sap(file) => {
            let a = match file.a {
                MatrixRepr::Rows(rows) => MatrixData::from_rows(rows),
                MatrixRepr::Sparse { nrows, ncols, triplets } => {
                    MatrixData::sparse(nrows, ncols, triplets)
                }
            }
            .map_err(|e| CliError::Input(e.to_string()))?;
            let file_scaling = match (file.d, file.e) {
                (Some(d), Some(e)) => {
                    Some(Scaling::new(d, e).map_err(|e| CliError::Input(e.to_string()))?)
                }
                (None, None) => None,
                _ => return Err(CliError::Input("scaling needs both d and e vectors".into())),
            };
            let problem = SapProblem::from_piece_lists(a, file.b, file.functions)
                .map_err(|e| CliError::Input(e.to_string()))?;
            Ok(LoadedProblem { problem, built: None, file_scaling, portfolio_shape: None })
        }
        InputFile::Portfolio(file) => {
            let spec = file.portfolio;
            let shape = (spec.assets, spec.factors);
            let built =
                portfolio::build_sap(&spec).map_err(|e| CliError::Input(e.to_string()))?;
            Ok(LoadedProblem {
                problem: built.problem.clone(),
                built: Some(built),
                file_scaling: None,
                portfolio_shape: Some(shape),
            })
        }
    }
}

fn solve_options(flags: &SolverFlags, loaded: &LoadedProblem) -> Result<SolveOptions, CliError> {
    let scaling = match flags.scaling {
        ScalingArg::None => None,
        ScalingArg::File => Some(loaded.file_scaling.clone().ok_or_else(|| {
            CliError::Input("--scaling file requires d and e vectors in the input".into())
        })?),
        ScalingArg::Auto => match loaded.portfolio_shape {
            Some((l, k)) => Some(portfolio::default_scaling(l, k)),
            None => Some(sap::equilibrate(loaded.problem.a())),
        },
    };
    Ok(SolveOptions {
        eps_res: flags.eps_res,
        eps_obj: flags.eps_obj,
        check_every: flags.check_every,
        patience: flags.patience,
        max_iter: flags.max_iter,
        scaling,
        init_mode: match flags.init {
            InitArg::Relax => InitMode::Relaxation,
            InitArg::Zeros => InitMode::Zeros,
        },
        parallel_prox: flags.parallel_prox,
    })
}

fn options_echo(flags: &SolverFlags) -> OptionsEcho {
    OptionsEcho {
        eps_res: flags.eps_res,
        eps_obj: flags.eps_obj,
        check_every: flags.check_every,
        patience: flags.patience,
        max_iter: flags.max_iter,
        init: match flags.init {
            InitArg::Relax => "relax".into(),
            InitArg::Zeros => "zeros".into(),
        },
        scaling: match flags.scaling {
            ScalingArg::File => "file".into(),
            ScalingArg::Auto => "auto".into(),
            ScalingArg::None => "none".into(),
        },
        parallel_prox: flags.parallel_prox,
        seed: flags.seed,
    }
}

fn write_output(text: &str, out: &Option<PathBuf>) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run_solve(
    loaded: &LoadedProblem,
    opts: &SolveOptions,
    flags: &SolverFlags,
) -> Result<ResultFile, CliError> {
    let mut telemetry_file = match &flags.telemetry {
        Some(path) => Some(fs::File::create(path).map_err(|e| {
            CliError::Input(format!("cannot create telemetry file {}: {e}", path.display()))
        })?),
        None => None,
    };
    let mut sink = telemetry_file.as_mut().map(|file| {
        move |rec: &TelemetryRecord| {
            let _ = serde_json::to_writer(&mut *file, rec);
            let _ = writeln!(file);
        }
    });
    let hook = loaded.built.as_ref().map(|built| {
        move |z: &[f64]| built.recover(z)
    });
    let start = Instant::now();
    let result = admm::solve_with(
        &loaded.problem,
        opts,
        hook.as_ref().map(|h| h as &admm::RecoverHook),
        sink.as_mut().map(|s| s as &mut admm::TelemetrySink),
    )
    .map_err(|e| CliError::Input(e.to_string()))?;
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(ResultFile {
        x_best: result.x_best,
        o_best: result.o_best,
        d_star: result.d_star,
        gap: result.gap,
        residual: result.residual_at_best,
        iterations: result.iterations,
        status: result.status,
        runtime_ms,
        options: options_echo(flags),
    })
}

fn cmd_solve(
    input: &Path,
    flags: &SolverFlags,
    out: &Option<PathBuf>,
) -> Result<ResultFile, CliError> {
    let loaded = load_problem(read_input(input)?)?;
    let opts = solve_options(flags, &loaded)?;
    let result = run_solve(&loaded, &opts, flags)?;
    let text = serde_json::to_string_pretty(&result).expect("result serializes");
    write_output(&text, out)?;
    Ok(result)
}

fn cmd_relax(
    input: &Path,
    flags: &SolverFlags,
    dump_envelopes: &Option<PathBuf>,
    out: &Option<PathBuf>,
) -> Result<ResultFile, CliError> {
    let loaded = load_problem(read_input(input)?)?;
    let relaxed = loaded
        .problem
        .relax()
        .map_err(|e| CliError::Input(e.to_string()))?;
    if let Some(path) = dump_envelopes {
        let text = serde_json::to_string_pretty(relaxed.f()).expect("envelopes serialize");
        fs::write(path, text)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
    }
    let relaxed_loaded = LoadedProblem {
        problem: relaxed,
        built: None,
        file_scaling: loaded.file_scaling.clone(),
        portfolio_shape: loaded.portfolio_shape,
    };
    let mut opts = solve_options(flags, &relaxed_loaded)?;
    // The relaxation is convex: a zeros start converges and avoids a
    // redundant inner relaxation pass.
    opts.init_mode = InitMode::Zeros;
    let mut result = run_solve(&relaxed_loaded, &opts, flags)?;
    result.d_star = result.o_best;
    result.gap = result.o_best.map(|_| 0.0);
    let text = serde_json::to_string_pretty(&result).expect("result serializes");
    write_output(&text, out)?;
    Ok(result)
}

fn cmd_oracle(
    input: &Path,
    grid_step: f64,
    max_points: usize,
    out: &Option<PathBuf>,
) -> Result<ResultFile, CliError> {
    let loaded = load_problem(read_input(input)?)?;
    let p = &loaded.problem;
    let spec = GridSpec { bounds: None, step: grid_step, max_points };
    let start = Instant::now();
    let free = p.num_vars().saturating_sub(p.num_constraints());
    let outcome = if free <= 4 {
        oracle::exhaustive(p, &spec)
    } else if p.num_constraints() <= 2 {
        oracle::dp_solve(p, &spec)
    } else {
        Err(OracleError::TooManyDegreesOfFreedom(free))
    };
    let (x, value) = outcome.map_err(|e| match e {
        OracleError::TooManyDegreesOfFreedom(_) | OracleError::TooManyConstraintRows(_) => {
            CliError::OracleRefusal(e.to_string())
        }
        other => CliError::Input(other.to_string()),
    })?;
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    let result = ResultFile {
        x_best: Some(x),
        o_best: Some(value),
        d_star: None,
        gap: None,
        residual: None,
        iterations: 0,
        status: SolveStatus::Converged,
        runtime_ms,
        options: OptionsEcho {
            eps_res: grid_step,
            eps_obj: 0.0,
            check_every: 0,
            patience: 0,
            max_iter: 0,
            init: "oracle".into(),
            scaling: "none".into(),
            parallel_prox: false,
            seed: None,
        },
    };
    let text = serde_json::to_string_pretty(&result).expect("result serializes");
    write_output(&text, out)?;
    Ok(result)
}

fn cmd_gen(
    seed: u64,
    assets: usize,
    factors: usize,
    lots: usize,
    out: &Option<PathBuf>,
) -> Result<(), CliError> {
    let spec = portfolio::synthesize_instance(seed, assets, factors, lots);
    let file = PortfolioFile { portfolio: spec };
    let text = serde_json::to_string_pretty(&file).expect("spec serializes");
    write_output(&text, out)
}

#[derive(Debug, Serialize)]
struct BenchInstance {
    seed: u64,
    status: SolveStatus,
    runtime_ms: f64,
    relax_runtime_ms: f64,
    gap_bp: Option<f64>,
    o_best: Option<f64>,
    d_star: Option<f64>,
}

#[derive(Debug, Serialize)]
struct BenchSummary {
    instances: Vec<BenchInstance>,
    runtime_ms_mean: f64,
    runtime_ms_std: f64,
    gap_bp_mean: f64,
    gap_bp_std: f64,
    gap_bp_max: f64,
}

fn cmd_bench(
    seeds: u64,
    assets: usize,
    factors: usize,
    lots: usize,
    flags: &SolverFlags,
) -> Result<(), CliError> {
    let mut instances = Vec::new();
    for seed in 0..seeds {
        let spec = portfolio::synthesize_instance(seed, assets, factors, lots);
        let built = portfolio::build_sap(&spec).map_err(|e| CliError::Input(e.to_string()))?;
        let loaded = LoadedProblem {
            problem: built.problem.clone(),
            built: Some(built),
            file_scaling: None,
            portfolio_shape: Some((assets, factors)),
        };
        let opts = solve_options(flags, &loaded)?;
        // Relaxation-only timing for comparison.
        let relax_start = Instant::now();
        let relaxed = loaded.problem.relax().map_err(|e| CliError::Input(e.to_string()))?;
        let relax_opts = SolveOptions { init_mode: InitMode::Zeros, ..opts.clone() };
        let _ = admm::solve(&relaxed, &relax_opts).map_err(|e| CliError::Input(e.to_string()))?;
        let relax_runtime_ms = relax_start.elapsed().as_secs_f64() * 1e3;

        let result = run_solve(&loaded, &opts, flags)?;
        instances.push(BenchInstance {
            seed,
            status: result.status,
            runtime_ms: result.runtime_ms,
            relax_runtime_ms,
            gap_bp: result.gap.map(|g| g * 1e4),
            o_best: result.o_best,
            d_star: result.d_star,
        });
    }
    let runtimes: Vec<f64> = instances.iter().map(|r| r.runtime_ms).collect();
    let gaps: Vec<f64> = instances.iter().filter_map(|r| r.gap_bp).collect();
    let mean = |xs: &[f64]| if xs.is_empty() { 0.0 } else { xs.iter().sum::<f64>() / xs.len() as f64 };
    let std = |xs: &[f64]| {
        if xs.len() < 2 {
            return 0.0;
        }
        let mu = mean(xs);
        (xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
    };
    let summary = BenchSummary {
        runtime_ms_mean: mean(&runtimes),
        runtime_ms_std: std(&runtimes),
        gap_bp_mean: mean(&gaps),
        gap_bp_std: std(&gaps),
        gap_bp_max: gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        instances,
    };
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    Ok(())
}

fn status_code(status: SolveStatus) -> ExitCode {
    match status {
        SolveStatus::Converged => ExitCode::SUCCESS,
        SolveStatus::MaxIter => ExitCode::from(2),
        SolveStatus::NoFeasibleCandidate => ExitCode::from(3),
    }
}

/// Parses arguments and dispatches; the returned code is the process exit
/// status.
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    let outcome: Result<ExitCode, CliError> = match &cli.command {
        Command::Solve { input, flags, out } => {
            cmd_solve(input, flags, out).map(|r| status_code(r.status))
        }
        Command::Relax { input, flags, dump_envelopes, out } => {
            cmd_relax(input, flags, dump_envelopes, out).map(|r| status_code(r.status))
        }
        Command::Oracle { input, grid_step, max_points, out } => {
            cmd_oracle(input, *grid_step, *max_points, out).map(|r| status_code(r.status))
        }
        Command::Gen { seed, assets, factors, lots, out } => {
            cmd_gen(*seed, *assets, *factors, *lots, out).map(|()| ExitCode::SUCCESS)
        }
        Command::Bench { seeds, assets, factors, lots, flags } => {
            cmd_bench(*seeds, *assets, *factors, *lots, flags).map(|()| ExitCode::SUCCESS)
        }
    };
    match outcome {
        Ok(code) => code,
        Err(CliError::OracleRefusal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(4)
        }
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
