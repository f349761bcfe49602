//! Command line front end for coalition-based overlapping community
//! detection: weight systems, local search, MILP export/import, benchmark
//! generation, and evaluation against planted ground truth.
//!
//! Exit codes: 0 success, 2 usage or I/O or parse failure, 3 domain or
//! validation failure, 4 search bootstrap failure.

mod commands;
mod fileio;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use coalitions::error::Error;
use commands::{
    DetectParams, EvaluateParams, FormulationArg, GenerateParams, ModelParams, WeightArg,
};

/// Boundary error type: flag combinations clap cannot express, plus every
/// library error. Main maps it to the process exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{}", msg),
            CliError::Lib(e) => write!(f, "{}", e),
        }
    }
}

fn exit_code(e: &CliError) -> u8 {
    match e {
        CliError::Usage(_) => 2,
        CliError::Lib(Error::Io { .. } | Error::Parse { .. }) => 2,
        CliError::Lib(Error::Search { .. }) => 4,
        CliError::Lib(_) => 3,
    }
}

#[derive(Parser)]
#[command(
    name = "coalitions",
    version,
    about = "Overlapping community detection via stable coalitions of a graph game"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a weight system and write it as "label_i label_j value" lines.
    Weights {
        /// Edge list file, one "label label" pair per line.
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_enum)]
        weights: WeightArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Detect overlapping communities by multi-start local search.
    Detect {
        #[arg(long)]
        graph: PathBuf,
        /// Number of communities.
        #[arg(long)]
        nc: usize,
        /// Maximum memberships per node.
        #[arg(long, default_value_t = 1)]
        p: usize,
        #[arg(long, value_enum, default_value = "exact")]
        weights: WeightArg,
        /// Random restarts.
        #[arg(long, default_value_t = 10)]
        tmax: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Cover file to write; a report and a manifest are written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a MILP formulation in CPLEX LP format.
    ExportMilp {
        #[arg(long)]
        graph: PathBuf,
        /// f-sh-jk (raw weights, no overlap limit) or f-sh-mod (needs --p and
        /// --weights exact|approx).
        #[arg(long, value_enum)]
        formulation: FormulationArg,
        #[arg(long, value_enum)]
        weights: Option<WeightArg>,
        #[arg(long)]
        nc: usize,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode an external solver's variable assignment into a cover.
    ImportSolution {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_enum)]
        formulation: FormulationArg,
        #[arg(long, value_enum)]
        weights: Option<WeightArg>,
        #[arg(long)]
        nc: usize,
        #[arg(long)]
        p: Option<usize>,
        /// Solver output, one "variable value" pair per line.
        #[arg(long)]
        solution: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate benchmark graphs with planted overlapping communities.
    Generate {
        /// JSON file holding a full generator configuration; --seed still
        /// overrides the seed it contains.
        #[arg(long, conflicts_with_all = [
            "n", "n_o", "p", "nc", "mu", "mu_o", "gamma", "beta",
            "k_min", "k_max", "s_min", "s_max",
        ])]
        config: Option<PathBuf>,
        /// Non-bridge node count.
        #[arg(long, required_unless_present = "config")]
        n: Option<usize>,
        /// Bridge node count.
        #[arg(long, default_value_t = 0)]
        n_o: usize,
        /// Memberships per bridge node.
        #[arg(long, default_value_t = 1)]
        p: usize,
        #[arg(long, required_unless_present = "config")]
        nc: Option<usize>,
        /// Mixing fraction for non-bridge nodes.
        #[arg(long, required_unless_present = "config")]
        mu: Option<f64>,
        /// Mixing fraction for bridge nodes.
        #[arg(long, default_value_t = 0.5)]
        mu_o: f64,
        /// Degree distribution exponent.
        #[arg(long, default_value_t = 2.5)]
        gamma: f64,
        /// Community size distribution exponent.
        #[arg(long, default_value_t = 1.5)]
        beta: f64,
        #[arg(long, default_value_t = 5)]
        k_min: usize,
        #[arg(long, default_value_t = 10)]
        k_max: usize,
        #[arg(long, default_value_t = 10)]
        s_min: usize,
        #[arg(long, default_value_t = 20)]
        s_max: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Instances to generate; >1 numbers the output files.
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Output prefix; writes <out>.edges, .truth, .bridges, .json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predicted covers against ground truth (single files or
    /// directories of instances).
    Evaluate {
        /// Predicted cover file, or a directory of <stem>.cover files.
        #[arg(long)]
        pred: PathBuf,
        /// Ground truth cover file, or a directory of <stem>.truth files.
        #[arg(long)]
        truth: PathBuf,
        /// True bridge list file, or a directory of <stem>.bridges files.
        #[arg(long)]
        bridges: PathBuf,
        /// JSON report path; a TSV table is written next to it.
        #[arg(long)]
        out: PathBuf,
        /// Override the TSV path.
        #[arg(long)]
        tsv: Option<PathBuf>,
    },
}

/// COALITION_THREADS caps the rayon worker count for the whole process.
fn init_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("COALITION_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| {
            CliError::Usage(format!(
                "COALITION_THREADS must be a positive integer, got {:?}",
                raw
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool setup failed: {}", e)))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Weights { graph, weights, out } => commands::cmd_weights(&graph, weights, &out),
        Command::Detect { graph, nc, p, weights, tmax, seed, out } => {
            commands::cmd_detect(&DetectParams {
                graph: &graph,
                n_c: nc,
                p,
                weights,
                t_max: tmax,
                seed,
                out: &out,
            })
        }
        Command::ExportMilp { graph, formulation, weights, nc, p, out } => {
            commands::cmd_export_milp(
                &ModelParams { graph: &graph, formulation, weights, n_c: nc, p },
                &out,
            )
        }
        Command::ImportSolution { graph, formulation, weights, nc, p, solution, out } => {
            commands::cmd_import_solution(
                &ModelParams { graph: &graph, formulation, weights, n_c: nc, p },
                &solution,
                &out,
            )
        }
        Command::Generate {
            config,
            n,
            n_o,
            p,
            nc,
            mu,
            mu_o,
            gamma,
            beta,
            k_min,
            k_max,
            s_min,
            s_max,
            seed,
            count,
            out,
        } => commands::cmd_generate(&GenerateParams {
            config: config.as_deref(),
            n,
            n_o,
            p,
            n_c: nc,
            mu,
            mu_o,
            gamma,
            beta,
            k_min,
            k_max,
            s_min,
            s_max,
            seed,
            count,
            out: &out,
        }),
        Command::Evaluate { pred, truth, bridges, out, tsv } => {
            commands::cmd_evaluate(&EvaluateParams {
                pred: &pred,
                truth: &truth,
                bridges: &bridges,
                out: &out,
                tsv: tsv.as_deref(),
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = init_threads().and_then(|()| run(cli));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(exit_code(&e))
        }
    }
}
