//! Command-line front end.
//!
//! Exit codes: 0 converged, 2 stopped on a time, iteration or node limit,
//! 1 for any error including bad flags.

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sddip_core::sddip::{BackwardMode, CutFamily};

use crate::bench::{run_grid, Grid};
use crate::instances::{generate_gep, generate_smkp, read_model, write_model};
use crate::solve::{solve, Algo, SolveSpec};

#[derive(Debug, Parser)]
#[command(name = "sddip", version, about = "Multi-stage stochastic MIP solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an instance file.
    Gen {
        #[command(subcommand)]
        problem: GenProblem,
    },
    /// Solve an instance file and write the result CSV.
    Solve(SolveArgs),
    /// Run an experiment grid and write the aggregated CSV.
    Bench(BenchArgs),
}

#[derive(Debug, Subcommand)]
pub enum GenProblem {
    /// Stochastic multi-knapsack.
    Smkp {
        #[arg(long = "T")]
        t: usize,
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long)]
        scens: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generation expansion planning.
    Gep {
        #[arg(long = "T")]
        t: usize,
        #[arg(long)]
        scens: usize,
        /// Number of generator types (at most the bundled six).
        #[arg(long, default_value_t = 6)]
        types: usize,
        /// Per-type build caps, comma separated; defaults to the bundled caps.
        #[arg(long, value_delimiter = ',')]
        caps: Option<Vec<u32>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgoArg {
    Sddip,
    Nested,
    Extform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CutArg {
    /// Integer L-shaped.
    #[value(name = "I")]
    I,
    /// Lagrangian.
    #[value(name = "L")]
    L,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackwardArg {
    Default,
    Alternating,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Instance JSON.
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_enum, default_value_t = AlgoArg::Sddip)]
    pub algo: AlgoArg,
    #[arg(long, value_enum)]
    pub cut: Option<CutArg>,
    #[arg(long, value_enum)]
    pub backward: Option<BackwardArg>,
    /// Sampled paths per iteration.
    #[arg(long = "M")]
    pub m: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seconds, checked between iterations.
    #[arg(long)]
    pub time_limit: Option<f64>,
    #[arg(long)]
    pub iteration_limit: Option<usize>,
    /// Relative gap at which Nested Benders stops.
    #[arg(long)]
    pub gap_threshold: Option<f64>,
    /// Branch-and-bound node budget per MILP.
    #[arg(long)]
    pub node_limit: Option<usize>,
    /// Expand integer states into binaries first.
    #[arg(long)]
    pub binarize: bool,
    /// Freeze the clock: reproducible output, no time limit.
    #[arg(long)]
    pub no_timing: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Grid JSON.
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Freeze the clock: reproducible output, no time limit.
    #[arg(long)]
    pub no_timing: bool,
}

/// Turns parsed flags into a run specification, rejecting flags that do not
/// apply to the chosen algorithm.
pub fn solve_spec(a: &SolveArgs) -> Result<SolveSpec, String> {
    let given = |name: &str, set: bool| if set { Some(name.to_string()) } else { None };
    let sampling = [
        given("--M", a.m.is_some()),
        given("--alpha", a.alpha.is_some()),
        given("--gamma", a.gamma.is_some()),
        given("--delta", a.delta.is_some()),
        given("--seed", a.seed.is_some()),
    ];
    let decomposition = [
        given("--cut", a.cut.is_some()),
        given("--backward", a.backward.is_some()),
        given("--iteration-limit", a.iteration_limit.is_some()),
    ];
    let nested_only = [given("--gap-threshold", a.gap_threshold.is_some())];
    let name = match a.algo {
        AlgoArg::Sddip => "sddip",
        AlgoArg::Nested => "nested",
        AlgoArg::Extform => "extform",
    };
    let rejected: Vec<String> = match a.algo {
        AlgoArg::Sddip => nested_only.into_iter().flatten().collect(),
        AlgoArg::Nested => sampling.into_iter().flatten().collect(),
        AlgoArg::Extform => sampling.into_iter().chain(decomposition).chain(nested_only).flatten().collect(),
    };
    if !rejected.is_empty() {
        return Err(format!("{} cannot be used with --algo {name}", rejected.join(", ")));
    }
    let d = SolveSpec::default();
    let spec = SolveSpec {
        algo: match a.algo {
            AlgoArg::Sddip => Algo::Sddip,
            AlgoArg::Nested => Algo::Nested,
            AlgoArg::Extform => Algo::Extform,
        },
        cut: match a.cut {
            Some(CutArg::I) => CutFamily::IntegerL,
            Some(CutArg::L) => CutFamily::Lagrangian,
            None => d.cut,
        },
        backward: match a.backward {
            Some(BackwardArg::Default) => BackwardMode::Default,
            Some(BackwardArg::Alternating) => BackwardMode::Alternating,
            None => d.backward,
        },
        m: a.m.unwrap_or(d.m),
        alpha: a.alpha.unwrap_or(d.alpha),
        gamma: a.gamma.unwrap_or(d.gamma),
        delta: a.delta.unwrap_or(d.delta),
        seed: a.seed.unwrap_or(d.seed),
        time_limit: a.time_limit.unwrap_or(d.time_limit),
        iteration_limit: a.iteration_limit.unwrap_or(d.iteration_limit),
        gap_threshold: a.gap_threshold.unwrap_or(d.gap_threshold),
        node_limit: a.node_limit.unwrap_or(d.node_limit),
        binarize: a.binarize,
        timing: !a.no_timing,
        ..d
    };
    if spec.algo == Algo::Sddip {
        spec.sddip_config().validate().map_err(|e| e.to_string())?;
    }
    if spec.algo == Algo::Nested && !(spec.gap_threshold > 0.0 && spec.gap_threshold < 1.0) {
        return Err("--gap-threshold must lie in (0, 1)".into());
    }
    if !(spec.time_limit >= 0.0) {
        return Err("--time-limit must be non-negative".into());
    }
    Ok(spec)
}

fn usage_error(msg: &str) -> clap::Error {
    use clap::CommandFactory;
    Cli::command().error(clap::error::ErrorKind::ArgumentConflict, msg)
}

fn execute(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Gen { problem } => {
            let (model, out) = match problem {
                GenProblem::Smkp { t, rows, cols, scens, seed, out } => (generate_smkp(t, rows, cols, scens, seed)?, out),
                GenProblem::Gep { t, scens, types, caps, seed, out } => {
                    (generate_gep(t, types, scens, caps.as_deref(), seed)?, out)
                }
            };
            write_model(&model, &out)?;
            Ok(0)
        }
        Command::Solve(args) => {
            let spec = match solve_spec(&args) {
                Ok(s) => s,
                Err(msg) => {
                    let _ = usage_error(&msg).print();
                    return Ok(1);
                }
            };
            let model = read_model(&args.instance)?;
            let report = solve(&model, &spec)?;
            let file = File::create(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
            report.write_csv(BufWriter::new(file)).with_context(|| format!("writing {}", args.out.display()))?;
            Ok(report.summary.status.exit_code())
        }
        Command::Bench(args) => {
            if args.jobs == 0 {
                bail!("--jobs must be at least 1");
            }
            let grid = Grid::read(&args.grid)?;
            let table = run_grid(&grid, args.jobs, !args.no_timing);
            for e in &table.errors {
                eprintln!("failed: {e}");
            }
            let file = File::create(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
            table.write_csv(BufWriter::new(file)).with_context(|| format!("writing {}", args.out.display()))?;
            Ok(0)
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
