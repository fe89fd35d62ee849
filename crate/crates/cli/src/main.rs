//! `wei-norman`: derive hierarchies, integrate signals, run the
//! verification battery, and compare trajectories.
//!
//! Exit codes: 0 success, 1 validation or I/O error, 2 numerical failure,
//! 3 verification failure.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wei_norman::verify::{run_verification, VerifyOptions};
use wei_norman::{
    compare, derive_hierarchy, emit, integrate_direct, integrate_wn, Error, Execution, Format, RowOrder, Signal,
    Trajectory,
};

use crate::config::{RunConfig, TrajectoryFormat};

const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_VERIFICATION: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "wei-norman", version, about = "Wei-Norman hierarchies and integrators for dK/dt = M(t) K")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Derive the equation hierarchy for sl(N, C).
    Derive(DeriveArgs),
    /// Integrate a signal described by a configuration file.
    Integrate(IntegrateArgs),
    /// Run the seeded verification battery.
    Verify(VerifyArgs),
    /// Compare two trajectory JSON files.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EquationFormat {
    Plain,
    Latex,
    Json,
}

impl From<EquationFormat> for Format {
    fn from(f: EquationFormat) -> Self {
        match f {
            EquationFormat::Plain => Format::Plain,
            EquationFormat::Latex => Format::Latex,
            EquationFormat::Json => Format::Json,
        }
    }
}

#[derive(Args, Debug)]
struct DeriveArgs {
    /// Matrix dimension N >= 2.
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum, default_value = "plain")]
    format: EquationFormat,
    /// Row order inside each column block: ascending or descending.
    #[arg(long, default_value = "ascending")]
    ordering: RowOrder,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct IntegrateArgs {
    /// Run configuration (TOML, or JSON).
    #[arg(long)]
    config: PathBuf,
    /// Trajectory output; overrides the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trajectory format; inferred from the output extension by default.
    #[arg(long, value_enum)]
    format: Option<TrajectoryFormat>,
    /// Also integrate K' = M K directly and report the distance.
    #[arg(long)]
    check_oracle: bool,
    /// Write the oracle trajectory here (implies --check-oracle).
    #[arg(long)]
    oracle_out: Option<PathBuf>,
    /// Abort on chart breakdown instead of re-anchoring.
    #[arg(long)]
    no_reanchor: bool,
    #[arg(long)]
    tol_abs: Option<f64>,
    #[arg(long)]
    tol_rel: Option<f64>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Dimension or inclusive range, e.g. `3` or `2..5`.
    #[arg(long, default_value = "2..4", value_parser = parse_range)]
    n: (usize, usize),
    #[arg(long, default_value_t = 5)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON report output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run checks on one thread.
    #[arg(long)]
    sequential: bool,
    /// Swap two basis elements before checking; the battery must fail.
    #[arg(long, hide = true)]
    corrupt_ordering: bool,
}

#[derive(Args, Debug)]
struct CompareArgs {
    a: PathBuf,
    b: PathBuf,
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let num = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("`{x}`: {e}"));
    match s.split_once("..") {
        Some((lo, hi)) => Ok((num(lo)?, num(hi.trim_start_matches('='))?)),
        None => num(s).map(|n| (n, n)),
    }
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Failure { code: EXIT_VALIDATION, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Breakdown(_) | Error::StepUnderflow { .. } | Error::SingularBlock { .. } => EXIT_NUMERICAL,
            _ => EXIT_VALIDATION,
        };
        Failure { code, message: e.to_string() }
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::validation(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_derive(args: DeriveArgs) -> Result<(), Failure> {
    let schedule = derive_hierarchy(args.n, args.ordering)?;
    write_output(args.out.as_deref(), &emit(&schedule, args.format.into()))
}

fn export(traj: &Trajectory, format: TrajectoryFormat) -> Result<String, Failure> {
    Ok(match format {
        TrajectoryFormat::Json => traj.to_json()?,
        TrajectoryFormat::Csv => traj.to_csv()?,
    })
}

fn cmd_integrate(args: IntegrateArgs) -> Result<(), Failure> {
    let run = RunConfig::load(&args.config).map_err(Failure::validation)?;
    let mut config = run.integration.clone();
    if args.no_reanchor {
        config.reanchor = false;
    }
    if let Some(t) = args.tol_abs {
        config.tol_abs = t;
    }
    if let Some(t) = args.tol_rel {
        config.tol_rel = t;
    }
    let spec = run.signal_spec().map_err(Failure::validation)?;
    let signal = Signal::new(run.n, run.ordering, spec)?;
    let mut traj = match integrate_wn(&signal, &config) {
        Err(Error::Breakdown(report)) => {
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            return Err(Failure {
                code: EXIT_NUMERICAL,
                message: format!("chart breakdown at t = {} (stage {}); re-anchoring is off", report.time, report.stage),
            });
        }
        other => other?,
    };
    traj.seed = run.seed;

    let out = args.out.or(run.output.path.clone());
    let format = args
        .format
        .or(run.output.format)
        .unwrap_or_else(|| out.as_deref().map_or(TrajectoryFormat::Json, TrajectoryFormat::infer));
    write_output(out.as_deref(), &export(&traj, format)?)?;

    let last = traj.samples.last().expect("trajectory has samples");
    let mut summary = vec![
        format!("samples: {}", traj.samples.len()),
        format!("final time: {}", last.t),
        format!("final unitarity defect: {:e}", last.unitarity_defect),
        format!("max det defect: {:e}", traj.max_det_defect()),
        format!("chart switches: {}", traj.chart_switches.len()),
        format!("singularities: {}", traj.singularities.len()),
    ];
    for r in &traj.singularities {
        summary.push(format!("  breakdown at t = {} in stage {} (chart {})", r.time, r.stage, r.chart));
    }
    let oracle_out = args.oracle_out.or(run.output.oracle_path.clone());
    let mut oracle_failed = None;
    if args.check_oracle || oracle_out.is_some() {
        let direct = integrate_direct(&signal, &config.oracle())?;
        let metrics = compare(&traj, &direct)?;
        let bound = (50.0 * config.tol_abs.max(config.tol_rel)).max(1e-6);
        summary.push(format!("oracle max |K_wn - K_direct|_F: {:e} (bound {bound:e})", metrics.max_frobenius));
        summary.push(format!("oracle rms |K_wn - K_direct|_F: {:e}", metrics.rms_frobenius));
        if let Some(p) = &oracle_out {
            let format = TrajectoryFormat::infer(p);
            write_output(Some(p), &export(&direct, format)?)?;
        }
        // A NaN distance fails.
        if metrics.max_frobenius.is_nan() || metrics.max_frobenius >= bound {
            oracle_failed = Some(metrics.max_frobenius);
        }
    }
    let summary = summary.join("\n");
    if out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    match oracle_failed {
        Some(err) => Err(Failure {
            code: EXIT_VERIFICATION,
            message: format!("oracle distance {err:e} exceeds the bound"),
        }),
        None => Ok(()),
    }
}

fn cmd_verify(args: VerifyArgs) -> Result<(), Failure> {
    let opts = VerifyOptions {
        min_dim: args.n.0,
        max_dim: args.n.1,
        trials: args.trials,
        seed: args.seed,
        corrupt: args.corrupt_ordering,
        exec: if args.sequential { Execution::Sequential } else { Execution::Parallel },
        ..VerifyOptions::default()
    };
    let report = run_verification(&opts)?;
    for c in &report.checks {
        let trial = c.trial.map(|t| format!(" trial {t}")).unwrap_or_default();
        println!("{} {} N={}{trial}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.n, c.detail);
    }
    if let Some(p) = &args.out {
        write_output(Some(p), &report.to_json()?)?;
    }
    let failed = report.failures().count();
    println!("{} of {} checks passed", report.checks.len() - failed, report.checks.len());
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_VERIFICATION,
            message: format!("{failed} checks failed"),
        })
    }
}

fn load_trajectory(path: &Path) -> Result<Trajectory, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::validation(format!("cannot read {}: {e}", path.display())))?;
    Trajectory::from_json(&text).map_err(|e| Failure::validation(format!("{}: {e}", path.display())))
}

fn cmd_compare(args: CompareArgs) -> Result<(), Failure> {
    let metrics = compare(&load_trajectory(&args.a)?, &load_trajectory(&args.b)?)?;
    println!("{}", serde_json::to_string_pretty(&metrics).expect("metrics serialize"));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_VALIDATION) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Derive(a) => cmd_derive(a),
        Command::Integrate(a) => cmd_integrate(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Compare(a) => cmd_compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
