use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use racesat::detector::{analyze, Config};
use racesat::solver::Backend;

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Internal,
    External,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

/// Decide whether the loop marked `#pragma drs` has a data race on array
/// elements. Exit status: 0 no race, 1 race, 2 unsupported or error.
#[derive(Parser)]
#[command(name = "racesat", version)]
struct Args {
    /// C source file containing one `#pragma drs` loop.
    file: PathBuf,
    #[arg(long, value_enum, default_value = "internal")]
    backend: BackendArg,
    /// Solver command; `{file}` is replaced by a script path, otherwise the
    /// script is piped to standard input.
    #[arg(long, default_value = "z3 -in")]
    solver_cmd: String,
    /// Also bind variables initialized with constant expressions.
    #[arg(long)]
    const_fold: bool,
    /// Probe window for variables with unknown values.
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(i64).range(1..))]
    window: i64,
    /// Write one SMT-LIB script per access pair into this directory.
    #[arg(long, value_name = "DIR")]
    emit_smt: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Record compound assignments as writes only.
    #[arg(long)]
    paper_compat: bool,
    /// Solve every pair instead of stopping at the first race.
    #[arg(long)]
    full_report: bool,
    /// Candidate values the internal search may try per pair.
    #[arg(long)]
    budget: Option<u64>,
    /// External solver timeout in seconds.
    #[arg(long, default_value_t = 30.0)]
    timeout: f64,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let defaults = Config::default();
    let config = Config {
        backend: match args.backend {
            BackendArg::Internal => Backend::Internal,
            BackendArg::External => Backend::External,
        },
        solver_cmd: args.solver_cmd,
        const_fold: args.const_fold,
        window: args.window,
        budget: args.budget.unwrap_or(defaults.budget),
        timeout_ms: (args.timeout.max(0.0) * 1000.0) as u64,
        paper_compat: args.paper_compat,
        full_report: args.full_report,
        emit_smt: args.emit_smt,
    };
    match analyze(&args.file, &config) {
        Ok(report) => {
            match args.format {
                Format::Text => print!("{}", report.to_text()),
                Format::Json => println!("{}", report.to_json()),
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("racesat: {e}");
            ExitCode::from(2)
        }
    }
}
