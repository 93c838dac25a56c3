use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use racesat::bench::{run_corpus, Manifest};
use racesat::detector::Config;
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

/// Run the detector over a labeled corpus and report confusion counts.
#[derive(Parser)]
#[command(name = "racesat-bench", version)]
struct Args {
    /// JSON manifest: an array of {path, expected, tag} records.
    manifest: PathBuf,
    #[arg(long, value_enum, default_value = "internal")]
    backend: BackendArg,
    #[arg(long, default_value = "z3 -in")]
    solver_cmd: String,
    #[arg(long)]
    const_fold: bool,
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(i64).range(1..))]
    window: i64,
    #[arg(long)]
    paper_compat: bool,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
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
    let manifest = match Manifest::load(&args.manifest) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("racesat-bench: {e}");
            return ExitCode::from(2);
        }
    };
    let config = Config {
        backend: match args.backend {
            BackendArg::Internal => Backend::Internal,
            BackendArg::External => Backend::External,
        },
        solver_cmd: args.solver_cmd,
        const_fold: args.const_fold,
        window: args.window,
        timeout_ms: (args.timeout.max(0.0) * 1000.0) as u64,
        paper_compat: args.paper_compat,
        ..Config::default()
    };
    let summary = run_corpus(&manifest, &config);
    match args.format {
        Format::Text => print!("{}", summary.to_table()),
        Format::Json => println!("{}", summary.to_json()),
    }
    ExitCode::SUCCESS
}
