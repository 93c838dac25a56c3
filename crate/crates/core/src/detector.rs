//! End-to-end analysis of one file and the report it produces.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{collect_accesses, record_variables, AnalysisOptions};
use crate::encoding::{build_pair_constraint, enumerate_pairs, ConstraintSystem, PairMeta};
use crate::frontend::{self, FrontendError};
use crate::solver::{self, emit_smtlib, Backend, BoundedConfig, Outcome, SolverCommand, SolverConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Config {
    pub backend: Backend,
    pub solver_cmd: String,
    pub const_fold: bool,
    pub window: i64,
    pub budget: u64,
    pub timeout_ms: u64,
    /// Record compound assignments as writes only.
    pub paper_compat: bool,
    /// Keep solving after the first satisfiable pair.
    pub full_report: bool,
    /// Directory receiving one SMT-LIB script per pair.
    pub emit_smt: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            backend: Backend::Internal,
            solver_cmd: SolverCommand::default().0,
            const_fold: false,
            window: 64,
            budget: BoundedConfig::default().budget,
            timeout_ms: 30_000,
            paper_compat: false,
            full_report: false,
            emit_smt: None,
        }
    }
}

impl Config {
    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            backend: self.backend,
            bounded: BoundedConfig {
                window: self.window,
                budget: self.budget,
                ..BoundedConfig::default()
            },
            command: SolverCommand(self.solver_cmd.clone()),
            timeout: Duration::from_millis(self.timeout_ms),
        }
    }

    pub fn analysis(&self) -> AnalysisOptions {
        AnalysisOptions {
            const_fold: self.const_fold,
            compound_reads: !self.paper_compat,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub pair: PairMeta,
    /// Symbol values by rendered name; empty when the solver gave no model.
    pub values: BTreeMap<String, i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Race { witnesses: Vec<Witness> },
    NoRace { incomplete: bool },
    Unsupported { reason: String },
}

impl Verdict {
    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::NoRace { .. } => 0,
            Verdict::Race { .. } => 1,
            Verdict::Unsupported { .. } => 2,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Race { .. } => "race",
            Verdict::NoRace { .. } => "no-race",
            Verdict::Unsupported { .. } => "unsupported",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PairStatus {
    Sat,
    Unsat { exhaustive: bool },
    Unknown { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairReport {
    pub pair: PairMeta,
    pub status: PairStatus,
    pub backend: Backend,
    pub elapsed_us: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub file: String,
    /// Line of the target loop, when it was found.
    pub loop_line: Option<usize>,
    pub verdict: Verdict,
    pub pairs: Vec<PairReport>,
    pub config: Config,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        self.verdict.exit_code()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn from_json(text: &str) -> Result<Report, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let place = match self.loop_line {
            Some(l) => format!("{}:{l}", self.file),
            None => self.file.clone(),
        };
        match &self.verdict {
            Verdict::Race { witnesses } => {
                let _ = writeln!(out, "{place}: data race");
                for w in witnesses {
                    let _ = write!(out, "  {}", w.pair);
                    if !w.values.is_empty() {
                        let values: Vec<String> = w.values.iter().map(|(k, v)| format!("{k}={v}")).collect();
                        let _ = write!(out, ": {}", values.join(" "));
                    }
                    out.push('\n');
                }
            }
            Verdict::NoRace { incomplete } => {
                let _ = write!(out, "{place}: no data race");
                if *incomplete {
                    out.push_str(" (unknown values were only probed in a window)");
                }
                out.push('\n');
            }
            Verdict::Unsupported { reason } => {
                let _ = writeln!(out, "{place}: unsupported: {reason}");
            }
        }
        if !self.pairs.is_empty() {
            let _ = writeln!(out, "  {} pair(s) solved with the {} backend", self.pairs.len(), self.config.backend);
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: {source}")]
    Frontend {
        file: String,
        #[source]
        source: FrontendError,
    },
}

/// Constraint systems of every candidate pair of the file's target loop,
/// or the reason the loop is out of scope.
pub struct Prepared {
    pub loop_line: usize,
    pub systems: Vec<ConstraintSystem>,
}

/// Runs the pipeline up to constraint construction.
pub fn prepare(source: &str, config: &Config) -> Result<Result<Prepared, (Option<usize>, String)>, FrontendError> {
    let (expanded, _) = match frontend::expand_macros(source) {
        Ok(x) => x,
        Err(FrontendError::Unsupported { line, what }) => {
            return Ok(Err((None, format!("line {line}: unsupported construct: {what}"))))
        }
        Err(e) => return Err(e),
    };
    let ast = frontend::parse(&expanded)?;
    let target = frontend::locate_target_loop(&ast)?;
    let loop_line = target.resolve(&ast).line;
    let opts = config.analysis();
    let env = record_variables(&ast, &target, opts.const_fold);
    let accesses = match collect_accesses(&ast, &target, &env, opts) {
        Ok(a) => a,
        Err(u) => return Ok(Err((Some(loop_line), u.to_string()))),
    };
    let mut systems = Vec::new();
    for (a, b, _) in enumerate_pairs(&accesses.writes, &accesses.reads) {
        match build_pair_constraint(a, b, &env) {
            Ok(cs) => systems.push(cs),
            Err(e) => return Ok(Err((Some(loop_line), e.to_string()))),
        }
    }
    Ok(Ok(Prepared { loop_line, systems }))
}

fn write_scripts(dir: &Path, systems: &[ConstraintSystem]) -> Result<(), DetectError> {
    let io = |source| DetectError::Io {
        path: dir.display().to_string(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    for cs in systems {
        let name = format!("pair_{}_{}.smt2", cs.meta.first_id, cs.meta.second_id);
        std::fs::write(dir.join(name), emit_smtlib(cs)).map_err(io)?;
    }
    Ok(())
}

/// Analyzes source text; `file` is only used for messages.
pub fn analyze_source(file: &str, source: &str, config: &Config) -> Result<Report, DetectError> {
    let report = |loop_line, verdict, pairs| Report {
        file: file.to_string(),
        loop_line,
        verdict,
        pairs,
        config: config.clone(),
    };
    let prepared = match prepare(source, config) {
        Ok(Ok(p)) => p,
        Ok(Err((line, reason))) => return Ok(report(line, Verdict::Unsupported { reason }, Vec::new())),
        Err(source) => {
            return Err(DetectError::Frontend {
                file: file.to_string(),
                source,
            })
        }
    };
    if let Some(dir) = &config.emit_smt {
        write_scripts(dir, &prepared.systems)?;
    }

    let solver_config = config.solver();
    let mut pairs = Vec::new();
    let mut witnesses = Vec::new();
    let mut unknown = None;
    let mut incomplete = false;
    for cs in &prepared.systems {
        let result = solver::solve(cs, &solver_config);
        let status = match &result.outcome {
            Outcome::Sat(model) => {
                let values = model
                    .iter()
                    .flatten()
                    .map(|(s, v)| (s.to_string(), *v))
                    .collect();
                witnesses.push(Witness {
                    pair: cs.meta.clone(),
                    values,
                });
                PairStatus::Sat
            }
            Outcome::Unsat { exhaustive } => {
                incomplete |= !exhaustive;
                PairStatus::Unsat {
                    exhaustive: *exhaustive,
                }
            }
            Outcome::Unknown(reason) => {
                unknown.get_or_insert_with(|| format!("solver gave no answer for {}: {reason}", cs.meta));
                PairStatus::Unknown { reason: reason.clone() }
            }
        };
        pairs.push(PairReport {
            pair: cs.meta.clone(),
            status,
            backend: result.backend,
            elapsed_us: result.elapsed.as_micros().try_into().unwrap_or(u64::MAX),
        });
        if !witnesses.is_empty() && !config.full_report {
            break;
        }
    }
    let verdict = if !witnesses.is_empty() {
        Verdict::Race { witnesses }
    } else if let Some(reason) = unknown {
        Verdict::Unsupported { reason }
    } else {
        Verdict::NoRace { incomplete }
    };
    Ok(report(Some(prepared.loop_line), verdict, pairs))
}

pub fn analyze(path: &Path, config: &Config) -> Result<Report, DetectError> {
    let source = std::fs::read_to_string(path).map_err(|source| DetectError::Io {
        path: path.display().to_string(),
        source,
    })?;
    analyze_source(&path.display().to_string(), &source, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn verdict(src: &str) -> Verdict {
        analyze_source("t.c", src, &Config::default()).unwrap().verdict
    }

    #[test]
    fn listing1_race_at_fourteen() {
        let v = verdict("int arr[100];\n#pragma omp parallel for\n#pragma drs\nfor(int i = 0; i < 10; i++){\n  arr[i%6+6*i] = arr[2*i];\n}");
        let Verdict::Race { witnesses } = v else { panic!("{v:?}") };
        assert_eq!(witnesses[0].values["index.1__1"], 14);
        assert_eq!(witnesses[0].values["index.1__2"], 14);
    }

    #[test]
    fn calls_are_unsupported() {
        let v = verdict("int a[10];\n#pragma drs\nfor (int i = 0; i < 10; i++) { foo(i); }");
        assert!(matches!(v, Verdict::Unsupported { ref reason } if reason.contains("foo")));
        assert_eq!(v.exit_code(), 2);
    }

    #[test]
    fn function_like_macro_is_unsupported() {
        let v = verdict("#define SQ(x) ((x)*(x))\nint a[10];\n#pragma drs\nfor (int i = 0; i < 3; i++) { a[i] = 0; }");
        assert!(matches!(v, Verdict::Unsupported { .. }));
    }

    #[test]
    fn missing_marker_is_an_error() {
        let err = analyze_source("t.c", "int x;", &Config::default()).unwrap_err();
        assert!(err.to_string().contains("no #pragma drs found"));
    }

    #[test]
    fn empty_body_has_no_race() {
        assert_eq!(
            verdict("#pragma drs\nfor (int i = 0; i < 10; i++) { }"),
            Verdict::NoRace { incomplete: false }
        );
    }

    #[test]
    fn full_report_solves_every_pair() {
        let src = "int a[10];\n#pragma drs\nfor (int i = 0; i < 9; i++) { a[0] = a[i]; }";
        let short = analyze_source("t.c", src, &Config::default()).unwrap();
        let full = analyze_source(
            "t.c",
            src,
            &Config {
                full_report: true,
                ..Config::default()
            },
        )
        .unwrap();
        assert_eq!(short.pairs.len(), 1);
        assert_eq!(full.pairs.len(), 2);
        assert_eq!(short.verdict.label(), "race");
        assert_eq!(full.verdict.label(), "race");
    }

    #[test]
    fn json_round_trip() {
        let src = "int arr[100];\n#pragma drs\nfor(int i = 0; i < 10; i++){ arr[i%6+6*i] = arr[2*i]; }";
        let report = analyze_source("t.c", src, &Config::default()).unwrap();
        let back = Report::from_json(&report.to_json()).unwrap();
        assert_eq!(back, report);
        assert!(report.to_text().contains("data race"));
    }
}
