//! Running an SMT solver as a child process.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use crate::encoding::ConstraintSystem;

use super::smtlib::emit_smtlib;
use super::{Assignment, Backend, Outcome, SolveResult};

/// Command line of the solver, split on whitespace. An argument equal to or
/// containing `{file}` is replaced by the path of a file holding the
/// script; without one, the script goes to standard input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverCommand(pub String);

impl Default for SolverCommand {
    fn default() -> Self {
        SolverCommand("z3 -in".to_string())
    }
}

impl fmt::Display for SolverCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

struct RawResult {
    outcome: Outcome,
    model: BTreeMap<String, i64>,
}

fn run(script: &str, cmd: &SolverCommand, timeout: Duration) -> Result<String, String> {
    let words: Vec<&str> = cmd.0.split_whitespace().collect();
    let Some((program, args)) = words.split_first() else {
        return Err("empty solver command".to_string());
    };
    let uses_file = args.iter().any(|a| a.contains("{file}"));
    let file = if uses_file {
        let mut f = tempfile::Builder::new()
            .suffix(".smt2")
            .tempfile()
            .map_err(|e| format!("cannot create script file: {e}"))?;
        f.write_all(script.as_bytes())
            .map_err(|e| format!("cannot write script file: {e}"))?;
        Some(f)
    } else {
        None
    };
    let mut command = Command::new(program);
    for a in args {
        match &file {
            Some(f) => command.arg(a.replace("{file}", &f.path().to_string_lossy())),
            None => command.arg(a),
        };
    }
    command
        .stdin(if uses_file { Stdio::null() } else { Stdio::piped() })
        .stdout(Stdio::piped())
        .stderr(Stdio::null());
    let mut child = command
        .spawn()
        .map_err(|e| format!("cannot start `{program}`: {e}"))?;
    if let Some(mut stdin) = child.stdin.take() {
        // A solver that exits early closes the pipe; its output decides.
        let _ = stdin.write_all(script.as_bytes());
    }
    let mut stdout = child.stdout.take().expect("stdout is piped");
    let reader = std::thread::spawn(move || {
        let mut out = String::new();
        let _ = stdout.read_to_string(&mut out);
        out
    });
    let status = child.wait_timeout(timeout).map_err(|e| format!("waiting for solver: {e}"))?;
    if status.is_none() {
        let _ = child.kill();
        let _ = child.wait();
        let _ = reader.join();
        return Err(format!("solver timed out after {:.1} s", timeout.as_secs_f64()));
    }
    reader.join().map_err(|_| "solver output reader panicked".to_string())
}

#[derive(Debug, Clone, PartialEq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn parse_sexps(text: &str) -> Vec<Sexp> {
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '(' => stack.push(Vec::new()),
            ')' => {
                if stack.len() > 1 {
                    let list = stack.pop().expect("checked length");
                    stack.last_mut().expect("root remains").push(Sexp::List(list));
                }
            }
            ';' => {
                while chars.peek().is_some_and(|c| *c != '\n') {
                    chars.next();
                }
            }
            '|' => {
                let mut s = String::new();
                for c in chars.by_ref() {
                    if c == '|' {
                        break;
                    }
                    s.push(c);
                }
                stack.last_mut().expect("root remains").push(Sexp::Atom(s));
            }
            '"' => {
                let mut s = String::new();
                for c in chars.by_ref() {
                    if c == '"' {
                        break;
                    }
                    s.push(c);
                }
                stack.last_mut().expect("root remains").push(Sexp::Atom(s));
            }
            c if c.is_whitespace() => {}
            c => {
                let mut s = String::from(c);
                while chars.peek().is_some_and(|c| !c.is_whitespace() && !"()|;".contains(*c)) {
                    s.push(chars.next().expect("peeked"));
                }
                stack.last_mut().expect("root remains").push(Sexp::Atom(s));
            }
        }
    }
    while stack.len() > 1 {
        let list = stack.pop().expect("checked length");
        stack.last_mut().expect("root remains").push(Sexp::List(list));
    }
    stack.pop().unwrap_or_default()
}

fn int_value(e: &Sexp) -> Option<i64> {
    match e {
        Sexp::Atom(a) => a.parse().ok(),
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(minus), x] if minus == "-" => int_value(x)?.checked_neg(),
            _ => None,
        },
    }
}

fn collect_defs(e: &Sexp, out: &mut BTreeMap<String, i64>) {
    if let Sexp::List(items) = e {
        if let [Sexp::Atom(kw), Sexp::Atom(name), Sexp::List(params), Sexp::Atom(sort), value] = items.as_slice() {
            if kw == "define-fun" && params.is_empty() && sort == "Int" {
                if let Some(v) = int_value(value) {
                    out.insert(name.clone(), v);
                }
                return;
            }
        }
        for item in items {
            collect_defs(item, out);
        }
    }
}

/// Integer constants of a `get-model` response, by name.
pub fn parse_model(text: &str) -> BTreeMap<String, i64> {
    let mut out = BTreeMap::new();
    for e in parse_sexps(text) {
        collect_defs(&e, &mut out);
    }
    out
}

fn interpret(output: &str) -> RawResult {
    let mut lines = output.lines().map(str::trim).filter(|l| !l.is_empty());
    let first = lines.next().unwrap_or("");
    let rest: Vec<&str> = lines.collect();
    match first {
        "sat" => RawResult {
            outcome: Outcome::Sat(None),
            model: parse_model(&rest.join("\n")),
        },
        "unsat" => RawResult {
            outcome: Outcome::Unsat { exhaustive: true },
            model: BTreeMap::new(),
        },
        _ => RawResult {
            outcome: Outcome::Unknown(if output.trim().is_empty() {
                "solver produced no output".to_string()
            } else {
                output.trim().to_string()
            }),
            model: BTreeMap::new(),
        },
    }
}

fn solve_script(script: &str, cmd: &SolverCommand, timeout: Duration) -> (RawResult, Duration) {
    let started = Instant::now();
    let raw = match run(script, cmd, timeout) {
        Ok(output) => interpret(&output),
        Err(reason) => RawResult {
            outcome: Outcome::Unknown(reason),
            model: BTreeMap::new(),
        },
    };
    (raw, started.elapsed())
}

/// Runs the solver on a script. A `sat` answer carries no witness here; the
/// model is only mapped back to symbols by [`solve_system_external`].
pub fn solve_external(script: &str, cmd: &SolverCommand, timeout: Duration) -> SolveResult {
    let (raw, elapsed) = solve_script(script, cmd, timeout);
    SolveResult {
        outcome: raw.outcome,
        backend: Backend::External,
        elapsed,
    }
}

/// Emits the system, runs the solver and reads back a witness when the
/// model covers every declared symbol.
pub fn solve_system_external(cs: &ConstraintSystem, cmd: &SolverCommand, timeout: Duration) -> SolveResult {
    let (raw, elapsed) = solve_script(&emit_smtlib(cs), cmd, timeout);
    let outcome = match raw.outcome {
        Outcome::Sat(_) => {
            let names = cs.names();
            let witness: Option<Assignment> = names
                .iter()
                .map(|(name, sym)| raw.model.get(name).map(|v| (sym.clone(), *v)))
                .collect();
            Outcome::Sat(witness)
        }
        other => other,
    };
    SolveResult {
        outcome,
        backend: Backend::External,
        elapsed,
    }
}
