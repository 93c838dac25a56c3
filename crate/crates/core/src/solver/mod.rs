//! Satisfiability of race constraints, by bounded model search or by an
//! external SMT solver.

mod bounded;
pub mod eval;
mod external;
mod smtlib;

use std::collections::BTreeMap;
use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::encoding::{ConstraintSystem, Symbol};

pub use bounded::{solve_bounded, BoundedConfig};
pub use eval::{atom_holds, eval_expr, EvalError};
pub use external::{parse_model, solve_external, solve_system_external, SolverCommand};
pub use smtlib::{emit_smtlib, smt_term};

pub type Assignment = BTreeMap<Symbol, i64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Internal,
    External,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Internal => "internal",
            Backend::External => "external",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    /// Satisfiable. The witness is missing only when an external solver
    /// reported `sat` without a readable model.
    Sat(Option<Assignment>),
    /// Unsatisfiable. `exhaustive` is false when the search only covered a
    /// window of some unbounded symbol.
    Unsat { exhaustive: bool },
    Unknown(String),
}

impl Outcome {
    pub fn is_sat(&self) -> bool {
        matches!(self, Outcome::Sat(_))
    }

    pub fn is_unsat(&self) -> bool {
        matches!(self, Outcome::Unsat { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveResult {
    pub outcome: Outcome,
    pub backend: Backend,
    pub elapsed: Duration,
}

/// Backend choice plus the knobs of both backends.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub backend: Backend,
    pub bounded: BoundedConfig,
    pub command: SolverCommand,
    pub timeout: Duration,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            backend: Backend::Internal,
            bounded: BoundedConfig::default(),
            command: SolverCommand::default(),
            timeout: Duration::from_secs(30),
        }
    }
}

pub fn solve(cs: &ConstraintSystem, config: &SolverConfig) -> SolveResult {
    match config.backend {
        Backend::Internal => solve_bounded(cs, &config.bounded),
        Backend::External => solve_system_external(cs, &config.command, config.timeout),
    }
}

/// Checks a witness against every atom of the system.
pub fn witness_holds(cs: &ConstraintSystem, witness: &Assignment) -> bool {
    let lookup = |s: &Symbol| witness.get(s).copied();
    cs.atoms.iter().all(|a| atom_holds(a, &lookup))
}
