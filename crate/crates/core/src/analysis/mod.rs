//! Program facts around the target loop: statically known scalar values,
//! the loop nest, and the array accesses in the loop body together with the
//! branch conditions guarding them.

mod accesses;
mod loops;
mod vars;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expr, Rel};

pub use accesses::collect_accesses;
pub use loops::{canonical_loop, collect_loops};
pub use vars::{declared_arrays, record_variables};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {reason}")]
pub struct Unsupported {
    pub line: usize,
    pub reason: String,
}

impl Unsupported {
    pub(crate) fn new(line: usize, reason: impl Into<String>) -> Self {
        Unsupported {
            line,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Value {
    Known(i64),
    Unknown,
}

/// Scalar variables visible at the target loop.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VarEnv {
    bindings: BTreeMap<String, Value>,
}

impl VarEnv {
    pub fn get(&self, name: &str) -> Option<Value> {
        self.bindings.get(name).copied()
    }

    pub fn known(&self, name: &str) -> Option<i64> {
        match self.get(name) {
            Some(Value::Known(v)) => Some(v),
            _ => None,
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.bindings.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Value)> {
        self.bindings.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Value) {
        self.bindings.insert(name.into(), value);
    }

    pub fn remove(&mut self, name: &str) -> Option<Value> {
        self.bindings.remove(name)
    }
}

impl FromIterator<(String, Value)> for VarEnv {
    fn from_iter<T: IntoIterator<Item = (String, Value)>>(iter: T) -> Self {
        VarEnv {
            bindings: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LoopRole {
    OuterSequential,
    ParallelTarget,
    InnerSequential,
}

/// A canonical counted loop `for (var = start; var REL bound; var += step)`.
///
/// The iteration domain is every `start + k*step` (k ≥ 0) for which
/// `var REL bound` holds; it may be empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopCtx {
    pub var: String,
    pub start: Expr<String>,
    pub bound: Expr<String>,
    pub rel: Rel,
    pub step: i64,
    pub role: LoopRole,
    pub line: usize,
}

impl LoopCtx {
    /// Inclusive `(lowest, highest)` values of the counter, as expressions.
    pub fn range(&self) -> (Expr<String>, Expr<String>) {
        use crate::expr::BinOp;
        let adjust = |e: &Expr<String>, op: BinOp| Expr::binary(op, e.clone(), Expr::Int(1));
        if self.step > 0 {
            let hi = match self.rel {
                Rel::Lt => adjust(&self.bound, BinOp::Sub),
                _ => self.bound.clone(),
            };
            (self.start.clone(), hi)
        } else {
            let lo = match self.rel {
                Rel::Gt => adjust(&self.bound, BinOp::Add),
                _ => self.bound.clone(),
            };
            (lo, self.start.clone())
        }
    }
}

impl fmt::Display for LoopCtx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "for ({} = {}; {} {} {}; {} += {})",
            self.var, self.start, self.var, self.rel, self.bound, self.var, self.step
        )
    }
}

/// Branch conditions that must all be true (nonzero) for an access to run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PathCond {
    pub atoms: Vec<Expr<String>>,
}

impl PathCond {
    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AccessKind {
    Read,
    Write,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessRecord {
    pub id: usize,
    pub array: String,
    pub indices: Vec<Expr<String>>,
    pub kind: AccessKind,
    pub path: PathCond,
    /// Enclosing loops, outermost first; always contains the parallel loop.
    pub loops: Vec<LoopCtx>,
    pub line: usize,
}

impl AccessRecord {
    pub fn target_loop(&self) -> &LoopCtx {
        self.loops
            .iter()
            .find(|l| l.role == LoopRole::ParallelTarget)
            .expect("access records always carry the target loop")
    }
}

impl fmt::Display for AccessRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            AccessKind::Read => "R",
            AccessKind::Write => "W",
        };
        write!(f, "{kind}{} {}", self.id, self.array)?;
        for idx in &self.indices {
            write!(f, "[{idx}]")?;
        }
        write!(f, " @{}", self.line)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Accesses {
    pub writes: Vec<AccessRecord>,
    pub reads: Vec<AccessRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnalysisOptions {
    /// Bind variables initialized with constant expressions over literals
    /// and known variables, not only plain literals.
    pub const_fold: bool,
    /// Record a compound assignment `a[e] op= v` as a read as well as a
    /// write. Turning this off records only the write.
    pub compound_reads: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            const_fold: false,
            compound_reads: true,
        }
    }
}
