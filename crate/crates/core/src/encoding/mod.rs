//! Race constraints: for a pair of accesses, a conjunction of integer atoms
//! that is satisfiable exactly when two distinct iterations of the parallel
//! loop can reach both accesses with equal subscripts.

mod build;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expr, Rel};

pub use build::{build_pair_constraint, build_pair_constraint_with_ids, encode_access_copy, enumerate_pairs};

/// A constraint variable. Per-copy symbols carry the copy id; shared ones
/// (outer counters, program variables) do not.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Symbol {
    pub base: String,
    pub copy: Option<u32>,
}

impl Symbol {
    pub fn shared(base: impl Into<String>) -> Self {
        Symbol {
            base: base.into(),
            copy: None,
        }
    }

    pub fn copy(base: impl Into<String>, id: u32) -> Self {
        Symbol {
            base: base.into(),
            copy: Some(id),
        }
    }

    /// Subscript value of dimension `dim` (1-based) for one access copy.
    /// The dot keeps these apart from any C identifier.
    pub fn index(dim: usize, id: u32) -> Self {
        Symbol::copy(format!("index.{dim}"), id)
    }

    pub fn is_index(&self) -> bool {
        self.base.starts_with("index.")
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.copy {
            Some(id) => write!(f, "{}__{id}", self.base),
            None => f.write_str(&self.base),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Atom<V = Symbol> {
    Cmp { lhs: Expr<V>, rel: Rel, rhs: Expr<V> },
    /// `expr` is a multiple of `modulus` (which is positive).
    Divisible { expr: Expr<V>, modulus: i64 },
}

impl<V> Atom<V> {
    pub fn cmp(lhs: Expr<V>, rel: Rel, rhs: Expr<V>) -> Self {
        Atom::Cmp { lhs, rel, rhs }
    }

    pub fn visit_vars<'a>(&'a self, f: &mut impl FnMut(&'a V)) {
        match self {
            Atom::Cmp { lhs, rhs, .. } => {
                lhs.visit_vars(f);
                rhs.visit_vars(f);
            }
            Atom::Divisible { expr, .. } => expr.visit_vars(f),
        }
    }

    pub fn vars(&self) -> Vec<&V> {
        let mut out = Vec::new();
        self.visit_vars(&mut |v| out.push(v));
        out
    }

    pub fn map_vars<W>(&self, f: &mut impl FnMut(&V) -> W) -> Atom<W> {
        match self {
            Atom::Cmp { lhs, rel, rhs } => Atom::Cmp {
                lhs: lhs.map_vars(f),
                rel: *rel,
                rhs: rhs.map_vars(f),
            },
            Atom::Divisible { expr, modulus } => Atom::Divisible {
                expr: expr.map_vars(f),
                modulus: *modulus,
            },
        }
    }
}

impl<V: fmt::Display> fmt::Display for Atom<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Cmp { lhs, rel, rhs } => write!(f, "{lhs} {rel} {rhs}"),
            Atom::Divisible { expr, modulus } => write!(f, "divisible({expr}, {modulus})"),
        }
    }
}

/// Values a symbol can take, as far as the search is concerned. The atoms
/// of the system always restate these facts, so a domain only narrows the
/// search and never adds meaning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    /// Inclusive bounds of a loop counter, possibly over other symbols.
    Range { lo: Expr<Symbol>, hi: Expr<Symbol> },
    /// Determined by other symbols (subscript values, known variables).
    Defined(Expr<Symbol>),
    /// No information (variables with unknown values).
    Free,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolDecl {
    pub symbol: Symbol,
    pub domain: Domain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DepClass {
    /// Write paired with write.
    Waw,
    /// Write paired with read.
    Raw,
}

impl fmt::Display for DepClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DepClass::Waw => "WAW",
            DepClass::Raw => "RAW",
        })
    }
}

/// Which accesses a system describes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairMeta {
    pub array: String,
    pub first_id: usize,
    pub second_id: usize,
    pub first_line: usize,
    pub second_line: usize,
    pub class: DepClass,
    /// The two copies of the parallel loop counter.
    pub parallel: (Symbol, Symbol),
}

impl fmt::Display for PairMeta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} #{} (line {}) / #{} (line {})",
            self.class, self.array, self.first_id, self.first_line, self.second_id, self.second_line
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("accesses to different arrays `{0}` and `{1}` cannot be paired")]
    DifferentArrays(String, String),
    #[error("`{array}` is subscripted with {first} and {second} dimensions")]
    DimensionMismatch { array: String, first: usize, second: usize },
    #[error("`{0}` is not a loop counter or a recorded variable")]
    Undeclared(String),
    #[error("neither access is a write")]
    NoWrite,
    #[error("both copies use id {0}")]
    SameCopyId(u32),
    #[error("symbol `{0}` is used but not declared")]
    Dangling(String),
    #[error("two symbols render as `{0}`")]
    NameClash(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSystem {
    pub symbols: Vec<SymbolDecl>,
    pub atoms: Vec<Atom>,
    pub meta: PairMeta,
}

impl ConstraintSystem {
    pub fn domain(&self, s: &Symbol) -> Option<&Domain> {
        self.symbols.iter().find(|d| &d.symbol == s).map(|d| &d.domain)
    }

    /// Rendered name of every declared symbol.
    pub fn names(&self) -> BTreeMap<String, Symbol> {
        self.symbols
            .iter()
            .map(|d| (d.symbol.to_string(), d.symbol.clone()))
            .collect()
    }

    /// Checks that every symbol used is declared, that rendered names are
    /// unique and that the parallel copies differ.
    pub fn validate(&self) -> Result<(), EncodeError> {
        let declared: BTreeSet<&Symbol> = self.symbols.iter().map(|d| &d.symbol).collect();
        let mut names = BTreeSet::new();
        for d in &self.symbols {
            if !names.insert(d.symbol.to_string()) {
                return Err(EncodeError::NameClash(d.symbol.to_string()));
            }
        }
        let check = |s: &Symbol| {
            if declared.contains(s) {
                Ok(())
            } else {
                Err(EncodeError::Dangling(s.to_string()))
            }
        };
        for atom in &self.atoms {
            for s in atom.vars() {
                check(s)?;
            }
        }
        for d in &self.symbols {
            match &d.domain {
                Domain::Range { lo, hi } => {
                    for s in lo.vars().into_iter().chain(hi.vars()) {
                        check(s)?;
                    }
                }
                Domain::Defined(e) => {
                    for s in e.vars() {
                        check(s)?;
                    }
                }
                Domain::Free => {}
            }
        }
        let (p1, p2) = &self.meta.parallel;
        if p1 == p2 {
            return Err(EncodeError::SameCopyId(p1.copy.unwrap_or(0)));
        }
        check(p1)?;
        check(p2)
    }

    /// The same system without the atoms fixing known variables; those
    /// variables become free.
    pub fn without_known_values(&self) -> ConstraintSystem {
        let known: BTreeSet<Symbol> = self
            .symbols
            .iter()
            .filter(|d| d.symbol.copy.is_none() && matches!(d.domain, Domain::Defined(Expr::Int(_))))
            .map(|d| d.symbol.clone())
            .collect();
        let atoms = self
            .atoms
            .iter()
            .filter(|a| {
                !matches!(a, Atom::Cmp { lhs: Expr::Var(s), rel: Rel::Eq, rhs: Expr::Int(_) } if known.contains(s))
            })
            .cloned()
            .collect();
        let symbols = self
            .symbols
            .iter()
            .map(|d| SymbolDecl {
                symbol: d.symbol.clone(),
                domain: if known.contains(&d.symbol) {
                    Domain::Free
                } else {
                    d.domain.clone()
                },
            })
            .collect();
        ConstraintSystem {
            symbols,
            atoms,
            meta: self.meta.clone(),
        }
    }
}

impl fmt::Display for ConstraintSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "; {}", self.meta)?;
        for (i, atom) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(" ∧\n")?;
            }
            write!(f, "  {atom}")?;
        }
        Ok(())
    }
}
