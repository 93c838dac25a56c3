//! SMT-LIB2 rendering of constraint systems.
//!
//! SMT-LIB `div` and `mod` are Euclidean, so C's truncating operators are
//! rebuilt from them by case split on the sign of the dividend. Every atom
//! is also guarded by the definedness of its subterms: a division by zero
//! makes the atom false, as in the evaluator.

use std::fmt::Write as _;

use crate::encoding::{Atom, ConstraintSystem, Symbol};
use crate::expr::{BinOp, Expr, Rel, UnOp};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Sort {
    Int,
    Bool,
}

struct Term {
    text: String,
    sort: Sort,
}

impl Term {
    fn int(text: String) -> Term {
        Term { text, sort: Sort::Int }
    }

    fn bool(text: String) -> Term {
        Term { text, sort: Sort::Bool }
    }

    fn as_int(&self) -> String {
        match self.sort {
            Sort::Int => self.text.clone(),
            Sort::Bool => format!("(ite {} 1 0)", self.text),
        }
    }

    fn as_bool(&self) -> String {
        match self.sort {
            Sort::Bool => self.text.clone(),
            Sort::Int => format!("(distinct {} 0)", self.text),
        }
    }
}

fn symbol_name(s: &Symbol) -> String {
    format!("|{s}|")
}

fn int_literal(n: i64) -> String {
    if n < 0 {
        format!("(- {})", n.unsigned_abs())
    } else {
        n.to_string()
    }
}

fn rel_op(rel: Rel) -> &'static str {
    match rel {
        Rel::Eq => "=",
        Rel::Ne => "distinct",
        Rel::Lt => "<",
        Rel::Le => "<=",
        Rel::Gt => ">",
        Rel::Ge => ">=",
    }
}

/// Renders `e` with C semantics.
fn term(e: &Expr<Symbol>) -> Term {
    match e {
        Expr::Int(n) => Term::int(int_literal(*n)),
        Expr::Var(s) => Term::int(symbol_name(s)),
        Expr::Unary(UnOp::Neg, x) => Term::int(format!("(- {})", term(x).as_int())),
        Expr::Unary(UnOp::Not, x) => Term::bool(format!("(not {})", term(x).as_bool())),
        Expr::Binary(op, l, r) => {
            let (l, r) = (term(l), term(r));
            match op {
                BinOp::Add => Term::int(format!("(+ {} {})", l.as_int(), r.as_int())),
                BinOp::Sub => Term::int(format!("(- {} {})", l.as_int(), r.as_int())),
                BinOp::Mul => Term::int(format!("(* {} {})", l.as_int(), r.as_int())),
                BinOp::Div | BinOp::Rem => {
                    let f = if *op == BinOp::Div { "div" } else { "mod" };
                    Term::int(format!(
                        "(let ((a! {a}) (b! {b})) (ite (>= a! 0) ({f} a! b!) (- ({f} (- a!) b!))))",
                        a = l.as_int(),
                        b = r.as_int()
                    ))
                }
                BinOp::And => Term::bool(format!("(and {} {})", l.as_bool(), r.as_bool())),
                BinOp::Or => Term::bool(format!("(or {} {})", l.as_bool(), r.as_bool())),
                cmp => {
                    let rel = cmp.as_rel().expect("remaining operators are comparisons");
                    Term::bool(format!("({} {} {})", rel_op(rel), l.as_int(), r.as_int()))
                }
            }
        }
    }
}

/// Condition under which evaluating `e` cannot divide by zero; `None`
/// means always defined.
fn defined(e: &Expr<Symbol>) -> Option<String> {
    let both = |a: Option<String>, b: Option<String>| match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => Some(format!("(and {a} {b})")),
    };
    match e {
        Expr::Int(_) | Expr::Var(_) => None,
        Expr::Unary(_, x) => defined(x),
        Expr::Binary(op, l, r) => match op {
            BinOp::Div | BinOp::Rem => both(
                both(defined(l), defined(r)),
                Some(format!("(distinct {} 0)", term(r).as_int())),
            ),
            // The right operand is only evaluated when the left one does
            // not decide the result.
            BinOp::And => both(
                defined(l),
                defined(r).map(|d| format!("(or (not {}) {d})", term(l).as_bool())),
            ),
            BinOp::Or => both(defined(l), defined(r).map(|d| format!("(or {} {d})", term(l).as_bool()))),
            _ => both(defined(l), defined(r)),
        },
    }
}

fn guarded(guard: Option<String>, body: String) -> String {
    match guard {
        Some(g) => format!("(and {g} {body})"),
        None => body,
    }
}

/// Boolean SMT-LIB term for an atom.
pub fn smt_term(atom: &Atom) -> String {
    match atom {
        Atom::Cmp { lhs, rel, rhs } => {
            let guard = match (defined(lhs), defined(rhs)) {
                (None, x) | (x, None) => x,
                (Some(a), Some(b)) => Some(format!("(and {a} {b})")),
            };
            guarded(
                guard,
                format!("({} {} {})", rel_op(*rel), term(lhs).as_int(), term(rhs).as_int()),
            )
        }
        Atom::Divisible { expr, modulus } => guarded(
            defined(expr),
            format!("(= (mod {} {}) 0)", term(expr).as_int(), modulus),
        ),
    }
}

/// Complete script: declarations, one assertion per atom, `check-sat` and
/// `get-model`. Output depends only on the system.
pub fn emit_smtlib(cs: &ConstraintSystem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "; {}", cs.meta);
    out.push_str("(set-logic QF_NIA)\n");
    for d in &cs.symbols {
        let _ = writeln!(out, "(declare-const {} Int)", symbol_name(&d.symbol));
    }
    for atom in &cs.atoms {
        let _ = writeln!(out, "; {atom}");
        let _ = writeln!(out, "(assert {})", smt_term(atom));
    }
    out.push_str("(check-sat)\n(get-model)\n");
    out
}
