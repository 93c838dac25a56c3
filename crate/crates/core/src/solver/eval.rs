//! Concrete evaluation with C99 integer semantics over unbounded-in-spirit
//! 64-bit integers: overflow is reported rather than wrapped.

use std::fmt;

use thiserror::Error;

use crate::encoding::{Atom, Symbol};
use crate::expr::{BinOp, Expr, UnOp};

use super::Assignment;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("arithmetic overflow")]
    Overflow,
    #[error("no value for `{0}`")]
    Unbound(String),
}

/// Evaluates `e` with variable values supplied by `lookup`.
///
/// `/` and `%` truncate toward zero, so `(x / y) * y + x % y == x`.
/// Comparisons and logical operators yield 0 or 1; `&&` and `||`
/// short-circuit like C.
pub fn eval_with<V, F>(e: &Expr<V>, lookup: &F) -> Result<i64, EvalError>
where
    V: fmt::Display,
    F: Fn(&V) -> Option<i64>,
{
    match e {
        Expr::Int(n) => Ok(*n),
        Expr::Var(v) => lookup(v).ok_or_else(|| EvalError::Unbound(v.to_string())),
        Expr::Unary(UnOp::Neg, inner) => eval_with(inner, lookup)?
            .checked_neg()
            .ok_or(EvalError::Overflow),
        Expr::Unary(UnOp::Not, inner) => Ok((eval_with(inner, lookup)? == 0) as i64),
        Expr::Binary(BinOp::And, l, r) => {
            if eval_with(l, lookup)? == 0 {
                return Ok(0);
            }
            Ok((eval_with(r, lookup)? != 0) as i64)
        }
        Expr::Binary(BinOp::Or, l, r) => {
            if eval_with(l, lookup)? != 0 {
                return Ok(1);
            }
            Ok((eval_with(r, lookup)? != 0) as i64)
        }
        Expr::Binary(op, l, r) => {
            let a = eval_with(l, lookup)?;
            let b = eval_with(r, lookup)?;
            apply_binop(*op, a, b)
        }
    }
}

pub fn apply_binop(op: BinOp, a: i64, b: i64) -> Result<i64, EvalError> {
    let checked = |v: Option<i64>| v.ok_or(EvalError::Overflow);
    match op {
        BinOp::Add => checked(a.checked_add(b)),
        BinOp::Sub => checked(a.checked_sub(b)),
        BinOp::Mul => checked(a.checked_mul(b)),
        BinOp::Div if b == 0 => Err(EvalError::DivisionByZero),
        BinOp::Rem if b == 0 => Err(EvalError::DivisionByZero),
        BinOp::Div => checked(a.checked_div(b)),
        BinOp::Rem => checked(a.checked_rem(b)),
        BinOp::Lt => Ok((a < b) as i64),
        BinOp::Le => Ok((a <= b) as i64),
        BinOp::Gt => Ok((a > b) as i64),
        BinOp::Ge => Ok((a >= b) as i64),
        BinOp::Eq => Ok((a == b) as i64),
        BinOp::Ne => Ok((a != b) as i64),
        BinOp::And => Ok((a != 0 && b != 0) as i64),
        BinOp::Or => Ok((a != 0 || b != 0) as i64),
    }
}

/// Evaluates a symbolic expression under a (partial) assignment.
pub fn eval_expr(e: &Expr<Symbol>, a: &Assignment) -> Result<i64, EvalError> {
    eval_with(e, &|s: &Symbol| a.get(s).copied())
}

/// Truth value of an atom. Evaluation errors make the atom false.
pub fn atom_holds<V, F>(atom: &Atom<V>, lookup: &F) -> bool
where
    V: fmt::Display,
    F: Fn(&V) -> Option<i64>,
{
    match atom {
        Atom::Cmp { lhs, rel, rhs } => match (eval_with(lhs, lookup), eval_with(rhs, lookup)) {
            (Ok(l), Ok(r)) => rel.holds(l, r),
            _ => false,
        },
        Atom::Divisible { expr, modulus } => match eval_with(expr, lookup) {
            Ok(v) => *modulus != 0 && v % modulus == 0,
            Err(_) => false,
        },
    }
}
