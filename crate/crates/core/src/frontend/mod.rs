//! Source text to program model: macro expansion, parsing, and location of
//! the loop marked with `#pragma drs`.

pub mod ast;
mod lexer;
mod macros;
mod parser;

use thiserror::Error;

pub use ast::{Ast, CExpr, ForLoop, IfChain, LValue, Stmt};
pub use macros::{expand_macros, MacroTable, MAX_EXPANSION_DEPTH};
pub use parser::parse;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error("{line}:{column}: syntax error: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: unsupported construct: {what}")]
    Unsupported { line: usize, what: String },
    #[error("line {line}: macro `{name}` expands cyclically")]
    MacroCycle { line: usize, name: String },
    #[error("no #pragma drs found")]
    NoTarget,
    #[error("line {line}: #pragma drs is not followed by a for-loop")]
    TargetNotALoop { line: usize },
    #[error("multiple #pragma drs markers (lines {first} and {second}); only one target loop is supported")]
    MultipleTargets { first: usize, second: usize },
}

impl FrontendError {
    pub(crate) fn at_line(self, line: usize) -> Self {
        match self {
            FrontendError::Syntax { column, message, .. } => FrontendError::Syntax {
                line,
                column,
                message,
            },
            other => other,
        }
    }
}

/// Position of the target loop: a sequence of `(child list, statement)`
/// steps from the root. The child-list index of the first step is unused;
/// later ones select among [`Stmt::child_lists`] of the previous statement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopRef {
    path: Vec<(usize, usize)>,
}

impl LoopRef {
    pub fn path(&self) -> &[(usize, usize)] {
        &self.path
    }

    /// The statements along the path, outermost first; the last one is the
    /// target loop itself.
    pub fn stmts<'a>(&self, ast: &'a Ast) -> Vec<&'a Stmt> {
        let mut out = Vec::with_capacity(self.path.len());
        let mut list = &ast.items;
        for (depth, &(li, si)) in self.path.iter().enumerate() {
            if depth > 0 {
                let parent: &Stmt = out[depth - 1];
                list = parent.child_lists()[li];
            }
            out.push(&list[si]);
        }
        out
    }

    pub fn resolve<'a>(&self, ast: &'a Ast) -> &'a ForLoop {
        match self.stmts(ast).last() {
            Some(Stmt::For(l)) => l,
            _ => unreachable!("LoopRef always points at a for-loop"),
        }
    }

    /// Enclosing statements of the target, outermost first.
    pub fn ancestors<'a>(&self, ast: &'a Ast) -> Vec<&'a Stmt> {
        let mut stmts = self.stmts(ast);
        stmts.pop();
        stmts
    }
}

fn pragma_word(text: &str) -> &str {
    text.split_whitespace().next().unwrap_or("")
}

/// Finds the for-loop introduced by the single `#pragma drs` marker.
///
/// `#pragma omp ...` lines may sit between the marker and the loop, in
/// either order.
pub fn locate_target_loop(ast: &Ast) -> Result<LoopRef, FrontendError> {
    let mut found: Option<(usize, Result<LoopRef, FrontendError>)> = None;
    let mut path = Vec::new();
    search(&ast.items, 0, &mut path, &mut found)?;
    match found {
        None => Err(FrontendError::NoTarget),
        Some((_, result)) => result,
    }
}

fn search(
    list: &[Stmt],
    list_idx: usize,
    path: &mut Vec<(usize, usize)>,
    found: &mut Option<(usize, Result<LoopRef, FrontendError>)>,
) -> Result<(), FrontendError> {
    for (i, stmt) in list.iter().enumerate() {
        if let Stmt::Pragma { text, line } = stmt {
            if pragma_word(text) == "drs" {
                if let Some((first, _)) = found {
                    return Err(FrontendError::MultipleTargets {
                        first: *first,
                        second: *line,
                    });
                }
                let target = list[i + 1..]
                    .iter()
                    .position(|s| !matches!(s, Stmt::Pragma { text, .. } if pragma_word(text) == "omp"))
                    .map(|off| i + 1 + off);
                let result = match target {
                    Some(t) if matches!(list[t], Stmt::For(_)) => {
                        let mut p = path.clone();
                        p.push((list_idx, t));
                        Ok(LoopRef { path: p })
                    }
                    _ => Err(FrontendError::TargetNotALoop { line: *line }),
                };
                *found = Some((*line, result));
            }
        }
        for (li, child) in stmt.child_lists().into_iter().enumerate() {
            path.push((list_idx, i));
            search(child, li, path, found)?;
            path.pop();
        }
    }
    Ok(())
}

/// Runs expansion, parsing and target location in sequence.
pub fn load(source: &str) -> Result<(Ast, LoopRef), FrontendError> {
    let (expanded, _) = expand_macros(source)?;
    let ast = parse(&expanded)?;
    let target = locate_target_loop(&ast)?;
    Ok((ast, target))
}
