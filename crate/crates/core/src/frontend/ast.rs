//! Syntax tree for the supported C subset, and a printer whose output
//! parses back to the same tree.

use std::fmt::{self, Write as _};

use crate::expr::{BinOp, Expr, UnOp};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ast {
    pub items: Vec<Stmt>,
}

/// Source-level expression. Unlike [`Expr`] it can contain array
/// subscripts, calls and pointer operators.
#[derive(Debug, Clone, PartialEq)]
pub enum CExpr {
    Int(i64),
    Var(String),
    Unary(UnOp, Box<CExpr>),
    Binary(BinOp, Box<CExpr>, Box<CExpr>),
    Index { array: String, indices: Vec<CExpr> },
    Call { name: String, args: Vec<CExpr> },
    AddrOf(Box<CExpr>),
    Deref(Box<CExpr>),
    /// Anything else the parser consumed but cannot model (casts, `?:`,
    /// floating literals, ...), with the subexpressions it contains.
    Opaque { what: String, operands: Vec<CExpr> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignOp {
    Set,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

impl AssignOp {
    pub fn symbol(self) -> &'static str {
        match self {
            AssignOp::Set => "=",
            AssignOp::Add => "+=",
            AssignOp::Sub => "-=",
            AssignOp::Mul => "*=",
            AssignOp::Div => "/=",
            AssignOp::Rem => "%=",
        }
    }

    /// The arithmetic operator a compound assignment applies.
    pub fn binop(self) -> Option<BinOp> {
        match self {
            AssignOp::Set => None,
            AssignOp::Add => Some(BinOp::Add),
            AssignOp::Sub => Some(BinOp::Sub),
            AssignOp::Mul => Some(BinOp::Mul),
            AssignOp::Div => Some(BinOp::Div),
            AssignOp::Rem => Some(BinOp::Rem),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LValue {
    Var(String),
    Index { array: String, indices: Vec<CExpr> },
    Deref(CExpr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Expr(CExpr),
    List(Vec<CExpr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Declarator {
    pub name: String,
    pub pointer: bool,
    /// One entry per array dimension; `None` for `[]`.
    pub dims: Vec<Option<CExpr>>,
    pub init: Option<Init>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub pointer: bool,
    pub dims: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForLoop {
    pub init: Box<Stmt>,
    pub cond: CExpr,
    pub step: Box<Stmt>,
    pub body: Vec<Stmt>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IfChain {
    pub arms: Vec<(CExpr, Vec<Stmt>)>,
    pub otherwise: Option<Vec<Stmt>>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Decl {
        declarators: Vec<Declarator>,
        line: usize,
    },
    Assign {
        target: LValue,
        op: AssignOp,
        value: CExpr,
        line: usize,
    },
    /// `x++`, `--a[i]`, ...; `delta` is +1 or -1.
    IncDec {
        target: LValue,
        delta: i64,
        line: usize,
    },
    For(ForLoop),
    If(IfChain),
    Block(Vec<Stmt>),
    Pragma {
        text: String,
        line: usize,
    },
    Function {
        name: String,
        params: Vec<Param>,
        body: Vec<Stmt>,
        line: usize,
    },
    Expr {
        expr: CExpr,
        line: usize,
    },
    Return {
        value: Option<CExpr>,
        line: usize,
    },
    /// A statement outside the subset. Nested statements are kept so that
    /// variable updates inside them stay visible.
    Unsupported {
        reason: String,
        children: Vec<Stmt>,
        line: usize,
    },
}

impl Stmt {
    pub fn line(&self) -> usize {
        match self {
            Stmt::Decl { line, .. }
            | Stmt::Assign { line, .. }
            | Stmt::IncDec { line, .. }
            | Stmt::Pragma { line, .. }
            | Stmt::Function { line, .. }
            | Stmt::Expr { line, .. }
            | Stmt::Return { line, .. }
            | Stmt::Unsupported { line, .. } => *line,
            Stmt::For(f) => f.line,
            Stmt::If(i) => i.line,
            Stmt::Block(b) => b.first().map_or(0, Stmt::line),
        }
    }

    /// Nested statement lists, in source order.
    pub fn child_lists(&self) -> Vec<&Vec<Stmt>> {
        match self {
            Stmt::Block(b) => vec![b],
            Stmt::For(f) => vec![&f.body],
            Stmt::If(chain) => chain
                .arms
                .iter()
                .map(|(_, b)| b)
                .chain(chain.otherwise.iter())
                .collect(),
            Stmt::Function { body, .. } => vec![body],
            Stmt::Unsupported { children, .. } => vec![children],
            _ => Vec::new(),
        }
    }

    fn child_lists_mut(&mut self) -> Vec<&mut Vec<Stmt>> {
        match self {
            Stmt::Block(b) => vec![b],
            Stmt::For(f) => vec![&mut f.body],
            Stmt::If(chain) => chain
                .arms
                .iter_mut()
                .map(|(_, b)| b)
                .chain(chain.otherwise.iter_mut())
                .collect(),
            Stmt::Function { body, .. } => vec![body],
            Stmt::Unsupported { children, .. } => vec![children],
            _ => Vec::new(),
        }
    }

    fn clear_lines(&mut self) {
        match self {
            Stmt::Decl { line, .. }
            | Stmt::Assign { line, .. }
            | Stmt::IncDec { line, .. }
            | Stmt::Pragma { line, .. }
            | Stmt::Function { line, .. }
            | Stmt::Expr { line, .. }
            | Stmt::Return { line, .. }
            | Stmt::Unsupported { line, .. } => *line = 0,
            Stmt::For(f) => {
                f.line = 0;
                f.init.clear_lines();
                f.step.clear_lines();
            }
            Stmt::If(i) => i.line = 0,
            Stmt::Block(_) => {}
        }
        for list in self.child_lists_mut() {
            list.iter_mut().for_each(Stmt::clear_lines);
        }
    }
}

impl Ast {
    /// Copy of the tree with every line number zeroed, for structural
    /// comparison.
    pub fn without_lines(&self) -> Ast {
        let mut copy = self.clone();
        copy.items.iter_mut().for_each(Stmt::clear_lines);
        copy
    }
}

impl CExpr {
    pub fn binary(op: BinOp, l: CExpr, r: CExpr) -> CExpr {
        CExpr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn opaque(what: impl Into<String>, operands: Vec<CExpr>) -> CExpr {
        CExpr::Opaque { what: what.into(), operands }
    }

    /// Converts to a pure integer expression. Fails on subscripts, calls,
    /// pointer operators and opaque nodes.
    pub fn to_pure(&self) -> Option<Expr<String>> {
        Some(match self {
            CExpr::Int(n) => Expr::Int(*n),
            CExpr::Var(v) => Expr::Var(v.clone()),
            CExpr::Unary(op, e) => Expr::unary(*op, e.to_pure()?),
            CExpr::Binary(op, l, r) => Expr::binary(*op, l.to_pure()?, r.to_pure()?),
            _ => return None,
        })
    }

    pub fn visit(&self, f: &mut impl FnMut(&CExpr)) {
        f(self);
        match self {
            CExpr::Unary(_, e) | CExpr::AddrOf(e) | CExpr::Deref(e) => e.visit(f),
            CExpr::Binary(_, l, r) => {
                l.visit(f);
                r.visit(f);
            }
            CExpr::Index { indices: args, .. }
            | CExpr::Call { args, .. }
            | CExpr::Opaque { operands: args, .. } => args.iter().for_each(|a| a.visit(f)),
            CExpr::Int(_) | CExpr::Var(_) => {}
        }
    }

    /// Names whose address is taken with `&`.
    pub fn address_taken(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let CExpr::AddrOf(inner) = e {
                match inner.as_ref() {
                    CExpr::Var(v) | CExpr::Index { array: v, .. } => out.push(v.clone()),
                    _ => {}
                }
            }
        });
        out
    }
}

impl fmt::Display for CExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CExpr::Int(n) if *n < 0 => write!(f, "(-{})", n.unsigned_abs()),
            CExpr::Int(n) => write!(f, "{n}"),
            CExpr::Var(v) => f.write_str(v),
            CExpr::Unary(UnOp::Neg, e) => write!(f, "(-{e})"),
            CExpr::Unary(UnOp::Not, e) => write!(f, "(!{e})"),
            CExpr::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            CExpr::Index { array, indices } => {
                f.write_str(array)?;
                for idx in indices {
                    write!(f, "[{idx}]")?;
                }
                Ok(())
            }
            CExpr::Call { name, args } => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            CExpr::AddrOf(e) => write!(f, "(&{e})"),
            CExpr::Deref(e) => write!(f, "(*{e})"),
            CExpr::Opaque { what, .. } => write!(f, "/* {what} */ 0"),
        }
    }
}

impl fmt::Display for LValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LValue::Var(v) => f.write_str(v),
            LValue::Index { array, indices } => {
                write!(f, "{}", CExpr::Index { array: array.clone(), indices: indices.clone() })
            }
            LValue::Deref(e) => write!(f, "*{e}"),
        }
    }
}

impl fmt::Display for Ast {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        for stmt in &self.items {
            print_stmt(&mut out, stmt, 0);
        }
        f.write_str(&out)
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn print_block(out: &mut String, body: &[Stmt], depth: usize) {
    out.push_str("{\n");
    for s in body {
        print_stmt(out, s, depth + 1);
    }
    indent(out, depth);
    out.push('}');
}

/// Prints a statement without trailing `;` or newline, for `for` clauses.
fn print_simple(stmt: &Stmt) -> String {
    match stmt {
        Stmt::Decl { declarators, .. } => {
            let parts: Vec<String> = declarators.iter().map(print_declarator).collect();
            format!("int {}", parts.join(", "))
        }
        Stmt::Assign { target, op, value, .. } => format!("{target} {} {value}", op.symbol()),
        Stmt::IncDec { target, delta, .. } => {
            format!("{target}{}", if *delta > 0 { "++" } else { "--" })
        }
        Stmt::Expr { expr, .. } => expr.to_string(),
        other => {
            let mut s = String::new();
            print_stmt(&mut s, other, 0);
            s.trim_end().trim_end_matches(';').to_string()
        }
    }
}

fn print_declarator(d: &Declarator) -> String {
    let mut s = String::new();
    if d.pointer {
        s.push('*');
    }
    s.push_str(&d.name);
    for dim in &d.dims {
        match dim {
            Some(e) => {
                let _ = write!(s, "[{e}]");
            }
            None => s.push_str("[]"),
        }
    }
    match &d.init {
        Some(Init::Expr(e)) => {
            let _ = write!(s, " = {e}");
        }
        Some(Init::List(items)) => {
            let parts: Vec<String> = items.iter().map(ToString::to_string).collect();
            let _ = write!(s, " = {{{}}}", parts.join(", "));
        }
        None => {}
    }
    s
}

fn print_stmt(out: &mut String, stmt: &Stmt, depth: usize) {
    indent(out, depth);
    match stmt {
        Stmt::Decl { .. } | Stmt::Assign { .. } | Stmt::IncDec { .. } | Stmt::Expr { .. } => {
            out.push_str(&print_simple(stmt));
            out.push(';');
        }
        Stmt::For(l) => {
            let _ = write!(
                out,
                "for ({}; {}; {}) ",
                print_simple(&l.init),
                l.cond,
                print_simple(&l.step)
            );
            print_block(out, &l.body, depth);
        }
        Stmt::If(chain) => {
            for (i, (cond, body)) in chain.arms.iter().enumerate() {
                if i > 0 {
                    out.push_str(" else ");
                }
                let _ = write!(out, "if ({cond}) ");
                print_block(out, body, depth);
            }
            if let Some(body) = &chain.otherwise {
                out.push_str(" else ");
                print_block(out, body, depth);
            }
        }
        Stmt::Block(body) => print_block(out, body, depth),
        Stmt::Pragma { text, .. } => {
            let _ = write!(out, "#pragma {text}");
        }
        Stmt::Function { name, params, body, .. } => {
            let ps: Vec<String> = params
                .iter()
                .map(|p| {
                    format!(
                        "int {}{}{}",
                        if p.pointer { "*" } else { "" },
                        p.name,
                        "[]".repeat(p.dims)
                    )
                })
                .collect();
            let _ = write!(out, "int {name}({}) ", ps.join(", "));
            print_block(out, body, depth);
        }
        Stmt::Return { value, .. } => match value {
            Some(v) => {
                let _ = write!(out, "return {v};");
            }
            None => out.push_str("return;"),
        },
        Stmt::Unsupported { reason, children, .. } => {
            let _ = write!(out, "/* unsupported: {reason} */ ");
            print_block(out, children, depth);
        }
    }
    out.push('\n');
}
