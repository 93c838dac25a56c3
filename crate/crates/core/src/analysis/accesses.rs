//! Array accesses in the body of the target loop.

use std::collections::BTreeMap;

use crate::expr::{BinOp, Expr};
use crate::frontend::ast::{CExpr, Init, LValue, Stmt};
use crate::frontend::{Ast, LoopRef};

use super::loops::{canonical_loop, collect_loops};
use super::vars::declared_arrays;
use super::{
    AccessKind, AccessRecord, Accesses, AnalysisOptions, LoopCtx, LoopRole, PathCond, Unsupported, VarEnv,
};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Binding {
    /// Scalar declared inside the loop body.
    Local,
    /// Counter of an enclosing or inner loop.
    Loop,
    /// Array declared inside the loop body; private to the iteration.
    LocalArray,
}

struct Collector<'a> {
    env: &'a VarEnv,
    arrays: BTreeMap<String, usize>,
    opts: AnalysisOptions,
    scopes: Vec<Vec<(String, Binding)>>,
    loops: Vec<LoopCtx>,
    path: Vec<Expr<String>>,
    out: Accesses,
    next_id: usize,
}

enum Resolved {
    Binding(Binding),
    Env,
    Array(usize),
    Undeclared,
}

impl Collector<'_> {
    fn resolve(&self, name: &str) -> Resolved {
        for scope in self.scopes.iter().rev() {
            if let Some((_, b)) = scope.iter().rev().find(|(n, _)| n == name) {
                return Resolved::Binding(*b);
            }
        }
        if let Some(d) = self.arrays.get(name) {
            return Resolved::Array(*d);
        }
        if self.env.contains(name) {
            return Resolved::Env;
        }
        Resolved::Undeclared
    }

    fn bind(&mut self, name: &str, b: Binding) {
        self.scopes
            .last_mut()
            .expect("scope stack is never empty")
            .push((name.to_string(), b));
    }

    /// Converts a subscript or condition, checking that it only depends on
    /// loop counters and variables whose values are fixed during the loop.
    fn affine_input(&self, e: &CExpr, line: usize, what: &str) -> Result<Expr<String>, Unsupported> {
        let pure = e.to_pure().ok_or_else(|| {
            let reason = if contains_subscript(e) {
                format!("{what} `{e}` contains an indirect access")
            } else {
                format!("{what} `{e}` is not an integer expression")
            };
            Unsupported::new(line, reason)
        })?;
        for v in pure.vars() {
            match self.resolve(v) {
                Resolved::Binding(Binding::Loop) | Resolved::Env => {}
                Resolved::Binding(Binding::Local) => {
                    return Err(Unsupported::new(
                        line,
                        format!("{what} `{e}` depends on loop-local variable `{v}`"),
                    ))
                }
                Resolved::Array(_) | Resolved::Binding(Binding::LocalArray) => {
                    return Err(Unsupported::new(line, format!("{what} `{e}` uses array `{v}` as a value")))
                }
                Resolved::Undeclared => {
                    return Err(Unsupported::new(line, format!("{what} `{e}` uses undeclared variable `{v}`")))
                }
            }
        }
        Ok(pure)
    }

    fn record(&mut self, array: &str, indices: &[CExpr], kind: AccessKind, line: usize) -> Result<(), Unsupported> {
        let dims = match self.resolve(array) {
            Resolved::Array(d) => d,
            Resolved::Binding(Binding::LocalArray) => return Ok(()),
            Resolved::Undeclared => {
                return Err(Unsupported::new(line, format!("array `{array}` is not declared")))
            }
            _ => {
                return Err(Unsupported::new(
                    line,
                    format!("`{array}` is subscripted but is not an array"),
                ))
            }
        };
        if dims != indices.len() {
            return Err(Unsupported::new(
                line,
                format!("`{array}` has {dims} dimension(s) but is subscripted with {}", indices.len()),
            ));
        }
        let indices = indices
            .iter()
            .map(|e| self.affine_input(e, line, "subscript"))
            .collect::<Result<Vec<_>, _>>()?;
        let rec = AccessRecord {
            id: self.next_id,
            array: array.to_string(),
            indices,
            kind,
            path: PathCond {
                atoms: self.path.clone(),
            },
            loops: self.loops.clone(),
            line,
        };
        self.next_id += 1;
        match kind {
            AccessKind::Write => self.out.writes.push(rec),
            AccessKind::Read => self.out.reads.push(rec),
        }
        Ok(())
    }

    /// Records every array read in `e`, left to right.
    fn reads(&mut self, e: &CExpr, line: usize) -> Result<(), Unsupported> {
        match e {
            CExpr::Int(_) | CExpr::Var(_) => Ok(()),
            CExpr::Unary(_, inner) => self.reads(inner, line),
            CExpr::Binary(_, l, r) => {
                self.reads(l, line)?;
                self.reads(r, line)
            }
            CExpr::Index { array, indices } => {
                if matches!(self.resolve(array), Resolved::Binding(Binding::LocalArray)) {
                    for idx in indices {
                        self.reads(idx, line)?;
                    }
                    Ok(())
                } else {
                    self.record(array, indices, AccessKind::Read, line)
                }
            }
            CExpr::Call { name, .. } => Err(Unsupported::new(line, format!("call to `{name}` in loop body"))),
            CExpr::AddrOf(_) | CExpr::Deref(_) => {
                Err(Unsupported::new(line, format!("pointer operation `{e}` in loop body")))
            }
            CExpr::Opaque { operands, .. } => {
                for op in operands {
                    self.reads(op, line)?;
                }
                Ok(())
            }
        }
    }

    fn write_target(&mut self, target: &LValue, compound: bool, line: usize) -> Result<(), Unsupported> {
        match target {
            LValue::Var(name) => match self.resolve(name) {
                Resolved::Binding(Binding::Local) => Ok(()),
                Resolved::Binding(Binding::Loop) => {
                    Err(Unsupported::new(line, format!("loop counter `{name}` is modified in the loop body")))
                }
                _ => Err(Unsupported::new(line, format!("write to shared scalar `{name}`"))),
            },
            LValue::Index { array, indices } => {
                if matches!(self.resolve(array), Resolved::Binding(Binding::LocalArray)) {
                    for idx in indices {
                        self.reads(idx, line)?;
                    }
                    return Ok(());
                }
                self.record(array, indices, AccessKind::Write, line)?;
                if compound && self.opts.compound_reads {
                    self.record(array, indices, AccessKind::Read, line)?;
                }
                Ok(())
            }
            LValue::Deref(e) => Err(Unsupported::new(line, format!("write through pointer `*{e}`"))),
        }
    }

    fn block(&mut self, body: &[Stmt]) -> Result<(), Unsupported> {
        self.scopes.push(Vec::new());
        for s in body {
            self.stmt(s)?;
        }
        self.scopes.pop();
        Ok(())
    }

    fn stmt(&mut self, stmt: &Stmt) -> Result<(), Unsupported> {
        match stmt {
            Stmt::Decl { declarators, line } => {
                for d in declarators {
                    if d.pointer {
                        return Err(Unsupported::new(*line, format!("pointer `{}` declared in loop body", d.name)));
                    }
                    for dim in d.dims.iter().flatten() {
                        self.reads(dim, *line)?;
                    }
                    match &d.init {
                        Some(Init::Expr(e)) => self.reads(e, *line)?,
                        Some(Init::List(items)) => {
                            for e in items {
                                self.reads(e, *line)?;
                            }
                        }
                        None => {}
                    }
                    let b = if d.dims.is_empty() { Binding::Local } else { Binding::LocalArray };
                    self.bind(&d.name, b);
                }
                Ok(())
            }
            Stmt::Assign { target, op, value, line } => {
                self.write_target(target, op.binop().is_some(), *line)?;
                if let LValue::Index { array, indices } = target {
                    if !matches!(self.resolve(array), Resolved::Binding(Binding::LocalArray)) {
                        for idx in indices {
                            self.reads(idx, *line)?;
                        }
                    }
                }
                self.reads(value, *line)
            }
            Stmt::IncDec { target, line, .. } => {
                self.write_target(target, true, *line)?;
                if let LValue::Index { array, indices } = target {
                    if !matches!(self.resolve(array), Resolved::Binding(Binding::LocalArray)) {
                        for idx in indices {
                            self.reads(idx, *line)?;
                        }
                    }
                }
                Ok(())
            }
            Stmt::For(l) => {
                let ctx = canonical_loop(l, LoopRole::InnerSequential)?;
                for e in [&ctx.start, &ctx.bound] {
                    for v in e.vars() {
                        if v != &ctx.var {
                            self.affine_input(&CExpr::Var(v.clone()), l.line, "inner loop bound")?;
                        }
                    }
                }
                if self.loops.iter().any(|o| o.var == ctx.var) {
                    return Err(Unsupported::new(l.line, format!("loop counter `{}` reused by a nested loop", ctx.var)));
                }
                self.scopes.push(vec![(ctx.var.clone(), Binding::Loop)]);
                self.loops.push(ctx);
                let result = self.block(&l.body);
                self.loops.pop();
                self.scopes.pop();
                result
            }
            Stmt::If(chain) => {
                let saved = self.path.len();
                let mut negated = Vec::new();
                for (cond, body) in &chain.arms {
                    let c = self.affine_input(cond, chain.line, "branch condition")?;
                    self.path.truncate(saved);
                    self.path.extend(negated.iter().cloned());
                    split_conjuncts(&c, &mut self.path);
                    let result = self.block(body);
                    self.path.truncate(saved);
                    result?;
                    negated.push(c.logical_not());
                }
                if let Some(body) = &chain.otherwise {
                    self.path.extend(negated);
                    let result = self.block(body);
                    self.path.truncate(saved);
                    result?;
                }
                Ok(())
            }
            Stmt::Block(body) => self.block(body),
            Stmt::Pragma { .. } => Ok(()),
            Stmt::Expr { expr, line } => self.reads(expr, *line),
            Stmt::Return { line, .. } => Err(Unsupported::new(*line, "return inside the loop body")),
            Stmt::Function { line, .. } => Err(Unsupported::new(*line, "function definition inside the loop body")),
            Stmt::Unsupported { reason, line, .. } => Err(Unsupported::new(*line, reason.clone())),
        }
    }
}

fn contains_subscript(e: &CExpr) -> bool {
    let mut found = false;
    e.visit(&mut |n| found |= matches!(n, CExpr::Index { .. }));
    found
}

fn split_conjuncts(e: &Expr<String>, out: &mut Vec<Expr<String>>) {
    match e {
        Expr::Binary(BinOp::And, l, r) => {
            split_conjuncts(l, out);
            split_conjuncts(r, out);
        }
        other => out.push(other.clone()),
    }
}

/// Collects the array accesses of the target loop body, each with its
/// guarding conditions and enclosing loops.
///
/// Ids are assigned in source order, starting at 0; for a compound
/// assignment the write gets the smaller id.
pub fn collect_accesses(
    ast: &Ast,
    target: &LoopRef,
    env: &VarEnv,
    opts: AnalysisOptions,
) -> Result<Accesses, Unsupported> {
    let loops: Vec<LoopCtx> = collect_loops(ast, target)?
        .into_iter()
        .filter(|l| l.role != LoopRole::InnerSequential)
        .collect();
    let mut c = Collector {
        env,
        arrays: declared_arrays(ast, target),
        opts,
        scopes: vec![loops.iter().map(|l| (l.var.clone(), Binding::Loop)).collect()],
        loops: Vec::new(),
        path: Vec::new(),
        out: Accesses::default(),
        next_id: 0,
    };
    // Loop headers may only use outer counters and recorded variables.
    for (i, l) in loops.iter().enumerate() {
        c.scopes[0] = loops[..i].iter().map(|o| (o.var.clone(), Binding::Loop)).collect();
        for e in [&l.start, &l.bound] {
            for v in e.vars() {
                c.affine_input(&CExpr::Var(v.clone()), l.line, "loop bound")?;
            }
        }
    }
    c.scopes[0] = loops.iter().map(|l| (l.var.clone(), Binding::Loop)).collect();
    c.loops = loops;
    c.block(&target.resolve(ast).body)?;
    Ok(c.out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::record_variables;
    use crate::frontend::load;

    fn collect(src: &str, opts: AnalysisOptions) -> Result<Accesses, Unsupported> {
        let (ast, t) = load(src).unwrap();
        let env = record_variables(&ast, &t, opts.const_fold);
        collect_accesses(&ast, &t, &env, opts)
    }

    fn shapes(recs: &[AccessRecord]) -> Vec<String> {
        recs.iter().map(ToString::to_string).collect()
    }

    const LISTING6: &str = "int a = 6;\nint arr[1000];\n#pragma omp parallel for\n#pragma drs\nfor(int i = 0; i < 10; i++){\n  if(i<5){\n    arr[i%a+a*i] = arr[2*i];\n  }\n}\n";

    #[test]
    fn guarded_access_pair() {
        let acc = collect(LISTING6, AnalysisOptions::default()).unwrap();
        assert_eq!(shapes(&acc.writes), ["W0 arr[((i % a) + (a * i))] @7"]);
        assert_eq!(shapes(&acc.reads), ["R1 arr[(2 * i)] @7"]);
        let w = &acc.writes[0];
        assert_eq!(w.path.atoms.len(), 1);
        assert_eq!(w.path.atoms[0].to_string(), "(i < 5)");
        assert_eq!(w.loops.len(), 1);
        assert_eq!(w.target_loop().var, "i");
    }

    #[test]
    fn else_arms_negate_earlier_conditions() {
        let src = "int a[100];\n#pragma drs\nfor (int i = 0; i < 10; i++) {\n  if (i < 3 && i > 0) { a[i] = 1; }\n  else if (i < 6) { a[i+1] = 2; }\n  else { a[i+2] = 3; }\n}";
        let acc = collect(src, AnalysisOptions::default()).unwrap();
        let paths: Vec<Vec<String>> = acc
            .writes
            .iter()
            .map(|w| w.path.atoms.iter().map(ToString::to_string).collect())
            .collect();
        assert_eq!(paths[0], ["(i < 3)", "(i > 0)"]);
        assert_eq!(paths[1], ["(!((i < 3) && (i > 0)))", "(i < 6)"]);
        assert_eq!(paths[2], ["(!((i < 3) && (i > 0)))", "(!(i < 6))"]);
    }

    #[test]
    fn compound_assignment_reads_and_writes() {
        let src = "int h[10];\n#pragma drs\nfor (int i = 0; i < 10; i++) { h[i%3] += 1; h[i]++; }";
        let acc = collect(src, AnalysisOptions::default()).unwrap();
        assert_eq!(shapes(&acc.writes), ["W0 h[(i % 3)] @3", "W2 h[i] @3"]);
        assert_eq!(shapes(&acc.reads), ["R1 h[(i % 3)] @3", "R3 h[i] @3"]);
        let plain = AnalysisOptions {
            compound_reads: false,
            ..AnalysisOptions::default()
        };
        let acc = collect(src, plain).unwrap();
        assert_eq!(shapes(&acc.writes), ["W0 h[(i % 3)] @3", "W1 h[i] @3"]);
        assert!(acc.reads.is_empty());
    }

    #[test]
    fn nest_and_inner_loops() {
        let src = "int main() {\n  int i, j, n, m;\n  int b[100][100];\n  for (i=1;i<n;i++)\n    #pragma omp parallel for\n    #pragma drs\n    for (j=1;j<m;j++)\n      b[i][j]=b[i-1][j-1];\n  return 0;\n}";
        let acc = collect(src, AnalysisOptions::default()).unwrap();
        assert_eq!(shapes(&acc.writes), ["W0 b[i][j] @8"]);
        assert_eq!(shapes(&acc.reads), ["R1 b[(i - 1)][(j - 1)] @8"]);
        assert_eq!(acc.writes[0].loops.len(), 2);

        let src = "int x[64][64];\n#pragma drs\nfor (int r = 0; r < 8; r++)\n  for (int c = 0; c <= r; c++) { int t = x[r][c]; x[c][r] = t; }";
        let acc = collect(src, AnalysisOptions::default()).unwrap();
        assert_eq!(acc.writes[0].loops.len(), 2);
        assert_eq!(acc.writes[0].loops[1].role, LoopRole::InnerSequential);
        assert_eq!(shapes(&acc.reads), ["R0 x[r][c] @4"]);
    }

    #[test]
    fn local_arrays_are_private() {
        let src = "int a[10];\n#pragma drs\nfor (int i = 0; i < 10; i++) { int tmp[4]; tmp[0] = a[i]; a[i] = tmp[0]; }";
        let acc = collect(src, AnalysisOptions::default()).unwrap();
        assert_eq!(shapes(&acc.reads), ["R0 a[i] @3"]);
        assert_eq!(shapes(&acc.writes), ["W1 a[i] @3"]);
    }

    #[test]
    fn casts_and_floats_keep_inner_reads() {
        let src = "float f[10];\nint a[10];\n#pragma drs\nfor (int i = 0; i < 9; i++) { f[i] = (float)a[i+1] * 0.5; }";
        let acc = collect(src, AnalysisOptions::default()).unwrap();
        assert_eq!(shapes(&acc.reads), ["R1 a[(i + 1)] @4"]);
    }

    #[test]
    fn unsupported_bodies() {
        let cases = [
            ("int a[10]; int s;\n#pragma drs\nfor (int i = 0; i < 10; i++) { s = a[i]; }", "shared scalar"),
            ("int a[10]; int b[10];\n#pragma drs\nfor (int i = 0; i < 10; i++) { a[b[i]] = 1; }", "indirect"),
            ("int a[10];\n#pragma drs\nfor (int i = 0; i < 10; i++) { int k = i; a[k] = 1; }", "loop-local"),
            ("int a[10];\n#pragma drs\nfor (int i = 0; i < 10; i++) { a[i] = f(i); }", "call"),
            ("int a[10];\n#pragma drs\nfor (int i = 0; i < 10; i++) { i++; a[i] = 1; }", "loop counter"),
            ("int a[10];\n#pragma drs\nfor (int i = 0; i < 10; i++) { a[q] = 1; }", "undeclared"),
            ("int a[10][10];\n#pragma drs\nfor (int i = 0; i < 10; i++) { a[i] = 1; }", "dimension"),
            ("int a[10];\n#pragma drs\nfor (int i = 0; i < 10; i++) { if (a[i]) { a[i] = 1; } }", "indirect"),
            ("int a[10];\n#pragma drs\nfor (int i = 0; i < 10; i++) { while (1) { } }", "while"),
            ("int *p;\n#pragma drs\nfor (int i = 0; i < 10; i++) { *p = 1; }", "pointer"),
        ];
        for (src, needle) in cases {
            let err = collect(src, AnalysisOptions::default()).unwrap_err();
            assert!(err.reason.contains(needle), "{src}: {err}");
        }
    }

    #[test]
    fn ids_are_sequential_and_unique() {
        let src = "int a[100];\nint b[100];\n#pragma drs\nfor (int i = 0; i < 10; i++) {\n  a[i] = b[i] + a[i+1];\n  if (i % 2 == 0) { b[i] += a[2*i]; }\n  for (int j = 0; j < 3; j++) { a[i*3+j] = b[j]; }\n}";
        let acc = collect(src, AnalysisOptions::default()).unwrap();
        let mut ids: Vec<usize> = acc.writes.iter().chain(&acc.reads).map(|r| r.id).collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..ids.len()).collect::<Vec<_>>());
        for r in acc.writes.iter().chain(&acc.reads) {
            assert!(!r.indices.is_empty());
            assert!(r.loops.iter().any(|l| l.role == LoopRole::ParallelTarget));
        }
    }
}
