//! Recognition of canonical counted loops and of the loop nest around the
//! target.

use crate::expr::{BinOp, Expr, Rel};
use crate::frontend::ast::{AssignOp, CExpr, Init, LValue, Stmt};
use crate::frontend::{Ast, ForLoop, LoopRef};

use super::vars::literal;
use super::{LoopCtx, LoopRole, Unsupported};

fn pure(e: &CExpr, line: usize, what: &str) -> Result<Expr<String>, Unsupported> {
    e.to_pure()
        .ok_or_else(|| Unsupported::new(line, format!("{what} `{e}` is not an integer expression")))
}

fn parse_init(init: &Stmt, line: usize) -> Result<(String, Expr<String>), Unsupported> {
    match init {
        Stmt::Decl { declarators, .. } if declarators.len() == 1 => {
            let d = &declarators[0];
            match &d.init {
                Some(Init::Expr(e)) if d.dims.is_empty() && !d.pointer => {
                    Ok((d.name.clone(), pure(e, line, "loop start")?))
                }
                _ => Err(Unsupported::new(line, "loop initializer must assign the counter")),
            }
        }
        Stmt::Assign {
            target: LValue::Var(v),
            op: AssignOp::Set,
            value,
            ..
        } => Ok((v.clone(), pure(value, line, "loop start")?)),
        _ => Err(Unsupported::new(line, "loop initializer must assign the counter")),
    }
}

fn parse_cond(cond: &CExpr, var: &str, line: usize) -> Result<(Rel, Expr<String>), Unsupported> {
    let shape = || Unsupported::new(line, format!("loop condition `{cond}` is not a bound on `{var}`"));
    let CExpr::Binary(op, l, r) = cond else {
        return Err(shape());
    };
    let rel = op.as_rel().ok_or_else(shape)?;
    let is_var = |e: &CExpr| matches!(e, CExpr::Var(v) if v == var);
    let (rel, bound) = if is_var(l) {
        (rel, r.as_ref())
    } else if is_var(r) {
        (rel.flip(), l.as_ref())
    } else {
        return Err(shape());
    };
    if matches!(rel, Rel::Eq | Rel::Ne) {
        return Err(Unsupported::new(line, format!("loop condition uses `{rel}`")));
    }
    let bound = pure(bound, line, "loop bound")?;
    if bound.vars().iter().any(|v| v.as_str() == var) {
        return Err(shape());
    }
    Ok((rel, bound))
}

fn parse_step(step: &Stmt, var: &str, line: usize) -> Result<i64, Unsupported> {
    let shape = || Unsupported::new(line, format!("loop step must add a constant to `{var}`"));
    let is_var = |e: &CExpr| matches!(e, CExpr::Var(v) if v == var);
    match step {
        Stmt::IncDec {
            target: LValue::Var(v),
            delta,
            ..
        } if v == var => Ok(*delta),
        Stmt::Assign {
            target: LValue::Var(v),
            op,
            value,
            ..
        } if v == var => match op {
            AssignOp::Add => literal(value).ok_or_else(shape),
            AssignOp::Sub => literal(value).and_then(i64::checked_neg).ok_or_else(shape),
            AssignOp::Set => match value {
                CExpr::Binary(BinOp::Add, l, r) if is_var(l) => literal(r).ok_or_else(shape),
                CExpr::Binary(BinOp::Add, l, r) if is_var(r) => literal(l).ok_or_else(shape),
                CExpr::Binary(BinOp::Sub, l, r) if is_var(l) => {
                    literal(r).and_then(i64::checked_neg).ok_or_else(shape)
                }
                _ => Err(shape()),
            },
            _ => Err(shape()),
        },
        _ => Err(shape()),
    }
}

/// Checks that `l` has the form `for (v = s; v REL b; v += c)` with `c` a
/// nonzero constant moving `v` towards the bound.
pub fn canonical_loop(l: &ForLoop, role: LoopRole) -> Result<LoopCtx, Unsupported> {
    let (var, start) = parse_init(&l.init, l.line)?;
    let (rel, bound) = parse_cond(&l.cond, &var, l.line)?;
    let step = parse_step(&l.step, &var, l.line)?;
    if step == 0 {
        return Err(Unsupported::new(l.line, "loop step is zero"));
    }
    let towards = match rel {
        Rel::Lt | Rel::Le => step > 0,
        Rel::Gt | Rel::Ge => step < 0,
        Rel::Eq | Rel::Ne => false,
    };
    if !towards {
        return Err(Unsupported::new(
            l.line,
            format!("loop step {step} does not move `{var}` towards its bound"),
        ));
    }
    Ok(LoopCtx {
        var,
        start,
        bound,
        rel,
        step,
        role,
        line: l.line,
    })
}

fn inner_loops(body: &[Stmt], out: &mut Vec<LoopCtx>) -> Result<(), Unsupported> {
    for s in body {
        if let Stmt::For(l) = s {
            out.push(canonical_loop(l, LoopRole::InnerSequential)?);
        }
        for child in s.child_lists() {
            inner_loops(child, out)?;
        }
    }
    Ok(())
}

/// The loop nest of the target: enclosing for-loops outermost first, the
/// target itself, then the loops inside its body in source order.
pub fn collect_loops(ast: &Ast, target: &LoopRef) -> Result<Vec<LoopCtx>, Unsupported> {
    let mut out = Vec::new();
    for stmt in target.ancestors(ast) {
        match stmt {
            Stmt::For(l) => out.push(canonical_loop(l, LoopRole::OuterSequential)?),
            Stmt::Unsupported { reason, line, .. } => {
                return Err(Unsupported::new(*line, format!("target loop is nested in {reason}")))
            }
            _ => {}
        }
    }
    let target_loop = target.resolve(ast);
    out.push(canonical_loop(target_loop, LoopRole::ParallelTarget)?);
    for (i, l) in out.iter().enumerate() {
        if out[..i].iter().any(|o| o.var == l.var) {
            return Err(Unsupported::new(l.line, format!("loop counter `{}` reused by a nested loop", l.var)));
        }
    }
    inner_loops(&target_loop.body, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::load;

    fn target_ctx(header: &str) -> Result<LoopCtx, Unsupported> {
        let src = format!("#pragma drs\n{header} {{ }}");
        let (ast, t) = load(&src).unwrap();
        canonical_loop(t.resolve(&ast), LoopRole::ParallelTarget)
    }

    #[test]
    fn accepted_shapes() {
        let l = target_ctx("for (int i = 0; i < 10; i++)").unwrap();
        assert_eq!((l.var.as_str(), l.rel, l.step), ("i", Rel::Lt, 1));
        assert_eq!(l.range(), (Expr::Int(0), Expr::binary(BinOp::Sub, Expr::Int(10), Expr::Int(1))));

        let l = target_ctx("for (i = 10; 0 <= i; i -= 2)").unwrap();
        assert_eq!((l.rel, l.step), (Rel::Ge, -2));
        assert_eq!(l.range(), (Expr::Int(0), Expr::Int(10)));

        assert_eq!(target_ctx("for (i = 0; i <= n; i = i + 3)").unwrap().step, 3);
        assert_eq!(target_ctx("for (i = 0; i <= n; i = 3 + i)").unwrap().step, 3);
        assert_eq!(target_ctx("for (i = 9; i > 0; --i)").unwrap().step, -1);
        assert_eq!(target_ctx("for (i = 9; i > 0; i += -1)").unwrap().step, -1);
    }

    #[test]
    fn rejected_shapes() {
        for header in [
            "for (i = 0; i != 10; i++)",
            "for (i = 0; i < 10; i--)",
            "for (i = 0; i < 10; i += 0)",
            "for (i = 0; i < 10; i *= 2)",
            "for (i = 0; j < 10; i++)",
            "for (i = 0; i < i + 1; i++)",
            "for (i = 0; i < 10; j++)",
            "for (i = 0; i < f(3); i++)",
            "for (i = a[0]; i < 3; i++)",
            "for (i = 0; i < 10; i += n)",
        ] {
            assert!(target_ctx(header).is_err(), "{header} should be rejected");
        }
    }

    #[test]
    fn nest_with_outer_loop() {
        let src = "int n, m;\nfor (i=1;i<n;i++)\n#pragma drs\nfor (j=1;j<m;j++) { }";
        let (ast, t) = load(src).unwrap();
        let loops = collect_loops(&ast, &t).unwrap();
        assert_eq!(loops.len(), 2);
        assert_eq!(loops[0].role, LoopRole::OuterSequential);
        assert_eq!(loops[0].bound, Expr::var("n".to_string()));
        assert_eq!(loops[1].role, LoopRole::ParallelTarget);
        assert_eq!(loops[1].var, "j");
    }

    #[test]
    fn inner_loops_follow_the_target() {
        let src = "int a[100];\n#pragma drs\nfor (int i = 0; i < 10; i++) { for (int k = 10; k > 0; k--) { a[k] = 0; } }";
        let (ast, t) = load(src).unwrap();
        let loops = collect_loops(&ast, &t).unwrap();
        assert_eq!(loops.len(), 2);
        let k = &loops[1];
        assert_eq!((k.role, k.step, k.rel), (LoopRole::InnerSequential, -1, Rel::Gt));
        assert_eq!(k.range(), (Expr::binary(BinOp::Add, Expr::Int(0), Expr::Int(1)), Expr::Int(10)));
    }

    #[test]
    fn target_inside_while_is_unsupported() {
        let src = "int n;\nwhile (n) {\n#pragma drs\nfor (j=1;j<3;j++) { }\n}";
        let (ast, t) = load(src).unwrap();
        assert!(collect_loops(&ast, &t).is_err());
    }
}
