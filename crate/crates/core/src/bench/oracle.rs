//! Ground truth by concrete execution: run every iteration of the target
//! loop (for every iteration of the enclosing loops), record which array
//! elements each iteration touches, and look for an element written by one
//! iteration and accessed by another.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::analysis::{Value, VarEnv};
use crate::frontend::ast::{AssignOp, CExpr, ForLoop, Init, LValue, Stmt};
use crate::frontend::{Ast, LoopRef};
use crate::solver::eval::{apply_binop, eval_with};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("no concrete value for `{0}`")]
    Unbound(String),
    #[error("line {line}: cannot execute: {what}")]
    Unsupported { line: usize, what: String },
    #[error("execution budget of {0} steps exhausted")]
    Budget(u64),
}

/// Two iterations of the parallel loop touching one element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Collision {
    pub array: String,
    pub indices: Vec<i64>,
    /// Outer loop counters at the time, outermost first.
    pub outer: Vec<(String, i64)>,
    pub writer: i64,
    pub other: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleVerdict {
    Race(Collision),
    NoRace,
}

const DEFAULT_BUDGET: u64 = 50_000_000;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Read,
    Write,
}

/// Array, concrete subscripts, access kind.
type Touch = (String, Vec<i64>, Kind);

struct Machine {
    globals: BTreeMap<String, i64>,
    scopes: Vec<BTreeMap<String, Option<i64>>>,
    private_arrays: Vec<Vec<String>>,
    steps: u64,
    budget: u64,
    touched: Vec<Touch>,
}

fn unsupported(line: usize, what: impl Into<String>) -> OracleError {
    OracleError::Unsupported {
        line,
        what: what.into(),
    }
}

impl Machine {
    fn tick(&mut self) -> Result<(), OracleError> {
        self.steps += 1;
        if self.steps > self.budget {
            return Err(OracleError::Budget(self.budget));
        }
        Ok(())
    }

    fn lookup(&self, name: &str) -> Option<Option<i64>> {
        for scope in self.scopes.iter().rev() {
            if let Some(v) = scope.get(name) {
                return Some(*v);
            }
        }
        self.globals.get(name).map(|v| Some(*v))
    }

    fn is_private_array(&self, name: &str) -> bool {
        self.private_arrays.iter().any(|s| s.iter().any(|n| n == name))
    }

    /// Value of a pure expression: `Ok(None)` when it depends on a value the
    /// machine does not track, `Err` only for missing variables.
    fn eval_pure(&self, e: &CExpr) -> Result<Option<Result<i64, ()>>, OracleError> {
        let Some(pure) = e.to_pure() else {
            return Ok(None);
        };
        for v in pure.vars() {
            match self.lookup(v) {
                None => return Err(OracleError::Unbound(v.clone())),
                Some(None) => return Ok(None),
                Some(Some(_)) => {}
            }
        }
        let r = eval_with(&pure, &|v: &String| self.lookup(v).flatten());
        Ok(Some(r.map_err(|_| ())))
    }

    /// Records the array reads in `e` and returns its value if it is
    /// computable. Evaluation errors inside subscripts suppress the access.
    fn value(&mut self, e: &CExpr, line: usize) -> Result<Option<i64>, OracleError> {
        self.reads(e, line)?;
        Ok(match self.eval_pure(e)? {
            Some(Ok(v)) => Some(v),
            _ => None,
        })
    }

    fn reads(&mut self, e: &CExpr, line: usize) -> Result<(), OracleError> {
        match e {
            CExpr::Int(_) | CExpr::Var(_) => Ok(()),
            CExpr::Unary(_, x) => self.reads(x, line),
            CExpr::Binary(_, l, r) => {
                self.reads(l, line)?;
                self.reads(r, line)
            }
            CExpr::Index { array, indices } => {
                for idx in indices {
                    self.reads(idx, line)?;
                }
                self.touch(array, indices, Kind::Read, line)
            }
            CExpr::Opaque { operands, .. } => {
                for op in operands {
                    self.reads(op, line)?;
                }
                Ok(())
            }
            CExpr::Call { name, .. } => Err(unsupported(line, format!("call to `{name}`"))),
            CExpr::AddrOf(_) | CExpr::Deref(_) => Err(unsupported(line, "pointer operation")),
        }
    }

    fn touch(&mut self, array: &str, indices: &[CExpr], kind: Kind, line: usize) -> Result<(), OracleError> {
        if self.is_private_array(array) {
            return Ok(());
        }
        let mut values = Vec::with_capacity(indices.len());
        for idx in indices {
            match self.eval_pure(idx)? {
                Some(Ok(v)) => values.push(v),
                // Undefined arithmetic: the access never happens.
                Some(Err(())) => return Ok(()),
                None => return Err(unsupported(line, format!("subscript `{idx}` is not computable"))),
            }
        }
        self.touched.push((array.to_string(), values, kind));
        Ok(())
    }

    fn declare(&mut self, name: &str, v: Option<i64>) {
        self.scopes.last_mut().expect("scope present").insert(name.to_string(), v);
    }

    fn assign(&mut self, name: &str, v: Option<i64>, line: usize, shared_ok: bool) -> Result<(), OracleError> {
        for scope in self.scopes.iter_mut().rev() {
            if let Some(slot) = scope.get_mut(name) {
                *slot = v;
                return Ok(());
            }
        }
        if shared_ok {
            match v {
                Some(v) => {
                    self.globals.insert(name.to_string(), v);
                    Ok(())
                }
                None => Err(unsupported(line, format!("`{name}` gets an untracked value"))),
            }
        } else {
            Err(unsupported(line, format!("write to shared scalar `{name}`")))
        }
    }

    fn scalar_update(&self, name: &str, op: AssignOp, rhs: Option<i64>) -> Option<i64> {
        match op.binop() {
            None => rhs,
            Some(bin) => {
                let old = self.lookup(name).flatten()?;
                apply_binop(bin, old, rhs?).ok()
            }
        }
    }

    /// Runs a loop-header statement (`init` or `step`).
    fn header(&mut self, s: &Stmt, shared_ok: bool) -> Result<(), OracleError> {
        match s {
            Stmt::Decl { declarators, line } => {
                for d in declarators {
                    let v = match &d.init {
                        Some(Init::Expr(e)) => self.value(e, *line)?,
                        _ => None,
                    };
                    self.declare(&d.name, v);
                }
                Ok(())
            }
            Stmt::Assign {
                target: LValue::Var(name),
                op,
                value,
                line,
            } => {
                let rhs = self.value(value, *line)?;
                let v = self.scalar_update(name, *op, rhs);
                // Counters of inner loops are private to the iteration even
                // when declared outside it.
                if !shared_ok && !self.scopes.iter().any(|s| s.contains_key(name)) {
                    self.declare(name, v);
                    return Ok(());
                }
                self.assign(name, v, *line, shared_ok)
            }
            Stmt::IncDec {
                target: LValue::Var(name),
                delta,
                line,
            } => {
                let v = self.scalar_update(name, AssignOp::Add, Some(*delta));
                self.assign(name, v, *line, shared_ok)
            }
            other => Err(unsupported(other.line(), "loop header is not a scalar update")),
        }
    }

    fn cond(&mut self, e: &CExpr, line: usize) -> Result<Option<bool>, OracleError> {
        self.reads(e, line)?;
        match self.eval_pure(e)? {
            Some(Ok(v)) => Ok(Some(v != 0)),
            Some(Err(())) => Ok(None),
            None => Err(unsupported(line, format!("condition `{e}` is not computable"))),
        }
    }

    /// Runs a for-loop, calling `body` once per iteration with the counter
    /// value. Headers run in a scope of their own.
    fn run_loop(
        &mut self,
        l: &ForLoop,
        shared_ok: bool,
        body: &mut dyn FnMut(&mut Machine) -> Result<(), OracleError>,
    ) -> Result<(), OracleError> {
        self.scopes.push(BTreeMap::new());
        self.private_arrays.push(Vec::new());
        let result = (|| {
            self.header(&l.init, shared_ok)?;
            loop {
                self.tick()?;
                match self.cond(&l.cond, l.line)? {
                    Some(true) => {}
                    _ => return Ok(()),
                }
                body(self)?;
                self.header(&l.step, shared_ok)?;
            }
        })();
        self.private_arrays.pop();
        self.scopes.pop();
        result
    }

    fn block(&mut self, body: &[Stmt]) -> Result<(), OracleError> {
        self.scopes.push(BTreeMap::new());
        self.private_arrays.push(Vec::new());
        let result = body.iter().try_for_each(|s| self.stmt(s));
        self.private_arrays.pop();
        self.scopes.pop();
        result
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), OracleError> {
        self.tick()?;
        match s {
            Stmt::Decl { declarators, line } => {
                for d in declarators {
                    if !d.dims.is_empty() {
                        self.private_arrays.last_mut().expect("scope present").push(d.name.clone());
                        continue;
                    }
                    let v = match &d.init {
                        Some(Init::Expr(e)) => self.value(e, *line)?,
                        Some(Init::List(items)) => {
                            for e in items {
                                self.reads(e, *line)?;
                            }
                            None
                        }
                        None => None,
                    };
                    self.declare(&d.name, v);
                }
                Ok(())
            }
            Stmt::Assign { target, op, value, line } => {
                match target {
                    LValue::Var(name) => {
                        let rhs = self.value(value, *line)?;
                        let v = self.scalar_update(name, *op, rhs);
                        self.assign(name, v, *line, false)?;
                    }
                    LValue::Index { array, indices } => {
                        for idx in indices {
                            self.reads(idx, *line)?;
                        }
                        self.reads(value, *line)?;
                        self.touch(array, indices, Kind::Write, *line)?;
                    }
                    LValue::Deref(_) => return Err(unsupported(*line, "write through a pointer")),
                }
                Ok(())
            }
            Stmt::IncDec { target, delta, line } => match target {
                LValue::Var(name) => {
                    let v = self.scalar_update(name, AssignOp::Add, Some(*delta));
                    self.assign(name, v, *line, false)
                }
                LValue::Index { array, indices } => {
                    for idx in indices {
                        self.reads(idx, *line)?;
                    }
                    self.touch(array, indices, Kind::Write, *line)
                }
                LValue::Deref(_) => Err(unsupported(*line, "write through a pointer")),
            },
            Stmt::For(l) => self.run_loop(l, false, &mut |m| m.block(&l.body)),
            Stmt::If(chain) => {
                for (cond, body) in &chain.arms {
                    match self.cond(cond, chain.line)? {
                        Some(true) => return self.block(body),
                        Some(false) => {}
                        // Undefined condition: no arm runs.
                        None => return Ok(()),
                    }
                }
                match &chain.otherwise {
                    Some(body) => self.block(body),
                    None => Ok(()),
                }
            }
            Stmt::Block(body) => self.block(body),
            Stmt::Pragma { .. } => Ok(()),
            Stmt::Expr { expr, line } => self.reads(expr, *line),
            other => Err(unsupported(other.line(), "statement outside the executable subset")),
        }
    }
}

fn conflict(touched: &[(i64, Vec<Touch>)]) -> Option<(String, Vec<i64>, i64, i64)> {
    // Per element: up to two distinct writers and up to two distinct
    // accessing iterations are enough to decide.
    let mut writers: BTreeMap<(&str, &[i64]), Vec<i64>> = BTreeMap::new();
    let mut accessors: BTreeMap<(&str, &[i64]), Vec<i64>> = BTreeMap::new();
    for (iter, list) in touched {
        for (array, idx, kind) in list {
            let key = (array.as_str(), idx.as_slice());
            let acc = accessors.entry(key).or_default();
            if !acc.contains(iter) && acc.len() < 2 {
                acc.push(*iter);
            }
            if *kind == Kind::Write {
                let w = writers.entry(key).or_default();
                if !w.contains(iter) && w.len() < 2 {
                    w.push(*iter);
                }
            }
        }
    }
    for (key, ws) in &writers {
        let others = &accessors[key];
        if let Some(o) = others.iter().find(|o| **o != ws[0]) {
            return Some((key.0.to_string(), key.1.to_vec(), ws[0], *o));
        }
    }
    None
}

/// Executes the target loop nest concretely. Variables without a known
/// value must be supplied in `env_fill`.
pub fn oracle_simulate(
    ast: &Ast,
    target: &LoopRef,
    env: &VarEnv,
    env_fill: &BTreeMap<String, i64>,
) -> Result<OracleVerdict, OracleError> {
    oracle_simulate_with_budget(ast, target, env, env_fill, DEFAULT_BUDGET)
}

pub fn oracle_simulate_with_budget(
    ast: &Ast,
    target: &LoopRef,
    env: &VarEnv,
    env_fill: &BTreeMap<String, i64>,
    budget: u64,
) -> Result<OracleVerdict, OracleError> {
    let mut globals: BTreeMap<String, i64> = env
        .iter()
        .filter_map(|(k, v)| match v {
            Value::Known(n) => Some((k.to_string(), n)),
            Value::Unknown => None,
        })
        .collect();
    globals.extend(env_fill.iter().map(|(k, v)| (k.clone(), *v)));
    let mut m = Machine {
        globals,
        scopes: Vec::new(),
        private_arrays: Vec::new(),
        steps: 0,
        budget,
        touched: Vec::new(),
    };
    let outer: Vec<&ForLoop> = target
        .ancestors(ast)
        .into_iter()
        .filter_map(|s| match s {
            Stmt::For(l) => Some(l),
            _ => None,
        })
        .collect();
    let target_loop = target.resolve(ast);
    let mut found = None;
    nest(&mut m, &outer, target_loop, &mut Vec::new(), &mut found)?;
    Ok(match found {
        Some(c) => OracleVerdict::Race(c),
        None => OracleVerdict::NoRace,
    })
}

fn counter_name(l: &ForLoop) -> Option<String> {
    match l.init.as_ref() {
        Stmt::Decl { declarators, .. } => declarators.first().map(|d| d.name.clone()),
        Stmt::Assign {
            target: LValue::Var(v), ..
        } => Some(v.clone()),
        _ => None,
    }
}

fn nest(
    m: &mut Machine,
    outer: &[&ForLoop],
    target: &ForLoop,
    trail: &mut Vec<(String, i64)>,
    found: &mut Option<Collision>,
) -> Result<(), OracleError> {
    if found.is_some() {
        return Ok(());
    }
    if let Some((first, rest)) = outer.split_first() {
        let name = counter_name(first).ok_or_else(|| unsupported(first.line, "loop without a counter"))?;
        return m.run_loop(first, true, &mut |m| {
            let v = m.lookup(&name).flatten().ok_or_else(|| OracleError::Unbound(name.clone()))?;
            trail.push((name.clone(), v));
            let r = nest(m, rest, target, trail, found);
            trail.pop();
            r
        });
    }
    let name = counter_name(target).ok_or_else(|| unsupported(target.line, "loop without a counter"))?;
    let mut per_iteration: Vec<(i64, Vec<Touch>)> = Vec::new();
    m.run_loop(target, true, &mut |m| {
        let v = m.lookup(&name).flatten().ok_or_else(|| OracleError::Unbound(name.clone()))?;
        m.touched.clear();
        m.block(&target.body)?;
        per_iteration.push((v, std::mem::take(&mut m.touched)));
        Ok(())
    })?;
    if let Some((array, indices, writer, other)) = conflict(&per_iteration) {
        *found = Some(Collision {
            array,
            indices,
            outer: trail.clone(),
            writer,
            other,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::record_variables;
    use crate::frontend::load;

    fn oracle(src: &str, fill: &[(&str, i64)]) -> Result<OracleVerdict, OracleError> {
        let (ast, t) = load(src).unwrap();
        let env = record_variables(&ast, &t, false);
        let fill = fill.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        oracle_simulate(&ast, &t, &env, &fill)
    }

    #[test]
    fn listing1_collides_at_fourteen() {
        let r = oracle("int arr[100];\n#pragma drs\nfor(int i = 0; i < 10; i++){ arr[i%6+6*i] = arr[2*i]; }", &[]).unwrap();
        let OracleVerdict::Race(c) = r else { panic!() };
        assert_eq!(c.indices, [14]);
        assert_eq!((c.writer, c.other), (2, 7));
    }

    #[test]
    fn listing6_has_no_collision() {
        let src = "int a = 6;\nint arr[1000];\n#pragma drs\nfor(int i = 0; i < 10; i++){ if(i<5){ arr[i%a+a*i] = arr[2*i]; } }";
        assert_eq!(oracle(src, &[]).unwrap(), OracleVerdict::NoRace);
    }

    #[test]
    fn outer_iterations_are_separate() {
        let src = "int n; int m;\nint b[100][100];\nfor (int i = 1; i < n; i++)\n#pragma drs\nfor (int j = 1; j < m; j++) { b[i][j] = b[i-1][j-1]; }";
        assert_eq!(oracle(src, &[("n", 20), ("m", 20)]).unwrap(), OracleVerdict::NoRace);
        assert_eq!(oracle(src, &[("n", 20)]), Err(OracleError::Unbound("m".into())));
    }

    #[test]
    fn inner_counter_declared_outside() {
        let src = "int j;\nint a[100];\n#pragma drs\nfor (int i = 0; i < 10; i++) { for (j = 0; j < 10; j++) { a[i*10+j] = 0; } }";
        assert_eq!(oracle(src, &[]).unwrap(), OracleVerdict::NoRace);
    }

    #[test]
    fn same_iteration_reuse_is_not_a_race() {
        let src = "int a[10];\n#pragma drs\nfor (int i = 0; i < 10; i++) { a[i] = a[i] + 1; a[i] += 2; }";
        assert_eq!(oracle(src, &[]).unwrap(), OracleVerdict::NoRace);
        let src = "int a[10];\n#pragma drs\nfor (int i = 0; i < 10; i++) { int t[2]; t[0] = i; a[0] = t[0]; }";
        assert!(matches!(oracle(src, &[]).unwrap(), OracleVerdict::Race(_)));
    }

    #[test]
    fn reads_only_never_race() {
        let src = "int a[10];\nint s[10];\n#pragma drs\nfor (int i = 0; i < 10; i++) { s[i] = a[0] + a[i]; }";
        assert_eq!(oracle(src, &[]).unwrap(), OracleVerdict::NoRace);
    }

    #[test]
    fn budget_is_enforced() {
        let (ast, t) = load("int a[10];\n#pragma drs\nfor (int i = 0; i < 1000; i++) { a[0] = 1; }").unwrap();
        let env = record_variables(&ast, &t, false);
        let r = oracle_simulate_with_budget(&ast, &t, &env, &BTreeMap::new(), 50);
        assert_eq!(r, Err(OracleError::Budget(50)));
    }
}
