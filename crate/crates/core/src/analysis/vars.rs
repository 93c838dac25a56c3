//! Scalar value recording for the statements that run before the target
//! loop.
//!
//! A variable is `Known(v)` when its most recent update was an assignment
//! of the integer literal `v` (or, with constant folding, of a constant
//! expression). Every other update makes it `Unknown`. Updates whose
//! execution count is not fixed (inside loops or branches) make the
//! variable `Unknown` afterwards.

use std::collections::{BTreeMap, BTreeSet};

use crate::expr::{BinOp, UnOp};
use crate::frontend::ast::{CExpr, Init, LValue, Stmt};
use crate::frontend::{Ast, LoopRef};
use crate::solver::eval::eval_with;

use super::{Value, VarEnv};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Entry {
    Scalar(Value),
    Array(usize),
}

struct Recorder {
    vars: BTreeMap<String, Entry>,
    scopes: Vec<Vec<(String, Option<Entry>)>>,
    const_fold: bool,
}

impl Recorder {
    fn new(const_fold: bool) -> Self {
        Recorder {
            vars: BTreeMap::new(),
            scopes: vec![Vec::new()],
            const_fold,
        }
    }

    fn push_scope(&mut self) {
        self.scopes.push(Vec::new());
    }

    fn pop_scope(&mut self) {
        let scope = self.scopes.pop().expect("scope stack underflow");
        for (name, previous) in scope.into_iter().rev() {
            match previous {
                Some(e) => self.vars.insert(name, e),
                None => self.vars.remove(&name),
            };
        }
    }

    fn declare(&mut self, name: &str, entry: Entry) {
        let previous = self.vars.insert(name.to_string(), entry);
        self.scopes
            .last_mut()
            .expect("scope stack is never empty")
            .push((name.to_string(), previous));
    }

    fn set(&mut self, name: &str, value: Value) {
        match self.vars.get_mut(name) {
            Some(Entry::Array(_)) => {}
            Some(entry) => *entry = Entry::Scalar(value),
            // Assignment to an undeclared name (e.g. a global from a header).
            None => self.declare(name, Entry::Scalar(value)),
        }
    }

    fn forget(&mut self, names: impl IntoIterator<Item = String>) {
        for name in names {
            if matches!(self.vars.get(&name), Some(Entry::Scalar(_))) {
                self.set(&name, Value::Unknown);
            }
        }
    }

    fn value_of(&self, e: &CExpr) -> Value {
        if let Some(n) = literal(e) {
            return Value::Known(n);
        }
        if !self.const_fold {
            return Value::Unknown;
        }
        let Some(pure) = e.to_pure() else {
            return Value::Unknown;
        };
        let lookup = |v: &String| match self.vars.get(v) {
            Some(Entry::Scalar(Value::Known(n))) => Some(*n),
            _ => None,
        };
        match eval_with(&pure, &lookup) {
            Ok(n) => Value::Known(n),
            Err(_) => Value::Unknown,
        }
    }

    fn current(&self, name: &str) -> Value {
        match self.vars.get(name) {
            Some(Entry::Scalar(v)) => *v,
            _ => Value::Unknown,
        }
    }

    fn expr_effects(&mut self, e: &CExpr) {
        self.forget(e.address_taken());
    }

    fn stmt(&mut self, stmt: &Stmt) {
        match stmt {
            Stmt::Decl { declarators, .. } => {
                for d in declarators {
                    for dim in d.dims.iter().flatten() {
                        self.expr_effects(dim);
                    }
                    match &d.init {
                        Some(Init::Expr(e)) => self.expr_effects(e),
                        Some(Init::List(items)) => items.iter().for_each(|e| self.expr_effects(e)),
                        None => {}
                    }
                    let entry = if !d.dims.is_empty() {
                        Entry::Array(d.dims.len())
                    } else if d.pointer {
                        Entry::Scalar(Value::Unknown)
                    } else {
                        match &d.init {
                            Some(Init::Expr(e)) => Entry::Scalar(self.value_of(e)),
                            _ => Entry::Scalar(Value::Unknown),
                        }
                    };
                    self.declare(&d.name, entry);
                }
            }
            Stmt::Assign { target, op, value, .. } => {
                self.expr_effects(value);
                match target {
                    LValue::Var(name) => {
                        let v = match op.binop() {
                            None => self.value_of(value),
                            Some(bin) => self.compound_value(name, bin, value),
                        };
                        self.set(name, v);
                    }
                    LValue::Index { indices, .. } => {
                        indices.iter().for_each(|e| self.expr_effects(e));
                    }
                    LValue::Deref(e) => self.expr_effects(e),
                }
            }
            Stmt::IncDec { target, delta, .. } => match target {
                LValue::Var(name) => {
                    let v = self.compound_value(name, BinOp::Add, &CExpr::Int(*delta));
                    self.set(name, v);
                }
                LValue::Index { indices, .. } => indices.iter().for_each(|e| self.expr_effects(e)),
                LValue::Deref(e) => self.expr_effects(e),
            },
            Stmt::For(l) => {
                self.push_scope();
                self.stmt(&l.init);
                self.expr_effects(&l.cond);
                self.block(&l.body);
                self.stmt(&l.step);
                self.pop_scope();
                // The body may run any number of times, the counter ends
                // wherever the condition first fails.
                let mut touched = BTreeSet::new();
                assigned_in_stmt(stmt, &mut Vec::new(), &mut touched);
                self.forget(touched);
            }
            Stmt::If(chain) => {
                for (cond, body) in &chain.arms {
                    self.expr_effects(cond);
                    self.block(body);
                }
                if let Some(body) = &chain.otherwise {
                    self.block(body);
                }
                let mut touched = BTreeSet::new();
                assigned_in_stmt(stmt, &mut Vec::new(), &mut touched);
                self.forget(touched);
            }
            Stmt::Block(body) => self.block(body),
            Stmt::Expr { expr, .. } => self.expr_effects(expr),
            Stmt::Return { value: Some(e), .. } => self.expr_effects(e),
            Stmt::Function { .. } | Stmt::Unsupported { .. } => {
                let mut touched = BTreeSet::new();
                assigned_in_stmt(stmt, &mut Vec::new(), &mut touched);
                self.forget(touched);
            }
            Stmt::Return { value: None, .. } | Stmt::Pragma { .. } => {}
        }
    }

    fn block(&mut self, body: &[Stmt]) {
        self.push_scope();
        for s in body {
            self.stmt(s);
        }
        self.pop_scope();
    }

    fn compound_value(&self, name: &str, op: BinOp, rhs: &CExpr) -> Value {
        if !self.const_fold {
            return Value::Unknown;
        }
        let (Value::Known(old), Value::Known(r)) = (self.current(name), self.value_of(rhs)) else {
            return Value::Unknown;
        };
        match crate::solver::eval::apply_binop(op, old, r) {
            Ok(n) => Value::Known(n),
            Err(_) => Value::Unknown,
        }
    }

    fn env(&self) -> VarEnv {
        self.vars
            .iter()
            .filter_map(|(k, e)| match e {
                Entry::Scalar(v) => Some((k.clone(), *v)),
                Entry::Array(_) => None,
            })
            .collect()
    }

    fn arrays(&self) -> BTreeMap<String, usize> {
        self.vars
            .iter()
            .filter_map(|(k, e)| match e {
                Entry::Array(d) => Some((k.clone(), *d)),
                Entry::Scalar(_) => None,
            })
            .collect()
    }
}

/// A plain integer literal, optionally negated.
pub(crate) fn literal(e: &CExpr) -> Option<i64> {
    match e {
        CExpr::Int(n) => Some(*n),
        CExpr::Unary(UnOp::Neg, inner) => match inner.as_ref() {
            CExpr::Int(n) => n.checked_neg(),
            _ => None,
        },
        _ => None,
    }
}

/// Names of outer variables a statement may update, ignoring variables it
/// declares itself.
pub(crate) fn assigned_in_stmt(stmt: &Stmt, local: &mut Vec<BTreeSet<String>>, out: &mut BTreeSet<String>) {
    let is_local = |local: &Vec<BTreeSet<String>>, n: &str| local.iter().any(|s| s.contains(n));
    let note = |local: &Vec<BTreeSet<String>>, name: &str, out: &mut BTreeSet<String>| {
        if !is_local(local, name) {
            out.insert(name.to_string());
        }
    };
    let exprs_of = |stmt: &Stmt| -> Vec<CExpr> {
        match stmt {
            Stmt::Assign { value, target, .. } => {
                let mut v = vec![value.clone()];
                if let LValue::Index { indices, .. } = target {
                    v.extend(indices.iter().cloned());
                }
                v
            }
            Stmt::Expr { expr, .. } => vec![expr.clone()],
            Stmt::Return { value: Some(e), .. } => vec![e.clone()],
            Stmt::Decl { declarators, .. } => declarators
                .iter()
                .flat_map(|d| match &d.init {
                    Some(Init::Expr(e)) => vec![e.clone()],
                    Some(Init::List(items)) => items.clone(),
                    None => Vec::new(),
                })
                .collect(),
            Stmt::For(l) => vec![l.cond.clone()],
            Stmt::If(chain) => chain.arms.iter().map(|(c, _)| c.clone()).collect(),
            _ => Vec::new(),
        }
    };
    for e in exprs_of(stmt) {
        for name in e.address_taken() {
            note(local, &name, out);
        }
    }
    match stmt {
        Stmt::Decl { declarators, .. } => {
            let scope = local.last_mut();
            if let Some(scope) = scope {
                scope.extend(declarators.iter().map(|d| d.name.clone()));
            }
        }
        Stmt::Assign { target: LValue::Var(name), .. } | Stmt::IncDec { target: LValue::Var(name), .. } => {
            note(local, name, out)
        }
        Stmt::For(l) => {
            local.push(BTreeSet::new());
            assigned_in_stmt(&l.init, local, out);
            assigned_in_list(&l.body, local, out);
            assigned_in_stmt(&l.step, local, out);
            local.pop();
        }
        Stmt::Function { params, body, .. } => {
            local.push(params.iter().map(|p| p.name.clone()).collect());
            assigned_in_list(body, local, out);
            local.pop();
        }
        other => {
            for list in other.child_lists() {
                assigned_in_list(list, local, out);
            }
        }
    }
}

fn assigned_in_list(list: &[Stmt], local: &mut Vec<BTreeSet<String>>, out: &mut BTreeSet<String>) {
    local.push(BTreeSet::new());
    for s in list {
        assigned_in_stmt(s, local, out);
    }
    local.pop();
}

/// Loop counters of every for-loop in `list`, at any depth.
fn loop_counters(list: &[Stmt], out: &mut BTreeSet<String>) {
    for s in list {
        if let Stmt::For(l) = s {
            match l.init.as_ref() {
                Stmt::Decl { declarators, .. } => out.extend(declarators.iter().map(|d| d.name.clone())),
                Stmt::Assign { target: LValue::Var(v), .. } => {
                    out.insert(v.clone());
                }
                _ => {}
            }
        }
        for child in s.child_lists() {
            loop_counters(child, out);
        }
    }
}

fn walk_to_target(ast: &Ast, target: &LoopRef, const_fold: bool) -> Recorder {
    let mut rec = Recorder::new(const_fold);
    let stmts = target.stmts(ast);
    let path = target.path();
    let mut list: &Vec<Stmt> = &ast.items;
    let mut invalidated = BTreeSet::new();
    let mut nest_vars = BTreeSet::new();

    for (depth, &(li, si)) in path.iter().enumerate() {
        if depth > 0 {
            list = stmts[depth - 1].child_lists()[li];
        }
        for s in &list[..si] {
            rec.stmt(s);
        }
        let here = stmts[depth];
        // Enclosing loops re-run everything from the target onwards before
        // the target executes again.
        if depth > 0 {
            match stmts[depth - 1] {
                Stmt::For(outer) => {
                    for s in &list[si..] {
                        assigned_in_stmt(s, &mut vec![BTreeSet::new()], &mut invalidated);
                    }
                    assigned_in_stmt(&outer.step, &mut vec![BTreeSet::new()], &mut invalidated);
                }
                Stmt::Unsupported { .. } => {
                    for s in &list[si..] {
                        assigned_in_stmt(s, &mut vec![BTreeSet::new()], &mut invalidated);
                    }
                }
                _ => {}
            }
        } else {
            // Functions defined later may still be called before the loop.
            for s in &list[si + 1..] {
                if matches!(s, Stmt::Function { .. }) {
                    assigned_in_stmt(s, &mut vec![BTreeSet::new()], &mut invalidated);
                }
            }
        }
        if depth + 1 == path.len() {
            break;
        }
        rec.push_scope();
        match here {
            Stmt::Function { params, .. } => {
                for p in params {
                    let entry = if p.dims > 0 {
                        Entry::Array(p.dims)
                    } else {
                        Entry::Scalar(Value::Unknown)
                    };
                    rec.declare(&p.name, entry);
                }
            }
            Stmt::For(outer) => {
                rec.stmt(&outer.init);
                declarators_of(&outer.init, &mut nest_vars);
            }
            _ => {}
        }
    }

    let target_loop = stmts.last().expect("path is never empty");
    if let Stmt::For(l) = target_loop {
        declarators_of(&l.init, &mut nest_vars);
        // The counter's value before the loop is irrelevant.
        let mut counters = BTreeSet::new();
        loop_counters(&l.body, &mut counters);
        nest_vars.extend(counters);
    }
    rec.forget(invalidated);
    for v in nest_vars {
        if matches!(rec.vars.get(&v), Some(Entry::Scalar(_))) {
            rec.vars.remove(&v);
        }
    }
    rec
}

fn declarators_of(init: &Stmt, out: &mut BTreeSet<String>) {
    match init {
        Stmt::Decl { declarators, .. } => out.extend(declarators.iter().map(|d| d.name.clone())),
        Stmt::Assign { target: LValue::Var(v), .. } => {
            out.insert(v.clone());
        }
        _ => {}
    }
}

/// Values of the scalar variables visible at the target loop, excluding the
/// counters of the loop nest around and inside it.
pub fn record_variables(ast: &Ast, target: &LoopRef, const_fold: bool) -> VarEnv {
    walk_to_target(ast, target, const_fold).env()
}

/// Arrays visible at the target loop, with their number of dimensions.
pub fn declared_arrays(ast: &Ast, target: &LoopRef) -> BTreeMap<String, usize> {
    walk_to_target(ast, target, false).arrays()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::load;

    fn env(src: &str, const_fold: bool) -> VarEnv {
        let (ast, target) = load(src).unwrap();
        record_variables(&ast, &target, const_fold)
    }

    const FP1: &str = "#define N 100\nint size = 100;\nint a = N;\nint b = N*N;\nint arr[size];\n#pragma omp parallel for\n#pragma drs\nfor(int i = 0; i < 99; i++){\n  if(a == b){ arr[i] = arr[i+1] + i; }\n}\n";

    #[test]
    fn literal_initializers_are_known() {
        let e = env("int a = 6;\nint arr[1000];\n#pragma drs\nfor(int i = 0; i < 10; i++){ arr[i] = 0; }", false);
        assert_eq!(e.get("a"), Some(Value::Known(6)));
        assert!(!e.contains("arr"));
        assert!(!e.contains("i"));
    }

    #[test]
    fn products_are_unknown_without_folding() {
        let e = env(FP1, false);
        assert_eq!(e.get("a"), Some(Value::Known(100)));
        assert_eq!(e.get("b"), Some(Value::Unknown));
        assert_eq!(e.get("size"), Some(Value::Known(100)));
    }

    #[test]
    fn folding_evaluates_constant_products() {
        let e = env(FP1, true);
        assert_eq!(e.get("b"), Some(Value::Known(10000)));
    }

    #[test]
    fn negative_literals_count_as_literals() {
        let e = env("int a = -5;\n#pragma drs\nfor(int i = 0; i < 1; i++){}", false);
        assert_eq!(e.get("a"), Some(Value::Known(-5)));
    }

    #[test]
    fn latest_update_wins() {
        let src = "int a = 1;\na = 2;\nint b = 3;\nb += 1;\nint c = 4;\nc = a;\nint d;\nd = 9;\n#pragma drs\nfor(int i = 0; i < 1; i++){}";
        let e = env(src, false);
        assert_eq!(e.get("a"), Some(Value::Known(2)));
        assert_eq!(e.get("b"), Some(Value::Unknown));
        assert_eq!(e.get("c"), Some(Value::Unknown));
        assert_eq!(e.get("d"), Some(Value::Known(9)));
        let e = env(src, true);
        assert_eq!(e.get("b"), Some(Value::Known(4)));
        assert_eq!(e.get("c"), Some(Value::Known(2)));
    }

    #[test]
    fn updates_inside_loops_and_branches_are_unknown() {
        let src = "int x = 1;\nint y = 1;\nint z = 1;\nfor (int j = 0; j < 3; j++) { x = 5; }\nif (z) { y = 2; }\n#pragma drs\nfor(int i = 0; i < 1; i++){}";
        let e = env(src, false);
        assert_eq!(e.get("x"), Some(Value::Unknown));
        assert_eq!(e.get("y"), Some(Value::Unknown));
        assert_eq!(e.get("z"), Some(Value::Known(1)));
        assert!(!e.contains("j"));
    }

    #[test]
    fn address_taken_variables_are_unknown() {
        let src = "int x = 1;\nint *p = &x;\ninit(&x);\n#pragma drs\nfor(int i = 0; i < 1; i++){}";
        let e = env(src, false);
        assert_eq!(e.get("x"), Some(Value::Unknown));
        assert_eq!(e.get("p"), Some(Value::Unknown));
    }

    #[test]
    fn nest_counters_and_parameters() {
        let src = "int main(int argc) {\n  int i, j, k, n, m = 3;\n  int b[10][10];\n  for (i=1;i<n;i++)\n    #pragma drs\n    for (j=1;j<m;j++) { for (k = 0; k < 2; k++) b[i][j] = b[i-1][j-1]; }\n  return 0;\n}";
        let (ast, target) = load(src).unwrap();
        let e = record_variables(&ast, &target, false);
        assert_eq!(e.get("argc"), Some(Value::Unknown));
        assert_eq!(e.get("n"), Some(Value::Unknown));
        assert_eq!(e.get("m"), Some(Value::Known(3)));
        for v in ["i", "j", "k"] {
            assert!(!e.contains(v), "{v} should be excluded");
        }
        assert_eq!(declared_arrays(&ast, &target).get("b"), Some(&2));
    }

    #[test]
    fn updates_after_the_target_inside_an_outer_loop_are_unknown() {
        let src = "int x = 1;\nint y = 2;\nint a[10];\nfor (int t = 0; t < 3; t++) {\n  y = 4;\n  #pragma drs\n  for (int i = 0; i < 2; i++) { a[i] = x; }\n  x = 7;\n}";
        let e = env(src, false);
        assert_eq!(e.get("x"), Some(Value::Unknown));
        assert_eq!(e.get("y"), Some(Value::Known(4)));
    }

    #[test]
    fn scoped_declarations_are_dropped() {
        let src = "int x = 1;\n{ int x = 2; int w = 3; }\n#pragma drs\nfor(int i = 0; i < 1; i++){}";
        let e = env(src, false);
        assert_eq!(e.get("x"), Some(Value::Known(1)));
        assert!(!e.contains("w"));
    }

    proptest::proptest! {
        // Without folding, a variable is only ever known to be the literal
        // of its last assignment.
        #[test]
        fn default_recording_only_trusts_literals(vals in proptest::collection::vec((0u8..3, -50i64..50), 1..8)) {
            let mut src = String::from("int v = 0;\n");
            let mut expected = Some(0);
            for (kind, n) in &vals {
                match kind {
                    0 => { src += &format!("v = {n};\n"); expected = Some(*n); }
                    1 => { src += &format!("v = {n} + 1;\n"); expected = None; }
                    _ => { src += "v++;\n"; expected = None; }
                }
            }
            src += "#pragma drs\nfor(int i = 0; i < 1; i++){}";
            let plain = env(&src, false);
            let folded = env(&src, true);
            match expected {
                Some(n) => proptest::prop_assert_eq!(plain.get("v"), Some(Value::Known(n))),
                None => proptest::prop_assert_eq!(plain.get("v"), Some(Value::Unknown)),
            }
            // Folding only refines: where the default knows a value, folding agrees.
            if let Some(Value::Known(n)) = plain.get("v") {
                proptest::prop_assert_eq!(folded.get("v"), Some(Value::Known(n)));
            }
        }
    }
}
