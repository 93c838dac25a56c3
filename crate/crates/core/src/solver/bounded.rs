//! Finite-model search over the symbol domains of a constraint system.
//!
//! Symbols are visited in a fixed order chosen up front. Defined symbols
//! (subscript values, known variables) are computed rather than searched,
//! and a symbol pinned by an equality atom whose other side is already
//! known takes that single value. Loop counters range over their bounds;
//! symbols with no bounds are probed over a window `[-K, K]`. Each atom is
//! checked as soon as all of its symbols have values.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::encoding::{Atom, ConstraintSystem, Symbol};
use crate::expr::{Expr, Rel};

use super::eval::{atom_holds, eval_with};
use super::{Assignment, Backend, Outcome, SolveResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundedConfig {
    /// Unbounded symbols are probed over `[-window, window]`.
    pub window: i64,
    /// Largest loop range enumerated in full; longer ranges are truncated
    /// and the result marked incomplete.
    pub range_cap: i64,
    /// Maximum number of candidate values tried before giving up.
    pub budget: u64,
}

impl Default for BoundedConfig {
    fn default() -> Self {
        BoundedConfig {
            window: 64,
            range_cap: 100_000,
            budget: 20_000_000,
        }
    }
}

#[derive(Debug, Clone)]
enum Mode {
    Computed(Expr<usize>),
    Forced(Expr<usize>),
    Range(Expr<usize>, Expr<usize>),
    Window,
}

#[derive(Debug, Clone)]
struct Step {
    slot: usize,
    mode: Mode,
    /// Atoms whose last symbol is assigned by this step.
    checks: Vec<usize>,
}

struct Plan {
    /// Atoms without symbols.
    ground: Vec<usize>,
    steps: Vec<Step>,
    atoms: Vec<Atom<usize>>,
}

fn slot_vars(e: &Expr<usize>) -> BTreeSet<usize> {
    e.vars().into_iter().copied().collect()
}

fn atom_vars(a: &Atom<usize>) -> BTreeSet<usize> {
    a.vars().into_iter().copied().collect()
}

/// The unassigned side of an equality atom that the other side fixes.
fn forcing(atom: &Atom<usize>, assigned: &[bool]) -> Option<(usize, Expr<usize>)> {
    let Atom::Cmp { lhs, rel: Rel::Eq, rhs } = atom else {
        return None;
    };
    for (var, other) in [(lhs, rhs), (rhs, lhs)] {
        if let Expr::Var(s) = var {
            if !assigned[*s] && slot_vars(other).iter().all(|v| assigned[*v]) {
                return Some((*s, other.clone()));
            }
        }
    }
    None
}

struct Planner<'a> {
    domains: Vec<SlotDomain<usize>>,
    atoms: &'a [Atom<usize>],
    /// Symbols whose range depends, possibly indirectly, on a free symbol.
    loosely_bounded: Vec<bool>,
}

#[derive(Debug, Clone)]
enum SlotDomain<V> {
    Range(Expr<V>, Expr<V>),
    Defined(Expr<V>),
    Free,
}

impl Planner<'_> {
    fn ready(&self, e: &Expr<usize>, assigned: &[bool]) -> bool {
        slot_vars(e).iter().all(|v| assigned[*v])
    }

    /// Assigns every computable symbol; returns the steps taken.
    fn close(&self, assigned: &mut [bool]) -> Vec<(usize, Mode)> {
        let mut out = Vec::new();
        loop {
            let mut progressed = false;
            for s in 0..assigned.len() {
                if assigned[s] {
                    continue;
                }
                if let SlotDomain::Defined(e) = &self.domains[s] {
                    if self.ready(e, assigned) {
                        assigned[s] = true;
                        out.push((s, Mode::Computed(e.clone())));
                        progressed = true;
                    }
                }
            }
            if progressed {
                continue;
            }
            if let Some((s, e)) = self.atoms.iter().find_map(|a| forcing(a, assigned)) {
                assigned[s] = true;
                out.push((s, Mode::Forced(e)));
                continue;
            }
            return out;
        }
    }

    fn checkable(&self, assigned: &[bool]) -> usize {
        self.atoms
            .iter()
            .filter(|a| atom_vars(a).iter().all(|v| assigned[*v]))
            .count()
    }

    fn plan(&self, n: usize) -> Vec<(usize, Mode)> {
        let mut assigned = vec![false; n];
        let mut order = self.close(&mut assigned);
        while assigned.iter().any(|a| !a) {
            let base = self.checkable(&assigned);
            let mut best: Option<(usize, usize, bool, Mode)> = None;
            for s in (0..n).filter(|s| !assigned[*s]) {
                let mode = match &self.domains[s] {
                    SlotDomain::Range(lo, hi) if self.ready(lo, &assigned) && self.ready(hi, &assigned) => {
                        Mode::Range(lo.clone(), hi.clone())
                    }
                    SlotDomain::Range(..) if self.loosely_bounded[s] => Mode::Window,
                    SlotDomain::Free => Mode::Window,
                    _ => continue,
                };
                let mut trial = assigned.to_vec();
                trial[s] = true;
                self.close(&mut trial);
                let gain = self.checkable(&trial) - base;
                let exact = matches!(mode, Mode::Range(..));
                let better = match &best {
                    None => true,
                    Some((_, g, e, _)) => gain > *g || (gain == *g && exact && !*e),
                };
                if better {
                    best = Some((s, gain, exact, mode));
                }
            }
            let (s, _, _, mode) = match best {
                Some(b) => b,
                // Only ranges with cyclic bounds remain.
                None => {
                    let s = (0..n).find(|s| !assigned[*s]).expect("some symbol is unassigned");
                    (s, 0, false, Mode::Window)
                }
            };
            assigned[s] = true;
            order.push((s, mode));
            order.extend(self.close(&mut assigned));
        }
        order
    }
}

fn compile(cs: &ConstraintSystem) -> (Vec<Symbol>, Plan) {
    let symbols: Vec<Symbol> = cs.symbols.iter().map(|d| d.symbol.clone()).collect();
    let slot = |s: &Symbol| symbols.iter().position(|x| x == s).expect("validated system");
    let atoms: Vec<Atom<usize>> = cs.atoms.iter().map(|a| a.map_vars(&mut |s| slot(s))).collect();
    let domains: Vec<SlotDomain<usize>> = cs
        .symbols
        .iter()
        .map(|d| match &d.domain {
            crate::encoding::Domain::Range { lo, hi } => {
                SlotDomain::Range(lo.map_vars(&mut |s| slot(s)), hi.map_vars(&mut |s| slot(s)))
            }
            crate::encoding::Domain::Defined(e) => SlotDomain::Defined(e.map_vars(&mut |s| slot(s))),
            crate::encoding::Domain::Free => SlotDomain::Free,
        })
        .collect();

    let n = symbols.len();
    let mut loose: Vec<bool> = domains.iter().map(|d| matches!(d, SlotDomain::Free)).collect();
    loop {
        let mut changed = false;
        for s in 0..n {
            if loose[s] {
                continue;
            }
            let deps = match &domains[s] {
                SlotDomain::Range(lo, hi) => slot_vars(lo).into_iter().chain(slot_vars(hi)).collect::<Vec<_>>(),
                SlotDomain::Defined(e) => slot_vars(e).into_iter().collect(),
                SlotDomain::Free => continue,
            };
            if deps.iter().any(|d| loose[*d]) {
                loose[s] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let planner = Planner {
        domains,
        atoms: &atoms,
        loosely_bounded: loose,
    };
    let order = planner.plan(n);
    let mut position = vec![0; n];
    for (i, (s, _)) in order.iter().enumerate() {
        position[*s] = i;
    }
    let mut steps: Vec<Step> = order
        .into_iter()
        .map(|(slot, mode)| Step {
            slot,
            mode,
            checks: Vec::new(),
        })
        .collect();
    let mut ground = Vec::new();
    for (i, a) in atoms.iter().enumerate() {
        match atom_vars(a).iter().map(|v| position[*v]).max() {
            Some(p) => steps[p].checks.push(i),
            None => ground.push(i),
        }
    }
    (symbols, Plan { ground, steps, atoms })
}

struct Search<'a> {
    plan: &'a Plan,
    config: &'a BoundedConfig,
    values: Vec<Option<i64>>,
    nodes: u64,
    incomplete: bool,
}

struct OutOfBudget;

impl Search<'_> {
    fn eval(&self, e: &Expr<usize>) -> Option<i64> {
        eval_with(e, &|s: &usize| self.values[*s]).ok()
    }

    fn candidates(&mut self, mode: &Mode) -> Box<dyn Iterator<Item = i64>> {
        match mode {
            Mode::Computed(e) | Mode::Forced(e) => Box::new(self.eval(e).into_iter()),
            Mode::Range(lo, hi) => {
                let (Some(lo), Some(hi)) = (self.eval(lo), self.eval(hi)) else {
                    return Box::new(std::iter::empty());
                };
                if hi < lo {
                    return Box::new(std::iter::empty());
                }
                let size = (hi as i128) - (lo as i128) + 1;
                let end = if size > self.config.range_cap as i128 {
                    self.incomplete = true;
                    lo + (self.config.range_cap - 1)
                } else {
                    hi
                };
                Box::new(lo..=end)
            }
            Mode::Window => {
                self.incomplete = true;
                let k = self.config.window;
                Box::new(std::iter::once(0).chain((1..=k).flat_map(|v| [v, -v])))
            }
        }
    }

    fn holds(&self, atom: usize) -> bool {
        atom_holds(&self.plan.atoms[atom], &|s: &usize| self.values[*s])
    }

    fn run(&mut self, depth: usize) -> Result<bool, OutOfBudget> {
        let Some(step) = self.plan.steps.get(depth) else {
            return Ok(true);
        };
        for v in self.candidates(&step.mode) {
            self.nodes += 1;
            if self.nodes > self.config.budget {
                return Err(OutOfBudget);
            }
            self.values[step.slot] = Some(v);
            if step.checks.iter().all(|a| self.holds(*a)) && self.run(depth + 1)? {
                return Ok(true);
            }
        }
        self.values[step.slot] = None;
        Ok(false)
    }
}

/// Searches for a satisfying assignment.
///
/// Returns `Sat` with the first witness found, `Unsat { exhaustive: true }`
/// when every symbol had a finite, uncapped domain, `Unsat { exhaustive:
/// false }` when some symbol was only probed over the window, and `Unknown`
/// when the node budget runs out.
pub fn solve_bounded(cs: &ConstraintSystem, config: &BoundedConfig) -> SolveResult {
    let started = Instant::now();
    let (symbols, plan) = compile(cs);
    let mut search = Search {
        plan: &plan,
        config,
        values: vec![None; symbols.len()],
        nodes: 0,
        incomplete: false,
    };
    let outcome = if !plan.ground.iter().all(|a| search.holds(*a)) {
        Outcome::Unsat { exhaustive: true }
    } else {
        match search.run(0) {
            Ok(true) => {
                let witness: Assignment = symbols
                    .iter()
                    .cloned()
                    .zip(search.values.iter().map(|v| v.expect("all symbols assigned")))
                    .collect();
                Outcome::Sat(Some(witness))
            }
            Ok(false) => Outcome::Unsat {
                exhaustive: !search.incomplete,
            },
            Err(OutOfBudget) => Outcome::Unknown(format!("search budget of {} candidates exhausted", config.budget)),
        }
    };
    SolveResult {
        outcome,
        backend: Backend::Internal,
        elapsed: started.elapsed(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{collect_accesses, record_variables, AnalysisOptions};
    use crate::encoding::{build_pair_constraint, DepClass, PairMeta, SymbolDecl};
    use crate::expr::BinOp;
    use crate::frontend::load;
    use crate::solver::witness_holds;

    fn systems(src: &str, const_fold: bool) -> Vec<ConstraintSystem> {
        let (ast, t) = load(src).unwrap();
        let env = record_variables(&ast, &t, const_fold);
        let acc = collect_accesses(&ast, &t, &env, AnalysisOptions::default()).unwrap();
        crate::encoding::enumerate_pairs(&acc.writes, &acc.reads)
            .into_iter()
            .map(|(a, b, _)| build_pair_constraint(a, b, &env).unwrap())
            .collect()
    }

    fn solve(cs: &ConstraintSystem) -> Outcome {
        solve_bounded(cs, &BoundedConfig::default()).outcome
    }

    fn var(s: &str) -> Expr<Symbol> {
        Expr::Var(Symbol::shared(s))
    }

    fn free_system(atoms: Vec<Atom>, names: &[&str]) -> ConstraintSystem {
        ConstraintSystem {
            symbols: names
                .iter()
                .map(|n| SymbolDecl {
                    symbol: Symbol::shared(*n),
                    domain: crate::encoding::Domain::Free,
                })
                .collect(),
            atoms,
            meta: PairMeta {
                array: "a".into(),
                first_id: 0,
                second_id: 0,
                first_line: 1,
                second_line: 1,
                class: DepClass::Waw,
                parallel: (Symbol::shared(names[0]), Symbol::shared(names[1])),
            },
        }
    }

    #[test]
    fn listing1_witness() {
        let cs = &systems("int arr[100];\n#pragma drs\nfor(int i = 0; i < 10; i++){ arr[i%6+6*i] = arr[2*i]; }", false)[0];
        let Outcome::Sat(Some(w)) = solve(cs) else { panic!("expected sat") };
        assert_eq!(w[&Symbol::copy("i", 1)], 2);
        assert_eq!(w[&Symbol::copy("i", 2)], 7);
        assert_eq!(w[&Symbol::index(1, 1)], 14);
        assert_eq!(w[&Symbol::index(1, 2)], 14);
        assert!(witness_holds(cs, &w));
    }

    #[test]
    fn listing6_is_exhaustively_unsat() {
        let src = "int a = 6;\nint arr[1000];\n#pragma drs\nfor(int i = 0; i < 10; i++){\n  if(i<5){ arr[i%a+a*i] = arr[2*i]; }\n}";
        for cs in systems(src, false) {
            assert_eq!(solve(&cs), Outcome::Unsat { exhaustive: true }, "{cs}");
        }
    }

    #[test]
    fn cube_guard_is_never_taken() {
        let src = "int arr[10];\n#pragma drs\nfor(int i = 0; i < 10; i++){ if (i*i*i >= 1000) { arr[i%5] = arr[i%5] + i; } }";
        for cs in systems(src, false) {
            assert_eq!(solve(&cs), Outcome::Unsat { exhaustive: true });
        }
    }

    #[test]
    fn equality_pins_values_beyond_the_window() {
        // b == a with a = 100 lies outside the default window of 64.
        let src = "int a = 100;\nint b;\nint arr[100];\n#pragma drs\nfor(int i = 0; i < 99; i++){ if(a == b){ arr[i] = arr[i+1] + i; } }";
        let found = systems(src, false).iter().any(|cs| matches!(solve(cs), Outcome::Sat(Some(w)) if w[&Symbol::shared("b")] == 100));
        assert!(found);
    }

    #[test]
    fn unknown_bounds_are_probed_in_a_window() {
        let src = "int main() {\n  int i, j, n, m;\n  int b[100][100];\n  for (i=1;i<n;i++)\n    #pragma drs\n    for (j=1;j<m;j++)\n      b[i][j]=b[i-1][j-1];\n  return 0;\n}";
        let all = systems(src, false);
        let raw = &all[0];
        assert_eq!(solve(raw), Outcome::Unsat { exhaustive: false });
        // The write paired with itself can never collide either.
        assert_eq!(solve(&all[1]), Outcome::Unsat { exhaustive: false });
    }

    #[test]
    fn free_symbols_find_small_witnesses() {
        let cs = free_system(
            vec![
                Atom::cmp(var("x"), Rel::Ne, var("y")),
                Atom::cmp(Expr::binary(BinOp::Mul, var("x"), var("x")), Rel::Eq, Expr::binary(BinOp::Mul, var("y"), var("y"))),
            ],
            &["x", "y"],
        );
        let Outcome::Sat(Some(w)) = solve(&cs) else { panic!() };
        assert!(witness_holds(&cs, &w));
    }

    #[test]
    fn ground_atoms_and_budget() {
        let cs = free_system(vec![Atom::cmp(Expr::Int(1), Rel::Eq, Expr::Int(2))], &["x", "y"]);
        assert_eq!(solve(&cs), Outcome::Unsat { exhaustive: true });

        let cs = free_system(
            vec![Atom::cmp(Expr::binary(BinOp::Add, var("x"), var("y")), Rel::Eq, Expr::Int(1000))],
            &["x", "y"],
        );
        let tight = BoundedConfig {
            budget: 10,
            ..BoundedConfig::default()
        };
        assert!(matches!(solve_bounded(&cs, &tight).outcome, Outcome::Unknown(_)));
        assert_eq!(solve(&cs), Outcome::Unsat { exhaustive: false });
    }

    #[test]
    fn division_by_zero_falsifies_atoms() {
        let cs = free_system(
            vec![
                Atom::cmp(var("x"), Rel::Eq, Expr::Int(0)),
                Atom::cmp(Expr::binary(BinOp::Div, Expr::Int(1), var("x")), Rel::Eq, var("y")),
            ],
            &["x", "y"],
        );
        assert!(solve(&cs).is_unsat());
    }
}
