use std::collections::BTreeSet;

use crate::analysis::{AccessKind, AccessRecord, LoopCtx, LoopRole, Value, VarEnv};
use crate::expr::{BinOp, Expr, Rel, UnOp};

use super::{Atom, ConstraintSystem, DepClass, Domain, EncodeError, PairMeta, Symbol, SymbolDecl};

/// Pieces of one access copy, kept apart so the pair system can order
/// them by kind.
struct CopyParts {
    parallel: Symbol,
    index_syms: Vec<Symbol>,
    domains: Vec<Atom>,
    path: Vec<Atom>,
    index_defs: Vec<Atom>,
}

struct Builder<'a> {
    env: &'a VarEnv,
    decls: Vec<SymbolDecl>,
    seen: BTreeSet<Symbol>,
    known: Vec<(Symbol, i64)>,
}

impl<'a> Builder<'a> {
    fn new(env: &'a VarEnv) -> Self {
        Builder {
            env,
            decls: Vec::new(),
            seen: BTreeSet::new(),
            known: Vec::new(),
        }
    }

    fn declare(&mut self, symbol: Symbol, domain: Domain) {
        if self.seen.insert(symbol.clone()) {
            self.decls.push(SymbolDecl { symbol, domain });
        }
    }

    /// Maps a source name to its symbol for copy `id`, declaring it on
    /// first use.
    fn symbol(&mut self, name: &str, acc: &AccessRecord, id: u32) -> Result<Symbol, EncodeError> {
        if let Some(pos) = acc.loops.iter().rposition(|l| l.var == name) {
            let l = &acc.loops[pos];
            let sym = match l.role {
                LoopRole::OuterSequential => Symbol::shared(name),
                _ => Symbol::copy(name, id),
            };
            if !self.seen.contains(&sym) {
                // Bounds may only mention enclosing counters and variables.
                let outer = AccessRecord {
                    loops: acc.loops[..pos].to_vec(),
                    ..acc.clone()
                };
                let (lo, hi) = l.range();
                let lo = self.rename(&lo, &outer, id)?;
                let hi = self.rename(&hi, &outer, id)?;
                self.declare(sym.clone(), Domain::Range { lo, hi });
            }
            return Ok(sym);
        }
        let sym = Symbol::shared(name);
        match self.env.get(name) {
            Some(Value::Known(v)) => {
                if !self.seen.contains(&sym) {
                    self.known.push((sym.clone(), v));
                }
                self.declare(sym.clone(), Domain::Defined(Expr::Int(v)));
            }
            Some(Value::Unknown) => self.declare(sym.clone(), Domain::Free),
            None => return Err(EncodeError::Undeclared(name.to_string())),
        }
        Ok(sym)
    }

    fn rename(&mut self, e: &Expr<String>, acc: &AccessRecord, id: u32) -> Result<Expr<Symbol>, EncodeError> {
        e.try_map_vars(&mut |v| self.symbol(v, acc, id))
    }

    fn domain_atoms(&mut self, l: &LoopCtx, acc: &AccessRecord, id: u32) -> Result<Vec<Atom>, EncodeError> {
        let pos = acc.loops.iter().position(|x| x == l).expect("loop belongs to the access");
        let sym = self.symbol(&l.var, acc, id)?;
        let outer = AccessRecord {
            loops: acc.loops[..pos].to_vec(),
            ..acc.clone()
        };
        let (lo, hi) = l.range();
        let lo = self.rename(&lo, &outer, id)?;
        let hi = self.rename(&hi, &outer, id)?;
        let mut atoms = vec![
            Atom::cmp(lo, Rel::Le, Expr::Var(sym.clone())),
            Atom::cmp(Expr::Var(sym.clone()), Rel::Le, hi),
        ];
        if l.step.abs() != 1 {
            let start = self.rename(&l.start, &outer, id)?;
            atoms.push(Atom::Divisible {
                expr: Expr::binary(BinOp::Sub, Expr::Var(sym), start),
                modulus: l.step.unsigned_abs() as i64,
            });
        }
        Ok(atoms)
    }

    fn copy(&mut self, acc: &AccessRecord, id: u32) -> Result<CopyParts, EncodeError> {
        let target = acc.target_loop();
        let parallel = self.symbol(&target.var, acc, id)?;
        let mut domains = Vec::new();
        for l in acc.loops.iter().filter(|l| l.role != LoopRole::OuterSequential) {
            domains.extend(self.domain_atoms(l, acc, id)?);
        }
        let mut path = Vec::new();
        for cond in &acc.path.atoms {
            path.push(to_atom(self.rename(cond, acc, id)?));
        }
        let mut index_syms = Vec::new();
        let mut index_defs = Vec::new();
        for (n, idx) in acc.indices.iter().enumerate() {
            let value = self.rename(idx, acc, id)?;
            let sym = Symbol::index(n + 1, id);
            self.declare(sym.clone(), Domain::Defined(value.clone()));
            index_defs.push(Atom::cmp(Expr::Var(sym.clone()), Rel::Eq, value));
            index_syms.push(sym);
        }
        Ok(CopyParts {
            parallel,
            index_syms,
            domains,
            path,
            index_defs,
        })
    }

    fn outer_domains(&mut self, acc: &AccessRecord) -> Result<Vec<Atom>, EncodeError> {
        let mut atoms = Vec::new();
        for l in acc.loops.iter().filter(|l| l.role == LoopRole::OuterSequential) {
            atoms.extend(self.domain_atoms(l, acc, 0)?);
        }
        Ok(atoms)
    }

    fn known_atoms(&self) -> Vec<Atom> {
        self.known
            .iter()
            .map(|(s, v)| Atom::cmp(Expr::Var(s.clone()), Rel::Eq, Expr::Int(*v)))
            .collect()
    }
}

/// Turns a branch condition into an atom. Comparisons, possibly negated,
/// map directly; anything else means "nonzero".
fn to_atom(e: Expr<Symbol>) -> Atom {
    match e {
        Expr::Binary(op, l, r) if op.as_rel().is_some() => Atom::Cmp {
            lhs: *l,
            rel: op.as_rel().expect("checked above"),
            rhs: *r,
        },
        Expr::Unary(UnOp::Not, inner) => match *inner {
            Expr::Binary(op, l, r) if op.as_rel().is_some() => Atom::Cmp {
                lhs: *l,
                rel: op.as_rel().expect("checked above").negate(),
                rhs: *r,
            },
            other => Atom::cmp(Expr::unary(UnOp::Not, other), Rel::Ne, Expr::Int(0)),
        },
        other => Atom::cmp(other, Rel::Ne, Expr::Int(0)),
    }
}

/// Encodes one copy of an access: the subscript symbols it defines and its
/// domain, path and subscript-definition atoms.
pub fn encode_access_copy(
    acc: &AccessRecord,
    copy_id: u32,
    env: &VarEnv,
) -> Result<(Vec<Symbol>, Vec<Atom>), EncodeError> {
    let mut b = Builder::new(env);
    let parts = b.copy(acc, copy_id)?;
    let mut atoms = b.outer_domains(acc)?;
    atoms.extend(parts.domains);
    atoms.extend(parts.path);
    atoms.extend(parts.index_defs);
    Ok((parts.index_syms, atoms))
}

/// Race constraint for a pair of accesses, using copy ids 1 and 2.
pub fn build_pair_constraint(a: &AccessRecord, b: &AccessRecord, env: &VarEnv) -> Result<ConstraintSystem, EncodeError> {
    build_pair_constraint_with_ids(a, b, env, 1, 2)
}

pub fn build_pair_constraint_with_ids(
    a: &AccessRecord,
    b: &AccessRecord,
    env: &VarEnv,
    id_a: u32,
    id_b: u32,
) -> Result<ConstraintSystem, EncodeError> {
    if a.array != b.array {
        return Err(EncodeError::DifferentArrays(a.array.clone(), b.array.clone()));
    }
    if a.indices.len() != b.indices.len() {
        return Err(EncodeError::DimensionMismatch {
            array: a.array.clone(),
            first: a.indices.len(),
            second: b.indices.len(),
        });
    }
    if a.kind != AccessKind::Write && b.kind != AccessKind::Write {
        return Err(EncodeError::NoWrite);
    }
    if id_a == id_b {
        return Err(EncodeError::SameCopyId(id_a));
    }
    let mut builder = Builder::new(env);
    let pa = builder.copy(a, id_a)?;
    let pb = builder.copy(b, id_b)?;

    let mut atoms = vec![Atom::cmp(
        Expr::Var(pa.parallel.clone()),
        Rel::Ne,
        Expr::Var(pb.parallel.clone()),
    )];
    atoms.extend(builder.outer_domains(a)?);
    atoms.extend(pa.domains);
    atoms.extend(pb.domains);
    atoms.extend(pa.path);
    atoms.extend(pb.path);
    atoms.extend(pa.index_defs);
    atoms.extend(pb.index_defs);
    for (x, y) in pa.index_syms.iter().zip(&pb.index_syms) {
        atoms.push(Atom::cmp(Expr::Var(x.clone()), Rel::Eq, Expr::Var(y.clone())));
    }
    atoms.extend(builder.known_atoms());

    let (w, other) = if a.kind == AccessKind::Write { (a, b) } else { (b, a) };
    let class = if other.kind == AccessKind::Write {
        DepClass::Waw
    } else {
        DepClass::Raw
    };
    let cs = ConstraintSystem {
        symbols: builder.decls,
        atoms,
        meta: PairMeta {
            array: a.array.clone(),
            first_id: w.id,
            second_id: other.id,
            first_line: w.line,
            second_line: other.line,
            class,
            parallel: (pa.parallel, pb.parallel),
        },
    };
    cs.validate()?;
    Ok(cs)
}

/// Candidate pairs: every write with every read of the same array (RAW),
/// then every unordered pair of writes to the same array, a write with
/// itself included (WAW). A read-then-write pair is the same constraint as
/// the corresponding RAW pair, so none is emitted.
pub fn enumerate_pairs<'a>(
    writes: &'a [AccessRecord],
    reads: &'a [AccessRecord],
) -> Vec<(&'a AccessRecord, &'a AccessRecord, DepClass)> {
    let mut out = Vec::new();
    for w in writes {
        for r in reads.iter().filter(|r| r.array == w.array) {
            out.push((w, r, DepClass::Raw));
        }
    }
    for (i, w1) in writes.iter().enumerate() {
        for w2 in writes[i..].iter().filter(|w2| w2.array == w1.array) {
            out.push((w1, w2, DepClass::Waw));
        }
    }
    out
}
