#![allow(dead_code)]

use std::path::PathBuf;

use rand::rngs::StdRng;
use rand::Rng;

pub fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name)
}

pub fn read_corpus(name: &str) -> String {
    std::fs::read_to_string(corpus(name)).expect("corpus file exists")
}

pub fn z3_available() -> bool {
    std::process::Command::new("z3")
        .arg("-version")
        .output()
        .is_ok_and(|o| o.status.success())
}

/// Counter names in scope for subscripts and conditions.
struct Scope {
    target: &'static str,
    outer: Option<&'static str>,
    known: Vec<(String, i64)>,
}

fn term(rng: &mut StdRng, s: &Scope) -> String {
    let coef = rng.gen_range(-3..=3);
    let off = rng.gen_range(-4..=8);
    let base = match rng.gen_range(0..4) {
        0 if !s.known.is_empty() => {
            let (k, _) = &s.known[rng.gen_range(0..s.known.len())];
            format!("{coef}*{} + {k}", s.target)
        }
        _ => format!("{coef}*{}", s.target),
    };
    let base = match s.outer {
        Some(o) if rng.gen_bool(0.3) => format!("{base} + {o}"),
        _ => base,
    };
    format!("{base} + {off}")
}

fn index(rng: &mut StdRng, s: &Scope) -> String {
    match rng.gen_range(0..6) {
        0 => format!("({}) % {}", term(rng, s), rng.gen_range(2..=7)),
        1 => format!("({}) / {}", term(rng, s), rng.gen_range(1..=4)),
        2 => {
            let m = match s.known.first() {
                Some((k, v)) if *v != 0 => k.clone(),
                _ => rng.gen_range(2..=5).to_string(),
            };
            format!("{} % {m} + {}", s.target, rng.gen_range(0..4))
        }
        3 => s.target.to_string(),
        _ => term(rng, s),
    }
}

fn condition(rng: &mut StdRng, s: &Scope) -> String {
    let i = s.target;
    match rng.gen_range(0..5) {
        0 => format!("{i} < {}", rng.gen_range(0..=20)),
        1 => format!("{i} % {} == {}", rng.gen_range(2..=4), rng.gen_range(0..2)),
        2 => format!("{i} > {} && {i} < {}", rng.gen_range(0..8), rng.gen_range(8..24)),
        3 if !s.known.is_empty() => {
            let (k, v) = &s.known[0];
            let probe = if rng.gen_bool(0.5) { *v } else { v + 1 };
            format!("{k} == {probe}")
        }
        _ => format!("2*{i} + 1 >= {}", rng.gen_range(0..30)),
    }
}

fn access(rng: &mut StdRng, s: &Scope, array: &str, dims: usize) -> String {
    let mut out = array.to_string();
    for _ in 0..dims {
        out.push('[');
        out.push_str(&index(rng, s));
        out.push(']');
    }
    out
}

fn statement(rng: &mut StdRng, s: &Scope, arrays: &[(&str, usize)], indent: &str) -> String {
    let (w, wd) = arrays[rng.gen_range(0..arrays.len())];
    let lhs = access(rng, s, w, wd);
    let rhs = match rng.gen_range(0..3) {
        0 => rng.gen_range(0..100).to_string(),
        _ => {
            let (r, rd) = arrays[rng.gen_range(0..arrays.len())];
            format!("{} + 1", access(rng, s, r, rd))
        }
    };
    let op = if rng.gen_bool(0.15) { "+=" } else { "=" };
    format!("{indent}{lhs} {op} {rhs};\n")
}

/// A random loop with affine and modular subscripts over 1-D and 2-D
/// arrays, an optional if/else, an optional sequential outer loop, and
/// only statically known scalars.
pub fn random_loop(rng: &mut StdRng) -> String {
    let mut src = String::from("int A[4096];\nint B[64][64];\n");
    let mut known = Vec::new();
    if rng.gen_bool(0.5) {
        let v = rng.gen_range(1..=6);
        src.push_str(&format!("int k = {v};\n"));
        known.push(("k".to_string(), v));
    }
    let outer = rng.gen_bool(0.25).then_some("o");
    let scope = Scope {
        target: "i",
        outer,
        known,
    };
    let arrays: &[(&str, usize)] = if rng.gen_bool(0.5) {
        &[("A", 1)]
    } else {
        &[("A", 1), ("B", 2)]
    };
    let mut indent = "";
    if outer.is_some() {
        src.push_str(&format!("for (int o = 0; o < {}; o++)\n", rng.gen_range(1..=3)));
        indent = "  ";
    }
    let lo = rng.gen_range(0..6);
    let hi = rng.gen_range(lo + 1..=32);
    let step = if rng.gen_bool(0.2) { 2 } else { 1 };
    let step_text = if step == 1 { "i++".to_string() } else { format!("i += {step}") };
    src.push_str(&format!("{indent}#pragma omp parallel for\n{indent}#pragma drs\n"));
    src.push_str(&format!("{indent}for (int i = {lo}; i < {hi}; {step_text}) {{\n"));
    let body_indent = format!("{indent}  ");
    let nested = format!("{indent}    ");
    for _ in 0..rng.gen_range(1..=2) {
        src.push_str(&statement(rng, &scope, arrays, &body_indent));
    }
    if rng.gen_bool(0.5) {
        src.push_str(&format!("{body_indent}if ({}) {{\n", condition(rng, &scope)));
        src.push_str(&statement(rng, &scope, arrays, &nested));
        if rng.gen_bool(0.5) {
            src.push_str(&format!("{body_indent}}} else {{\n"));
            src.push_str(&statement(rng, &scope, arrays, &nested));
        }
        src.push_str(&format!("{body_indent}}}\n"));
    }
    src.push_str(&format!("{indent}}}\n"));
    src
}

/// Runs the concrete oracle on source text with every unknown filled from
/// `fill`.
pub fn oracle_source(
    src: &str,
    fill: &std::collections::BTreeMap<String, i64>,
) -> Result<racesat::bench::OracleVerdict, String> {
    use racesat::frontend;
    let (expanded, _) = frontend::expand_macros(src).map_err(|e| e.to_string())?;
    let ast = frontend::parse(&expanded).map_err(|e| e.to_string())?;
    let target = frontend::locate_target_loop(&ast).map_err(|e| e.to_string())?;
    // Constant initializers are concrete values for the oracle.
    let env = racesat::analysis::record_variables(&ast, &target, true);
    racesat::bench::oracle_simulate(&ast, &target, &env, fill).map_err(|e| e.to_string())
}
