mod common;

use std::collections::BTreeMap;
use std::io::Write as _;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::SeedableRng;

use racesat::bench::{metrics, run_corpus, CaseOutcome, ConfusionCounts, Manifest, OracleVerdict};
use racesat::detector::{analyze, analyze_source, prepare, Config, Verdict};
use racesat::encoding::{Atom, ConstraintSystem, Symbol};
use racesat::expr::{BinOp, Expr, Rel};
use racesat::solver::{eval_expr, smt_term, solve, Assignment, Backend, SolverConfig};

use common::{corpus, oracle_source, random_loop, read_corpus, z3_available};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn fp_suite(config: &Config) -> Result<BTreeMap<String, String>, String> {
    let manifest = Manifest::load(&corpus("fp_suite.json")).map_err(|e| e.to_string())?;
    let summary = run_corpus(&manifest, config);
    Ok(summary
        .cases
        .iter()
        .map(|c| {
            let got = match &c.outcome {
                CaseOutcome::Race => "race".to_string(),
                CaseOutcome::NoRace => "no-race".to_string(),
                CaseOutcome::Unsupported { reason } => format!("unsupported: {reason}"),
                CaseOutcome::Error { message } => format!("error: {message}"),
            };
            (c.path.display().to_string(), got)
        })
        .collect())
}

fn criterion_1() -> Check {
    let started = Instant::now();
    let got = fp_suite(&Config::default())?;
    let elapsed = started.elapsed();
    let want = [
        ("fp1.c", "race"),
        ("fp2.c", "no-race"),
        ("fp3.c", "no-race"),
        ("fp6.c", "no-race"),
        ("fp7.c", "no-race"),
    ];
    for (file, verdict) in want {
        ensure(got.get(file).map(String::as_str) == Some(verdict), format!("{file}: got {:?}", got.get(file)))?;
    }
    ensure(elapsed < Duration::from_secs(5), format!("took {elapsed:?}"))?;
    Ok(format!("FP1 race, FP2/3/6/7 no race in {} ms", elapsed.as_millis()))
}

fn index_value(cs: &ConstraintSystem, sym: &Symbol, asg: &Assignment) -> Option<i64> {
    cs.atoms.iter().find_map(|a| match a {
        Atom::Cmp { lhs: Expr::Var(v), rel: Rel::Eq, rhs } if v == sym => eval_expr(rhs, asg).ok(),
        _ => None,
    })
}

fn criterion_2() -> Check {
    let report = analyze(&corpus("listing1.c"), &Config::default()).map_err(|e| e.to_string())?;
    let Verdict::Race { witnesses } = &report.verdict else {
        return Err(format!("verdict {}", report.verdict.label()));
    };
    let w = witnesses.first().ok_or("race without witness")?;
    let prepared = prepare(&read_corpus("listing1.c"), &Config::default())
        .map_err(|e| e.to_string())?
        .map_err(|(_, r)| r)?;
    let cs = prepared
        .systems
        .iter()
        .find(|cs| cs.meta == w.pair)
        .ok_or("witness pair not among the systems")?;
    let names = cs.names();
    let asg: Assignment = w
        .values
        .iter()
        .filter_map(|(k, v)| names.get(k).map(|s| (s.clone(), *v)))
        .collect();
    let a = index_value(cs, &Symbol::index(1, 1), &asg);
    let b = index_value(cs, &Symbol::index(1, 2), &asg);
    ensure(a == Some(14) && b == Some(14), format!("index values {a:?} {b:?}"))?;
    Ok(format!(
        "race, i1={} i2={} both index symbols evaluate to 14",
        w.values["i__1"], w.values["i__2"]
    ))
}

fn criterion_3() -> Check {
    let config = Config::default();
    let report = analyze(&corpus("listing7.c"), &config).map_err(|e| e.to_string())?;
    ensure(
        matches!(report.verdict, Verdict::NoRace { .. }),
        format!("verdict {}", report.verdict.label()),
    )?;
    let prepared = prepare(&read_corpus("listing7.c"), &config)
        .map_err(|e| e.to_string())?
        .map_err(|(_, r)| r)?;
    let shared = |e: &Expr<Symbol>| !e.vars().is_empty() && e.vars().iter().all(|s| s.copy.is_none());
    let def = |cs: &ConstraintSystem, id| {
        cs.atoms.iter().find_map(|a| match a {
            Atom::Cmp { lhs: Expr::Var(v), rel: Rel::Eq, rhs } if *v == Symbol::index(1, id) && shared(rhs) => {
                Some(rhs.clone())
            }
            _ => None,
        })
    };
    for cs in &prepared.systems {
        if let (Some(l), Some(r)) = (def(cs, 1), def(cs, 2)) {
            let differs_by_one = (-5..=5).all(|v| {
                let asg: Assignment = l.vars().into_iter().chain(r.vars()).map(|s| (s.clone(), v)).collect();
                matches!((eval_expr(&l, &asg), eval_expr(&r, &asg)), (Ok(x), Ok(y)) if (x - y).abs() == 1)
            });
            if differs_by_one {
                return Ok(format!("no race; dim-1 index.1__1 == {l}, index.1__2 == {r}"));
            }
        }
    }
    Err("no dimension-1 equality differing by 1 over a shared symbol".into())
}

fn criterion_4() -> Check {
    let internal = analyze(&corpus("listing6.c"), &Config::default()).map_err(|e| e.to_string())?;
    ensure(
        matches!(internal.verdict, Verdict::NoRace { incomplete: false }),
        format!("internal: {}", internal.verdict.label()),
    )?;
    ensure(z3_available(), "z3 not found for the external backend")?;
    let external = analyze(
        &corpus("listing6.c"),
        &Config {
            backend: Backend::External,
            ..Config::default()
        },
    )
    .map_err(|e| e.to_string())?;
    ensure(
        matches!(external.verdict, Verdict::NoRace { .. }),
        format!("external: {}", external.verdict.label()),
    )?;
    let mut collisions = 0;
    for i1 in 0..5i64 {
        for i2 in 0..5i64 {
            if i1 != i2 && i1 % 6 + 6 * i1 == 2 * i2 {
                collisions += 1;
            }
        }
    }
    ensure(collisions == 0, format!("{collisions} colliding pairs"))?;
    Ok("no race from internal, external and 25-pair enumeration".into())
}

fn criterion_5() -> Check {
    let close = |a: Option<f64>, b: f64| a.is_some_and(|a| (a - b).abs() <= 0.001);
    for (c, want) in [
        (ConfusionCounts::new(29, 1, 20, 2), [0.935, 0.967, 0.942, 0.951]),
        (ConfusionCounts::new(26, 4, 24, 0), [1.000, 0.867, 0.926, 0.929]),
    ] {
        let m = metrics(&c);
        let got = [m.precision, m.recall, m.accuracy, m.f1];
        ensure(
            got.iter().zip(want).all(|(g, w)| close(*g, w)),
            format!("{c:?} gave {got:?}"),
        )?;
    }
    Ok("both metric rows within 0.001".into())
}

fn criterion_6() -> Check {
    let base = fp_suite(&Config::default())?;
    let folded = fp_suite(&Config {
        const_fold: true,
        ..Config::default()
    })?;
    let flipped: Vec<&String> = base.keys().filter(|k| base[*k] != folded[*k]).collect();
    ensure(flipped == ["fp1.c"], format!("changed: {flipped:?}"))?;
    ensure(folded["fp1.c"] == "no-race", format!("fp1 with folding: {}", folded["fp1.c"]))?;
    Ok("only FP1 changes, to no race".into())
}

const RANDOM_CASES: usize = 240;

fn criterion_7() -> Check {
    ensure(z3_available(), "z3 not found for the external backend")?;
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(0x5eed_2024);
    let sources: Vec<String> = (0..RANDOM_CASES).map(|_| random_loop(&mut rng)).collect();
    let next = AtomicUsize::new(0);
    let pairs = AtomicUsize::new(0);
    let races = AtomicUsize::new(0);
    let workers = std::thread::available_parallelism().map_or(2, |n| n.get()).min(16);
    let failures: Vec<String> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut failures = Vec::new();
                    let internal = SolverConfig::default();
                    let external = SolverConfig {
                        backend: Backend::External,
                        ..SolverConfig::default()
                    };
                    loop {
                        let n = next.fetch_add(1, Ordering::Relaxed);
                        let Some(src) = sources.get(n) else { break };
                        let oracle = match oracle_source(src, &BTreeMap::new()) {
                            Ok(v) => v,
                            Err(e) => {
                                failures.push(format!("case {n}: oracle: {e}\n{src}"));
                                continue;
                            }
                        };
                        let report = match analyze_source("generated.c", src, &Config::default()) {
                            Ok(r) => r,
                            Err(e) => {
                                failures.push(format!("case {n}: {e}\n{src}"));
                                continue;
                            }
                        };
                        let agree = matches!(
                            (&report.verdict, &oracle),
                            (Verdict::Race { .. }, OracleVerdict::Race(_))
                                | (Verdict::NoRace { incomplete: false }, OracleVerdict::NoRace)
                        );
                        if matches!(oracle, OracleVerdict::Race(_)) {
                            races.fetch_add(1, Ordering::Relaxed);
                        }
                        if !agree {
                            failures.push(format!(
                                "case {n}: detector {} vs oracle {oracle:?}\n{src}",
                                report.verdict.label()
                            ));
                        }
                        let Ok(Ok(prepared)) = prepare(src, &Config::default()) else {
                            failures.push(format!("case {n}: no constraint systems\n{src}"));
                            continue;
                        };
                        for cs in &prepared.systems {
                            pairs.fetch_add(1, Ordering::Relaxed);
                            let a = solve(cs, &internal).outcome;
                            let b = solve(cs, &external).outcome;
                            let decided = (a.is_sat() || a.is_unsat()) && (b.is_sat() || b.is_unsat());
                            if !decided || a.is_sat() != b.is_sat() {
                                failures.push(format!("case {n}: {}: internal {a:?} external {b:?}", cs.meta));
                            }
                        }
                    }
                    failures
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    });
    let elapsed = started.elapsed();
    if let Some(first) = failures.first() {
        return Err(format!("{} mismatches; first: {first}", failures.len()));
    }
    ensure(elapsed < Duration::from_secs(120), format!("took {elapsed:?}"))?;
    Ok(format!(
        "{RANDOM_CASES} loops ({} racy) match the oracle, {} pairs agree across backends, {:.1} s",
        races.load(Ordering::Relaxed),
        pairs.load(Ordering::Relaxed),
        elapsed.as_secs_f64()
    ))
}

fn run_z3(script: &str) -> Result<String, String> {
    let mut child = Command::new("z3")
        .arg("-in")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .map_err(|e| e.to_string())?;
    child
        .stdin
        .take()
        .expect("piped")
        .write_all(script.as_bytes())
        .map_err(|e| e.to_string())?;
    let out = child.wait_with_output().map_err(|e| e.to_string())?;
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn lit(n: i64) -> String {
    if n < 0 {
        format!("(- {})", -n)
    } else {
        n.to_string()
    }
}

fn criterion_8() -> Check {
    ensure(z3_available(), "z3 not found")?;
    let (x, y) = (Symbol::shared("x"), Symbol::shared("y"));
    let mut checked = 0;
    for op in [BinOp::Div, BinOp::Rem] {
        let mut script = String::from("(set-logic QF_NIA)\n(declare-const |x| Int)\n(declare-const |y| Int)\n");
        let mut expected = Vec::new();
        for a in -20..=20i64 {
            for b in (-20..=20i64).filter(|b| *b != 0) {
                let e = Expr::binary(op, Expr::var(x.clone()), Expr::var(y.clone()));
                let asg: Assignment = [(x.clone(), a), (y.clone(), b)].into_iter().collect();
                let v = eval_expr(&e, &asg).map_err(|err| err.to_string())?;
                let atom = Atom::cmp(e, Rel::Eq, Expr::Int(v));
                script.push_str(&format!(
                    "(push)\n(assert (= |x| {}))\n(assert (= |y| {}))\n(assert (not {}))\n(check-sat)\n(pop)\n",
                    lit(a),
                    lit(b),
                    smt_term(&atom)
                ));
                expected.push((a, b, v));
            }
        }
        let out = run_z3(&script)?;
        let answers: Vec<&str> = out.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        ensure(answers.len() == expected.len(), format!("{} answers for {} cases", answers.len(), expected.len()))?;
        for (ans, (a, b, v)) in answers.iter().zip(&expected) {
            ensure(*ans == "unsat", format!("{a} {} {b} = {v} disagrees: {ans}", op.symbol()))?;
        }
        checked += expected.len();
    }
    Ok(format!("{checked} operand pairs agree between SMT encoding and evaluator"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("FP suite under the default configuration", criterion_1),
        ("listing1.c races on element 14", criterion_2),
        ("sequential outer loop separates iterations", criterion_3),
        ("listing6.c has no race three ways", criterion_4),
        ("metric formulas", criterion_5),
        ("constant folding flips only FP1", criterion_6),
        ("random loops against the oracle and both backends", criterion_7),
        ("SMT division and remainder semantics", criterion_8),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", n + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {why}", n + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
