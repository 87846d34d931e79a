//! Exit gate: one PASS/FAIL line per criterion.

mod common;

use std::collections::{BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use boundcheck::ast::{Name, Pred, TermKind};
use boundcheck::driver::{analyze, frontend, Analysis};
use boundcheck::elaborate::{Materialize, Options};
use boundcheck::eval::{eval, translate, Mode};
use boundcheck::infer::horn::{apply_vc, certify, Head, HornClause};
use boundcheck::infer::qualifier::{defaults, instances};
use boundcheck::infer::solve::{simplify, solve};
use boundcheck::infer::Kappas;
use boundcheck::logic::{parse_vc_file, Binder, Vc};
use boundcheck::smt::{check_oracle, Backend, ExternalSolver, Oracle, SmtError, Verdict, DEFAULT_SOLVER};

type Outcome = Result<String, String>;

fn examples() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples")
}

fn read(name: &str) -> String {
    std::fs::read_to_string(examples().join(name)).unwrap()
}

fn solver() -> ExternalSolver {
    ExternalSolver::new(DEFAULT_SOLVER, 10_000).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(t: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let e = t.elapsed();
    ensure(e < limit, || format!("{what} took {e:?}, limit {limit:?}"))
}

fn analysis(file: &str, backend: &dyn Backend) -> Analysis {
    let mut quals = defaults();
    let fe = frontend(&read(file), Options::default()).unwrap();
    quals.extend(fe.program.qualifiers.iter().cloned());
    analyze(fe, &quals, backend, 1).unwrap()
}

// ---------------------------------------------------------------------------
// 1. Golden VCs

fn golden_vcs() -> Vec<(Vc, bool)> {
    let mut out = Vec::new();
    for (file, valid) in
        [("golden.vc", true), ("witness_filter.vc", true), ("inductive_foldr.vc", true), ("find_unbounded.vc", false)]
    {
        out.extend(parse_vc_file(&read(file)).unwrap().into_iter().map(|vc| (vc, valid)));
    }
    out
}

fn criterion_golden() -> Outcome {
    let vcs = golden_vcs();
    let t = Instant::now();
    let s = solver();
    for (vc, valid) in &vcs {
        let v = s.check(vc).map_err(|e| e.to_string())?;
        ensure(v.is_valid() == *valid && !matches!(v, Verdict::Unknown(_)), || {
            format!("{}: solver said {v}, expected {}", vc.name, if *valid { "valid" } else { "invalid" })
        })?;
    }
    // The obligations the pipeline itself generates for compose.
    let fe = frontend(&read("compose.bl"), Options::default()).unwrap();
    let own: Vec<&HornClause> = fe.clauses.iter().filter(|c| c.vc.name.starts_with("compose.")).collect();
    ensure(!own.is_empty(), || "compose produced no obligations".into())?;
    for c in &own {
        ensure(c.head == Head::Concrete, || format!("{} mentions an unknown", c.vc.name))?;
        let v = s.check(&c.vc).map_err(|e| e.to_string())?;
        ensure(v.is_valid(), || format!("{}: {v}", c.vc.name))?;
    }
    within(t, Duration::from_secs(5), "external solver run")?;
    let t = Instant::now();
    let mut in_scope = 0;
    for (vc, valid) in &vcs {
        match check_oracle(vc, 3) {
            Err(SmtError::OracleOutOfScope(_)) => {}
            Ok(v) => {
                in_scope += 1;
                ensure(v.is_valid() == *valid, || format!("{}: oracle said {v}", vc.name))?;
            }
            Err(e) => return Err(e.to_string()),
        }
    }
    within(t, Duration::from_secs(2), "oracle run")?;
    Ok(format!("{} golden + {} compose VCs exact; oracle agrees on {in_scope} in scope", vcs.len(), own.len()))
}

// ---------------------------------------------------------------------------
// 2. End-to-end programs

fn criterion_end_to_end() -> Outcome {
    let mut lines = Vec::new();
    for (file, safe) in [
        ("compose.bl", true),
        ("find.bl", true),
        ("posMax.bl", true),
        ("find_nobound.bl", false),
        ("compose_nobound.bl", false),
    ] {
        let t = Instant::now();
        let a = analysis(file, &solver());
        within(t, Duration::from_secs(10), file)?;
        ensure(a.safe() == safe, || format!("{file}: expected {}", if safe { "SAFE" } else { "UNSAFE" }))?;
        lines.push(format!("{file} {}", if safe { "SAFE" } else { "UNSAFE" }));
    }
    Ok(lines.join(", "))
}

// ---------------------------------------------------------------------------
// 3. Inference reproduction

fn kappa_for<'a>(a: &'a Analysis, label: &str, origin: &str) -> Result<&'a boundcheck::infer::KappaVar, String> {
    a.front
        .kappas
        .vars
        .iter()
        .find(|k| k.label == label && k.origin == origin)
        .ok_or_else(|| format!("no unknown for `{label}` in `{origin}`"))
}

fn criterion_inference() -> Outcome {
    let s = solver();
    let a = analysis("posMax.bl", &s);
    let k = kappa_for(&a, "p", "posMax")?;
    let sol = simplify(&a.front.kappas, &k.name, &a.outcome.assignment[&k.name], &s).map_err(|e| e.to_string())?;
    let shown: Vec<String> = sol.iter().map(|p| p.to_string()).collect();
    ensure(shown == ["0 < v"], || format!("posMax: p := {shown:?}"))?;

    let a = analysis("find.bl", &s);
    let k = kappa_for(&a, "p", "ex1")?;
    ensure(k.params.iter().any(|(x, _)| x == "n"), || "n is not in scope of p".into())?;
    let (v, _) = k.params.last().unwrap();
    let sol = Pred::conj(a.outcome.assignment[&k.name].iter().cloned());
    let mut vc = Vc::new("ex1.p.entails");
    for (i, (x, sort)) in k.params.iter().enumerate() {
        let hyp = if i + 1 == k.params.len() { sol.clone() } else { Pred::tt() };
        vc.binders.push(Binder { name: x.clone(), sort: sort.clone(), hyp });
    }
    vc.goal = Pred::bin(boundcheck::ast::BinOp::Le, Pred::var("n"), Pred::var(v.clone()));
    let verdict = s.check(&vc).map_err(|e| e.to_string())?;
    ensure(verdict.is_valid(), || format!("p := {sol} does not entail n <= v: {verdict}"))?;
    Ok(format!("posMax p := \\v -> 0 < v; ex1 p := {sol} entails n <= v"))
}

// ---------------------------------------------------------------------------
// 7. Materialization bound

fn criterion_materialization() -> Outcome {
    let mut sites = 0;
    for file in ["compose.bl", "find.bl"] {
        for mode in [Materialize::New, Materialize::All] {
            let fe = frontend(&read(file), Options { materialize: mode, max_materialize: None }).unwrap();
            for s in &fe.elaborated.sites {
                sites += 1;
                ensure(s.calls <= s.limit(), || {
                    format!("{file} {mode:?}: {} calls at `{}` in {}, limit {}", s.calls, s.binder, s.def, s.limit())
                })?;
            }
        }
    }
    ensure(sites > 0, || "no binding sites under a bound".into())?;
    Ok(format!("{sites} binding sites within n^k"))
}

// ---------------------------------------------------------------------------
// 8. Positivity

fn criterion_positivity() -> Outcome {
    let mut files: Vec<PathBuf> = std::fs::read_dir(examples())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "bl"))
        .collect();
    files.sort();
    let mut clauses = 0;
    let mut failures = Vec::new();
    for f in &files {
        let fe = frontend(&std::fs::read_to_string(f).unwrap(), Options { materialize: Materialize::All, ..Default::default() })
            .map_err(|e| format!("{}: {e}", f.display()))?;
        for c in &fe.clauses {
            clauses += 1;
            if let Err(e) = certify(c) {
                failures.push(e.to_string());
            }
        }
    }
    ensure(failures.is_empty(), || failures.join("; "))?;
    Ok(format!("{clauses} clauses from {} programs certified", files.len()))
}

// ---------------------------------------------------------------------------
// 4. Semantics preservation

fn criterion_preservation() -> Outcome {
    const FUEL: u64 = 10_000;
    let t = Instant::now();
    let mut g = common::TermGen { rng: ChaCha8Rng::seed_from_u64(0x5eed_0004), n: 0 };
    let (mut constants, mut bounds) = (0, 0);
    for i in 0..500 {
        let e = g.int(6, &[]);
        if e.any(&mut |s| matches!(s.kind, TermKind::CApp { .. })) {
            bounds += 1;
        }
        let Ok(v) = eval(&e, FUEL, Mode::LambdaB) else { continue };
        let Some(c) = v.constant() else { continue };
        constants += 1;
        let tr = translate(&e);
        let w = eval(&tr, 4 * FUEL, Mode::LambdaP).map_err(|err| format!("term {i}: translation failed: {err}"))?;
        ensure(w.constant() == Some(c.clone()), || format!("term {i}: λB gave {c:?}, λP gave {w}"))?;
    }
    within(t, Duration::from_secs(60), "500 terms")?;
    ensure(constants >= 250, || format!("only {constants} of 500 terms reached a constant"))?;
    Ok(format!("500 terms, {constants} constants, {bounds} with bound applications, 0 violations"))
}

// ---------------------------------------------------------------------------
// 5. Houdini against brute-force enumeration

/// Greatest solution: union of every assignment satisfying all κ-headed
/// clauses, found by enumerating all subsets of the candidate instances.
fn brute_force(kappas: &Kappas, clauses: &[HornClause], cands: &[Vec<Pred>]) -> Result<Vec<u32>, String> {
    let oracle = Oracle { bound: 3 };
    let nk = kappas.vars.len();
    let mut cache: HashMap<(usize, Vec<u32>, usize), bool> = HashMap::new();
    let total: u64 = cands.iter().map(|c| 1u64 << c.len()).product();
    let mut best = vec![0u32; nk];
    let mut found = 0;
    for code in 0..total {
        let mut rest = code;
        let masks: Vec<u32> = cands
            .iter()
            .map(|c| {
                let m = (rest % (1 << c.len())) as u32;
                rest >>= c.len();
                m
            })
            .collect();
        let mut ok = true;
        'clauses: for (ci, c) in clauses.iter().enumerate() {
            let Head::Kappa(k, args) = &c.head else { continue };
            let ki = kappas.vars.iter().position(|v| &v.name == k).unwrap();
            for qi in (0..cands[ki].len()).filter(|q| masks[ki] >> q & 1 == 1) {
                let key = (ci, masks.clone(), qi);
                let valid = match cache.get(&key) {
                    Some(v) => *v,
                    None => {
                        let sol: HashMap<Name, Vec<Pred>> = kappas
                            .vars
                            .iter()
                            .zip(&masks)
                            .zip(cands)
                            .map(|((v, m), cs)| {
                                (v.name.clone(), cs.iter().enumerate().filter(|(i, _)| m >> i & 1 == 1).map(|(_, p)| p.clone()).collect())
                            })
                            .collect();
                        let map: HashMap<Name, Pred> = kappas.vars[ki]
                            .params
                            .iter()
                            .map(|(x, _)| x.clone())
                            .zip(args.iter().map(|a| Pred::var(a.clone())))
                            .collect();
                        let mut vc = apply_vc(&c.vc, kappas, &sol);
                        vc.goal = cands[ki][qi].subst(&map);
                        let v = oracle.check(&vc).map_err(|e| e.to_string())?;
                        ensure(!matches!(v, Verdict::Unknown(_)), || format!("oracle: {v}"))?;
                        cache.insert(key, v.is_valid());
                        v.is_valid()
                    }
                };
                if !valid {
                    ok = false;
                    break 'clauses;
                }
            }
        }
        if ok {
            found += 1;
            for (b, m) in best.iter_mut().zip(&masks) {
                *b |= m;
            }
        }
    }
    ensure(found > 0, || "no solution at all".into())?;
    Ok(best)
}

fn criterion_houdini() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    let mut nonempty = 0;
    for sys in 0..50 {
        let (kappas, clauses, quals) = common::horn_system(&mut rng);
        let cands: Vec<Vec<Pred>> = kappas.vars.iter().map(|k| instances(&quals, &k.params)).collect();
        let expected = brute_force(&kappas, &clauses, &cands)?;
        let got = solve(&clauses, &kappas, &quals, &Oracle { bound: 3 }, 1).map_err(|e| e.to_string())?;
        for (ki, k) in kappas.vars.iter().enumerate() {
            let have: BTreeSet<String> = got.assignment[&k.name].iter().map(|p| p.to_string()).collect();
            let want: BTreeSet<String> = cands[ki]
                .iter()
                .enumerate()
                .filter(|(i, _)| expected[ki] >> i & 1 == 1)
                .map(|(_, p)| p.to_string())
                .collect();
            ensure(have == want, || format!("system {sys}, {}: solve {have:?}, enumeration {want:?}", k.name))?;
            if !want.is_empty() {
                nonempty += 1;
            }
        }
    }
    within(t, Duration::from_secs(30), "50 systems")?;
    Ok(format!("50 systems, 0 mismatches, {nonempty} non-empty unknowns"))
}

// ---------------------------------------------------------------------------
// 6. Oracle and solver agreement

fn criterion_oracle_agreement() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
    let s = solver();
    let (mut compared, mut valid, mut conflicts) = (0, 0, Vec::new());
    for i in 0..150 {
        let vc = common::lia_vc(&mut rng, i);
        let o = check_oracle(&vc, 3).map_err(|e| format!("{}: {e}", vc.name))?;
        let e = s.check(&vc).map_err(|e| e.to_string())?;
        compared += 1;
        if e.is_valid() {
            valid += 1;
            if matches!(o, Verdict::Invalid(_)) {
                conflicts.push(vc.name.clone());
            }
        }
    }
    within(t, Duration::from_secs(60), "150 VCs")?;
    ensure(conflicts.is_empty(), || format!("solver valid, oracle invalid: {conflicts:?}"))?;
    ensure(valid > 0 && valid < compared, || format!("degenerate sample: {valid} of {compared} valid"))?;
    Ok(format!("{compared} VCs, {valid} valid, 0 conflicts"))
}

// ---------------------------------------------------------------------------

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("golden VC suite", criterion_golden),
        ("end-to-end programs", criterion_end_to_end),
        ("inference reproduction", criterion_inference),
        ("semantics preservation", criterion_preservation),
        ("Houdini correctness", criterion_houdini),
        ("oracle/solver agreement", criterion_oracle_agreement),
        ("materialization bound", criterion_materialization),
        ("positivity invariant", criterion_positivity),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let ms = t.elapsed().as_millis();
        match r {
            Ok(detail) => println!("criterion {}: PASS {name} ({detail}; {ms} ms)", i + 1),
            Err(e) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {e} ({ms} ms)", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
