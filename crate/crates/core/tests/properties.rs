mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use boundcheck::anf::normalize;
use boundcheck::ast::{Literal, Term, TermKind};
use boundcheck::eval::{eval, translate, EvalError, Mode, Value};
use boundcheck::infer::horn::{apply_vc, Head, HornClause};
use boundcheck::infer::qualifier::instances;
use boundcheck::infer::solve::{initial, solve, Assignment};
use boundcheck::infer::Kappas;
use boundcheck::smt::{Backend, Oracle, Verdict};

const FUEL: u64 = 10_000;

fn term(seed: u64) -> Term {
    common::TermGen { rng: ChaCha8Rng::seed_from_u64(seed), n: 0 }.int(5, &[])
}

/// Observable outcome: a constant, a crash, or an error.
fn observe(r: Result<Value, EvalError>) -> Result<Option<Literal>, String> {
    match r {
        Ok(Value::Crash) => Err("crash".into()),
        Ok(v) => Ok(v.constant()),
        Err(e) => Err(e.to_string()),
    }
}

/// Drop every type, refinement and bound abstraction and application.
fn erase(t: &Term) -> Term {
    let b = |t: &Term| Box::new(erase(t));
    let kind = match &t.kind {
        TermKind::TLam { body, .. } | TermKind::PLam { body, .. } | TermKind::CAbs { body, .. } => {
            return erase(body)
        }
        TermKind::TApp { term, .. } | TermKind::PApp { term, .. } | TermKind::CApp { term, .. } => {
            return erase(term)
        }
        TermKind::Var(_) | TermKind::Const(_) => t.kind.clone(),
        TermKind::Lam { binder, ty, body } => TermKind::Lam { binder: binder.clone(), ty: ty.clone(), body: b(body) },
        TermKind::App { fun, arg } => TermKind::App { fun: b(fun), arg: b(arg) },
        TermKind::Let { binder, annot, bound, body } => {
            TermKind::Let { binder: binder.clone(), annot: annot.clone(), bound: b(bound), body: b(body) }
        }
        TermKind::If { cond, then_branch, else_branch } => {
            TermKind::If { cond: b(cond), then_branch: b(then_branch), else_branch: b(else_branch) }
        }
    };
    Term::new(kind, t.span)
}

fn erased_free(t: &Term) -> bool {
    !t.any(&mut |s| {
        matches!(
            s.kind,
            TermKind::TLam { .. }
                | TermKind::PLam { .. }
                | TermKind::CAbs { .. }
                | TermKind::TApp { .. }
                | TermKind::PApp { .. }
                | TermKind::CApp { .. }
        )
    })
}

fn valid(c: &HornClause, kappas: &Kappas, sol: &Assignment) -> bool {
    Oracle { bound: 3 }.check(&apply_vc(&c.vc, kappas, sol)).unwrap() == Verdict::Valid
}

fn kappa_clauses(clauses: &[HornClause]) -> impl Iterator<Item = &HornClause> {
    clauses.iter().filter(|c| matches!(c.head, Head::Kappa(..)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn evaluation_is_pure(seed in any::<u64>()) {
        let e = term(seed);
        prop_assert_eq!(observe(eval(&e, FUEL, Mode::LambdaB)), observe(eval(&e, FUEL, Mode::LambdaB)));
    }

    #[test]
    fn normalization_preserves_meaning(seed in any::<u64>()) {
        let e = term(seed);
        let before = observe(eval(&e, FUEL, Mode::LambdaB));
        prop_assume!(before.is_ok());
        prop_assert_eq!(before, observe(eval(&normalize(&e), 4 * FUEL, Mode::LambdaB)));
    }

    #[test]
    fn erasure_commutes_with_evaluation(seed in any::<u64>()) {
        let e = term(seed);
        let erased = erase(&e);
        prop_assert!(erased_free(&erased));
        let b = observe(eval(&e, FUEL, Mode::LambdaB));
        prop_assume!(b.is_ok() || b == Err("crash".into()));
        prop_assert_eq!(&b, &observe(eval(&erased, FUEL, Mode::LambdaB)));
        prop_assert_eq!(&b, &observe(eval(&erased, FUEL, Mode::LambdaP)));
    }

    #[test]
    fn translation_preserves_constants(seed in any::<u64>()) {
        let e = term(seed);
        let b = observe(eval(&e, FUEL, Mode::LambdaB));
        prop_assume!(matches!(b, Ok(Some(_))));
        prop_assert_eq!(b, observe(eval(&translate(&e), 4 * FUEL, Mode::LambdaP)));
    }

    #[test]
    fn houdini_solution_is_sound(seed in any::<u64>()) {
        let (kappas, clauses, quals) = common::horn_system(&mut ChaCha8Rng::seed_from_u64(seed));
        let out = solve(&clauses, &kappas, &quals, &Oracle { bound: 3 }, 1).unwrap();
        for c in kappa_clauses(&clauses) {
            prop_assert!(valid(c, &kappas, &out.assignment), "{}", c.vc.name);
        }
    }

    #[test]
    fn houdini_solution_is_maximal(seed in any::<u64>()) {
        let (kappas, clauses, quals) = common::horn_system(&mut ChaCha8Rng::seed_from_u64(seed));
        let out = solve(&clauses, &kappas, &quals, &Oracle { bound: 3 }, 1).unwrap();
        for k in &kappas.vars {
            let kept: BTreeSet<String> = out.assignment[&k.name].iter().map(|p| p.to_string()).collect();
            for q in instances(&quals, &k.params) {
                if kept.contains(&q.to_string()) {
                    continue;
                }
                let mut more = out.assignment.clone();
                more.get_mut(&k.name).unwrap().push(q.clone());
                prop_assert!(kappa_clauses(&clauses).any(|c| !valid(c, &kappas, &more)), "{} can keep {}", k.name, q);
            }
        }
    }

    #[test]
    fn houdini_rounds_are_bounded(seed in any::<u64>()) {
        let (kappas, clauses, quals) = common::horn_system(&mut ChaCha8Rng::seed_from_u64(seed));
        let out = solve(&clauses, &kappas, &quals, &Oracle { bound: 3 }, 1).unwrap();
        let total: usize = kappas.vars.iter().map(|k| instances(&quals, &k.params).len()).sum();
        prop_assert!(out.stats.weakenings <= total, "{} weakenings for {} candidates", out.stats.weakenings, total);
        let init = initial(&kappas, &quals);
        for (k, kept) in &out.assignment {
            prop_assert!(kept.iter().all(|q| init[k].contains(q)), "{} grew", k);
        }
    }
}
