//! Houdini: start every unknown at the conjunction of all its qualifier
//! instances and drop instances that some clause fails to establish, until
//! nothing changes. The result is the strongest solution expressible as a
//! conjunction of instances.

use std::collections::{HashMap, VecDeque};
use std::thread;

use super::horn::{apply_vc, HornClause, Head};
use super::qualifier::instances;
use super::Kappas;
use crate::ast::{Name, Pred};
use crate::logic::{Binder, Vc};
use crate::smt::{Backend, SmtError, Verdict};
use crate::surface::Qualifier;

pub type Assignment = HashMap<Name, Vec<Pred>>;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SolveStats {
    /// Clauses taken off the worklist.
    pub rounds: usize,
    /// Rounds that removed at least one qualifier.
    pub weakenings: usize,
    pub queries: usize,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub assignment: Assignment,
    /// Verdict for each concrete-head clause, by clause index.
    pub concrete: Vec<(usize, Verdict)>,
    pub stats: SolveStats,
}

impl Outcome {
    pub fn safe(&self) -> bool {
        self.concrete.iter().all(|(_, v)| v.is_valid())
    }
}

pub fn initial(kappas: &Kappas, quals: &[Qualifier]) -> Assignment {
    kappas.vars.iter().map(|k| (k.name.clone(), instances(quals, &k.params))).collect()
}

pub fn solve(
    clauses: &[HornClause],
    kappas: &Kappas,
    quals: &[Qualifier],
    backend: &dyn Backend,
    jobs: usize,
) -> Result<Outcome, SmtError> {
    solve_from(clauses, kappas, initial(kappas, quals), backend, jobs)
}

/// Weaken `init` to the greatest fixpoint of the κ-headed clauses, then
/// check the concrete clauses against it.
pub fn solve_from(
    clauses: &[HornClause],
    kappas: &Kappas,
    init: Assignment,
    backend: &dyn Backend,
    jobs: usize,
) -> Result<Outcome, SmtError> {
    let mut sol = init;
    let mut stats = SolveStats::default();
    let mut deps: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, c) in clauses.iter().enumerate() {
        for k in kappas.vars.iter().map(|k| k.name.as_str()) {
            if c.vc.binders.iter().any(|b| b.hyp.any(&mut |p| matches!(p, Pred::Kappa(n, _) if n == k))) {
                deps.entry(k).or_default().push(i);
            }
        }
    }
    let mut queue: VecDeque<usize> = VecDeque::new();
    let mut queued = vec![false; clauses.len()];
    for (i, c) in clauses.iter().enumerate() {
        if matches!(c.head, Head::Kappa(..)) {
            queue.push_back(i);
            queued[i] = true;
        }
    }
    while let Some(i) = queue.pop_front() {
        queued[i] = false;
        stats.rounds += 1;
        let Head::Kappa(k, args) = &clauses[i].head else { continue };
        let current = sol.get(k).cloned().unwrap_or_default();
        if current.is_empty() {
            continue;
        }
        let decl = kappas.get(k).expect("declared unknown");
        let map: HashMap<Name, Pred> =
            decl.params.iter().map(|(n, _)| n.clone()).zip(args.iter().map(|a| Pred::var(a.clone()))).collect();
        let base = apply_vc(&clauses[i].vc, kappas, &sol);
        let goals: Vec<Pred> = current.iter().map(|q| q.subst(&map)).collect();
        stats.queries += 1;
        if backend.check(&Vc { goal: Pred::conj(goals.iter().cloned()), ..base.clone() })?.is_valid() {
            continue;
        }
        let vcs: Vec<Vc> = goals.into_iter().map(|g| Vc { goal: g, ..base.clone() }).collect();
        stats.queries += vcs.len();
        let verdicts = check_parallel(backend, &vcs, jobs)?;
        let kept: Vec<Pred> =
            current.into_iter().zip(&verdicts).filter(|(_, v)| v.is_valid()).map(|(q, _)| q).collect();
        stats.weakenings += 1;
        sol.insert(k.clone(), kept);
        for &d in deps.get(k.as_str()).into_iter().flatten() {
            if !queued[d] && matches!(clauses[d].head, Head::Kappa(..)) {
                queued[d] = true;
                queue.push_back(d);
            }
        }
    }
    let concrete_ix: Vec<usize> =
        clauses.iter().enumerate().filter(|(_, c)| c.head == Head::Concrete).map(|(i, _)| i).collect();
    let vcs: Vec<Vc> = concrete_ix.iter().map(|&i| apply_vc(&clauses[i].vc, kappas, &sol)).collect();
    stats.queries += vcs.len();
    let verdicts = check_parallel(backend, &vcs, jobs)?;
    Ok(Outcome { assignment: sol, concrete: concrete_ix.into_iter().zip(verdicts).collect(), stats })
}

/// Check independent VCs on up to `jobs` threads, preserving order.
pub fn check_parallel(backend: &dyn Backend, vcs: &[Vc], jobs: usize) -> Result<Vec<Verdict>, SmtError> {
    let jobs = jobs.max(1);
    if jobs == 1 || vcs.len() < 2 {
        return backend.check_many(vcs);
    }
    let chunk = vcs.len().div_ceil(jobs);
    thread::scope(|s| {
        let handles: Vec<_> = vcs.chunks(chunk).map(|c| s.spawn(move || backend.check_many(c))).collect();
        let mut out = Vec::with_capacity(vcs.len());
        for h in handles {
            out.extend(h.join().expect("solver thread panicked")?);
        }
        Ok(out)
    })
}

/// Drop instances implied by the remaining ones, last first, for display.
pub fn simplify(kappas: &Kappas, k: &str, insts: &[Pred], backend: &dyn Backend) -> Result<Vec<Pred>, SmtError> {
    let Some(decl) = kappas.get(k) else { return Ok(insts.to_vec()) };
    let mut keep = insts.to_vec();
    let mut i = keep.len();
    while i > 0 {
        i -= 1;
        let others: Vec<Pred> = keep.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, q)| q.clone()).collect();
        let mut vc = Vc::new(format!("simplify.{k}"));
        vc.binders = decl.params.iter().map(|(n, s)| Binder { name: n.clone(), sort: s.clone(), hyp: Pred::tt() }).collect();
        if let Some(last) = vc.binders.last_mut() {
            last.hyp = Pred::conj(others);
        }
        vc.goal = keep[i].clone();
        vc.normalize_sorts();
        if backend.check(&vc)?.is_valid() {
            keep.remove(i);
        }
    }
    Ok(keep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{BinOp, Span};
    use crate::infer::horn::split;
    use crate::infer::qualifier::defaults;
    use crate::logic::Sort;
    use crate::smt::Oracle;

    fn kapp(k: &str, args: &[&str]) -> Pred {
        Pred::Kappa(k.into(), args.iter().map(|a| Pred::var(*a)).collect())
    }

    #[test]
    fn positive_maximum() {
        // x, y positive flow into κ; κ must imply positivity.
        let mut ks = Kappas::default();
        let k = ks.fresh(vec![("x".into(), Sort::Int), ("y".into(), Sort::Int), ("v".into(), Sort::Int)], 2, "p", "posMax", Span::default());
        let pos = |x: &str| Pred::bin(BinOp::Lt, Pred::Int(0), Pred::var(x));
        let env = |vc: Vc| vc.bind("x", Sort::Int, pos("x")).bind("y", Sort::Int, pos("y"));
        let vcs = vec![
            env(Vc::new("a")).bind("v", Sort::Int, Pred::eq(Pred::var("v"), Pred::var("x"))).goal(kapp(&k, &["x", "y", "v"])),
            env(Vc::new("b")).bind("v", Sort::Int, Pred::eq(Pred::var("v"), Pred::var("y"))).goal(kapp(&k, &["x", "y", "v"])),
            env(Vc::new("c")).bind("v", Sort::Int, kapp(&k, &["x", "y", "v"])).goal(pos("v")),
        ];
        let clauses: Vec<HornClause> = vcs.iter().flat_map(|v| split(v, &ks).unwrap()).collect();
        let oracle = Oracle { bound: 3 };
        let out = solve(&clauses, &ks, &defaults(), &oracle, 1).unwrap();
        assert!(out.safe());
        let s = simplify(&ks, &k, &out.assignment[&k], &oracle).unwrap();
        assert_eq!(s.iter().map(|p| p.to_string()).collect::<Vec<_>>(), vec!["0 < v"]);
    }

    #[test]
    fn refutes_when_no_instance_suffices() {
        let mut ks = Kappas::default();
        let k = ks.fresh(vec![("v".into(), Sort::Int)], 0, "a", "t", Span::default());
        let vcs = vec![
            Vc::new("a").bind("v", Sort::Int, Pred::tt()).goal(kapp(&k, &["v"])),
            Vc::new("b").bind("v", Sort::Int, kapp(&k, &["v"])).goal(Pred::bin(BinOp::Lt, Pred::Int(0), Pred::var("v"))),
        ];
        let clauses: Vec<HornClause> = vcs.iter().flat_map(|v| split(v, &ks).unwrap()).collect();
        let out = solve(&clauses, &ks, &defaults(), &Oracle { bound: 3 }, 2).unwrap();
        assert!(!out.safe());
        assert!(out.assignment[&k].is_empty());
    }
}
