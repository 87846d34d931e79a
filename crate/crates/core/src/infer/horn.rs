//! Splitting verification conditions with unknowns into Horn clauses, and
//! the positivity check that makes the Houdini fixpoint sound.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use super::Kappas;
use crate::ast::{BinOp, Name, Pred, UnOp};
use crate::logic::{Binder, Sort, Vc};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Head {
    /// κ applied to distinct binders of the clause.
    Kappa(Name, Vec<Name>),
    Concrete,
}

/// A VC whose goal is either one unknown application or κ-free.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HornClause {
    pub vc: Vc,
    pub head: Head,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HornError {
    #[error("{vc}: non-monotone occurrence of an unknown: {reason}")]
    NonMonotonic { vc: String, reason: String },
}

fn nonmono(vc: &Vc, reason: impl Into<String>) -> HornError {
    HornError::NonMonotonic { vc: vc.name.clone(), reason: reason.into() }
}

/// Split the goal on conjunctions, push implication antecedents into the
/// hypotheses and give every unknown in head position variable arguments.
pub fn split(vc: &Vc, kappas: &Kappas) -> Result<Vec<HornClause>, HornError> {
    let mut out = Vec::new();
    go(vc, &vc.goal, &mut Vec::new(), kappas, &mut out)?;
    let n = out.len();
    if n > 1 {
        for (i, c) in out.iter_mut().enumerate() {
            c.vc.name = format!("{}#{i}", vc.name);
        }
    }
    Ok(out)
}

fn go(vc: &Vc, goal: &Pred, ants: &mut Vec<Pred>, kappas: &Kappas, out: &mut Vec<HornClause>) -> Result<(), HornError> {
    match goal {
        Pred::Bool(true) => Ok(()),
        Pred::Bin(BinOp::And, a, b) => {
            go(vc, a, ants, kappas, out)?;
            go(vc, b, ants, kappas, out)
        }
        Pred::Bin(BinOp::Imp, a, b) => {
            ants.push((**a).clone());
            let r = go(vc, b, ants, kappas, out);
            ants.pop();
            r
        }
        Pred::Kappa(k, args) => {
            let decl = kappas.get(k).ok_or_else(|| nonmono(vc, format!("undeclared unknown `{k}`")))?;
            let mut c = with_antecedents(vc, ants);
            let bound: BTreeSet<&str> = vc.binders.iter().map(|b| b.name.as_str()).collect();
            let mut names = Vec::new();
            let mut fresh = 0;
            for (a, (_, sort)) in args.iter().zip(&decl.params) {
                match a {
                    Pred::Var(x) if bound.contains(x.as_str()) && !names.contains(x) => names.push(x.clone()),
                    _ => {
                        let z = loop {
                            let z = format!("$z{fresh}");
                            fresh += 1;
                            if !bound.contains(z.as_str()) {
                                break z;
                            }
                        };
                        c.binders.push(Binder { name: z.clone(), sort: sort.clone(), hyp: Pred::eq(Pred::var(z.clone()), a.clone()) });
                        names.push(z);
                    }
                }
            }
            c.goal = Pred::Kappa(k.clone(), names.iter().map(|n| Pred::var(n.clone())).collect());
            out.push(HornClause { vc: c, head: Head::Kappa(k.clone(), names) });
            Ok(())
        }
        g => {
            if g.has_kappa() {
                return Err(nonmono(vc, format!("unknown inside goal `{g}`")));
            }
            let mut c = with_antecedents(vc, ants);
            c.goal = g.clone();
            out.push(HornClause { vc: c, head: Head::Concrete });
            Ok(())
        }
    }
}

fn with_antecedents(vc: &Vc, ants: &[Pred]) -> Vc {
    let mut c = vc.clone();
    if ants.is_empty() {
        return c;
    }
    let extra = Pred::conj(ants.iter().cloned());
    match c.binders.last_mut() {
        Some(b) => b.hyp = Pred::and(b.hyp.clone(), extra),
        None => c.binders.push(Binder { name: "$h".into(), sort: Sort::Bool, hyp: extra }),
    }
    c
}

/// Unknowns may occur in hypotheses only under conjunction, disjunction and
/// implication consequents, and the head is a single well-formed unknown
/// application or free of unknowns.
pub fn certify(c: &HornClause) -> Result<(), HornError> {
    for b in &c.vc.binders {
        positive(&b.hyp, true).map_err(|r| nonmono(&c.vc, format!("{r} in hypothesis of `{}`", b.name)))?;
    }
    match &c.head {
        Head::Concrete if c.vc.goal.has_kappa() => Err(nonmono(&c.vc, "unknown in concrete head")),
        Head::Concrete => Ok(()),
        Head::Kappa(k, args) => {
            let bound: BTreeSet<&str> = c.vc.binders.iter().map(|b| b.name.as_str()).collect();
            let distinct: BTreeSet<&Name> = args.iter().collect();
            let goal_ok = c.vc.goal == Pred::Kappa(k.clone(), args.iter().map(|a| Pred::var(a.clone())).collect());
            if distinct.len() != args.len() || args.iter().any(|a| !bound.contains(a.as_str())) || !goal_ok {
                Err(nonmono(&c.vc, "head arguments are not distinct binders"))
            } else {
                Ok(())
            }
        }
    }
}

fn positive(p: &Pred, pos: bool) -> Result<(), String> {
    match p {
        Pred::Kappa(k, _) if !pos => Err(format!("`{k}` in negative position")),
        Pred::Kappa(..) => Ok(()),
        Pred::Bin(BinOp::And | BinOp::Or, a, b) => {
            positive(a, pos)?;
            positive(b, pos)
        }
        Pred::Bin(BinOp::Imp, a, b) => {
            positive(a, !pos)?;
            positive(b, pos)
        }
        Pred::Un(UnOp::Not, a) => positive(a, !pos),
        other => {
            if other.has_kappa() {
                Err(format!("unknown under `{other}`"))
            } else {
                Ok(())
            }
        }
    }
}

/// Replace every unknown application by the conjunction assigned to it.
pub fn apply(p: &Pred, kappas: &Kappas, sol: &HashMap<Name, Vec<Pred>>) -> Pred {
    p.map(&mut |q| match q {
        Pred::Kappa(k, args) => {
            let Some(decl) = kappas.get(&k) else { return Pred::Kappa(k, args) };
            let map: HashMap<Name, Pred> = decl.params.iter().map(|(n, _)| n.clone()).zip(args).collect();
            Pred::conj(sol.get(&k).into_iter().flatten().map(|i| i.subst(&map)))
        }
        other => other,
    })
}

pub fn apply_vc(vc: &Vc, kappas: &Kappas, sol: &HashMap<Name, Vec<Pred>>) -> Vc {
    let mut out = vc.clone();
    for b in &mut out.binders {
        b.hyp = apply(&b.hyp, kappas, sol);
    }
    out.goal = apply(&out.goal, kappas, sol);
    out.funs.retain(|f| kappas.get(&f.name).is_none());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::Span;

    fn ks() -> Kappas {
        let mut ks = Kappas::default();
        ks.fresh(vec![("v".into(), Sort::Int)], 0, "p", "t", Span::default());
        ks
    }

    fn k(arg: Pred) -> Pred {
        Pred::Kappa("$k0".into(), vec![arg])
    }

    #[test]
    fn pushes_antecedents_and_names_head_arguments() {
        let vc = Vc::new("c")
            .bind("x", Sort::Int, k(Pred::var("x")))
            .goal(Pred::implies(Pred::var("b"), k(Pred::bin(BinOp::Add, Pred::var("x"), Pred::Int(1)))));
        let cs = split(&vc, &ks()).unwrap();
        assert_eq!(cs.len(), 1);
        let c = &cs[0];
        assert!(matches!(&c.head, Head::Kappa(_, a) if a[0] == "$z0"));
        assert_eq!(c.vc.binders.len(), 2);
        assert!(c.vc.binders[0].hyp.to_string().contains('b'));
        certify(c).unwrap();
    }

    #[test]
    fn conjunctive_goals_split() {
        let vc = Vc::new("c").bind("x", Sort::Int, Pred::tt()).goal(Pred::and(k(Pred::var("x")), Pred::eq(Pred::var("x"), Pred::var("x"))));
        let cs = split(&vc, &ks()).unwrap();
        assert_eq!(cs.len(), 2);
        assert_eq!(cs[1].head, Head::Concrete);
        assert_eq!(cs[0].vc.name, "c#0");
    }

    #[test]
    fn negative_unknowns_are_rejected() {
        let vc = Vc::new("c").bind("x", Sort::Int, Pred::not(k(Pred::var("x")))).goal(Pred::tt());
        let c = HornClause { vc, head: Head::Concrete };
        assert!(certify(&c).is_err());
        let vc = Vc::new("d").bind("x", Sort::Int, Pred::tt()).goal(Pred::bin(BinOp::Or, k(Pred::var("x")), Pred::tt()));
        assert!(split(&vc, &ks()).is_err());
    }

    #[test]
    fn apply_substitutes_arguments() {
        let mut sol = HashMap::new();
        sol.insert("$k0".to_string(), vec![Pred::bin(BinOp::Lt, Pred::Int(0), Pred::var("v"))]);
        let p = apply(&k(Pred::var("y")), &ks(), &sol);
        assert_eq!(p.to_string(), "0 < y");
    }
}
