//! Qualifier patterns and their instances over an unknown's parameters.

use std::collections::{BTreeSet, HashMap};

use crate::ast::{Base, Name, Pred};
use crate::logic::Sort;
use crate::surface::{parse_program, Qualifier, SurfaceError};

const DEFAULTS: &str = "\
qualif Pos(v:Int): 0 < v
qualif Neg(v:Int): v < 0
qualif NonNeg(v:Int): 0 <= v
qualif Le(v:Int, *:Int): v <= *
qualif Ge(v:Int, *:Int): * <= v
qualif Eq(v:a, *:a): v = *
qualif Succ(v:Int, *:Int): v = * + 1
qualif Sum(v:Int, *:Int, *:Int): v = * + *
";

pub fn defaults() -> Vec<Qualifier> {
    parse_program(DEFAULTS).expect("default qualifiers parse").qualifiers
}

/// Qualifiers from a file containing only `qualif` declarations.
pub fn parse_qualifiers(src: &str) -> Result<Vec<Qualifier>, SurfaceError> {
    Ok(parse_program(src)?.qualifiers)
}

/// Sort variables bound while matching a pattern.
type SortSubst = HashMap<Name, Sort>;

fn unify(pat: &Base, s: &Sort, sub: &mut SortSubst) -> bool {
    match pat {
        Base::Int => *s == Sort::Int,
        Base::Bool => *s == Sort::Bool,
        Base::TyVar(a) => match sub.get(a) {
            Some(t) => t == s,
            None => {
                sub.insert(a.clone(), s.clone());
                true
            }
        },
    }
}

/// Every instance of `quals` for an unknown with parameters `params`
/// (value parameter last). Holes range over the other parameters of a
/// compatible sort and, for integer holes, the constants 0 and 1.
pub fn instances(quals: &[Qualifier], params: &[(Name, Sort)]) -> Vec<Pred> {
    let Some(((v, vsort), others)) = params.split_last() else { return vec![] };
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for q in quals {
        let mut sub = SortSubst::new();
        if !unify(&q.vv.1, vsort, &mut sub) {
            continue;
        }
        let mut chosen: Vec<Pred> = Vec::new();
        fill(q, 0, others, &mut sub, &mut chosen, &mut |chosen| {
            let mut map: HashMap<Name, Pred> = HashMap::new();
            map.insert(q.vv.0.clone(), Pred::var(v.clone()));
            for ((h, _), c) in q.holes.iter().zip(chosen) {
                map.insert(h.clone(), c.clone());
            }
            let inst = q.body.subst(&map);
            if seen.insert(inst.to_string()) {
                out.push(inst);
            }
        });
    }
    out
}

fn fill(
    q: &Qualifier,
    i: usize,
    others: &[(Name, Sort)],
    sub: &mut SortSubst,
    chosen: &mut Vec<Pred>,
    emit: &mut impl FnMut(&[Pred]),
) {
    if i == q.holes.len() {
        emit(chosen);
        return;
    }
    let pat = &q.holes[i].1;
    let mut cands: Vec<(Pred, Sort)> = others.iter().map(|(n, s)| (Pred::var(n.clone()), s.clone())).collect();
    cands.push((Pred::Int(0), Sort::Int));
    cands.push((Pred::Int(1), Sort::Int));
    for (c, s) in cands {
        let mut sub2 = sub.clone();
        if !unify(pat, &s, &mut sub2) {
            continue;
        }
        chosen.push(c);
        fill(q, i + 1, others, &mut sub2, chosen, emit);
        chosen.pop();
    }
}
