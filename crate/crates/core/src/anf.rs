//! Administrative normal form: every application argument and every `if`
//! scrutinee becomes a variable, nested lets are flattened.

use std::collections::BTreeSet;

use crate::ast::{Literal, Name, Prim, RType, Span, Term, TermKind};
use crate::surface::Program;

struct Bind {
    name: Name,
    annot: Option<RType>,
    term: Term,
    span: Span,
}

pub struct Normalizer {
    next: usize,
    used: BTreeSet<Name>,
}

impl Normalizer {
    pub fn new(used: BTreeSet<Name>) -> Normalizer {
        Normalizer { next: 0, used }
    }

    fn fresh(&mut self) -> Name {
        loop {
            let n = format!("$t{}", self.next);
            self.next += 1;
            if self.used.insert(n.clone()) {
                return n;
            }
        }
    }

    pub fn normalize(&mut self, e: &Term) -> Term {
        let (binds, c) = self.comp(e);
        wrap(binds, c)
    }

    fn comp(&mut self, e: &Term) -> (Vec<Bind>, Term) {
        let span = e.span;
        let mk = |kind| Term::new(kind, span);
        match &e.kind {
            TermKind::Var(_) | TermKind::Const(_) => (vec![], e.clone()),
            TermKind::Lam { binder, ty, body } => (
                vec![],
                mk(TermKind::Lam { binder: binder.clone(), ty: ty.clone(), body: Box::new(self.normalize(body)) }),
            ),
            TermKind::TLam { tyvar, body } => {
                (vec![], mk(TermKind::TLam { tyvar: tyvar.clone(), body: Box::new(self.normalize(body)) }))
            }
            TermKind::PLam { rvar, rvar_ty, body } => (
                vec![],
                mk(TermKind::PLam {
                    rvar: rvar.clone(),
                    rvar_ty: rvar_ty.clone(),
                    body: Box::new(self.normalize(body)),
                }),
            ),
            TermKind::CAbs { bound, body } => {
                (vec![], mk(TermKind::CAbs { bound: bound.clone(), body: Box::new(self.normalize(body)) }))
            }
            TermKind::Let { binder, annot, bound, body } => {
                let (mut bs, c) = self.comp(bound);
                bs.push(Bind { name: binder.clone(), annot: annot.clone(), term: c, span });
                let (bs2, c2) = self.comp(body);
                bs.extend(bs2);
                (bs, c2)
            }
            TermKind::If { cond, then_branch, else_branch } => {
                let (bs, v) = self.atomize(cond);
                let kind = TermKind::If {
                    cond: Box::new(v),
                    then_branch: Box::new(self.normalize(then_branch)),
                    else_branch: Box::new(self.normalize(else_branch)),
                };
                (bs, mk(kind))
            }
            TermKind::TApp { term, ty } => {
                let (bs, c) = self.comp(term);
                (bs, mk(TermKind::TApp { term: Box::new(c), ty: ty.clone() }))
            }
            TermKind::PApp { term, witness } => {
                let (bs, c) = self.comp(term);
                (bs, mk(TermKind::PApp { term: Box::new(c), witness: witness.clone() }))
            }
            TermKind::CApp { term, bound } => {
                let (bs, c) = self.comp(term);
                (bs, mk(TermKind::CApp { term: Box::new(c), bound: bound.clone() }))
            }
            TermKind::App { fun, arg } => {
                let (mut bs, mut f) = self.comp(fun);
                let (ba, a) = self.atomize(arg);
                // Effects of the argument may not overtake the evaluation of
                // a non-value function part.
                if !ba.iter().all(|b| is_pure(&b.term)) && !is_value(&f) {
                    let t = self.fresh();
                    bs.push(Bind { name: t.clone(), annot: None, term: f, span: fun.span });
                    f = Term::var(t, fun.span);
                }
                bs.extend(ba);
                (bs, mk(TermKind::App { fun: Box::new(f), arg: Box::new(a) }))
            }
        }
    }

    fn atomize(&mut self, e: &Term) -> (Vec<Bind>, Term) {
        let (mut bs, c) = self.comp(e);
        if c.as_var().is_some() {
            return (bs, c);
        }
        let t = self.fresh();
        let span = c.span;
        bs.push(Bind { name: t.clone(), annot: None, term: c, span });
        (bs, Term::var(t, span))
    }
}

fn wrap(binds: Vec<Bind>, body: Term) -> Term {
    binds
        .into_iter()
        .rev()
        .fold(body, |acc, b| Term::let_(b.name, b.annot, b.term, acc, b.span))
}

fn is_value(t: &Term) -> bool {
    matches!(
        t.kind,
        TermKind::Var(_)
            | TermKind::Const(_)
            | TermKind::Lam { .. }
            | TermKind::TLam { .. }
            | TermKind::PLam { .. }
            | TermKind::CAbs { .. }
    )
}

/// Values and total primitive applications to atoms: evaluating them can
/// neither crash nor diverge, so they may be reordered freely.
fn is_pure(t: &Term) -> bool {
    if is_value(t) {
        return true;
    }
    let atom = |t: &Term| matches!(t.kind, TermKind::Var(_) | TermKind::Const(_));
    match &t.kind {
        TermKind::App { fun, arg } if atom(arg) => match &fun.kind {
            TermKind::Const(Literal::Prim(Prim::Not | Prim::MulBy(_))) => true,
            TermKind::App { fun: f2, arg: a2 } if atom(a2) => matches!(
                f2.kind,
                TermKind::Const(Literal::Prim(p)) if p != Prim::Assert && p.arity() == 2
            ),
            _ => false,
        },
        _ => false,
    }
}

/// Normalize a closed or open term; fresh names avoid every name in `e`.
pub fn normalize(e: &Term) -> Term {
    let mut used: BTreeSet<Name> = e.binders().into_iter().cloned().collect();
    used.extend(e.free_vars());
    Normalizer::new(used).normalize(e)
}

/// Normalize every definition of a program with one shared name supply.
pub fn normalize_program(p: &Program) -> Program {
    let mut used: BTreeSet<Name> = BTreeSet::new();
    for d in &p.defs {
        used.insert(d.name.clone());
        used.extend(d.body.binders().into_iter().cloned());
    }
    for a in &p.assumes {
        used.insert(a.name.clone());
    }
    let mut n = Normalizer::new(used);
    let mut out = p.clone();
    for d in &mut out.defs {
        d.body = n.normalize(&d.body);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{parse_term, print_term};

    fn norm(src: &str) -> String {
        print_term(&normalize(&parse_term(src).unwrap()))
    }

    #[test]
    fn names_nested_argument() {
        assert_eq!(norm("f (g x)"), "let $t0 = g x in f $t0");
    }

    #[test]
    fn leaves_normal_application() {
        assert_eq!(norm("f x"), "f x");
    }

    #[test]
    fn names_innermost_first() {
        assert_eq!(norm("f (g (h x))"), "let $t0 = h x in let $t1 = g $t0 in f $t1");
    }

    #[test]
    fn names_constant_arguments() {
        assert_eq!(norm("f 3"), "let $t0 = 3 in f $t0");
    }

    #[test]
    fn flattens_nested_lets() {
        assert_eq!(norm("let x = (let y = f z in g y) in x"), "let y = f z in let x = g y in x");
    }

    #[test]
    fn keeps_function_before_effectful_argument() {
        assert_eq!(norm("f x (g y)"), "let $t1 = f x in let $t0 = g y in $t1 $t0");
    }

    #[test]
    fn total_primitive_arguments_do_not_force_naming() {
        assert_eq!(norm("f x (y + 1)"), "let $t0 = 1 in let $t1 = add y $t0 in f x $t1");
    }

    #[test]
    fn normalizes_if_scrutinee() {
        assert_eq!(norm("if x < y then 1 else 2"), "let $t0 = lt x y in if $t0 then 1 else 2");
    }

    #[test]
    fn output_is_anf_and_idempotent() {
        for src in ["f (g (h x))", "f x (g y) (h 3)", "if f (g x) then (\\z -> z (y + 1)) else g (let a = 2 in a)"] {
            let once = normalize(&parse_term(src).unwrap());
            assert!(once.is_anf());
            assert_eq!(normalize(&once), once);
        }
    }
}
