//! Translation from the bounded calculus to plain refinement types.
//!
//! A bound becomes an extra function argument whose type is the bound
//! read as a Bool-valued function. Inside a bounded definition, every time
//! a variable is bound the bound functions are applied to the in-scope
//! variables of matching shape (materialization), which brings the
//! bound's implication into the environment. At use sites the argument is
//! the constant-true function; checking it against the bound's type is
//! what proves the bound.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::ast::{Base, Bound, Literal, Name, RType, Schema, Span, Term, TermKind, UType};
use crate::infer::shape::{Prepared, PreparedDef};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Materialize {
    /// Only calls that mention the variable just bound.
    #[default]
    New,
    /// Every call over the variables in scope at each binding.
    All,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Options {
    pub materialize: Materialize,
    pub max_materialize: Option<usize>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ElabError {
    #[error("{span}: in `{def}`: {count} ghost calls at binding `{binder}` exceed the limit of {max}")]
    TooManyCalls { def: Name, binder: Name, span: Span, count: usize, max: usize },
}

/// Materialization at one binding site.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SiteStat {
    pub def: Name,
    pub binder: Name,
    /// Variables in scope, including the new one.
    pub in_scope: usize,
    /// Arity of each bound function in scope.
    pub arities: Vec<usize>,
    pub calls: usize,
}

impl SiteStat {
    /// Σ n^k over the bound functions in scope.
    pub fn limit(&self) -> usize {
        self.arities.iter().map(|&k| self.in_scope.pow(k as u32)).sum()
    }
}

#[derive(Clone, Debug)]
pub struct ElabDef {
    pub name: Name,
    /// Signature with bounds replaced by ghost function arguments.
    pub schema: Option<Schema>,
    pub body: Term,
    pub recursive: bool,
    pub span: Span,
    pub ghosts: Vec<Name>,
}

#[derive(Clone, Debug, Default)]
pub struct Elaborated {
    pub defs: Vec<ElabDef>,
    pub shapes: HashMap<Name, UType>,
    pub sites: Vec<SiteStat>,
}

/// ⦅φ⦆ = x₁:b₁ → … → xₙ:bₙ → {v:Bool | body}.
pub fn bound_type(b: &Bound) -> RType {
    let avoid: BTreeSet<Name> = b.params.iter().map(|(x, _)| x.clone()).collect();
    let vv = crate::ast::fresh_name("v", &avoid);
    b.params.iter().rev().fold(RType::base(Base::Bool, vv, b.body.clone()), |acc, (x, base)| {
        RType::fun(x.clone(), RType::trivial(base.clone()), acc)
    })
}

/// Signature with each bound turned into a leading ghost argument.
pub fn bound_schema(s: &Schema, ghosts: &mut impl Iterator<Item = Name>) -> Schema {
    match s {
        Schema::Mono(_) => s.clone(),
        Schema::ForallTy(a, rest) => Schema::ForallTy(a.clone(), Box::new(bound_schema(rest, ghosts))),
        Schema::ForallP(p, t, rest) => Schema::ForallP(p.clone(), t.clone(), Box::new(bound_schema(rest, ghosts))),
        Schema::Bounded(b, rest) => {
            let inner = bound_schema(rest, ghosts);
            let body = inner.mono().expect("bounds precede the body").clone();
            Schema::Mono(RType::fun(ghosts.next().unwrap_or_else(|| "$bf".into()), bound_type(b), body))
        }
    }
}

struct Elab<'a> {
    opts: Options,
    shapes: &'a mut HashMap<Name, UType>,
    sites: &'a mut Vec<SiteStat>,
    counter: &'a mut usize,
    def: Name,
    self_ghosts: Option<Vec<Name>>,
    phi: Vec<(Name, UType)>,
    /// Bound functions in scope with their parameter shapes.
    psi: Vec<(Name, Vec<UType>)>,
}

type Binds = Vec<(Name, Option<RType>, Term)>;

fn wrap(binds: Binds, body: Term) -> Term {
    binds.into_iter().rev().fold(body, |acc, (x, a, t)| {
        let span = t.span;
        Term::let_(x, a, t, acc, span)
    })
}

impl Elab<'_> {
    fn fresh(&mut self, stem: &str) -> Name {
        let n = format!("${stem}{}", self.counter);
        *self.counter += 1;
        n
    }

    fn term(&mut self, e: &Term) -> Result<Term, ElabError> {
        let (binds, t) = self.comp(e)?;
        Ok(wrap(binds, t))
    }

    fn comp(&mut self, e: &Term) -> Result<(Binds, Term), ElabError> {
        let span = e.span;
        let mk = |k| Term::new(k, span);
        Ok(match &e.kind {
            TermKind::Var(x) if *x == self.def && self.self_ghosts.is_some() => {
                let ghosts = self.self_ghosts.clone().unwrap();
                let t = ghosts.iter().fold(e.clone(), |acc, g| Term::app(acc, Term::var(g.clone(), span), span));
                (vec![], t)
            }
            TermKind::Var(_) | TermKind::Const(_) => (vec![], e.clone()),
            TermKind::Lam { binder, ty, body } => {
                self.phi.push((binder.clone(), self.shape(binder)));
                let b = self.term(body)?;
                let b = self.weave(b, binder, span)?;
                self.phi.pop();
                (vec![], mk(TermKind::Lam { binder: binder.clone(), ty: ty.clone(), body: Box::new(b) }))
            }
            TermKind::App { fun, arg } => {
                let (mut bs, f) = self.comp(fun)?;
                let (bs2, a) = self.comp(arg)?;
                bs.extend(bs2);
                let a = if a.as_var().is_some() {
                    a
                } else {
                    let t = self.fresh("g");
                    if let TermKind::App { .. } = a.kind {
                        let shape = self.shapes.get(&self.def).cloned().unwrap_or(UType::Int);
                        self.shapes.insert(t.clone(), shape);
                    }
                    bs.push((t.clone(), None, a));
                    Term::var(t, span)
                };
                (bs, mk(TermKind::App { fun: Box::new(f), arg: Box::new(a) }))
            }
            TermKind::Let { binder, annot, bound, body } => {
                let (mut bs, b1) = self.comp(bound)?;
                self.phi.push((binder.clone(), self.shape(binder)));
                let b2 = self.term(body)?;
                let b2 = self.weave(b2, binder, span)?;
                self.phi.pop();
                bs.push((binder.clone(), annot.clone(), b1));
                (bs, b2)
            }
            TermKind::If { cond, then_branch, else_branch } => (
                vec![],
                mk(TermKind::If {
                    cond: cond.clone(),
                    then_branch: Box::new(self.term(then_branch)?),
                    else_branch: Box::new(self.term(else_branch)?),
                }),
            ),
            TermKind::TApp { term, ty } => {
                let (bs, t) = self.comp(term)?;
                (bs, mk(TermKind::TApp { term: Box::new(t), ty: ty.clone() }))
            }
            TermKind::PApp { term, witness } => {
                let (bs, t) = self.comp(term)?;
                (bs, mk(TermKind::PApp { term: Box::new(t), witness: witness.clone() }))
            }
            TermKind::CApp { term, bound } => {
                let (mut bs, t) = self.comp(term)?;
                let w = self.fresh("w");
                let wt = self.witness(bound, span);
                self.shapes.insert(w.clone(), bound_type(bound).shape());
                bs.push((w.clone(), None, wt));
                (bs, Term::app(t, Term::var(w, span), span))
            }
            TermKind::TLam { .. } | TermKind::PLam { .. } | TermKind::CAbs { .. } => (vec![], e.clone()),
        })
    }

    fn shape(&self, x: &str) -> UType {
        self.shapes.get(x).cloned().unwrap_or(UType::Int)
    }

    /// λx̄. true, with binders typed by the bound's parameter bases.
    fn witness(&mut self, b: &Bound, span: Span) -> Term {
        let params: Vec<(Name, Base)> = b.params.iter().map(|(_, base)| (self.fresh("_"), base.clone())).collect();
        let mut t = Term::new(TermKind::Const(Literal::Bool(true)), span);
        for (x, base) in params.into_iter().rev() {
            self.shapes.insert(x.clone(), UType::base(&base));
            t = Term::lam(x, Some(RType::trivial(base)), t, span);
        }
        t
    }

    /// Ghost calls over the variables in scope, in bound order and then
    /// lexicographic order of argument tuples.
    fn candidates(&self) -> Vec<(Name, Vec<Name>)> {
        let mut out = Vec::new();
        for (f, params) in &self.psi {
            let mut tuples: Vec<Vec<Name>> = vec![vec![]];
            for p in params {
                let choices: Vec<&Name> = self.phi.iter().filter(|(_, s)| s == p).map(|(x, _)| x).collect();
                tuples = tuples
                    .into_iter()
                    .flat_map(|t| {
                        choices.iter().map(move |c| {
                            let mut t2 = t.clone();
                            t2.push((*c).clone());
                            t2
                        })
                    })
                    .collect();
            }
            for t in tuples {
                let c = (f.clone(), t);
                if !out.contains(&c) {
                    out.push(c);
                }
            }
        }
        out
    }

    fn weave(&mut self, body: Term, new: &Name, span: Span) -> Result<Term, ElabError> {
        if self.psi.is_empty() {
            return Ok(body);
        }
        let cands: Vec<(Name, Vec<Name>)> = self
            .candidates()
            .into_iter()
            .filter(|(_, args)| self.opts.materialize == Materialize::All || args.contains(new))
            .collect();
        self.sites.push(SiteStat {
            def: self.def.clone(),
            binder: new.clone(),
            in_scope: self.phi.len(),
            arities: self.psi.iter().map(|(_, ps)| ps.len()).collect(),
            calls: cands.len(),
        });
        if let Some(max) = self.opts.max_materialize {
            if cands.len() > max {
                return Err(ElabError::TooManyCalls {
                    def: self.def.clone(),
                    binder: new.clone(),
                    span,
                    count: cands.len(),
                    max,
                });
            }
        }
        let mut binds = Binds::new();
        for (f, args) in cands {
            let call = args.iter().fold(Term::var(f, span), |acc, a| Term::app(acc, Term::var(a.clone(), span), span));
            let m = self.fresh("m");
            self.shapes.insert(m.clone(), UType::Bool);
            binds.push((m, None, call));
        }
        Ok(wrap(binds, body))
    }
}

pub fn elaborate(p: &Prepared, opts: Options) -> Result<Elaborated, ElabError> {
    let mut out = Elaborated { shapes: p.shapes.clone(), ..Default::default() };
    let mut counter = 0usize;
    for d in &p.defs {
        let def = elaborate_def(d, opts, &mut out, &mut counter)?;
        out.defs.push(def);
    }
    Ok(out)
}

fn elaborate_def(d: &PreparedDef, opts: Options, out: &mut Elaborated, counter: &mut usize) -> Result<ElabDef, ElabError> {
    // Peel the abstractions added for the signature.
    let mut outer: Vec<&Term> = Vec::new();
    let mut cur = &d.body;
    let mut bounds: Vec<&Bound> = Vec::new();
    loop {
        match &cur.kind {
            TermKind::TLam { body, .. } | TermKind::PLam { body, .. } => {
                outer.push(cur);
                cur = body;
            }
            TermKind::CAbs { bound, body } => {
                bounds.push(bound);
                cur = body;
            }
            _ => break,
        }
    }
    let ghosts: Vec<Name> = bounds
        .iter()
        .map(|_| {
            let n = format!("$bf{counter}");
            *counter += 1;
            n
        })
        .collect();
    if let Some(s) = &d.annot {
        out.shapes.insert(d.name.clone(), s.shape());
    }
    let psi = ghosts
        .iter()
        .zip(&bounds)
        .map(|(g, b)| (g.clone(), b.params.iter().map(|(_, base)| UType::base(base)).collect()))
        .collect();
    let mut el = Elab {
        opts,
        shapes: &mut out.shapes,
        sites: &mut out.sites,
        counter,
        def: d.name.clone(),
        self_ghosts: if d.recursive && !ghosts.is_empty() { Some(ghosts.clone()) } else { None },
        phi: Vec::new(),
        psi,
    };
    let mut body = el.term(cur)?;
    for (g, b) in ghosts.iter().zip(&bounds).rev() {
        el.shapes.insert(g.clone(), bound_type(b).shape());
        body = Term::lam(g.clone(), Some(bound_type(b)), body, d.span);
    }
    for t in outer.into_iter().rev() {
        let kind = match &t.kind {
            TermKind::TLam { tyvar, .. } => TermKind::TLam { tyvar: tyvar.clone(), body: Box::new(body) },
            TermKind::PLam { rvar, rvar_ty, .. } => {
                TermKind::PLam { rvar: rvar.clone(), rvar_ty: rvar_ty.clone(), body: Box::new(body) }
            }
            _ => unreachable!(),
        };
        body = Term::new(kind, t.span);
    }
    let schema = d.annot.as_ref().map(|s| bound_schema(s, &mut ghosts.clone().into_iter()));
    Ok(ElabDef { name: d.name.clone(), schema, body, recursive: d.recursive, span: d.span, ghosts })
}

/// Ghost binders are never referenced after materialization.
pub fn ghosts_dead(t: &Term) -> bool {
    !t.any(&mut |s| matches!(&s.kind, TermKind::Var(x) if x.starts_with("$m")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anf::{normalize, normalize_program};
    use crate::infer::shape::prepare;
    use crate::infer::Kappas;
    use crate::surface::{parse_program, print_term};

    const COMPOSE: &str = "bound Chain p q r = \\x y z -> q x y => p y z => r x z\n\
        val compose :: forall <p :: b -> c -> Bool, q :: a -> b -> Bool, r :: a -> c -> Bool>.\n\
        (Chain p q r) => (y:b -> c<p y>) -> (z:a -> b<q z>) -> x:a -> c<r x>\n\
        let compose f g x = let t1 = g x in let t2 = f t1 in t2\n\
        val incr :: n:Int -> {v:Int | v = n + 1}\n\
        let incr n = n + 1\n\
        let ex2 = compose incr incr";

    const FIND: &str = "bound UpClosed (p :: Int -> Bool) = \\x -> p x => p (x + 1)\n\
        val find :: forall <p :: Int -> Bool>. (UpClosed p) => (Int -> Bool) -> (Int<p> -> a) -> Int<p> -> a\n\
        letrec find q k i = if q i then k i else find q k (i + 1)";

    fn elab(src: &str, opts: Options) -> Result<Elaborated, ElabError> {
        let prog = normalize_program(&parse_program(src).unwrap());
        elaborate(&prepare(&prog, &mut Kappas::default()).unwrap(), opts)
    }

    fn innermost(t: &Term) -> &Term {
        match &t.kind {
            TermKind::TLam { body, .. } | TermKind::PLam { body, .. } => innermost(body),
            _ => t,
        }
    }

    #[test]
    fn compose_materializes_the_chain_at_its_result() {
        let el = elab(COMPOSE, Options::default()).unwrap();
        let body = print_term(innermost(&el.defs[0].body));
        assert!(body.ends_with("\\f -> \\g -> \\x -> let t1 = g x in let t2 = f t1 in let $m1 = $bf0 x t1 t2 in t2"), "{body}");
        assert_eq!(el.defs[0].ghosts, ["$bf0"]);
    }

    #[test]
    fn bound_application_passes_a_constant_true_witness() {
        let el = elab(COMPOSE, Options::default()).unwrap();
        let body = print_term(&el.defs[2].body);
        assert!(body.starts_with("let $w2 = \\($_3:Int) -> \\($_4:Int) -> \\($_5:Int) -> true in compose"), "{body}");
        assert!(body.ends_with("$w2 incr incr"), "{body}");
    }

    #[test]
    fn recursive_call_passes_its_own_ghost() {
        let el = elab(FIND, Options::default()).unwrap();
        let body = print_term(innermost(&el.defs[0].body));
        assert!(body.contains("find $bf0"), "{body}");
        assert!(body.contains("$bf0 i"), "{body}");
    }

    #[test]
    fn calls_per_site_stay_within_n_to_the_k() {
        for src in [COMPOSE, FIND] {
            for materialize in [Materialize::New, Materialize::All] {
                let el = elab(src, Options { materialize, max_materialize: None }).unwrap();
                assert!(!el.sites.is_empty());
                for s in &el.sites {
                    assert!(s.calls <= s.limit(), "{s:?}");
                }
            }
        }
    }

    #[test]
    fn all_mode_covers_every_tuple_of_matching_shape() {
        let el = elab(COMPOSE, Options { materialize: Materialize::All, max_materialize: None }).unwrap();
        let last = el.sites.iter().find(|s| s.def == "compose" && s.binder == "t2").unwrap();
        // x : a, t1 : b, t2 : c admit exactly one Chain instance.
        assert_eq!(last.calls, 1, "{:?}", el.sites);
    }

    #[test]
    fn limit_rejects_excess_calls() {
        let e = elab(FIND, Options { materialize: Materialize::All, max_materialize: Some(0) }).unwrap_err();
        assert!(matches!(e, ElabError::TooManyCalls { max: 0, .. }));
    }

    #[test]
    fn output_stays_in_anf() {
        for src in [COMPOSE, FIND] {
            for d in elab(src, Options::default()).unwrap().defs {
                assert_eq!(normalize(&d.body), d.body, "{}", print_term(&d.body));
                assert!(ghosts_dead(&d.body));
            }
        }
    }

    #[test]
    fn bound_type_returns_the_constraint() {
        let prog = parse_program(COMPOSE).unwrap();
        let b = prog.defs[0].annot.as_ref().unwrap().bounds()[0].clone();
        assert_eq!(bound_type(&b).to_string(), "x:a -> y:b -> z:c -> {v:Bool | q x y => p y z => r x z}");
    }
}
