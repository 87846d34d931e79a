//! Shape inference and instantiation. Every binder gets an unrefined
//! type; each use of a polymorphic name is then wrapped with explicit type
//! applications (refinement templates), abstract-refinement applications
//! (unknown witnesses) and bound applications. Annotated definitions are
//! wrapped with the matching abstractions.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use super::Kappas;
use crate::ast::{
    Base, Bound, Name, ParamRefinement, Pred, RType, Schema, Span, Term, TermKind, UType,
};
use crate::logic::Sort;
use crate::surface::Program;
use crate::typecheck::prims::literal_schema;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ShapeError {
    #[error("{span}: in `{def}`: cannot match {expected} with {found}")]
    Mismatch { def: Name, span: Span, expected: String, found: String },
    #[error("{span}: unbound variable `{name}`")]
    Unbound { name: Name, span: Span },
    #[error("{span}: recursive definition `{def}` needs a signature")]
    UnannotatedRecursion { def: Name, span: Span },
    #[error("{span}: {msg}")]
    Unsupported { msg: String, span: Span },
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Ty {
    Int,
    Bool,
    Rigid(Name),
    Var(usize),
    Fun(Box<Ty>, Box<Ty>),
}

fn ty_of(u: &UType) -> Ty {
    match u {
        UType::Int => Ty::Int,
        UType::Bool => Ty::Bool,
        UType::TyVar(a) => Ty::Rigid(a.clone()),
        UType::Fun(a, b) => Ty::Fun(Box::new(ty_of(a)), Box::new(ty_of(b))),
    }
}

fn rename_rigid(t: &Ty, map: &HashMap<Name, Ty>) -> Ty {
    match t {
        Ty::Rigid(a) => map.get(a).cloned().unwrap_or_else(|| t.clone()),
        Ty::Fun(a, b) => Ty::Fun(Box::new(rename_rigid(a, map)), Box::new(rename_rigid(b, map))),
        other => other.clone(),
    }
}

/// A definition ready for elaboration.
#[derive(Clone, Debug)]
pub struct PreparedDef {
    pub name: Name,
    pub annot: Option<Schema>,
    pub body: Term,
    pub recursive: bool,
    pub span: Span,
}

#[derive(Clone, Debug, Default)]
pub struct Prepared {
    pub defs: Vec<PreparedDef>,
    /// Shape of every term binder in the program.
    pub shapes: HashMap<Name, UType>,
}

/// How one use of a polymorphic name was instantiated.
struct Occ {
    tys: Vec<Ty>,
    result: Ty,
}

struct Infer<'a> {
    def: &'a str,
    uf: Vec<Option<Ty>>,
    globals: &'a HashMap<Name, Schema>,
    locals: HashMap<Name, Ty>,
    binders: Vec<(Name, Ty)>,
    occs: Vec<Occ>,
}

impl Infer<'_> {
    fn fresh(&mut self) -> Ty {
        self.uf.push(None);
        Ty::Var(self.uf.len() - 1)
    }

    fn resolve(&self, t: &Ty) -> Ty {
        match t {
            Ty::Var(i) => match &self.uf[*i] {
                Some(u) => self.resolve(u),
                None => t.clone(),
            },
            other => other.clone(),
        }
    }

    fn zonk(&self, t: &Ty) -> UType {
        match self.resolve(t) {
            Ty::Int | Ty::Var(_) => UType::Int,
            Ty::Bool => UType::Bool,
            Ty::Rigid(a) => UType::TyVar(a),
            Ty::Fun(a, b) => UType::fun(self.zonk(&a), self.zonk(&b)),
        }
    }

    fn occurs(&self, i: usize, t: &Ty) -> bool {
        match self.resolve(t) {
            Ty::Var(j) => i == j,
            Ty::Fun(a, b) => self.occurs(i, &a) || self.occurs(i, &b),
            _ => false,
        }
    }

    fn unify(&mut self, a: &Ty, b: &Ty, span: Span) -> Result<(), ShapeError> {
        let (a, b) = (self.resolve(a), self.resolve(b));
        match (&a, &b) {
            (Ty::Var(i), Ty::Var(j)) if i == j => Ok(()),
            (Ty::Var(i), t) | (t, Ty::Var(i)) if !self.occurs(*i, t) => {
                self.uf[*i] = Some(t.clone());
                Ok(())
            }
            (Ty::Int, Ty::Int) | (Ty::Bool, Ty::Bool) => Ok(()),
            (Ty::Rigid(x), Ty::Rigid(y)) if x == y => Ok(()),
            (Ty::Fun(a1, b1), Ty::Fun(a2, b2)) => {
                self.unify(a1, a2, span)?;
                self.unify(b1, b2, span)
            }
            _ => Err(ShapeError::Mismatch {
                def: self.def.to_string(),
                span,
                expected: self.zonk(&a).to_string(),
                found: self.zonk(&b).to_string(),
            }),
        }
    }

    /// Instantiate a schema's type variables, with explicit shapes if given.
    fn instantiate(&mut self, s: &Schema, explicit: Option<Vec<Ty>>, span: Span) -> Result<Ty, ShapeError> {
        let tvs = s.tyvars();
        let tys = match explicit {
            Some(ts) if ts.len() == tvs.len() => ts,
            Some(ts) => {
                return Err(ShapeError::Unsupported {
                    msg: format!("{} type arguments given, {} expected", ts.len(), tvs.len()),
                    span,
                })
            }
            None => tvs.iter().map(|_| self.fresh()).collect(),
        };
        let map: HashMap<Name, Ty> = tvs.iter().map(|a| (*a).clone()).zip(tys.iter().cloned()).collect();
        let result = rename_rigid(&ty_of(&s.shape()), &map);
        if is_poly(s) {
            self.occs.push(Occ { tys, result: result.clone() });
        }
        Ok(result)
    }

    fn head_schema(&self, e: &Term) -> Result<Option<Schema>, ShapeError> {
        Ok(match &e.kind {
            TermKind::Var(x) if self.locals.contains_key(x) => None,
            TermKind::Var(x) => Some(
                self.globals.get(x).cloned().ok_or_else(|| ShapeError::Unbound { name: x.clone(), span: e.span })?,
            ),
            TermKind::Const(l) => Some(literal_schema(l)),
            _ => None,
        })
    }

    fn infer(&mut self, e: &Term) -> Result<Ty, ShapeError> {
        let span = e.span;
        match &e.kind {
            TermKind::Var(x) if self.locals.contains_key(x) => Ok(self.locals[x].clone()),
            TermKind::Var(_) | TermKind::Const(_) => {
                let s = self.head_schema(e)?.unwrap();
                self.instantiate(&s, None, span)
            }
            TermKind::Lam { binder, ty, body } => {
                let tx = match ty {
                    Some(t) => ty_of(&t.shape()),
                    None => self.fresh(),
                };
                self.bind(binder, tx.clone());
                let tb = self.infer(body)?;
                Ok(Ty::Fun(Box::new(tx), Box::new(tb)))
            }
            TermKind::App { fun, arg } => {
                let tf = self.infer(fun)?;
                let ta = self.infer(arg)?;
                let r = self.fresh();
                self.unify(&tf, &Ty::Fun(Box::new(ta), Box::new(r.clone())), span)?;
                Ok(r)
            }
            TermKind::Let { binder, annot, bound, body } => {
                let t1 = self.infer(bound)?;
                if let Some(a) = annot {
                    self.unify(&ty_of(&a.shape()), &t1, span)?;
                }
                self.bind(binder, t1);
                self.infer(body)
            }
            TermKind::If { cond, then_branch, else_branch } => {
                let tc = self.infer(cond)?;
                self.unify(&Ty::Bool, &tc, cond.span)?;
                let a = self.infer(then_branch)?;
                let b = self.infer(else_branch)?;
                self.unify(&a, &b, span)?;
                Ok(a)
            }
            TermKind::TApp { .. } | TermKind::PApp { .. } => {
                let (head, tys, _) = explicit_chain(e);
                let Some(s) = self.head_schema(head)? else {
                    return Err(ShapeError::Unsupported {
                        msg: "explicit instantiation of a non-polymorphic term".into(),
                        span,
                    });
                };
                let tys = tys.iter().map(|t| ty_of(&t.shape())).collect();
                self.instantiate(&s, Some(tys), span)
            }
            TermKind::TLam { .. } | TermKind::PLam { .. } | TermKind::CAbs { .. } | TermKind::CApp { .. } => {
                Err(ShapeError::Unsupported { msg: "abstractions over types, refinements or bounds come only from signatures".into(), span })
            }
        }
    }

    fn bind(&mut self, x: &Name, t: Ty) {
        self.locals.insert(x.clone(), t.clone());
        self.binders.push((x.clone(), t));
    }
}

fn is_poly(s: &Schema) -> bool {
    !matches!(s, Schema::Mono(_))
}

/// Head of a user-written instantiation chain, with its type and
/// refinement arguments in application order.
fn explicit_chain(e: &Term) -> (&Term, Vec<&RType>, Vec<&ParamRefinement>) {
    let mut tys = Vec::new();
    let mut ws = Vec::new();
    let mut cur = e;
    loop {
        match &cur.kind {
            TermKind::TApp { term, ty } => {
                tys.push(ty);
                cur = term;
            }
            TermKind::PApp { term, witness } => {
                ws.push(witness);
                cur = term;
            }
            _ => break,
        }
    }
    tys.reverse();
    ws.reverse();
    (cur, tys, ws)
}

/// Shapes and instantiations for a program already in ANF.
pub fn prepare(prog: &Program, kappas: &mut Kappas) -> Result<Prepared, ShapeError> {
    let mut globals: HashMap<Name, Schema> = HashMap::new();
    for a in &prog.assumes {
        globals.insert(a.name.clone(), a.schema.clone());
    }
    let mut used: BTreeSet<Name> = prog.defs.iter().flat_map(|d| d.body.binders()).cloned().collect();
    let mut out = Prepared::default();
    for d in &prog.defs {
        let mut inf = Infer { def: &d.name, uf: vec![], globals: &globals, locals: HashMap::new(), binders: vec![], occs: vec![] };
        if d.recursive {
            let Some(s) = &d.annot else {
                return Err(ShapeError::UnannotatedRecursion { def: d.name.clone(), span: d.span });
            };
            inf.locals.insert(d.name.clone(), ty_of(&s.shape()));
        }
        let t = inf.infer(&d.body)?;
        if let Some(s) = &d.annot {
            inf.unify(&ty_of(&s.shape()), &t, d.span)?;
        }
        let shape = inf.zonk(&t);
        for (x, t) in &inf.binders {
            out.shapes.insert(x.clone(), inf.zonk(t));
        }
        let occs: Vec<(Vec<UType>, UType)> =
            inf.occs.iter().map(|o| (o.tys.iter().map(|t| inf.zonk(t)).collect(), inf.zonk(&o.result))).collect();
        let mut ins = Insert {
            def: &d.name,
            globals: &globals,
            locals: HashMap::new(),
            shapes: &mut out.shapes,
            occs: occs.into_iter(),
            kappas,
            used: &mut used,
            self_name: if d.recursive { Some(d.name.as_str()) } else { None },
            last_result: UType::Int,
        };
        let mut scope = Vec::new();
        let body = ins.term(&d.body, &mut scope)?;
        let body = match &d.annot {
            Some(s) => wrap_abstractions(s, body),
            None => body,
        };
        let schema = d.annot.clone().unwrap_or_else(|| Schema::Mono(RType::from_shape(&shape)));
        globals.insert(d.name.clone(), schema);
        out.defs.push(PreparedDef {
            name: d.name.clone(),
            annot: d.annot.clone(),
            body,
            recursive: d.recursive,
            span: d.span,
        });
    }
    Ok(out)
}

/// Wrap a body with the abstractions its signature quantifies over.
pub fn wrap_abstractions(s: &Schema, body: Term) -> Term {
    let span = body.span;
    match s {
        Schema::Mono(_) => body,
        Schema::ForallTy(a, rest) => {
            Term::new(TermKind::TLam { tyvar: a.clone(), body: Box::new(wrap_abstractions(rest, body)) }, span)
        }
        Schema::ForallP(p, t, rest) => Term::new(
            TermKind::PLam { rvar: p.clone(), rvar_ty: t.clone(), body: Box::new(wrap_abstractions(rest, body)) },
            span,
        ),
        Schema::Bounded(b, rest) => {
            Term::new(TermKind::CAbs { bound: b.clone(), body: Box::new(wrap_abstractions(rest, body)) }, span)
        }
    }
}

struct Insert<'a> {
    def: &'a str,
    globals: &'a HashMap<Name, Schema>,
    locals: HashMap<Name, ()>,
    shapes: &'a mut HashMap<Name, UType>,
    occs: std::vec::IntoIter<(Vec<UType>, UType)>,
    kappas: &'a mut Kappas,
    used: &'a mut BTreeSet<Name>,
    self_name: Option<&'a str>,
    /// Shape of the most recently instantiated occurrence.
    last_result: UType,
}

fn sort_of_shape(u: &UType) -> Option<Sort> {
    u.as_base().map(|b| Sort::of_base(&b))
}

/// Environment variables an unknown may mention: base-typed program
/// binders and compiler temporaries, but not ghost binders.
pub(crate) fn in_scope(name: &str) -> bool {
    !name.starts_with('$') || name.starts_with("$t") || name.starts_with("$i")
}

impl Insert<'_> {
    fn fresh(&mut self) -> Name {
        let mut i = self.used.len();
        loop {
            let n = format!("$i{i}");
            if self.used.insert(n.clone()) {
                return n;
            }
            i += 1;
        }
    }

    fn push_scope(&self, x: &Name, scope: &mut Vec<(Name, Sort)>) -> bool {
        match self.shapes.get(x).and_then(sort_of_shape) {
            Some(s) if in_scope(x) => {
                scope.push((x.clone(), s));
                true
            }
            _ => false,
        }
    }

    fn term(&mut self, e: &Term, scope: &mut Vec<(Name, Sort)>) -> Result<Term, ShapeError> {
        let span = e.span;
        let mk = |k| Term::new(k, span);
        Ok(match &e.kind {
            TermKind::Var(x) if self.locals.contains_key(x) || Some(x.as_str()) == self.self_name => e.clone(),
            TermKind::Var(_) | TermKind::Const(_) => self.occurrence(e, None, scope)?,
            TermKind::TApp { .. } | TermKind::PApp { .. } => {
                let (head, tys, ws) = explicit_chain(e);
                let tys: Vec<RType> = tys.into_iter().cloned().collect();
                let ws: Vec<ParamRefinement> = ws.into_iter().cloned().collect();
                self.occurrence(head, Some((tys, ws)), scope)?
            }
            TermKind::Lam { binder, ty, body } => {
                self.locals.insert(binder.clone(), ());
                let pushed = self.push_scope(binder, scope);
                let b = self.term(body, scope)?;
                if pushed {
                    scope.pop();
                }
                mk(TermKind::Lam { binder: binder.clone(), ty: ty.clone(), body: Box::new(b) })
            }
            TermKind::App { fun, arg } => {
                let f = self.term(fun, scope)?;
                let a = self.term(arg, scope)?;
                if a.as_var().is_some() {
                    app(f, a, span)
                } else {
                    // An instantiated polymorphic argument: name it.
                    let t = self.fresh();
                    let shape = self.last_result.clone();
                    self.shapes.insert(t.clone(), shape);
                    Term::let_(t.clone(), None, a, app(f, Term::var(t, span), span), span)
                }
            }
            TermKind::Let { binder, annot, bound, body } => {
                let b1 = self.term(bound, scope)?;
                self.locals.insert(binder.clone(), ());
                let pushed = self.push_scope(binder, scope);
                let b2 = self.term(body, scope)?;
                if pushed {
                    scope.pop();
                }
                flatten_let(binder.clone(), annot.clone(), b1, b2, span)
            }
            TermKind::If { cond, then_branch, else_branch } => mk(TermKind::If {
                cond: cond.clone(),
                then_branch: Box::new(self.term(then_branch, scope)?),
                else_branch: Box::new(self.term(else_branch, scope)?),
            }),
            _ => e.clone(),
        })
    }
}

/// Application whose function part may carry floated bindings.
fn app(f: Term, a: Term, span: Span) -> Term {
    match f.kind {
        TermKind::Let { binder, annot, bound, body } => {
            Term::new(TermKind::Let { binder, annot, bound, body: Box::new(app(*body, a, span)) }, f.span)
        }
        kind => Term::app(Term::new(kind, f.span), a, span),
    }
}

/// `let x = b1 in b2`, hoisting any bindings at the head of `b1`.
pub(crate) fn flatten_let(x: Name, annot: Option<RType>, b1: Term, b2: Term, span: Span) -> Term {
    match b1.kind {
        TermKind::Let { binder, annot: a1, bound, body } => Term::new(
            TermKind::Let { binder, annot: a1, bound, body: Box::new(flatten_let(x, annot, *body, b2, span)) },
            b1.span,
        ),
        kind => Term::let_(x, annot, Term::new(kind, b1.span), b2, span),
    }
}

impl Insert<'_> {
    fn occurrence(
        &mut self,
        head: &Term,
        explicit: Option<(Vec<RType>, Vec<ParamRefinement>)>,
        scope: &[(Name, Sort)],
    ) -> Result<Term, ShapeError> {
        let span = head.span;
        let schema = match &head.kind {
            TermKind::Var(x) => {
                self.globals.get(x).cloned().ok_or_else(|| ShapeError::Unbound { name: x.clone(), span })?
            }
            TermKind::Const(l) => literal_schema(l),
            _ => return Ok(head.clone()),
        };
        if !is_poly(&schema) {
            return Ok(head.clone());
        }
        let (shapes, result) = self.occs.next().expect("one instantiation per polymorphic occurrence");
        self.last_result = result;
        let (given_tys, given_ws) = explicit.unwrap_or_default();
        let tyvars: Vec<Name> = schema.tyvars().into_iter().cloned().collect();
        let tys: Vec<RType> = if given_tys.is_empty() {
            tyvars
                .iter()
                .zip(&shapes)
                .map(|(a, u)| self.kappas.template(u, scope, a, self.def, span))
                .collect()
        } else {
            given_tys
        };
        let mut e = head.clone();
        for t in &tys {
            e = Term::new(TermKind::TApp { term: Box::new(e), ty: t.clone() }, span);
        }
        let rvars = schema.rvar_decls();
        if !given_ws.is_empty() && given_ws.len() != rvars.len() {
            return Err(ShapeError::Unsupported {
                msg: format!("{} refinement arguments given, {} expected", given_ws.len(), rvars.len()),
                span,
            });
        }
        let mut witnesses: Vec<(Name, ParamRefinement)> = Vec::new();
        for (i, (p, pt)) in rvars.iter().enumerate() {
            let w = match given_ws.get(i) {
                Some(w) => w.clone(),
                None => {
                    let mut pt = (*pt).clone();
                    for (a, t) in tyvars.iter().zip(&tys) {
                        pt = pt.subst_tyvar(a, &RType::trivial(base_of(t, span)?)).map_err(|e| {
                            ShapeError::Unsupported { msg: e.to_string(), span }
                        })?;
                    }
                    self.witness(p, &crate::ast::rvar_sorts(&pt), scope, span)
                }
            };
            e = Term::new(TermKind::PApp { term: Box::new(e), witness: w.clone() }, span);
            witnesses.push(((*p).clone(), w));
        }
        let bounds: Vec<Bound> = schema.bounds().into_iter().cloned().collect();
        for b in bounds {
            let mut b = b;
            for (a, t) in tyvars.iter().zip(&tys) {
                b = b.subst_tyvar(a, t);
            }
            for (p, w) in &witnesses {
                b = b.instantiate_rvar(p, w).map_err(|e| ShapeError::Unsupported { msg: e.to_string(), span })?;
            }
            e = Term::new(TermKind::CApp { term: Box::new(e), bound: b }, span);
        }
        Ok(e)
    }

    /// `λx̄. κ(scope, x̄)` for an abstract refinement with argument sorts `bases`.
    fn witness(&mut self, p: &str, bases: &[Base], scope: &[(Name, Sort)], span: Span) -> ParamRefinement {
        let mut avoid: BTreeSet<Name> = scope.iter().map(|(n, _)| n.clone()).collect();
        let mut params = Vec::new();
        for (i, b) in bases.iter().enumerate() {
            let stem = if i + 1 == bases.len() { "v".to_string() } else { format!("x{}", i + 1) };
            let n = crate::ast::fresh_name(&stem, &avoid);
            avoid.insert(n.clone());
            params.push((n, b.clone()));
        }
        let mut kparams = scope.to_vec();
        kparams.extend(params.iter().map(|(n, b)| (n.clone(), Sort::of_base(b))));
        let args = kparams.iter().map(|(n, _)| Pred::var(n.clone())).collect();
        let k = self.kappas.fresh(kparams, scope.len(), p, self.def, span);
        ParamRefinement { params, body: Pred::Kappa(k, args) }
    }
}

fn base_of(t: &RType, span: Span) -> Result<Base, ShapeError> {
    match t {
        RType::Base { base, .. } => Ok(base.clone()),
        RType::Fun { .. } => Err(ShapeError::Unsupported {
            msg: "abstract refinement over a function-typed instance".into(),
            span,
        }),
    }
}
