use std::collections::{BTreeSet, HashMap};

use super::prims::literal_schema;
use super::wf::{wf_type, Scope};
use super::{Env, TypeError};
use crate::ast::{fresh_name, rvar_sorts, Name, Pred, RType, Schema, Span, Term, TermKind, UType};
use crate::elaborate::ElabDef;
use crate::infer::Kappas;
use crate::logic::{Binder, FunDecl, Sort, Vc};
use crate::surface::UninterpDecl;

pub struct Checker<'a> {
    scope: Scope,
    globals: HashMap<Name, Schema>,
    kappas: &'a mut Kappas,
    shapes: &'a HashMap<Name, UType>,
    vcs: Vec<Vc>,
    def: Name,
    counter: usize,
    rec: Option<Name>,
}

fn shape_err(span: Span, msg: impl Into<String>) -> TypeError {
    TypeError::Shape { span, msg: msg.into() }
}

fn selfify(t: &RType, x: &str) -> RType {
    match t {
        RType::Base { vv, .. } => t.strengthen(&Pred::eq(Pred::var(vv.clone()), Pred::var(x)), vv),
        _ => t.clone(),
    }
}

impl<'a> Checker<'a> {
    pub fn new(
        uninterps: &[UninterpDecl],
        globals: HashMap<Name, Schema>,
        kappas: &'a mut Kappas,
        shapes: &'a HashMap<Name, UType>,
    ) -> Checker<'a> {
        Checker {
            scope: Scope::new(uninterps),
            globals,
            kappas,
            shapes,
            vcs: Vec::new(),
            def: String::new(),
            counter: 0,
            rec: None,
        }
    }

    pub fn into_vcs(self) -> Vec<Vc> {
        self.vcs
    }

    pub fn check_def(&mut self, d: &ElabDef) -> Result<Schema, TypeError> {
        self.def = d.name.clone();
        self.counter = 0;
        self.rec = if d.recursive { Some(d.name.clone()) } else { None };
        let mut env = Env::default();
        // Base-typed top-level values are visible as ordinary binders.
        let mut globals: Vec<(&Name, &RType)> =
            self.globals.iter().filter_map(|(n, s)| s.mono().filter(|t| t.is_base()).map(|t| (n, t))).collect();
        globals.sort_by(|a, b| a.0.cmp(b.0));
        for (n, t) in globals {
            env.push(n, t.clone());
        }
        let s = match &d.schema {
            Some(s) => {
                self.check_schema(&env, &d.body, s)?;
                s.clone()
            }
            None => Schema::Mono(self.synth(&env, &d.body)?),
        };
        self.globals.insert(d.name.clone(), s.clone());
        Ok(s)
    }

    fn check_schema(&mut self, env: &Env, e: &Term, s: &Schema) -> Result<(), TypeError> {
        match (s, &e.kind) {
            (Schema::ForallTy(a, rest), TermKind::TLam { tyvar, body }) => {
                let rest = if a == tyvar { (**rest).clone() } else { rest.rename_tyvar(a, tyvar) };
                let mut env = env.clone();
                env.tyvars.push(tyvar.clone());
                self.check_schema(&env, body, &rest)
            }
            (Schema::ForallP(p, t, rest), TermKind::PLam { rvar, body, .. }) => {
                let rest = if p == rvar { (**rest).clone() } else { rest.rename_rvar(p, rvar) };
                let mut env = env.clone();
                env.rvars.push((rvar.clone(), rvar_sorts(t).iter().map(Sort::of_base).collect()));
                self.check_schema(&env, body, &rest)
            }
            (Schema::Mono(t), _) => {
                let mut env = env.clone();
                if let Some(f) = &self.rec {
                    env.push(&f.clone(), t.clone());
                }
                self.check(&env, e, t)
            }
            _ => Err(shape_err(e.span, format!("`{}` does not match its signature {s}", self.def))),
        }
    }

    fn template(&mut self, env: &Env, shape: &UType, label: &str, span: Span) -> RType {
        let scope = env.kappa_scope();
        let def = self.def.clone();
        self.kappas.template(shape, &scope, label, &def, span)
    }

    /// Type of a term that may still be polymorphic.
    fn synth_poly(&mut self, env: &Env, e: &Term) -> Result<Schema, TypeError> {
        match &e.kind {
            TermKind::Var(x) if env.lookup(x).is_none() => {
                self.globals.get(x).cloned().ok_or_else(|| TypeError::Unbound { name: x.clone(), span: e.span })
            }
            TermKind::Const(l) => Ok(literal_schema(l)),
            TermKind::TApp { term, ty } => match self.synth_poly(env, term)? {
                Schema::ForallTy(a, rest) => {
                    rest.subst_tyvar(&a, ty).map_err(|err| shape_err(e.span, err.to_string()))
                }
                s => Err(shape_err(e.span, format!("type application to non-polymorphic {s}"))),
            },
            TermKind::PApp { term, witness } => match self.synth_poly(env, term)? {
                Schema::ForallP(p, _, rest) => {
                    rest.instantiate_rvar(&p, witness).map_err(|err| shape_err(e.span, err.to_string()))
                }
                s => Err(shape_err(e.span, format!("refinement application to {s}"))),
            },
            _ => Ok(Schema::Mono(self.synth(env, e)?)),
        }
    }

    pub fn synth(&mut self, env: &Env, e: &Term) -> Result<RType, TypeError> {
        let span = e.span;
        match &e.kind {
            TermKind::Var(x) => match env.lookup(x) {
                Some(t) => Ok(selfify(t, x)),
                None => {
                    let s = self.synth_poly(env, e)?;
                    self.mono(s, span)
                }
            },
            TermKind::Const(_) | TermKind::TApp { .. } | TermKind::PApp { .. } => {
                let s = self.synth_poly(env, e)?;
                self.mono(s, span)
            }
            TermKind::App { fun, arg } => {
                let tf = self.synth(env, fun)?;
                let RType::Fun { binder, dom, cod } = tf else {
                    return Err(shape_err(span, "application of a non-function"));
                };
                let y = arg.as_var().ok_or_else(|| shape_err(arg.span, "argument is not a variable"))?;
                let ty = self.synth(env, arg)?;
                self.sub(env, &ty, &dom, "app", span)?;
                Ok(cod.subst1(&binder, &Pred::var(y.clone())))
            }
            TermKind::Lam { binder, ty, body } => {
                let tx = match ty {
                    Some(t) => {
                        self.wf(env, t, span)?;
                        t.clone()
                    }
                    None => {
                        let shape = self.shapes.get(binder).cloned().unwrap_or(UType::Int);
                        self.template(env, &shape, binder, span)
                    }
                };
                let mut env2 = env.clone();
                env2.push(binder, tx.clone());
                let tb = self.synth(&env2, body)?;
                Ok(RType::fun(binder.clone(), tx, tb))
            }
            TermKind::Let { binder, annot, bound, body } => {
                let env2 = self.bind_let(env, binder, annot, bound, span)?;
                let tb = self.synth(&env2, body)?;
                if tb.free_vars().contains(binder) {
                    let join = self.template(env, &tb.shape(), "join", span);
                    self.sub(&env2, &tb, &join, "let", span)?;
                    Ok(join)
                } else {
                    Ok(tb)
                }
            }
            TermKind::If { cond, then_branch, else_branch } => {
                let c = self.guard_of(env, cond)?;
                let mut et = env.clone();
                et.guard(c.clone());
                let mut ee = env.clone();
                ee.guard(Pred::not(c));
                let ta = self.synth(&et, then_branch)?;
                let tb = self.synth(&ee, else_branch)?;
                if ta.shape() != tb.shape() {
                    return Err(shape_err(span, format!("branches have shapes {} and {}", ta.shape(), tb.shape())));
                }
                let join = self.template(env, &ta.shape(), "join", span);
                self.sub(&et, &ta, &join, "if-then", then_branch.span)?;
                self.sub(&ee, &tb, &join, "if-else", else_branch.span)?;
                Ok(join)
            }
            TermKind::TLam { .. } | TermKind::PLam { .. } | TermKind::CAbs { .. } | TermKind::CApp { .. } => {
                Err(shape_err(span, "abstraction outside a signature"))
            }
        }
    }

    fn mono(&self, s: Schema, span: Span) -> Result<RType, TypeError> {
        match s {
            Schema::Mono(t) => Ok(t),
            s => Err(shape_err(span, format!("uninstantiated polymorphic type {s}"))),
        }
    }

    fn guard_of(&self, env: &Env, cond: &Term) -> Result<Pred, TypeError> {
        match &cond.kind {
            TermKind::Var(x) if env.lookup(x).is_some() => Ok(Pred::var(x.clone())),
            TermKind::Const(crate::ast::Literal::Bool(b)) => Ok(Pred::Bool(*b)),
            _ => Err(shape_err(cond.span, "condition must be a local variable")),
        }
    }

    fn bind_let(
        &mut self,
        env: &Env,
        x: &Name,
        annot: &Option<RType>,
        bound: &Term,
        span: Span,
    ) -> Result<Env, TypeError> {
        let t1 = match annot {
            Some(a) => {
                self.wf(env, a, span)?;
                self.check(env, bound, a)?;
                a.clone()
            }
            None => self.synth(env, bound)?,
        };
        let mut env2 = env.clone();
        env2.push(x, t1);
        Ok(env2)
    }

    pub fn check(&mut self, env: &Env, e: &Term, t: &RType) -> Result<(), TypeError> {
        let span = e.span;
        match (&e.kind, t) {
            (TermKind::Lam { binder, ty, body }, RType::Fun { binder: y, dom, cod }) => {
                let tx = match ty {
                    Some(tx) => {
                        self.wf(env, tx, span)?;
                        self.sub(env, dom, tx, "lam", span)?;
                        tx.clone()
                    }
                    None => (**dom).clone(),
                };
                let mut env2 = env.clone();
                env2.push(binder, tx);
                self.check(&env2, body, &cod.subst1(y, &Pred::var(binder.clone())))
            }
            (TermKind::Let { binder, annot, bound, body }, _) => {
                let env2 = self.bind_let(env, binder, annot, bound, span)?;
                self.check(&env2, body, t)
            }
            (TermKind::If { cond, then_branch, else_branch }, _) => {
                let c = self.guard_of(env, cond)?;
                let mut et = env.clone();
                et.guard(c.clone());
                self.check(&et, then_branch, t)?;
                let mut ee = env.clone();
                ee.guard(Pred::not(c));
                self.check(&ee, else_branch, t)
            }
            _ => {
                let ts = self.synth(env, e)?;
                self.sub(env, &ts, t, "sub", span)
            }
        }
    }

    fn wf(&self, env: &Env, t: &RType, span: Span) -> Result<(), TypeError> {
        let mut sc = self.scope.clone();
        sc.tyvars = env.tyvars.clone();
        sc.ghost_types = true;
        for (p, s) in &env.rvars {
            sc.rvars.insert(p.clone(), s.clone());
        }
        for b in env.binders() {
            sc.vars.push((b.name, b.sort));
        }
        wf_type(&mut sc, t, span)
    }

    /// Subtyping, emitting one VC per base-type comparison.
    pub fn sub(&mut self, env: &Env, t1: &RType, t2: &RType, rule: &str, span: Span) -> Result<(), TypeError> {
        match (t1, t2) {
            (
                RType::Base { base: b1, vv: v1, refinement: r1 },
                RType::Base { base: b2, vv: v2, refinement: r2 },
            ) => {
                if b1 != b2 {
                    return Err(shape_err(span, format!("expected {b2}, found {b1}")));
                }
                if r2.is_true() {
                    return Ok(());
                }
                let v = fresh_name("v", &env.names());
                let mut binders = env.binders();
                binders.push(Binder { name: v.clone(), sort: Sort::of_base(b1), hyp: r1.subst1(v1, &Pred::var(v.clone())) });
                let goal = r2.subst1(v2, &Pred::var(v));
                self.emit(env, binders, goal, rule, span);
                Ok(())
            }
            (RType::Fun { binder: x1, dom: d1, cod: c1 }, RType::Fun { binder: x2, dom: d2, cod: c2 }) => {
                self.sub(env, d2, d1, rule, span)?;
                let z = fresh_name(x2, &env.names());
                let mut env2 = env.clone();
                env2.push(&z, (**d2).clone());
                let zv = Pred::var(z);
                self.sub(&env2, &c1.subst1(x1, &zv), &c2.subst1(x2, &zv), rule, span)
            }
            _ => Err(shape_err(span, format!("cannot compare {} with {}", t1.shape(), t2.shape()))),
        }
    }

    fn emit(&mut self, env: &Env, binders: Vec<Binder>, goal: Pred, rule: &str, span: Span) {
        let name = format!("{}.L{}C{}.{}.{}", self.def, span.line, span.col, rule, self.counter);
        self.counter += 1;
        let mut vc = Vc::new(name);
        vc.span = Some(span);
        vc.binders = binders;
        vc.goal = goal;
        let mut syms = BTreeSet::new();
        let mut note = |p: &Pred| {
            p.any(&mut |q| {
                if let Pred::App(f, _) | Pred::RApp(f, _) | Pred::Kappa(f, _) = q {
                    syms.insert(f.clone());
                }
                false
            });
        };
        for b in &vc.binders {
            note(&b.hyp);
        }
        note(&vc.goal);
        for f in syms {
            let decl = if let Some(k) = self.kappas.get(&f) {
                Some(FunDecl { name: f.clone(), args: k.params.iter().map(|(_, s)| s.clone()).collect(), ret: Sort::Bool })
            } else if let Some(s) = env.rvar_sorts(&f) {
                Some(FunDecl { name: f.clone(), args: s.clone(), ret: Sort::Bool })
            } else {
                use crate::logic::SortEnv;
                self.scope.fun(&f).map(|(args, ret)| FunDecl { name: f.clone(), args, ret })
            };
            if let Some(d) = decl {
                vc.funs.push(d);
            }
        }
        vc.normalize_sorts();
        self.vcs.push(vc);
    }
}
