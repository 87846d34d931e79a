//! Abstract syntax of the core calculus and its bounded extension.
//!
//! Terms, refinements, refined types and schemata live here together with
//! the structural operations every later pass relies on: shape erasure,
//! capture-avoiding substitution and abstract-refinement instantiation.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

pub type Name = String;

/// 1-based source position.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Span {
        Span { line, col }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AstError {
    #[error("abstract refinement `{rvar}` expects {expected} arguments, witness takes {found}")]
    ArityMismatch {
        rvar: Name,
        expected: usize,
        found: usize,
    },
    #[error("type variable `{tyvar}` carries refinement `{refinement}` but is instantiated with a function type")]
    RefinedFunctionInstance { tyvar: Name, refinement: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Base {
    Int,
    Bool,
    TyVar(Name),
}

/// Refinement-erased type.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UType {
    Int,
    Bool,
    TyVar(Name),
    Fun(Box<UType>, Box<UType>),
}

impl UType {
    pub fn base(b: &Base) -> UType {
        match b {
            Base::Int => UType::Int,
            Base::Bool => UType::Bool,
            Base::TyVar(a) => UType::TyVar(a.clone()),
        }
    }

    pub fn as_base(&self) -> Option<Base> {
        match self {
            UType::Int => Some(Base::Int),
            UType::Bool => Some(Base::Bool),
            UType::TyVar(a) => Some(Base::TyVar(a.clone())),
            UType::Fun(..) => None,
        }
    }

    pub fn fun(dom: UType, cod: UType) -> UType {
        UType::Fun(Box::new(dom), Box::new(cod))
    }

    /// Argument shapes and final result of a curried function shape.
    pub fn uncurry(&self) -> (Vec<&UType>, &UType) {
        let mut args = Vec::new();
        let mut cur = self;
        while let UType::Fun(d, c) = cur {
            args.push(&**d);
            cur = c;
        }
        (args, cur)
    }

    pub fn subst_tyvar(&self, a: &str, t: &UType) -> UType {
        match self {
            UType::TyVar(b) if b == a => t.clone(),
            UType::Fun(d, c) => UType::fun(d.subst_tyvar(a, t), c.subst_tyvar(a, t)),
            other => other.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Imp,
    Iff,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
            BinOp::Imp => "=>",
            BinOp::Iff => "<=>",
        }
    }

    pub(crate) fn prec(self) -> u8 {
        match self {
            BinOp::Imp => 1,
            BinOp::Iff => 2,
            BinOp::Or => 3,
            BinOp::And => 4,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 5,
            BinOp::Add | BinOp::Sub => 6,
            BinOp::Mul => 7,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnOp {
    Not,
    Neg,
}

/// Refinement predicates. The same tree carries concrete predicates,
/// abstract-refinement applications (value argument last) and κ
/// applications produced by template generation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pred {
    Int(i64),
    Bool(bool),
    Var(Name),
    Un(UnOp, Box<Pred>),
    Bin(BinOp, Box<Pred>, Box<Pred>),
    Ite(Box<Pred>, Box<Pred>, Box<Pred>),
    /// Application of a declared uninterpreted function.
    App(Name, Vec<Pred>),
    /// Application of an abstract refinement variable.
    RApp(Name, Vec<Pred>),
    /// Application of an unknown refinement.
    Kappa(Name, Vec<Pred>),
}

pub type Refinement = Pred;

impl Pred {
    pub fn tt() -> Pred {
        Pred::Bool(true)
    }

    pub fn var(x: impl Into<Name>) -> Pred {
        Pred::Var(x.into())
    }

    pub fn bin(op: BinOp, a: Pred, b: Pred) -> Pred {
        Pred::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn not(p: Pred) -> Pred {
        Pred::Un(UnOp::Not, Box::new(p))
    }

    pub fn eq(a: Pred, b: Pred) -> Pred {
        Pred::bin(BinOp::Eq, a, b)
    }

    pub fn implies(a: Pred, b: Pred) -> Pred {
        Pred::bin(BinOp::Imp, a, b)
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Pred::Bool(true))
    }

    /// Conjunction that drops `true` operands.
    pub fn and(a: Pred, b: Pred) -> Pred {
        if a.is_true() {
            b
        } else if b.is_true() {
            a
        } else {
            Pred::bin(BinOp::And, a, b)
        }
    }

    pub fn conj(ps: impl IntoIterator<Item = Pred>) -> Pred {
        ps.into_iter().fold(Pred::tt(), Pred::and)
    }

    /// Top-level conjuncts, left to right.
    pub fn conjuncts(&self) -> Vec<&Pred> {
        let mut out = Vec::new();
        fn go<'a>(p: &'a Pred, out: &mut Vec<&'a Pred>) {
            match p {
                Pred::Bin(BinOp::And, a, b) => {
                    go(a, out);
                    go(b, out);
                }
                Pred::Bool(true) => {}
                other => out.push(other),
            }
        }
        go(self, &mut out);
        out
    }

    pub fn free_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Name>) {
        match self {
            Pred::Int(_) | Pred::Bool(_) => {}
            Pred::Var(x) => {
                out.insert(x.clone());
            }
            Pred::Un(_, a) => a.collect_vars(out),
            Pred::Bin(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Pred::Ite(c, a, b) => {
                c.collect_vars(out);
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Pred::App(_, args) | Pred::RApp(_, args) | Pred::Kappa(_, args) => {
                for a in args {
                    a.collect_vars(out);
                }
            }
        }
    }

    pub fn mentions_var(&self, x: &str) -> bool {
        self.free_vars().contains(x)
    }

    /// Bottom-up rewrite.
    pub fn map(&self, f: &mut impl FnMut(Pred) -> Pred) -> Pred {
        let p = match self {
            Pred::Int(_) | Pred::Bool(_) | Pred::Var(_) => self.clone(),
            Pred::Un(op, a) => Pred::Un(*op, Box::new(a.map(f))),
            Pred::Bin(op, a, b) => Pred::Bin(*op, Box::new(a.map(f)), Box::new(b.map(f))),
            Pred::Ite(c, a, b) => Pred::Ite(Box::new(c.map(f)), Box::new(a.map(f)), Box::new(b.map(f))),
            Pred::App(g, args) => Pred::App(g.clone(), args.iter().map(|a| a.map(f)).collect()),
            Pred::RApp(g, args) => Pred::RApp(g.clone(), args.iter().map(|a| a.map(f)).collect()),
            Pred::Kappa(g, args) => Pred::Kappa(g.clone(), args.iter().map(|a| a.map(f)).collect()),
        };
        f(p)
    }

    /// Simultaneous substitution of variables. Predicates have no binders,
    /// so this never captures.
    pub fn subst(&self, map: &HashMap<Name, Pred>) -> Pred {
        if map.is_empty() {
            return self.clone();
        }
        self.map(&mut |p| match p {
            Pred::Var(ref x) => map.get(x).cloned().unwrap_or(p),
            other => other,
        })
    }

    pub fn subst1(&self, x: &str, e: &Pred) -> Pred {
        let mut m = HashMap::new();
        m.insert(x.to_string(), e.clone());
        self.subst(&m)
    }

    pub fn any(&self, pred: &mut impl FnMut(&Pred) -> bool) -> bool {
        if pred(self) {
            return true;
        }
        match self {
            Pred::Int(_) | Pred::Bool(_) | Pred::Var(_) => false,
            Pred::Un(_, a) => a.any(pred),
            Pred::Bin(_, a, b) => a.any(pred) || b.any(pred),
            Pred::Ite(c, a, b) => c.any(pred) || a.any(pred) || b.any(pred),
            Pred::App(_, args) | Pred::RApp(_, args) | Pred::Kappa(_, args) => {
                args.iter().any(|a| a.any(pred))
            }
        }
    }

    pub fn has_implication(&self) -> bool {
        self.any(&mut |p| matches!(p, Pred::Bin(BinOp::Imp, ..)))
    }

    pub fn has_kappa(&self) -> bool {
        self.any(&mut |p| matches!(p, Pred::Kappa(..)))
    }

    pub fn rvars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.any(&mut |p| {
            if let Pred::RApp(r, _) = p {
                out.insert(r.clone());
            }
            false
        });
        out
    }

    /// Replace each application of `rvar` with the witness body, its
    /// formals bound to that application's actual arguments.
    pub fn instantiate_rvar(&self, rvar: &str, witness: &ParamRefinement) -> Result<Pred, AstError> {
        let mut err = None;
        let out = self.map(&mut |p| match p {
            Pred::RApp(ref r, ref args) if r == rvar => {
                if args.len() != witness.params.len() {
                    err = Some(AstError::ArityMismatch {
                        rvar: rvar.to_string(),
                        expected: args.len(),
                        found: witness.params.len(),
                    });
                    return p;
                }
                let map = witness
                    .params
                    .iter()
                    .map(|(x, _)| x.clone())
                    .zip(args.iter().cloned())
                    .collect();
                witness.body.subst(&map)
            }
            other => other,
        });
        match err {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }
}

/// A refinement closed under value-parameter abstraction: λx̄. r.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ParamRefinement {
    pub params: Vec<(Name, Base)>,
    pub body: Pred,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum RType {
    Base { base: Base, vv: Name, refinement: Pred },
    /// Refinements on function types are always `true` and are not stored.
    Fun { binder: Name, dom: Box<RType>, cod: Box<RType> },
}

/// Fresh variant of `base` (`base'1`, `base'2`, ...) not in `avoid`.
pub fn fresh_name(base: &str, avoid: &BTreeSet<Name>) -> Name {
    let stem = match base.find('\'') {
        Some(i) if base[i + 1..].chars().all(|c| c.is_ascii_digit()) && i > 0 => &base[..i],
        _ => base,
    };
    if !avoid.contains(stem) {
        return stem.to_string();
    }
    (1..)
        .map(|k| format!("{stem}'{k}"))
        .find(|n| !avoid.contains(n))
        .unwrap()
}

impl RType {
    pub fn base(base: Base, vv: impl Into<Name>, refinement: Pred) -> RType {
        RType::Base { base, vv: vv.into(), refinement }
    }

    pub fn trivial(base: Base) -> RType {
        RType::base(base, "v", Pred::tt())
    }

    pub fn fun(binder: impl Into<Name>, dom: RType, cod: RType) -> RType {
        RType::Fun { binder: binder.into(), dom: Box::new(dom), cod: Box::new(cod) }
    }

    /// Unrefined type of the given shape.
    pub fn from_shape(u: &UType) -> RType {
        let mut n = 0;
        fn go(u: &UType, n: &mut usize) -> RType {
            match u {
                UType::Fun(d, c) => {
                    let b = format!("_a{n}");
                    *n += 1;
                    RType::fun(b, go(d, n), go(c, n))
                }
                other => RType::trivial(other.as_base().unwrap()),
            }
        }
        go(u, &mut n)
    }

    pub fn shape(&self) -> UType {
        match self {
            RType::Base { base, .. } => UType::base(base),
            RType::Fun { dom, cod, .. } => UType::fun(dom.shape(), cod.shape()),
        }
    }

    pub fn is_base(&self) -> bool {
        matches!(self, RType::Base { .. })
    }

    pub fn free_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Name>) {
        match self {
            RType::Base { vv, refinement, .. } => {
                let mut fv = refinement.free_vars();
                fv.remove(vv);
                out.extend(fv);
            }
            RType::Fun { binder, dom, cod } => {
                dom.collect_vars(out);
                let mut inner = cod.free_vars();
                inner.remove(binder);
                out.extend(inner);
            }
        }
    }

    /// All names bound or mentioned anywhere in the type.
    fn all_names(&self, out: &mut BTreeSet<Name>) {
        match self {
            RType::Base { vv, refinement, .. } => {
                out.insert(vv.clone());
                refinement.collect_vars(out);
            }
            RType::Fun { binder, dom, cod } => {
                out.insert(binder.clone());
                dom.all_names(out);
                cod.all_names(out);
            }
        }
    }

    /// Capture-avoiding simultaneous substitution of predicates for free
    /// variables.
    pub fn subst(&self, map: &HashMap<Name, Pred>) -> RType {
        if map.is_empty() {
            return self.clone();
        }
        let mut incoming = BTreeSet::new();
        for e in map.values() {
            e.collect_vars(&mut incoming);
        }
        match self {
            RType::Base { base, vv, refinement } => {
                let mut inner: HashMap<Name, Pred> = map.clone();
                inner.remove(vv);
                let (vv2, refinement) = if incoming.contains(vv) && !inner.is_empty() {
                    let mut avoid = incoming.clone();
                    self.all_names(&mut avoid);
                    let fresh = fresh_name(vv, &avoid);
                    (fresh.clone(), refinement.subst1(vv, &Pred::Var(fresh)))
                } else {
                    (vv.clone(), refinement.clone())
                };
                RType::Base { base: base.clone(), vv: vv2, refinement: refinement.subst(&inner) }
            }
            RType::Fun { binder, dom, cod } => {
                let dom = dom.subst(map);
                let mut inner: HashMap<Name, Pred> = map.clone();
                inner.remove(binder);
                if incoming.contains(binder) && !inner.is_empty() {
                    let mut avoid = incoming.clone();
                    self.all_names(&mut avoid);
                    for k in map.keys() {
                        avoid.insert(k.clone());
                    }
                    let fresh = fresh_name(binder, &avoid);
                    let cod = cod.subst1(binder, &Pred::Var(fresh.clone()));
                    RType::fun(fresh, dom, cod.subst(&inner))
                } else {
                    RType::fun(binder.clone(), dom, cod.subst(&inner))
                }
            }
        }
    }

    pub fn subst1(&self, x: &str, e: &Pred) -> RType {
        let mut m = HashMap::new();
        m.insert(x.to_string(), e.clone());
        self.subst(&m)
    }

    /// Apply a rewrite to every refinement, leaving binders alone.
    pub fn map_refinements(&self, f: &mut impl FnMut(&Pred) -> Pred) -> RType {
        match self {
            RType::Base { base, vv, refinement } => {
                RType::Base { base: base.clone(), vv: vv.clone(), refinement: f(refinement) }
            }
            RType::Fun { binder, dom, cod } => {
                RType::fun(binder.clone(), dom.map_refinements(f), cod.map_refinements(f))
            }
        }
    }

    pub fn try_map_refinements<E>(
        &self,
        f: &mut impl FnMut(&Pred) -> Result<Pred, E>,
    ) -> Result<RType, E> {
        Ok(match self {
            RType::Base { base, vv, refinement } => {
                RType::Base { base: base.clone(), vv: vv.clone(), refinement: f(refinement)? }
            }
            RType::Fun { binder, dom, cod } => RType::fun(
                binder.clone(),
                dom.try_map_refinements(f)?,
                cod.try_map_refinements(f)?,
            ),
        })
    }

    pub fn refinements(&self) -> Vec<&Pred> {
        match self {
            RType::Base { refinement, .. } => vec![refinement],
            RType::Fun { dom, cod, .. } => {
                let mut v = dom.refinements();
                v.extend(cod.refinements());
                v
            }
        }
    }

    pub fn instantiate_rvar(&self, rvar: &str, w: &ParamRefinement) -> Result<RType, AstError> {
        self.try_map_refinements(&mut |r| r.instantiate_rvar(rvar, w))
    }

    /// Replace type variable `a` by `t`, conjoining any refinement carried
    /// by the variable occurrence onto the instance.
    pub fn subst_tyvar(&self, a: &str, t: &RType) -> Result<RType, AstError> {
        match self {
            RType::Base { base: Base::TyVar(b), vv, refinement } if b == a => match t {
                RType::Base { base, vv: tv, refinement: tr } => Ok(RType::Base {
                    base: base.clone(),
                    vv: vv.clone(),
                    refinement: Pred::and(tr.subst1(tv, &Pred::Var(vv.clone())), refinement.clone()),
                }),
                RType::Fun { .. } if refinement.is_true() => Ok(t.clone()),
                RType::Fun { .. } => Err(AstError::RefinedFunctionInstance {
                    tyvar: a.to_string(),
                    refinement: refinement.to_string(),
                }),
            },
            RType::Base { .. } => Ok(self.clone()),
            RType::Fun { binder, dom, cod } => Ok(RType::fun(
                binder.clone(),
                dom.subst_tyvar(a, t)?,
                cod.subst_tyvar(a, t)?,
            )),
        }
    }

    /// Rename the value variable of a base type.
    pub fn with_vv(&self, new_vv: &str) -> RType {
        match self {
            RType::Base { base, vv, refinement } if vv != new_vv => RType::Base {
                base: base.clone(),
                vv: new_vv.to_string(),
                refinement: refinement.subst1(vv, &Pred::var(new_vv)),
            },
            other => other.clone(),
        }
    }

    /// Conjoin a refinement (stated over `vv`) onto a base type.
    pub fn strengthen(&self, extra: &Pred, over: &str) -> RType {
        match self {
            RType::Base { base, vv, refinement } => RType::Base {
                base: base.clone(),
                vv: vv.clone(),
                refinement: Pred::and(refinement.clone(), extra.subst1(over, &Pred::var(vv.clone()))),
            },
            other => other.clone(),
        }
    }
}

/// Shape erasure.
pub fn to_shape(t: &RType) -> UType {
    t.shape()
}

/// Capture-avoiding substitution `t[x := e]`.
pub fn subst_type(t: &RType, x: &str, e: &Pred) -> RType {
    t.subst1(x, e)
}

/// Horn-shaped constraint over abstract refinements, parametric in
/// value-level parameters: λx̄. s₁ ⇒ … ⇒ sₙ ⇒ s.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Bound {
    /// Name of the declaration the bound came from.
    pub name: Name,
    /// Abstract refinements the bound was applied to, in order.
    pub rvars: Vec<Name>,
    pub params: Vec<(Name, Base)>,
    pub body: Pred,
}

impl Bound {
    /// Antecedents and consequent of the implication chain.
    pub fn horn_parts(&self) -> (Vec<&Pred>, &Pred) {
        let mut ants = Vec::new();
        let mut cur = &self.body;
        while let Pred::Bin(BinOp::Imp, a, b) = cur {
            ants.push(&**a);
            cur = b;
        }
        (ants, cur)
    }

    pub fn instantiate_rvar(&self, rvar: &str, w: &ParamRefinement) -> Result<Bound, AstError> {
        Ok(Bound { body: self.body.instantiate_rvar(rvar, w)?, ..self.clone() })
    }

    pub fn subst_tyvar(&self, a: &str, t: &RType) -> Bound {
        let params = self
            .params
            .iter()
            .map(|(x, b)| match (b, t) {
                (Base::TyVar(c), RType::Base { base, .. }) if c == a => (x.clone(), base.clone()),
                _ => (x.clone(), b.clone()),
            })
            .collect();
        Bound { params, ..self.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Schema {
    Mono(RType),
    ForallTy(Name, Box<Schema>),
    ForallP(Name, RType, Box<Schema>),
    Bounded(Bound, Box<Schema>),
}

impl Schema {
    pub fn mono(&self) -> Option<&RType> {
        match self {
            Schema::Mono(t) => Some(t),
            _ => None,
        }
    }

    /// The quantifier-free body.
    pub fn body(&self) -> &RType {
        match self {
            Schema::Mono(t) => t,
            Schema::ForallTy(_, s) | Schema::ForallP(_, _, s) | Schema::Bounded(_, s) => s.body(),
        }
    }

    pub fn tyvars(&self) -> Vec<&Name> {
        match self {
            Schema::Mono(_) => vec![],
            Schema::ForallTy(a, s) => {
                let mut v = vec![a];
                v.extend(s.tyvars());
                v
            }
            Schema::ForallP(_, _, s) | Schema::Bounded(_, s) => s.tyvars(),
        }
    }

    pub fn rvar_decls(&self) -> Vec<(&Name, &RType)> {
        match self {
            Schema::Mono(_) => vec![],
            Schema::ForallP(p, t, s) => {
                let mut v = vec![(p, t)];
                v.extend(s.rvar_decls());
                v
            }
            Schema::ForallTy(_, s) | Schema::Bounded(_, s) => s.rvar_decls(),
        }
    }

    pub fn bounds(&self) -> Vec<&Bound> {
        match self {
            Schema::Mono(_) => vec![],
            Schema::Bounded(b, s) => {
                let mut v = vec![b];
                v.extend(s.bounds());
                v
            }
            Schema::ForallTy(_, s) | Schema::ForallP(_, _, s) => s.bounds(),
        }
    }

    pub fn shape(&self) -> UType {
        self.body().shape()
    }

    pub fn free_vars(&self) -> BTreeSet<Name> {
        let mut fv = self.body().free_vars();
        for b in self.bounds() {
            let mut bfv = b.body.free_vars();
            for (x, _) in &b.params {
                bfv.remove(x);
            }
            fv.extend(bfv);
        }
        fv
    }

    pub fn subst(&self, map: &HashMap<Name, Pred>) -> Schema {
        match self {
            Schema::Mono(t) => Schema::Mono(t.subst(map)),
            Schema::ForallTy(a, s) => Schema::ForallTy(a.clone(), Box::new(s.subst(map))),
            Schema::ForallP(p, t, s) => Schema::ForallP(p.clone(), t.clone(), Box::new(s.subst(map))),
            Schema::Bounded(b, s) => {
                let mut inner = map.clone();
                for (x, _) in &b.params {
                    inner.remove(x);
                }
                let b2 = Bound { body: b.body.subst(&inner), ..b.clone() };
                Schema::Bounded(b2, Box::new(s.subst(map)))
            }
        }
    }

    pub fn subst_tyvar(&self, a: &str, t: &RType) -> Result<Schema, AstError> {
        Ok(match self {
            Schema::Mono(r) => Schema::Mono(r.subst_tyvar(a, t)?),
            Schema::ForallTy(b, _) if b == a => self.clone(),
            Schema::ForallTy(b, s) => Schema::ForallTy(b.clone(), Box::new(s.subst_tyvar(a, t)?)),
            Schema::ForallP(p, pt, s) => {
                Schema::ForallP(p.clone(), pt.subst_tyvar(a, t)?, Box::new(s.subst_tyvar(a, t)?))
            }
            Schema::Bounded(b, s) => {
                Schema::Bounded(b.subst_tyvar(a, t), Box::new(s.subst_tyvar(a, t)?))
            }
        })
    }

    /// Replace every application of `rvar` by the witness. Stops at a
    /// quantifier that rebinds the same name.
    pub fn instantiate_rvar(&self, rvar: &str, w: &ParamRefinement) -> Result<Schema, AstError> {
        Ok(match self {
            Schema::Mono(t) => Schema::Mono(t.instantiate_rvar(rvar, w)?),
            Schema::ForallTy(a, s) => Schema::ForallTy(a.clone(), Box::new(s.instantiate_rvar(rvar, w)?)),
            Schema::ForallP(p, _, _) if p == rvar => self.clone(),
            Schema::ForallP(p, t, s) => {
                Schema::ForallP(p.clone(), t.clone(), Box::new(s.instantiate_rvar(rvar, w)?))
            }
            Schema::Bounded(b, s) => {
                Schema::Bounded(b.instantiate_rvar(rvar, w)?, Box::new(s.instantiate_rvar(rvar, w)?))
            }
        })
    }

    pub fn rename_tyvar(&self, from: &str, to: &str) -> Schema {
        let t = RType::trivial(Base::TyVar(to.to_string()));
        self.subst_tyvar(from, &t).expect("tyvar renaming never refines a function")
    }

    pub fn rename_rvar(&self, from: &str, to: &str) -> Schema {
        let arity = self
            .rvar_decls()
            .iter()
            .find(|(p, _)| *p == from)
            .map(|(_, t)| rvar_sorts(t).len());
        let Some(arity) = arity.or_else(|| self.max_rvar_arity(from)) else {
            return self.clone();
        };
        let params: Vec<(Name, Base)> = (0..arity).map(|i| (format!("_r{i}"), Base::Int)).collect();
        let body = Pred::RApp(to.to_string(), params.iter().map(|(x, _)| Pred::var(x.clone())).collect());
        let w = ParamRefinement { params, body };
        let renamed = self.instantiate_rvar(from, &w).expect("arity taken from the schema");
        match renamed {
            Schema::ForallP(p, t, s) if p == from => Schema::ForallP(to.to_string(), t, s),
            other => other,
        }
    }

    fn max_rvar_arity(&self, rvar: &str) -> Option<usize> {
        let mut ar = None;
        let mut visit = |p: &Pred| {
            p.any(&mut |q| {
                if let Pred::RApp(r, args) = q {
                    if r == rvar {
                        ar = Some(args.len());
                    }
                }
                false
            });
        };
        for r in self.body().refinements() {
            visit(r);
        }
        for b in self.bounds() {
            visit(&b.body);
        }
        ar
    }
}

/// Argument sorts of an abstract refinement's declared type
/// `b₁ -> … -> bₙ -> Bool`, value argument last.
pub fn rvar_sorts(t: &RType) -> Vec<Base> {
    let mut out = Vec::new();
    let mut cur = t;
    while let RType::Fun { dom, cod, .. } = cur {
        if let RType::Base { base, .. } = &**dom {
            out.push(base.clone());
        }
        cur = cod;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Prim {
    Add,
    Sub,
    /// Multiplication by a literal constant.
    MulBy(i64),
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    Not,
    And,
    Or,
    Assert,
}

impl Prim {
    pub fn from_name(s: &str) -> Option<Prim> {
        Some(match s {
            "add" => Prim::Add,
            "sub" => Prim::Sub,
            "lt" => Prim::Lt,
            "leq" | "le" => Prim::Le,
            "gt" => Prim::Gt,
            "geq" | "ge" => Prim::Ge,
            "eq" => Prim::Eq,
            "neq" => Prim::Ne,
            "not" => Prim::Not,
            "and" => Prim::And,
            "or" => Prim::Or,
            "assert" => Prim::Assert,
            _ => return None,
        })
    }

    pub fn name(self) -> String {
        match self {
            Prim::Add => "add".into(),
            Prim::Sub => "sub".into(),
            Prim::MulBy(k) => format!("mul{k}"),
            Prim::Lt => "lt".into(),
            Prim::Le => "leq".into(),
            Prim::Gt => "gt".into(),
            Prim::Ge => "geq".into(),
            Prim::Eq => "eq".into(),
            Prim::Ne => "neq".into(),
            Prim::Not => "not".into(),
            Prim::And => "and".into(),
            Prim::Or => "or".into(),
            Prim::Assert => "assert".into(),
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Prim::Not | Prim::MulBy(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Literal {
    Int(i64),
    Bool(bool),
    Prim(Prim),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Term {
    pub kind: TermKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TermKind {
    Var(Name),
    Const(Literal),
    Lam { binder: Name, ty: Option<RType>, body: Box<Term> },
    /// In ANF the argument is always a `Var`.
    App { fun: Box<Term>, arg: Box<Term> },
    Let { binder: Name, annot: Option<RType>, bound: Box<Term>, body: Box<Term> },
    If { cond: Box<Term>, then_branch: Box<Term>, else_branch: Box<Term> },
    TLam { tyvar: Name, body: Box<Term> },
    TApp { term: Box<Term>, ty: RType },
    PLam { rvar: Name, rvar_ty: RType, body: Box<Term> },
    PApp { term: Box<Term>, witness: ParamRefinement },
    CAbs { bound: Bound, body: Box<Term> },
    CApp { term: Box<Term>, bound: Bound },
}

impl Term {
    pub fn new(kind: TermKind, span: Span) -> Term {
        Term { kind, span }
    }

    pub fn var(x: impl Into<Name>, span: Span) -> Term {
        Term::new(TermKind::Var(x.into()), span)
    }

    pub fn int(n: i64, span: Span) -> Term {
        Term::new(TermKind::Const(Literal::Int(n)), span)
    }

    pub fn bool(b: bool, span: Span) -> Term {
        Term::new(TermKind::Const(Literal::Bool(b)), span)
    }

    pub fn prim(p: Prim, span: Span) -> Term {
        Term::new(TermKind::Const(Literal::Prim(p)), span)
    }

    pub fn lam(binder: impl Into<Name>, ty: Option<RType>, body: Term, span: Span) -> Term {
        Term::new(TermKind::Lam { binder: binder.into(), ty, body: Box::new(body) }, span)
    }

    pub fn app(fun: Term, arg: Term, span: Span) -> Term {
        Term::new(TermKind::App { fun: Box::new(fun), arg: Box::new(arg) }, span)
    }

    pub fn let_(binder: impl Into<Name>, annot: Option<RType>, bound: Term, body: Term, span: Span) -> Term {
        Term::new(
            TermKind::Let { binder: binder.into(), annot, bound: Box::new(bound), body: Box::new(body) },
            span,
        )
    }

    pub fn as_var(&self) -> Option<&Name> {
        match &self.kind {
            TermKind::Var(x) => Some(x),
            _ => None,
        }
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    pub fn children(&self) -> Vec<&Term> {
        match &self.kind {
            TermKind::Var(_) | TermKind::Const(_) => vec![],
            TermKind::Lam { body, .. }
            | TermKind::TLam { body, .. }
            | TermKind::PLam { body, .. }
            | TermKind::CAbs { body, .. } => vec![body],
            TermKind::App { fun, arg } => vec![fun, arg],
            TermKind::Let { bound, body, .. } => vec![bound, body],
            TermKind::If { cond, then_branch, else_branch } => vec![cond, then_branch, else_branch],
            TermKind::TApp { term, .. } | TermKind::PApp { term, .. } | TermKind::CApp { term, .. } => {
                vec![term]
            }
        }
    }

    pub fn any(&self, f: &mut impl FnMut(&Term) -> bool) -> bool {
        f(self) || self.children().into_iter().any(|c| c.any(f))
    }

    pub fn has_bound_nodes(&self) -> bool {
        self.any(&mut |t| matches!(t.kind, TermKind::CAbs { .. } | TermKind::CApp { .. }))
    }

    /// Every value application argument is a variable and every `if`
    /// scrutinee is a variable.
    pub fn is_anf(&self) -> bool {
        !self.any(&mut |t| match &t.kind {
            TermKind::App { arg, .. } => arg.as_var().is_none(),
            TermKind::If { cond, .. } => cond.as_var().is_none(),
            _ => false,
        })
    }

    /// Names bound by lambdas and lets, in traversal order.
    pub fn binders(&self) -> Vec<&Name> {
        let mut out = Vec::new();
        fn go<'a>(t: &'a Term, out: &mut Vec<&'a Name>) {
            match &t.kind {
                TermKind::Lam { binder, .. } | TermKind::Let { binder, .. } => out.push(binder),
                _ => {}
            }
            for c in t.children() {
                go(c, out);
            }
        }
        go(self, &mut out);
        out
    }

    pub fn free_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        fn go(t: &Term, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
            match &t.kind {
                TermKind::Var(x) => {
                    if !bound.contains(x) {
                        out.insert(x.clone());
                    }
                }
                TermKind::Lam { binder, body, .. } => {
                    bound.push(binder.clone());
                    go(body, bound, out);
                    bound.pop();
                }
                TermKind::Let { binder, bound: b, body, .. } => {
                    go(b, bound, out);
                    bound.push(binder.clone());
                    go(body, bound, out);
                    bound.pop();
                }
                _ => {
                    for c in t.children() {
                        go(c, bound, out);
                    }
                }
            }
        }
        go(self, &mut Vec::new(), &mut out);
        out
    }

    /// Capture-avoiding renaming of a free variable to another variable.
    /// Binders are globally unique after parsing, so only shadowing needs
    /// care.
    pub fn subst_var(&self, x: &str, y: &str) -> Term {
        let span = self.span;
        let ty_sub = |t: &RType| t.subst1(x, &Pred::var(y));
        let kind = match &self.kind {
            TermKind::Var(z) if z == x => TermKind::Var(y.to_string()),
            TermKind::Var(_) | TermKind::Const(_) => self.kind.clone(),
            TermKind::Lam { binder, ty, body } => {
                let ty = ty.as_ref().map(ty_sub);
                if binder == x {
                    TermKind::Lam { binder: binder.clone(), ty, body: body.clone() }
                } else if binder == y {
                    let mut avoid = self.free_vars();
                    avoid.insert(y.to_string());
                    avoid.insert(x.to_string());
                    let fresh = fresh_name(binder, &avoid);
                    let body = body.subst_var(binder, &fresh).subst_var(x, y);
                    TermKind::Lam { binder: fresh, ty, body: Box::new(body) }
                } else {
                    TermKind::Lam { binder: binder.clone(), ty, body: Box::new(body.subst_var(x, y)) }
                }
            }
            TermKind::Let { binder, annot, bound, body } => {
                let bound2 = Box::new(bound.subst_var(x, y));
                if binder == x {
                    TermKind::Let { binder: binder.clone(), annot: annot.clone(), bound: bound2, body: body.clone() }
                } else if binder == y {
                    let mut avoid = self.free_vars();
                    avoid.insert(y.to_string());
                    avoid.insert(x.to_string());
                    let fresh = fresh_name(binder, &avoid);
                    let body = body.subst_var(binder, &fresh).subst_var(x, y);
                    TermKind::Let {
                        binder: fresh,
                        annot: annot.as_ref().map(ty_sub),
                        bound: bound2,
                        body: Box::new(body),
                    }
                } else {
                    TermKind::Let {
                        binder: binder.clone(),
                        annot: annot.as_ref().map(ty_sub),
                        bound: bound2,
                        body: Box::new(body.subst_var(x, y)),
                    }
                }
            }
            TermKind::App { fun, arg } => {
                TermKind::App { fun: Box::new(fun.subst_var(x, y)), arg: Box::new(arg.subst_var(x, y)) }
            }
            TermKind::If { cond, then_branch, else_branch } => TermKind::If {
                cond: Box::new(cond.subst_var(x, y)),
                then_branch: Box::new(then_branch.subst_var(x, y)),
                else_branch: Box::new(else_branch.subst_var(x, y)),
            },
            TermKind::TLam { tyvar, body } => TermKind::TLam { tyvar: tyvar.clone(), body: Box::new(body.subst_var(x, y)) },
            TermKind::TApp { term, ty } => TermKind::TApp { term: Box::new(term.subst_var(x, y)), ty: ty_sub(ty) },
            TermKind::PLam { rvar, rvar_ty, body } => TermKind::PLam {
                rvar: rvar.clone(),
                rvar_ty: rvar_ty.clone(),
                body: Box::new(body.subst_var(x, y)),
            },
            TermKind::PApp { term, witness } => {
                let mut w = witness.clone();
                if !w.params.iter().any(|(p, _)| p == x) {
                    w.body = w.body.subst1(x, &Pred::var(y));
                }
                TermKind::PApp { term: Box::new(term.subst_var(x, y)), witness: w }
            }
            TermKind::CAbs { bound, body } => TermKind::CAbs { bound: bound.clone(), body: Box::new(body.subst_var(x, y)) },
            TermKind::CApp { term, bound } => TermKind::CApp { term: Box::new(term.subst_var(x, y)), bound: bound.clone() },
        };
        Term { kind, span }
    }

    /// Consistently rename every lambda/let binder using `fresh`, which is
    /// handed the original name and must return a new unique one. Free
    /// variables are left alone.
    pub fn rename_binders(&self, fresh: &mut impl FnMut(&str) -> Name) -> Term {
        fn go(t: &Term, scope: &mut Vec<(Name, Name)>, fresh: &mut impl FnMut(&str) -> Name) -> Term {
            let map_ty = |ty: &RType, scope: &Vec<(Name, Name)>| {
                // Inner bindings come later and overwrite outer ones.
                let mut m = HashMap::new();
                for (a, b) in scope.iter() {
                    m.insert(a.clone(), Pred::var(b.clone()));
                }
                ty.subst(&m)
            };
            let lookup = |x: &str, scope: &Vec<(Name, Name)>| {
                scope.iter().rev().find(|(a, _)| a == x).map(|(_, b)| b.clone())
            };
            let span = t.span;
            let kind = match &t.kind {
                TermKind::Var(x) => TermKind::Var(lookup(x, scope).unwrap_or_else(|| x.clone())),
                TermKind::Const(_) => t.kind.clone(),
                TermKind::Lam { binder, ty, body } => {
                    let ty = ty.as_ref().map(|ty| map_ty(ty, scope));
                    let nb = fresh(binder);
                    scope.push((binder.clone(), nb.clone()));
                    let body = go(body, scope, fresh);
                    scope.pop();
                    TermKind::Lam { binder: nb, ty, body: Box::new(body) }
                }
                TermKind::Let { binder, annot, bound, body } => {
                    let bound = go(bound, scope, fresh);
                    let annot = annot.as_ref().map(|ty| map_ty(ty, scope));
                    let nb = fresh(binder);
                    scope.push((binder.clone(), nb.clone()));
                    let body = go(body, scope, fresh);
                    scope.pop();
                    TermKind::Let { binder: nb, annot, bound: Box::new(bound), body: Box::new(body) }
                }
                TermKind::App { fun, arg } => TermKind::App {
                    fun: Box::new(go(fun, scope, fresh)),
                    arg: Box::new(go(arg, scope, fresh)),
                },
                TermKind::If { cond, then_branch, else_branch } => TermKind::If {
                    cond: Box::new(go(cond, scope, fresh)),
                    then_branch: Box::new(go(then_branch, scope, fresh)),
                    else_branch: Box::new(go(else_branch, scope, fresh)),
                },
                TermKind::TLam { tyvar, body } => TermKind::TLam { tyvar: tyvar.clone(), body: Box::new(go(body, scope, fresh)) },
                TermKind::TApp { term, ty } => TermKind::TApp { term: Box::new(go(term, scope, fresh)), ty: map_ty(ty, scope) },
                TermKind::PLam { rvar, rvar_ty, body } => TermKind::PLam {
                    rvar: rvar.clone(),
                    rvar_ty: rvar_ty.clone(),
                    body: Box::new(go(body, scope, fresh)),
                },
                TermKind::PApp { term, witness } => {
                    let mut m = HashMap::new();
                    for (a, b) in scope.iter() {
                        if !witness.params.iter().any(|(p, _)| p == a) {
                            m.insert(a.clone(), Pred::var(b.clone()));
                        }
                    }
                    let w = ParamRefinement { params: witness.params.clone(), body: witness.body.subst(&m) };
                    TermKind::PApp { term: Box::new(go(term, scope, fresh)), witness: w }
                }
                TermKind::CAbs { bound, body } => TermKind::CAbs { bound: bound.clone(), body: Box::new(go(body, scope, fresh)) },
                TermKind::CApp { term, bound } => TermKind::CApp { term: Box::new(go(term, scope, fresh)), bound: bound.clone() },
            };
            Term { kind, span }
        }
        go(self, &mut Vec::new(), fresh)
    }

    /// Canonical renaming used for alpha-equivalence checks.
    pub fn canonical(&self) -> Term {
        let mut n = 0;
        self.rename_binders(&mut |_| {
            n += 1;
            format!("#{n}")
        })
    }

    pub fn alpha_eq(&self, other: &Term) -> bool {
        strip_spans(&self.canonical()) == strip_spans(&other.canonical())
    }
}

fn strip_spans(t: &Term) -> Term {
    let mut t = t.clone();
    fn go(t: &mut Term) {
        t.span = Span::default();
        match &mut t.kind {
            TermKind::Var(_) | TermKind::Const(_) => {}
            TermKind::Lam { body, .. }
            | TermKind::TLam { body, .. }
            | TermKind::PLam { body, .. }
            | TermKind::CAbs { body, .. } => go(body),
            TermKind::App { fun, arg } => {
                go(fun);
                go(arg);
            }
            TermKind::Let { bound, body, .. } => {
                go(bound);
                go(body);
            }
            TermKind::If { cond, then_branch, else_branch } => {
                go(cond);
                go(then_branch);
                go(else_branch);
            }
            TermKind::TApp { term, .. } | TermKind::PApp { term, .. } | TermKind::CApp { term, .. } => go(term),
        }
    }
    go(&mut t);
    t
}

/// Instantiate an abstract refinement throughout a schema.
pub fn instantiate_rvar(s: &Schema, rvar: &str, witness: &ParamRefinement) -> Result<Schema, AstError> {
    s.instantiate_rvar(rvar, witness)
}

// ---------------------------------------------------------------------------
// Display

impl fmt::Display for Base {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Base::Int => f.write_str("Int"),
            Base::Bool => f.write_str("Bool"),
            Base::TyVar(a) => f.write_str(a),
        }
    }
}

impl fmt::Display for UType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UType::Int => f.write_str("Int"),
            UType::Bool => f.write_str("Bool"),
            UType::TyVar(a) => f.write_str(a),
            UType::Fun(d, c) => {
                if matches!(**d, UType::Fun(..)) {
                    write!(f, "({d}) -> {c}")
                } else {
                    write!(f, "{d} -> {c}")
                }
            }
        }
    }
}

const PREC_APP: u8 = 9;

fn fmt_pred(p: &Pred, ctx: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match p {
        Pred::Int(n) if *n < 0 && ctx >= 8 => write!(f, "({n})"),
        Pred::Int(n) => write!(f, "{n}"),
        Pred::Bool(b) => write!(f, "{b}"),
        Pred::Var(x) => f.write_str(x),
        Pred::Un(op, a) => {
            let open = ctx > 8;
            if open {
                f.write_str("(")?;
            }
            match op {
                UnOp::Not => f.write_str("not ")?,
                UnOp::Neg => f.write_str("-")?,
            }
            fmt_pred(a, 8, f)?;
            if open {
                f.write_str(")")?;
            }
            Ok(())
        }
        Pred::Bin(op, a, b) => {
            let prec = op.prec();
            let open = ctx > prec;
            if open {
                f.write_str("(")?;
            }
            // `=>` is right-associative; comparisons are non-associative.
            let (lp, rp) = match op {
                BinOp::Imp => (prec + 1, prec),
                BinOp::Iff => (prec + 1, prec + 1),
                _ if prec == 5 => (prec + 1, prec + 1),
                _ => (prec, prec + 1),
            };
            fmt_pred(a, lp, f)?;
            write!(f, " {} ", op.symbol())?;
            fmt_pred(b, rp, f)?;
            if open {
                f.write_str(")")?;
            }
            Ok(())
        }
        Pred::Ite(c, a, b) => {
            let open = ctx > 0;
            if open {
                f.write_str("(")?;
            }
            f.write_str("if ")?;
            fmt_pred(c, 0, f)?;
            f.write_str(" then ")?;
            fmt_pred(a, 0, f)?;
            f.write_str(" else ")?;
            fmt_pred(b, 0, f)?;
            if open {
                f.write_str(")")?;
            }
            Ok(())
        }
        Pred::App(g, args) | Pred::RApp(g, args) | Pred::Kappa(g, args) => {
            if args.is_empty() {
                return f.write_str(g);
            }
            let open = ctx > PREC_APP - 1;
            if open {
                f.write_str("(")?;
            }
            f.write_str(g)?;
            for a in args {
                f.write_str(" ")?;
                fmt_pred(a, PREC_APP + 1, f)?;
            }
            if open {
                f.write_str(")")?;
            }
            Ok(())
        }
    }
}

impl fmt::Display for Pred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_pred(self, 0, f)
    }
}

impl fmt::Display for ParamRefinement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.params.is_empty() {
            return write!(f, "{}", self.body);
        }
        f.write_str("\\")?;
        for (i, (x, b)) in self.params.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "({x}:{b})")?;
        }
        write!(f, " -> {}", self.body)
    }
}

impl RType {
    fn fmt_prec(&self, atomic: bool, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RType::Base { base, refinement, .. } if refinement.is_true() => write!(f, "{base}"),
            RType::Base { base, vv, refinement } => write!(f, "{{{vv}:{base} | {refinement}}}"),
            RType::Fun { binder, dom, cod } => {
                if atomic {
                    f.write_str("(")?;
                }
                let anonymous = binder.starts_with('_') && !cod.free_vars().contains(binder);
                if !anonymous {
                    write!(f, "{binder}:")?;
                }
                dom.fmt_prec(true, f)?;
                f.write_str(" -> ")?;
                cod.fmt_prec(false, f)?;
                if atomic {
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for RType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(false, f)
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for r in &self.rvars {
            write!(f, " {r}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schema::Mono(t) => write!(f, "{t}"),
            Schema::ForallTy(a, s) => {
                write!(f, "forall {a}")?;
                let mut cur = &**s;
                while let Schema::ForallTy(b, s2) = cur {
                    write!(f, " {b}")?;
                    cur = s2;
                }
                write!(f, ". {cur}")
            }
            Schema::ForallP(p, t, s) => {
                write!(f, "forall <{p} :: {t}")?;
                let mut cur = &**s;
                while let Schema::ForallP(q, t2, s2) = cur {
                    write!(f, ", {q} :: {t2}")?;
                    cur = s2;
                }
                write!(f, ">. {cur}")
            }
            Schema::Bounded(b, s) => write!(f, "{b} => {s}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn int_ref(vv: &str, r: Pred) -> RType {
        RType::base(Base::Int, vv, r)
    }

    fn lt(a: Pred, b: Pred) -> Pred {
        Pred::bin(BinOp::Lt, a, b)
    }

    #[test]
    fn shape_erases_refinements() {
        let t = int_ref("v", lt(Pred::Int(0), Pred::var("v")));
        assert_eq!(to_shape(&t), UType::Int);
        let f = RType::fun(
            "x",
            int_ref("v", Pred::RApp("p".into(), vec![Pred::var("x"), Pred::var("v")])),
            RType::fun("y", int_ref("v", Pred::var("q")), RType::trivial(Base::Int)),
        );
        assert_eq!(to_shape(&f), UType::fun(UType::Int, UType::fun(UType::Int, UType::Int)));
    }

    #[test]
    fn subst_replaces_free_occurrence() {
        let t = int_ref("v", Pred::eq(Pred::var("v"), Pred::var("x")));
        let t2 = subst_type(&t, "x", &Pred::Int(3));
        assert_eq!(t2, int_ref("v", Pred::eq(Pred::var("v"), Pred::Int(3))));
    }

    #[test]
    fn subst_is_noop_for_absent_variable() {
        let t = int_ref("v", Pred::var("p"));
        assert_eq!(subst_type(&t, "y", &Pred::Int(3)), t);
    }

    #[test]
    fn subst_leaves_binder_untouched() {
        let t = RType::fun(
            "w",
            int_ref("v", lt(Pred::var("v"), Pred::var("x"))),
            int_ref("v", Pred::eq(Pred::var("v"), Pred::var("w"))),
        );
        let t2 = subst_type(&t, "x", &Pred::var("n"));
        assert_eq!(
            t2,
            RType::fun(
                "w",
                int_ref("v", lt(Pred::var("v"), Pred::var("n"))),
                int_ref("v", Pred::eq(Pred::var("v"), Pred::var("w"))),
            )
        );
    }

    #[test]
    fn subst_avoids_capture() {
        // (w:Int -> {v | v = x})[x := w] must rename the binder.
        let t = RType::fun("w", RType::trivial(Base::Int), int_ref("v", Pred::eq(Pred::var("v"), Pred::var("x"))));
        let t2 = subst_type(&t, "x", &Pred::var("w"));
        match &t2 {
            RType::Fun { binder, cod, .. } => {
                assert_ne!(binder, "w");
                assert_eq!(*cod.as_ref(), int_ref("v", Pred::eq(Pred::var("v"), Pred::var("w"))));
            }
            _ => panic!(),
        }
        // Value variable capture.
        let b = int_ref("v", lt(Pred::var("v"), Pred::var("x")));
        let b2 = subst_type(&b, "x", &Pred::var("v"));
        match b2 {
            RType::Base { vv, refinement, .. } => {
                assert_ne!(vv, "v");
                assert_eq!(refinement, lt(Pred::var(vv.clone()), Pred::var("v")));
            }
            _ => panic!(),
        }
    }

    #[test]
    fn instantiate_two_argument_rvar() {
        // {v:Int | π y v ∧ v > 10} with π ↦ λx₁ x₂. x₁ < x₂
        let r = Pred::and(
            Pred::RApp("pi".into(), vec![Pred::var("y"), Pred::var("v")]),
            Pred::bin(BinOp::Gt, Pred::var("v"), Pred::Int(10)),
        );
        let s = Schema::Mono(int_ref("v", r));
        let w = ParamRefinement {
            params: vec![("x1".into(), Base::Int), ("x2".into(), Base::Int)],
            body: lt(Pred::var("x1"), Pred::var("x2")),
        };
        let out = instantiate_rvar(&s, "pi", &w).unwrap();
        let expected = Pred::and(lt(Pred::var("y"), Pred::var("v")), Pred::bin(BinOp::Gt, Pred::var("v"), Pred::Int(10)));
        assert_eq!(out, Schema::Mono(int_ref("v", expected)));
    }

    #[test]
    fn instantiate_without_occurrence_is_identity() {
        let s = Schema::Mono(RType::trivial(Base::Int));
        let w = ParamRefinement { params: vec![("x".into(), Base::Int)], body: Pred::Bool(false) };
        assert_eq!(instantiate_rvar(&s, "p", &w).unwrap(), s);
    }

    #[test]
    fn instantiate_unary_rvar() {
        let s = Schema::Mono(int_ref("v", Pred::RApp("p".into(), vec![Pred::var("v")])));
        let w = ParamRefinement { params: vec![("x".into(), Base::Int)], body: lt(Pred::Int(0), Pred::var("x")) };
        assert_eq!(
            instantiate_rvar(&s, "p", &w).unwrap(),
            Schema::Mono(int_ref("v", lt(Pred::Int(0), Pred::var("v"))))
        );
    }

    #[test]
    fn instantiate_arity_mismatch() {
        let s = Schema::Mono(int_ref("v", Pred::RApp("p".into(), vec![Pred::var("v")])));
        let w = ParamRefinement {
            params: vec![("x".into(), Base::Int), ("y".into(), Base::Int)],
            body: Pred::tt(),
        };
        assert!(matches!(instantiate_rvar(&s, "p", &w), Err(AstError::ArityMismatch { .. })));
    }

    #[test]
    fn fresh_name_strips_existing_suffix() {
        let avoid: BTreeSet<Name> = ["x".to_string(), "x'1".to_string()].into_iter().collect();
        assert_eq!(fresh_name("x'1", &avoid), "x'2");
        assert_eq!(fresh_name("y", &avoid), "y");
    }

    #[test]
    fn pred_display_round_trips_precedence() {
        let p = Pred::implies(
            Pred::RApp("q".into(), vec![Pred::var("x"), Pred::var("y")]),
            Pred::implies(
                Pred::RApp("p".into(), vec![Pred::var("y"), Pred::var("z")]),
                Pred::RApp("r".into(), vec![Pred::var("x"), Pred::var("z")]),
            ),
        );
        assert_eq!(p.to_string(), "q x y => p y z => r x z");
        let q = Pred::RApp("p".into(), vec![Pred::bin(BinOp::Add, Pred::var("x"), Pred::Int(1))]);
        assert_eq!(q.to_string(), "p (x + 1)");
    }
}
