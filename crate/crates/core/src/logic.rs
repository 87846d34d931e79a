//! The quantifier-free refinement logic: sorts, verification conditions,
//! embedding of refinements and environments, a sort checker and the
//! textual `.vc` format.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::ast::{Base, BinOp, Name, Pred, Span, UnOp};
use crate::surface::{parse_formula, SurfaceError};

/// Formulas share the predicate tree. Uninterpreted applications cover
/// declared functions (`App`), abstract refinements (`RApp`) and, during
/// inference, unknowns (`Kappa`).
pub type Formula = Pred;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sort {
    Int,
    Bool,
    /// Uninterpreted sort: type variables and user-declared sorts.
    Named(Name),
}

impl Sort {
    pub fn of_base(b: &Base) -> Sort {
        match b {
            Base::Int => Sort::Int,
            Base::Bool => Sort::Bool,
            Base::TyVar(a) => Sort::Named(a.clone()),
        }
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Int => f.write_str("Int"),
            Sort::Bool => f.write_str("Bool"),
            Sort::Named(s) => f.write_str(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FunDecl {
    pub name: Name,
    pub args: Vec<Sort>,
    pub ret: Sort,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Binder {
    pub name: Name,
    pub sort: Sort,
    pub hyp: Formula,
}

/// ⋀ hypotheses ⇒ goal, all binders universally quantified.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Vc {
    pub name: String,
    pub sorts: Vec<Name>,
    pub funs: Vec<FunDecl>,
    pub binders: Vec<Binder>,
    pub goal: Formula,
    pub span: Option<Span>,
}

impl Vc {
    pub fn new(name: impl Into<String>) -> Vc {
        Vc { name: name.into(), sorts: vec![], funs: vec![], binders: vec![], goal: Pred::tt(), span: None }
    }

    pub fn bind(mut self, name: &str, sort: Sort, hyp: Formula) -> Vc {
        self.binders.push(Binder { name: name.into(), sort, hyp });
        self
    }

    pub fn fun(mut self, name: &str, args: Vec<Sort>, ret: Sort) -> Vc {
        self.funs.push(FunDecl { name: name.into(), args, ret });
        self
    }

    pub fn goal(mut self, goal: Formula) -> Vc {
        self.goal = goal;
        self
    }

    pub fn hypotheses(&self) -> impl DoubleEndedIterator<Item = &Formula> {
        self.binders.iter().map(|b| &b.hyp).filter(|h| !h.is_true())
    }

    /// The whole VC as one implication, for display.
    pub fn as_implication(&self) -> Formula {
        self.hypotheses().rev().fold(self.goal.clone(), |acc, h| Pred::implies(h.clone(), acc))
    }

    pub fn fun_decl(&self, name: &str) -> Option<&FunDecl> {
        self.funs.iter().find(|f| f.name == name)
    }

    /// Declare every named sort mentioned by binders or function signatures.
    pub fn normalize_sorts(&mut self) {
        let mut seen: BTreeSet<Name> = self.sorts.iter().cloned().collect();
        let mut push = |s: &Sort, out: &mut Vec<Name>| {
            if let Sort::Named(n) = s {
                if seen.insert(n.clone()) {
                    out.push(n.clone());
                }
            }
        };
        let mut extra = Vec::new();
        for b in &self.binders {
            push(&b.sort, &mut extra);
        }
        for f in &self.funs {
            for a in &f.args {
                push(a, &mut extra);
            }
            push(&f.ret, &mut extra);
        }
        self.sorts.extend(extra);
    }

    pub fn has_kappa(&self) -> bool {
        self.goal.has_kappa() || self.binders.iter().any(|b| b.hyp.has_kappa())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SortError {
    #[error("ill-sorted: `{term}` has sort {found}, expected {expected}")]
    Mismatch { term: String, found: Sort, expected: String },
    #[error("unknown symbol `{0}`")]
    Unknown(Name),
    #[error("`{name}` applied to {found} arguments, expects {expected}")]
    Arity { name: Name, expected: usize, found: usize },
    #[error("nonlinear multiplication `{0}`")]
    Nonlinear(String),
}

/// Sort lookup for variables and applied symbols.
pub trait SortEnv {
    fn var(&self, x: &str) -> Option<Sort>;
    fn fun(&self, f: &str) -> Option<(Vec<Sort>, Sort)>;
}

impl SortEnv for Vc {
    fn var(&self, x: &str) -> Option<Sort> {
        self.binders.iter().rev().find(|b| b.name == x).map(|b| b.sort.clone())
    }

    fn fun(&self, f: &str) -> Option<(Vec<Sort>, Sort)> {
        self.fun_decl(f).map(|d| (d.args.clone(), d.ret.clone()))
    }
}

fn mismatch(p: &Pred, found: Sort, expected: &str) -> SortError {
    SortError::Mismatch { term: p.to_string(), found, expected: expected.into() }
}

pub fn sort_of(p: &Pred, env: &dyn SortEnv) -> Result<Sort, SortError> {
    let expect = |q: &Pred, s: Sort| -> Result<(), SortError> {
        let found = sort_of(q, env)?;
        if found == s {
            Ok(())
        } else {
            Err(mismatch(q, found, &s.to_string()))
        }
    };
    match p {
        Pred::Int(_) => Ok(Sort::Int),
        Pred::Bool(_) => Ok(Sort::Bool),
        Pred::Var(x) => env.var(x).ok_or_else(|| SortError::Unknown(x.clone())),
        Pred::Un(UnOp::Not, a) => expect(a, Sort::Bool).map(|_| Sort::Bool),
        Pred::Un(UnOp::Neg, a) => expect(a, Sort::Int).map(|_| Sort::Int),
        Pred::Bin(op, a, b) => match op {
            BinOp::Add | BinOp::Sub => {
                expect(a, Sort::Int)?;
                expect(b, Sort::Int)?;
                Ok(Sort::Int)
            }
            BinOp::Mul => {
                expect(a, Sort::Int)?;
                expect(b, Sort::Int)?;
                if is_const_int(a) || is_const_int(b) {
                    Ok(Sort::Int)
                } else {
                    Err(SortError::Nonlinear(p.to_string()))
                }
            }
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                expect(a, Sort::Int)?;
                expect(b, Sort::Int)?;
                Ok(Sort::Bool)
            }
            BinOp::Eq | BinOp::Ne => {
                let sa = sort_of(a, env)?;
                expect(b, sa)?;
                Ok(Sort::Bool)
            }
            BinOp::And | BinOp::Or | BinOp::Imp | BinOp::Iff => {
                expect(a, Sort::Bool)?;
                expect(b, Sort::Bool)?;
                Ok(Sort::Bool)
            }
        },
        Pred::Ite(c, a, b) => {
            expect(c, Sort::Bool)?;
            let sa = sort_of(a, env)?;
            expect(b, sa.clone())?;
            Ok(sa)
        }
        Pred::App(f, args) | Pred::RApp(f, args) | Pred::Kappa(f, args) => {
            let (sorts, ret) = env.fun(f).ok_or_else(|| SortError::Unknown(f.clone()))?;
            if sorts.len() != args.len() {
                return Err(SortError::Arity { name: f.clone(), expected: sorts.len(), found: args.len() });
            }
            for (a, s) in args.iter().zip(sorts) {
                expect(a, s)?;
            }
            Ok(ret)
        }
    }
}

fn is_const_int(p: &Pred) -> bool {
    match p {
        Pred::Int(_) => true,
        Pred::Un(UnOp::Neg, a) => is_const_int(a),
        _ => false,
    }
}

/// Independent sort check of a whole VC: binders are visible in order
/// (each hypothesis may mention itself and earlier binders; the goal sees
/// all), every hypothesis and the goal are Bool.
pub fn check_sorts(vc: &Vc) -> Result<(), SortError> {
    struct Prefix<'a> {
        vc: &'a Vc,
        upto: usize,
    }
    impl SortEnv for Prefix<'_> {
        fn var(&self, x: &str) -> Option<Sort> {
            self.vc.binders[..self.upto].iter().rev().find(|b| b.name == x).map(|b| b.sort.clone())
        }
        fn fun(&self, f: &str) -> Option<(Vec<Sort>, Sort)> {
            self.vc.fun(f)
        }
    }
    for (i, b) in vc.binders.iter().enumerate() {
        let s = sort_of(&b.hyp, &Prefix { vc, upto: i + 1 })?;
        if s != Sort::Bool {
            return Err(mismatch(&b.hyp, s, "Bool"));
        }
    }
    let s = sort_of(&vc.goal, &Prefix { vc, upto: vc.binders.len() })?;
    if s != Sort::Bool {
        return Err(mismatch(&vc.goal, s, "Bool"));
    }
    Ok(())
}

/// `⟦r⟧` with the value variable renamed to `x`.
pub fn embed_refinement(r: &Pred, vv: &str, x: &str) -> Formula {
    if vv == x {
        r.clone()
    } else {
        r.subst1(vv, &Pred::var(x))
    }
}

// ---------------------------------------------------------------------------
// `.vc` text format

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VcFileError {
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("line {line}: {err}")]
    Formula { line: usize, err: SurfaceError },
    #[error("line {line}: {err}")]
    Sort { line: usize, err: SortError },
}

fn parse_sort(s: &str) -> Sort {
    match s.trim() {
        "Int" => Sort::Int,
        "Bool" => Sort::Bool,
        other => Sort::Named(other.to_string()),
    }
}

/// Parse a `.vc` file: any number of VCs, each terminated by its `goal`.
pub fn parse_vc_file(src: &str) -> Result<Vec<Vc>, VcFileError> {
    let mut out = Vec::new();
    let mut cur = Vc::new("");
    let mut cur_line = 0usize;
    let mut named = false;
    let mut declared: BTreeMap<Name, usize> = BTreeMap::new();
    for (i, raw) in src.lines().enumerate() {
        let line = i + 1;
        let text = match raw.find("--") {
            Some(k) => &raw[..k],
            None => raw,
        }
        .trim();
        if text.is_empty() {
            continue;
        }
        let err = |msg: String| VcFileError::Line { line, msg };
        let formula = |s: &str| parse_formula(s).map_err(|e| VcFileError::Formula { line, err: relocate(e, line) });
        let (kw, rest) = text.split_once(char::is_whitespace).unwrap_or((text, ""));
        let rest = rest.trim();
        match kw {
            "vc" => {
                if named || !cur.binders.is_empty() {
                    return Err(err("`vc` header inside an unfinished VC".into()));
                }
                cur.name = rest.to_string();
                named = true;
                cur_line = line;
            }
            "sort" => cur.sorts.push(rest.to_string()),
            "fun" => {
                let (name, sig) = rest.split_once(':').ok_or_else(|| err("expected `fun f : A -> B`".into()))?;
                let mut sorts: Vec<Sort> = sig.split("->").map(parse_sort).collect();
                let ret = sorts.pop().unwrap();
                declared.insert(name.trim().to_string(), line);
                cur.funs.push(FunDecl { name: name.trim().to_string(), args: sorts, ret });
            }
            "bind" => {
                let (name, tail) = rest.split_once(':').ok_or_else(|| err("expected `bind x : Sort`".into()))?;
                let (sort, hyp) = match tail.split_once('|') {
                    Some((s, h)) => (parse_sort(s), formula(h)?),
                    None => (parse_sort(tail), Pred::tt()),
                };
                if cur.binders.is_empty() && !named {
                    cur_line = line;
                }
                cur.binders.push(Binder { name: name.trim().to_string(), sort, hyp });
            }
            "goal" => {
                let g = rest.strip_prefix(':').ok_or_else(|| err("expected `goal : formula`".into()))?;
                cur.goal = formula(g)?;
                if !named {
                    cur.name = format!("vc{}", out.len());
                    if cur.binders.is_empty() {
                        cur_line = line;
                    }
                }
                cur.span = Some(Span::new(cur_line as u32, 1));
                default_funs(&mut cur);
                cur.normalize_sorts();
                check_sorts(&cur).map_err(|e| VcFileError::Sort { line, err: e })?;
                out.push(std::mem::replace(&mut cur, Vc::new("")));
                named = false;
            }
            other => return Err(err(format!("unknown directive `{other}`"))),
        }
    }
    if named || !cur.binders.is_empty() {
        return Err(VcFileError::Line { line: src.lines().count(), msg: "VC without a goal".into() });
    }
    Ok(out)
}

fn relocate(e: SurfaceError, line: usize) -> SurfaceError {
    match e {
        SurfaceError::Syntax { span, expected, found } => {
            SurfaceError::Syntax { span: Span::new(line as u32, span.col), expected, found }
        }
        other => other,
    }
}

/// Applied symbols without a declaration default to Int^n -> Bool.
fn default_funs(vc: &mut Vc) {
    let mut found: Vec<(Name, usize)> = Vec::new();
    let mut visit = |p: &Pred| {
        p.any(&mut |q| {
            if let Pred::App(f, args) | Pred::RApp(f, args) = q {
                if !found.iter().any(|(g, _)| g == f) {
                    found.push((f.clone(), args.len()));
                }
            }
            false
        });
    };
    for b in &vc.binders {
        visit(&b.hyp);
    }
    visit(&vc.goal);
    for (f, n) in found {
        if vc.fun_decl(&f).is_none() {
            vc.funs.push(FunDecl { name: f, args: vec![Sort::Int; n], ret: Sort::Bool });
        }
    }
}

pub fn print_vc(vc: &Vc) -> String {
    let mut s = format!("vc {}\n", vc.name);
    for so in &vc.sorts {
        s.push_str(&format!("sort {so}\n"));
    }
    for f in &vc.funs {
        let mut sig: Vec<String> = f.args.iter().map(|a| a.to_string()).collect();
        sig.push(f.ret.to_string());
        s.push_str(&format!("fun {} : {}\n", f.name, sig.join(" -> ")));
    }
    for b in &vc.binders {
        if b.hyp.is_true() {
            s.push_str(&format!("bind {} : {}\n", b.name, b.sort));
        } else {
            s.push_str(&format!("bind {} : {} | {}\n", b.name, b.sort, b.hyp));
        }
    }
    s.push_str(&format!("goal : {}\n", vc.goal));
    s
}
