//! Call-by-value evaluation with fuel. Types and abstract refinements are
//! erased at run time: their abstractions and applications evaluate like
//! closures over nothing. λB additionally steps a bound application of a
//! bound abstraction to the body; in λP bounds must already be translated
//! into ghost functions.

use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

use thiserror::Error;

use crate::ast::{Bound, Literal, Name, Prim, RType, Span, Term, TermKind};
use crate::elaborate::bound_type;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    LambdaB,
    LambdaP,
}

#[derive(Clone, Debug)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Closure { binder: Name, body: Rc<Term>, env: Env },
    /// Suspended type, refinement or bound abstraction.
    Erased { body: Rc<Term>, env: Env, bound: bool },
    Prim { prim: Prim, args: Vec<Value> },
    /// `assert false` was reached.
    Crash,
}

impl Value {
    /// Constant values compare by value; everything else is opaque.
    pub fn constant(&self) -> Option<Literal> {
        match self {
            Value::Int(n) => Some(Literal::Int(*n)),
            Value::Bool(b) => Some(Literal::Bool(*b)),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Closure { binder, .. } => write!(f, "<closure \\{binder}>"),
            Value::Erased { .. } => f.write_str("<abstraction>"),
            Value::Prim { prim, args } => write!(f, "<prim {prim:?}/{}>", args.len()),
            Value::Crash => f.write_str("CRASH"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("out of fuel")]
    OutOfFuel,
    #[error("{span}: stuck: {msg}")]
    Stuck { span: Span, msg: String },
}

/// Persistent environment as a linked list.
#[derive(Clone, Debug, Default)]
pub struct Env(Option<Rc<(Name, Value, Env)>>);

impl Env {
    fn bind(&self, x: &str, v: Value) -> Env {
        Env(Some(Rc::new((x.to_string(), v, self.clone()))))
    }

    fn get(&self, x: &str) -> Option<&Value> {
        let mut cur = self;
        while let Some(cell) = &cur.0 {
            if cell.0 == x {
                return Some(&cell.1);
            }
            cur = &cell.2;
        }
        None
    }
}

enum Stop {
    Crash,
    Err(EvalError),
}

impl From<EvalError> for Stop {
    fn from(e: EvalError) -> Stop {
        Stop::Err(e)
    }
}

type R = Result<Value, Stop>;

struct Machine<'a> {
    globals: &'a HashMap<Name, Term>,
    fuel: u64,
    mode: Mode,
}

fn stuck(span: Span, msg: impl Into<String>) -> Stop {
    Stop::Err(EvalError::Stuck { span, msg: msg.into() })
}

impl Machine<'_> {
    fn tick(&mut self) -> Result<(), Stop> {
        if self.fuel == 0 {
            return Err(Stop::Err(EvalError::OutOfFuel));
        }
        self.fuel -= 1;
        Ok(())
    }

    fn eval(&mut self, e: &Term, env: &Env) -> R {
        match &e.kind {
            TermKind::Var(x) => match env.get(x) {
                Some(v) => Ok(v.clone()),
                None => match self.globals.get(x) {
                    Some(body) => {
                        self.tick()?;
                        self.eval(body, &Env::default())
                    }
                    None => Err(stuck(e.span, format!("unbound variable `{x}`"))),
                },
            },
            TermKind::Const(Literal::Int(n)) => Ok(Value::Int(*n)),
            TermKind::Const(Literal::Bool(b)) => Ok(Value::Bool(*b)),
            TermKind::Const(Literal::Prim(p)) => Ok(Value::Prim { prim: *p, args: vec![] }),
            TermKind::Lam { binder, body, .. } => {
                Ok(Value::Closure { binder: binder.clone(), body: Rc::new((**body).clone()), env: env.clone() })
            }
            TermKind::App { fun, arg } => {
                let f = self.eval(fun, env)?;
                let a = self.eval(arg, env)?;
                self.apply(f, a, e.span)
            }
            TermKind::Let { binder, bound, body, .. } => {
                let v = self.eval(bound, env)?;
                self.eval(body, &env.bind(binder, v))
            }
            TermKind::If { cond, then_branch, else_branch } => match self.eval(cond, env)? {
                Value::Bool(true) => self.eval(then_branch, env),
                Value::Bool(false) => self.eval(else_branch, env),
                other => Err(stuck(e.span, format!("condition is {other}"))),
            },
            TermKind::TLam { body, .. } | TermKind::PLam { body, .. } => {
                Ok(Value::Erased { body: Rc::new((**body).clone()), env: env.clone(), bound: false })
            }
            TermKind::CAbs { body, .. } => {
                if self.mode == Mode::LambdaP {
                    return Err(stuck(e.span, "bound abstraction in a λP term"));
                }
                Ok(Value::Erased { body: Rc::new((**body).clone()), env: env.clone(), bound: true })
            }
            TermKind::TApp { term, .. } | TermKind::PApp { term, .. } => match self.eval(term, env)? {
                Value::Erased { body, env, bound: false } => {
                    self.tick()?;
                    self.eval(&body, &env)
                }
                // Primitives are polymorphic without an explicit abstraction.
                v @ Value::Prim { .. } => Ok(v),
                other => Err(stuck(e.span, format!("instantiating {other}"))),
            },
            TermKind::CApp { term, .. } => {
                if self.mode == Mode::LambdaP {
                    return Err(stuck(e.span, "bound application in a λP term"));
                }
                match self.eval(term, env)? {
                    Value::Erased { body, env, bound: true } => {
                        self.tick()?;
                        self.eval(&body, &env)
                    }
                    other => Err(stuck(e.span, format!("bound application of {other}"))),
                }
            }
        }
    }

    fn apply(&mut self, f: Value, a: Value, span: Span) -> R {
        match f {
            Value::Closure { binder, body, env } => {
                self.tick()?;
                self.eval(&body, &env.bind(&binder, a))
            }
            Value::Prim { prim, mut args } => {
                args.push(a);
                if args.len() < prim.arity() {
                    return Ok(Value::Prim { prim, args });
                }
                self.tick()?;
                delta(prim, &args, span)
            }
            // Erasure: a type or refinement abstraction is transparent.
            Value::Erased { body, env, bound: false } => {
                let f = self.eval(&body, &env)?;
                self.apply(f, a, span)
            }
            other => Err(stuck(span, format!("applying {other}"))),
        }
    }
}

fn delta(p: Prim, args: &[Value], span: Span) -> R {
    use Value::{Bool as B, Int as I};
    Ok(match (p, args) {
        (Prim::Add, [I(a), I(b)]) => I(a.wrapping_add(*b)),
        (Prim::Sub, [I(a), I(b)]) => I(a.wrapping_sub(*b)),
        (Prim::MulBy(k), [I(a)]) => I(k.wrapping_mul(*a)),
        (Prim::Lt, [I(a), I(b)]) => B(a < b),
        (Prim::Le, [I(a), I(b)]) => B(a <= b),
        (Prim::Gt, [I(a), I(b)]) => B(a > b),
        (Prim::Ge, [I(a), I(b)]) => B(a >= b),
        (Prim::Eq, [I(a), I(b)]) => B(a == b),
        (Prim::Ne, [I(a), I(b)]) => B(a != b),
        (Prim::Not, [B(a)]) => B(!a),
        (Prim::And, [B(a), B(b)]) => B(*a && *b),
        (Prim::Or, [B(a), B(b)]) => B(*a || *b),
        (Prim::Assert, [B(true), x]) => x.clone(),
        (Prim::Assert, [B(false), _]) => return Err(Stop::Crash),
        _ => return Err(stuck(span, format!("{p:?} applied to {}", args.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ")))),
    })
}

/// Evaluate a closed term; `assert false` yields `Value::Crash`.
pub fn eval(e: &Term, fuel: u64, mode: Mode) -> Result<Value, EvalError> {
    eval_with(&HashMap::new(), e, fuel, mode)
}

/// Evaluate with top-level definitions in scope (looked up by name, so
/// they may be recursive).
pub fn eval_with(globals: &HashMap<Name, Term>, e: &Term, fuel: u64, mode: Mode) -> Result<Value, EvalError> {
    let mut m = Machine { globals, fuel, mode };
    match m.eval(e, &Env::default()) {
        Ok(v) => Ok(v),
        Err(Stop::Crash) => Ok(Value::Crash),
        Err(Stop::Err(err)) => Err(err),
    }
}

/// λB to λP: bound abstractions become ghost function parameters, every
/// `let` under them materializes each ghost at the new binder, and bound
/// applications pass the constant-true witness.
pub fn translate(e: &Term) -> Term {
    Translate { n: 0, ghosts: Vec::new() }.term(e)
}

struct Translate {
    n: usize,
    /// Ghosts in scope with their arities.
    ghosts: Vec<(Name, usize)>,
}

impl Translate {
    fn fresh(&mut self, stem: &str) -> Name {
        let x = format!("${stem}{}", self.n);
        self.n += 1;
        x
    }

    fn witness(&mut self, b: &Bound, span: Span) -> Term {
        let ty = bound_type(b);
        let mut params = Vec::new();
        let mut cur = &ty;
        while let RType::Fun { dom, cod, .. } = cur {
            params.push((self.fresh("_"), (**dom).clone()));
            cur = cod;
        }
        params.into_iter().rev().fold(Term::bool(true, span), |acc, (x, t)| Term::lam(x, Some(t), acc, span))
    }

    fn materialize(&mut self, x: &str, body: Term, span: Span) -> Term {
        let ghosts = self.ghosts.clone();
        ghosts.into_iter().rev().fold(body, |acc, (g, k)| {
            let call = (0..k).fold(Term::var(g, span), |f, _| Term::app(f, Term::var(x, span), span));
            let m = self.fresh("m");
            Term::let_(m, None, call, acc, span)
        })
    }

    fn term(&mut self, e: &Term) -> Term {
        let span = e.span;
        let bx = |t: Term| Box::new(t);
        let kind = match &e.kind {
            TermKind::Var(_) | TermKind::Const(_) => return e.clone(),
            TermKind::Lam { binder, ty, body } => {
                TermKind::Lam { binder: binder.clone(), ty: ty.clone(), body: bx(self.term(body)) }
            }
            TermKind::App { fun, arg } => TermKind::App { fun: bx(self.term(fun)), arg: bx(self.term(arg)) },
            TermKind::Let { binder, annot, bound, body } => {
                let bound = self.term(bound);
                let body = self.term(body);
                let body = self.materialize(binder, body, span);
                TermKind::Let { binder: binder.clone(), annot: annot.clone(), bound: bx(bound), body: bx(body) }
            }
            TermKind::If { cond, then_branch, else_branch } => TermKind::If {
                cond: bx(self.term(cond)),
                then_branch: bx(self.term(then_branch)),
                else_branch: bx(self.term(else_branch)),
            },
            TermKind::TLam { tyvar, body } => TermKind::TLam { tyvar: tyvar.clone(), body: bx(self.term(body)) },
            TermKind::TApp { term, ty } => TermKind::TApp { term: bx(self.term(term)), ty: ty.clone() },
            TermKind::PLam { rvar, rvar_ty, body } => {
                TermKind::PLam { rvar: rvar.clone(), rvar_ty: rvar_ty.clone(), body: bx(self.term(body)) }
            }
            TermKind::PApp { term, witness } => {
                TermKind::PApp { term: bx(self.term(term)), witness: witness.clone() }
            }
            TermKind::CAbs { bound, body } => {
                let g = self.fresh("bf");
                self.ghosts.push((g.clone(), bound.params.len()));
                let body = self.term(body);
                self.ghosts.pop();
                TermKind::Lam { binder: g, ty: Some(bound_type(bound)), body: bx(body) }
            }
            TermKind::CApp { term, bound } => {
                let w = self.witness(bound, span);
                TermKind::App { fun: bx(self.term(term)), arg: bx(w) }
            }
        };
        Term::new(kind, span)
    }
}
