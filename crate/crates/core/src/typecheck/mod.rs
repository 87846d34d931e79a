//! Bidirectional checking of elaborated programs. Checking never calls the
//! solver: it emits verification conditions, possibly mentioning unknowns,
//! which inference and the backend discharge afterwards.

mod check;
pub mod prims;
pub mod wf;

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::ast::{Name, Pred, RType, Schema, Span};
use crate::elaborate::{bound_schema, Elaborated};
use crate::infer::Kappas;
use crate::logic::{Binder, Sort, Vc};
use crate::surface::Program;

pub use check::Checker;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TypeError {
    #[error("{span}: ill-sorted: {msg}")]
    IllSorted { span: Span, msg: String },
    #[error("{span}: implication outside a bound in `{refinement}`")]
    ImplicationOutsideBound { span: Span, refinement: String },
    #[error("{span}: abstract refinement `{name}` is not in scope")]
    UnboundRefinementVar { name: Name, span: Span },
    #[error("{span}: bound `{name}` is not Horn-shaped: {msg}")]
    MalformedBound { name: Name, msg: String, span: Span },
    #[error("{span}: {msg}")]
    Shape { span: Span, msg: String },
    #[error("{span}: unbound variable `{name}`")]
    Unbound { name: Name, span: Span },
}

#[derive(Clone, Debug)]
enum Entry {
    Var(Name, RType),
    Guard(Pred),
}

/// Typing environment: term variables and path conditions in binding
/// order, plus the type variables and abstract refinements in scope.
#[derive(Clone, Debug, Default)]
pub struct Env {
    entries: Vec<Entry>,
    tyvars: Vec<Name>,
    rvars: Vec<(Name, Vec<Sort>)>,
}

impl Env {
    pub fn push(&mut self, x: &str, t: RType) {
        self.entries.push(Entry::Var(x.to_string(), t));
    }

    pub fn guard(&mut self, p: Pred) {
        self.entries.push(Entry::Guard(p));
    }

    pub fn lookup(&self, x: &str) -> Option<&RType> {
        self.entries.iter().rev().find_map(|e| match e {
            Entry::Var(n, t) if n == x => Some(t),
            _ => None,
        })
    }

    pub fn names(&self) -> BTreeSet<Name> {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, e)| match e {
                Entry::Var(n, _) => n.clone(),
                Entry::Guard(_) => format!("$g{i}"),
            })
            .collect()
    }

    /// Embedding: base-typed variables become binders carrying their
    /// refinement, guards become anonymous Bool binders.
    pub fn binders(&self) -> Vec<Binder> {
        let mut out = Vec::new();
        for (i, e) in self.entries.iter().enumerate() {
            match e {
                Entry::Var(x, RType::Base { base, vv, refinement }) => out.push(Binder {
                    name: x.clone(),
                    sort: Sort::of_base(base),
                    hyp: refinement.subst1(vv, &Pred::var(x.clone())),
                }),
                Entry::Var(..) => {}
                Entry::Guard(p) => out.push(Binder { name: format!("$g{i}"), sort: Sort::Bool, hyp: p.clone() }),
            }
        }
        out
    }

    /// Base-typed variables an unknown created here may mention.
    pub fn kappa_scope(&self) -> Vec<(Name, Sort)> {
        self.entries
            .iter()
            .filter_map(|e| match e {
                Entry::Var(x, RType::Base { base, .. }) if crate::infer::shape::in_scope(x) => {
                    Some((x.clone(), Sort::of_base(base)))
                }
                _ => None,
            })
            .collect()
    }

    pub fn rvar_sorts(&self, p: &str) -> Option<&Vec<Sort>> {
        self.rvars.iter().rev().find(|(n, _)| n == p).map(|(_, s)| s)
    }
}

/// Result of checking a whole program.
#[derive(Clone, Debug, Default)]
pub struct Checked {
    pub vcs: Vec<Vc>,
    /// Final type of every definition, in program order.
    pub types: Vec<(Name, Schema)>,
}

/// Check every definition; the program is one constraint system.
pub fn check_program(el: &Elaborated, prog: &Program, kappas: &mut Kappas) -> Result<Checked, TypeError> {
    let mut globals: HashMap<Name, Schema> = HashMap::new();
    for a in &prog.assumes {
        let ghosts = (0..).map(|i| format!("$bf{i}"));
        globals.insert(a.name.clone(), bound_schema(&a.schema, &mut ghosts.into_iter()));
    }
    let mut ck = Checker::new(&prog.uninterps, globals, kappas, &el.shapes);
    let mut types = Vec::new();
    for d in &el.defs {
        let t = ck.check_def(d)?;
        types.push((d.name.clone(), t));
    }
    Ok(Checked { vcs: ck.into_vcs(), types })
}
