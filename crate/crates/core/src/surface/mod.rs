//! Concrete syntax: `.bl` program files.

mod lexer;
mod parser;
mod pretty;

use thiserror::Error;

use crate::ast::{Base, Bound, Name, Pred, RType, Schema, Span, Term};

pub use parser::{parse_formula, parse_program, parse_schema_with, parse_term};
pub use pretty::{print_program, print_schema, print_term};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SurfaceError {
    #[error("{span}: syntax error: expected {}, found {found}", expected.join(" or "))]
    Syntax { span: Span, expected: Vec<String>, found: String },
    #[error("{span}: duplicate name `{name}`")]
    DuplicateName { name: Name, span: Span },
    #[error("{span}: unbound identifier `{name}`")]
    UnboundIdentifier { name: Name, span: Span },
    #[error("{span}: {msg}")]
    Malformed { msg: String, span: Span },
}

impl SurfaceError {
    pub fn span(&self) -> Span {
        match self {
            SurfaceError::Syntax { span, .. }
            | SurfaceError::DuplicateName { span, .. }
            | SurfaceError::UnboundIdentifier { span, .. }
            | SurfaceError::Malformed { span, .. } => *span,
        }
    }
}

/// `qualif Name(v:Int, *:Int): v <= *`. The first parameter is the value
/// variable; the others are holes filled by in-scope variables. Each `*`
/// in the body is a distinct hole, named `*0`, `*1`, ... left to right.
/// Lowercase sorts are sort variables shared across the pattern.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Qualifier {
    pub name: Name,
    pub vv: (Name, Base),
    pub holes: Vec<(Name, Base)>,
    pub body: Pred,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UninterpDecl {
    pub name: Name,
    pub args: Vec<Base>,
    pub ret: Base,
}

/// `bound Name p q r = \x y z -> body`. Abstract refinement parameters
/// may carry declared types; value parameters may carry bases, otherwise
/// their bases are fixed where the bound is attached to a schema.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundDecl {
    pub name: Name,
    pub rvars: Vec<(Name, Option<RType>)>,
    pub params: Vec<(Name, Option<Base>)>,
    pub body: Pred,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assume {
    pub name: Name,
    pub schema: Schema,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Def {
    pub name: Name,
    pub annot: Option<Schema>,
    pub body: Term,
    pub recursive: bool,
    pub span: Span,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Program {
    pub qualifiers: Vec<Qualifier>,
    pub uninterps: Vec<UninterpDecl>,
    pub bounds: Vec<BoundDecl>,
    pub assumes: Vec<Assume>,
    pub defs: Vec<Def>,
}

impl Program {
    pub fn def(&self, name: &str) -> Option<&Def> {
        self.defs.iter().find(|d| d.name == name)
    }

    pub fn bound_decl(&self, name: &str) -> Option<&BoundDecl> {
        self.bounds.iter().find(|b| b.name == name)
    }

    /// Alpha-equivalence of programs: definitions compared modulo binder
    /// names, everything else structurally.
    pub fn alpha_eq(&self, other: &Program) -> bool {
        self.qualifiers == other.qualifiers
            && self.uninterps == other.uninterps
            && self.bounds.len() == other.bounds.len()
            && self.bounds.iter().zip(&other.bounds).all(|(a, b)| {
                a.name == b.name && a.rvars == b.rvars && a.params == b.params && a.body == b.body
            })
            && self.assumes.len() == other.assumes.len()
            && self
                .assumes
                .iter()
                .zip(&other.assumes)
                .all(|(a, b)| a.name == b.name && schema_alpha_eq(&a.schema, &b.schema))
            && self.defs.len() == other.defs.len()
            && self.defs.iter().zip(&other.defs).all(|(a, b)| {
                a.name == b.name
                    && a.recursive == b.recursive
                    && match (&a.annot, &b.annot) {
                        (None, None) => true,
                        (Some(x), Some(y)) => schema_alpha_eq(x, y),
                        _ => false,
                    }
                    && a.body.alpha_eq(&b.body)
            })
    }
}

/// Structural equality modulo the names of type binders and value variables.
pub fn schema_alpha_eq(a: &Schema, b: &Schema) -> bool {
    canon_schema(a) == canon_schema(b)
}

fn canon_schema(s: &Schema) -> Schema {
    match s {
        Schema::Mono(t) => Schema::Mono(canon_rtype(t, &mut 0)),
        Schema::ForallTy(a, s) => Schema::ForallTy(a.clone(), Box::new(canon_schema(s))),
        Schema::ForallP(p, t, s) => {
            Schema::ForallP(p.clone(), canon_rtype(t, &mut 0), Box::new(canon_schema(s)))
        }
        Schema::Bounded(b, s) => Schema::Bounded(b.clone(), Box::new(canon_schema(s))),
    }
}

fn canon_rtype(t: &RType, n: &mut usize) -> RType {
    match t {
        RType::Base { .. } => {
            *n += 1;
            t.with_vv(&format!("#v{n}"))
        }
        RType::Fun { binder, dom, cod } => {
            *n += 1;
            let fresh = format!("#b{n}");
            let dom = canon_rtype(dom, n);
            let cod = cod.subst1(binder, &Pred::var(fresh.clone()));
            RType::fun(fresh, dom, canon_rtype(&cod, n))
        }
    }
}

/// Attach a declared bound to actual abstract refinements, fixing the
/// bases of its value parameters from the refinements' declared sorts.
pub fn attach_bound(
    decl: &BoundDecl,
    actuals: &[Name],
    rvar_tys: &dyn Fn(&str) -> Option<RType>,
    span: Span,
) -> Result<Bound, SurfaceError> {
    if actuals.len() != decl.rvars.len() {
        return Err(SurfaceError::Malformed {
            msg: format!(
                "bound `{}` takes {} abstract refinements, given {}",
                decl.name,
                decl.rvars.len(),
                actuals.len()
            ),
            span,
        });
    }
    let rename: std::collections::HashMap<&str, &str> = decl
        .rvars
        .iter()
        .map(|(p, _)| p.as_str())
        .zip(actuals.iter().map(|s| s.as_str()))
        .collect();
    let body = decl.body.map(&mut |p| match p {
        Pred::RApp(r, args) => {
            let r2 = rename.get(r.as_str()).map(|s| s.to_string()).unwrap_or(r);
            Pred::RApp(r2, args)
        }
        other => other,
    });
    let mut bases: Vec<Option<Base>> = decl.params.iter().map(|(_, b)| b.clone()).collect();
    for (i, (formal, declared)) in decl.rvars.iter().enumerate() {
        let ty = rvar_tys(&actuals[i]).or_else(|| declared.clone());
        let Some(ty) = ty else {
            return Err(SurfaceError::UnboundIdentifier { name: actuals[i].clone(), span });
        };
        let sorts = crate::ast::rvar_sorts(&ty);
        decl.body.any(&mut |p| {
            if let Pred::RApp(r, args) = p {
                if r == formal {
                    for (j, a) in args.iter().enumerate() {
                        if let (Pred::Var(x), Some(s)) = (a, sorts.get(j)) {
                            if let Some(k) = decl.params.iter().position(|(y, _)| y == x) {
                                if bases[k].is_none() {
                                    bases[k] = Some(s.clone());
                                }
                            }
                        }
                    }
                }
            }
            false
        });
    }
    let params = decl
        .params
        .iter()
        .zip(bases)
        .map(|((x, _), b)| (x.clone(), b.unwrap_or(Base::Int)))
        .collect();
    Ok(Bound { name: decl.name.clone(), rvars: actuals.to_vec(), params, body })
}

#[cfg(test)]
mod tests;
