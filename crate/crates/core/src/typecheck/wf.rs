//! Well-formedness of signatures and bounds: refinements are well-sorted
//! Bool formulas over variables in scope, abstract refinements are
//! quantified and fully applied, and implication appears only in bounds.

use std::collections::HashMap;

use super::TypeError;
use crate::ast::{rvar_sorts, Base, BinOp, Name, Pred, RType, Schema, Span};
use crate::logic::{sort_of, Sort, SortEnv};
use crate::surface::{Program, UninterpDecl};

#[derive(Clone, Default)]
pub struct Scope {
    pub vars: Vec<(Name, Sort)>,
    pub rvars: HashMap<Name, Vec<Sort>>,
    pub funs: HashMap<Name, (Vec<Sort>, Sort)>,
    pub tyvars: Vec<Name>,
    /// Accept Horn-shaped Bool outputs, i.e. the types of ghost functions.
    pub ghost_types: bool,
}

impl SortEnv for Scope {
    fn var(&self, x: &str) -> Option<Sort> {
        self.vars.iter().rev().find(|(n, _)| n == x).map(|(_, s)| s.clone())
    }

    fn fun(&self, f: &str) -> Option<(Vec<Sort>, Sort)> {
        if let Some(args) = self.rvars.get(f) {
            return Some((args.clone(), Sort::Bool));
        }
        self.funs.get(f).cloned()
    }
}

impl Scope {
    pub fn new(uninterps: &[UninterpDecl]) -> Scope {
        let funs = uninterps
            .iter()
            .map(|u| (u.name.clone(), (u.args.iter().map(Sort::of_base).collect(), Sort::of_base(&u.ret))))
            .collect();
        Scope { funs, ..Scope::default() }
    }

    fn check_base(&self, b: &Base, span: Span) -> Result<(), TypeError> {
        match b {
            Base::TyVar(a) if !self.tyvars.contains(a) => {
                Err(TypeError::IllSorted { span, msg: format!("type variable `{a}` is not quantified") })
            }
            _ => Ok(()),
        }
    }
}

fn formula(scope: &Scope, p: &Pred, span: Span) -> Result<(), TypeError> {
    for r in p.rvars() {
        if !scope.rvars.contains_key(&r) {
            return Err(TypeError::UnboundRefinementVar { name: r, span });
        }
    }
    match sort_of(p, scope) {
        Ok(Sort::Bool) => Ok(()),
        Ok(s) => Err(TypeError::IllSorted { span, msg: format!("refinement `{p}` has sort {s}") }),
        Err(e) => Err(TypeError::IllSorted { span, msg: e.to_string() }),
    }
}

pub fn wf_type(scope: &mut Scope, t: &RType, span: Span) -> Result<(), TypeError> {
    match t {
        RType::Base { base, vv, refinement } => {
            scope.check_base(base, span)?;
            let ghost = scope.ghost_types && *base == Base::Bool && horn_shaped(refinement).is_ok();
            if refinement.has_implication() && !ghost {
                return Err(TypeError::ImplicationOutsideBound { span, refinement: refinement.to_string() });
            }
            scope.vars.push((vv.clone(), Sort::of_base(base)));
            let r = formula(scope, refinement, span);
            scope.vars.pop();
            r
        }
        RType::Fun { binder, dom, cod } => {
            wf_type(scope, dom, span)?;
            let pushed = match &**dom {
                RType::Base { base, .. } => {
                    scope.vars.push((binder.clone(), Sort::of_base(base)));
                    true
                }
                _ => false,
            };
            let r = wf_type(scope, cod, span);
            if pushed {
                scope.vars.pop();
            }
            r
        }
    }
}

/// `s₁ ⇒ … ⇒ sₙ ⇒ s` with implication-free parts mentioning at least one
/// abstract refinement.
pub fn horn_shaped(body: &Pred) -> Result<(), String> {
    let mut cur = body;
    let mut parts = Vec::new();
    while let Pred::Bin(BinOp::Imp, a, b) = cur {
        parts.push(&**a);
        cur = b;
    }
    parts.push(cur);
    if let Some(p) = parts.iter().find(|p| p.has_implication()) {
        return Err(format!("`{p}` nests an implication"));
    }
    if parts.iter().all(|p| p.rvars().is_empty()) {
        return Err("mentions no abstract refinement".into());
    }
    Ok(())
}

pub fn wf_schema(scope: &Scope, s: &Schema, span: Span) -> Result<(), TypeError> {
    let mut scope = scope.clone();
    let mut cur = s;
    loop {
        match cur {
            Schema::ForallTy(a, rest) => {
                scope.tyvars.push(a.clone());
                cur = rest;
            }
            Schema::ForallP(p, t, rest) => {
                let sorts = rvar_sorts(t);
                let mut ret = t;
                while let RType::Fun { cod, .. } = ret {
                    ret = cod;
                }
                if !matches!(ret, RType::Base { base: Base::Bool, .. }) || sorts.is_empty() {
                    return Err(TypeError::IllSorted {
                        span,
                        msg: format!("abstract refinement `{p}` must have type b1 -> ... -> Bool"),
                    });
                }
                for b in &sorts {
                    scope.check_base(b, span)?;
                }
                scope.rvars.insert(p.clone(), sorts.iter().map(Sort::of_base).collect());
                cur = rest;
            }
            Schema::Bounded(b, rest) => {
                horn_shaped(&b.body).map_err(|msg| TypeError::MalformedBound { name: b.name.clone(), msg, span })?;
                let mut sc = scope.clone();
                for (x, base) in &b.params {
                    sc.check_base(base, span)?;
                    sc.vars.push((x.clone(), Sort::of_base(base)));
                }
                formula(&sc, &b.body, span)?;
                cur = rest;
            }
            Schema::Mono(t) => return wf_type(&mut scope, t, span),
        }
    }
}

/// Check every declaration of a parsed program.
pub fn wf_program(prog: &Program) -> Result<(), TypeError> {
    let scope = Scope::new(&prog.uninterps);
    for b in &prog.bounds {
        horn_shaped(&b.body).map_err(|msg| TypeError::MalformedBound { name: b.name.clone(), msg, span: b.span })?;
    }
    for a in &prog.assumes {
        wf_schema(&scope, &a.schema, a.span)?;
    }
    for d in &prog.defs {
        if let Some(s) = &d.annot {
            wf_schema(&scope, s, d.span)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::parse_program;

    fn wf(src: &str) -> Result<(), TypeError> {
        wf_program(&parse_program(src).unwrap())
    }

    #[test]
    fn accepts_bounded_signature() {
        wf("bound UpClosed p = \\x -> p x => p (x + 1)\n\
            assume find :: forall <p :: Int -> Bool>. (UpClosed p) => (Int -> Bool) -> (Int<p> -> a) -> Int<p> -> a")
            .unwrap();
    }

    #[test]
    fn rejects_implication_in_type() {
        let e = wf("assume f :: x:Int -> {v:Int | x > 0 => v > 0}").unwrap_err();
        assert!(matches!(e, TypeError::ImplicationOutsideBound { .. }));
    }

    #[test]
    fn rejects_ill_sorted_refinement() {
        let e = wf("assume f :: x:Bool -> {v:Int | v < x}").unwrap_err();
        assert!(matches!(e, TypeError::IllSorted { .. }));
        let e = wf("assume g :: x:Int -> {v:Int | v + x}").unwrap_err();
        assert!(matches!(e, TypeError::IllSorted { .. }));
    }

    #[test]
    fn rejects_unquantified_refinement_variable() {
        let e = wf("uninterp q :: Int -> Bool\nassume f :: {v:Int | q v} -> Int").map(|_| ());
        assert!(e.is_ok());
        let prog = parse_program("assume f :: forall <p :: Int -> Bool>. Int<p> -> Int").unwrap();
        let Schema::ForallP(_, _, inner) = &prog.assumes[0].schema else { panic!() };
        let e = wf_schema(&Scope::default(), inner, Span::default()).unwrap_err();
        assert!(matches!(e, TypeError::UnboundRefinementVar { .. }));
    }

    #[test]
    fn horn_shape() {
        let p = crate::surface::parse_formula("(p x => q x) => r x").unwrap();
        assert!(horn_shaped(&p).is_err());
        let p = crate::surface::parse_formula("x < y").unwrap();
        assert!(horn_shaped(&p).is_err());
        let prog = parse_program("bound Chain p q r = \\x y z -> q x y => p y z => r x z").unwrap();
        assert!(horn_shaped(&prog.bounds[0].body).is_ok());
    }
}
