//! Liquid-style inference of unknown refinements: templates with κ
//! variables, Horn splitting and a Houdini fixpoint over qualifiers.

pub mod horn;
pub mod qualifier;
pub mod shape;
pub mod solve;

use std::collections::BTreeSet;

use crate::ast::{Name, Pred, RType, Span, UType};
use crate::logic::Sort;

/// An unknown refinement: a predicate over `params`, value variable last.
/// The first `nscope` parameters are environment variables visible where
/// the unknown was created; the rest are the formals it stands for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KappaVar {
    pub name: Name,
    pub params: Vec<(Name, Sort)>,
    pub nscope: usize,
    pub label: String,
    pub origin: String,
    pub span: Span,
}

#[derive(Clone, Debug, Default)]
pub struct Kappas {
    pub vars: Vec<KappaVar>,
    binders: usize,
}

impl Kappas {
    pub fn get(&self, name: &str) -> Option<&KappaVar> {
        self.vars.iter().find(|k| k.name == name)
    }

    pub fn fresh(
        &mut self,
        params: Vec<(Name, Sort)>,
        nscope: usize,
        label: &str,
        origin: &str,
        span: Span,
    ) -> Name {
        let name = format!("$k{}", self.vars.len());
        self.vars.push(KappaVar {
            name: name.clone(),
            params,
            nscope,
            label: label.to_string(),
            origin: origin.to_string(),
            span,
        });
        name
    }

    fn fresh_binder(&mut self) -> Name {
        let n = format!("$x{}", self.binders);
        self.binders += 1;
        n
    }

    /// A refined type of the given shape with a fresh unknown at every base
    /// position. Each unknown may mention `scope`, the enclosing arrow
    /// binders of the template and its own value variable.
    pub fn template(&mut self, shape: &UType, scope: &[(Name, Sort)], label: &str, origin: &str, span: Span) -> RType {
        let mut params = scope.to_vec();
        self.template_in(shape, &mut params, scope.len(), label, origin, span)
    }

    fn template_in(
        &mut self,
        shape: &UType,
        params: &mut Vec<(Name, Sort)>,
        nscope: usize,
        label: &str,
        origin: &str,
        span: Span,
    ) -> RType {
        match shape {
            UType::Fun(d, c) => {
                let x = self.fresh_binder();
                let dom = self.template_in(d, params, nscope, label, origin, span);
                let pushed = if let Some(b) = d.as_base() {
                    params.push((x.clone(), Sort::of_base(&b)));
                    true
                } else {
                    false
                };
                let cod = self.template_in(c, params, nscope, label, origin, span);
                if pushed {
                    params.pop();
                }
                RType::fun(x, dom, cod)
            }
            base => {
                let b = base.as_base().unwrap();
                let avoid: BTreeSet<Name> = params.iter().map(|(n, _)| n.clone()).collect();
                let vv = crate::ast::fresh_name("v", &avoid);
                let mut ps = params.clone();
                ps.push((vv.clone(), Sort::of_base(&b)));
                let args = ps.iter().map(|(n, _)| Pred::var(n.clone())).collect();
                let k = self.fresh(ps, nscope, label, origin, span);
                RType::base(b, vv, Pred::Kappa(k, args))
            }
        }
    }

    /// Function declarations for every unknown, for sort checking.
    pub fn fun_decls(&self) -> Vec<crate::logic::FunDecl> {
        self.vars
            .iter()
            .map(|k| crate::logic::FunDecl {
                name: k.name.clone(),
                args: k.params.iter().map(|(_, s)| s.clone()).collect(),
                ret: Sort::Bool,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn function_template_threads_binders() {
        let mut ks = Kappas::default();
        let t = ks.template(
            &UType::fun(UType::Int, UType::Int),
            &[("n".into(), Sort::Int)],
            "a",
            "main",
            Span::default(),
        );
        assert_eq!(ks.vars.len(), 2);
        assert_eq!(ks.vars[0].params.len(), 2);
        assert_eq!(ks.vars[1].params.len(), 3);
        assert_eq!(ks.vars[1].nscope, 1);
        assert_eq!(t.shape(), UType::fun(UType::Int, UType::Int));
    }

    #[test]
    fn value_variable_avoids_scope_names() {
        let mut ks = Kappas::default();
        let t = ks.template(&UType::Int, &[("v".into(), Sort::Int)], "a", "main", Span::default());
        match t {
            RType::Base { vv, .. } => assert_ne!(vv, "v"),
            _ => panic!(),
        }
    }
}
