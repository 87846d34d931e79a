use std::fmt::Write;

use crate::ast::{Literal, Pred, Prim, Schema, Term, TermKind};

use super::{Program, Qualifier};

pub fn print_schema(s: &Schema) -> String {
    s.to_string()
}

pub fn print_term(t: &Term) -> String {
    let mut out = String::new();
    term(t, 0, &mut out);
    out
}

fn hide_stars(p: &Pred) -> Pred {
    p.map(&mut |q| match q {
        Pred::Var(x) if x.starts_with('*') => Pred::var("*"),
        other => other,
    })
}

pub fn print_qualifier(q: &Qualifier) -> String {
    let mut s = format!("qualif {}({}:{}", q.name, q.vv.0, q.vv.1);
    for (h, b) in &q.holes {
        let h = if h.starts_with('*') { "*" } else { h.as_str() };
        let _ = write!(s, ", {h}:{b}");
    }
    let _ = write!(s, "): {}", hide_stars(&q.body));
    s
}

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for q in &p.qualifiers {
        out.push_str(&print_qualifier(q));
        out.push('\n');
    }
    for u in &p.uninterps {
        let _ = write!(out, "uninterp {} :: ", u.name);
        for a in &u.args {
            let _ = write!(out, "{a} -> ");
        }
        let _ = writeln!(out, "{}", u.ret);
    }
    for b in &p.bounds {
        let _ = write!(out, "bound {}", b.name);
        for (r, t) in &b.rvars {
            match t {
                Some(t) => {
                    let _ = write!(out, " ({r} :: {t})");
                }
                None => {
                    let _ = write!(out, " {r}");
                }
            }
        }
        out.push_str(" = ");
        if !b.params.is_empty() {
            out.push('\\');
            for (i, (x, base)) in b.params.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                match base {
                    Some(base) => {
                        let _ = write!(out, "({x}:{base})");
                    }
                    None => out.push_str(x),
                }
            }
            out.push_str(" -> ");
        }
        let _ = writeln!(out, "{}", b.body);
    }
    for a in &p.assumes {
        let _ = writeln!(out, "assume {} :: {}", a.name, a.schema);
    }
    for d in &p.defs {
        if let Some(s) = &d.annot {
            let _ = writeln!(out, "val {} :: {}", d.name, s);
        }
        let kw = if d.recursive { "letrec" } else { "let" };
        let _ = writeln!(out, "{kw} {} = {}", d.name, print_term(&d.body));
    }
    out
}

// Precedence: 0 open forms (lambda, let, if), 1 application, 2 atom.
fn term(t: &Term, ctx: u8, out: &mut String) {
    match &t.kind {
        TermKind::Var(x) => out.push_str(x),
        TermKind::Const(Literal::Int(n)) if *n < 0 && ctx >= 1 => {
            let _ = write!(out, "({n})");
        }
        TermKind::Const(Literal::Int(n)) => {
            let _ = write!(out, "{n}");
        }
        TermKind::Const(Literal::Bool(b)) => {
            let _ = write!(out, "{b}");
        }
        TermKind::Const(Literal::Prim(p)) => out.push_str(&p.name()),
        TermKind::App { fun, arg } => {
            if let TermKind::Const(Literal::Prim(Prim::MulBy(k))) = fun.kind {
                out.push('(');
                term(arg, 2, out);
                let _ = write!(out, " * {k})");
                return;
            }
            paren(ctx > 1, out, |out| {
                term(fun, 1, out);
                out.push(' ');
                term(arg, 2, out);
            });
        }
        TermKind::TApp { term: e, ty } => paren(ctx > 1, out, |out| {
            term(e, 1, out);
            let _ = write!(out, " @[{ty}]");
        }),
        TermKind::PApp { term: e, witness } => paren(ctx > 1, out, |out| {
            term(e, 1, out);
            let _ = write!(out, " @{{{witness}}}");
        }),
        TermKind::CApp { term: e, bound } => paren(ctx > 1, out, |out| {
            term(e, 1, out);
            let _ = write!(out, " @{bound}");
        }),
        TermKind::Lam { binder, ty, body } => paren(ctx > 0, out, |out| {
            match ty {
                Some(ty) => {
                    let _ = write!(out, "\\({binder}:{ty}) -> ");
                }
                None => {
                    let _ = write!(out, "\\{binder} -> ");
                }
            }
            term(body, 0, out);
        }),
        TermKind::Let { binder, annot, bound, body } => paren(ctx > 0, out, |out| {
            let _ = write!(out, "let {binder}");
            if let Some(a) = annot {
                let _ = write!(out, " : {a}");
            }
            out.push_str(" = ");
            term(bound, 0, out);
            out.push_str(" in ");
            term(body, 0, out);
        }),
        TermKind::If { cond, then_branch, else_branch } => paren(ctx > 0, out, |out| {
            out.push_str("if ");
            term(cond, 0, out);
            out.push_str(" then ");
            term(then_branch, 0, out);
            out.push_str(" else ");
            term(else_branch, 0, out);
        }),
        TermKind::TLam { tyvar, body } => paren(ctx > 0, out, |out| {
            let _ = write!(out, "/\\{tyvar}. ");
            term(body, 0, out);
        }),
        TermKind::PLam { rvar, rvar_ty, body } => paren(ctx > 0, out, |out| {
            let _ = write!(out, "/\\<{rvar} :: {rvar_ty}>. ");
            term(body, 0, out);
        }),
        TermKind::CAbs { bound, body } => paren(ctx > 0, out, |out| {
            let _ = write!(out, "/\\{bound}. ");
            term(body, 0, out);
        }),
    }
}

fn paren(open: bool, out: &mut String, f: impl FnOnce(&mut String)) {
    if open {
        out.push('(');
    }
    f(out);
    if open {
        out.push(')');
    }
}
