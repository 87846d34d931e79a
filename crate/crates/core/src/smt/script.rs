use std::fmt::Write;

use crate::ast::{BinOp, Pred, UnOp};
use crate::logic::{Sort, Vc};

const RESERVED: &[&str] = &[
    "and", "or", "not", "ite", "let", "true", "false", "distinct", "xor", "forall", "exists", "assert",
    "par", "as", "_", "!", "Int", "Bool", "div", "mod", "abs",
];

/// SMT-LIB2 symbol, quoted when it is not a plain simple symbol.
pub fn symbol(name: &str) -> String {
    let simple = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
        && !RESERVED.contains(&name);
    if simple {
        name.to_string()
    } else {
        format!("|{}|", name.replace('|', "_").replace('\\', "_"))
    }
}

pub fn sort(s: &Sort) -> String {
    match s {
        Sort::Int => "Int".into(),
        Sort::Bool => "Bool".into(),
        Sort::Named(n) => symbol(&format!("T_{n}")),
    }
}

pub fn term(p: &Pred) -> String {
    let mut out = String::new();
    write_term(p, &mut out);
    out
}

fn write_term(p: &Pred, out: &mut String) {
    match p {
        Pred::Int(n) if *n < 0 => {
            let _ = write!(out, "(- {})", n.unsigned_abs());
        }
        Pred::Int(n) => {
            let _ = write!(out, "{n}");
        }
        Pred::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Pred::Var(x) => out.push_str(&symbol(x)),
        Pred::Un(op, a) => {
            out.push_str(match op {
                UnOp::Not => "(not ",
                UnOp::Neg => "(- ",
            });
            write_term(a, out);
            out.push(')');
        }
        Pred::Bin(BinOp::Ne, a, b) => {
            out.push_str("(not (= ");
            write_term(a, out);
            out.push(' ');
            write_term(b, out);
            out.push_str("))");
        }
        Pred::Bin(op, a, b) => {
            let s = match op {
                BinOp::Add => "+",
                BinOp::Sub => "-",
                BinOp::Mul => "*",
                BinOp::Eq | BinOp::Iff => "=",
                BinOp::Lt => "<",
                BinOp::Le => "<=",
                BinOp::Gt => ">",
                BinOp::Ge => ">=",
                BinOp::And => "and",
                BinOp::Or => "or",
                BinOp::Imp => "=>",
                BinOp::Ne => unreachable!(),
            };
            let _ = write!(out, "({s} ");
            write_term(a, out);
            out.push(' ');
            write_term(b, out);
            out.push(')');
        }
        Pred::Ite(c, a, b) => {
            out.push_str("(ite ");
            write_term(c, out);
            out.push(' ');
            write_term(a, out);
            out.push(' ');
            write_term(b, out);
            out.push(')');
        }
        Pred::App(f, args) | Pred::RApp(f, args) | Pred::Kappa(f, args) => {
            if args.is_empty() {
                out.push_str(&symbol(f));
                return;
            }
            out.push('(');
            out.push_str(&symbol(f));
            for a in args {
                out.push(' ');
                write_term(a, out);
            }
            out.push(')');
        }
    }
}

/// Declarations, hypotheses and the negated goal, without any framing
/// commands.
pub fn body(vc: &Vc) -> String {
    let mut s = String::new();
    for so in &vc.sorts {
        let _ = writeln!(s, "(declare-sort {} 0)", sort(&Sort::Named(so.clone())));
    }
    for f in &vc.funs {
        let args: Vec<String> = f.args.iter().map(sort).collect();
        let _ = writeln!(s, "(declare-fun {} ({}) {})", symbol(&f.name), args.join(" "), sort(&f.ret));
    }
    for b in &vc.binders {
        let _ = writeln!(s, "(declare-const {} {})", symbol(&b.name), sort(&b.sort));
    }
    for h in vc.hypotheses() {
        let _ = writeln!(s, "(assert {})", term(h));
    }
    let _ = writeln!(s, "(assert (not {}))", term(&vc.goal));
    s
}

/// Complete, deterministic script checking validity of `vc` by asking for
/// satisfiability of its negation.
pub fn emit_script(vc: &Vc) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "; {}", vc.name);
    s.push_str("(set-option :produce-models true)\n(set-logic QF_UFLIA)\n");
    s.push_str(&body(vc));
    s.push_str("(check-sat)\n(get-model)\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse_vc_file;

    #[test]
    fn serializes_linear_vc() {
        let vc = &parse_vc_file("bind x : Int\nbind y : Int | x <= y\ngoal : x <= y + 1").unwrap()[0];
        let s = emit_script(vc);
        assert!(s.contains("(assert (<= x y))"));
        assert!(s.contains("(assert (not (<= x (+ y 1))))"));
        assert!(s.contains("(set-logic QF_UFLIA)"));
        assert_eq!(s, emit_script(vc));
    }

    #[test]
    fn quotes_primed_and_dollar_names() {
        assert_eq!(symbol("x'1"), "|x'1|");
        assert_eq!(symbol("$t0"), "|$t0|");
        assert_eq!(symbol("and"), "|and|");
        assert_eq!(symbol("len"), "len");
    }

    #[test]
    fn negative_literals_and_disequality() {
        let p = crate::surface::parse_formula("x != -3").unwrap();
        assert_eq!(term(&p), "(not (= x (- 3)))");
    }
}
