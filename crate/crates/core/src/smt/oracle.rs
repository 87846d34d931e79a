//! Exhaustive validity check over a small finite sub-domain. Integers range
//! over [-B, B]; each uninterpreted predicate is enumerated as a truth
//! table over the cells inside that box and is false outside it. A
//! counterexample found here is a genuine counter-model, so `Invalid` is
//! always trustworthy; `Valid` only means no counterexample in the box.

use std::collections::HashMap;

use super::{Backend, SmtError, Verdict};
use crate::ast::{BinOp, Pred, UnOp};
use crate::logic::{Sort, Vc};

const MAX_SYMBOLS: usize = 2;
const MAX_CELLS: usize = 12;
const MAX_COMBINATIONS: u128 = 50_000_000;

enum Node {
    Lit(i64),
    Var(usize),
    Un(UnOp, Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Ite(Box<Node>, Box<Node>, Box<Node>),
    App(usize, Vec<Node>),
}

struct Symbol {
    name: String,
    args: Vec<Sort>,
    cells: usize,
}

struct Compiler<'a> {
    vars: HashMap<&'a str, usize>,
    symbols: Vec<Symbol>,
    vc: &'a Vc,
}

fn out_of_scope(msg: impl Into<String>) -> SmtError {
    SmtError::OracleOutOfScope(msg.into())
}

impl<'a> Compiler<'a> {
    fn compile(&mut self, p: &'a Pred, bound: i64) -> Result<Node, SmtError> {
        Ok(match p {
            Pred::Int(n) => Node::Lit(*n),
            Pred::Bool(b) => Node::Lit(*b as i64),
            Pred::Var(x) => Node::Var(*self.vars.get(x.as_str()).ok_or_else(|| out_of_scope(format!("free variable `{x}`")))?),
            Pred::Un(op, a) => Node::Un(*op, Box::new(self.compile(a, bound)?)),
            Pred::Bin(op, a, b) => Node::Bin(*op, Box::new(self.compile(a, bound)?), Box::new(self.compile(b, bound)?)),
            Pred::Ite(c, a, b) => Node::Ite(
                Box::new(self.compile(c, bound)?),
                Box::new(self.compile(a, bound)?),
                Box::new(self.compile(b, bound)?),
            ),
            Pred::Kappa(k, _) => return Err(out_of_scope(format!("unknown refinement `{k}`"))),
            Pred::App(f, args) | Pred::RApp(f, args) => {
                let idx = match self.symbols.iter().position(|s| s.name == *f) {
                    Some(i) => i,
                    None => {
                        let decl = self
                            .vc
                            .fun_decl(f)
                            .ok_or_else(|| out_of_scope(format!("undeclared symbol `{f}`")))?;
                        if decl.ret != Sort::Bool {
                            return Err(out_of_scope(format!("`{f}` is not predicate-valued")));
                        }
                        let mut cells = 1usize;
                        for a in &decl.args {
                            cells = cells.saturating_mul(match a {
                                Sort::Int => (2 * bound + 1) as usize,
                                Sort::Bool => 2,
                                Sort::Named(s) => return Err(out_of_scope(format!("uninterpreted sort `{s}`"))),
                            });
                        }
                        if cells > MAX_CELLS {
                            return Err(out_of_scope(format!("`{f}` has {cells} cells")));
                        }
                        self.symbols.push(Symbol { name: f.clone(), args: decl.args.clone(), cells });
                        if self.symbols.len() > MAX_SYMBOLS {
                            return Err(out_of_scope("too many uninterpreted symbols"));
                        }
                        self.symbols.len() - 1
                    }
                };
                let args = args.iter().map(|a| self.compile(a, bound)).collect::<Result<_, _>>()?;
                Node::App(idx, args)
            }
        })
    }
}

struct Interp<'a> {
    vals: &'a [i64],
    tables: &'a [u32],
    symbols: &'a [Symbol],
    bound: i64,
}

impl Interp<'_> {
    fn eval(&self, n: &Node) -> i64 {
        match n {
            Node::Lit(k) => *k,
            Node::Var(i) => self.vals[*i],
            Node::Un(UnOp::Not, a) => (self.eval(a) == 0) as i64,
            Node::Un(UnOp::Neg, a) => self.eval(a).wrapping_neg(),
            Node::Bin(op, a, b) => {
                let x = self.eval(a);
                // Short-circuit connectives.
                match op {
                    BinOp::And if x == 0 => return 0,
                    BinOp::Or if x != 0 => return 1,
                    BinOp::Imp if x == 0 => return 1,
                    _ => {}
                }
                let y = self.eval(b);
                match op {
                    BinOp::Add => x.wrapping_add(y),
                    BinOp::Sub => x.wrapping_sub(y),
                    BinOp::Mul => x.wrapping_mul(y),
                    BinOp::Eq | BinOp::Iff => (x == y) as i64,
                    BinOp::Ne => (x != y) as i64,
                    BinOp::Lt => (x < y) as i64,
                    BinOp::Le => (x <= y) as i64,
                    BinOp::Gt => (x > y) as i64,
                    BinOp::Ge => (x >= y) as i64,
                    BinOp::And | BinOp::Or | BinOp::Imp => (y != 0) as i64,
                }
            }
            Node::Ite(c, a, b) => {
                if self.eval(c) != 0 {
                    self.eval(a)
                } else {
                    self.eval(b)
                }
            }
            Node::App(s, args) => {
                let sym = &self.symbols[*s];
                let mut cell = 0usize;
                for (a, sort) in args.iter().zip(&sym.args) {
                    let v = self.eval(a);
                    let (digit, radix) = match sort {
                        Sort::Bool => (v as usize, 2),
                        _ => {
                            if v < -self.bound || v > self.bound {
                                return 0;
                            }
                            ((v + self.bound) as usize, (2 * self.bound + 1) as usize)
                        }
                    };
                    cell = cell * radix + digit;
                }
                ((self.tables[*s] >> cell) & 1) as i64
            }
        }
    }
}

/// Brute-force validity over the box [-bound, bound].
pub fn check_oracle(vc: &Vc, bound: i64) -> Result<Verdict, SmtError> {
    let mut c = Compiler { vars: HashMap::new(), symbols: Vec::new(), vc };
    let mut domains: Vec<Vec<i64>> = Vec::new();
    for (i, b) in vc.binders.iter().enumerate() {
        let dom = match &b.sort {
            Sort::Int => (-bound..=bound).collect(),
            Sort::Bool => vec![0, 1],
            Sort::Named(s) => return Err(out_of_scope(format!("uninterpreted sort `{s}`"))),
        };
        domains.push(dom);
        c.vars.insert(b.name.as_str(), i);
    }
    let hyps: Vec<Node> = vc.hypotheses().map(|h| c.compile(h, bound)).collect::<Result<_, _>>()?;
    let goal = c.compile(&vc.goal, bound)?;
    let symbols = c.symbols;
    let table_bits: u32 = symbols.iter().map(|s| s.cells as u32).sum();
    let mut total: u128 = 1u128 << table_bits;
    for d in &domains {
        total = total.saturating_mul(d.len() as u128);
    }
    if total > MAX_COMBINATIONS {
        return Err(out_of_scope(format!("{total} combinations")));
    }
    let mut tables = vec![0u32; symbols.len()];
    let mut idx = vec![0usize; domains.len()];
    let mut vals: Vec<i64> = domains.iter().map(|d| d[0]).collect();
    loop {
        loop {
            let it = Interp { vals: &vals, tables: &tables, symbols: &symbols, bound };
            if hyps.iter().all(|h| it.eval(h) != 0) && it.eval(&goal) == 0 {
                return Ok(Verdict::Invalid(Some(describe(vc, &vals, &tables, &symbols, bound))));
            }
            if !advance(&mut idx, &domains, &mut vals) {
                break;
            }
        }
        // Next interpretation of the uninterpreted predicates.
        let mut k = 0;
        loop {
            if k == tables.len() {
                return Ok(Verdict::Valid);
            }
            let limit = 1u64 << symbols[k].cells;
            if (tables[k] as u64) + 1 < limit {
                tables[k] += 1;
                break;
            }
            tables[k] = 0;
            k += 1;
        }
    }
}

fn advance(idx: &mut [usize], domains: &[Vec<i64>], vals: &mut [i64]) -> bool {
    for i in 0..idx.len() {
        idx[i] += 1;
        if idx[i] < domains[i].len() {
            vals[i] = domains[i][idx[i]];
            return true;
        }
        idx[i] = 0;
        vals[i] = domains[i][0];
    }
    false
}

fn describe(vc: &Vc, vals: &[i64], tables: &[u32], symbols: &[Symbol], bound: i64) -> String {
    let mut parts: Vec<String> = vc
        .binders
        .iter()
        .zip(vals)
        .map(|(b, v)| match b.sort {
            Sort::Bool => format!("{} = {}", b.name, *v != 0),
            _ => format!("{} = {v}", b.name),
        })
        .collect();
    for (s, t) in symbols.iter().zip(tables) {
        let mut cells = Vec::new();
        for cell in 0..s.cells {
            if (t >> cell) & 1 == 1 {
                let mut rest = cell;
                let mut args = Vec::new();
                for sort in s.args.iter().rev() {
                    let radix = if *sort == Sort::Bool { 2 } else { (2 * bound + 1) as usize };
                    let d = rest % radix;
                    rest /= radix;
                    args.push(if *sort == Sort::Bool { (d == 1).to_string() } else { (d as i64 - bound).to_string() });
                }
                args.reverse();
                cells.push(format!("({})", args.join(",")));
            }
        }
        parts.push(format!("{} true at {{{}}}", s.name, cells.join(" ")));
    }
    parts.join("; ")
}

/// The oracle as a backend: out-of-scope VCs come back as `Unknown`.
pub struct Oracle {
    pub bound: i64,
}

impl Backend for Oracle {
    fn check(&self, vc: &Vc) -> Result<Verdict, SmtError> {
        match check_oracle(vc, self.bound) {
            Err(SmtError::OracleOutOfScope(r)) => Ok(Verdict::Unknown(format!("outside oracle scope: {r}"))),
            other => other,
        }
    }

    fn name(&self) -> String {
        format!("oracle[-{0},{0}]", self.bound)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse_vc_file;

    fn vc(src: &str) -> Vc {
        parse_vc_file(src).unwrap().remove(0)
    }

    #[test]
    fn linear_implication_is_valid() {
        let v = vc("bind x : Int\nbind y : Int | x <= y\ngoal : x <= y + 1");
        assert_eq!(check_oracle(&v, 3).unwrap(), Verdict::Valid);
    }

    #[test]
    fn uninterpreted_successor_is_invalid() {
        let v = vc("bind i : Int | p i\ngoal : p (i + 1)");
        match check_oracle(&v, 2).unwrap() {
            Verdict::Invalid(Some(m)) => assert!(m.contains("p true at")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn vacuous_hypothesis_is_valid() {
        let v = vc("bind x : Int | false\ngoal : x = 7");
        assert_eq!(check_oracle(&v, 2).unwrap(), Verdict::Valid);
    }

    #[test]
    fn scope_limits() {
        let v = vc("sort L\nbind x : L\ngoal : x = x");
        assert!(matches!(check_oracle(&v, 2), Err(SmtError::OracleOutOfScope(_))));
        let w = vc("fun f : Int -> Int\nbind x : Int\ngoal : f x = f x");
        assert!(matches!(check_oracle(&w, 2), Err(SmtError::OracleOutOfScope(_))));
        let big = vc("bind x : Int | p x x\ngoal : p x x");
        assert!(matches!(check_oracle(&big, 2), Err(SmtError::OracleOutOfScope(_))));
    }
}
