//! Random generators shared by the test targets.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use boundcheck::ast::{Base, BinOp, Bound, Name, ParamRefinement, Pred, Prim, RType, Span, Term, TermKind};
use boundcheck::infer::horn::{Head, HornClause};
use boundcheck::infer::qualifier::{instances, parse_qualifiers};
use boundcheck::infer::Kappas;
use boundcheck::logic::{Binder, Sort, Vc};
use boundcheck::surface::Qualifier;

/// Closed λB terms over Int.
pub struct TermGen {
    pub rng: ChaCha8Rng,
    pub n: usize,
}

fn sp() -> Span {
    Span::default()
}

fn prim2(p: Prim, a: Term, b: Term) -> Term {
    Term::app(Term::app(Term::prim(p, sp()), a, sp()), b, sp())
}

impl TermGen {
    fn fresh(&mut self) -> Name {
        self.n += 1;
        format!("x{}", self.n)
    }

    fn bound(&mut self) -> Bound {
        let arity = self.rng.gen_range(1..=2);
        let params: Vec<(Name, Base)> = (0..arity).map(|i| (format!("b{i}"), Base::Int)).collect();
        let app = |x: &str| Pred::RApp("p".into(), vec![Pred::var(x)]);
        let body = if arity == 1 {
            Pred::implies(app("b0"), Pred::RApp("p".into(), vec![Pred::bin(BinOp::Add, Pred::var("b0"), Pred::Int(1))]))
        } else {
            Pred::implies(app("b0"), app("b1"))
        };
        Bound { name: "B".into(), rvars: vec!["p".into()], params, body }
    }

    pub fn int(&mut self, depth: usize, vars: &[Name]) -> Term {
        let leaf = depth == 0 || self.rng.gen_ratio(1, 4);
        if leaf {
            return if !vars.is_empty() && self.rng.gen_bool(0.5) {
                Term::var(vars[self.rng.gen_range(0..vars.len())].clone(), sp())
            } else {
                Term::int(self.rng.gen_range(-3..=3), sp())
            };
        }
        let d = depth - 1;
        match self.rng.gen_range(0..10) {
            0 => prim2(Prim::Add, self.int(d, vars), self.int(d, vars)),
            1 => prim2(Prim::Sub, self.int(d, vars), self.int(d, vars)),
            2 => {
                let c = self.boolean(d, vars);
                Term::new(
                    TermKind::If { cond: Box::new(c), then_branch: Box::new(self.int(d, vars)), else_branch: Box::new(self.int(d, vars)) },
                    sp(),
                )
            }
            3 => {
                let x = self.fresh();
                let bound = self.int(d, vars);
                let mut inner = vars.to_vec();
                inner.push(x.clone());
                Term::let_(x, None, bound, self.int(d, &inner), sp())
            }
            4 => {
                let x = self.fresh();
                let mut inner = vars.to_vec();
                inner.push(x.clone());
                let f = Term::lam(x, None, self.int(d, &inner), sp());
                Term::app(f, self.int(d, vars), sp())
            }
            5 => {
                // (φ ⇒ e)[φ]
                let b = self.bound();
                let abs = Term::new(TermKind::CAbs { bound: b.clone(), body: Box::new(self.int(d, vars)) }, sp());
                Term::new(TermKind::CApp { term: Box::new(abs), bound: b }, sp())
            }
            6 => {
                // let f = (φ ⇒ λx. e) in f[φ] a
                let b = self.bound();
                let (f, x) = (self.fresh(), self.fresh());
                let mut inner = vars.to_vec();
                inner.push(x.clone());
                let lam = Term::lam(x, None, self.int(d, &inner), sp());
                let abs = Term::new(TermKind::CAbs { bound: b.clone(), body: Box::new(lam) }, sp());
                let call = Term::new(TermKind::CApp { term: Box::new(Term::var(f.clone(), sp())), bound: b }, sp());
                Term::let_(f, None, abs, Term::app(call, self.int(d, vars), sp()), sp())
            }
            7 => {
                let body = self.int(d, vars);
                let tl = Term::new(TermKind::TLam { tyvar: "a".into(), body: Box::new(body) }, sp());
                Term::new(TermKind::TApp { term: Box::new(tl), ty: RType::trivial(Base::Int) }, sp())
            }
            8 => {
                let rty = RType::fun("z", RType::trivial(Base::Int), RType::trivial(Base::Bool));
                let body = self.int(d, vars);
                let pl = Term::new(TermKind::PLam { rvar: "p".into(), rvar_ty: rty, body: Box::new(body) }, sp());
                let w = ParamRefinement { params: vec![("z".into(), Base::Int)], body: Pred::tt() };
                Term::new(TermKind::PApp { term: Box::new(pl), witness: w }, sp())
            }
            _ => {
                let c = self.boolean(d, vars);
                prim2(Prim::Assert, c, self.int(d, vars))
            }
        }
    }

    pub fn boolean(&mut self, depth: usize, vars: &[Name]) -> Term {
        if depth == 0 || self.rng.gen_ratio(1, 4) {
            return Term::bool(self.rng.gen_bool(0.5), sp());
        }
        let d = depth - 1;
        match self.rng.gen_range(0..4) {
            0 => prim2(Prim::Lt, self.int(d, vars), self.int(d, vars)),
            1 => prim2(Prim::Eq, self.int(d, vars), self.int(d, vars)),
            2 => Term::app(Term::prim(Prim::Not, sp()), self.boolean(d, vars), sp()),
            _ => prim2(Prim::And, self.boolean(d, vars), self.boolean(d, vars)),
        }
    }
}

const QUAL_POOL: &str = "\
qualif Pos(v:Int): 0 < v
qualif NonNeg(v:Int): 0 <= v
qualif Neg(v:Int): v < 0
qualif Small(v:Int): v <= 2
qualif Le(v:Int, *:Int): v <= *
qualif Ge(v:Int, *:Int): * <= v
qualif Succ(v:Int, *:Int): v = * + 1
";

pub fn int_params() -> Vec<(Name, Sort)> {
    vec![("a".into(), Sort::Int), ("v".into(), Sort::Int)]
}

/// A random system over unknowns of two Int parameters and binders x, y, z.
pub fn horn_system(rng: &mut ChaCha8Rng) -> (Kappas, Vec<HornClause>, Vec<Qualifier>) {
    let pool = parse_qualifiers(QUAL_POOL).unwrap();
    let quals = loop {
        let n = rng.gen_range(1..=4);
        let mut picked: Vec<_> = pool.iter().filter(|_| rng.gen_ratio(n as u32, pool.len() as u32)).cloned().collect();
        picked.truncate(4);
        let count = instances(&picked, &int_params()).len();
        if (1..=4).contains(&count) {
            break picked;
        }
    };
    let mut kappas = Kappas::default();
    let nk = rng.gen_range(1..=3);
    let names: Vec<Name> =
        (0..nk).map(|i| kappas.fresh(int_params(), 0, &format!("k{i}"), "gen", Span::default())).collect();
    let vars = ["x", "y", "z"];
    let atom = |rng: &mut ChaCha8Rng, a: &str, b: &str| -> Pred {
        let (a, b) = (Pred::var(a), Pred::var(b));
        let c = Pred::Int(rng.gen_range(-1..=2));
        use BinOp::*;
        match rng.gen_range(0..5) {
            0 => Pred::bin(Le, a, b),
            1 => Pred::eq(b, Pred::bin(Add, a, Pred::Int(1))),
            2 => Pred::bin(Lt, c, b),
            3 => Pred::bin(Le, b, c),
            _ => Pred::tt(),
        }
    };
    let mut clauses = Vec::new();
    for i in 0..rng.gen_range(2..=5) {
        let mut vc = Vc::new(format!("c{i}"));
        for (j, x) in vars.iter().enumerate() {
            let mut hyp = Pred::tt();
            if j > 0 {
                let prev = vars[rng.gen_range(0..j)];
                hyp = atom(rng, prev, x);
            }
            if j > 0 && rng.gen_bool(0.6) {
                let k = &names[rng.gen_range(0..nk)];
                let prev = vars[rng.gen_range(0..j)];
                hyp = Pred::and(Pred::Kappa(k.clone(), vec![Pred::var(prev), Pred::var(*x)]), hyp);
            }
            vc.binders.push(Binder { name: x.to_string(), sort: Sort::Int, hyp });
        }
        let head = if rng.gen_ratio(4, 5) {
            let k = names[rng.gen_range(0..nk)].clone();
            let a = rng.gen_range(0..3);
            let b = (a + rng.gen_range(1..3)) % 3;
            let args = vec![vars[a].to_string(), vars[b].to_string()];
            vc.goal = Pred::Kappa(k.clone(), args.iter().map(|x| Pred::var(x.clone())).collect());
            Head::Kappa(k, args)
        } else {
            vc.goal = atom(rng, "x", "z");
            Head::Concrete
        };
        clauses.push(HornClause { vc, head });
    }
    (kappas, clauses, quals)
}

/// Linear arithmetic over x, y with one unary predicate p.
pub fn lia_vc(rng: &mut ChaCha8Rng, i: usize) -> Vc {
    use BinOp::*;
    let term = |rng: &mut ChaCha8Rng| -> Pred {
        let x = Pred::var(["x", "y"][rng.gen_range(0..2)]);
        match rng.gen_range(0..3) {
            0 => x,
            1 => Pred::bin(Add, x, Pred::Int(rng.gen_range(-2..=2))),
            _ => Pred::Int(rng.gen_range(-2..=2)),
        }
    };
    let atom = |rng: &mut ChaCha8Rng| -> Pred {
        let (a, b) = (term(rng), term(rng));
        match rng.gen_range(0..5) {
            0 => Pred::bin(Le, a, b),
            1 => Pred::bin(Lt, a, b),
            2 => Pred::eq(a, b),
            _ => Pred::RApp("p".into(), vec![a]),
        }
    };
    let lit = |rng: &mut ChaCha8Rng| -> Pred {
        let a = atom(rng);
        if rng.gen_ratio(1, 4) {
            Pred::not(a)
        } else {
            a
        }
    };
    let mut vc = Vc::new(format!("lia{i}")).fun("p", vec![Sort::Int], Sort::Bool);
    for x in ["x", "y"] {
        let hyp = if rng.gen_bool(0.7) { lit(rng) } else { Pred::tt() };
        vc = vc.bind(x, Sort::Int, Pred::tt());
        vc = vc.bind(&format!("h{x}"), Sort::Bool, hyp);
    }
    let goal = if rng.gen_bool(0.5) { lit(rng) } else { Pred::bin(Or, lit(rng), lit(rng)) };
    vc.goal(goal)
}
