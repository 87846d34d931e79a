use std::collections::{BTreeSet, HashMap};

use crate::ast::{
    fresh_name, Base, BinOp, Literal, Name, ParamRefinement, Pred, Prim, RType, Schema, Span, Term,
    TermKind, UnOp,
};

use super::lexer::{lex, Tok, Token};
use super::{attach_bound, Assume, BoundDecl, Def, Program, Qualifier, SurfaceError, UninterpDecl};

type PResult<T> = Result<T, SurfaceError>;

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    uninterps: HashMap<Name, usize>,
    bounds: Vec<BoundDecl>,
    /// Abstract refinements visible to predicates, innermost last.
    rscope: Vec<(Name, Option<RType>)>,
    /// Top-level value names usable from terms.
    globals: BTreeSet<Name>,
    /// Term binders in scope while parsing a term.
    locals: Vec<Name>,
    /// Counter for `*` holes in a qualifier body; `None` outside qualifiers.
    stars: Option<usize>,
    /// Treat any applied identifier as an uninterpreted function.
    open_apps: bool,
    anon: usize,
}

pub fn parse_program(src: &str) -> PResult<Program> {
    let mut p = Parser::new(src)?;
    let prog = p.program()?;
    Ok(prog)
}

/// Parse a standalone term with no top-level context. Free identifiers
/// that are not primitives are accepted as variables.
pub fn parse_term(src: &str) -> PResult<Term> {
    let mut p = Parser::new(src)?;
    p.globals = free_idents(&p.toks);
    let t = p.term()?;
    p.expect_eof()?;
    Ok(alpha_rename(&t, &mut BTreeSet::new()))
}

/// Parse a standalone formula; every applied identifier is read as an
/// uninterpreted function application.
pub fn parse_formula(src: &str) -> PResult<Pred> {
    let mut p = Parser::new(src)?;
    p.open_apps = true;
    let f = p.pred()?;
    p.expect_eof()?;
    Ok(f)
}

/// Parse a schema in the declaration context of `prog`.
pub fn parse_schema_with(src: &str, prog: &Program) -> PResult<Schema> {
    let mut p = Parser::new(src)?;
    p.bounds = prog.bounds.clone();
    for u in &prog.uninterps {
        p.uninterps.insert(u.name.clone(), u.args.len());
    }
    let s = p.schema()?;
    p.expect_eof()?;
    Ok(s)
}

fn free_idents(toks: &[Token]) -> BTreeSet<Name> {
    toks.iter()
        .filter_map(|t| match &t.tok {
            Tok::Ident(s) if Prim::from_name(s).is_none() && !is_mul_name(s) => Some(s.clone()),
            _ => None,
        })
        .collect()
}

fn is_mul_name(s: &str) -> bool {
    s.strip_prefix("mul").is_some_and(|k| k.parse::<i64>().is_ok())
}

fn alpha_rename(t: &Term, used: &mut BTreeSet<Name>) -> Term {
    t.rename_binders(&mut |x| {
        let n = fresh_name(x, used);
        used.insert(n.clone());
        n
    })
}

impl Parser {
    fn new(src: &str) -> PResult<Parser> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
            uninterps: HashMap::new(),
            bounds: Vec::new(),
            rscope: Vec::new(),
            globals: BTreeSet::new(),
            locals: Vec::new(),
            stars: None,
            open_apps: false,
            anon: 0,
        })
    }

    // -- token plumbing ----------------------------------------------------

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Kw(x) if *x == k)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.is_kw(k) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error<T>(&self, expected: &[&str]) -> PResult<T> {
        Err(SurfaceError::Syntax {
            span: self.span(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        })
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.error(&[&format!("`{s}`")])
        }
    }

    fn expect_kw(&mut self, k: &str) -> PResult<()> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            self.error(&[&format!("`{k}`")])
        }
    }

    fn ident(&mut self) -> PResult<(Name, Span)> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let sp = self.span();
                self.bump();
                Ok((s, sp))
            }
            _ => self.error(&["identifier"]),
        }
    }

    fn expect_eof(&self) -> PResult<()> {
        if matches!(self.peek(), Tok::Eof) {
            Ok(())
        } else {
            self.error(&["end of input"])
        }
    }

    fn fresh_anon(&mut self) -> Name {
        let n = format!("_a{}", self.anon);
        self.anon += 1;
        n
    }

    // -- programs ----------------------------------------------------------

    fn program(&mut self) -> PResult<Program> {
        let mut prog = Program::default();
        let mut pending: Vec<(Name, Schema, Span)> = Vec::new();
        let mut names: HashMap<Name, Span> = HashMap::new();
        let claim = |name: &Name, span: Span, names: &mut HashMap<Name, Span>| {
            if names.contains_key(name) {
                Err(SurfaceError::DuplicateName { name: name.clone(), span })
            } else {
                names.insert(name.clone(), span);
                Ok(())
            }
        };
        loop {
            let sp = self.span();
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Kw("qualif") => {
                    self.bump();
                    let q = self.qualifier()?;
                    if prog.qualifiers.iter().any(|o| o.name == q.name) {
                        return Err(SurfaceError::DuplicateName { name: q.name, span: sp });
                    }
                    prog.qualifiers.push(q);
                }
                Tok::Kw("uninterp") => {
                    self.bump();
                    let (name, nsp) = self.ident()?;
                    claim(&name, nsp, &mut names)?;
                    self.expect_sym("::")?;
                    let mut sorts = vec![self.base()?];
                    while self.eat_sym("->") {
                        sorts.push(self.base()?);
                    }
                    let ret = sorts.pop().unwrap();
                    self.uninterps.insert(name.clone(), sorts.len());
                    prog.uninterps.push(UninterpDecl { name, args: sorts, ret });
                }
                Tok::Kw("bound") => {
                    self.bump();
                    let b = self.bound_decl()?;
                    claim(&b.name, b.span, &mut names)?;
                    self.bounds.push(b.clone());
                    prog.bounds.push(b);
                }
                Tok::Kw("assume") => {
                    self.bump();
                    let (name, nsp) = self.ident()?;
                    claim(&name, nsp, &mut names)?;
                    self.expect_sym("::")?;
                    let schema = self.schema()?;
                    self.globals.insert(name.clone());
                    prog.assumes.push(Assume { name, schema, span: nsp });
                }
                Tok::Kw("val") => {
                    self.bump();
                    let (name, nsp) = self.ident()?;
                    if pending.iter().any(|(n, _, _)| *n == name) {
                        return Err(SurfaceError::DuplicateName { name, span: nsp });
                    }
                    self.expect_sym("::")?;
                    let schema = self.schema()?;
                    pending.push((name, schema, nsp));
                }
                Tok::Kw(k @ ("let" | "letrec")) => {
                    self.bump();
                    let recursive = k == "letrec";
                    let (name, nsp) = self.ident()?;
                    claim(&name, nsp, &mut names)?;
                    let mut annot = if self.eat_sym("::") { Some(self.schema()?) } else { None };
                    if let Some(i) = pending.iter().position(|(n, _, _)| *n == name) {
                        let (_, s, vsp) = pending.remove(i);
                        if annot.is_some() {
                            return Err(SurfaceError::DuplicateName { name, span: vsp });
                        }
                        annot = Some(s);
                    }
                    let body = self.def_body(&name, recursive, annot.as_ref())?;
                    self.globals.insert(name.clone());
                    prog.defs.push(Def { name, annot, body, recursive, span: nsp });
                }
                _ => {
                    return self.error(&["`qualif`", "`uninterp`", "`bound`", "`assume`", "`val`", "`let`", "`letrec`"])
                }
            }
        }
        if let Some((name, _, span)) = pending.into_iter().next() {
            return Err(SurfaceError::Malformed { msg: format!("signature for `{name}` lacks a definition"), span });
        }
        // Globally unique binders: top-level names are reserved first.
        let mut used: BTreeSet<Name> = names.keys().cloned().collect();
        for d in &mut prog.defs {
            d.body = alpha_rename(&d.body, &mut used);
        }
        Ok(prog)
    }

    fn def_body(&mut self, name: &Name, recursive: bool, annot: Option<&Schema>) -> PResult<Term> {
        let saved_r = self.rscope.len();
        if let Some(s) = annot {
            for (p, t) in s.rvar_decls() {
                self.rscope.push((p.clone(), Some(t.clone())));
            }
        }
        if recursive {
            self.locals.push(name.clone());
        }
        let mut binders = Vec::new();
        while !self.is_sym("=") {
            binders.push(self.lam_binder()?);
        }
        self.expect_sym("=")?;
        for (x, _, _) in &binders {
            self.locals.push(x.clone());
        }
        let body = self.term();
        self.locals.truncate(self.locals.len() - binders.len() - usize::from(recursive));
        self.rscope.truncate(saved_r);
        let mut body = body?;
        for (x, ty, sp) in binders.into_iter().rev() {
            body = Term::lam(x, ty, body, sp);
        }
        Ok(body)
    }

    fn qualifier(&mut self) -> PResult<Qualifier> {
        let (name, _) = self.ident()?;
        self.expect_sym("(")?;
        let mut params: Vec<(Option<Name>, Base)> = Vec::new();
        loop {
            let pname = if self.eat_sym("*") { None } else { Some(self.ident()?.0) };
            self.expect_sym(":")?;
            params.push((pname, self.base()?));
            if !self.eat_sym(",") {
                break;
            }
        }
        self.expect_sym(")")?;
        self.expect_sym(":")?;
        let sp = self.span();
        self.stars = Some(0);
        let body = self.pred();
        let nstars = self.stars.take().unwrap_or(0);
        let body = body?;
        let (vv, rest) = params.split_first().unwrap();
        let Some(vname) = vv.0.clone() else {
            return Err(SurfaceError::Malformed { msg: "qualifier value parameter needs a name".into(), span: sp });
        };
        let mut holes = Vec::new();
        let mut k = 0;
        for (n, b) in rest {
            match n {
                Some(n) => holes.push((n.clone(), b.clone())),
                None => {
                    holes.push((format!("*{k}"), b.clone()));
                    k += 1;
                }
            }
        }
        if k != nstars {
            return Err(SurfaceError::Malformed {
                msg: format!("qualifier `{name}` declares {k} wildcards but its body uses {nstars}"),
                span: sp,
            });
        }
        Ok(Qualifier { name, vv: (vname, vv.1.clone()), holes, body })
    }

    fn bound_decl(&mut self) -> PResult<BoundDecl> {
        let (name, span) = self.ident()?;
        let mut rvars = Vec::new();
        loop {
            if self.eat_sym("(") {
                let (p, _) = self.ident()?;
                self.expect_sym("::")?;
                let t = self.rtype()?;
                self.expect_sym(")")?;
                rvars.push((p, Some(t)));
            } else if let Tok::Ident(p) = self.peek().clone() {
                self.bump();
                rvars.push((p, None));
            } else {
                break;
            }
        }
        self.expect_sym("=")?;
        let mut params = Vec::new();
        if self.eat_sym("\\") {
            while !self.is_sym("->") {
                if self.eat_sym("(") {
                    let (x, _) = self.ident()?;
                    self.expect_sym(":")?;
                    let b = self.base()?;
                    self.expect_sym(")")?;
                    params.push((x, Some(b)));
                } else {
                    params.push((self.ident()?.0, None));
                }
            }
            self.expect_sym("->")?;
        }
        let saved = self.rscope.len();
        self.rscope.extend(rvars.iter().cloned());
        let body = self.pred();
        self.rscope.truncate(saved);
        Ok(BoundDecl { name, rvars, params, body: body?, span })
    }

    // -- types ---------------------------------------------------------------

    fn base(&mut self) -> PResult<Base> {
        match self.peek().clone() {
            Tok::Ident(s) if s == "Int" => {
                self.bump();
                Ok(Base::Int)
            }
            Tok::Ident(s) if s == "Bool" => {
                self.bump();
                Ok(Base::Bool)
            }
            Tok::Ident(s) if s.starts_with(|c: char| c.is_ascii_lowercase()) => {
                self.bump();
                Ok(Base::TyVar(s))
            }
            _ => self.error(&["`Int`", "`Bool`", "type variable"]),
        }
    }

    fn schema(&mut self) -> PResult<Schema> {
        let saved = self.rscope.len();
        let r = self.schema_inner();
        self.rscope.truncate(saved);
        r
    }

    fn schema_inner(&mut self) -> PResult<Schema> {
        let mut tyvars: Vec<Name> = Vec::new();
        let mut rdecls: Vec<(Name, RType)> = Vec::new();
        let mut attached: Vec<(Name, Vec<Name>, Span)> = Vec::new();
        loop {
            if self.eat_kw("forall") {
                if self.eat_sym("<") {
                    loop {
                        let (p, _) = self.ident()?;
                        self.expect_sym("::")?;
                        let t = self.rtype()?;
                        self.rscope.push((p.clone(), Some(t.clone())));
                        rdecls.push((p, t));
                        if !self.eat_sym(",") {
                            break;
                        }
                    }
                    self.expect_sym(">")?;
                } else {
                    while let Tok::Ident(a) = self.peek().clone() {
                        self.bump();
                        tyvars.push(a);
                    }
                }
                self.expect_sym(".")?;
                continue;
            }
            if self.is_sym("(") {
                if let Tok::Ident(b) = self.peek_at(1).clone() {
                    if self.bounds.iter().any(|d| d.name == b) {
                        let sp = self.span();
                        self.bump();
                        self.bump();
                        let mut actuals = Vec::new();
                        while let Tok::Ident(p) = self.peek().clone() {
                            self.bump();
                            actuals.push(p);
                        }
                        self.expect_sym(")")?;
                        self.expect_sym("=>")?;
                        attached.push((b, actuals, sp));
                        continue;
                    }
                }
            }
            break;
        }
        let body = self.rtype()?;
        let mut implicit: Vec<Name> = Vec::new();
        for (_, t) in &rdecls {
            collect_tyvars(t, &mut implicit);
        }
        collect_tyvars(&body, &mut implicit);
        for a in implicit {
            if !tyvars.contains(&a) {
                tyvars.push(a);
            }
        }
        let mut bounds = Vec::new();
        for (b, actuals, sp) in attached {
            let decl = self.bounds.iter().find(|d| d.name == b).unwrap();
            for a in &actuals {
                if !rdecls.iter().any(|(p, _)| p == a) {
                    return Err(SurfaceError::UnboundIdentifier { name: a.clone(), span: sp });
                }
            }
            let lookup = |p: &str| rdecls.iter().find(|(q, _)| q == p).map(|(_, t)| t.clone());
            bounds.push(attach_bound(decl, &actuals, &lookup, sp)?);
        }
        let mut s = Schema::Mono(body);
        for b in bounds.into_iter().rev() {
            s = Schema::Bounded(b, Box::new(s));
        }
        for (p, t) in rdecls.into_iter().rev() {
            s = Schema::ForallP(p, t, Box::new(s));
        }
        for a in tyvars.into_iter().rev() {
            s = Schema::ForallTy(a, Box::new(s));
        }
        Ok(s)
    }

    fn rtype(&mut self) -> PResult<RType> {
        let binder = match (self.peek().clone(), self.peek_at(1).clone()) {
            (Tok::Ident(x), Tok::Sym(":")) => {
                self.bump();
                self.bump();
                Some(x)
            }
            _ => None,
        };
        let dom = self.btype()?;
        if self.eat_sym("->") {
            let binder = match binder {
                Some(b) => b,
                None => self.fresh_anon(),
            };
            let cod = self.rtype()?;
            Ok(RType::fun(binder, dom, cod))
        } else if binder.is_some() {
            self.error(&["`->`"])
        } else {
            Ok(dom)
        }
    }

    fn btype(&mut self) -> PResult<RType> {
        if self.eat_sym("(") {
            let t = self.rtype()?;
            self.expect_sym(")")?;
            return Ok(t);
        }
        if self.eat_sym("{") {
            let (vv, _) = self.ident()?;
            self.expect_sym(":")?;
            let base = self.base()?;
            self.expect_sym("|")?;
            let r = self.pred()?;
            self.expect_sym("}")?;
            return Ok(RType::base(base, vv, r));
        }
        let base = self.base()?;
        if self.is_sym("<") {
            self.bump();
            let mut apps = Vec::new();
            loop {
                let sp = self.span();
                let (p, _) = self.ident()?;
                if !self.rscope.iter().any(|(q, _)| *q == p) {
                    return Err(SurfaceError::UnboundIdentifier { name: p, span: sp });
                }
                let mut args = Vec::new();
                while !self.is_sym(">") && !self.is_sym(",") {
                    args.push(self.pred_atom()?);
                }
                apps.push((p, args));
                if !self.eat_sym(",") {
                    break;
                }
            }
            self.expect_sym(">")?;
            let mut avoid = BTreeSet::new();
            for (_, args) in &apps {
                for a in args {
                    a.collect_vars(&mut avoid);
                }
            }
            let vv = fresh_name("v", &avoid);
            let r = Pred::conj(apps.into_iter().map(|(p, mut args)| {
                args.push(Pred::var(vv.clone()));
                Pred::RApp(p, args)
            }));
            return Ok(RType::base(base, vv, r));
        }
        Ok(RType::trivial(base))
    }

    // -- predicates ----------------------------------------------------------

    fn pred(&mut self) -> PResult<Pred> {
        let lhs = self.pred_iff()?;
        if self.eat_sym("=>") {
            let rhs = self.pred()?;
            return Ok(Pred::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn pred_iff(&mut self) -> PResult<Pred> {
        let lhs = self.pred_or()?;
        if self.eat_sym("<=>") {
            let rhs = self.pred_or()?;
            return Ok(Pred::bin(BinOp::Iff, lhs, rhs));
        }
        Ok(lhs)
    }

    fn pred_or(&mut self) -> PResult<Pred> {
        let mut lhs = self.pred_and()?;
        while self.eat_sym("||") {
            lhs = Pred::bin(BinOp::Or, lhs, self.pred_and()?);
        }
        Ok(lhs)
    }

    fn pred_and(&mut self) -> PResult<Pred> {
        let mut lhs = self.pred_cmp()?;
        while self.eat_sym("&&") {
            lhs = Pred::bin(BinOp::And, lhs, self.pred_cmp()?);
        }
        Ok(lhs)
    }

    fn pred_cmp(&mut self) -> PResult<Pred> {
        let lhs = self.pred_sum()?;
        let op = match self.peek() {
            Tok::Sym("=") | Tok::Sym("==") => BinOp::Eq,
            Tok::Sym("!=") => BinOp::Ne,
            Tok::Sym("<") => BinOp::Lt,
            Tok::Sym("<=") => BinOp::Le,
            Tok::Sym(">") => BinOp::Gt,
            Tok::Sym(">=") => BinOp::Ge,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.pred_sum()?;
        Ok(Pred::bin(op, lhs, rhs))
    }

    fn pred_sum(&mut self) -> PResult<Pred> {
        let mut lhs = self.pred_prod()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("+") => BinOp::Add,
                Tok::Sym("-") => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Pred::bin(op, lhs, self.pred_prod()?);
        }
    }

    fn pred_prod(&mut self) -> PResult<Pred> {
        let mut lhs = self.pred_unary()?;
        while self.eat_sym("*") {
            lhs = Pred::bin(BinOp::Mul, lhs, self.pred_unary()?);
        }
        Ok(lhs)
    }

    fn pred_unary(&mut self) -> PResult<Pred> {
        if self.eat_kw("not") {
            return Ok(Pred::not(self.pred_unary()?));
        }
        if self.eat_sym("-") {
            return Ok(match self.pred_unary()? {
                Pred::Int(n) => Pred::Int(-n),
                p => Pred::Un(UnOp::Neg, Box::new(p)),
            });
        }
        self.pred_app()
    }

    fn starts_pred_atom(&self) -> bool {
        match self.peek() {
            Tok::Ident(_) | Tok::Int(_) | Tok::Kw("true") | Tok::Kw("false") | Tok::Sym("(") => true,
            Tok::Sym("*") => self.stars.is_some(),
            _ => false,
        }
    }

    fn pred_app(&mut self) -> PResult<Pred> {
        if let Tok::Ident(f) = self.peek().clone() {
            let sp = self.span();
            let is_rvar = self.rscope.iter().any(|(p, _)| *p == f);
            let is_fun = self.uninterps.contains_key(&f);
            self.bump();
            let is_fun = is_fun || (self.open_apps && !is_rvar && self.starts_pred_atom());
            if is_rvar || is_fun {
                let mut args = Vec::new();
                while self.starts_pred_atom() {
                    args.push(self.pred_atom()?);
                }
                return Ok(if is_rvar { Pred::RApp(f, args) } else { Pred::App(f, args) });
            }
            if self.starts_pred_atom() {
                return Err(SurfaceError::UnboundIdentifier { name: f, span: sp });
            }
            return Ok(Pred::Var(f));
        }
        self.pred_atom()
    }

    fn pred_atom(&mut self) -> PResult<Pred> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Pred::Int(n))
            }
            Tok::Kw("true") => {
                self.bump();
                Ok(Pred::Bool(true))
            }
            Tok::Kw("false") => {
                self.bump();
                Ok(Pred::Bool(false))
            }
            Tok::Ident(x) => {
                self.bump();
                if self.rscope.iter().any(|(p, _)| *p == x) {
                    Ok(Pred::RApp(x, vec![]))
                } else if self.uninterps.get(&x) == Some(&0) {
                    Ok(Pred::App(x, vec![]))
                } else {
                    Ok(Pred::Var(x))
                }
            }
            Tok::Sym("*") if self.stars.is_some() => {
                self.bump();
                let k = self.stars.as_mut().unwrap();
                let name = format!("*{k}");
                *k += 1;
                Ok(Pred::Var(name))
            }
            Tok::Sym("(") => {
                self.bump();
                let p = self.pred()?;
                self.expect_sym(")")?;
                Ok(p)
            }
            Tok::Kw("if") => {
                self.bump();
                let c = self.pred()?;
                self.expect_kw("then")?;
                let a = self.pred()?;
                self.expect_kw("else")?;
                let b = self.pred()?;
                Ok(Pred::Ite(Box::new(c), Box::new(a), Box::new(b)))
            }
            _ => self.error(&["predicate"]),
        }
    }

    // -- terms ---------------------------------------------------------------

    fn lam_binder(&mut self) -> PResult<(Name, Option<RType>, Span)> {
        let sp = self.span();
        if self.eat_sym("(") {
            let (x, _) = self.ident()?;
            self.expect_sym(":")?;
            let t = self.rtype()?;
            self.expect_sym(")")?;
            Ok((x, Some(t), sp))
        } else {
            let (x, _) = self.ident()?;
            Ok((x, None, sp))
        }
    }

    fn term(&mut self) -> PResult<Term> {
        let sp = self.span();
        if self.eat_sym("\\") {
            let mut binders = Vec::new();
            while !self.is_sym("->") {
                binders.push(self.lam_binder()?);
            }
            if binders.is_empty() {
                return self.error(&["binder"]);
            }
            self.expect_sym("->")?;
            for (x, _, _) in &binders {
                self.locals.push(x.clone());
            }
            let body = self.term();
            self.locals.truncate(self.locals.len() - binders.len());
            let mut body = body?;
            for (x, ty, bsp) in binders.into_iter().rev() {
                body = Term::lam(x, ty, body, bsp);
            }
            body.span = sp;
            return Ok(body);
        }
        if self.eat_kw("let") {
            let (x, _) = self.ident()?;
            let annot = if self.eat_sym(":") { Some(self.rtype()?) } else { None };
            self.expect_sym("=")?;
            let bound = self.term()?;
            self.expect_kw("in")?;
            self.locals.push(x.clone());
            let body = self.term();
            self.locals.pop();
            return Ok(Term::let_(x, annot, bound, body?, sp));
        }
        if self.eat_kw("if") {
            let c = self.term()?;
            self.expect_kw("then")?;
            let a = self.term()?;
            self.expect_kw("else")?;
            let b = self.term()?;
            return Ok(Term::new(
                TermKind::If { cond: Box::new(c), then_branch: Box::new(a), else_branch: Box::new(b) },
                sp,
            ));
        }
        if self.eat_sym("/\\") {
            if self.eat_sym("<") {
                let (p, _) = self.ident()?;
                self.expect_sym("::")?;
                let t = self.rtype()?;
                self.expect_sym(">")?;
                self.expect_sym(".")?;
                self.rscope.push((p.clone(), Some(t.clone())));
                let body = self.term();
                self.rscope.pop();
                return Ok(Term::new(TermKind::PLam { rvar: p, rvar_ty: t, body: Box::new(body?) }, sp));
            }
            let (a, _) = self.ident()?;
            self.expect_sym(".")?;
            let body = self.term()?;
            return Ok(Term::new(TermKind::TLam { tyvar: a, body: Box::new(body) }, sp));
        }
        self.term_or()
    }

    fn binop(&self, p: Prim, a: Term, b: Term, sp: Span) -> Term {
        Term::app(Term::app(Term::prim(p, sp), a, sp), b, sp)
    }

    fn term_or(&mut self) -> PResult<Term> {
        let mut lhs = self.term_and()?;
        loop {
            let sp = self.span();
            if !self.eat_sym("||") {
                return Ok(lhs);
            }
            let rhs = self.term_and()?;
            lhs = self.binop(Prim::Or, lhs, rhs, sp);
        }
    }

    fn term_and(&mut self) -> PResult<Term> {
        let mut lhs = self.term_cmp()?;
        loop {
            let sp = self.span();
            if !self.eat_sym("&&") {
                return Ok(lhs);
            }
            let rhs = self.term_cmp()?;
            lhs = self.binop(Prim::And, lhs, rhs, sp);
        }
    }

    fn term_cmp(&mut self) -> PResult<Term> {
        let lhs = self.term_sum()?;
        let sp = self.span();
        let op = match self.peek() {
            Tok::Sym("==") => Prim::Eq,
            Tok::Sym("!=") => Prim::Ne,
            Tok::Sym("<") => Prim::Lt,
            Tok::Sym("<=") => Prim::Le,
            Tok::Sym(">") => Prim::Gt,
            Tok::Sym(">=") => Prim::Ge,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.term_sum()?;
        Ok(self.binop(op, lhs, rhs, sp))
    }

    fn term_sum(&mut self) -> PResult<Term> {
        let mut lhs = self.term_mul()?;
        loop {
            let sp = self.span();
            let op = match self.peek() {
                Tok::Sym("+") => Prim::Add,
                Tok::Sym("-") => Prim::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term_mul()?;
            lhs = self.binop(op, lhs, rhs, sp);
        }
    }

    fn term_mul(&mut self) -> PResult<Term> {
        let mut lhs = self.term_app()?;
        loop {
            let sp = self.span();
            if !self.eat_sym("*") {
                return Ok(lhs);
            }
            let rhs = self.term_app()?;
            let lit = |t: &Term| match t.kind {
                TermKind::Const(Literal::Int(k)) => Some(k),
                _ => None,
            };
            lhs = match (lit(&lhs), lit(&rhs)) {
                (_, Some(k)) => Term::app(Term::prim(Prim::MulBy(k), sp), lhs, sp),
                (Some(k), None) => Term::app(Term::prim(Prim::MulBy(k), sp), rhs, sp),
                (None, None) => {
                    return Err(SurfaceError::Malformed {
                        msg: "multiplication needs a literal operand".into(),
                        span: sp,
                    })
                }
            };
        }
    }

    fn starts_term_atom(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Ident(_) | Tok::Int(_) | Tok::Kw("true") | Tok::Kw("false") | Tok::Kw("not") | Tok::Sym("(")
        )
    }

    fn term_app(&mut self) -> PResult<Term> {
        let mut head = self.term_atom()?;
        loop {
            let sp = self.span();
            if self.eat_sym("@[") {
                let ty = self.rtype()?;
                self.expect_sym("]")?;
                head = Term::new(TermKind::TApp { term: Box::new(head), ty }, sp);
            } else if self.eat_sym("@{") {
                let witness = self.witness()?;
                self.expect_sym("}")?;
                head = Term::new(TermKind::PApp { term: Box::new(head), witness }, sp);
            } else if self.starts_term_atom() {
                let arg = self.term_atom()?;
                let hs = head.span;
                head = Term::app(head, arg, hs);
            } else {
                return Ok(head);
            }
        }
    }

    fn witness(&mut self) -> PResult<ParamRefinement> {
        let mut params = Vec::new();
        if self.eat_sym("\\") {
            while !self.is_sym("->") {
                if self.eat_sym("(") {
                    let (x, _) = self.ident()?;
                    self.expect_sym(":")?;
                    let b = self.base()?;
                    self.expect_sym(")")?;
                    params.push((x, b));
                } else {
                    params.push((self.ident()?.0, Base::Int));
                }
            }
            self.expect_sym("->")?;
        }
        let body = self.pred()?;
        Ok(ParamRefinement { params, body })
    }

    fn term_atom(&mut self) -> PResult<Term> {
        let sp = self.span();
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Term::int(n, sp))
            }
            Tok::Sym("-") if matches!(self.peek_at(1), Tok::Int(_)) => {
                self.bump();
                let Tok::Int(n) = self.bump().tok else { unreachable!() };
                Ok(Term::int(-n, sp))
            }
            Tok::Kw("true") => {
                self.bump();
                Ok(Term::bool(true, sp))
            }
            Tok::Kw("false") => {
                self.bump();
                Ok(Term::bool(false, sp))
            }
            Tok::Kw("not") => {
                self.bump();
                Ok(Term::prim(Prim::Not, sp))
            }
            Tok::Ident(x) => {
                self.bump();
                if self.locals.contains(&x) || self.globals.contains(&x) {
                    Ok(Term::var(x, sp))
                } else if let Some(p) = Prim::from_name(&x) {
                    Ok(Term::prim(p, sp))
                } else if let Some(k) = x.strip_prefix("mul").and_then(|k| k.parse::<i64>().ok()) {
                    Ok(Term::prim(Prim::MulBy(k), sp))
                } else {
                    Err(SurfaceError::UnboundIdentifier { name: x, span: sp })
                }
            }
            Tok::Sym("(") => {
                self.bump();
                let t = self.term()?;
                self.expect_sym(")")?;
                Ok(t)
            }
            _ => self.error(&["term"]),
        }
    }
}

fn collect_tyvars(t: &RType, out: &mut Vec<Name>) {
    match t {
        RType::Base { base: Base::TyVar(a), .. } => {
            if !out.contains(a) {
                out.push(a.clone());
            }
        }
        RType::Base { .. } => {}
        RType::Fun { dom, cod, .. } => {
            collect_tyvars(dom, out);
            collect_tyvars(cod, out);
        }
    }
}
