use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use super::ast::*;
use super::lexer::{lex, Tok};
use super::{free_vars, IntOp, MonadOp, Name, Op, RelOp, Span};
use crate::types::{BinderKind, BorrowKind, Lifetime, Mult, Type};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ParseErrorKind {
    UnknownOperator,
    UnknownConstructor,
    UnknownType,
    ArityMismatch,
    DuplicateConstructor,
    Syntax,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{span}: {kind}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub span: Span,
    pub message: String,
}

impl ParseError {
    pub fn new(kind: ParseErrorKind, span: Span, message: impl Into<String>) -> Self {
        ParseError { kind, span, message: message.into() }
    }
}

type PResult<T> = Result<T, ParseError>;

const KEYWORDS: &[&str] = &["let", "let1", "in", "case", "of", "seq", "forall", "data", "where", "static", "modifyRef"];

const BUILTIN_TYPES: &[&str] = &["Int", "Linearly", "Ref", "Now", "End", "Mut", "Share", "Lend", "BO"];

fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s) || Op::from_keyword(s).is_some() || MonadOp::from_keyword(s).is_some()
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
    /// Constructor name → arity.
    ctors: HashMap<String, usize>,
    /// Type constructor name → arity.
    tycons: HashMap<String, usize>,
}

/// Parses a complete program: data declarations followed by one body term.
pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    let mut p = Parser::new(src, &super::default_decls())?;
    let mut decls = Vec::new();
    while p.peek_ident("data") {
        decls.push(p.data_decl()?);
    }
    let body = p.term()?;
    p.expect_eof()?;
    Ok(Program::new(decls, body))
}

/// Parses a single term against an existing set of declarations.
pub fn parse_term_with(decls: &[DataDecl], src: &str) -> Result<Term, ParseError> {
    let mut p = Parser::new(src, decls)?;
    let t = p.term()?;
    p.expect_eof()?;
    Ok(t)
}

impl Parser {
    fn new(src: &str, decls: &[DataDecl]) -> PResult<Self> {
        let mut p = Parser { toks: lex(src)?, pos: 0, ctors: HashMap::new(), tycons: HashMap::new() };
        for d in decls {
            p.tycons.insert(d.name.to_string(), d.params.len());
            for c in &d.ctors {
                p.ctors.insert(c.name.to_string(), c.fields.len());
            }
        }
        Ok(p)
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn peek_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn peek_ident(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.peek_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(ParseError::new(ParseErrorKind::Syntax, self.span(), msg))
    }

    fn unexpected<T>(&self, wanted: &str) -> PResult<T> {
        self.err(format!("expected {wanted}, found {}", self.peek().describe()))
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.unexpected(&format!("`{s}`"))
        }
    }

    fn expect_ident(&mut self, s: &str) -> PResult<()> {
        if self.peek_ident(s) {
            self.bump();
            Ok(())
        } else {
            self.unexpected(&format!("`{s}`"))
        }
    }

    fn expect_eof(&self) -> PResult<()> {
        match self.peek() {
            Tok::Eof => Ok(()),
            _ => self.unexpected("end of input"),
        }
    }

    fn var_name(&mut self) -> PResult<Name> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                Ok(Name::from(s))
            }
            Tok::Ident(s) => self.err(format!("`{s}` is a keyword and cannot name a variable")),
            _ => self.unexpected("a variable name"),
        }
    }

    // ---- declarations ----

    fn data_decl(&mut self) -> PResult<DataDecl> {
        self.expect_ident("data")?;
        let span = self.span();
        let name = match self.bump() {
            Tok::Upper(s) => s,
            t => return Err(ParseError::new(ParseErrorKind::Syntax, span, format!("expected a type name, found {}", t.describe()))),
        };
        if self.tycons.contains_key(&name) || BUILTIN_TYPES.contains(&name.as_str()) {
            return Err(ParseError::new(ParseErrorKind::DuplicateConstructor, span, format!("type `{name}` is already declared")));
        }
        let mut params = Vec::new();
        while let Tok::TyVar(v) = self.peek().clone() {
            self.bump();
            params.push(Name::from(v));
        }
        self.tycons.insert(name.clone(), params.len());
        self.expect_ident("where")?;
        let result = Type::Data(Name::from(name.as_str()), params.iter().cloned().map(Type::Var).collect());
        let mut ctors = Vec::new();
        let mut declared: Vec<(String, usize)> = Vec::new();
        loop {
            let cspan = self.span();
            let cname = match self.bump() {
                Tok::Upper(s) => s,
                t => return Err(ParseError::new(ParseErrorKind::Syntax, cspan, format!("expected a constructor name, found {}", t.describe()))),
            };
            if self.ctors.contains_key(&cname) || declared.iter().any(|(c, _)| *c == cname) {
                return Err(ParseError::new(ParseErrorKind::DuplicateConstructor, cspan, format!("constructor `{cname}` is already declared")));
            }
            self.expect_sym(":")?;
            let mut t = self.ty()?;
            let mut fields = Vec::new();
            while let Type::Fun(a, m, b) = t {
                if !matches!(m, Mult::One | Mult::Many) {
                    return Err(ParseError::new(ParseErrorKind::Syntax, cspan, "constructor fields must have multiplicity 1 or w"));
                }
                fields.push((m, *a));
                t = *b;
            }
            if t != result {
                return Err(ParseError::new(
                    ParseErrorKind::Syntax,
                    cspan,
                    format!("constructor `{cname}` must return `{result}`, not `{t}`"),
                ));
            }
            declared.push((cname.clone(), fields.len()));
            ctors.push(CtorDecl { name: Name::from(cname), fields });
            if !self.eat_sym("|") {
                break;
            }
        }
        self.expect_sym(";")?;
        for (c, n) in declared {
            self.ctors.insert(c, n);
        }
        Ok(DataDecl { name: Name::from(name), params, ctors })
    }

    // ---- types ----

    fn ty(&mut self) -> PResult<Type> {
        if self.peek_ident("forall") {
            self.bump();
            let (k, n) = self.tbinder()?;
            self.expect_sym(".")?;
            let body = self.ty()?;
            return Ok(Type::Forall(k, n, Box::new(body)));
        }
        let a = self.btype()?;
        if self.eat_sym("-o") {
            return Ok(Type::fun(a, Mult::One, self.ty()?));
        }
        if self.eat_sym("->") {
            let m = if self.eat_sym("[") {
                let m = self.mult()?;
                self.expect_sym("]")?;
                m
            } else {
                Mult::Many
            };
            return Ok(Type::fun(a, m, self.ty()?));
        }
        Ok(a)
    }

    fn tbinder(&mut self) -> PResult<(BinderKind, Name)> {
        let k = match self.bump() {
            Tok::LtVar(s) => (BinderKind::Lifetime, s),
            Tok::LtId(s) => (BinderKind::LifetimeId, s),
            Tok::MultVar(s) => (BinderKind::Mult, s),
            Tok::TyVar(s) => (BinderKind::Type, s),
            _ => {
                self.pos -= 1;
                return self.unexpected("a binder `'a`, `^i`, `%p` or `#a`");
            }
        };
        Ok((k.0, Name::from(k.1)))
    }

    fn btype(&mut self) -> PResult<Type> {
        let span = self.span();
        if let Tok::Upper(s) = self.peek().clone() {
            match s.as_str() {
                "Ref" => {
                    self.bump();
                    return Ok(Type::Ref(Box::new(self.tatom()?)));
                }
                "Now" | "End" => {
                    self.bump();
                    let l = self.lifetime()?;
                    return Ok(if s == "Now" { Type::Now(l) } else { Type::End(l) });
                }
                "Mut" | "Share" | "Lend" | "BO" => {
                    self.bump();
                    let l = self.lifetime()?;
                    let t = Box::new(self.tatom()?);
                    return Ok(match s.as_str() {
                        "Mut" => Type::Borrow(BorrowKind::Mut, l, t),
                        "Share" => Type::Borrow(BorrowKind::Share, l, t),
                        "Lend" => Type::Lend(l, t),
                        _ => Type::BO(l, t),
                    });
                }
                "Int" | "Linearly" => {}
                _ => match self.tycons.get(&s) {
                    Some(&n) if n > 0 => {
                        self.bump();
                        let mut args = Vec::new();
                        for _ in 0..n {
                            if !self.type_atom_start() {
                                return Err(ParseError::new(
                                    ParseErrorKind::ArityMismatch,
                                    span,
                                    format!("type `{s}` expects {n} arguments, got {}", args.len()),
                                ));
                            }
                            args.push(self.tatom()?);
                        }
                        return Ok(Type::Data(Name::from(s), args));
                    }
                    Some(_) => {}
                    None => {
                        return Err(ParseError::new(ParseErrorKind::UnknownType, span, format!("unknown type `{s}`")));
                    }
                },
            }
        }
        self.tatom()
    }

    fn type_atom_start(&self) -> bool {
        matches!(self.peek(), Tok::Upper(_) | Tok::TyVar(_) | Tok::Sym("("))
    }

    fn tatom(&mut self) -> PResult<Type> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Upper(s) => {
                self.bump();
                match s.as_str() {
                    "Int" => Ok(Type::Int),
                    "Linearly" => Ok(Type::Linearly),
                    _ => match self.tycons.get(&s) {
                        Some(0) => Ok(Type::Data(Name::from(s), vec![])),
                        Some(n) => Err(ParseError::new(
                            ParseErrorKind::ArityMismatch,
                            span,
                            format!("type `{s}` expects {n} arguments; parenthesize the application"),
                        )),
                        None if BUILTIN_TYPES.contains(&s.as_str()) => Err(ParseError::new(
                            ParseErrorKind::ArityMismatch,
                            span,
                            format!("type `{s}` needs arguments; parenthesize the application"),
                        )),
                        None => Err(ParseError::new(ParseErrorKind::UnknownType, span, format!("unknown type `{s}`"))),
                    },
                }
            }
            Tok::TyVar(s) => {
                self.bump();
                Ok(Type::Var(Name::from(s)))
            }
            Tok::Sym("(") => {
                self.bump();
                if self.eat_sym(")") {
                    return Ok(Type::unit());
                }
                let t = self.ty()?;
                if self.eat_sym(",") {
                    let u = self.ty()?;
                    self.expect_sym(")")?;
                    return Ok(Type::pair(t, u));
                }
                self.expect_sym(")")?;
                Ok(t)
            }
            _ => self.unexpected("a type"),
        }
    }

    fn lifetime_start(&self) -> bool {
        match self.peek() {
            Tok::LtVar(_) | Tok::LtId(_) => true,
            Tok::Ident(s) => s == "static",
            Tok::Sym("(") => match self.peek_at(1) {
                Tok::LtVar(_) | Tok::LtId(_) => true,
                Tok::Ident(s) => s == "static",
                _ => false,
            },
            _ => false,
        }
    }

    fn lifetime(&mut self) -> PResult<Lifetime> {
        match self.bump() {
            Tok::LtVar(s) => Ok(Lifetime::Var(Name::from(s))),
            Tok::LtId(s) => Ok(Lifetime::Atom(Name::from(s))),
            Tok::Ident(s) if s == "static" => Ok(Lifetime::Static),
            Tok::Sym("(") => {
                let mut l = self.lifetime()?;
                while self.eat_sym("&") {
                    l = Lifetime::meet(l, self.lifetime()?);
                }
                self.expect_sym(")")?;
                Ok(l)
            }
            _ => {
                self.pos -= 1;
                self.unexpected("a lifetime")
            }
        }
    }

    fn mult(&mut self) -> PResult<Mult> {
        let mut m = self.mult_factor()?;
        while self.eat_sym("*") {
            m = m.times(&self.mult_factor()?);
        }
        Ok(m)
    }

    fn mult_factor(&mut self) -> PResult<Mult> {
        match self.bump() {
            Tok::Int(1) => Ok(Mult::One),
            Tok::Ident(s) if s == "w" => Ok(Mult::Many),
            Tok::MultVar(s) => Ok(Mult::var(&s)),
            _ => {
                self.pos -= 1;
                self.unexpected("a multiplicity `1`, `w` or `%p`")
            }
        }
    }

    fn inst_args(&mut self) -> PResult<Vec<TyArg>> {
        self.expect_sym("@")?;
        self.expect_sym("[")?;
        let mut out = Vec::new();
        if self.eat_sym("]") {
            return Ok(out);
        }
        loop {
            out.push(self.inst_arg()?);
            if self.eat_sym("]") {
                return Ok(out);
            }
            self.expect_sym(",")?;
        }
    }

    fn inst_arg(&mut self) -> PResult<TyArg> {
        if self.eat_sym("_") {
            return Ok(TyArg::Hole);
        }
        if let Tok::Upper(s) = self.peek() {
            if (s == "Mut" || s == "Share") && matches!(self.peek_at(1), Tok::Sym(",") | Tok::Sym("]")) {
                let k = if s == "Mut" { BorrowKind::Mut } else { BorrowKind::Share };
                self.bump();
                return Ok(TyArg::Kind(k));
            }
        }
        match self.peek() {
            Tok::Int(1) | Tok::MultVar(_) => return Ok(TyArg::Mult(self.mult()?)),
            Tok::Ident(s) if s == "w" => return Ok(TyArg::Mult(self.mult()?)),
            _ => {}
        }
        if self.lifetime_start() {
            return Ok(TyArg::Lifetime(self.lifetime()?));
        }
        Ok(TyArg::Type(self.ty()?))
    }

    // ---- terms ----

    fn term(&mut self) -> PResult<Term> {
        let span = self.span();
        let t = match self.peek().clone() {
            Tok::Ident(s) if s == "let" || s == "let1" => {
                self.bump();
                let kind = if s == "let" { LetKind::Rec } else { LetKind::Linear };
                let mut binds: Vec<Binding> = Vec::new();
                loop {
                    let bspan = self.span();
                    let name = self.var_name()?;
                    if binds.iter().any(|b| b.name == name) {
                        return Err(ParseError::new(ParseErrorKind::Syntax, bspan, format!("`{name}` is bound twice in one group")));
                    }
                    let mult = self.opt_mult()?;
                    let ty = if self.eat_sym(":") { Some(self.ty()?) } else { None };
                    self.expect_sym("=")?;
                    let body = self.term()?;
                    binds.push(Binding { name, mult, ty, body, span: bspan });
                    if !self.eat_sym(";") {
                        break;
                    }
                }
                self.expect_ident("in")?;
                let body = self.term()?;
                Term::Let(kind, binds, Box::new(body))
            }
            Tok::Sym("\\") => {
                self.bump();
                let b = self.binder()?;
                self.expect_sym(".")?;
                Term::Lam(b, Box::new(self.term()?))
            }
            Tok::Ident(s) if s == "forall" => {
                self.bump();
                let (k, n) = self.tbinder()?;
                self.expect_sym(".")?;
                Term::TyAbs(k, n, Box::new(self.term()?))
            }
            Tok::Ident(s) if s == "case" => {
                self.bump();
                let scrut = self.term()?;
                self.expect_ident("of")?;
                self.expect_sym("{")?;
                let mut branches = Vec::new();
                loop {
                    if self.peek_sym("}") && !branches.is_empty() {
                        break;
                    }
                    branches.push(self.branch()?);
                    if !self.eat_sym(";") {
                        break;
                    }
                }
                self.expect_sym("}")?;
                Term::Case(Box::new(scrut), branches)
            }
            Tok::Ident(s) if s == "seq" => {
                self.bump();
                let x = self.var_name()?;
                self.expect_ident("in")?;
                Term::Seq(x, Box::new(self.term()?))
            }
            _ => return self.bind_expr(),
        };
        Ok(Term::At(span, Box::new(t)))
    }

    fn starts_term_form(&self) -> bool {
        match self.peek() {
            Tok::Sym("\\") => true,
            Tok::Ident(s) => matches!(s.as_str(), "let" | "let1" | "forall" | "case" | "seq"),
            _ => false,
        }
    }

    fn opt_mult(&mut self) -> PResult<Option<Mult>> {
        if self.eat_sym("[") {
            let m = self.mult()?;
            self.expect_sym("]")?;
            Ok(Some(m))
        } else {
            Ok(None)
        }
    }

    fn binder(&mut self) -> PResult<Binder> {
        if self.eat_sym("(") {
            let name = self.var_name()?;
            let mult = self.opt_mult()?;
            self.expect_sym(":")?;
            let ty = self.ty()?;
            self.expect_sym(")")?;
            return Ok(Binder { name, mult, ty: Some(ty) });
        }
        let name = self.var_name()?;
        let mult = self.opt_mult()?;
        Ok(Binder { name, mult, ty: None })
    }

    fn branch(&mut self) -> PResult<Branch> {
        let span = self.span();
        let (ctor, vars) = match self.peek().clone() {
            Tok::Upper(c) => {
                self.bump();
                let arity = match self.ctors.get(&c) {
                    Some(&n) => n,
                    None => return Err(ParseError::new(ParseErrorKind::UnknownConstructor, span, format!("unknown constructor `{c}`"))),
                };
                let mut vars = Vec::new();
                while matches!(self.peek(), Tok::Ident(_)) {
                    vars.push(self.var_name()?);
                }
                if vars.len() != arity {
                    return Err(ParseError::new(
                        ParseErrorKind::ArityMismatch,
                        span,
                        format!("constructor `{c}` expects {arity} fields, pattern binds {}", vars.len()),
                    ));
                }
                (Name::from(c), vars)
            }
            Tok::Sym("(") => {
                self.bump();
                if self.eat_sym(")") {
                    (Name::from(UNIT), vec![])
                } else {
                    let a = self.var_name()?;
                    self.expect_sym(",")?;
                    let b = self.var_name()?;
                    self.expect_sym(")")?;
                    (Name::from(PAIR), vec![a, b])
                }
            }
            _ => return self.unexpected("a pattern"),
        };
        let mut seen = BTreeSet::new();
        for v in &vars {
            if !seen.insert(v.clone()) {
                return Err(ParseError::new(ParseErrorKind::Syntax, span, format!("`{v}` is bound twice in one pattern")));
            }
        }
        self.expect_sym("->")?;
        let body = self.term()?;
        Ok(Branch { ctor, vars, body })
    }

    fn bind_expr(&mut self) -> PResult<Term> {
        let mut lhs = self.rel_expr()?;
        while self.peek_sym(">>=") {
            let span = self.span();
            self.bump();
            let rhs = if self.starts_term_form() { self.term()? } else { self.rel_expr()? };
            lhs = Term::At(span, Box::new(Term::mo(MonadOp::Bind, vec![lhs, rhs])));
        }
        Ok(lhs)
    }

    fn rel_expr(&mut self) -> PResult<Term> {
        let lhs = self.add_expr()?;
        let op = match self.peek() {
            Tok::Sym("<=") => RelOp::Le,
            Tok::Sym("<") => RelOp::Lt,
            Tok::Sym(">=") => RelOp::Ge,
            Tok::Sym(">") => RelOp::Gt,
            Tok::Sym("==") => RelOp::Eq,
            Tok::Sym("!=") => RelOp::Ne,
            _ => return Ok(lhs),
        };
        let span = self.span();
        self.bump();
        let rhs = self.add_expr()?;
        Ok(Term::At(span, Box::new(Term::op(Op::Rel(op), vec![lhs, rhs]))))
    }

    fn add_expr(&mut self) -> PResult<Term> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("+") => IntOp::Add,
                Tok::Sym("-") => IntOp::Sub,
                _ => return Ok(lhs),
            };
            let span = self.span();
            self.bump();
            let rhs = self.mul_expr()?;
            lhs = Term::At(span, Box::new(Term::op(Op::Int(op), vec![lhs, rhs])));
        }
    }

    fn mul_expr(&mut self) -> PResult<Term> {
        let mut lhs = self.app_expr()?;
        while self.peek_sym("*") {
            let span = self.span();
            self.bump();
            let rhs = self.app_expr()?;
            lhs = Term::At(span, Box::new(Term::op(Op::Int(IntOp::Mul), vec![lhs, rhs])));
        }
        Ok(lhs)
    }

    fn atom_start(&self) -> bool {
        match self.peek() {
            Tok::Ident(s) => !is_keyword(s),
            Tok::Int(_) | Tok::Upper(_) => true,
            Tok::Sym("(") => true,
            _ => false,
        }
    }

    fn saturated_args(&mut self, what: &str, arity: usize, span: Span) -> PResult<Vec<Term>> {
        let mut args = Vec::new();
        for _ in 0..arity {
            if !self.atom_start() {
                return Err(ParseError::new(
                    ParseErrorKind::ArityMismatch,
                    span,
                    format!("{what} expects {arity} argument{}, got {}", if arity == 1 { "" } else { "s" }, args.len()),
                ));
            }
            args.push(self.postfix()?);
        }
        if self.atom_start() {
            return Err(ParseError::new(
                ParseErrorKind::ArityMismatch,
                span,
                format!("{what} expects {arity} argument{}, got more; parenthesize to apply the result", if arity == 1 { "" } else { "s" }),
            ));
        }
        Ok(args)
    }

    fn opt_inst(&mut self) -> PResult<Vec<TyArg>> {
        if self.peek_sym("@") {
            self.inst_args()
        } else {
            Ok(Vec::new())
        }
    }

    fn app_expr(&mut self) -> PResult<Term> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Ident(s) if s == "modifyRef" => {
                self.bump();
                let args = self.saturated_args("modifyRef", 2, span)?;
                let mut it = args.into_iter();
                let (f, r) = (it.next().unwrap(), it.next().unwrap());
                return Ok(Term::At(span, Box::new(expand_modify_ref(f, r))));
            }
            Tok::Ident(s) => {
                if let Some(op) = Op::from_keyword(&s) {
                    self.bump();
                    let inst = self.opt_inst()?;
                    let args = self.saturated_args(&s, op.arity(), span)?;
                    return Ok(Term::At(span, Box::new(Term::Op(op, inst, args))));
                }
                if let Some(op) = MonadOp::from_keyword(&s) {
                    self.bump();
                    let inst = self.opt_inst()?;
                    let args = self.saturated_args(&s, op.arity(), span)?;
                    return Ok(Term::At(span, Box::new(Term::Mo(op, inst, args))));
                }
                if is_keyword(&s) {
                    return self.unexpected("an expression");
                }
            }
            Tok::Upper(c) => {
                let arity = match self.ctors.get(&c) {
                    Some(&n) => n,
                    None => return Err(ParseError::new(ParseErrorKind::UnknownConstructor, span, format!("unknown constructor `{c}`"))),
                };
                self.bump();
                let inst = self.opt_inst()?;
                let args = self.saturated_args(&format!("constructor {c}"), arity, span)?;
                return Ok(Term::At(span, Box::new(Term::Con(Name::from(c), inst, args))));
            }
            _ => {}
        }
        let mut f = self.postfix()?;
        while self.atom_start() {
            let aspan = self.span();
            let a = self.postfix()?;
            f = Term::At(aspan, Box::new(Term::app(f, a)));
        }
        Ok(f)
    }

    fn postfix(&mut self) -> PResult<Term> {
        let mut t = self.atom()?;
        while self.peek_sym("@") {
            let span = self.span();
            let args = self.inst_args()?;
            t = Term::At(span, Box::new(Term::TyApp(Box::new(t), args)));
        }
        Ok(t)
    }

    fn atom(&mut self) -> PResult<Term> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Ident(_) => {
                let x = self.var_name()?;
                Ok(Term::At(span, Box::new(Term::Var(x))))
            }
            Tok::Int(n) => {
                self.bump();
                Ok(Term::Int(n))
            }
            Tok::Upper(c) => {
                self.bump();
                match self.ctors.get(&c) {
                    Some(0) => Ok(Term::At(span, Box::new(Term::Con(Name::from(c), vec![], vec![])))),
                    Some(n) => Err(ParseError::new(
                        ParseErrorKind::ArityMismatch,
                        span,
                        format!("constructor {c} expects {n} argument{}; parenthesize the application", if *n == 1 { "" } else { "s" }),
                    )),
                    None => Err(ParseError::new(ParseErrorKind::UnknownConstructor, span, format!("unknown constructor `{c}`"))),
                }
            }
            Tok::Sym("(") => {
                self.bump();
                if self.eat_sym(")") {
                    return Ok(Term::At(span, Box::new(Term::unit())));
                }
                let t = self.term()?;
                if self.eat_sym(",") {
                    let u = self.term()?;
                    self.expect_sym(")")?;
                    return Ok(Term::At(span, Box::new(Term::pair(t, u))));
                }
                if self.eat_sym(":") {
                    let ty = self.ty()?;
                    self.expect_sym(")")?;
                    return Ok(Term::At(span, Box::new(Term::Ann(Box::new(t), ty))));
                }
                self.expect_sym(")")?;
                Ok(t)
            }
            _ => self.unexpected("an expression"),
        }
    }
}

fn pick_name(base: &str, avoid: &BTreeSet<Name>) -> Name {
    if !avoid.contains(base) {
        return Name::from(base);
    }
    (1..).map(|k| format!("{base}{k}")).find(|c| !avoid.contains(c.as_str())).map(Name::from).unwrap()
}

/// `modifyRef f r` updates the referent with `f`, forcing the new content
/// before it is stored, and returns the borrower.
///
/// ```text
/// updateRef (\a. let1 b = f a in seq b in pure ((), b)) r
///   >>= (\p. case p of { (u, r2) -> case u of { () -> pure r2 } })
/// ```
pub fn expand_modify_ref(f: Term, r: Term) -> Term {
    let mut avoid = free_vars(&f);
    avoid.extend(free_vars(&r));
    let a = pick_name("a", &avoid);
    let b = pick_name("b", &avoid);
    let p = pick_name("p", &avoid);
    let u = pick_name("u", &avoid);
    let r2 = pick_name("r2", &avoid);
    let update = Term::lam(
        a.clone(),
        Term::Let(
            LetKind::Linear,
            vec![Binding { name: b.clone(), mult: None, ty: None, body: Term::app(f, Term::Var(a)), span: Span::default() }],
            Box::new(Term::Seq(
                b.clone(),
                Box::new(Term::mo(MonadOp::Pure, vec![Term::pair(Term::unit(), Term::Var(b))])),
            )),
        ),
    );
    let cont = Term::lam(
        p.clone(),
        Term::Case(
            Box::new(Term::Var(p)),
            vec![Branch {
                ctor: Name::from(PAIR),
                vars: vec![u.clone(), r2.clone()],
                body: Term::Case(
                    Box::new(Term::Var(u)),
                    vec![Branch { ctor: Name::from(UNIT), vars: vec![], body: Term::mo(MonadOp::Pure, vec![Term::Var(r2)]) }],
                ),
            }],
        ),
    );
    Term::mo(MonadOp::Bind, vec![Term::mo(MonadOp::UpdateRef, vec![update, r]), cont])
}
