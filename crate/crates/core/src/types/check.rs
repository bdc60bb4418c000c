use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::order::mult_leq;
use super::signature::{sig_instantiate, sig_params, ParamKind, SideCond, SigOp, SignatureError};
use super::subtype::{Metas, Subtyper};
use super::ty::*;
use crate::syntax::{Binder, Branch, Binding, DataDecl, LetKind, Name, Program, Span, Term, TyArg};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum TypeErrorKind {
    LinearUsedTwice,
    LinearUnused,
    Mismatch,
    SideConditionFailed,
    UnboundVariable,
}

impl TypeErrorKind {
    pub fn code(self) -> &'static str {
        match self {
            TypeErrorKind::LinearUsedTwice => "LinearUsedTwice",
            TypeErrorKind::LinearUnused => "LinearUnused",
            TypeErrorKind::Mismatch => "Mismatch",
            TypeErrorKind::SideConditionFailed => "SideConditionFailed",
            TypeErrorKind::UnboundVariable => "UnboundVariable",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TypeError {
    pub kind: TypeErrorKind,
    pub message: String,
    pub span: Span,
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.span, self.kind.code(), self.message)
    }
}

impl std::error::Error for TypeError {}

/// A program accepted by the checker together with its type.
#[derive(Clone, Debug)]
pub struct TypedProgram {
    pub program: Program,
    pub ty: Type,
}

/// Checks a closed program in the empty context.
pub fn type_check(p: &Program) -> Result<TypedProgram, Vec<TypeError>> {
    let mut c = Checker::new(p);
    let ty = c.synth(&p.body).ok();
    c.finish();
    if !c.errors.is_empty() {
        return Err(c.errors);
    }
    let ty = c.metas.zonk(&ty.expect("a fatal error is always recorded"));
    Ok(TypedProgram { program: p.clone(), ty })
}

/// How many times each variable is consumed. Absent means zero.
type Usage = BTreeMap<Name, Mult>;

fn add_usage(a: &mut Usage, b: Usage) {
    for (x, m) in b {
        match a.get_mut(&x) {
            Some(n) => *n = Mult::Many,
            None => {
                a.insert(x, m);
            }
        }
    }
}

fn scale_usage(m: &Mult, u: Usage) -> Usage {
    u.into_iter().map(|(x, n)| (x, m.times(&n))).collect()
}

/// Raised after the error has been recorded, when no type can be produced.
struct Fatal;

type R<T> = Result<T, Fatal>;

struct Escape {
    skolem: Name,
    watched: Vec<Type>,
    span: Span,
}

struct Checker<'p> {
    decls: &'p [DataDecl],
    prog: &'p Program,
    metas: Metas,
    sides: Vec<(SigOp, SideCond, Span)>,
    escapes: Vec<Escape>,
    env: Vec<(Name, Mult, Type)>,
    /// Source binder names of type abstractions and what they stand for.
    tyscope: Vec<(BinderKind, Name, TyArgValue)>,
    errors: Vec<TypeError>,
    span: Span,
}

fn is_lambda_like(t: &Term) -> bool {
    matches!(t.peel(), Term::Lam(..) | Term::TyAbs(..))
}

/// Argument indices with lambdas last, so that their parameter types are
/// as determined as possible when they are checked.
fn arg_order(args: &[Term]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..args.len()).filter(|&i| !is_lambda_like(&args[i])).collect();
    idx.extend((0..args.len()).filter(|&i| is_lambda_like(&args[i])));
    idx
}

fn mentions(t: &Type, n: &Name) -> bool {
    let mut found = false;
    t.for_each_lifetime(&mut |l| {
        if l.atoms().iter().any(|a| matches!(a, LtAtom::Id(x) | LtAtom::Var(x) if x == n)) {
            found = true;
        }
    });
    found || mentions_ty(t, n)
}

fn mentions_ty(t: &Type, n: &Name) -> bool {
    match t {
        Type::Var(x) => x == n,
        Type::Fun(a, m, b) => matches!(m, Mult::Prod(v) if v.contains(n)) || mentions_ty(a, n) || mentions_ty(b, n),
        Type::Forall(_, _, b) | Type::Ref(b) | Type::Borrow(_, _, b) | Type::Lend(_, b) | Type::BO(_, b) => mentions_ty(b, n),
        Type::Data(_, args) => args.iter().any(|a| mentions_ty(a, n)),
        _ => false,
    }
}

impl<'p> Checker<'p> {
    fn new(prog: &'p Program) -> Self {
        Checker {
            decls: &prog.data_decls,
            prog,
            metas: Metas::default(),
            sides: Vec::new(),
            escapes: Vec::new(),
            env: Vec::new(),
            tyscope: Vec::new(),
            errors: Vec::new(),
            span: Span { line: 1, col: 1 },
        }
    }

    fn error(&mut self, kind: TypeErrorKind, message: impl Into<String>) {
        self.error_at(kind, message, self.span);
    }

    fn error_at(&mut self, kind: TypeErrorKind, message: impl Into<String>, span: Span) {
        self.errors.push(TypeError { kind, message: message.into(), span });
    }

    fn fatal<T>(&mut self, kind: TypeErrorKind, message: impl Into<String>) -> R<T> {
        self.error(kind, message);
        Err(Fatal)
    }

    fn show(&self, t: &Type) -> String {
        self.metas.zonk(t).to_string()
    }

    /// Records a mismatch unless `t ≤ u`.
    fn sub(&mut self, t: &Type, u: &Type) -> bool {
        self.metas.span = self.span;
        let ok = Subtyper::new(self.decls, &mut self.metas).sub(t, u);
        if !ok {
            let msg = format!("expected `{}`, found `{}`", self.show(u), self.show(t));
            self.error(TypeErrorKind::Mismatch, msg);
        }
        ok
    }

    fn lookup(&self, x: &Name) -> Option<&(Name, Mult, Type)> {
        self.env.iter().rev().find(|(n, _, _)| n == x)
    }

    fn declared_mult(&self, x: &Name) -> Mult {
        self.lookup(x).map(|(_, m, _)| m.clone()).unwrap_or(Mult::One)
    }

    /// Pops `x` and checks its consumption against its multiplicity.
    fn close(&mut self, x: &Name, usage: &mut Usage) {
        let (_, declared, _) = self.env.pop().expect("binder stack underflow");
        match usage.remove(x) {
            None if declared != Mult::Many => {
                self.error(TypeErrorKind::LinearUnused, format!("`{x}` has multiplicity {declared} but is never used"));
            }
            Some(u) if !mult_leq(&u, &declared) => {
                self.error(
                    TypeErrorKind::LinearUsedTwice,
                    format!("`{x}` has multiplicity {declared} but is used {}", if u == Mult::Many { "more than once".to_string() } else { format!("at {u}") }),
                );
            }
            _ => {}
        }
    }

    /// Joins the consumption of case branches. A variable that is not
    /// unrestricted must be consumed alike on every branch.
    fn join(&mut self, us: Vec<Usage>) -> Usage {
        let keys: BTreeSet<Name> = us.iter().flat_map(|u| u.keys().cloned()).collect();
        let mut out = Usage::new();
        for x in keys {
            let vals: Vec<Option<&Mult>> = us.iter().map(|u| u.get(&x)).collect();
            if vals.iter().all(|v| *v == vals[0]) {
                out.insert(x, vals[0].unwrap().clone());
                continue;
            }
            if self.declared_mult(&x) != Mult::Many && vals.iter().any(|v| v.is_none()) {
                self.error(TypeErrorKind::LinearUnused, format!("`{x}` is consumed on some branches but not on others"));
            }
            let present: Vec<&Mult> = vals.iter().flatten().copied().collect();
            let m = if present.iter().all(|m| *m == present[0]) { present[0].clone() } else { Mult::Many };
            out.insert(x, m);
        }
        out
    }

    // ---- annotations ----

    fn scope_lookup(&self, kind: BinderKind, n: &Name) -> Option<&TyArgValue> {
        self.tyscope.iter().rev().find(|(k, m, _)| *k == kind && m == n).map(|(_, _, v)| v)
    }

    fn resolve_lifetime(&self, l: &Lifetime, bound: &[(BinderKind, Name)]) -> Result<Lifetime, String> {
        let mut err = None;
        let out = l.map_leaves(&mut |leaf| {
            let (kind, n) = match leaf {
                Lifetime::Var(n) => (BinderKind::Lifetime, n),
                Lifetime::Atom(n) => (BinderKind::LifetimeId, n),
                _ => return None,
            };
            if bound.iter().any(|(k, m)| *k == kind && m == n) {
                return None;
            }
            match self.scope_lookup(kind, n) {
                Some(TyArgValue::Lifetime(v)) => Some(v.clone()),
                _ => {
                    err = Some(format!("unbound lifetime `{leaf}`"));
                    None
                }
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }

    fn resolve_mult(&self, m: &Mult, bound: &[(BinderKind, Name)]) -> Result<Mult, String> {
        match m {
            Mult::Prod(vs) => {
                let mut out = Mult::One;
                for v in vs {
                    let f = if bound.iter().any(|(k, n)| *k == BinderKind::Mult && n == v) {
                        Mult::Prod(vec![v.clone()])
                    } else {
                        match self.scope_lookup(BinderKind::Mult, v) {
                            Some(TyArgValue::Mult(r)) => r.clone(),
                            _ => return Err(format!("unbound multiplicity `%{v}`")),
                        }
                    };
                    out = out.times(&f);
                }
                Ok(out)
            }
            m => Ok(m.clone()),
        }
    }

    fn resolve_type(&self, t: &Type, bound: &mut Vec<(BinderKind, Name)>) -> Result<Type, String> {
        Ok(match t {
            Type::Forall(k, n, b) => {
                bound.push((*k, n.clone()));
                let r = self.resolve_type(b, bound);
                bound.pop();
                Type::Forall(*k, n.clone(), Box::new(r?))
            }
            Type::Var(n) => {
                if bound.iter().any(|(k, m)| *k == BinderKind::Type && m == n) {
                    t.clone()
                } else {
                    match self.scope_lookup(BinderKind::Type, n) {
                        Some(TyArgValue::Type(v)) => v.clone(),
                        _ => return Err(format!("unbound type variable `#{n}`")),
                    }
                }
            }
            Type::Fun(a, m, b) => Type::Fun(Box::new(self.resolve_type(a, bound)?), self.resolve_mult(m, bound)?, Box::new(self.resolve_type(b, bound)?)),
            Type::Data(n, args) => Type::Data(n.clone(), args.iter().map(|a| self.resolve_type(a, bound)).collect::<Result<_, _>>()?),
            Type::Int | Type::Linearly | Type::Meta(_) => t.clone(),
            Type::Ref(a) => Type::Ref(Box::new(self.resolve_type(a, bound)?)),
            Type::Now(l) => Type::Now(self.resolve_lifetime(l, bound)?),
            Type::End(l) => Type::End(self.resolve_lifetime(l, bound)?),
            Type::Borrow(k, l, a) => Type::Borrow(*k, self.resolve_lifetime(l, bound)?, Box::new(self.resolve_type(a, bound)?)),
            Type::Lend(l, a) => Type::Lend(self.resolve_lifetime(l, bound)?, Box::new(self.resolve_type(a, bound)?)),
            Type::BO(l, a) => Type::BO(self.resolve_lifetime(l, bound)?, Box::new(self.resolve_type(a, bound)?)),
        })
    }

    fn annotation(&mut self, t: &Type) -> R<Type> {
        match self.resolve_type(t, &mut Vec::new()) {
            Ok(t) => Ok(t),
            Err(e) => self.fatal(TypeErrorKind::Mismatch, e),
        }
    }

    /// Resolves one instantiation argument for a parameter of kind `kind`;
    /// holes become metas.
    fn ty_arg(&mut self, a: &TyArg, kind: ParamKind) -> R<TyArgValue> {
        let v = match (a, kind) {
            (TyArg::Hole, ParamKind::Type) => TyArgValue::Type(self.metas.fresh_type()),
            (TyArg::Hole, ParamKind::Lifetime | ParamKind::LifetimeId) => TyArgValue::Lifetime(self.metas.fresh_lifetime()),
            (TyArg::Hole, ParamKind::Kind) => TyArgValue::Kind(self.metas.fresh_kind()),
            (TyArg::Type(t), _) => TyArgValue::Type(self.annotation(t)?),
            (TyArg::Lifetime(l), _) => match self.resolve_lifetime(l, &[]) {
                Ok(l) => TyArgValue::Lifetime(l),
                Err(e) => return self.fatal(TypeErrorKind::Mismatch, e),
            },
            (TyArg::Mult(m), _) => match self.resolve_mult(m, &[]) {
                Ok(m) => TyArgValue::Mult(m),
                Err(e) => return self.fatal(TypeErrorKind::Mismatch, e),
            },
            (TyArg::Kind(k), _) => TyArgValue::Kind(*k),
        };
        Ok(v)
    }

    // ---- terms ----

    fn synth(&mut self, t: &Term) -> R<Type> {
        let (ty, usage) = self.infer(t, None)?;
        debug_assert!(usage.is_empty() || !self.env.is_empty() || !self.errors.is_empty());
        Ok(ty)
    }

    fn check(&mut self, t: &Term, expected: &Type) -> R<Usage> {
        Ok(self.infer(t, Some(expected))?.1)
    }

    /// Synthesizes the type of `t`, or checks it against `expected` when
    /// given. Returns the type and the consumption of free variables.
    fn infer(&mut self, t: &Term, expected: Option<&Type>) -> R<(Type, Usage)> {
        if let Term::At(span, inner) = t {
            let saved = std::mem::replace(&mut self.span, *span);
            let r = self.infer(inner, expected);
            self.span = saved;
            return r;
        }
        if let Some(e) = expected {
            if let Type::Forall(k, n, body) = self.metas.zonk(e) {
                return self.generalize(t, k, n, &body, e);
            }
        }
        match t {
            Term::At(..) => unreachable!(),
            Term::Var(x) => {
                let Some((_, _, ty)) = self.lookup(x).cloned() else {
                    return self.fatal(TypeErrorKind::UnboundVariable, format!("unbound variable `{x}`"));
                };
                let usage = Usage::from([(x.clone(), Mult::One)]);
                self.finish_infer(ty, usage, expected)
            }
            Term::Int(_) => self.finish_infer(Type::Int, Usage::new(), expected),
            Term::Seq(x, body) => {
                if self.lookup(x).is_none() {
                    return self.fatal(TypeErrorKind::UnboundVariable, format!("unbound variable `{x}`"));
                }
                self.infer(body, expected)
            }
            Term::Lam(b, body) => self.lambda(b, body, expected),
            Term::App(f, a) => {
                let (fty, mut uf) = self.infer(f, None)?;
                let fty = self.instantiate_implicit(fty);
                let (arg, mu, res) = match self.metas.zonk(&fty) {
                    Type::Fun(a, m, r) => (*a, m, *r),
                    Type::Meta(_) => {
                        let (a, r) = (self.metas.fresh_type(), self.metas.fresh_type());
                        let f = Type::lin(a.clone(), r.clone());
                        self.sub(&fty, &f);
                        (a, Mult::One, r)
                    }
                    other => return self.fatal(TypeErrorKind::Mismatch, format!("applying a non-function of type `{other}`")),
                };
                let ua = self.check(a, &arg)?;
                add_usage(&mut uf, scale_usage(&mu, ua));
                self.finish_infer(res, uf, expected)
            }
            Term::Let(kind, binds, body) => self.let_(*kind, binds, body, expected),
            Term::Con(c, inst, args) => self.con(c, inst, args, expected),
            Term::Case(scrut, branches) => self.case(scrut, branches, expected),
            Term::Op(op, inst, args) => self.op_app(SigOp::Op(*op), inst, args, expected),
            Term::Mo(op, inst, args) => self.op_app(SigOp::Mo(*op), inst, args, expected),
            Term::TyAbs(k, n, body) => {
                let (rigid, v) = self.metas.rigid(*k, n);
                self.tyscope.push((*k, n.clone(), v));
                let r = self.infer(body, None);
                self.tyscope.pop();
                let (ty, usage) = r?;
                let ty = Type::Forall(*k, rigid, Box::new(self.metas.zonk(&ty)));
                self.finish_infer(ty, usage, expected)
            }
            Term::TyApp(f, args) => {
                let (mut ty, usage) = self.infer(f, None)?;
                for a in args {
                    let Type::Forall(k, n, body) = self.metas.zonk(&ty) else {
                        return self.fatal(TypeErrorKind::Mismatch, format!("type application to non-polymorphic `{}`", self.show(&ty)));
                    };
                    let v = match (a, k) {
                        (TyArg::Hole, BinderKind::Mult) => {
                            return self.fatal(TypeErrorKind::Mismatch, "a multiplicity argument cannot be left as `_`");
                        }
                        (TyArg::Hole, BinderKind::Type) => TyArgValue::Type(self.metas.fresh_type()),
                        (TyArg::Hole, _) => TyArgValue::Lifetime(self.metas.fresh_lifetime()),
                        (TyArg::Type(_), BinderKind::Type) | (TyArg::Lifetime(_), BinderKind::Lifetime | BinderKind::LifetimeId) | (TyArg::Mult(_), BinderKind::Mult) => {
                            let pk = match k {
                                BinderKind::Type => ParamKind::Type,
                                _ => ParamKind::Lifetime,
                            };
                            self.ty_arg(a, pk)?
                        }
                        _ => return self.fatal(TypeErrorKind::Mismatch, format!("type argument does not fit binder `{}{n}`", k.sigil())),
                    };
                    ty = body.subst(&TySubst::single(k, n, v));
                }
                self.finish_infer(ty, usage, expected)
            }
            Term::Ann(inner, ann) => {
                let ann = self.annotation(ann)?;
                let usage = self.check(inner, &ann)?;
                self.finish_infer(ann, usage, expected)
            }
        }
    }

    fn finish_infer(&mut self, ty: Type, usage: Usage, expected: Option<&Type>) -> R<(Type, Usage)> {
        match expected {
            Some(e) => {
                self.sub(&ty, e);
                Ok((e.clone(), usage))
            }
            None => Ok((ty, usage)),
        }
    }

    /// Instantiates leading quantifiers of a synthesized function type.
    fn instantiate_implicit(&mut self, mut ty: Type) -> Type {
        loop {
            match self.metas.zonk(&ty) {
                Type::Forall(k, n, body) => {
                    let v = match k {
                        BinderKind::Type => TyArgValue::Type(self.metas.fresh_type()),
                        BinderKind::Mult => TyArgValue::Mult(Mult::One),
                        _ => TyArgValue::Lifetime(self.metas.fresh_lifetime()),
                    };
                    ty = body.subst(&TySubst::single(k, n, v));
                }
                other => return other,
            }
        }
    }

    /// Checks `t` against `forall n. body` by checking it against `body`
    /// with `n` replaced by a fresh rigid name.
    fn generalize(&mut self, t: &Term, k: BinderKind, n: Name, body: &Type, whole: &Type) -> R<(Type, Usage)> {
        let (rigid, v) = self.metas.rigid(k, &n);
        let inst = body.subst(&TySubst::single(k, n, v.clone()));
        let mut watched = vec![whole.clone()];
        watched.extend(self.env.iter().map(|(_, _, t)| t.clone()));
        self.escapes.push(Escape { skolem: rigid, watched, span: self.span });
        let usage = match t.peel() {
            Term::TyAbs(k2, src, inner) if *k2 == k => {
                self.tyscope.push((k, src.clone(), v));
                let r = self.check(inner, &inst);
                self.tyscope.pop();
                r?
            }
            _ => self.check(t, &inst)?,
        };
        Ok((whole.clone(), usage))
    }

    fn lambda(&mut self, b: &Binder, body: &Term, expected: Option<&Type>) -> R<(Type, Usage)> {
        let ann = match &b.ty {
            Some(t) => Some(self.annotation(t)?),
            None => None,
        };
        let ann_mult = match &b.mult {
            Some(m) => match self.resolve_mult(m, &[]) {
                Ok(m) => Some(m),
                Err(e) => return self.fatal(TypeErrorKind::Mismatch, e),
            },
            None => None,
        };
        let exp = expected.map(|e| self.metas.zonk(e));
        if let Some(Type::Fun(a, mu, r)) = &exp {
            let param = match ann {
                Some(p) => {
                    self.sub(a, &p);
                    p
                }
                None => (**a).clone(),
            };
            let m = match ann_mult {
                Some(m) => {
                    if !mult_leq(&m, mu) {
                        self.error(TypeErrorKind::Mismatch, format!("binder `{}` has multiplicity {m}, but {mu} is expected", b.name));
                    }
                    m
                }
                None => mu.clone(),
            };
            self.env.push((b.name.clone(), m, param));
            let r = self.check(body, r);
            let mut usage = match r {
                Ok(u) => u,
                Err(f) => {
                    self.env.pop();
                    return Err(f);
                }
            };
            self.close(&b.name, &mut usage);
            return Ok((expected.unwrap().clone(), usage));
        }
        let param = ann.unwrap_or_else(|| self.metas.fresh_type());
        let m = ann_mult.unwrap_or(Mult::One);
        self.env.push((b.name.clone(), m.clone(), param.clone()));
        let r = self.infer(body, None);
        let (rty, mut usage) = match r {
            Ok(x) => x,
            Err(f) => {
                self.env.pop();
                return Err(f);
            }
        };
        self.close(&b.name, &mut usage);
        self.finish_infer(Type::fun(param, m, rty), usage, expected)
    }

    fn let_(&mut self, kind: LetKind, binds: &[Binding], body: &Term, expected: Option<&Type>) -> R<(Type, Usage)> {
        let mut usage = Usage::new();
        let mut declared = Vec::new();
        match kind {
            LetKind::Linear => {
                for b in binds {
                    let m = match &b.mult {
                        Some(m) => match self.resolve_mult(m, &[]) {
                            Ok(m) => m,
                            Err(e) => return self.fatal(TypeErrorKind::Mismatch, e),
                        },
                        None => Mult::One,
                    };
                    let saved = std::mem::replace(&mut self.span, b.span);
                    let r = match &b.ty {
                        Some(t) => self.annotation(t).and_then(|t| Ok((t.clone(), self.check(&b.body, &t)?))),
                        None => self.infer(&b.body, None),
                    };
                    self.span = saved;
                    let (ty, u) = r?;
                    add_usage(&mut usage, scale_usage(&m, u));
                    declared.push((b.name.clone(), m, ty));
                }
                self.env.extend(declared.iter().cloned());
            }
            LetKind::Rec => {
                for b in binds {
                    if matches!(&b.mult, Some(m) if *m != Mult::Many) {
                        self.error_at(TypeErrorKind::Mismatch, format!("`let` binds `{}` unrestrictedly; use `let1` for other multiplicities", b.name), b.span);
                    }
                    let ty = match &b.ty {
                        Some(t) => self.annotation(t)?,
                        None => self.metas.fresh_type(),
                    };
                    declared.push((b.name.clone(), Mult::Many, ty));
                }
                self.env.extend(declared.iter().cloned());
                for (b, (_, _, ty)) in binds.iter().zip(declared.clone()) {
                    let saved = std::mem::replace(&mut self.span, b.span);
                    let r = self.check(&b.body, &ty);
                    self.span = saved;
                    let mut u = match r {
                        Ok(u) => u,
                        Err(f) => {
                            self.env.truncate(self.env.len() - declared.len());
                            return Err(f);
                        }
                    };
                    for (x, _, _) in &declared {
                        u.remove(x);
                    }
                    add_usage(&mut usage, scale_usage(&Mult::Many, u));
                }
            }
        }
        let r = self.infer(body, expected);
        let (ty, mut ub) = match r {
            Ok(x) => x,
            Err(f) => {
                self.env.truncate(self.env.len() - declared.len());
                return Err(f);
            }
        };
        for (x, _, _) in declared.iter().rev() {
            self.close(x, &mut ub);
        }
        add_usage(&mut usage, ub);
        Ok((ty, usage))
    }

    fn con(&mut self, c: &Name, inst: &[TyArg], args: &[Term], expected: Option<&Type>) -> R<(Type, Usage)> {
        let Some((decl, _, ctor)) = self.prog.ctor(c) else {
            return self.fatal(TypeErrorKind::Mismatch, format!("unknown constructor `{c}`"));
        };
        let (decl, ctor) = (decl.clone(), ctor.clone());
        if !inst.is_empty() && inst.len() != decl.params.len() {
            return self.fatal(
                TypeErrorKind::Mismatch,
                format!("`{c}` takes {} type arguments, got {}", decl.params.len(), inst.len()),
            );
        }
        let mut params = Vec::new();
        for i in 0..decl.params.len() {
            let v = match inst.get(i) {
                None => self.metas.fresh_type(),
                Some(a) => match self.ty_arg(a, ParamKind::Type)? {
                    TyArgValue::Type(t) => t,
                    _ => return self.fatal(TypeErrorKind::Mismatch, format!("type arguments of `{c}` must be types")),
                },
            };
            params.push(v);
        }
        let result = Type::Data(decl.name.clone(), params.clone());
        if let Some(e) = expected {
            self.sub(&result, e);
        }
        let fields = decl.instantiate_fields(&ctor, &params);
        let mut usage = Usage::new();
        for i in arg_order(args) {
            let fty = self.metas.zonk(&fields[i].1);
            let u = self.check(&args[i], &fty)?;
            add_usage(&mut usage, scale_usage(&fields[i].0, u));
        }
        Ok((expected.cloned().unwrap_or(result), usage))
    }

    fn case(&mut self, scrut: &Term, branches: &[Branch], expected: Option<&Type>) -> R<(Type, Usage)> {
        let (sty, mut usage) = self.infer(scrut, None)?;
        let mut sty = self.metas.zonk(&sty);
        if let Type::Meta(_) = sty {
            let Some((decl, _, _)) = branches.first().and_then(|b| self.prog.ctor(&b.ctor)) else {
                return self.fatal(TypeErrorKind::Mismatch, "cannot determine the scrutinee's data type");
            };
            let decl = decl.clone();
            let params = decl.params.iter().map(|_| self.metas.fresh_type()).collect();
            let d = Type::Data(decl.name.clone(), params);
            self.sub(&sty, &d);
            sty = d;
        }
        let (wrap, dname, dargs) = match &sty {
            Type::Data(n, a) => (None, n.clone(), a.clone()),
            Type::Borrow(k, l, inner) => match self.metas.zonk(inner) {
                Type::Data(n, a) => (Some((*k, l.clone())), n, a),
                other => {
                    return self.fatal(TypeErrorKind::Mismatch, format!("case on a borrower of `{other}`, which is not a data type"));
                }
            },
            other => return self.fatal(TypeErrorKind::Mismatch, format!("case on `{other}`, which is not a data type")),
        };
        let Some(decl) = self.prog.decl(&dname).cloned() else {
            return self.fatal(TypeErrorKind::Mismatch, format!("unknown data type `{dname}`"));
        };
        let mut seen = BTreeSet::new();
        for b in branches {
            if decl.ctor(&b.ctor).is_none() {
                return self.fatal(TypeErrorKind::Mismatch, format!("constructor `{}` does not belong to `{dname}`", b.ctor));
            }
            if !seen.insert(b.ctor.clone()) {
                return self.fatal(TypeErrorKind::Mismatch, format!("duplicate branch for `{}`", b.ctor));
            }
        }
        if let Some(missing) = decl.ctors.iter().find(|c| !seen.contains(&c.name)) {
            return self.fatal(TypeErrorKind::Mismatch, format!("non-exhaustive case: no branch for `{}`", missing.name));
        }
        let mut result = expected.cloned();
        let mut usages = Vec::new();
        for b in branches {
            let (_, ctor) = decl.ctor(&b.ctor).unwrap();
            let fields = decl.instantiate_fields(ctor, &dargs);
            for (x, (m, t)) in b.vars.iter().zip(fields) {
                let t = match &wrap {
                    Some((k, l)) => Type::Borrow(*k, l.clone(), Box::new(t)),
                    None => t,
                };
                self.env.push((x.clone(), m, t));
            }
            let r = self.infer(&b.body, result.as_ref());
            let (ty, mut u) = match r {
                Ok(x) => x,
                Err(f) => {
                    self.env.truncate(self.env.len() - b.vars.len());
                    return Err(f);
                }
            };
            for x in b.vars.iter().rev() {
                self.close(x, &mut u);
            }
            if result.is_none() {
                result = Some(ty);
            }
            usages.push(u);
        }
        let joined = self.join(usages);
        add_usage(&mut usage, joined);
        Ok((result.unwrap(), usage))
    }

    fn op_app(&mut self, op: SigOp, inst: &[TyArg], args: &[Term], expected: Option<&Type>) -> R<(Type, Usage)> {
        let params = sig_params(op);
        if !inst.is_empty() && inst.len() != params.len() {
            return self.fatal(TypeErrorKind::Mismatch, format!("`{op}` takes {} type arguments, got {}", params.len(), inst.len()));
        }
        let mut vals = Vec::new();
        for (i, p) in params.iter().enumerate() {
            let v = match inst.get(i) {
                Some(a) => self.ty_arg(a, *p)?,
                None => self.ty_arg(&TyArg::Hole, *p)?,
            };
            vals.push(v);
        }
        let (sig, side) = match sig_instantiate(op, &vals) {
            Ok(x) => x,
            Err(SignatureError::BadInstantiation(_, m) | SignatureError::SideConditionFailed(_, m)) => {
                return self.fatal(TypeErrorKind::Mismatch, format!("bad instantiation of `{op}`: {m}"));
            }
        };
        if let Some(e) = expected {
            self.sub(&sig.result, e);
        }
        let mut usage = Usage::new();
        for i in arg_order(args) {
            let aty = self.metas.zonk(&sig.args[i]);
            let u = self.check(&args[i], &aty)?;
            add_usage(&mut usage, u);
        }
        if let Some(c) = side {
            self.side_condition(op, c);
        }
        Ok((expected.cloned().unwrap_or(sig.result), usage))
    }

    fn zonk_side(&self, c: &SideCond) -> SideCond {
        c.map(&|t| self.metas.zonk(t), &|l| self.metas.zonk_lifetime(l))
    }

    fn side_condition(&mut self, op: SigOp, c: SideCond) {
        let c = self.zonk_side(&c);
        match c.holds() {
            Some(true) => {}
            Some(false) => self.error(TypeErrorKind::SideConditionFailed, format!("`{op}`: {}", c.describe())),
            None => {
                if let SideCond::Leq(a, b) = &c {
                    self.metas.span = self.span;
                    self.metas.lifetime_leq(a, b);
                }
                self.sides.push((op, c, self.span));
            }
        }
    }

    /// Settles everything that was postponed until the whole program was seen.
    fn finish(&mut self) {
        let (failed, open) = self.metas.solve_deferred(true);
        for (a, b, span) in failed.into_iter().chain(open) {
            self.error_at(TypeErrorKind::Mismatch, format!("lifetime `{a}` does not outlive `{b}`"), span);
        }
        for (op, c, span) in std::mem::take(&mut self.sides) {
            let c = self.zonk_side(&c);
            match c.holds() {
                Some(true) => {}
                Some(false) => self.error_at(TypeErrorKind::SideConditionFailed, format!("`{op}`: {}", c.describe()), span),
                None => self.error_at(
                    TypeErrorKind::Mismatch,
                    format!("`{op}`: cannot decide whether {}; add an instantiation `@[..]`", c.describe()),
                    span,
                ),
            }
        }
        for e in std::mem::take(&mut self.escapes) {
            if e.watched.iter().any(|t| mentions(&self.metas.zonk(t), &e.skolem)) {
                self.error_at(TypeErrorKind::Mismatch, format!("`{}` escapes its scope", e.skolem.base()), e.span);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_program;

    fn check(src: &str) -> Result<Type, Vec<TypeError>> {
        type_check(&parse_program(src).unwrap()).map(|t| t.ty)
    }

    fn first_error(src: &str) -> TypeErrorKind {
        match check(src) {
            Ok(t) => panic!("`{src}` checked at {t}"),
            Err(es) => es[0].kind,
        }
    }

    #[test]
    fn literal() {
        assert_eq!(check("42").unwrap(), Type::Int);
    }

    #[test]
    fn pair_duplicates_linear_variable() {
        assert_eq!(first_error("((\\x. (x, x)) : Int -o (Int, Int))"), TypeErrorKind::LinearUsedTwice);
        assert!(check("((\\x. (x, x)) : Int -> (Int, Int))").is_ok());
    }

    #[test]
    fn unused_linear_binder() {
        assert_eq!(first_error("((\\x. 1) : Int -o Int)"), TypeErrorKind::LinearUnused);
        assert!(check("((\\x. 1) : Int -> Int)").is_ok());
    }

    #[test]
    fn unbound_variable() {
        assert_eq!(first_error("y"), TypeErrorKind::UnboundVariable);
    }

    #[test]
    fn reduction_example_checks_at_ur_int() {
        let src = "linearly (\\li. case withLinearly li of {(li1, li2) -> case withLinearly li2 of {(li3, li4) -> \
            let1 rf = newRef li1 3 in move (newLifetime li3 (forall ^i. \\now. \
            case borrow @[^i, _] li4 rf of {(m, l) -> case execBO now (modifyRef (\\a. a + 4) m) of {(now2, m2) -> \
            case endLifetime now2 of {Ur e -> case consume m2 of {() -> freeRef (reclaim l e)}}}}))}})";
        assert_eq!(check(src).unwrap(), Type::ur(Type::Int));
    }

    #[test]
    fn borrower_case_distributes() {
        let src = "linearly (\\li. case withLinearly li of {(l1, l2) -> case withLinearly l2 of {(l3, l4) -> \
            move (newLifetime l1 (forall ^i. \\now. case borrow @[^i, _] l3 (1, 2) of {(m, l) -> \
            case m of {(a, b) -> let1 k : Mut ^i Int = a in case consume k of {() -> case consume b of {() -> \
            case endLifetime now of {Ur e -> case reclaim l e of {(x, y) -> case consume l4 of {() -> x + y}}}}}}}))}})";
        assert_eq!(check(src).unwrap(), Type::ur(Type::Int));
    }

    #[test]
    fn skolem_escape() {
        let src = "linearly (\\li. case newLifetime li (forall ^i. \\now. Ur now) of {Ur n -> move 1})";
        let errs = check(src).unwrap_err();
        assert!(errs.iter().any(|e| e.message.contains("escapes")), "{errs:?}");
    }

    #[test]
    fn move_needs_copyable() {
        assert_eq!(first_error("linearly (\\li. move li)"), TypeErrorKind::SideConditionFailed);
    }

    #[test]
    fn recursion_is_typeable() {
        assert!(check("let f : Int -> Int = \\x. f x in f 1").is_ok());
    }

    #[test]
    fn branches_must_agree_on_linear_use() {
        let src = "((\\x. \\b. case b of {True -> x ; False -> 0}) : Int -o Bool -o Int)";
        assert_eq!(first_error(src), TypeErrorKind::LinearUnused);
    }

    #[test]
    fn non_exhaustive_case() {
        assert_eq!(first_error("case True of {True -> 1}"), TypeErrorKind::Mismatch);
    }
}
