use std::collections::BTreeSet;

use super::order::{lifetime_leq, mult_leq};
use super::ty::*;
use crate::syntax::{DataDecl, Name, Span};

/// Unification variables and the lifetime constraints that could not be
/// decided when they were generated.
#[derive(Clone, Debug, Default)]
pub(crate) struct Metas {
    types: Vec<Option<Type>>,
    lifetimes: Vec<Option<Lifetime>>,
    kinds: Vec<Option<BorrowKind>>,
    rigid: u32,
    /// Pending `a ≤ b` constraints between lifetimes that mention metas,
    /// with the position that generated them.
    pub deferred: Vec<(Lifetime, Lifetime, Span)>,
    /// Position attached to newly deferred constraints.
    pub span: Span,
}

impl Metas {
    pub fn fresh_type(&mut self) -> Type {
        self.types.push(None);
        Type::Meta(self.types.len() as u32 - 1)
    }

    pub fn fresh_lifetime(&mut self) -> Lifetime {
        self.lifetimes.push(None);
        Lifetime::Meta(self.lifetimes.len() as u32 - 1)
    }

    pub fn fresh_kind(&mut self) -> BorrowKind {
        self.kinds.push(None);
        BorrowKind::Meta(self.kinds.len() as u32 - 1)
    }

    /// A rigid name that cannot be written in source.
    pub fn rigid_name(&mut self, hint: &str) -> Name {
        self.rigid += 1;
        Name::from(format!("{}#{}", hint.split('#').next().unwrap_or(hint), self.rigid))
    }

    pub fn rigid(&mut self, kind: BinderKind, hint: &str) -> (Name, TyArgValue) {
        let n = self.rigid_name(hint);
        let v = match kind {
            BinderKind::Lifetime => TyArgValue::Lifetime(Lifetime::Var(n.clone())),
            BinderKind::LifetimeId => TyArgValue::Lifetime(Lifetime::Atom(n.clone())),
            BinderKind::Mult => TyArgValue::Mult(Mult::Prod(vec![n.clone()])),
            BinderKind::Type => TyArgValue::Type(Type::Var(n.clone())),
        };
        (n, v)
    }

    pub fn zonk_lifetime(&self, l: &Lifetime) -> Lifetime {
        l.map_leaves(&mut |leaf| match leaf {
            Lifetime::Meta(m) => self.lifetimes[*m as usize].as_ref().map(|b| self.zonk_lifetime(b)),
            _ => None,
        })
    }

    pub fn zonk_kind(&self, k: BorrowKind) -> BorrowKind {
        match k {
            BorrowKind::Meta(m) => self.kinds[m as usize].map(|b| self.zonk_kind(b)).unwrap_or(k),
            k => k,
        }
    }

    pub fn zonk(&self, t: &Type) -> Type {
        match t {
            Type::Meta(m) => match &self.types[*m as usize] {
                Some(b) => self.zonk(b),
                None => t.clone(),
            },
            Type::Forall(k, n, b) => Type::Forall(*k, n.clone(), Box::new(self.zonk(b))),
            Type::Var(_) | Type::Int | Type::Linearly => t.clone(),
            Type::Fun(a, m, b) => Type::Fun(Box::new(self.zonk(a)), m.clone(), Box::new(self.zonk(b))),
            Type::Data(n, args) => Type::Data(n.clone(), args.iter().map(|a| self.zonk(a)).collect()),
            Type::Ref(a) => Type::Ref(Box::new(self.zonk(a))),
            Type::Now(l) => Type::Now(self.zonk_lifetime(l)),
            Type::End(l) => Type::End(self.zonk_lifetime(l)),
            Type::Borrow(k, l, a) => Type::Borrow(self.zonk_kind(*k), self.zonk_lifetime(l), Box::new(self.zonk(a))),
            Type::Lend(l, a) => Type::Lend(self.zonk_lifetime(l), Box::new(self.zonk(a))),
            Type::BO(l, a) => Type::BO(self.zonk_lifetime(l), Box::new(self.zonk(a))),
        }
    }

    fn head(&self, t: &Type) -> Type {
        match t {
            Type::Meta(m) => match &self.types[*m as usize] {
                Some(b) => self.head(b),
                None => t.clone(),
            },
            t => t.clone(),
        }
    }

    pub fn bind_type(&mut self, m: u32, t: Type) {
        self.types[m as usize] = Some(t);
    }

    pub fn bind_lifetime(&mut self, m: u32, l: Lifetime) {
        self.lifetimes[m as usize] = Some(l);
    }

    /// `a ≤ b`, binding a bare meta on either side to the other side and
    /// deferring anything else that mentions metas.
    pub fn lifetime_leq(&mut self, a: &Lifetime, b: &Lifetime) -> bool {
        let (a, b) = (self.zonk_lifetime(a), self.zonk_lifetime(b));
        if lifetime_leq(&a, &b) {
            return true;
        }
        match (&a, &b) {
            (_, Lifetime::Meta(m)) if !a.atoms().contains(&LtAtom::Meta(*m)) => {
                self.bind_lifetime(*m, a.clone());
                true
            }
            (Lifetime::Meta(m), _) if !b.atoms().contains(&LtAtom::Meta(*m)) => {
                self.bind_lifetime(*m, b.clone());
                true
            }
            _ if a.has_meta() || b.has_meta() => {
                self.deferred.push((a, b, self.span));
                true
            }
            _ => false,
        }
    }

    pub fn lifetime_eq(&mut self, a: &Lifetime, b: &Lifetime) -> bool {
        self.lifetime_leq(a, b) && self.lifetime_leq(b, a)
    }

    /// Settles deferred lifetime constraints. Returns the constraints that
    /// fail and, separately, those still undetermined.
    pub fn solve_deferred(&mut self, force: bool) -> (Vec<(Lifetime, Lifetime, Span)>, Vec<(Lifetime, Lifetime, Span)>) {
        let mut failed = Vec::new();
        loop {
            let pending = std::mem::take(&mut self.deferred);
            let before = pending.len();
            let mut open = Vec::new();
            for (a, b, span) in pending {
                let (a, b) = (self.zonk_lifetime(&a), self.zonk_lifetime(&b));
                self.span = span;
                if !a.has_meta() && !b.has_meta() {
                    if !lifetime_leq(&a, &b) {
                        failed.push((a, b, span));
                    }
                } else if lifetime_leq(&a, &b) {
                } else if !self.lifetime_leq(&a, &b) {
                    failed.push((a, b, span));
                } else if !self.deferred.is_empty() {
                    open.append(&mut self.deferred);
                }
            }
            let progressed = open.len() < before;
            self.deferred = open;
            if self.deferred.is_empty() {
                break;
            }
            if !progressed {
                if !force {
                    break;
                }
                // Bind one meta of the first stuck constraint to the other side.
                let (a, b, _) = self.deferred[0].clone();
                let target = first_meta(&a).map(|m| (m, b.clone())).or_else(|| first_meta(&b).map(|m| (m, a.clone())));
                match target {
                    Some((m, other)) => {
                        let without = Lifetime::from_atoms(&other.atoms().into_iter().filter(|x| *x != LtAtom::Meta(m)).collect());
                        self.bind_lifetime(m, without);
                    }
                    None => break,
                }
            }
        }
        (failed, self.deferred.clone())
    }
}

fn first_meta(l: &Lifetime) -> Option<u32> {
    l.atoms().into_iter().find_map(|a| match a {
        LtAtom::Meta(m) => Some(m),
        _ => None,
    })
}

fn occurs(metas: &Metas, m: u32, t: &Type) -> bool {
    match metas.head(t) {
        Type::Meta(n) => n == m,
        Type::Forall(_, _, b) | Type::Ref(b) | Type::Borrow(_, _, b) | Type::Lend(_, b) | Type::BO(_, b) => occurs(metas, m, &b),
        Type::Fun(a, _, b) => occurs(metas, m, &a) || occurs(metas, m, &b),
        Type::Data(_, args) => args.iter().any(|a| occurs(metas, m, a)),
        _ => false,
    }
}

/// Subtyping over a meta store. Data types are compared coinductively: a
/// pair of applications already under comparison is assumed to hold.
pub(crate) struct Subtyper<'a> {
    pub decls: &'a [DataDecl],
    pub metas: &'a mut Metas,
    visited: Vec<(Type, Type)>,
}

impl<'a> Subtyper<'a> {
    pub fn new(decls: &'a [DataDecl], metas: &'a mut Metas) -> Self {
        Subtyper { decls, metas, visited: Vec::new() }
    }

    fn kinds(&mut self, a: BorrowKind, b: BorrowKind) -> Option<BorrowKind> {
        let (a, b) = (self.metas.zonk_kind(a), self.metas.zonk_kind(b));
        match (a, b) {
            (x, y) if x == y => Some(x),
            (BorrowKind::Meta(m), k) | (k, BorrowKind::Meta(m)) => {
                self.metas.kinds[m as usize] = Some(k);
                Some(k)
            }
            _ => None,
        }
    }

    pub fn sub(&mut self, a: &Type, b: &Type) -> bool {
        let (a, b) = (self.metas.head(a), self.metas.head(b));
        match (&a, &b) {
            (Type::Meta(m), Type::Meta(n)) if m == n => return true,
            (Type::Meta(m), _) => {
                if occurs(self.metas, *m, &b) {
                    return false;
                }
                self.metas.bind_type(*m, b.clone());
                return true;
            }
            (_, Type::Meta(n)) => {
                if occurs(self.metas, *n, &a) {
                    return false;
                }
                self.metas.bind_type(*n, a.clone());
                return true;
            }
            _ => {}
        }
        if let Type::Forall(k, n, body) = &b {
            let (_, v) = self.metas.rigid(*k, n);
            let body = body.subst(&TySubst::single(*k, n.clone(), v));
            return self.sub(&a, &body);
        }
        if let Type::Forall(k, n, body) = &a {
            if *k == BinderKind::Mult {
                // No multiplicity metas: try the two extremes.
                for m in [Mult::One, Mult::Many] {
                    let saved = self.metas.clone();
                    let inst = body.subst(&TySubst::single(*k, n.clone(), TyArgValue::Mult(m)));
                    if self.sub(&inst, &b) {
                        return true;
                    }
                    *self.metas = saved;
                }
                return false;
            }
            let v = match k {
                BinderKind::Type => TyArgValue::Type(self.metas.fresh_type()),
                _ => TyArgValue::Lifetime(self.metas.fresh_lifetime()),
            };
            let inst = body.subst(&TySubst::single(*k, n.clone(), v));
            return self.sub(&inst, &b);
        }
        match (&a, &b) {
            (Type::Var(x), Type::Var(y)) => x == y,
            (Type::Int, Type::Int) | (Type::Linearly, Type::Linearly) => true,
            (Type::Fun(a1, m1, r1), Type::Fun(a2, m2, r2)) => mult_leq(m1, m2) && self.sub(a2, a1) && self.sub(r1, r2),
            (Type::Data(n1, x1), Type::Data(n2, x2)) => {
                if n1 != n2 || x1.len() != x2.len() {
                    return false;
                }
                let key = (self.metas.zonk(&a), self.metas.zonk(&b));
                if self.visited.contains(&key) {
                    return true;
                }
                let Some(decl) = self.decls.iter().find(|d| d.name == *n1) else {
                    return x1.iter().zip(x2).all(|(p, q)| self.sub(p, q) && self.sub(q, p));
                };
                let decl = decl.clone();
                self.visited.push(key);
                let ok = decl.ctors.iter().all(|c| {
                    let f1 = decl.instantiate_fields(c, x1);
                    let f2 = decl.instantiate_fields(c, x2);
                    f1.iter().zip(&f2).all(|((_, p), (_, q))| self.sub(p, q))
                }) && self.phantom_params(&decl, x1, x2);
                self.visited.pop();
                ok
            }
            (Type::Ref(p), Type::Ref(q)) => self.sub(p, q),
            (Type::Now(l1), Type::Now(l2)) => self.metas.lifetime_eq(l1, l2),
            (Type::End(l1), Type::End(l2)) => self.metas.lifetime_leq(l2, l1),
            (Type::Borrow(k1, l1, p), Type::Borrow(k2, l2, q)) => {
                let Some(k) = self.kinds(*k1, *k2) else { return false };
                if !self.metas.lifetime_leq(l2, l1) {
                    return false;
                }
                match k {
                    BorrowKind::Share => self.sub(p, q),
                    _ => self.sub(p, q) && self.sub(q, p),
                }
            }
            (Type::Lend(l1, p), Type::Lend(l2, q)) => self.metas.lifetime_leq(l1, l2) && self.sub(p, q),
            (Type::BO(l1, p), Type::BO(l2, q)) => self.metas.lifetime_leq(l2, l1) && self.sub(p, q),
            _ => false,
        }
    }

    /// Parameters that no field mentions are compared for equality so that
    /// metas standing for them still get solved.
    fn phantom_params(&mut self, decl: &DataDecl, x1: &[Type], x2: &[Type]) -> bool {
        let mut used = BTreeSet::new();
        for c in &decl.ctors {
            for (_, t) in &c.fields {
                collect_type_vars(t, &mut used);
            }
        }
        decl.params.iter().zip(x1.iter().zip(x2)).all(|(p, (a, b))| used.contains(p) || (self.sub(a, b) && self.sub(b, a)))
    }
}

fn collect_type_vars(t: &Type, out: &mut BTreeSet<Name>) {
    match t {
        Type::Var(n) => {
            out.insert(n.clone());
        }
        Type::Forall(_, _, b) | Type::Ref(b) | Type::Borrow(_, _, b) | Type::Lend(_, b) | Type::BO(_, b) => collect_type_vars(b, out),
        Type::Fun(a, _, b) => {
            collect_type_vars(a, out);
            collect_type_vars(b, out);
        }
        Type::Data(_, args) => args.iter().for_each(|a| collect_type_vars(a, out)),
        _ => {}
    }
}

/// Decides `t ≤ u` for closed types under the given data declarations.
pub fn subtype_in(decls: &[DataDecl], t: &Type, u: &Type) -> bool {
    let mut metas = Metas::default();
    let ok = Subtyper::new(decls, &mut metas).sub(t, u);
    if !ok {
        return false;
    }
    let (failed, open) = metas.solve_deferred(true);
    failed.is_empty() && open.is_empty()
}

/// Decides `t ≤ u` under the default declarations.
pub fn subtype(t: &Type, u: &Type) -> bool {
    subtype_in(&crate::syntax::default_decls(), t, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_program;

    fn ty(decls: &str, s: &str) -> (Vec<DataDecl>, Type) {
        let prog = parse_program(&format!("{decls} ((\\x. x) : ({s}) -o Int)")).unwrap();
        let t = match prog.body.peel() {
            crate::syntax::Term::Ann(_, Type::Fun(a, _, _)) => (**a).clone(),
            other => panic!("{other:?}"),
        };
        (prog.data_decls, t)
    }

    fn sub(decls: &str, a: &str, b: &str) -> bool {
        let (d, a) = ty(decls, a);
        let (_, b) = ty(decls, b);
        subtype_in(&d, &a, &b)
    }

    #[test]
    fn borrower_variance() {
        assert!(sub("", "forall 'a. Mut 'a Int -o Mut 'a Int", "forall 'b. Mut 'b Int -o Mut 'b Int"));
        let mut m = Metas::default();
        let (a, b) = (Lifetime::var("a"), Lifetime::var("b"));
        let mut s = Subtyper::new(&[], &mut m);
        assert!(s.sub(&Type::mut_(a.clone(), Type::Int), &Type::mut_(Lifetime::meet(a.clone(), b.clone()), Type::Int)));
        assert!(!s.sub(&Type::mut_(Lifetime::meet(a.clone(), b.clone()), Type::Int), &Type::mut_(a.clone(), Type::Int)));
        assert!(s.sub(&Type::Lend(a.clone(), Box::new(Type::Int)), &Type::Lend(Lifetime::Static, Box::new(Type::Int))));
        assert!(!subtype(&Type::mut_(a.clone(), Type::Int), &Type::mut_(a.clone(), Type::bool())));
        assert!(subtype(&Type::End(Lifetime::Static), &Type::End(a.clone())));
        assert!(!subtype(&Type::Now(a.clone()), &Type::Now(Lifetime::meet(a, b))));
    }

    #[test]
    fn recursive_data() {
        let d = "data List #a where Nil : List #a | Cons : #a -o List #a -o List #a ;";
        assert!(sub(d, "List Int", "List Int"));
        assert!(!sub(d, "List Int", "List Bool"));
        assert!(sub(d, "List (End static)", "List (End 'a)"));
        assert!(!sub(d, "List (End 'a)", "List (End static)"));
    }

    #[test]
    fn functions_and_polymorphism() {
        assert!(subtype(&Type::lin(Type::Int, Type::Int), &Type::fun(Type::Int, Mult::Many, Type::Int)));
        assert!(!subtype(&Type::fun(Type::Int, Mult::Many, Type::Int), &Type::lin(Type::Int, Type::Int)));
        let id = Type::Forall(BinderKind::Type, Name::from("t"), Box::new(Type::lin(Type::Var(Name::from("t")), Type::Var(Name::from("t")))));
        assert!(subtype(&id, &Type::lin(Type::Int, Type::Int)));
        assert!(!subtype(&Type::lin(Type::Int, Type::Int), &id));
        assert!(subtype(&id, &id));
        let poly = Type::Forall(BinderKind::Mult, Name::from("p"), Box::new(Type::fun(Type::Int, Mult::var("p"), Type::Int)));
        assert!(subtype(&poly, &Type::fun(Type::Int, Mult::Many, Type::Int)));
    }
}
