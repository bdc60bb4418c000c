use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::syntax::Name;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BinderKind {
    /// `'a`
    Lifetime,
    /// `^i`, instantiated only by atomic lifetimes.
    LifetimeId,
    /// `%p`
    Mult,
    /// `#a`
    Type,
}

impl BinderKind {
    pub fn sigil(self) -> char {
        match self {
            BinderKind::Lifetime => '\'',
            BinderKind::LifetimeId => '^',
            BinderKind::Mult => '%',
            BinderKind::Type => '#',
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Lifetime {
    /// A lifetime id `^i` (also used for skolems).
    Atom(Name),
    Static,
    Meet(Box<Lifetime>, Box<Lifetime>),
    /// A lifetime variable `'a`.
    Var(Name),
    /// Unification variable of the checker.
    Meta(u32),
}

/// Generator of the lifetime semilattice.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LtAtom {
    Id(Name),
    Var(Name),
    Meta(u32),
}

impl Lifetime {
    pub fn meet(a: Lifetime, b: Lifetime) -> Lifetime {
        Lifetime::Meet(Box::new(a), Box::new(b))
    }

    pub fn atom(s: &str) -> Lifetime {
        Lifetime::Atom(Name::from(s))
    }

    pub fn var(s: &str) -> Lifetime {
        Lifetime::Var(Name::from(s))
    }

    /// Normal form: the set of generators met together; `static` is the empty set.
    pub fn atoms(&self) -> BTreeSet<LtAtom> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<LtAtom>) {
        match self {
            Lifetime::Atom(n) => {
                out.insert(LtAtom::Id(n.clone()));
            }
            Lifetime::Var(n) => {
                out.insert(LtAtom::Var(n.clone()));
            }
            Lifetime::Meta(m) => {
                out.insert(LtAtom::Meta(*m));
            }
            Lifetime::Static => {}
            Lifetime::Meet(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    /// Rebuilds a lifetime from a normal form.
    pub fn from_atoms(atoms: &BTreeSet<LtAtom>) -> Lifetime {
        let mut it = atoms.iter().map(|a| match a {
            LtAtom::Id(n) => Lifetime::Atom(n.clone()),
            LtAtom::Var(n) => Lifetime::Var(n.clone()),
            LtAtom::Meta(m) => Lifetime::Meta(*m),
        });
        match it.next() {
            None => Lifetime::Static,
            Some(first) => it.fold(first, Lifetime::meet),
        }
    }

    pub fn normalize(&self) -> Lifetime {
        Lifetime::from_atoms(&self.atoms())
    }

    pub fn map_leaves(&self, f: &mut impl FnMut(&Lifetime) -> Option<Lifetime>) -> Lifetime {
        if let Some(l) = f(self) {
            return l;
        }
        match self {
            Lifetime::Meet(a, b) => Lifetime::meet(a.map_leaves(f), b.map_leaves(f)),
            other => other.clone(),
        }
    }

    pub fn has_meta(&self) -> bool {
        match self {
            Lifetime::Meta(_) => true,
            Lifetime::Meet(a, b) => a.has_meta() || b.has_meta(),
            _ => false,
        }
    }
}

impl fmt::Display for Lifetime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lifetime::Atom(n) => write!(f, "^{n}"),
            Lifetime::Var(n) => write!(f, "'{n}"),
            Lifetime::Static => write!(f, "static"),
            Lifetime::Meta(m) => write!(f, "?l{m}"),
            Lifetime::Meet(..) => {
                let mut parts = Vec::new();
                flatten_meet(self, &mut parts);
                write!(f, "(")?;
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, " & ")?;
                    }
                    write!(f, "{p}")?;
                }
                write!(f, ")")
            }
        }
    }
}

fn flatten_meet<'a>(l: &'a Lifetime, out: &mut Vec<&'a Lifetime>) {
    match l {
        Lifetime::Meet(a, b) => {
            flatten_meet(a, out);
            flatten_meet(b, out);
        }
        other => out.push(other),
    }
}

/// Multiplicities. Products are kept as sorted sets of variables: under the
/// join law a product is idempotent, so duplicates carry no information.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mult {
    One,
    Many,
    Prod(Vec<Name>),
}

impl Mult {
    pub fn var(s: &str) -> Mult {
        Mult::Prod(vec![Name::from(s)])
    }

    /// Builds a normalized product of variables; the empty product is 1.
    pub fn prod(vars: impl IntoIterator<Item = Name>) -> Mult {
        let set: BTreeSet<Name> = vars.into_iter().collect();
        if set.is_empty() {
            Mult::One
        } else {
            Mult::Prod(set.into_iter().collect())
        }
    }

    pub fn times(&self, other: &Mult) -> Mult {
        match (self, other) {
            (Mult::One, m) | (m, Mult::One) => m.clone(),
            (Mult::Many, _) | (_, Mult::Many) => Mult::Many,
            (Mult::Prod(a), Mult::Prod(b)) => Mult::prod(a.iter().chain(b.iter()).cloned()),
        }
    }

    pub fn normalize(&self) -> Mult {
        match self {
            Mult::Prod(v) => Mult::prod(v.iter().cloned()),
            m => m.clone(),
        }
    }

    pub fn subst(&self, var: &str, by: &Mult) -> Mult {
        match self {
            Mult::Prod(v) if v.iter().any(|x| &**x == var) => {
                let rest = Mult::prod(v.iter().filter(|x| &***x != var).cloned());
                rest.times(by)
            }
            m => m.clone(),
        }
    }
}

impl fmt::Display for Mult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mult::One => write!(f, "1"),
            Mult::Many => write!(f, "w"),
            Mult::Prod(v) => {
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, "*")?;
                    }
                    write!(f, "%{x}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BorrowKind {
    Mut,
    Share,
    /// Unification variable of the checker.
    Meta(u32),
}

impl fmt::Display for BorrowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BorrowKind::Mut => write!(f, "Mut"),
            BorrowKind::Share => write!(f, "Share"),
            BorrowKind::Meta(m) => write!(f, "?k{m}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Type {
    Forall(BinderKind, Name, Box<Type>),
    Var(Name),
    Fun(Box<Type>, Mult, Box<Type>),
    Data(Name, Vec<Type>),
    Int,
    Linearly,
    Ref(Box<Type>),
    Now(Lifetime),
    End(Lifetime),
    Borrow(BorrowKind, Lifetime, Box<Type>),
    Lend(Lifetime, Box<Type>),
    BO(Lifetime, Box<Type>),
    /// Unification variable of the checker.
    Meta(u32),
}

/// Simultaneous substitution of bound names, keyed by binder kind.
#[derive(Clone, Debug, Default)]
pub struct TySubst {
    pub types: BTreeMap<Name, Type>,
    pub lt_vars: BTreeMap<Name, Lifetime>,
    pub lt_ids: BTreeMap<Name, Lifetime>,
    pub mults: BTreeMap<Name, Mult>,
}

impl TySubst {
    pub fn single(kind: BinderKind, name: Name, arg: TyArgValue) -> TySubst {
        let mut s = TySubst::default();
        s.insert(kind, name, arg);
        s
    }

    pub fn insert(&mut self, kind: BinderKind, name: Name, arg: TyArgValue) {
        match (kind, arg) {
            (BinderKind::Type, TyArgValue::Type(t)) => {
                self.types.insert(name, t);
            }
            (BinderKind::Lifetime, TyArgValue::Lifetime(l)) => {
                self.lt_vars.insert(name, l);
            }
            (BinderKind::LifetimeId, TyArgValue::Lifetime(l)) => {
                self.lt_ids.insert(name, l);
            }
            (BinderKind::Mult, TyArgValue::Mult(m)) => {
                self.mults.insert(name, m);
            }
            _ => {}
        }
    }

    pub(crate) fn without(&self, kind: BinderKind, name: &Name) -> TySubst {
        let mut s = self.clone();
        match kind {
            BinderKind::Type => {
                s.types.remove(name);
            }
            BinderKind::Lifetime => {
                s.lt_vars.remove(name);
            }
            BinderKind::LifetimeId => {
                s.lt_ids.remove(name);
            }
            BinderKind::Mult => {
                s.mults.remove(name);
            }
        }
        s
    }

    pub(crate) fn lifetime(&self, l: &Lifetime) -> Lifetime {
        l.map_leaves(&mut |leaf| match leaf {
            Lifetime::Var(n) => self.lt_vars.get(n).cloned(),
            Lifetime::Atom(n) => self.lt_ids.get(n).cloned(),
            _ => None,
        })
    }

    pub(crate) fn mult(&self, m: &Mult) -> Mult {
        let mut out = m.clone();
        for (v, by) in &self.mults {
            out = out.subst(v, by);
        }
        out
    }
}

/// A resolved instantiation argument.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TyArgValue {
    Type(Type),
    Lifetime(Lifetime),
    Mult(Mult),
    Kind(BorrowKind),
}

impl Type {
    pub fn fun(a: Type, m: Mult, b: Type) -> Type {
        Type::Fun(Box::new(a), m, Box::new(b))
    }

    pub fn lin(a: Type, b: Type) -> Type {
        Type::fun(a, Mult::One, b)
    }

    pub fn data(name: &str, args: Vec<Type>) -> Type {
        Type::Data(Name::from(name), args)
    }

    pub fn unit() -> Type {
        Type::data(crate::syntax::UNIT, vec![])
    }

    pub fn pair(a: Type, b: Type) -> Type {
        Type::data(crate::syntax::PAIR, vec![a, b])
    }

    pub fn ur(a: Type) -> Type {
        Type::data(crate::syntax::UR, vec![a])
    }

    pub fn bool() -> Type {
        Type::data(crate::syntax::BOOL, vec![])
    }

    pub fn mut_(l: Lifetime, t: Type) -> Type {
        Type::Borrow(BorrowKind::Mut, l, Box::new(t))
    }

    pub fn share(l: Lifetime, t: Type) -> Type {
        Type::Borrow(BorrowKind::Share, l, Box::new(t))
    }

    pub fn subst(&self, s: &TySubst) -> Type {
        match self {
            Type::Forall(k, n, body) => Type::Forall(*k, n.clone(), Box::new(body.subst(&s.without(*k, n)))),
            Type::Var(n) => s.types.get(n).cloned().unwrap_or_else(|| self.clone()),
            Type::Fun(a, m, b) => Type::Fun(Box::new(a.subst(s)), s.mult(m), Box::new(b.subst(s))),
            Type::Data(n, args) => Type::Data(n.clone(), args.iter().map(|t| t.subst(s)).collect()),
            Type::Int | Type::Linearly | Type::Meta(_) => self.clone(),
            Type::Ref(t) => Type::Ref(Box::new(t.subst(s))),
            Type::Now(l) => Type::Now(s.lifetime(l)),
            Type::End(l) => Type::End(s.lifetime(l)),
            Type::Borrow(k, l, t) => Type::Borrow(*k, s.lifetime(l), Box::new(t.subst(s))),
            Type::Lend(l, t) => Type::Lend(s.lifetime(l), Box::new(t.subst(s))),
            Type::BO(l, t) => Type::BO(s.lifetime(l), Box::new(t.subst(s))),
        }
    }

    pub fn subst_types(&self, sub: &[(Name, Type)]) -> Type {
        let mut s = TySubst::default();
        for (n, t) in sub {
            s.types.insert(n.clone(), t.clone());
        }
        self.subst(&s)
    }

    /// Calls `f` on every lifetime occurring in the type.
    pub fn for_each_lifetime(&self, f: &mut impl FnMut(&Lifetime)) {
        match self {
            Type::Forall(_, _, t) | Type::Ref(t) => t.for_each_lifetime(f),
            Type::Fun(a, _, b) => {
                a.for_each_lifetime(f);
                b.for_each_lifetime(f);
            }
            Type::Data(_, args) => args.iter().for_each(|t| t.for_each_lifetime(f)),
            Type::Now(l) | Type::End(l) => f(l),
            Type::Borrow(_, l, t) | Type::Lend(l, t) | Type::BO(l, t) => {
                f(l);
                t.for_each_lifetime(f);
            }
            Type::Var(_) | Type::Int | Type::Linearly | Type::Meta(_) => {}
        }
    }

    pub fn mentions_atom(&self, atom: &Name) -> bool {
        let mut found = false;
        self.for_each_lifetime(&mut |l| {
            if l.atoms().contains(&LtAtom::Id(atom.clone())) {
                found = true;
            }
        });
        found
    }

    /// Head constructor name for diagnostics and side conditions.
    pub fn head(&self) -> &'static str {
        match self {
            Type::Forall(..) => "forall",
            Type::Var(_) => "variable",
            Type::Fun(..) => "function",
            Type::Data(..) => "data",
            Type::Int => "Int",
            Type::Linearly => "Linearly",
            Type::Ref(_) => "Ref",
            Type::Now(_) => "Now",
            Type::End(_) => "End",
            Type::Borrow(BorrowKind::Mut, ..) => "Mut",
            Type::Borrow(BorrowKind::Share, ..) => "Share",
            Type::Borrow(BorrowKind::Meta(_), ..) => "borrower",
            Type::Lend(..) => "Lend",
            Type::BO(..) => "BO",
            Type::Meta(_) => "unknown",
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_type(self, 0, f)
    }
}

// Precedence: 0 = full type, 1 = argument of an arrow, 2 = atom.
fn fmt_type(t: &Type, prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let wrap = |needed: u8| prec > needed;
    match t {
        Type::Forall(k, n, body) => {
            if wrap(0) {
                write!(f, "(")?;
            }
            write!(f, "forall {}{}. ", k.sigil(), n)?;
            fmt_type(body, 0, f)?;
            if wrap(0) {
                write!(f, ")")?;
            }
            Ok(())
        }
        Type::Fun(a, m, b) => {
            if wrap(0) {
                write!(f, "(")?;
            }
            fmt_type(a, 1, f)?;
            match m {
                Mult::One => write!(f, " -o ")?,
                Mult::Many => write!(f, " -> ")?,
                m => write!(f, " ->[{m}] ")?,
            }
            fmt_type(b, 0, f)?;
            if wrap(0) {
                write!(f, ")")?;
            }
            Ok(())
        }
        Type::Var(n) => write!(f, "#{n}"),
        Type::Meta(m) => write!(f, "?{m}"),
        Type::Int => write!(f, "Int"),
        Type::Linearly => write!(f, "Linearly"),
        Type::Data(n, args) if &**n == crate::syntax::UNIT => {
            debug_assert!(args.is_empty());
            write!(f, "()")
        }
        Type::Data(n, args) if &**n == crate::syntax::PAIR && args.len() == 2 => {
            write!(f, "(")?;
            fmt_type(&args[0], 0, f)?;
            write!(f, ", ")?;
            fmt_type(&args[1], 0, f)?;
            write!(f, ")")
        }
        Type::Data(n, args) if args.is_empty() => write!(f, "{n}"),
        _ => {
            if wrap(1) {
                write!(f, "(")?;
            }
            match t {
                Type::Data(n, args) => {
                    write!(f, "{n}")?;
                    for a in args {
                        write!(f, " ")?;
                        fmt_type(a, 2, f)?;
                    }
                }
                Type::Ref(a) => {
                    write!(f, "Ref ")?;
                    fmt_type(a, 2, f)?;
                }
                Type::Now(l) => write!(f, "Now {l}")?,
                Type::End(l) => write!(f, "End {l}")?,
                Type::Borrow(k, l, a) => {
                    write!(f, "{k} {l} ")?;
                    fmt_type(a, 2, f)?;
                }
                Type::Lend(l, a) => {
                    write!(f, "Lend {l} ")?;
                    fmt_type(a, 2, f)?;
                }
                Type::BO(l, a) => {
                    write!(f, "BO {l} ")?;
                    fmt_type(a, 2, f)?;
                }
                _ => unreachable!(),
            }
            if wrap(1) {
                write!(f, ")")?;
            }
            Ok(())
        }
    }
}

/// Pairs of binders in scope while comparing two types (or terms) up to
/// renaming of bound names.
pub type AlphaEnv = Vec<(BinderKind, Name, Name)>;

fn lookup_bound(env: &AlphaEnv, kind: BinderKind, n: &Name, left: bool) -> Option<usize> {
    env.iter().rposition(|(k, l, r)| *k == kind && (if left { l } else { r }) == n)
}

fn canon_lifetime(l: &Lifetime, env: &AlphaEnv, left: bool) -> BTreeSet<LtAtom> {
    l.map_leaves(&mut |leaf| {
        let (kind, n) = match leaf {
            Lifetime::Var(n) => (BinderKind::Lifetime, n),
            Lifetime::Atom(n) => (BinderKind::LifetimeId, n),
            _ => return None,
        };
        lookup_bound(env, kind, n, left).map(|i| Lifetime::Meta(u32::MAX - i as u32))
    })
    .atoms()
}

pub fn lifetime_alpha_eq_in(a: &Lifetime, b: &Lifetime, env: &AlphaEnv) -> bool {
    canon_lifetime(a, env, true) == canon_lifetime(b, env, false)
}

pub fn mult_alpha_eq_in(a: &Mult, b: &Mult, env: &AlphaEnv) -> bool {
    let canon = |m: &Mult, left: bool| match m {
        Mult::Prod(v) => Mult::prod(v.iter().map(|n| match lookup_bound(env, BinderKind::Mult, n, left) {
            Some(i) => Name::from(format!("${i}")),
            None => n.clone(),
        })),
        m => m.clone(),
    };
    canon(a, true) == canon(b, false)
}

pub fn type_alpha_eq_in(a: &Type, b: &Type, env: &mut AlphaEnv) -> bool {
    match (a, b) {
        (Type::Forall(k1, n1, t1), Type::Forall(k2, n2, t2)) if k1 == k2 => {
            env.push((*k1, n1.clone(), n2.clone()));
            let r = type_alpha_eq_in(t1, t2, env);
            env.pop();
            r
        }
        (Type::Var(x), Type::Var(y)) => {
            match (lookup_bound(env, BinderKind::Type, x, true), lookup_bound(env, BinderKind::Type, y, false)) {
                (None, None) => x == y,
                (i, j) => i == j,
            }
        }
        (Type::Fun(a1, m1, b1), Type::Fun(a2, m2, b2)) => {
            mult_alpha_eq_in(m1, m2, env) && type_alpha_eq_in(a1, a2, env) && type_alpha_eq_in(b1, b2, env)
        }
        (Type::Data(n1, x1), Type::Data(n2, x2)) => {
            n1 == n2 && x1.len() == x2.len() && x1.iter().zip(x2).all(|(p, q)| type_alpha_eq_in(p, q, env))
        }
        (Type::Int, Type::Int) | (Type::Linearly, Type::Linearly) => true,
        (Type::Meta(x), Type::Meta(y)) => x == y,
        (Type::Ref(p), Type::Ref(q)) => type_alpha_eq_in(p, q, env),
        (Type::Now(l1), Type::Now(l2)) | (Type::End(l1), Type::End(l2)) => lifetime_alpha_eq_in(l1, l2, env),
        (Type::Borrow(k1, l1, p), Type::Borrow(k2, l2, q)) => {
            k1 == k2 && lifetime_alpha_eq_in(l1, l2, env) && type_alpha_eq_in(p, q, env)
        }
        (Type::Lend(l1, p), Type::Lend(l2, q)) | (Type::BO(l1, p), Type::BO(l2, q)) => {
            lifetime_alpha_eq_in(l1, l2, env) && type_alpha_eq_in(p, q, env)
        }
        _ => false,
    }
}

/// Alpha-equivalence of types (bound names of `forall` are irrelevant).
pub fn type_alpha_eq(a: &Type, b: &Type) -> bool {
    type_alpha_eq_in(a, b, &mut Vec::new())
}
