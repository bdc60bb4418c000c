use super::{MonadOp, Name, Op, Span};
use crate::types::{BinderKind, BorrowKind, Lifetime, Mult, Type};

pub const UNIT: &str = "()";
pub const PAIR: &str = "(,)";
pub const UR: &str = "Ur";
pub const BOOL: &str = "Bool";
pub const TRUE: &str = "True";
pub const FALSE: &str = "False";

#[derive(Clone, Debug, PartialEq)]
pub enum Term {
    Var(Name),
    Let(LetKind, Vec<Binding>, Box<Term>),
    Lam(Binder, Box<Term>),
    App(Box<Term>, Box<Term>),
    /// `seq x in t`: force `x`, then continue with `t`.
    Seq(Name, Box<Term>),
    Int(i64),
    Con(Name, Vec<TyArg>, Vec<Term>),
    Case(Box<Term>, Vec<Branch>),
    Op(Op, Vec<TyArg>, Vec<Term>),
    Mo(MonadOp, Vec<TyArg>, Vec<Term>),
    TyAbs(BinderKind, Name, Box<Term>),
    TyApp(Box<Term>, Vec<TyArg>),
    Ann(Box<Term>, Type),
    /// Source position of the wrapped term. Removed by [`super::erase`].
    At(Span, Box<Term>),
}

/// `let` groups are recursive and bind at ω; `let1` groups are not
/// recursive and bind linearly unless annotated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LetKind {
    Rec,
    Linear,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Binding {
    pub name: Name,
    pub mult: Option<Mult>,
    pub ty: Option<Type>,
    pub body: Term,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Binder {
    pub name: Name,
    pub mult: Option<Mult>,
    pub ty: Option<Type>,
}

impl Binder {
    pub fn plain(name: impl Into<Name>) -> Self {
        Binder { name: name.into(), mult: None, ty: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub ctor: Name,
    pub vars: Vec<Name>,
    pub body: Term,
}

/// One argument of an explicit instantiation `@[..]`.
#[derive(Clone, Debug, PartialEq)]
pub enum TyArg {
    Hole,
    Type(Type),
    Lifetime(Lifetime),
    Mult(Mult),
    Kind(BorrowKind),
}

impl Term {
    pub fn var(x: impl Into<Name>) -> Term {
        Term::Var(x.into())
    }

    pub fn app(f: Term, a: Term) -> Term {
        Term::App(Box::new(f), Box::new(a))
    }

    pub fn lam(x: impl Into<Name>, body: Term) -> Term {
        Term::Lam(Binder::plain(x), Box::new(body))
    }

    pub fn con(c: &str, args: Vec<Term>) -> Term {
        Term::Con(Name::from(c), Vec::new(), args)
    }

    pub fn unit() -> Term {
        Term::con(UNIT, Vec::new())
    }

    pub fn pair(a: Term, b: Term) -> Term {
        Term::con(PAIR, vec![a, b])
    }

    pub fn op(op: Op, args: Vec<Term>) -> Term {
        Term::Op(op, Vec::new(), args)
    }

    pub fn mo(op: MonadOp, args: Vec<Term>) -> Term {
        Term::Mo(op, Vec::new(), args)
    }

    /// Strips position wrappers at the top.
    pub fn peel(&self) -> &Term {
        let mut t = self;
        while let Term::At(_, inner) = t {
            t = inner;
        }
        t
    }

    pub fn as_var(&self) -> Option<&Name> {
        match self.peel() {
            Term::Var(x) => Some(x),
            _ => None,
        }
    }

    pub fn is_var(&self) -> bool {
        self.as_var().is_some()
    }
}

/// One constructor of a data declaration with its field multiplicities.
#[derive(Clone, Debug, PartialEq)]
pub struct CtorDecl {
    pub name: Name,
    pub fields: Vec<(Mult, Type)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataDecl {
    pub name: Name,
    pub params: Vec<Name>,
    pub ctors: Vec<CtorDecl>,
}

impl DataDecl {
    pub fn ctor(&self, c: &str) -> Option<(usize, &CtorDecl)> {
        self.ctors.iter().enumerate().find(|(_, k)| &*k.name == c)
    }

    /// Field types of constructor `c` with the type parameters replaced by `args`.
    pub fn instantiate_fields(&self, c: &CtorDecl, args: &[Type]) -> Vec<(Mult, Type)> {
        let sub: Vec<(Name, Type)> = self.params.iter().cloned().zip(args.iter().cloned()).collect();
        c.fields.iter().map(|(m, t)| (m.clone(), t.subst_types(&sub))).collect()
    }
}

/// The four declarations every program starts with.
pub fn default_decls() -> Vec<DataDecl> {
    let a = || Type::Var(Name::from("a"));
    let b = || Type::Var(Name::from("b"));
    vec![
        DataDecl {
            name: Name::from(UNIT),
            params: vec![],
            ctors: vec![CtorDecl { name: Name::from(UNIT), fields: vec![] }],
        },
        DataDecl {
            name: Name::from(BOOL),
            params: vec![],
            ctors: vec![
                CtorDecl { name: Name::from(TRUE), fields: vec![] },
                CtorDecl { name: Name::from(FALSE), fields: vec![] },
            ],
        },
        DataDecl {
            name: Name::from(UR),
            params: vec![Name::from("a")],
            ctors: vec![CtorDecl { name: Name::from(UR), fields: vec![(Mult::Many, a())] }],
        },
        DataDecl {
            name: Name::from(PAIR),
            params: vec![Name::from("a"), Name::from("b")],
            ctors: vec![CtorDecl { name: Name::from(PAIR), fields: vec![(Mult::One, a()), (Mult::One, b())] }],
        },
    ]
}

pub const N_DEFAULT_DECLS: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    /// Default declarations first, then user declarations in source order.
    pub data_decls: Vec<DataDecl>,
    pub body: Term,
}

impl Program {
    pub fn new(user_decls: Vec<DataDecl>, body: Term) -> Self {
        let mut data_decls = default_decls();
        data_decls.extend(user_decls);
        Program { data_decls, body }
    }

    pub fn user_decls(&self) -> &[DataDecl] {
        &self.data_decls[N_DEFAULT_DECLS..]
    }

    pub fn decl(&self, tcon: &str) -> Option<&DataDecl> {
        self.data_decls.iter().find(|d| &*d.name == tcon)
    }

    /// Declaration, index and constructor for a constructor name.
    pub fn ctor(&self, c: &str) -> Option<(&DataDecl, usize, &CtorDecl)> {
        self.data_decls.iter().find_map(|d| d.ctor(c).map(|(i, k)| (d, i, k)))
    }
}
