use thiserror::Error;

use super::order::lifetime_leq;
use super::ty::*;
use crate::syntax::{MonadOp, Name, Op};

/// An operator or a monad constructor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SigOp {
    Op(Op),
    Mo(MonadOp),
}

impl std::fmt::Display for SigOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SigOp::Op(o) => write!(f, "{o}"),
            SigOp::Mo(m) => write!(f, "{m}"),
        }
    }
}

/// Kind of one schematic parameter of an operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Lifetime,
    /// A lifetime that must be a single lifetime id.
    LifetimeId,
    Type,
    /// `Mut` or `Share`.
    Kind,
}

use ParamKind::{Kind as K, Lifetime as L, LifetimeId as I, Type as T};

/// Schematic parameters in instantiation order.
pub fn sig_params(op: SigOp) -> &'static [ParamKind] {
    match op {
        SigOp::Op(o) => match o {
            Op::Int(_) | Op::Rel(_) => &[],
            Op::Par => &[T, T],
            Op::Consume | Op::Move | Op::Linearly | Op::WithLinearly | Op::NewRef | Op::FreeRef | Op::NewLifetime => &[T],
            Op::EndLifetime => &[I],
            Op::Borrow | Op::Share | Op::Copy | Op::Reclaim | Op::ExecBO => &[L, T],
            Op::JoinMut => &[K, L, L, T],
        },
        SigOp::Mo(m) => match m {
            MonadOp::Pure => &[L, T],
            MonadOp::Bind | MonadOp::ParBO => &[L, T, T],
            MonadOp::SexecBO => &[L, L, T],
            MonadOp::Deref => &[K, L, T],
            MonadOp::UpdateRef => &[L, L, T, T],
        },
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    pub args: Vec<Type>,
    pub result: Type,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SignatureError {
    #[error("side condition of `{0}` fails: {1}")]
    SideConditionFailed(String, String),
    #[error("bad instantiation of `{0}`: {1}")]
    BadInstantiation(String, String),
}

/// A side condition whose truth may depend on unresolved metas.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum SideCond {
    /// `T` is `Linearly` or `Mut`.
    Consume(Type),
    /// `T` is `Int`, `End` or `Share`.
    Copyable(Type),
    /// `T` is `Linearly`, `Ref`, `Now` or `Mut`.
    LinearOnly(Type),
    /// The lifetime is a single lifetime id.
    Atomic(Lifetime),
    Leq(Lifetime, Lifetime),
}

impl SideCond {
    /// `None` while the relevant part is still a meta.
    pub fn holds(&self) -> Option<bool> {
        match self {
            SideCond::Consume(t) => match t {
                Type::Meta(_) | Type::Borrow(BorrowKind::Meta(_), ..) => None,
                Type::Linearly | Type::Borrow(BorrowKind::Mut, ..) => Some(true),
                _ => Some(false),
            },
            SideCond::Copyable(t) => match t {
                Type::Meta(_) | Type::Borrow(BorrowKind::Meta(_), ..) => None,
                Type::Int | Type::End(_) | Type::Borrow(BorrowKind::Share, ..) => Some(true),
                _ => Some(false),
            },
            SideCond::LinearOnly(t) => match t {
                Type::Meta(_) | Type::Borrow(BorrowKind::Meta(_), ..) => None,
                Type::Linearly | Type::Ref(_) | Type::Now(_) | Type::Borrow(BorrowKind::Mut, ..) => Some(true),
                _ => Some(false),
            },
            SideCond::Atomic(l) => match l.normalize() {
                Lifetime::Atom(_) => Some(true),
                Lifetime::Meta(_) => None,
                _ => Some(false),
            },
            SideCond::Leq(a, b) => {
                if lifetime_leq(a, b) {
                    Some(true)
                } else if a.has_meta() || b.has_meta() {
                    None
                } else {
                    Some(false)
                }
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            SideCond::Consume(t) => format!("`{t}` must be Linearly or a Mut borrower"),
            SideCond::Copyable(t) => format!("`{t}` must be Int, End or a Share borrower"),
            SideCond::LinearOnly(t) => format!("`{t}` must be Linearly, Ref, Now or a Mut borrower"),
            SideCond::Atomic(l) => format!("`{l}` must be a single lifetime id"),
            SideCond::Leq(a, b) => format!("`{a}` must be shorter than `{b}`"),
        }
    }

    pub fn map(&self, f: &impl Fn(&Type) -> Type, g: &impl Fn(&Lifetime) -> Lifetime) -> SideCond {
        match self {
            SideCond::Consume(t) => SideCond::Consume(f(t)),
            SideCond::Copyable(t) => SideCond::Copyable(f(t)),
            SideCond::LinearOnly(t) => SideCond::LinearOnly(f(t)),
            SideCond::Atomic(l) => SideCond::Atomic(g(l)),
            SideCond::Leq(a, b) => SideCond::Leq(g(a), g(b)),
        }
    }
}

/// Instantiates the signature of `op` without evaluating its side condition.
pub(crate) fn sig_instantiate(op: SigOp, inst: &[TyArgValue]) -> Result<(Signature, Option<SideCond>), SignatureError> {
    let params = sig_params(op);
    let bad = |msg: String| SignatureError::BadInstantiation(op.to_string(), msg);
    if inst.len() != params.len() {
        return Err(bad(format!("expected {} arguments, got {}", params.len(), inst.len())));
    }
    for (i, (p, v)) in params.iter().zip(inst).enumerate() {
        let ok = matches!(
            (p, v),
            (L | I, TyArgValue::Lifetime(_)) | (T, TyArgValue::Type(_)) | (K, TyArgValue::Kind(BorrowKind::Mut | BorrowKind::Share | BorrowKind::Meta(_)))
        );
        if !ok {
            return Err(bad(format!("argument {} must be a {}", i + 1, param_word(*p))));
        }
    }
    let ty = |i: usize| match &inst[i] {
        TyArgValue::Type(t) => t.clone(),
        _ => unreachable!(),
    };
    let lt = |i: usize| match &inst[i] {
        TyArgValue::Lifetime(l) => l.clone(),
        _ => unreachable!(),
    };
    let kind = |i: usize| match &inst[i] {
        TyArgValue::Kind(k) => *k,
        _ => unreachable!(),
    };
    let b = Box::new;
    let sig = |args: Vec<Type>, result: Type| Signature { args, result };
    let out = match op {
        SigOp::Op(o) => match o {
            Op::Int(_) => (sig(vec![Type::Int, Type::Int], Type::Int), None),
            Op::Rel(_) => (sig(vec![Type::Int, Type::Int], Type::bool()), None),
            Op::Par => (sig(vec![ty(0), ty(1)], Type::pair(ty(0), ty(1))), None),
            Op::Consume => (sig(vec![ty(0)], Type::unit()), Some(SideCond::Consume(ty(0)))),
            Op::Move => (sig(vec![ty(0)], Type::ur(ty(0))), Some(SideCond::Copyable(ty(0)))),
            Op::Linearly => (sig(vec![Type::lin(Type::Linearly, Type::ur(ty(0)))], Type::ur(ty(0))), None),
            Op::WithLinearly => (sig(vec![ty(0)], Type::pair(Type::Linearly, ty(0))), Some(SideCond::LinearOnly(ty(0)))),
            Op::NewRef => (sig(vec![Type::Linearly, ty(0)], Type::Ref(b(ty(0)))), None),
            Op::FreeRef => (sig(vec![Type::Ref(b(ty(0)))], ty(0)), None),
            Op::NewLifetime => {
                let iota = Name::from("i");
                let f = Type::Forall(BinderKind::LifetimeId, iota.clone(), b(Type::lin(Type::Now(Lifetime::Atom(iota)), ty(0))));
                (sig(vec![Type::Linearly, f], ty(0)), None)
            }
            Op::EndLifetime => (sig(vec![Type::Now(lt(0))], Type::ur(Type::End(lt(0)))), Some(SideCond::Atomic(lt(0)))),
            Op::Borrow => (
                sig(vec![Type::Linearly, ty(1)], Type::pair(Type::mut_(lt(0), ty(1)), Type::Lend(lt(0), b(ty(1))))),
                None,
            ),
            Op::Share => (sig(vec![Type::mut_(lt(0), ty(1))], Type::ur(Type::share(lt(0), ty(1)))), None),
            Op::Copy => (sig(vec![Type::share(lt(0), ty(1))], ty(1)), Some(SideCond::Copyable(ty(1)))),
            Op::JoinMut => (
                sig(
                    vec![Type::Borrow(kind(0), lt(1), b(Type::mut_(lt(2), ty(3))))],
                    Type::Borrow(kind(0), Lifetime::meet(lt(1), lt(2)), b(ty(3))),
                ),
                None,
            ),
            Op::Reclaim => (sig(vec![Type::Lend(lt(0), b(ty(1))), Type::End(lt(0))], ty(1)), None),
            Op::ExecBO => (
                sig(vec![Type::Now(lt(0)), Type::BO(lt(0), b(ty(1)))], Type::pair(Type::Now(lt(0)), ty(1))),
                None,
            ),
        },
        SigOp::Mo(m) => match m {
            MonadOp::Pure => (sig(vec![ty(1)], Type::BO(lt(0), b(ty(1)))), None),
            MonadOp::Bind => (
                sig(
                    vec![Type::BO(lt(0), b(ty(1))), Type::lin(ty(1), Type::BO(lt(0), b(ty(2))))],
                    Type::BO(lt(0), b(ty(2))),
                ),
                None,
            ),
            MonadOp::SexecBO => (
                sig(
                    vec![Type::Now(lt(0)), Type::BO(Lifetime::meet(lt(0), lt(1)), b(ty(2)))],
                    Type::BO(lt(1), b(Type::pair(Type::Now(lt(0)), ty(2)))),
                ),
                None,
            ),
            MonadOp::ParBO => (
                sig(
                    vec![Type::BO(lt(0), b(ty(1))), Type::BO(lt(0), b(ty(2)))],
                    Type::BO(lt(0), b(Type::pair(ty(1), ty(2)))),
                ),
                None,
            ),
            MonadOp::Deref => (
                sig(
                    vec![Type::Borrow(kind(0), lt(1), b(Type::Ref(b(ty(2)))))],
                    Type::BO(lt(1), b(Type::Borrow(kind(0), lt(1), b(ty(2))))),
                ),
                None,
            ),
            MonadOp::UpdateRef => {
                let (a, beta, t, u) = (lt(0), lt(1), ty(2), ty(3));
                let r = Type::mut_(a.clone(), Type::Ref(b(t.clone())));
                (
                    sig(
                        vec![Type::lin(t.clone(), Type::BO(beta.clone(), b(Type::pair(u.clone(), t)))), r.clone()],
                        Type::BO(beta.clone(), b(Type::pair(u, r))),
                    ),
                    Some(SideCond::Leq(beta, a)),
                )
            }
        },
    };
    Ok(out)
}

fn param_word(p: ParamKind) -> &'static str {
    match p {
        ParamKind::Lifetime => "lifetime",
        ParamKind::LifetimeId => "lifetime id",
        ParamKind::Type => "type",
        ParamKind::Kind => "borrower kind (Mut or Share)",
    }
}

/// Instantiated argument and result types of `op`, with its side condition
/// checked.
pub fn op_signature(op: SigOp, inst: &[TyArgValue]) -> Result<Signature, SignatureError> {
    let (sig, side) = sig_instantiate(op, inst)?;
    if let Some(c) = side {
        match c.holds() {
            Some(true) => {}
            Some(false) => return Err(SignatureError::SideConditionFailed(op.to_string(), c.describe())),
            None => return Err(SignatureError::BadInstantiation(op.to_string(), "instantiation is not ground".into())),
        }
    }
    Ok(sig)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a() -> Lifetime {
        Lifetime::var("a")
    }

    #[test]
    fn borrow_signature() {
        let s = op_signature(SigOp::Op(Op::Borrow), &[TyArgValue::Lifetime(a()), TyArgValue::Type(Type::Int)]).unwrap();
        assert_eq!(s.args, vec![Type::Linearly, Type::Int]);
        assert_eq!(s.result, Type::pair(Type::mut_(a(), Type::Int), Type::Lend(a(), Box::new(Type::Int))));
    }

    #[test]
    fn reclaim_signature() {
        let s = op_signature(SigOp::Op(Op::Reclaim), &[TyArgValue::Lifetime(a()), TyArgValue::Type(Type::Int)]).unwrap();
        assert_eq!(s.args, vec![Type::Lend(a(), Box::new(Type::Int)), Type::End(a())]);
        assert_eq!(s.result, Type::Int);
    }

    #[test]
    fn move_side_condition() {
        let e = op_signature(SigOp::Op(Op::Move), &[TyArgValue::Type(Type::Linearly)]).unwrap_err();
        assert!(matches!(e, SignatureError::SideConditionFailed(..)));
        for t in [Type::Int, Type::End(a()), Type::share(a(), Type::Linearly)] {
            assert!(op_signature(SigOp::Op(Op::Move), &[TyArgValue::Type(t)]).is_ok());
        }
    }

    #[test]
    fn update_ref_needs_shorter_monad_lifetime() {
        let b = Lifetime::var("b");
        let inst = |x: Lifetime, y: Lifetime| vec![TyArgValue::Lifetime(x), TyArgValue::Lifetime(y), TyArgValue::Type(Type::Int), TyArgValue::Type(Type::unit())];
        assert!(op_signature(SigOp::Mo(MonadOp::UpdateRef), &inst(a(), Lifetime::meet(a(), b.clone()))).is_ok());
        let e = op_signature(SigOp::Mo(MonadOp::UpdateRef), &inst(Lifetime::meet(a(), b.clone()), a())).unwrap_err();
        assert!(matches!(e, SignatureError::SideConditionFailed(..)));
    }

    #[test]
    fn end_lifetime_wants_an_id() {
        let ok = op_signature(SigOp::Op(Op::EndLifetime), &[TyArgValue::Lifetime(Lifetime::atom("i"))]).unwrap();
        assert_eq!(ok.result, Type::ur(Type::End(Lifetime::atom("i"))));
        assert!(op_signature(SigOp::Op(Op::EndLifetime), &[TyArgValue::Lifetime(Lifetime::Static)]).is_err());
    }

    #[test]
    fn bad_instantiation() {
        let e = op_signature(SigOp::Op(Op::Borrow), &[TyArgValue::Type(Type::Int)]).unwrap_err();
        assert!(matches!(e, SignatureError::BadInstantiation(..)));
        let e = op_signature(SigOp::Op(Op::Borrow), &[TyArgValue::Type(Type::Int), TyArgValue::Type(Type::Int)]).unwrap_err();
        assert!(matches!(e, SignatureError::BadInstantiation(..)));
    }

    #[test]
    fn every_operator_instantiates() {
        let ops = Op::PREFIX.iter().map(|o| SigOp::Op(*o)).chain(MonadOp::ALL.iter().map(|m| SigOp::Mo(*m)));
        for op in ops {
            let inst: Vec<TyArgValue> = sig_params(op)
                .iter()
                .map(|p| match p {
                    ParamKind::Lifetime => TyArgValue::Lifetime(a()),
                    ParamKind::LifetimeId => TyArgValue::Lifetime(Lifetime::atom("i")),
                    ParamKind::Type => TyArgValue::Type(Type::Int),
                    ParamKind::Kind => TyArgValue::Kind(BorrowKind::Mut),
                })
                .collect();
            let (s, _) = sig_instantiate(op, &inst).unwrap();
            let arity = match op {
                SigOp::Op(o) => o.arity(),
                SigOp::Mo(m) => m.arity(),
            };
            assert_eq!(s.args.len(), arity, "{op}");
        }
    }
}
