//! Static semantics: lifetimes, multiplicities, subtyping, typing contexts,
//! operator signatures and the bidirectional checker.

mod check;
mod context;
mod order;
mod signature;
mod subtype;
pub mod ty;

pub use check::{type_check, TypeError, TypeErrorKind, TypedProgram};
pub use context::{ctx_add, ctx_include, ctx_scale, ContextError, TypingContext};
pub use order::{lifetime_eq, lifetime_leq, mult_leq};
pub use signature::{op_signature, sig_params, ParamKind, SigOp, Signature, SignatureError};
pub use subtype::{subtype, subtype_in};
pub use ty::*;
