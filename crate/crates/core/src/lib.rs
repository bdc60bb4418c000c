//! Reference implementation of a core calculus for pure borrowing: parser,
//! linear type checker, a mutative and a denotational small-step semantics,
//! and a harness that checks metatheory properties on programs.

pub mod histories;
pub mod syntax;
pub mod types;
pub mod runtime;
pub mod sem_mut;
pub mod sem_den;
pub mod canon;
pub mod harness;
