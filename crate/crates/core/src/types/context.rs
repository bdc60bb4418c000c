use std::collections::BTreeMap;

use thiserror::Error;

use super::order::mult_leq;
use super::subtype::subtype_in;
use super::ty::{type_alpha_eq, Mult, Type};
use crate::syntax::{default_decls, DataDecl, Name};

/// A typing context: each variable with its multiplicity and type.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TypingContext {
    pub entries: BTreeMap<Name, (Mult, Type)>,
}

impl TypingContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, x: &str, m: Mult, t: Type) -> Self {
        self.entries.insert(Name::from(x), (m, t));
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ContextError {
    #[error("`{0}` occurs in both contexts but is not unrestricted in both")]
    LinearShared(Name),
    #[error("`{0}` has different types in the two contexts")]
    TypeClash(Name),
}

/// `m · Γ`
pub fn ctx_scale(m: &Mult, ctx: &TypingContext) -> TypingContext {
    TypingContext {
        entries: ctx.entries.iter().map(|(x, (n, t))| (x.clone(), (m.times(n), t.clone()))).collect(),
    }
}

/// `Γ + Δ`. A variable may occur on both sides only if it is unrestricted
/// on both with the same type.
pub fn ctx_add(a: &TypingContext, b: &TypingContext) -> Result<TypingContext, ContextError> {
    let mut out = a.clone();
    for (x, (m, t)) in &b.entries {
        match out.entries.get(x) {
            None => {
                out.entries.insert(x.clone(), (m.clone(), t.clone()));
            }
            Some((m0, t0)) => {
                if *m0 != Mult::Many || *m != Mult::Many {
                    return Err(ContextError::LinearShared(x.clone()));
                }
                if !type_alpha_eq(t0, t) {
                    return Err(ContextError::TypeClash(x.clone()));
                }
            }
        }
    }
    Ok(out)
}

/// `Γ ⊑ Δ`: every entry `x :_ν U` of `Δ` is matched by `x :_μ T` in `Γ`
/// with `ν ≤ μ` and `T ≤ U`; entries of `Γ` missing from `Δ` must be
/// unrestricted, so that they can be dropped.
pub fn ctx_include(sub: &TypingContext, sup: &TypingContext) -> bool {
    ctx_include_in(&default_decls(), sub, sup)
}

pub fn ctx_include_in(decls: &[DataDecl], sub: &TypingContext, sup: &TypingContext) -> bool {
    let covered = sup.entries.iter().all(|(x, (nu, u))| match sub.entries.get(x) {
        Some((mu, t)) => mult_leq(nu, mu) && subtype_in(decls, t, u),
        None => false,
    });
    covered && sub.entries.iter().all(|(x, (m, _))| sup.entries.contains_key(x) || *m == Mult::Many)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Lifetime;

    #[test]
    fn add_rejects_linear_overlap() {
        let a = TypingContext::new().with("x", Mult::One, Type::Int);
        let b = TypingContext::new().with("x", Mult::Many, Type::Int);
        assert_eq!(ctx_add(&a, &b), Err(ContextError::LinearShared(Name::from("x"))));
        let w = TypingContext::new().with("x", Mult::Many, Type::Int);
        assert_eq!(ctx_add(&w, &b).unwrap(), w);
        let y = TypingContext::new().with("y", Mult::One, Type::Linearly);
        assert_eq!(ctx_add(&a, &y).unwrap().entries.len(), 2);
    }

    #[test]
    fn scale_multiplies() {
        let a = TypingContext::new().with("x", Mult::One, Type::Int).with("y", Mult::var("p"), Type::Int);
        let s = ctx_scale(&Mult::Many, &a);
        assert!(s.entries.values().all(|(m, _)| *m == Mult::Many));
        let s = ctx_scale(&Mult::var("q"), &a);
        assert_eq!(s.entries[&Name::from("y")].0, Mult::prod([Name::from("p"), Name::from("q")]));
    }

    #[test]
    fn include_weakens_and_subsumes() {
        let l = Lifetime::var("a");
        let sub = TypingContext::new()
            .with("x", Mult::Many, Type::End(Lifetime::Static))
            .with("junk", Mult::Many, Type::Int);
        let sup = TypingContext::new().with("x", Mult::One, Type::End(l.clone()));
        assert!(ctx_include(&sub, &sup));
        assert!(!ctx_include(&sup, &sub));
        let lin = TypingContext::new().with("x", Mult::One, Type::End(l)).with("junk", Mult::One, Type::Int);
        assert!(!ctx_include(&lin, &sup));
    }
}
