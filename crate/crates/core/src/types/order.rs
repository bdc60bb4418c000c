use super::ty::{Lifetime, Mult};

/// `a ≤ b` in the lifetime semilattice: every generator of `b` occurs in `a`.
/// `static` is the empty meet, so everything is below it.
pub fn lifetime_leq(a: &Lifetime, b: &Lifetime) -> bool {
    b.atoms().is_subset(&a.atoms())
}

pub fn lifetime_eq(a: &Lifetime, b: &Lifetime) -> bool {
    a.atoms() == b.atoms()
}

/// `m ≤ n` over normalized multiplicities. Products are sets of variables, so
/// `Π S ≤ Π T` exactly when `S ⊆ T`.
pub fn mult_leq(m: &Mult, n: &Mult) -> bool {
    match (m.normalize(), n.normalize()) {
        (Mult::One, _) | (_, Mult::Many) => true,
        (Mult::Many, _) => false,
        (Mult::Prod(_), Mult::One) => false,
        (Mult::Prod(s), Mult::Prod(t)) => s.iter().all(|x| t.contains(x)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lifetime_examples() {
        let (a, b) = (Lifetime::var("a"), Lifetime::var("b"));
        assert!(lifetime_leq(&Lifetime::meet(a.clone(), b.clone()), &a));
        assert!(lifetime_leq(&a, &Lifetime::Static));
        assert!(!lifetime_leq(&a, &b));
        assert!(!lifetime_leq(&Lifetime::Static, &a));
        assert!(lifetime_leq(&a, &Lifetime::meet(a.clone(), a.clone())));
    }

    #[test]
    fn mult_examples() {
        let (p, q) = (Mult::var("p"), Mult::var("q"));
        assert!(mult_leq(&Mult::One, &p));
        assert!(mult_leq(&p, &Mult::Many));
        assert!(!mult_leq(&p, &q));
        assert!(mult_leq(&p, &p.times(&q)));
        assert!(!mult_leq(&p.times(&q), &p));
        assert!(!mult_leq(&Mult::Many, &p));
        assert!(!mult_leq(&p, &Mult::One));
    }
}
