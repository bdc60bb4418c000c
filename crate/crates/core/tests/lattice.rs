mod common;

use proptest::prelude::*;

use common::*;
use pbo_core::types::{ctx_add, ctx_include, ctx_scale, lifetime_leq, mult_leq, subtype, subtype_in, Mult, Type, TypingContext};

#[test]
fn lifetime_leq_matches_the_closure_exhaustively() {
    let u = small_lifetimes();
    let le = lifetime_closure(&u);
    for (i, a) in u.iter().enumerate() {
        for (j, b) in u.iter().enumerate() {
            assert_eq!(lifetime_leq(a, b), le[i][j], "{a} <= {b}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn lifetime_leq_matches_models(a in lifetime_strategy(3), b in lifetime_strategy(3)) {
        prop_assert_eq!(lifetime_leq(&a, &b), lifetime_leq_oracle(&a, &b));
    }

    #[test]
    fn lifetime_order_laws(a in lifetime_strategy(3), b in lifetime_strategy(3), c in lifetime_strategy(3)) {
        use pbo_core::types::Lifetime;
        prop_assert!(lifetime_leq(&a, &a));
        if lifetime_leq(&a, &b) && lifetime_leq(&b, &c) {
            prop_assert!(lifetime_leq(&a, &c));
        }
        let m = Lifetime::meet(a.clone(), b.clone());
        prop_assert!(lifetime_leq(&m, &a) && lifetime_leq(&m, &b));
        prop_assert_eq!(lifetime_leq(&c, &m), lifetime_leq(&c, &a) && lifetime_leq(&c, &b));
    }

    #[test]
    fn mult_leq_matches_models(m in mult_strategy(), n in mult_strategy()) {
        prop_assert_eq!(mult_leq(&m, &n), mult_leq_oracle(&m, &n));
    }

    #[test]
    fn mult_order_laws(m in mult_strategy(), n in mult_strategy(), k in mult_strategy()) {
        prop_assert!(mult_leq(&m, &m));
        if mult_leq(&m, &n) && mult_leq(&n, &k) {
            prop_assert!(mult_leq(&m, &k));
        }
        // product is the join
        let j = m.times(&n);
        prop_assert!(mult_leq(&m, &j) && mult_leq(&n, &j));
        prop_assert_eq!(mult_leq(&j, &k), mult_leq(&m, &k) && mult_leq(&n, &k));
    }

    #[test]
    fn subtype_matches_unfolding((t, u) in similar_types_strategy(4), w in type_strategy(3)) {
        let d = decls_with_list();
        prop_assert_eq!(subtype_in(&d, &t, &u), subtype_oracle(&t, &u, 3));
        prop_assert_eq!(subtype_in(&d, &t, &w), subtype_oracle(&t, &w, 3));
        prop_assert_eq!(subtype_in(&d, &t, &t.clone()), true);
    }

    #[test]
    fn subtype_is_transitive((t, u, v) in similar_triples_strategy(4)) {
        let d = decls_with_list();
        if subtype_in(&d, &t, &u) && subtype_in(&d, &u, &v) {
            prop_assert!(subtype_in(&d, &t, &v));
        }
    }

    #[test]
    fn context_laws(m in mult_strategy(), n in mult_strategy(), t in type_strategy(1)) {
        let g = TypingContext::new().with("x", n.clone(), t.clone());
        let one = ctx_scale(&Mult::One, &g);
        prop_assert_eq!(one.entries.get("x").map(|e| e.0.normalize()), Some(n.normalize()));
        let mg = ctx_scale(&m, &g);
        prop_assert_eq!(mg.entries.get("x").map(|e| e.0.clone()), Some(m.times(&n)));
        prop_assert!(ctx_include(&g, &g));
        let e = TypingContext::new();
        prop_assert_eq!(ctx_add(&g, &e), Ok(g.clone()));
        let h = TypingContext::new().with("y", Mult::One, Type::Int);
        prop_assert_eq!(ctx_add(&g, &h), ctx_add(&h, &g));
        // dropping an entry is allowed exactly when it is unrestricted
        prop_assert_eq!(ctx_include(&g, &e), n == Mult::Many);
    }
}

#[test]
fn subtype_relates_some_distinct_types() {
    use pbo_core::types::Lifetime;
    let a = Lifetime::var("a");
    assert!(subtype(&Type::End(Lifetime::Static), &Type::End(a.clone())));
    assert!(subtype(&Type::share(a.clone(), Type::End(Lifetime::Static)), &Type::share(Lifetime::meet(a.clone(), Lifetime::var("b")), Type::End(a))));
}
