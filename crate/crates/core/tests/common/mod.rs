//! Generators and brute-force oracles shared by the property suites and the
//! acceptance runner.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use proptest::prelude::*;

use pbo_core::histories::{BorrowId, BorrowPath, History};
use pbo_core::runtime::{Env, RTerm, RefTarget, Wrapper};
use pbo_core::syntax::{default_decls, CtorDecl, DataDecl, Name, Term};
use pbo_core::types::{Lifetime, Mult, Type};

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

// ---------------------------------------------------------------- histories

pub fn path_strategy() -> impl Strategy<Value = BorrowPath> {
    (0u32..3, prop::collection::vec(0u32..3, 0..3)).prop_map(|(b, indices)| BorrowPath { root: BorrowId(b), indices })
}

/// At most six records.
pub fn history_strategy() -> impl Strategy<Value = History> {
    prop::collection::vec((path_strategy(), "[xyzw]"), 0..=6)
        .prop_map(|recs| History::from_records(recs.into_iter().map(|(p, x)| (p, Name::from(x)))))
}

// ---------------------------------------------------------------- lifetimes

/// Lifetime terms of depth at most `depth` over two variables, one id and `static`.
pub fn lifetime_strategy(depth: u32) -> impl Strategy<Value = Lifetime> {
    let leaf = prop_oneof![
        Just(Lifetime::Static),
        Just(Lifetime::var("a")),
        Just(Lifetime::var("b")),
        Just(Lifetime::atom("1")),
    ];
    leaf.prop_recursive(depth, 16, 2, |inner| (inner.clone(), inner).prop_map(|(x, y)| Lifetime::meet(x, y)))
}

fn lifetime_generators(l: &Lifetime, out: &mut BTreeSet<String>) {
    match l {
        Lifetime::Atom(n) => {
            out.insert(format!("^{n}"));
        }
        Lifetime::Var(n) => {
            out.insert(format!("'{n}"));
        }
        Lifetime::Meet(a, b) => {
            lifetime_generators(a, out);
            lifetime_generators(b, out);
        }
        Lifetime::Static | Lifetime::Meta(_) => {}
    }
}

fn eval_lifetime(l: &Lifetime, model: &BTreeMap<String, u8>) -> u8 {
    match l {
        Lifetime::Static => 0b11,
        Lifetime::Atom(n) => model[&format!("^{n}")],
        Lifetime::Var(n) => model[&format!("'{n}")],
        Lifetime::Meet(a, b) => eval_lifetime(a, model) & eval_lifetime(b, model),
        Lifetime::Meta(_) => unreachable!("closed lifetimes only"),
    }
}

fn all_models(gens: &BTreeSet<String>, values: &[u8]) -> Vec<BTreeMap<String, u8>> {
    let mut models = vec![BTreeMap::new()];
    for g in gens {
        models = models
            .into_iter()
            .flat_map(|m| {
                values.iter().map(move |v| {
                    let mut m = m.clone();
                    m.insert(g.clone(), *v);
                    m
                })
            })
            .collect();
    }
    models
}

/// Lifetimes read as sets of time points (two points suffice), meet as
/// intersection and `static` as everything: `a ≤ b` holds in every model.
pub fn lifetime_leq_oracle(a: &Lifetime, b: &Lifetime) -> bool {
    let mut gens = BTreeSet::new();
    lifetime_generators(a, &mut gens);
    lifetime_generators(b, &mut gens);
    all_models(&gens, &[0b00, 0b01, 0b10, 0b11]).iter().all(|m| {
        let (x, y) = (eval_lifetime(a, m), eval_lifetime(b, m));
        x & y == x
    })
}

/// Every lifetime term of depth at most one over `'a`, `'b`, `^1` and `static`.
pub fn small_lifetimes() -> Vec<Lifetime> {
    let leaves = vec![Lifetime::Static, Lifetime::var("a"), Lifetime::var("b"), Lifetime::atom("1")];
    let mut out = leaves.clone();
    for x in &leaves {
        for y in &leaves {
            out.push(Lifetime::meet(x.clone(), y.clone()));
        }
    }
    out
}

/// Least preorder on `universe` closed under the semilattice axioms: reflexivity,
/// `x ≤ static`, `x ∧ y ≤ x`, `x ∧ y ≤ y`, `z ≤ x, z ≤ y ⟹ z ≤ x ∧ y` and
/// transitivity. Computed by saturation.
pub fn lifetime_closure(universe: &[Lifetime]) -> Vec<Vec<bool>> {
    let n = universe.len();
    let mut le = vec![vec![false; n]; n];
    let idx = |l: &Lifetime| universe.iter().position(|u| u == l);
    for i in 0..n {
        le[i][i] = true;
        if let Some(s) = idx(&Lifetime::Static) {
            le[i][s] = true;
        }
        if let Lifetime::Meet(x, y) = &universe[i] {
            for part in [x, y] {
                if let Some(j) = idx(part) {
                    le[i][j] = true;
                }
            }
        }
    }
    loop {
        let mut changed = false;
        for k in 0..n {
            if let Lifetime::Meet(x, y) = &universe[k] {
                if let (Some(i), Some(j)) = (idx(x), idx(y)) {
                    for z in 0..n {
                        if le[z][i] && le[z][j] && !le[z][k] {
                            le[z][k] = true;
                            changed = true;
                        }
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if le[i][j] {
                    for k in 0..n {
                        if le[j][k] && !le[i][k] {
                            le[i][k] = true;
                            changed = true;
                        }
                    }
                }
            }
        }
        if !changed {
            return le;
        }
    }
}

// ---------------------------------------------------------- multiplicities

pub fn mult_strategy() -> impl Strategy<Value = Mult> {
    prop_oneof![
        Just(Mult::One),
        Just(Mult::Many),
        prop::collection::vec(prop_oneof![Just("p"), Just("q"), Just("r")], 1..4)
            .prop_map(|vs| Mult::Prod(vs.into_iter().map(Name::from).collect())),
    ]
}

fn eval_mult(m: &Mult, model: &BTreeMap<String, u8>) -> u8 {
    match m {
        Mult::One => 0,
        Mult::Many => 1,
        Mult::Prod(vs) => vs.iter().map(|v| model[v.as_str()]).max().unwrap_or(0),
    }
}

/// Multiplicities read in the two-point lattice `1 < ω` with product as join:
/// `m ≤ n` holds under every assignment of the variables.
pub fn mult_leq_oracle(m: &Mult, n: &Mult) -> bool {
    let mut gens = BTreeSet::new();
    for x in [m, n] {
        if let Mult::Prod(vs) = x {
            gens.extend(vs.iter().map(|v| v.to_string()));
        }
    }
    all_models(&gens, &[0, 1]).iter().all(|md| eval_mult(m, md) <= eval_mult(n, md))
}

// -------------------------------------------------------------------- types

pub fn list_decl() -> DataDecl {
    let a = || Type::Var(Name::from("a"));
    DataDecl {
        name: Name::from("List"),
        params: vec![Name::from("a")],
        ctors: vec![
            CtorDecl { name: Name::from("Nil"), fields: vec![] },
            CtorDecl {
                name: Name::from("Cons"),
                fields: vec![(Mult::One, a()), (Mult::One, Type::data("List", vec![a()]))],
            },
        ],
    }
}

pub fn decls_with_list() -> Vec<DataDecl> {
    let mut d = default_decls();
    d.push(list_decl());
    d
}

/// Closed types without binders, depth at most `depth`, with a small pool of
/// lifetimes and multiplicities so that related pairs come up often.
pub fn type_strategy(depth: u32) -> impl Strategy<Value = Type> {
    let lt = prop_oneof![
        Just(Lifetime::Static),
        Just(Lifetime::var("a")),
        Just(Lifetime::meet(Lifetime::var("a"), Lifetime::var("b"))),
    ];
    let mult = prop_oneof![Just(Mult::One), Just(Mult::Many), Just(Mult::var("p"))];
    let leaf = prop_oneof![
        Just(Type::Int),
        Just(Type::unit()),
        Just(Type::Linearly),
        lt.clone().prop_map(Type::End),
        lt.clone().prop_map(Type::Now),
    ];
    leaf.prop_recursive(depth, 24, 2, move |inner| {
        prop_oneof![
            (inner.clone(), mult.clone(), inner.clone()).prop_map(|(a, m, b)| Type::fun(a, m, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Type::pair(a, b)),
            inner.clone().prop_map(Type::ur),
            inner.clone().prop_map(|a| Type::data("List", vec![a])),
            inner.clone().prop_map(|a| Type::Ref(Box::new(a))),
            (lt.clone(), inner.clone()).prop_map(|(l, a)| Type::mut_(l, a)),
            (lt.clone(), inner.clone()).prop_map(|(l, a)| Type::share(l, a)),
            (lt.clone(), inner.clone()).prop_map(|(l, a)| Type::Lend(l, Box::new(a))),
            (lt.clone(), inner.clone()).prop_map(|(l, a)| Type::BO(l, Box::new(a))),
        ]
    })
}

const LT_POOL: [&str; 4] = ["static", "a", "b", "ab"];

fn pooled_lifetime(i: usize) -> Lifetime {
    match LT_POOL[i % LT_POOL.len()] {
        "static" => Lifetime::Static,
        "ab" => Lifetime::meet(Lifetime::var("a"), Lifetime::var("b")),
        v => Lifetime::var(v),
    }
}

fn pooled_mult(i: usize) -> Mult {
    [Mult::One, Mult::Many, Mult::var("p")][i % 3].clone()
}

/// Same shape as `t`, with every lifetime and multiplicity redrawn from
/// `choices` (an exhausted or zero choice keeps the original).
pub fn relabel(t: &Type, choices: &mut impl Iterator<Item = usize>) -> Type {
    let lt = |l: &Lifetime, c: &mut dyn Iterator<Item = usize>| match c.next() {
        Some(i) if i > 0 => pooled_lifetime(i),
        _ => l.clone(),
    };
    match t {
        Type::Fun(a, m, b) => {
            let a = relabel(a, choices);
            let m = match choices.next() {
                Some(i) if i > 0 => pooled_mult(i),
                _ => m.clone(),
            };
            Type::fun(a, m, relabel(b, choices))
        }
        Type::Data(n, xs) => Type::Data(n.clone(), xs.iter().map(|x| relabel(x, choices)).collect()),
        Type::Ref(a) => Type::Ref(Box::new(relabel(a, choices))),
        Type::Now(l) => Type::Now(lt(l, choices)),
        Type::End(l) => Type::End(lt(l, choices)),
        Type::Borrow(k, l, a) => Type::Borrow(*k, lt(l, choices), Box::new(relabel(a, choices))),
        Type::Lend(l, a) => Type::Lend(lt(l, choices), Box::new(relabel(a, choices))),
        Type::BO(l, a) => Type::BO(lt(l, choices), Box::new(relabel(a, choices))),
        other => other.clone(),
    }
}

/// Pairs of types of the same shape, so that a good share are related.
pub fn similar_types_strategy(depth: u32) -> impl Strategy<Value = (Type, Type)> {
    (type_strategy(depth), prop::collection::vec(0usize..8, 0..40))
        .prop_map(|(t, cs)| {
            let u = relabel(&t, &mut cs.into_iter());
            (t, u)
        })
}

/// Triples of types of the same shape.
pub fn similar_triples_strategy(depth: u32) -> impl Strategy<Value = (Type, Type, Type)> {
    (type_strategy(depth), prop::collection::vec(0usize..8, 0..40), prop::collection::vec(0usize..8, 0..40))
        .prop_map(|(t, c1, c2)| {
            let u = relabel(&t, &mut c1.into_iter());
            let v = relabel(&t, &mut c2.into_iter());
            (t, u, v)
        })
}

/// Declarative subtyping read off the rules directly. Lifetimes and
/// multiplicities go through the model oracles; data types unfold their
/// constructor fields, recursive ones at most `fuel` times (then assumed).
pub fn subtype_oracle(t: &Type, u: &Type, fuel: u32) -> bool {
    use pbo_core::types::BorrowKind;
    let lt = lifetime_leq_oracle;
    match (t, u) {
        (Type::Int, Type::Int) | (Type::Linearly, Type::Linearly) => true,
        (Type::Fun(a1, m1, r1), Type::Fun(a2, m2, r2)) => {
            mult_leq_oracle(m1, m2) && subtype_oracle(a2, a1, fuel) && subtype_oracle(r1, r2, fuel)
        }
        (Type::Ref(a), Type::Ref(b)) => subtype_oracle(a, b, fuel),
        (Type::Now(l1), Type::Now(l2)) => lt(l1, l2) && lt(l2, l1),
        (Type::End(l1), Type::End(l2)) => lt(l2, l1),
        (Type::Borrow(k1, l1, a), Type::Borrow(k2, l2, b)) => {
            k1 == k2
                && lt(l2, l1)
                && match k1 {
                    BorrowKind::Share => subtype_oracle(a, b, fuel),
                    _ => subtype_oracle(a, b, fuel) && subtype_oracle(b, a, fuel),
                }
        }
        (Type::Lend(l1, a), Type::Lend(l2, b)) => lt(l1, l2) && subtype_oracle(a, b, fuel),
        (Type::BO(l1, a), Type::BO(l2, b)) => lt(l2, l1) && subtype_oracle(a, b, fuel),
        (Type::Data(n1, x1), Type::Data(n2, x2)) if n1 == n2 && x1.len() == x2.len() => match n1.as_str() {
            "List" => {
                fuel == 0
                    || (subtype_oracle(&x1[0], &x2[0], fuel)
                        && subtype_oracle(
                            &Type::data("List", vec![x1[0].clone()]),
                            &Type::data("List", vec![x2[0].clone()]),
                            fuel - 1,
                        ))
            }
            _ => x1.iter().zip(x2).all(|(a, b)| subtype_oracle(a, b, fuel)),
        },
        _ => false,
    }
}

// ------------------------------------------------------------ value trees

/// A value as a tree, with variables and sharing forgotten.
#[derive(Clone, Debug, PartialEq)]
pub enum V {
    Int(i64),
    Ref(Box<V>),
    Con(String, Vec<V>),
    Wrap(Vec<BorrowPath>, Box<V>),
}

pub fn value_strategy(depth: u32) -> impl Strategy<Value = V> {
    let leaf = (0i64..10).prop_map(V::Int);
    leaf.prop_recursive(depth, 24, 2, |inner| {
        prop_oneof![
            3 => inner.clone().prop_map(|v| V::Ref(Box::new(v))),
            1 => inner.clone().prop_map(|v| V::Wrap(vec![BorrowPath::new(BorrowId(7))], Box::new(V::Ref(Box::new(v))))),
            2 => (inner.clone(), inner.clone()).prop_map(|(a, b)| V::Con("(,)".into(), vec![a, b])),
            1 => inner.clone().prop_map(|a| V::Con("Ur".into(), vec![a])),
            1 => Just(V::Con("()".into(), vec![])),
        ]
    })
}

/// A restore instance: the value under borrow path `b0`, and records at `b0`
/// and below (some deliberately off the value's shape).
#[derive(Clone, Debug)]
pub struct RestoreCase {
    pub value: V,
    pub records: Vec<(Vec<u32>, V)>,
}

pub fn restore_case_strategy() -> impl Strategy<Value = RestoreCase> {
    let rec = (prop::collection::vec(prop_oneof![4 => Just(0u32), 2 => Just(1u32), 1 => Just(2u32)], 0..4), value_strategy(2));
    (value_strategy(4), prop::collection::vec(rec, 0..=6)).prop_map(|(value, recs)| {
        let mut seen = BTreeSet::new();
        let records = recs.into_iter().filter(|(p, _)| seen.insert(p.clone())).collect();
        RestoreCase { value, records }
    })
}

pub struct EnvBuilder {
    pub env: Env,
    next: usize,
}

impl EnvBuilder {
    pub fn new() -> Self {
        EnvBuilder { env: Env::new(), next: 0 }
    }

    fn fresh(&mut self) -> Name {
        self.next += 1;
        Name::from(format!("n{}", self.next))
    }

    fn term(&mut self, v: &V) -> RTerm {
        match v {
            V::Int(n) => RTerm::int(*n),
            V::Ref(inner) => RTerm::Ref(RefTarget::Var(self.bind(inner))),
            V::Con(c, fs) => {
                let names: Vec<Name> = fs.iter().map(|f| self.bind(f)).collect();
                RTerm::con(c, &names.iter().collect::<Vec<_>>())
            }
            V::Wrap(ps, inner) => RTerm::Wrap(Wrapper::Mut(ps.clone()), Box::new(self.term(inner))),
        }
    }

    pub fn bind(&mut self, v: &V) -> Name {
        let t = self.term(v);
        let x = self.fresh();
        self.env.insert(x.clone(), t);
        x
    }
}

fn term_tree(env: &Env, t: &RTerm) -> Option<V> {
    Some(match t {
        RTerm::Ref(RefTarget::Var(y)) => V::Ref(Box::new(tree_of(env, y)?)),
        RTerm::Wrap(Wrapper::Mut(ps), inner) => V::Wrap(ps.clone(), Box::new(term_tree(env, inner)?)),
        RTerm::Src(Term::Int(n)) => V::Int(*n),
        RTerm::Src(Term::Var(y)) => tree_of(env, y)?,
        other => {
            let (c, fs) = other.as_con()?;
            V::Con(c.to_string(), fs.iter().map(|f| tree_of(env, f)).collect::<Option<_>>()?)
        }
    })
}

pub fn tree_of(env: &Env, x: &Name) -> Option<V> {
    term_tree(env, env.get(x)?)
}

fn unwrap_mut(v: &mut V) -> &mut V {
    match v {
        V::Wrap(_, inner) => unwrap_mut(inner),
        other => other,
    }
}

fn apply_record(v: &mut V, rel: &[u32], content: &V) -> Result<(), ()> {
    let node = unwrap_mut(v);
    match (node, rel.split_first()) {
        (V::Ref(inner), None) => {
            **inner = content.clone();
            Ok(())
        }
        (_, None) => Err(()),
        (V::Ref(inner), Some((&i, rest))) => {
            if i == 0 {
                apply_record(inner, rest, content)
            } else {
                Ok(())
            }
        }
        (V::Con(_, fs), Some((&i, rest))) => match fs.get_mut(i as usize) {
            Some(f) => apply_record(f, rest, content),
            None => Ok(()),
        },
        _ => Err(()),
    }
}

/// Replays the records onto the value outermost-first: a record overwrites
/// the reference at its position, and deeper records then land inside the
/// content it wrote. Records off the value's shape are ignored; records
/// that would look inside an integer or overwrite a non-reference are stuck.
pub fn replay_oracle(case: &RestoreCase) -> Result<V, ()> {
    let mut recs: Vec<&(Vec<u32>, V)> = case.records.iter().collect();
    recs.sort_by_key(|(p, _)| p.len());
    let mut v = case.value.clone();
    for (p, content) in recs {
        apply_record(&mut v, p, content)?;
    }
    Ok(v)
}
