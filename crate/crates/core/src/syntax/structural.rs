use std::collections::BTreeSet;

use super::ast::*;
use super::Name;
use crate::types::{lifetime_alpha_eq_in, mult_alpha_eq_in, type_alpha_eq_in, AlphaEnv, Mult};

/// Monotone supply of names `base#n`. Source identifiers never contain `#`,
/// so generated names cannot clash with them.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FreshSupply {
    next: u64,
}

impl FreshSupply {
    pub fn starting_at(next: u64) -> Self {
        FreshSupply { next }
    }

    pub fn peek(&self) -> u64 {
        self.next
    }

    pub fn name(&mut self, hint: &Name) -> Name {
        let n = self.next;
        self.next += 1;
        Name::from(format!("{}#{n}", hint.base()))
    }
}

pub fn free_vars(t: &Term) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    fv(t, &mut Vec::new(), &mut out);
    out
}

fn fv(t: &Term, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
    let mut note = |x: &Name, bound: &Vec<Name>| {
        if !bound.contains(x) {
            out.insert(x.clone());
        }
    };
    match t {
        Term::Var(x) => note(x, bound),
        Term::Seq(x, body) => {
            note(x, bound);
            fv(body, bound, out);
        }
        Term::Let(kind, binds, body) => {
            let n = bound.len();
            if *kind == LetKind::Rec {
                bound.extend(binds.iter().map(|b| b.name.clone()));
            }
            for b in binds {
                fv(&b.body, bound, out);
            }
            bound.truncate(n);
            bound.extend(binds.iter().map(|b| b.name.clone()));
            fv(body, bound, out);
            bound.truncate(n);
        }
        Term::Lam(b, body) => {
            bound.push(b.name.clone());
            fv(body, bound, out);
            bound.pop();
        }
        Term::App(f, a) => {
            fv(f, bound, out);
            fv(a, bound, out);
        }
        Term::Int(_) => {}
        Term::Con(_, _, args) | Term::Op(_, _, args) | Term::Mo(_, _, args) => {
            for a in args {
                fv(a, bound, out);
            }
        }
        Term::Case(s, branches) => {
            fv(s, bound, out);
            for br in branches {
                let n = bound.len();
                bound.extend(br.vars.iter().cloned());
                fv(&br.body, bound, out);
                bound.truncate(n);
            }
        }
        Term::TyAbs(_, _, body) | Term::TyApp(body, _) | Term::Ann(body, _) | Term::At(_, body) => fv(body, bound, out),
    }
}

/// Alpha-equivalence: equal up to consistent renaming of bound term and type
/// variables. Position wrappers are ignored.
pub fn alpha_equal(t1: &Term, t2: &Term) -> bool {
    let mut a = Alpha { vars: Vec::new(), tys: Vec::new() };
    a.term(t1, t2)
}

struct Alpha {
    vars: Vec<(Name, Name)>,
    tys: AlphaEnv,
}

impl Alpha {
    fn same_var(&self, x: &Name, y: &Name) -> bool {
        let i = self.vars.iter().rposition(|(l, _)| l == x);
        let j = self.vars.iter().rposition(|(_, r)| r == y);
        match (i, j) {
            (None, None) => x == y,
            (i, j) => i == j,
        }
    }

    fn opt_mult(&self, a: &Option<Mult>, b: &Option<Mult>) -> bool {
        match (a, b) {
            (None, None) => true,
            (Some(a), Some(b)) => mult_alpha_eq_in(a, b, &self.tys),
            _ => false,
        }
    }

    fn opt_ty(&mut self, a: &Option<crate::types::Type>, b: &Option<crate::types::Type>) -> bool {
        match (a, b) {
            (None, None) => true,
            (Some(a), Some(b)) => type_alpha_eq_in(a, b, &mut self.tys),
            _ => false,
        }
    }

    fn tyargs(&mut self, a: &[TyArg], b: &[TyArg]) -> bool {
        a.len() == b.len()
            && a.iter().zip(b).all(|(x, y)| match (x, y) {
                (TyArg::Hole, TyArg::Hole) => true,
                (TyArg::Type(p), TyArg::Type(q)) => type_alpha_eq_in(p, q, &mut self.tys),
                (TyArg::Lifetime(p), TyArg::Lifetime(q)) => lifetime_alpha_eq_in(p, q, &self.tys),
                (TyArg::Mult(p), TyArg::Mult(q)) => mult_alpha_eq_in(p, q, &self.tys),
                (TyArg::Kind(p), TyArg::Kind(q)) => p == q,
                _ => false,
            })
    }

    fn terms(&mut self, a: &[Term], b: &[Term]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| self.term(x, y))
    }

    fn term(&mut self, t1: &Term, t2: &Term) -> bool {
        match (t1.peel(), t2.peel()) {
            (Term::Var(x), Term::Var(y)) => self.same_var(x, y),
            (Term::Int(a), Term::Int(b)) => a == b,
            (Term::Seq(x, a), Term::Seq(y, b)) => self.same_var(x, y) && self.term(a, b),
            (Term::App(f1, a1), Term::App(f2, a2)) => self.term(f1, f2) && self.term(a1, a2),
            (Term::Con(c1, i1, a1), Term::Con(c2, i2, a2)) => c1 == c2 && self.tyargs(i1, i2) && self.terms(a1, a2),
            (Term::Op(o1, i1, a1), Term::Op(o2, i2, a2)) => o1 == o2 && self.tyargs(i1, i2) && self.terms(a1, a2),
            (Term::Mo(o1, i1, a1), Term::Mo(o2, i2, a2)) => o1 == o2 && self.tyargs(i1, i2) && self.terms(a1, a2),
            (Term::Lam(b1, body1), Term::Lam(b2, body2)) => {
                if !self.opt_mult(&b1.mult, &b2.mult) || !self.opt_ty(&b1.ty, &b2.ty) {
                    return false;
                }
                self.vars.push((b1.name.clone(), b2.name.clone()));
                let r = self.term(body1, body2);
                self.vars.pop();
                r
            }
            (Term::Let(k1, bs1, body1), Term::Let(k2, bs2, body2)) => {
                if k1 != k2 || bs1.len() != bs2.len() {
                    return false;
                }
                let n = self.vars.len();
                let pairs: Vec<(Name, Name)> = bs1.iter().zip(bs2).map(|(a, b)| (a.name.clone(), b.name.clone())).collect();
                if *k1 == LetKind::Rec {
                    self.vars.extend(pairs.iter().cloned());
                }
                let mut ok = true;
                for (a, b) in bs1.iter().zip(bs2) {
                    ok = ok && self.opt_mult(&a.mult, &b.mult) && self.opt_ty(&a.ty, &b.ty) && self.term(&a.body, &b.body);
                }
                self.vars.truncate(n);
                self.vars.extend(pairs);
                ok = ok && self.term(body1, body2);
                self.vars.truncate(n);
                ok
            }
            (Term::Case(s1, brs1), Term::Case(s2, brs2)) => {
                if !self.term(s1, s2) || brs1.len() != brs2.len() {
                    return false;
                }
                brs1.iter().zip(brs2).all(|(a, b)| {
                    if a.ctor != b.ctor || a.vars.len() != b.vars.len() {
                        return false;
                    }
                    let n = self.vars.len();
                    self.vars.extend(a.vars.iter().cloned().zip(b.vars.iter().cloned()));
                    let r = self.term(&a.body, &b.body);
                    self.vars.truncate(n);
                    r
                })
            }
            (Term::TyAbs(k1, n1, b1), Term::TyAbs(k2, n2, b2)) => {
                if k1 != k2 {
                    return false;
                }
                self.tys.push((*k1, n1.clone(), n2.clone()));
                let r = self.term(b1, b2);
                self.tys.pop();
                r
            }
            (Term::TyApp(a, i1), Term::TyApp(b, i2)) => self.term(a, b) && self.tyargs(i1, i2),
            (Term::Ann(a, t1), Term::Ann(b, t2)) => self.term(a, b) && type_alpha_eq_in(t1, t2, &mut self.tys),
            _ => false,
        }
    }
}

/// Strips type abstractions, instantiations, ascriptions, binder annotations
/// and position wrappers, leaving the runtime term.
pub fn erase(t: &Term) -> Term {
    match t {
        Term::Var(_) | Term::Int(_) => t.clone(),
        Term::Let(k, binds, body) => Term::Let(
            *k,
            binds
                .iter()
                .map(|b| Binding { name: b.name.clone(), mult: None, ty: None, body: erase(&b.body), span: Default::default() })
                .collect(),
            Box::new(erase(body)),
        ),
        Term::Lam(b, body) => Term::Lam(Binder::plain(b.name.clone()), Box::new(erase(body))),
        Term::App(f, a) => Term::app(erase(f), erase(a)),
        Term::Seq(x, body) => Term::Seq(x.clone(), Box::new(erase(body))),
        Term::Con(c, _, args) => Term::Con(c.clone(), Vec::new(), args.iter().map(erase).collect()),
        Term::Op(o, _, args) => Term::Op(*o, Vec::new(), args.iter().map(erase).collect()),
        Term::Mo(o, _, args) => Term::Mo(*o, Vec::new(), args.iter().map(erase).collect()),
        Term::Case(s, brs) => Term::Case(
            Box::new(erase(s)),
            brs.iter().map(|b| Branch { ctor: b.ctor.clone(), vars: b.vars.clone(), body: erase(&b.body) }).collect(),
        ),
        Term::TyAbs(_, _, body) | Term::TyApp(body, _) | Term::Ann(body, _) | Term::At(_, body) => erase(body),
    }
}

/// Capture-avoiding substitution of the variable `to` for free occurrences of
/// `from`. Binders that would capture `to` are renamed with `fresh`.
pub fn subst_var(t: &Term, from: &Name, to: &Name, fresh: &mut FreshSupply) -> Term {
    if from == to {
        return t.clone();
    }
    let swap = |x: &Name| if x == from { to.clone() } else { x.clone() };
    match t {
        Term::Var(x) => Term::Var(swap(x)),
        Term::Int(_) => t.clone(),
        Term::Seq(x, body) => Term::Seq(swap(x), Box::new(subst_var(body, from, to, fresh))),
        Term::App(f, a) => Term::app(subst_var(f, from, to, fresh), subst_var(a, from, to, fresh)),
        Term::Con(c, i, args) => Term::Con(c.clone(), i.clone(), args.iter().map(|a| subst_var(a, from, to, fresh)).collect()),
        Term::Op(o, i, args) => Term::Op(*o, i.clone(), args.iter().map(|a| subst_var(a, from, to, fresh)).collect()),
        Term::Mo(o, i, args) => Term::Mo(*o, i.clone(), args.iter().map(|a| subst_var(a, from, to, fresh)).collect()),
        Term::TyAbs(k, n, body) => Term::TyAbs(*k, n.clone(), Box::new(subst_var(body, from, to, fresh))),
        Term::TyApp(body, i) => Term::TyApp(Box::new(subst_var(body, from, to, fresh)), i.clone()),
        Term::Ann(body, ty) => Term::Ann(Box::new(subst_var(body, from, to, fresh)), ty.clone()),
        Term::At(s, body) => Term::At(*s, Box::new(subst_var(body, from, to, fresh))),
        Term::Lam(b, body) => {
            let (names, bodies) = under_binders(std::slice::from_ref(&b.name), &[body.as_ref()], from, to, fresh);
            Term::Lam(Binder { name: names[0].clone(), mult: b.mult.clone(), ty: b.ty.clone() }, Box::new(bodies[0].clone()))
        }
        Term::Case(s, brs) => Term::Case(
            Box::new(subst_var(s, from, to, fresh)),
            brs.iter()
                .map(|br| {
                    let (vars, bodies) = under_binders(&br.vars, &[&br.body], from, to, fresh);
                    Branch { ctor: br.ctor.clone(), vars, body: bodies[0].clone() }
                })
                .collect(),
        ),
        Term::Let(kind, binds, body) => {
            let names: Vec<Name> = binds.iter().map(|b| b.name.clone()).collect();
            match kind {
                LetKind::Rec => {
                    let mut scoped: Vec<&Term> = binds.iter().map(|b| &b.body).collect();
                    scoped.push(body);
                    let (names, mut bodies) = under_binders(&names, &scoped, from, to, fresh);
                    let new_body = bodies.pop().unwrap();
                    let binds = binds
                        .iter()
                        .zip(names.into_iter().zip(bodies))
                        .map(|(b, (name, t))| Binding { name, mult: b.mult.clone(), ty: b.ty.clone(), body: t, span: b.span })
                        .collect();
                    Term::Let(LetKind::Rec, binds, Box::new(new_body))
                }
                LetKind::Linear => {
                    let rhs: Vec<Term> = binds.iter().map(|b| subst_var(&b.body, from, to, fresh)).collect();
                    let (names, bodies) = under_binders(&names, &[body.as_ref()], from, to, fresh);
                    let binds = binds
                        .iter()
                        .zip(names.into_iter().zip(rhs))
                        .map(|(b, (name, t))| Binding { name, mult: b.mult.clone(), ty: b.ty.clone(), body: t, span: b.span })
                        .collect();
                    Term::Let(LetKind::Linear, binds, Box::new(bodies[0].clone()))
                }
            }
        }
    }
}

/// Substitutes inside terms that share the binders `names`.
fn under_binders(names: &[Name], scoped: &[&Term], from: &Name, to: &Name, fresh: &mut FreshSupply) -> (Vec<Name>, Vec<Term>) {
    if names.contains(from) {
        return (names.to_vec(), scoped.iter().map(|t| (*t).clone()).collect());
    }
    let captures = names.contains(to) && scoped.iter().any(|t| free_vars(t).contains(from));
    if !captures {
        return (names.to_vec(), scoped.iter().map(|t| subst_var(t, from, to, fresh)).collect());
    }
    let mut new_names = names.to_vec();
    let mut bodies: Vec<Term> = scoped.iter().map(|t| (*t).clone()).collect();
    for n in new_names.iter_mut() {
        if n == to {
            let renamed = fresh.name(n);
            bodies = bodies.iter().map(|t| subst_var(t, n, &renamed, fresh)).collect();
            *n = renamed;
        }
    }
    (new_names, bodies.iter().map(|t| subst_var(t, from, to, fresh)).collect())
}

/// Renames free occurrences of variables according to `map`.
pub fn rename_free(t: &Term, map: &[(Name, Name)], fresh: &mut FreshSupply) -> Term {
    // Route through distinct intermediate names so that swaps are simultaneous.
    let mut out = t.clone();
    let mut staged = Vec::new();
    for (from, to) in map {
        let mid = fresh.name(from);
        out = subst_var(&out, from, &mid, fresh);
        staged.push((mid, to.clone()));
    }
    for (mid, to) in staged {
        out = subst_var(&out, &mid, &to, fresh);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_program;

    fn p(s: &str) -> Term {
        parse_program(s).unwrap().body
    }

    #[test]
    fn alpha_examples() {
        assert!(alpha_equal(&p("\\x. x"), &p("\\y. y")));
        assert!(!alpha_equal(&p("\\x. \\y. x"), &p("\\x. \\y. y")));
        assert!(alpha_equal(&p("let x = y in x"), &p("let z = y in z")));
        assert!(!alpha_equal(&p("let x = y in x"), &p("let z = w in z")));
        assert!(alpha_equal(&p("let x = x in x"), &p("let z = z in z")));
        assert!(!alpha_equal(&p("let1 x = x in x"), &p("let1 z = z in z")));
    }

    #[test]
    fn free_var_examples() {
        assert!(free_vars(&p("\\x. x")).is_empty());
        assert_eq!(free_vars(&p("x + y")), [Name::from("x"), Name::from("y")].into_iter().collect());
        assert_eq!(free_vars(&p("let x = y in x")), [Name::from("y")].into_iter().collect());
        assert_eq!(free_vars(&p("case p of { (a, b) -> a + c }")), [Name::from("p"), Name::from("c")].into_iter().collect());
        assert_eq!(free_vars(&p("seq x in 1")), [Name::from("x")].into_iter().collect());
    }

    #[test]
    fn substitution_avoids_capture() {
        let mut fresh = FreshSupply::default();
        let t = erase(&p("\\y. x + y"));
        let s = subst_var(&t, &Name::from("x"), &Name::from("y"), &mut fresh);
        assert!(free_vars(&s).contains("y"));
        assert!(!alpha_equal(&s, &erase(&p("\\y. y + y"))));
    }

    #[test]
    fn erase_strips_annotations() {
        let t = p("forall 'a. \\(x : Int). (x : Int)");
        assert!(alpha_equal(&erase(&t), &p("\\x. x")));
    }
}
