//! Canonical forms of configurations up to renaming of variables,
//! locations and borrow ids, and up to the order of bindings.
//!
//! Variables are numbered breadth-first from the root on first mention.
//! Unreachable bindings are ordered by structural signatures obtained by a
//! few rounds of colour refinement, so that configurations that differ only
//! in the names of their garbage still get the same form.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};

use crate::histories::{BorrowId, BorrowPath, History};
use crate::runtime::{Env, Ext, Loc, RTerm, RefTarget, Target, Wrapper};
use crate::sem_den::DenConfig;
use crate::sem_mut::MutConfig;
use crate::syntax::{LetKind, Name, Term};

const ROUNDS: usize = 3;

#[derive(Default)]
struct Numbering {
    vars: HashMap<Name, usize>,
    locs: HashMap<Loc, usize>,
    bids: HashMap<BorrowId, usize>,
    queue: VecDeque<Name>,
}

struct Ser<'a> {
    mem: Option<&'a BTreeMap<Loc, Name>>,
    sigs: &'a HashMap<Name, u64>,
    num: Option<Numbering>,
}

fn hash_of(s: &impl Hash) -> u64 {
    let mut h = DefaultHasher::new();
    s.hash(&mut h);
    h.finish()
}

impl Ser<'_> {
    fn sig(&self, x: &Name) -> u64 {
        self.sigs.get(x).copied().unwrap_or(0)
    }

    fn var(&mut self, x: &Name) -> String {
        let sig = self.sig(x);
        match &mut self.num {
            Some(n) => {
                let next = n.vars.len();
                let k = *n.vars.entry(x.clone()).or_insert_with(|| {
                    n.queue.push_back(x.clone());
                    next
                });
                format!("v{k}")
            }
            None if self.sigs.is_empty() => "*".into(),
            None => format!("{sig:x}"),
        }
    }

    fn loc(&mut self, l: Loc) -> String {
        let content = self.mem.and_then(|m| m.get(&l)).cloned();
        match &mut self.num {
            Some(n) => {
                let next = n.locs.len();
                if let Some(k) = n.locs.get(&l) {
                    return format!("L{k}");
                }
                n.locs.insert(l, next);
                if let Some(c) = content {
                    self.var(&c);
                }
                format!("L{next}")
            }
            None => match content {
                Some(c) if !self.sigs.is_empty() => format!("L{:x}", self.sig(&c)),
                Some(_) => "L".into(),
                None => "L!".into(),
            },
        }
    }

    fn bid(&mut self, b: BorrowId) -> String {
        match &mut self.num {
            Some(n) => {
                let next = n.bids.len();
                format!("B{}", n.bids.entry(b).or_insert(next))
            }
            None => "B".into(),
        }
    }

    fn path(&mut self, p: &BorrowPath) -> String {
        let mut s = self.bid(p.root);
        for i in &p.indices {
            let _ = write!(s, ".{i}");
        }
        s
    }

    fn history(&mut self, h: &History) -> String {
        let mut recs: Vec<(&BorrowPath, &Name)> = h.records().collect();
        let known = |n: &Option<Numbering>, b: BorrowId| n.as_ref().and_then(|n| n.bids.get(&b)).copied();
        recs.sort_by_key(|(p, v)| (known(&self.num, p.root).unwrap_or(usize::MAX), p.indices.clone(), self.sig(v)));
        let parts: Vec<String> = recs.into_iter().map(|(p, v)| format!("{}>{}", self.path(p), self.var(v))).collect();
        format!("{{{}}}", parts.join(","))
    }

    fn target(&mut self, t: &Target) -> String {
        match t {
            Target::Loc(l) => self.loc(*l),
            Target::Paths(ps) => self.paths(ps),
        }
    }

    fn paths(&mut self, ps: &[BorrowPath]) -> String {
        let parts: Vec<String> = ps.iter().map(|p| self.path(p)).collect();
        format!("[{}]", parts.join(","))
    }

    fn rterm(&mut self, t: &RTerm) -> String {
        match t {
            RTerm::Src(t) => {
                let mut s = String::new();
                self.term(t, &mut Vec::new(), &mut s);
                s
            }
            RTerm::Token(None) => "tok".into(),
            RTerm::Token(Some(h)) => format!("tok{}", self.history(h)),
            RTerm::Ref(RefTarget::Loc(l)) => format!("ref {}", self.loc(*l)),
            RTerm::Ref(RefTarget::Var(y)) => format!("ref {}", self.var(y)),
            RTerm::Lend(b, y) => {
                let b = self.bid(*b);
                format!("lend {b} {}", self.var(y))
            }
            RTerm::Done(h, y) => {
                let h = self.history(h);
                format!("done{h} {}", self.var(y))
            }
            RTerm::Wrap(Wrapper::Mut(ps), inner) => {
                let ps = self.paths(ps);
                format!("mut{ps} {}", self.rterm(inner))
            }
            RTerm::Wrap(Wrapper::Share, inner) => format!("shr {}", self.rterm(inner)),
            RTerm::Ext(e, args) => {
                let mut s = e.keyword().to_string();
                let extra = match e {
                    Ext::Linear | Ext::ExecBOPost | Ext::BindPost => String::new(),
                    Ext::ExeBO(h)
                    | Ext::SexecBOPre(h)
                    | Ext::ParBOPost(h)
                    | Ext::DerefPost(h)
                    | Ext::UpdateRefPre(h) => self.history(h),
                    Ext::SexecBOPost(h1, h2) => {
                        let a = self.history(h1);
                        a + &self.history(h2)
                    }
                    Ext::UpdateRefPrePost(t) => self.target(t),
                    Ext::UpdateRefPost(t, h) => {
                        let a = self.target(t);
                        a + &self.history(h)
                    }
                };
                s.push_str(&extra);
                for a in args {
                    s.push(' ');
                    s += &self.var(a);
                }
                s
            }
        }
    }

    fn name(&mut self, x: &Name, scope: &[Name]) -> String {
        match scope.iter().rposition(|b| b == x) {
            Some(i) => format!("^{}", scope.len() - 1 - i),
            None => self.var(x),
        }
    }

    fn term(&mut self, t: &Term, scope: &mut Vec<Name>, out: &mut String) {
        match t {
            Term::Var(x) => *out += &self.name(x, scope),
            Term::Int(n) => {
                let _ = write!(out, "{n}");
            }
            Term::Seq(x, body) => {
                let _ = write!(out, "(seq {} ", self.name(x, scope));
                self.term(body, scope, out);
                out.push(')');
            }
            Term::Lam(b, body) => {
                out.push_str("(\\ ");
                scope.push(b.name.clone());
                self.term(body, scope, out);
                scope.pop();
                out.push(')');
            }
            Term::App(f, a) => {
                out.push_str("(@ ");
                self.term(f, scope, out);
                out.push(' ');
                self.term(a, scope, out);
                out.push(')');
            }
            Term::Let(kind, binds, body) => {
                let n = scope.len();
                let _ = write!(out, "({} {} ", if *kind == LetKind::Rec { "let" } else { "let1" }, binds.len());
                if *kind == LetKind::Rec {
                    scope.extend(binds.iter().map(|b| b.name.clone()));
                }
                for b in binds {
                    self.term(&b.body, scope, out);
                    out.push(';');
                }
                scope.truncate(n);
                scope.extend(binds.iter().map(|b| b.name.clone()));
                self.term(body, scope, out);
                scope.truncate(n);
                out.push(')');
            }
            Term::Con(c, _, args) => self.node(&format!("C{c}"), args, scope, out),
            Term::Op(o, _, args) => self.node(o.keyword(), args, scope, out),
            Term::Mo(m, _, args) => self.node(m.keyword(), args, scope, out),
            Term::Case(s, brs) => {
                out.push_str("(case ");
                self.term(s, scope, out);
                for br in brs {
                    let _ = write!(out, " |{}/{} ", br.ctor, br.vars.len());
                    let n = scope.len();
                    scope.extend(br.vars.iter().cloned());
                    self.term(&br.body, scope, out);
                    scope.truncate(n);
                }
                out.push(')');
            }
            Term::TyAbs(_, _, body) | Term::TyApp(body, _) | Term::Ann(body, _) | Term::At(_, body) => {
                self.term(body, scope, out)
            }
        }
    }

    fn node(&mut self, head: &str, args: &[Term], scope: &mut Vec<Name>, out: &mut String) {
        let _ = write!(out, "({head}");
        for a in args {
            out.push(' ');
            self.term(a, scope, out);
        }
        out.push(')');
    }
}

/// Colour refinement over the binding graph.
fn signatures(env: &Env, mem: Option<&BTreeMap<Loc, Name>>) -> HashMap<Name, u64> {
    let mut sigs = HashMap::new();
    for _ in 0..=ROUNDS {
        let mut ser = Ser { mem, sigs: &sigs, num: None };
        let next: HashMap<Name, u64> =
            env.iter().map(|(x, t)| (x.clone(), hash_of(&(ser.sig(x), ser.rterm(t))))).collect();
        sigs = next;
    }
    sigs
}

fn canonical(env: &Env, root: &Name, mem: Option<&BTreeMap<Loc, Name>>, bids: Option<&BTreeSet<BorrowId>>) -> String {
    let sigs = signatures(env, mem);
    let mut ser = Ser { mem, sigs: &sigs, num: Some(Numbering::default()) };
    let mut out = String::new();
    ser.var(root);
    let mut garbage: Vec<(u64, &Name)> = env.keys().map(|x| (sigs[x], x)).collect();
    garbage.sort();
    let mut garbage = garbage.into_iter();
    loop {
        while let Some(x) = ser.num.as_mut().and_then(|n| n.queue.pop_front()) {
            let k = ser.num.as_ref().map_or(0, |n| n.vars[&x]);
            let body = match env.get(&x) {
                Some(t) => ser.rterm(t),
                None => "?".into(),
            };
            let _ = writeln!(out, "v{k} = {body}");
        }
        let Some((_, x)) = garbage.find(|(_, x)| !ser.num.as_ref().is_some_and(|n| n.vars.contains_key(*x))) else {
            break;
        };
        out.push_str("--\n");
        ser.var(x);
    }
    if let Some(mem) = mem {
        let mut rest: Vec<(usize, Loc)> = Vec::new();
        for (l, c) in mem {
            if !ser.num.as_ref().is_some_and(|n| n.locs.contains_key(l)) {
                let k = ser.var(c);
                rest.push((k[1..].parse().unwrap_or(usize::MAX), *l));
            }
        }
        rest.sort();
        for (_, l) in rest {
            ser.loc(l);
        }
        let num = ser.num.as_ref().expect("numbering");
        let mut cells: Vec<(usize, usize)> = mem.iter().map(|(l, c)| (num.locs[l], num.vars[c])).collect();
        cells.sort();
        for (l, c) in cells {
            let _ = writeln!(out, "L{l} -> v{c}");
        }
    }
    if let Some(bids) = bids {
        let num = ser.num.as_ref().expect("numbering");
        let unref = bids.iter().filter(|b| !num.bids.contains_key(b)).count();
        let dangling = num.bids.keys().filter(|b| !bids.contains(b)).count();
        let _ = writeln!(out, "bids {} +{unref} !{dangling}", num.bids.len());
    }
    out
}

pub fn canonical_form_mut(c: &MutConfig) -> String {
    canonical(&c.env, &c.root, Some(&c.mem), None)
}

pub fn canonical_form_den(c: &DenConfig) -> String {
    canonical(&c.env, &c.root, None, Some(&c.bids))
}

pub fn canon_key_mut(c: &MutConfig) -> u64 {
    hash_of(&canonical_form_mut(c))
}

pub fn canon_key_den(c: &DenConfig) -> u64 {
    hash_of(&canonical_form_den(c))
}
