//! Denotational operational semantics: no memory. A reference holds its
//! content variable, mutable borrowers carry borrow paths, and lifetime
//! tokens carry the history of updates made through borrowers, from which
//! lenders restore the final content at `reclaim`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::histories::{hist_par, hist_seq, BorrowId, BorrowPath, History, RecordJson};
use crate::runtime::{
    bind_branch, common_rule, enumerate, forcing_loop, step_common, value_of, Env, Ext, RTerm, Redex, RefTarget, Rule,
    StepError, Target, Tx, Wrapper,
};
use crate::sem_mut::{exe_rule, monad_value, op_rule};
use crate::syntax::{erase, FreshSupply, MonadOp, Name, Op, Program, Term, PAIR, UR};

pub type DenTerm = RTerm;

#[derive(Clone, Debug, PartialEq)]
pub struct DenConfig {
    pub env: Env,
    pub bids: BTreeSet<BorrowId>,
    pub root: Name,
    pub fresh: FreshSupply,
    pub next_bid: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistoryEvent {
    pub token_var: String,
    pub before: Option<Vec<RecordJson>>,
    pub after: Vec<RecordJson>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DenDelta {
    pub env_delta: BTreeMap<String, String>,
    pub bids_delta: Vec<String>,
    pub history_events: Vec<HistoryEvent>,
}

impl DenConfig {
    pub fn from_program(p: &Program) -> Self {
        Self::from_term(erase(&p.body))
    }

    pub fn from_term(t: Term) -> Self {
        let root = Name::from("main");
        let mut env = Env::new();
        env.insert(root.clone(), RTerm::Src(t));
        DenConfig { env, bids: BTreeSet::new(), root, fresh: FreshSupply::default(), next_bid: 0 }
    }

    pub fn from_parts(env: Env, bids: BTreeSet<BorrowId>, root: Name) -> Self {
        let next_bid = bids.iter().map(|b| b.0 + 1).max().unwrap_or(0);
        DenConfig { env, bids, root, fresh: FreshSupply::default(), next_bid }
    }

    pub fn redexes(&self) -> Vec<Redex> {
        enumerate_redexes_den(self)
    }

    pub fn is_normal_form(&self) -> bool {
        is_normal_form_den(self)
    }

    fn rule_at(&self, t: &RTerm) -> Option<Rule> {
        if let Some(r) = common_rule(&self.env, t) {
            return Some(r);
        }
        let env = &self.env;
        let plain = |y: &Name| matches!(env.get(y), Some(RTerm::Token(None)));
        let lifetime = |y: &Name| matches!(env.get(y), Some(RTerm::Token(Some(_))));
        let val = |y: &Name| value_of(env, y).is_some();
        let done = |y: &Name| matches!(env.get(y), Some(RTerm::Done(..)));
        match t {
            RTerm::Src(Term::Var(y)) => val(y).then_some(Rule::Var),
            RTerm::Wrap(..) => {
                let (_, inner) = t.unwrap_borrowers();
                inner.as_var().filter(|y| val(y)).map(|_| Rule::Var)
            }
            RTerm::Src(Term::Case(s, brs)) => {
                let RTerm::Wrap(_, inner) = env.get(s.as_var()?)? else { return None };
                let (c, _) = inner.as_con()?;
                brs.iter().any(|b| &b.ctor == c).then_some(Rule::CaseBor)
            }
            RTerm::Src(Term::Op(op, _, args)) => {
                let a: Vec<&Name> = args.iter().map(|a| a.as_var()).collect::<Option<_>>()?;
                let ok = match op {
                    Op::NewRef => plain(a[0]) && val(a[1]),
                    Op::FreeRef => matches!(env.get(a[0]), Some(RTerm::Ref(RefTarget::Var(_)))),
                    Op::NewLifetime => plain(a[0]) && val(a[1]),
                    Op::EndLifetime => lifetime(a[0]),
                    Op::Borrow => plain(a[0]) && val(a[1]),
                    Op::Share => matches!(value_of(env, a[0]), Some(RTerm::Wrap(Wrapper::Mut(_), _))),
                    Op::Copy => matches!(value_of(env, a[0]), Some(RTerm::Wrap(Wrapper::Share, _))),
                    Op::JoinMut => matches!(
                        value_of(env, a[0]),
                        Some(RTerm::Wrap(_, inner)) if matches!(**inner, RTerm::Wrap(Wrapper::Mut(_), _))
                    ),
                    Op::Reclaim => match (env.get(a[0]), env.get(a[1])) {
                        (Some(RTerm::Lend(b, c)), Some(RTerm::Token(Some(h)))) => {
                            restorable(h, &BorrowPath::new(*b), env, c)
                        }
                        _ => false,
                    },
                    Op::ExecBO => lifetime(a[0]) && val(a[1]),
                    _ => false,
                };
                ok.then(|| op_rule(*op))
            }
            RTerm::Ext(e, a) => match e {
                Ext::ExeBO(_) => env.get(&a[0]).and_then(monad_value).map(|(m, _)| exe_rule(m)),
                Ext::ExecBOPost => done(&a[0]).then_some(Rule::ExecBOPost),
                Ext::BindPost => done(&a[0]).then_some(Rule::BindPost),
                Ext::SexecBOPost(..) => done(&a[0]).then_some(Rule::SexecBOPost),
                Ext::UpdateRefPrePost(_) => done(&a[0]).then_some(Rule::UpdateRefPrePost),
                Ext::SexecBOPre(_) => (lifetime(&a[0]) && val(&a[1])).then_some(Rule::SexecBOPre),
                Ext::ParBOPost(_) => (done(&a[0]) && done(&a[1])).then_some(Rule::ParBOPost),
                Ext::DerefPost(_) => borrowed_ref(env, &a[0]).map(|_| Rule::DerefPost),
                Ext::UpdateRefPre(_) => {
                    let mutable = matches!(borrowed_ref(env, &a[1]), Some((Wrapper::Mut(_), _)));
                    (val(&a[0]) && mutable).then_some(Rule::UpdateRefPre)
                }
                Ext::UpdateRefPost(..) => {
                    matches!(env.get(&a[0]).and_then(RTerm::as_con), Some((c, _)) if &**c == PAIR).then_some(Rule::UpdateRefPost)
                }
                Ext::Linear => None,
            },
            _ => None,
        }
    }
}

impl fmt::Display for DenConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "root {}", self.root)?;
        for (x, t) in &self.env {
            writeln!(f, "{x} = {t}")?;
        }
        let bids: Vec<String> = self.bids.iter().map(|b| b.to_string()).collect();
        writeln!(f, "bids {{{}}}", bids.join(", "))
    }
}

/// `B (Ref y)` for a single borrower constructor `B`.
fn borrowed_ref<'a>(env: &'a Env, r: &Name) -> Option<(&'a Wrapper, &'a Name)> {
    match env.get(r)? {
        RTerm::Wrap(w, inner) => match inner.as_ref() {
            RTerm::Ref(RefTarget::Var(y)) => Some((w, y)),
            _ => None,
        },
        _ => None,
    }
}

fn extend(w: &Wrapper, i: u32) -> Wrapper {
    match w {
        Wrapper::Mut(ps) => Wrapper::Mut(ps.iter().map(|p| p.child(i)).collect()),
        Wrapper::Share => Wrapper::Share,
    }
}

fn rewrap(ws: &[&Wrapper], inner: RTerm) -> RTerm {
    ws.iter().rev().fold(inner, |t, w| RTerm::Wrap((*w).clone(), Box::new(t)))
}

pub fn enumerate_redexes_den(c: &DenConfig) -> Vec<Redex> {
    enumerate(&c.env, &c.root, |_, t| c.rule_at(t))
}

pub fn is_normal_form_den(c: &DenConfig) -> bool {
    c.env.get(&c.root).is_some_and(RTerm::is_value)
}

pub fn detect_forcing_loop_den(c: &DenConfig, v: &Name) -> Option<Vec<Name>> {
    forcing_loop(&c.env, v)
}

/// Whether [`restore_by_history`] succeeds, without building anything.
fn restorable(h: &History, p: &BorrowPath, env: &Env, v: &Name) -> bool {
    if !h.touches(p) {
        return true;
    }
    let Some(t) = env.get(v) else { return false };
    let (_, inner) = t.unwrap_borrowers();
    if let Some(b) = h.get(p) {
        return matches!(inner, RTerm::Ref(RefTarget::Var(_))) && restorable(h, &p.child(0), env, b);
    }
    match inner {
        RTerm::Ref(RefTarget::Var(y)) => restorable(h, &p.child(0), env, y),
        _ => match inner.as_con() {
            Some((_, ys)) => ys.iter().enumerate().all(|(i, y)| restorable(h, &p.child(i as u32), env, y)),
            None => false,
        },
    }
}

fn restore(tx: &mut Tx<'_>, h: &History, p: &BorrowPath, v: &Name) -> Result<Name, StepError> {
    if !h.touches(p) {
        return Ok(v.clone());
    }
    let stuck = || StepError::RestoreStuck(v.clone());
    let t = tx.get(v).cloned().ok_or_else(stuck)?;
    let (ws, inner) = t.unwrap_borrowers();
    let rebuilt = if let Some(b) = h.get(p) {
        if !matches!(inner, RTerm::Ref(RefTarget::Var(_))) {
            return Err(stuck());
        }
        let b2 = restore(tx, h, &p.child(0), b)?;
        RTerm::Ref(RefTarget::Var(b2))
    } else if let RTerm::Ref(RefTarget::Var(y)) = inner {
        let y2 = restore(tx, h, &p.child(0), y)?;
        RTerm::Ref(RefTarget::Var(y2))
    } else if let Some((c, ys)) = inner.as_con() {
        let c = c.clone();
        let ys: Vec<Name> = ys.into_iter().cloned().collect();
        let mut out = Vec::new();
        for (i, y) in ys.iter().enumerate() {
            out.push(restore(tx, h, &p.child(i as u32), y)?);
        }
        RTerm::con(&c, &out.iter().collect::<Vec<_>>())
    } else {
        return Err(stuck());
    };
    Ok(tx.bind(v.base(), rewrap(&ws, rebuilt)))
}

/// Rebuilds the value of `v` at borrow path `p` from the records of `h`,
/// binding a fresh variable for every rebuilt node. Returns the extended
/// environment and the variable holding the restored value.
pub fn restore_by_history(
    h: &History,
    p: &BorrowPath,
    env: &Env,
    fresh: &mut FreshSupply,
    v: &Name,
) -> Result<(Env, Name), StepError> {
    let mut env = env.clone();
    let mut tx = Tx::new(&mut env, fresh);
    let out = restore(&mut tx, h, p, v)?;
    Ok((env, out))
}

pub fn step_den(c: &DenConfig, r: &Redex) -> Result<DenConfig, StepError> {
    step_den_traced(c, r).map(|(c, _)| c)
}

pub fn step_den_traced(c: &DenConfig, r: &Redex) -> Result<(DenConfig, DenDelta), StepError> {
    let mut next = c.clone();
    let x = &r.target_var;
    let rule = r.rule_id;
    let fail = || StepError::NotApplicable { var: x.clone(), rule };
    let t = c.env.get(x).ok_or_else(fail)?;
    if rule != Rule::Loop && c.rule_at(t) != Some(rule) {
        return Err(fail());
    }
    let mut bids_delta = Vec::new();
    let touched = {
        let DenConfig { env, bids, fresh, next_bid, .. } = &mut next;
        let mut tx = Tx::new(env, fresh);
        let done = |tx: &Tx<'_>, y: &Name| match tx.get(y) {
            Some(RTerm::Done(h, v)) => Some((h.clone(), v.clone())),
            _ => None,
        };
        let op_args = |t: &RTerm| -> Option<Vec<Name>> {
            match t {
                RTerm::Src(Term::Op(_, _, args)) => args.iter().map(|a| a.as_var().cloned()).collect(),
                _ => None,
            }
        };
        match rule {
            Rule::Loop => {}
            Rule::Var => {
                let (ws, inner) = t.unwrap_borrowers();
                let v = tx.value(inner.as_var().ok_or_else(fail)?).ok_or_else(fail)?;
                tx.set(x, rewrap(&ws, v));
            }
            Rule::CaseBor => {
                let RTerm::Src(Term::Case(s, brs)) = t else { return Err(fail()) };
                let scrut = tx.get(s.as_var().ok_or_else(fail)?).cloned().ok_or_else(fail)?;
                let RTerm::Wrap(w, inner) = &scrut else { return Err(fail()) };
                let (ctor, fields) = inner.as_con().ok_or_else(fail)?;
                let br = brs.iter().find(|b| &b.ctor == ctor).ok_or_else(fail)?;
                let fields = fields
                    .iter()
                    .enumerate()
                    .map(|(i, f)| RTerm::Wrap(extend(w, i as u32), Box::new(RTerm::var(f))))
                    .collect();
                bind_branch(&mut tx, x, br, fields);
            }
            Rule::NewRef | Rule::FreeRef | Rule::NewLifetime | Rule::EndLifetime | Rule::Borrow | Rule::Share
            | Rule::Copy | Rule::JoinMut | Rule::Reclaim | Rule::ExecBO => {
                let a = op_args(t).ok_or_else(fail)?;
                match rule {
                    Rule::NewRef => tx.set(x, RTerm::Ref(RefTarget::Var(a[1].clone()))),
                    Rule::FreeRef => {
                        let Some(RTerm::Ref(RefTarget::Var(content))) = tx.get(&a[0]).cloned() else { return Err(fail()) };
                        tx.set(x, RTerm::var(&content));
                    }
                    Rule::NewLifetime => {
                        let now = tx.bind("now", RTerm::Token(Some(History::empty())));
                        tx.set(x, RTerm::Src(Term::app(Term::Var(a[1].clone()), Term::Var(now))));
                    }
                    Rule::EndLifetime => tx.set(x, RTerm::con(UR, &[&a[0]])),
                    Rule::Borrow => {
                        let v = tx.value(&a[1]).ok_or_else(fail)?;
                        let b = BorrowId(*next_bid);
                        *next_bid += 1;
                        bids.insert(b);
                        bids_delta.push(b.to_string());
                        let bm = tx.bind("bm", RTerm::Wrap(Wrapper::Mut(vec![BorrowPath::new(b)]), Box::new(v)));
                        let bl = tx.bind("bl", RTerm::Lend(b, a[1].clone()));
                        tx.set(x, RTerm::pair(&bm, &bl));
                    }
                    Rule::Share => {
                        let Some(RTerm::Wrap(Wrapper::Mut(_), v)) = tx.value(&a[0]) else { return Err(fail()) };
                        let shared = tx.bind(a[0].base(), RTerm::Wrap(Wrapper::Share, v));
                        tx.set(x, RTerm::con(UR, &[&shared]));
                    }
                    Rule::Copy => {
                        let Some(RTerm::Wrap(Wrapper::Share, v)) = tx.value(&a[0]) else { return Err(fail()) };
                        tx.set(x, *v);
                    }
                    Rule::JoinMut => {
                        let Some(RTerm::Wrap(outer, inner)) = tx.value(&a[0]) else { return Err(fail()) };
                        let RTerm::Wrap(Wrapper::Mut(rho), v) = *inner else { return Err(fail()) };
                        let joined = match outer {
                            Wrapper::Mut(mut pi) => {
                                pi.extend(rho);
                                Wrapper::Mut(pi)
                            }
                            Wrapper::Share => Wrapper::Share,
                        };
                        tx.set(x, RTerm::Wrap(joined, v));
                    }
                    Rule::Reclaim => {
                        let (Some(RTerm::Lend(b, content)), Some(RTerm::Token(Some(h)))) =
                            (tx.get(&a[0]).cloned(), tx.get(&a[1]).cloned())
                        else {
                            return Err(fail());
                        };
                        let restored = restore(&mut tx, &h, &BorrowPath::new(b), &content)?;
                        tx.set(x, RTerm::var(&restored));
                    }
                    Rule::ExecBO => {
                        let Some(RTerm::Token(Some(h))) = tx.get(&a[0]).cloned() else { return Err(fail()) };
                        let res = tx.bind("res", RTerm::ext(Ext::ExeBO(h), &[&a[1]]));
                        tx.set(x, RTerm::ext(Ext::ExecBOPost, &[&res]));
                    }
                    _ => unreachable!(),
                }
            }
            Rule::ExePure | Rule::ExeBind | Rule::ExeSexecBO | Rule::ExeParBO | Rule::ExeDeref | Rule::ExeUpdateRef => {
                let RTerm::Ext(Ext::ExeBO(h), a) = t else { return Err(fail()) };
                let (m, args) = tx.get(&a[0]).and_then(monad_value).ok_or_else(fail)?;
                match m {
                    MonadOp::Pure => tx.set(x, RTerm::Done(h.clone(), args[0].clone())),
                    MonadOp::Bind => {
                        let res = tx.bind("res", RTerm::ext(Ext::ExeBO(h.clone()), &[&args[0]]));
                        tx.set(x, RTerm::ext(Ext::BindPost, &[&res, &args[1]]));
                    }
                    MonadOp::SexecBO => tx.set(x, RTerm::ext(Ext::SexecBOPre(h.clone()), &[&args[0], &args[1]])),
                    MonadOp::ParBO => {
                        let r0 = tx.bind("res", RTerm::ext(Ext::ExeBO(History::empty()), &[&args[0]]));
                        let r1 = tx.bind("res", RTerm::ext(Ext::ExeBO(History::empty()), &[&args[1]]));
                        tx.set(x, RTerm::ext(Ext::ParBOPost(h.clone()), &[&r0, &r1]));
                    }
                    MonadOp::Deref => tx.set(x, RTerm::ext(Ext::DerefPost(h.clone()), &[&args[0]])),
                    MonadOp::UpdateRef => tx.set(x, RTerm::ext(Ext::UpdateRefPre(h.clone()), &[&args[0], &args[1]])),
                }
            }
            _ if !matches!(t, RTerm::Ext(..)) => step_common(&mut tx, x, rule)?,
            _ => {
                let RTerm::Ext(e, a) = t else { unreachable!() };
                match (e, rule) {
                    (Ext::Linear, Rule::Linear) => step_common(&mut tx, x, rule)?,
                    (Ext::ExecBOPost, Rule::ExecBOPost) => {
                        let (h, y) = done(&tx, &a[0]).ok_or_else(fail)?;
                        let now = tx.bind("now", RTerm::Token(Some(h)));
                        tx.set(x, RTerm::pair(&now, &y));
                    }
                    (Ext::BindPost, Rule::BindPost) => {
                        let (h, y) = done(&tx, &a[0]).ok_or_else(fail)?;
                        let bo = tx.bind("bo", RTerm::Src(Term::app(Term::Var(a[1].clone()), Term::Var(y))));
                        tx.set(x, RTerm::ext(Ext::ExeBO(h), &[&bo]));
                    }
                    (Ext::SexecBOPre(h), Rule::SexecBOPre) => {
                        let Some(RTerm::Token(Some(h2))) = tx.get(&a[0]).cloned() else { return Err(fail()) };
                        let res = tx.bind("res", RTerm::ext(Ext::ExeBO(History::empty()), &[&a[1]]));
                        tx.set(x, RTerm::ext(Ext::SexecBOPost(h.clone(), h2), &[&res]));
                    }
                    (Ext::SexecBOPost(h, h2), Rule::SexecBOPost) => {
                        let (h0, y) = done(&tx, &a[0]).ok_or_else(fail)?;
                        let now = tx.bind("now", RTerm::Token(Some(hist_seq(h2, &h0))));
                        let pr = tx.bind("pr", RTerm::pair(&now, &y));
                        tx.set(x, RTerm::Done(hist_seq(h, &h0), pr));
                    }
                    (Ext::ParBOPost(h), Rule::ParBOPost) => {
                        let (h0, y) = done(&tx, &a[0]).ok_or_else(fail)?;
                        let (h1, z) = done(&tx, &a[1]).ok_or_else(fail)?;
                        let both = hist_par(&h0, &h1).map_err(|e| StepError::Separation(e.0))?;
                        let pr = tx.bind("pr", RTerm::pair(&y, &z));
                        tx.set(x, RTerm::Done(hist_seq(h, &both), pr));
                    }
                    (Ext::DerefPost(h), Rule::DerefPost) => {
                        let (w, y) = borrowed_ref(tx.env, &a[0]).map(|(w, y)| (w.clone(), y.clone())).ok_or_else(fail)?;
                        let y2 = tx.bind(y.base(), RTerm::Wrap(extend(&w, 0), Box::new(RTerm::var(&y))));
                        tx.set(x, RTerm::Done(h.clone(), y2));
                    }
                    (Ext::UpdateRefPre(h), Rule::UpdateRefPre) => {
                        let Some((Wrapper::Mut(ps), y)) = borrowed_ref(tx.env, &a[1]).map(|(w, y)| (w.clone(), y.clone()))
                        else {
                            return Err(fail());
                        };
                        let bo = tx.bind("bo", RTerm::Src(Term::app(Term::Var(a[0].clone()), Term::Var(y))));
                        let res = tx.bind("res", RTerm::ext(Ext::ExeBO(h.clone()), &[&bo]));
                        tx.set(x, RTerm::ext(Ext::UpdateRefPrePost(Target::Paths(ps)), &[&res]));
                    }
                    (Ext::UpdateRefPrePost(target), Rule::UpdateRefPrePost) => {
                        let (h, pr) = done(&tx, &a[0]).ok_or_else(fail)?;
                        tx.set(x, RTerm::ext(Ext::UpdateRefPost(target.clone(), h), &[&pr]));
                    }
                    (Ext::UpdateRefPost(Target::Paths(ps), h), Rule::UpdateRefPost) => {
                        let pair = tx.get(&a[0]).cloned().ok_or_else(fail)?;
                        let (_, fields) = pair.as_con().ok_or_else(fail)?;
                        let (c0, b) = (fields[0].clone(), fields[1].clone());
                        let wrapped = RTerm::Wrap(Wrapper::Mut(ps.clone()), Box::new(RTerm::Ref(RefTarget::Var(b.clone()))));
                        let r = tx.bind("ref", wrapped);
                        let pr = tx.bind("pr", RTerm::pair(&c0, &r));
                        let records = History::from_records(ps.iter().map(|p| (p.clone(), b.clone())));
                        tx.set(x, RTerm::Done(hist_seq(h, &records), pr));
                    }
                    _ => return Err(fail()),
                }
            }
        }
        tx.touched
    };
    let mut env_delta = BTreeMap::new();
    let mut history_events = Vec::new();
    for v in &touched {
        let now = &next.env[v];
        env_delta.insert(v.to_string(), now.to_string());
        if let RTerm::Token(Some(h)) = now {
            let before = match c.env.get(v) {
                Some(RTerm::Token(Some(h0))) => Some(h0.to_json()),
                _ => None,
            };
            history_events.push(HistoryEvent { token_var: v.to_string(), before, after: h.to_json() });
        }
    }
    Ok((next, DenDelta { env_delta, bids_delta, history_events }))
}
