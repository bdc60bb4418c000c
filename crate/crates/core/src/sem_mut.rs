//! Mutative operational semantics: references are locations in a global
//! memory that `updateRef` overwrites in place.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::runtime::{
    common_rule, enumerate, forcing_loop, step_common, value_of, Env, Ext, Loc, RTerm, Redex, RefTarget,
    Rule, StepError, Target, Tx,
};
use crate::histories::History;
use crate::syntax::{erase, FreshSupply, MonadOp, Name, Op, Program, Term, PAIR};

pub type MutTerm = RTerm;

#[derive(Clone, Debug, PartialEq)]
pub struct MutConfig {
    pub env: Env,
    pub mem: BTreeMap<Loc, Name>,
    pub root: Name,
    pub fresh: FreshSupply,
    pub next_loc: u32,
}

/// What one step changed, for traces.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MutDelta {
    pub env_delta: BTreeMap<String, String>,
    pub mem_delta: BTreeMap<String, Option<String>>,
}

impl MutConfig {
    /// `main = t` with empty memory.
    pub fn from_program(p: &Program) -> Self {
        Self::from_term(erase(&p.body))
    }

    pub fn from_term(t: Term) -> Self {
        let root = Name::from("main");
        let mut env = Env::new();
        env.insert(root.clone(), RTerm::Src(t));
        MutConfig { env, mem: BTreeMap::new(), root, fresh: FreshSupply::default(), next_loc: 0 }
    }

    /// Builds a configuration from explicit parts. The fresh supplies start
    /// past anything mentioned.
    pub fn from_parts(env: Env, mem: BTreeMap<Loc, Name>, root: Name) -> Self {
        let next_loc = mem.keys().map(|l| l.0 + 1).max().unwrap_or(0);
        MutConfig { env, mem, root, fresh: FreshSupply::default(), next_loc }
    }

    pub fn redexes(&self) -> Vec<Redex> {
        enumerate_redexes_mut(self)
    }

    pub fn is_normal_form(&self) -> bool {
        is_normal_form_mut(self)
    }

    fn rule_at(&self, t: &RTerm) -> Option<Rule> {
        if let Some(r) = common_rule(&self.env, t) {
            return Some(r);
        }
        let env = &self.env;
        let token = |y: &Name| matches!(env.get(y), Some(RTerm::Token(_)));
        let val = |y: &Name| value_of(env, y).is_some();
        let cell = |y: &Name| match env.get(y) {
            Some(RTerm::Ref(RefTarget::Loc(l))) => self.mem.get(l),
            _ => None,
        };
        let done = |y: &Name| matches!(env.get(y), Some(RTerm::Done(..)));
        match t {
            RTerm::Src(Term::Var(y)) => val(y).then_some(Rule::Var),
            RTerm::Src(Term::Op(op, _, args)) => {
                let a: Vec<&Name> = args.iter().map(|a| a.as_var()).collect::<Option<_>>()?;
                let ok = match op {
                    Op::NewRef => token(a[0]) && val(a[1]),
                    Op::FreeRef => cell(a[0]).is_some(),
                    Op::NewLifetime => token(a[0]) && val(a[1]),
                    Op::EndLifetime => token(a[0]),
                    Op::Borrow => token(a[0]) && val(a[1]),
                    Op::Share | Op::Copy | Op::JoinMut => val(a[0]),
                    Op::Reclaim => val(a[0]) && token(a[1]),
                    Op::ExecBO => token(a[0]) && val(a[1]),
                    _ => false,
                };
                ok.then(|| op_rule(*op))
            }
            RTerm::Ext(e, a) => match e {
                Ext::ExeBO(_) => match env.get(&a[0]) {
                    Some(RTerm::Src(Term::Mo(m, _, args))) if args.iter().all(Term::is_var) => Some(exe_rule(*m)),
                    _ => None,
                },
                Ext::ExecBOPost | Ext::BindPost | Ext::SexecBOPost(..) | Ext::UpdateRefPrePost(_) => {
                    done(&a[0]).then_some(ext_rule(e))
                }
                Ext::SexecBOPre(_) => (token(&a[0]) && val(&a[1])).then_some(Rule::SexecBOPre),
                Ext::ParBOPost(_) => (done(&a[0]) && done(&a[1])).then_some(Rule::ParBOPost),
                Ext::DerefPost(_) => cell(&a[0]).map(|_| Rule::DerefPost),
                Ext::UpdateRefPre(_) => (val(&a[0]) && cell(&a[1]).is_some()).then_some(Rule::UpdateRefPre),
                Ext::UpdateRefPost(..) => {
                    matches!(env.get(&a[0]).and_then(RTerm::as_con), Some((c, _)) if &**c == PAIR).then_some(Rule::UpdateRefPost)
                }
                Ext::Linear => None,
            },
            _ => None,
        }
    }
}

impl fmt::Display for MutConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "root {}", self.root)?;
        for (x, t) in &self.env {
            writeln!(f, "{x} = {t}")?;
        }
        for (l, x) in &self.mem {
            writeln!(f, "{l} |-> {x}")?;
        }
        Ok(())
    }
}

pub(crate) fn op_rule(op: Op) -> Rule {
    match op {
        Op::NewRef => Rule::NewRef,
        Op::FreeRef => Rule::FreeRef,
        Op::NewLifetime => Rule::NewLifetime,
        Op::EndLifetime => Rule::EndLifetime,
        Op::Borrow => Rule::Borrow,
        Op::Share => Rule::Share,
        Op::Copy => Rule::Copy,
        Op::JoinMut => Rule::JoinMut,
        Op::Reclaim => Rule::Reclaim,
        Op::ExecBO => Rule::ExecBO,
        Op::Int(_) => Rule::IntOp,
        Op::Rel(_) => Rule::Rel,
        Op::Par => Rule::Par,
        Op::Consume => Rule::Consume,
        Op::Move => Rule::Move,
        Op::Linearly => Rule::Linearly,
        Op::WithLinearly => Rule::WithLinearly,
    }
}

pub(crate) fn exe_rule(m: MonadOp) -> Rule {
    match m {
        MonadOp::Pure => Rule::ExePure,
        MonadOp::Bind => Rule::ExeBind,
        MonadOp::SexecBO => Rule::ExeSexecBO,
        MonadOp::ParBO => Rule::ExeParBO,
        MonadOp::Deref => Rule::ExeDeref,
        MonadOp::UpdateRef => Rule::ExeUpdateRef,
    }
}

pub(crate) fn ext_rule(e: &Ext) -> Rule {
    match e {
        Ext::Linear => Rule::Linear,
        Ext::ExeBO(_) => Rule::ExePure,
        Ext::ExecBOPost => Rule::ExecBOPost,
        Ext::BindPost => Rule::BindPost,
        Ext::SexecBOPre(_) => Rule::SexecBOPre,
        Ext::SexecBOPost(..) => Rule::SexecBOPost,
        Ext::ParBOPost(_) => Rule::ParBOPost,
        Ext::DerefPost(_) => Rule::DerefPost,
        Ext::UpdateRefPre(_) => Rule::UpdateRefPre,
        Ext::UpdateRefPrePost(_) => Rule::UpdateRefPrePost,
        Ext::UpdateRefPost(..) => Rule::UpdateRefPost,
    }
}

/// Splits a monadic value `mo x̄` into its constructor and arguments.
pub(crate) fn monad_value(t: &RTerm) -> Option<(MonadOp, Vec<Name>)> {
    match t {
        RTerm::Src(Term::Mo(m, _, args)) => {
            let vars: Option<Vec<Name>> = args.iter().map(|a| a.as_var().cloned()).collect();
            vars.map(|v| (*m, v))
        }
        _ => None,
    }
}

pub fn enumerate_redexes_mut(c: &MutConfig) -> Vec<Redex> {
    enumerate(&c.env, &c.root, |_, t| c.rule_at(t))
}

pub fn is_normal_form_mut(c: &MutConfig) -> bool {
    c.env.get(&c.root).is_some_and(RTerm::is_value)
}

pub fn detect_forcing_loop_mut(c: &MutConfig, v: &Name) -> Option<Vec<Name>> {
    forcing_loop(&c.env, v)
}

pub fn step_mut(c: &MutConfig, r: &Redex) -> Result<MutConfig, StepError> {
    step_mut_traced(c, r).map(|(c, _)| c)
}

pub fn step_mut_traced(c: &MutConfig, r: &Redex) -> Result<(MutConfig, MutDelta), StepError> {
    let mut next = c.clone();
    let x = &r.target_var;
    let rule = r.rule_id;
    let fail = || StepError::NotApplicable { var: x.clone(), rule };
    let t = c.env.get(x).ok_or_else(fail)?;
    if c.rule_at(t) != Some(rule) && rule != Rule::Loop {
        return Err(fail());
    }
    let mut mem_delta = BTreeMap::new();
    let touched = {
        let MutConfig { env, mem, fresh, next_loc, .. } = &mut next;
        let mut tx = Tx::new(env, fresh);
        let mut write = |mem: &mut BTreeMap<Loc, Name>, l: Loc, v: Option<Name>| {
            mem_delta.insert(l.to_string(), v.as_ref().map(|n| n.to_string()));
            match v {
                Some(v) => mem.insert(l, v),
                None => mem.remove(&l),
            };
        };
        let cell = |tx: &Tx<'_>, mem: &BTreeMap<Loc, Name>, y: &Name| match tx.get(y) {
            Some(RTerm::Ref(RefTarget::Loc(l))) => mem.get(l).map(|v| (*l, v.clone())),
            _ => None,
        };
        match rule {
            Rule::Loop => {}
            Rule::Var => {
                let y = t.as_var().ok_or_else(fail)?;
                let v = tx.value(y).ok_or_else(fail)?;
                tx.set(x, v);
            }
            Rule::NewRef | Rule::FreeRef | Rule::NewLifetime | Rule::EndLifetime | Rule::Borrow | Rule::Share
            | Rule::Copy | Rule::JoinMut | Rule::Reclaim | Rule::ExecBO => {
                let RTerm::Src(Term::Op(_, _, args)) = t else { return Err(fail()) };
                let a: Vec<Name> = args.iter().map(|a| a.as_var().cloned()).collect::<Option<_>>().ok_or_else(fail)?;
                match rule {
                    Rule::NewRef => {
                        let l = Loc(*next_loc);
                        *next_loc += 1;
                        write(mem, l, Some(a[1].clone()));
                        tx.set(x, RTerm::Ref(RefTarget::Loc(l)));
                    }
                    Rule::FreeRef => {
                        let (l, content) = cell(&tx, mem, &a[0]).ok_or_else(fail)?;
                        write(mem, l, None);
                        tx.set(x, RTerm::var(&content));
                    }
                    Rule::NewLifetime => {
                        let now = tx.bind("now", RTerm::Token(None));
                        tx.set(x, RTerm::Src(Term::app(Term::Var(a[1].clone()), Term::Var(now))));
                    }
                    Rule::EndLifetime => tx.set(x, RTerm::con(crate::syntax::UR, &[&a[0]])),
                    Rule::Borrow => {
                        let v = tx.value(&a[1]).ok_or_else(fail)?;
                        let bm = tx.bind("bm", v.clone());
                        let bl = tx.bind("bl", v);
                        tx.set(x, RTerm::pair(&bm, &bl));
                    }
                    Rule::Share => tx.set(x, RTerm::con(crate::syntax::UR, &[&a[0]])),
                    Rule::Copy | Rule::JoinMut => {
                        let v = tx.value(&a[0]).ok_or_else(fail)?;
                        tx.set(x, v);
                    }
                    Rule::Reclaim => tx.set(x, RTerm::var(&a[0])),
                    Rule::ExecBO => {
                        let res = tx.bind("res", RTerm::ext(Ext::ExeBO(History::empty()), &[&a[1]]));
                        tx.set(x, RTerm::ext(Ext::ExecBOPost, &[&res]));
                    }
                    _ => unreachable!(),
                }
            }
            Rule::ExePure | Rule::ExeBind | Rule::ExeSexecBO | Rule::ExeParBO | Rule::ExeDeref | Rule::ExeUpdateRef => {
                let RTerm::Ext(Ext::ExeBO(_), a) = t else { return Err(fail()) };
                let (m, args) = tx.get(&a[0]).and_then(monad_value).ok_or_else(fail)?;
                let empty = History::empty;
                match m {
                    MonadOp::Pure => tx.set(x, RTerm::Done(empty(), args[0].clone())),
                    MonadOp::Bind => {
                        let res = tx.bind("res", RTerm::ext(Ext::ExeBO(empty()), &[&args[0]]));
                        tx.set(x, RTerm::ext(Ext::BindPost, &[&res, &args[1]]));
                    }
                    MonadOp::SexecBO => tx.set(x, RTerm::ext(Ext::SexecBOPre(empty()), &[&args[0], &args[1]])),
                    MonadOp::ParBO => {
                        let r0 = tx.bind("res", RTerm::ext(Ext::ExeBO(empty()), &[&args[0]]));
                        let r1 = tx.bind("res", RTerm::ext(Ext::ExeBO(empty()), &[&args[1]]));
                        tx.set(x, RTerm::ext(Ext::ParBOPost(empty()), &[&r0, &r1]));
                    }
                    MonadOp::Deref => tx.set(x, RTerm::ext(Ext::DerefPost(empty()), &[&args[0]])),
                    MonadOp::UpdateRef => tx.set(x, RTerm::ext(Ext::UpdateRefPre(empty()), &[&args[0], &args[1]])),
                }
            }
            _ if !matches!(t, RTerm::Ext(..)) => step_common(&mut tx, x, rule)?,
            _ => {
                let RTerm::Ext(e, a) = t else { unreachable!() };
                let done = |tx: &Tx<'_>, y: &Name| match tx.get(y) {
                    Some(RTerm::Done(_, v)) => Some(v.clone()),
                    _ => None,
                };
                match (e, rule) {
                    (Ext::Linear, Rule::Linear) => step_common(&mut tx, x, rule)?,
                    (Ext::ExecBOPost, Rule::ExecBOPost) => {
                        let y = done(&tx, &a[0]).ok_or_else(fail)?;
                        let now = tx.bind("now", RTerm::Token(None));
                        tx.set(x, RTerm::pair(&now, &y));
                    }
                    (Ext::BindPost, Rule::BindPost) => {
                        let y = done(&tx, &a[0]).ok_or_else(fail)?;
                        let bo = tx.bind("bo", RTerm::Src(Term::app(Term::Var(a[1].clone()), Term::Var(y))));
                        tx.set(x, RTerm::ext(Ext::ExeBO(History::empty()), &[&bo]));
                    }
                    (Ext::SexecBOPre(_), Rule::SexecBOPre) => {
                        let res = tx.bind("res", RTerm::ext(Ext::ExeBO(History::empty()), &[&a[1]]));
                        tx.set(x, RTerm::ext(Ext::SexecBOPost(History::empty(), History::empty()), &[&res]));
                    }
                    (Ext::SexecBOPost(..), Rule::SexecBOPost) => {
                        let y = done(&tx, &a[0]).ok_or_else(fail)?;
                        let now = tx.bind("now", RTerm::Token(None));
                        let pr = tx.bind("pr", RTerm::pair(&now, &y));
                        tx.set(x, RTerm::Done(History::empty(), pr));
                    }
                    (Ext::ParBOPost(_), Rule::ParBOPost) => {
                        let y = done(&tx, &a[0]).ok_or_else(fail)?;
                        let z = done(&tx, &a[1]).ok_or_else(fail)?;
                        let pr = tx.bind("pr", RTerm::pair(&y, &z));
                        tx.set(x, RTerm::Done(History::empty(), pr));
                    }
                    (Ext::DerefPost(_), Rule::DerefPost) => {
                        let (_, y) = cell(&tx, mem, &a[0]).ok_or_else(fail)?;
                        let y2 = tx.bind(y.base(), RTerm::var(&y));
                        tx.set(x, RTerm::Done(History::empty(), y2));
                    }
                    (Ext::UpdateRefPre(_), Rule::UpdateRefPre) => {
                        let (l, y) = cell(&tx, mem, &a[1]).ok_or_else(fail)?;
                        let bo = tx.bind("bo", RTerm::Src(Term::app(Term::Var(a[0].clone()), Term::Var(y))));
                        let res = tx.bind("res", RTerm::ext(Ext::ExeBO(History::empty()), &[&bo]));
                        tx.set(x, RTerm::ext(Ext::UpdateRefPrePost(Target::Loc(l)), &[&res]));
                    }
                    (Ext::UpdateRefPrePost(target), Rule::UpdateRefPrePost) => {
                        let pr = done(&tx, &a[0]).ok_or_else(fail)?;
                        tx.set(x, RTerm::ext(Ext::UpdateRefPost(target.clone(), History::empty()), &[&pr]));
                    }
                    (Ext::UpdateRefPost(Target::Loc(l), _), Rule::UpdateRefPost) => {
                        let pair = tx.get(&a[0]).cloned().ok_or_else(fail)?;
                        let (_, fields) = pair.as_con().ok_or_else(fail)?;
                        let (c0, b) = (fields[0].clone(), fields[1].clone());
                        let r = tx.bind("ref", RTerm::Ref(RefTarget::Loc(*l)));
                        let pr = tx.bind("pr", RTerm::pair(&c0, &r));
                        tx.set(x, RTerm::Done(History::empty(), pr));
                        write(mem, *l, Some(b));
                    }
                    _ => return Err(fail()),
                }
            }
        }
        tx.touched
    };
    Ok(finish(touched, next, mem_delta))
}

fn finish(touched: Vec<Name>, next: MutConfig, mem_delta: BTreeMap<String, Option<String>>) -> (MutConfig, MutDelta) {
    let env_delta = touched.iter().map(|x| (x.to_string(), next.env[x].to_string())).collect();
    (next, MutDelta { env_delta, mem_delta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{default_decls, parse_program, parse_term_with};

    fn src(s: &str) -> RTerm {
        RTerm::Src(erase(&parse_term_with(&default_decls(), s).unwrap()))
    }

    fn run_first(mut c: MutConfig, limit: usize) -> MutConfig {
        for _ in 0..limit {
            let rs: Vec<Redex> = c.redexes().into_iter().filter(|r| r.rule_id != Rule::Loop).collect();
            let Some(r) = rs.first() else { break };
            c = step_mut(&c, r).unwrap();
        }
        c
    }

    #[test]
    fn literal_is_normal() {
        let c = MutConfig::from_program(&parse_program("5").unwrap());
        assert!(c.is_normal_form());
        assert!(c.redexes().is_empty());
        let c = MutConfig::from_program(&parse_program("(\\x. x) 1").unwrap());
        assert!(!c.is_normal_form());
    }

    #[test]
    fn free_ref_removes_the_cell() {
        let mut env = Env::new();
        env.insert(Name::from("main"), src("freeRef r"));
        env.insert(Name::from("r"), RTerm::Ref(RefTarget::Loc(Loc(0))));
        env.insert(Name::from("c"), RTerm::int(4));
        let mem = BTreeMap::from([(Loc(0), Name::from("c"))]);
        let c = MutConfig::from_parts(env, mem, Name::from("main"));
        let c = step_mut(&c, &Redex { target_var: Name::from("main"), rule_id: Rule::FreeRef }).unwrap();
        assert!(c.mem.is_empty());
        assert_eq!(c.env[&Name::from("main")].as_var(), Some(&Name::from("c")));
    }

    #[test]
    fn linearly_threads_a_token() {
        let c = MutConfig::from_program(&parse_program("linearly (\\li. move 9)").unwrap());
        let c = run_first(c, 50);
        assert!(c.is_normal_form());
        assert_eq!(crate::runtime::returned_int(&c.env, &c.root), Some(9));
        assert!(c.env.values().any(|t| matches!(t, RTerm::Token(None))));
    }

    #[test]
    fn reduce_example_state() {
        let mut env = Env::new();
        env.insert(Name::from("x"), RTerm::int(3));
        env.insert(Name::from("ref"), RTerm::Ref(RefTarget::Loc(Loc(0))));
        env.insert(Name::from("now"), RTerm::Token(None));
        env.insert(Name::from("main"), src("execBO now (modifyRef (\\x. x + 4) ref)"));
        let mem = BTreeMap::from([(Loc(0), Name::from("x"))]);
        let c = run_first(MutConfig::from_parts(env, mem, Name::from("main")), 200);
        assert!(c.is_normal_form());
        let b = &c.mem[&Loc(0)];
        assert_eq!(c.env[b].as_int(), Some(7));
        assert_eq!(c.env[&Name::from("x")].as_int(), Some(3));
        assert!(detect_forcing_loop_mut(&c, &c.root).is_none());
    }

    #[test]
    fn self_force_is_a_black_hole() {
        let c = MutConfig::from_program(&parse_program("let w = seq w in w in w").unwrap());
        let c = run_first(c, 10);
        let rs = c.redexes();
        assert_eq!(rs.len(), 1);
        assert_eq!(rs[0].rule_id, Rule::Loop);
    }
}
