//! Runtime terms shared by the two operational semantics, and the parts of
//! reduction that do not depend on how references are represented.
//!
//! Source terms appear erased inside [`RTerm::Src`]. Everything the machine
//! introduces on its own (tokens, references, lenders, monadic results,
//! borrower wrappers and extra operators) only ever occurs at the top of an
//! environment binding, with variables as arguments.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::histories::{BorrowId, BorrowPath, History};
use crate::syntax::{print_verbatim, rename_free, subst_var, FreshSupply, LetKind, Name, Op, Term, PAIR, UNIT, UR};

pub type Env = BTreeMap<Name, RTerm>;

/// A memory location of the mutative semantics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Loc(pub u32);

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "l{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Wrapper {
    Mut(Vec<BorrowPath>),
    Share,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum RefTarget {
    Loc(Loc),
    Var(Name),
}

/// What an `updateRef` in flight writes back to.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Target {
    Loc(Loc),
    Paths(Vec<BorrowPath>),
}

/// Extra operators. The mutative semantics leaves every history empty.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Ext {
    Linear,
    ExeBO(History),
    ExecBOPost,
    BindPost,
    SexecBOPre(History),
    SexecBOPost(History, History),
    ParBOPost(History),
    DerefPost(History),
    UpdateRefPre(History),
    UpdateRefPrePost(Target),
    UpdateRefPost(Target, History),
}

impl Ext {
    pub fn keyword(&self) -> &'static str {
        match self {
            Ext::Linear => "linear",
            Ext::ExeBO(_) => "exeBO",
            Ext::ExecBOPost => "execBO-post",
            Ext::BindPost => "bind-post",
            Ext::SexecBOPre(_) => "sexecBO-pre",
            Ext::SexecBOPost(..) => "sexecBO-post",
            Ext::ParBOPost(_) => "parBO-post",
            Ext::DerefPost(_) => "deref-post",
            Ext::UpdateRefPre(_) => "updateRef-pre",
            Ext::UpdateRefPrePost(_) => "updateRef-prepost",
            Ext::UpdateRefPost(..) => "updateRef-post",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RTerm {
    Src(Term),
    /// `•`, or `•_H` for lifetime tokens of the denotational semantics.
    Token(Option<History>),
    Ref(RefTarget),
    Lend(BorrowId, Name),
    Done(History, Name),
    Wrap(Wrapper, Box<RTerm>),
    Ext(Ext, Vec<Name>),
}

impl RTerm {
    pub fn var(x: &Name) -> RTerm {
        RTerm::Src(Term::Var(x.clone()))
    }

    pub fn int(n: i64) -> RTerm {
        RTerm::Src(Term::Int(n))
    }

    pub fn con(c: &str, args: &[&Name]) -> RTerm {
        RTerm::Src(Term::con(c, args.iter().map(|x| Term::Var((*x).clone())).collect()))
    }

    pub fn pair(a: &Name, b: &Name) -> RTerm {
        RTerm::con(PAIR, &[a, b])
    }

    pub fn ext(e: Ext, args: &[&Name]) -> RTerm {
        RTerm::Ext(e, args.iter().map(|x| (*x).clone()).collect())
    }

    pub fn is_value(&self) -> bool {
        match self {
            RTerm::Src(t) => term_is_value(t),
            RTerm::Token(_) | RTerm::Ref(_) | RTerm::Lend(..) | RTerm::Done(..) => true,
            RTerm::Wrap(_, inner) => inner.is_value(),
            RTerm::Ext(..) => false,
        }
    }

    pub fn as_var(&self) -> Option<&Name> {
        match self {
            RTerm::Src(Term::Var(x)) => Some(x),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            RTerm::Src(Term::Int(n)) => Some(*n),
            _ => None,
        }
    }

    /// `Con x̄` with the field variables.
    pub fn as_con(&self) -> Option<(&Name, Vec<&Name>)> {
        match self {
            RTerm::Src(Term::Con(c, _, args)) => {
                let vars: Option<Vec<&Name>> = args.iter().map(|a| a.as_var()).collect();
                vars.map(|v| (c, v))
            }
            _ => None,
        }
    }

    /// Splits off the outer borrower context.
    pub fn unwrap_borrowers(&self) -> (Vec<&Wrapper>, &RTerm) {
        let mut ws = Vec::new();
        let mut t = self;
        while let RTerm::Wrap(w, inner) = t {
            ws.push(w);
            t = inner;
        }
        (ws, t)
    }

    /// A short description of the outermost shape of a value.
    pub fn shape(&self) -> String {
        match self {
            RTerm::Src(Term::Lam(..)) => "lambda".into(),
            RTerm::Src(Term::Int(n)) => n.to_string(),
            RTerm::Src(Term::Con(c, _, args)) => format!("{c}/{}", args.len()),
            RTerm::Src(Term::Mo(m, _, _)) => m.keyword().into(),
            RTerm::Src(_) => "term".into(),
            RTerm::Token(_) => "token".into(),
            RTerm::Ref(_) => "Ref".into(),
            RTerm::Lend(..) => "Lend".into(),
            RTerm::Done(..) => "Done".into(),
            RTerm::Wrap(Wrapper::Mut(_), inner) => format!("Mut({})", inner.shape()),
            RTerm::Wrap(Wrapper::Share, inner) => format!("Share({})", inner.shape()),
            RTerm::Ext(e, _) => e.keyword().into(),
        }
    }
}

fn term_is_value(t: &Term) -> bool {
    match t {
        Term::Lam(..) | Term::Int(_) => true,
        Term::Con(_, _, args) | Term::Mo(_, _, args) => args.iter().all(Term::is_var),
        _ => false,
    }
}

fn hist_sub(h: &History) -> String {
    if h.is_empty() {
        String::new()
    } else {
        format!("_{h}")
    }
}

fn paths(ps: &[BorrowPath]) -> String {
    ps.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for Wrapper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Wrapper::Mut(ps) => write!(f, "Mut^{{{}}}", paths(ps)),
            Wrapper::Share => write!(f, "Share"),
        }
    }
}

impl fmt::Display for RTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RTerm::Src(t) => write!(f, "{}", print_verbatim(t)),
            RTerm::Token(None) => write!(f, "•"),
            RTerm::Token(Some(h)) => write!(f, "•_{h}"),
            RTerm::Ref(RefTarget::Loc(l)) => write!(f, "Ref {l}"),
            RTerm::Ref(RefTarget::Var(x)) => write!(f, "Ref {x}"),
            RTerm::Lend(b, x) => write!(f, "Lend^{b} {x}"),
            RTerm::Done(h, x) => write!(f, "Done{} {x}", hist_sub(h)),
            RTerm::Wrap(w, inner) => match inner.as_ref() {
                RTerm::Src(Term::Var(_)) | RTerm::Token(_) => write!(f, "{w} {inner}"),
                _ => write!(f, "{w} ({inner})"),
            },
            RTerm::Ext(e, args) => {
                write!(f, "{}", e.keyword())?;
                match e {
                    Ext::ExeBO(h) | Ext::SexecBOPre(h) | Ext::ParBOPost(h) | Ext::DerefPost(h) | Ext::UpdateRefPre(h) => {
                        write!(f, "{}", hist_sub(h))?
                    }
                    Ext::SexecBOPost(h, h2) => write!(f, "_{h};{h2}")?,
                    Ext::UpdateRefPrePost(t) => write!(f, "[{}]", target(t))?,
                    Ext::UpdateRefPost(t, h) => write!(f, "[{};{h}]", target(t))?,
                    Ext::Linear | Ext::ExecBOPost | Ext::BindPost => {}
                }
                for a in args {
                    write!(f, " {a}")?;
                }
                Ok(())
            }
        }
    }
}

fn target(t: &Target) -> String {
    match t {
        Target::Loc(l) => l.to_string(),
        Target::Paths(ps) => paths(ps),
    }
}

/// Names of reduction rules, as they appear in traces and reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    Let,
    Denest,
    Var,
    App,
    Seq,
    Case,
    CaseBor,
    IntOp,
    Rel,
    Par,
    Consume,
    Move,
    Linearly,
    Linear,
    WithLinearly,
    NewRef,
    FreeRef,
    NewLifetime,
    EndLifetime,
    Borrow,
    Share,
    Copy,
    JoinMut,
    Reclaim,
    ExecBO,
    ExecBOPost,
    ExePure,
    ExeBind,
    BindPost,
    ExeSexecBO,
    SexecBOPre,
    SexecBOPost,
    ExeParBO,
    ParBOPost,
    ExeDeref,
    DerefPost,
    ExeUpdateRef,
    UpdateRefPre,
    UpdateRefPrePost,
    UpdateRefPost,
    Loop,
}

impl Rule {
    pub fn id(self) -> &'static str {
        match self {
            Rule::Let => "let",
            Rule::Denest => "denest",
            Rule::Var => "var",
            Rule::App => "app",
            Rule::Seq => "seq",
            Rule::Case => "case",
            Rule::CaseBor => "case-bor",
            Rule::IntOp => "iop",
            Rule::Rel => "irel",
            Rule::Par => "par",
            Rule::Consume => "consume",
            Rule::Move => "move",
            Rule::Linearly => "linearly",
            Rule::Linear => "linear",
            Rule::WithLinearly => "withLinearly",
            Rule::NewRef => "newRef",
            Rule::FreeRef => "freeRef",
            Rule::NewLifetime => "newLifetime",
            Rule::EndLifetime => "endLifetime",
            Rule::Borrow => "borrow",
            Rule::Share => "share",
            Rule::Copy => "copy",
            Rule::JoinMut => "joinMut",
            Rule::Reclaim => "reclaim",
            Rule::ExecBO => "execBO",
            Rule::ExecBOPost => "execBO-post",
            Rule::ExePure => "exeBO-pure",
            Rule::ExeBind => "exeBO-bind",
            Rule::BindPost => "bind-post",
            Rule::ExeSexecBO => "exeBO-sexecBO",
            Rule::SexecBOPre => "sexecBO-pre",
            Rule::SexecBOPost => "sexecBO-post",
            Rule::ExeParBO => "exeBO-parBO",
            Rule::ParBOPost => "parBO-post",
            Rule::ExeDeref => "exeBO-deref",
            Rule::DerefPost => "deref-post",
            Rule::ExeUpdateRef => "exeBO-updateRef",
            Rule::UpdateRefPre => "updateRef-pre",
            Rule::UpdateRefPrePost => "updateRef-prepost",
            Rule::UpdateRefPost => "updateRef-post",
            Rule::Loop => "loop",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl Serialize for Rule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.id())
    }
}

/// One applicable rule instance: the binding of `target` gets rewritten.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Redex {
    pub target_var: Name,
    pub rule_id: Rule,
}

/// Variables the binding forces through an evaluation context.
pub fn forced_vars(t: &RTerm) -> Vec<&Name> {
    match t {
        RTerm::Src(Term::Var(y)) => vec![y],
        RTerm::Src(Term::App(f, a)) => match (f.as_var(), a.is_var()) {
            (Some(f), true) => vec![f],
            _ => vec![],
        },
        RTerm::Src(Term::Seq(y, body)) if body.is_var() => vec![y],
        RTerm::Src(Term::Case(s, _)) => s.as_var().into_iter().collect(),
        RTerm::Src(Term::Op(_, _, args)) => {
            let vars: Option<Vec<&Name>> = args.iter().map(|a| a.as_var()).collect();
            vars.unwrap_or_default()
        }
        RTerm::Ext(_, args) => args.iter().collect(),
        RTerm::Wrap(_, inner) => forced_vars(inner),
        _ => vec![],
    }
}

/// Position of the leftmost non-variable subterm in a denesting context.
fn denest_slot(t: &Term) -> Option<usize> {
    match t {
        Term::App(f, a) => {
            if !f.is_var() {
                Some(0)
            } else if !a.is_var() {
                Some(1)
            } else {
                None
            }
        }
        Term::Seq(_, body) | Term::Case(body, _) => (!body.is_var()).then_some(0),
        Term::Con(_, _, args) | Term::Op(_, _, args) | Term::Mo(_, _, args) => args.iter().position(|a| !a.is_var()),
        _ => None,
    }
}

/// Replaces the subterm at `slot` with `y`, returning the subterm and the
/// rewritten term.
fn denest_apply(t: &Term, slot: usize, y: &Name) -> (Term, Term) {
    let v = Term::Var(y.clone());
    match t {
        Term::App(f, a) if slot == 0 => ((**f).clone(), Term::App(Box::new(v), a.clone())),
        Term::App(f, a) => ((**a).clone(), Term::App(f.clone(), Box::new(v))),
        Term::Seq(x, body) => ((**body).clone(), Term::Seq(x.clone(), Box::new(v))),
        Term::Case(s, brs) => ((**s).clone(), Term::Case(Box::new(v), brs.clone())),
        Term::Con(c, i, args) => {
            let mut args = args.clone();
            let sub = std::mem::replace(&mut args[slot], v);
            (sub, Term::Con(c.clone(), i.clone(), args))
        }
        Term::Op(o, i, args) => {
            let mut args = args.clone();
            let sub = std::mem::replace(&mut args[slot], v);
            (sub, Term::Op(*o, i.clone(), args))
        }
        Term::Mo(o, i, args) => {
            let mut args = args.clone();
            let sub = std::mem::replace(&mut args[slot], v);
            (sub, Term::Mo(*o, i.clone(), args))
        }
        _ => unreachable!("denest_apply on a term without a slot"),
    }
}

/// Looks up `y` when it is bound to a value.
pub fn value_of<'a>(env: &'a Env, y: &Name) -> Option<&'a RTerm> {
    env.get(y).filter(|t| t.is_value())
}

fn op_args(args: &[Term]) -> Option<Vec<&Name>> {
    args.iter().map(|a| a.as_var()).collect()
}

/// Rules shared verbatim by both semantics, keyed on the binding alone.
pub(crate) fn common_rule(env: &Env, t: &RTerm) -> Option<Rule> {
    let RTerm::Src(t) = t else {
        return match t {
            RTerm::Ext(Ext::Linear, a) if value_of(env, &a[0]).is_some() => Some(Rule::Linear),
            _ => None,
        };
    };
    if matches!(t, Term::Let(..)) {
        return Some(Rule::Let);
    }
    if denest_slot(t).is_some() {
        return Some(Rule::Denest);
    }
    match t {
        Term::App(f, _) => {
            let f = f.as_var()?;
            matches!(env.get(f), Some(RTerm::Src(Term::Lam(..)))).then_some(Rule::App)
        }
        Term::Seq(y, _) => value_of(env, y).map(|_| Rule::Seq),
        Term::Case(s, brs) => {
            let (c, _) = env.get(s.as_var()?)?.as_con()?;
            brs.iter().any(|b| &b.ctor == c).then_some(Rule::Case)
        }
        Term::Op(op, _, args) => {
            let args = op_args(args)?;
            let val = |i: usize| value_of(env, args[i]);
            let ints = || args.iter().all(|a| env.get(*a).and_then(RTerm::as_int).is_some());
            match op {
                Op::Int(_) if ints() => Some(Rule::IntOp),
                Op::Rel(_) if ints() => Some(Rule::Rel),
                Op::Par if val(0).is_some() && val(1).is_some() => Some(Rule::Par),
                Op::Consume if val(0).is_some() => Some(Rule::Consume),
                Op::Move if val(0).is_some() => Some(Rule::Move),
                Op::Linearly if val(0).is_some() => Some(Rule::Linearly),
                Op::WithLinearly if val(0).is_some() => Some(Rule::WithLinearly),
                _ => None,
            }
        }
        _ => None,
    }
}

/// Why a step could not be taken.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum StepError {
    #[error("rule {rule} does not apply at `{var}`")]
    NotApplicable { var: Name, rule: Rule },
    #[error("parallel histories overlap at {0}")]
    Separation(BorrowPath),
    #[error("restoration by history is stuck at `{0}`")]
    RestoreStuck(Name),
}

/// Bookkeeping for one step: the environment being rewritten and every
/// variable whose binding changed.
pub(crate) struct Tx<'a> {
    pub env: &'a mut Env,
    pub fresh: &'a mut FreshSupply,
    pub touched: Vec<Name>,
}

impl<'a> Tx<'a> {
    pub fn new(env: &'a mut Env, fresh: &'a mut FreshSupply) -> Self {
        Tx { env, fresh, touched: Vec::new() }
    }

    pub fn set(&mut self, x: &Name, t: RTerm) {
        self.env.insert(x.clone(), t);
        self.touched.push(x.clone());
    }

    pub fn bind(&mut self, hint: &str, t: RTerm) -> Name {
        let x = self.fresh.name(&Name::from(hint));
        self.set(&x, t);
        x
    }

    pub fn get(&self, x: &Name) -> Option<&RTerm> {
        self.env.get(x)
    }

    pub fn value(&self, x: &Name) -> Option<RTerm> {
        value_of(self.env, x).cloned()
    }
}

fn not_applicable(x: &Name, rule: Rule) -> StepError {
    StepError::NotApplicable { var: x.clone(), rule }
}

/// Applies a rule from [`common_rule`] to the binding of `x`.
pub(crate) fn step_common(tx: &mut Tx<'_>, x: &Name, rule: Rule) -> Result<(), StepError> {
    let fail = || not_applicable(x, rule);
    let t = tx.get(x).cloned().ok_or_else(fail)?;
    match (&t, rule) {
        (RTerm::Src(Term::Let(kind, binds, body)), Rule::Let) => {
            let fresh: Vec<(Name, Name)> = binds.iter().map(|b| (b.name.clone(), tx.fresh.name(&b.name))).collect();
            for (b, (_, y)) in binds.iter().zip(&fresh) {
                let rhs = match kind {
                    LetKind::Rec => rename_free(&b.body, &fresh, tx.fresh),
                    LetKind::Linear => b.body.clone(),
                };
                tx.set(y, RTerm::Src(rhs));
            }
            let body = rename_free(body, &fresh, tx.fresh);
            tx.set(x, RTerm::Src(body));
        }
        (RTerm::Src(t), Rule::Denest) => {
            let slot = denest_slot(t).ok_or_else(fail)?;
            let y = tx.fresh.name(&Name::from("d"));
            let (sub, rest) = denest_apply(t, slot, &y);
            tx.set(&y, RTerm::Src(sub));
            tx.set(x, RTerm::Src(rest));
        }
        (RTerm::Src(Term::App(f, a)), Rule::App) => {
            let (f, a) = (f.as_var().ok_or_else(fail)?, a.as_var().ok_or_else(fail)?);
            let Some(RTerm::Src(Term::Lam(z, body))) = tx.get(f).cloned() else { return Err(fail()) };
            let body = subst_var(&body, &z.name, a, tx.fresh);
            tx.set(x, RTerm::Src(body));
        }
        (RTerm::Src(Term::Seq(y, body)), Rule::Seq) => {
            tx.value(y).ok_or_else(fail)?;
            tx.set(x, RTerm::Src((**body).clone()));
        }
        (RTerm::Src(Term::Case(s, brs)), Rule::Case) => {
            let scrut = tx.get(s.as_var().ok_or_else(fail)?).cloned().ok_or_else(fail)?;
            let (c, fields) = scrut.as_con().ok_or_else(fail)?;
            let br = brs.iter().find(|b| &b.ctor == c).ok_or_else(fail)?;
            let fields: Vec<Name> = fields.into_iter().cloned().collect();
            bind_branch(tx, x, br, fields.iter().map(RTerm::var).collect());
        }
        (RTerm::Src(Term::Op(op, _, args)), _) => {
            let args: Vec<Name> = op_args(args).ok_or_else(fail)?.into_iter().cloned().collect();
            match (op, rule) {
                (Op::Int(o), Rule::IntOp) => {
                    let a = tx.get(&args[0]).and_then(RTerm::as_int).ok_or_else(fail)?;
                    let b = tx.get(&args[1]).and_then(RTerm::as_int).ok_or_else(fail)?;
                    tx.set(x, RTerm::int(o.apply(a, b)));
                }
                (Op::Rel(o), Rule::Rel) => {
                    let a = tx.get(&args[0]).and_then(RTerm::as_int).ok_or_else(fail)?;
                    let b = tx.get(&args[1]).and_then(RTerm::as_int).ok_or_else(fail)?;
                    let c = if o.apply(a, b) { crate::syntax::TRUE } else { crate::syntax::FALSE };
                    tx.set(x, RTerm::con(c, &[]));
                }
                (Op::Par, Rule::Par) => {
                    tx.value(&args[0]).ok_or_else(fail)?;
                    tx.value(&args[1]).ok_or_else(fail)?;
                    tx.set(x, RTerm::pair(&args[0], &args[1]));
                }
                (Op::Consume, Rule::Consume) => {
                    tx.value(&args[0]).ok_or_else(fail)?;
                    tx.set(x, RTerm::con(UNIT, &[]));
                }
                (Op::Move, Rule::Move) => {
                    tx.value(&args[0]).ok_or_else(fail)?;
                    tx.set(x, RTerm::con(UR, &[&args[0]]));
                }
                (Op::Linearly, Rule::Linearly) => {
                    tx.value(&args[0]).ok_or_else(fail)?;
                    let li = tx.bind("li", RTerm::Token(None));
                    let b = tx.bind("b", RTerm::Src(Term::app(Term::Var(args[0].clone()), Term::Var(li))));
                    tx.set(x, RTerm::ext(Ext::Linear, &[&b]));
                }
                (Op::WithLinearly, Rule::WithLinearly) => {
                    tx.value(&args[0]).ok_or_else(fail)?;
                    let li = tx.bind("li", RTerm::Token(None));
                    tx.set(x, RTerm::pair(&li, &args[0]));
                }
                _ => return Err(fail()),
            }
        }
        (RTerm::Ext(Ext::Linear, a), Rule::Linear) => {
            let v = tx.value(&a[0]).ok_or_else(fail)?;
            tx.set(x, v);
        }
        _ => return Err(fail()),
    }
    Ok(())
}

/// Binds the branch variables of `br`, freshly renamed, to `fields`, and
/// continues with the branch body.
pub(crate) fn bind_branch(tx: &mut Tx<'_>, x: &Name, br: &crate::syntax::Branch, fields: Vec<RTerm>) {
    let renaming: Vec<(Name, Name)> = br.vars.iter().map(|v| (v.clone(), tx.fresh.name(v))).collect();
    for ((_, fresh), field) in renaming.iter().zip(fields) {
        tx.set(fresh, field);
    }
    let body = rename_free(&br.body, &renaming, tx.fresh);
    tx.set(x, RTerm::Src(body));
}

/// Every redex reachable from `root` through evaluation contexts, plus the
/// self-step when the root is caught in a forcing loop.
pub(crate) fn enumerate(env: &Env, root: &Name, local: impl Fn(&Name, &RTerm) -> Option<Rule>) -> Vec<Redex> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    let mut stack = vec![root.clone()];
    while let Some(x) = stack.pop() {
        if !seen.insert(x.clone()) {
            continue;
        }
        let Some(t) = env.get(&x) else { continue };
        if t.is_value() {
            continue;
        }
        if let Some(rule) = local(&x, t) {
            out.push(Redex { target_var: x.clone(), rule_id: rule });
        }
        for y in forced_vars(t).into_iter().rev() {
            if !seen.contains(y) {
                stack.push(y.clone());
            }
        }
    }
    if forcing_loop(env, root).is_some() {
        out.push(Redex { target_var: root.clone(), rule_id: Rule::Loop });
    }
    out
}

/// A cycle in the forcing graph reachable from `v`, listed from the first
/// variable of the cycle that the search meets.
pub fn forcing_loop(env: &Env, v: &Name) -> Option<Vec<Name>> {
    // 0 = unvisited, 1 = on the current path, 2 = finished
    let mut state: BTreeMap<Name, u8> = BTreeMap::new();
    let mut path: Vec<(Name, usize)> = vec![(v.clone(), 0)];
    state.insert(v.clone(), 1);
    while let Some((x, i)) = path.last().cloned() {
        let succ: Vec<&Name> = env.get(&x).map(forced_vars).unwrap_or_default();
        if i >= succ.len() {
            state.insert(x, 2);
            path.pop();
            continue;
        }
        path.last_mut().unwrap().1 += 1;
        let y = succ[i].clone();
        if !env.contains_key(&y) {
            continue;
        }
        match state.get(&y).copied().unwrap_or(0) {
            0 => {
                state.insert(y.clone(), 1);
                path.push((y, 0));
            }
            1 => {
                let start = path.iter().position(|(z, _)| *z == y).unwrap();
                return Some(path[start..].iter().map(|(z, _)| z.clone()).collect());
            }
            _ => {}
        }
    }
    None
}

/// Follows variable-to-variable bindings to the final binding.
pub fn chase<'a>(env: &'a Env, x: &Name) -> Option<&'a RTerm> {
    let mut cur = x;
    for _ in 0..=env.len() {
        let t = env.get(cur)?;
        match t.as_var() {
            Some(y) => cur = y,
            None => return Some(t),
        }
    }
    None
}

/// The integer a normal form returns: the root value itself, or the field
/// of an `Ur` around it.
pub fn returned_int(env: &Env, root: &Name) -> Option<i64> {
    let t = env.get(root)?;
    if let Some(n) = t.as_int() {
        return Some(n);
    }
    let (c, fields) = t.as_con()?;
    if &**c != UR {
        return None;
    }
    chase(env, fields[0])?.as_int()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{erase, parse_term_with, default_decls};

    fn env_of(bindings: &[(&str, &str)]) -> Env {
        bindings
            .iter()
            .map(|(x, src)| (Name::from(*x), RTerm::Src(erase(&parse_term_with(&default_decls(), src).unwrap()))))
            .collect()
    }

    #[test]
    fn values() {
        assert!(RTerm::int(3).is_value());
        assert!(RTerm::Token(None).is_value());
        assert!(RTerm::Wrap(Wrapper::Share, Box::new(RTerm::int(1))).is_value());
        assert!(!RTerm::Wrap(Wrapper::Share, Box::new(RTerm::var(&Name::from("x")))).is_value());
        let env = env_of(&[("p", "(a, 1 + 2)")]);
        assert!(!env[&Name::from("p")].is_value());
    }

    #[test]
    fn plus_forces_both_arguments() {
        let env = env_of(&[("m", "a + b"), ("a", "1 + 2"), ("b", "3 + 4")]);
        let rs = enumerate(&env, &Name::from("m"), |_, t| common_rule(&env, t));
        let targets: Vec<&str> = rs.iter().map(|r| r.target_var.as_str()).collect();
        assert_eq!(targets, ["a", "b"]);
        // literal operands are named first
        assert!(rs.iter().all(|r| r.rule_id == Rule::Denest));
    }

    #[test]
    fn self_seq_is_a_loop() {
        let env = env_of(&[("x", "seq x in x")]);
        assert_eq!(forcing_loop(&env, &Name::from("x")), Some(vec![Name::from("x")]));
    }

    #[test]
    fn two_variable_loop() {
        let env = env_of(&[("m", "x"), ("x", "y z"), ("y", "case x of { () -> 1 }"), ("z", "1")]);
        assert_eq!(forcing_loop(&env, &Name::from("m")), Some(vec![Name::from("x"), Name::from("y")]));
        let rs = enumerate(&env, &Name::from("m"), |_, t| common_rule(&env, t));
        assert_eq!(rs, vec![Redex { target_var: Name::from("m"), rule_id: Rule::Loop }]);
    }

    #[test]
    fn let_flattening_renames() {
        let mut env = env_of(&[("m", "let x = 1 in x")]);
        let mut fresh = FreshSupply::default();
        let mut tx = Tx::new(&mut env, &mut fresh);
        step_common(&mut tx, &Name::from("m"), Rule::Let).unwrap();
        assert_eq!(env[&Name::from("m")].to_string(), "x#0");
        assert_eq!(env[&Name::from("x#0")].as_int(), Some(1));
    }

    #[test]
    fn denesting_is_leftmost() {
        let mut env = env_of(&[("m", "par (1 + 1) (2 + 2)")]);
        let mut fresh = FreshSupply::default();
        let mut tx = Tx::new(&mut env, &mut fresh);
        step_common(&mut tx, &Name::from("m"), Rule::Denest).unwrap();
        assert_eq!(env[&Name::from("d#0")].to_string(), "1 + 1");
    }
}
