use std::fmt;

use serde::Serialize;

use super::{Machine, Scheduler, Semantics};
use crate::runtime::{forcing_loop, returned_int, Redex, Rule, StepError};
use crate::sem_den::DenConfig;
use crate::sem_mut::MutConfig;
use crate::syntax::Program;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", content = "value")]
pub enum Outcome {
    ReturnedInt(i64),
    NormalValue(String),
    BlackHole(Vec<String>),
    BudgetExhausted(usize),
    Stuck(String),
    SeparationViolation(String),
}

impl Outcome {
    pub fn is_terminating(&self) -> bool {
        matches!(self, Outcome::ReturnedInt(_) | Outcome::NormalValue(_))
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::ReturnedInt(n) => write!(f, "ReturnedInt({n})"),
            Outcome::NormalValue(s) => write!(f, "NormalValue({s})"),
            Outcome::BlackHole(c) => write!(f, "BlackHole({})", c.join(" -> ")),
            Outcome::BudgetExhausted(n) => write!(f, "BudgetExhausted({n})"),
            Outcome::Stuck(d) => write!(f, "Stuck({d})"),
            Outcome::SeparationViolation(d) => write!(f, "SeparationViolation({d})"),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceEntry<D> {
    pub step_index: usize,
    pub rule_id: Rule,
    pub target_var: String,
    #[serde(flatten)]
    pub delta: D,
}

#[derive(Clone, Debug)]
pub struct RunResult<M: Machine> {
    pub outcome: Outcome,
    pub trace: Vec<TraceEntry<M::Delta>>,
    pub last: M,
    pub steps: usize,
}

/// The outcome of a configuration with no step left to take, if it has none.
pub fn classify_final<M: Machine>(c: &M, redexes: &[Redex]) -> Option<Outcome> {
    if redexes.iter().any(|r| r.rule_id != Rule::Loop) {
        return None;
    }
    let root = c.env().get(c.root());
    if root.is_some_and(|t| t.is_value()) {
        return Some(match returned_int(c.env(), c.root()) {
            Some(n) => Outcome::ReturnedInt(n),
            None => Outcome::NormalValue(root.map(|t| t.shape()).unwrap_or_default()),
        });
    }
    if !redexes.is_empty() {
        let cycle = forcing_loop(c.env(), c.root()).unwrap_or_default();
        return Some(Outcome::BlackHole(cycle.iter().map(|x| x.to_string()).collect()));
    }
    Some(Outcome::Stuck(format!("{:016x}", c.key())))
}

/// Steps `init` under `sched` until it has no step other than a self-step,
/// or `budget` steps were taken.
pub fn run_machine<M: Machine>(init: M, sched: &Scheduler, budget: usize, keep_trace: bool) -> RunResult<M> {
    let mut st = sched.start();
    let mut c = init;
    let mut trace = Vec::new();
    for step_index in 0..budget {
        let redexes = c.redexes();
        if let Some(outcome) = classify_final(&c, &redexes) {
            return RunResult { outcome, trace, last: c, steps: step_index };
        }
        let cands: Vec<&Redex> = redexes.iter().filter(|r| r.rule_id != Rule::Loop).collect();
        let r = cands[st.pick(cands.len())];
        match c.step(r) {
            Ok((next, delta)) => {
                if keep_trace {
                    trace.push(TraceEntry {
                        step_index,
                        rule_id: r.rule_id,
                        target_var: r.target_var.to_string(),
                        delta,
                    });
                }
                c = next;
            }
            Err(e) => {
                let outcome = match e {
                    StepError::Separation(p) => Outcome::SeparationViolation(format!("{p}")),
                    other => Outcome::Stuck(format!("{:016x}: {other}", c.key())),
                };
                return RunResult { outcome, trace, last: c, steps: step_index };
            }
        }
    }
    let redexes = c.redexes();
    let outcome = classify_final(&c, &redexes).unwrap_or(Outcome::BudgetExhausted(budget));
    RunResult { outcome, trace, last: c, steps: budget }
}

/// Runs `program` and returns the outcome with the trace as JSON lines.
pub fn run(program: &Program, sem: Semantics, sched: &Scheduler, budget: usize) -> (Outcome, Vec<serde_json::Value>) {
    fn go<M: Machine>(p: &Program, s: &Scheduler, budget: usize) -> (Outcome, Vec<serde_json::Value>) {
        let r = run_machine(M::initial(p), s, budget, true);
        let trace = r.trace.iter().map(|e| serde_json::to_value(e).expect("trace entries serialize")).collect();
        (r.outcome, trace)
    }
    match sem {
        Semantics::Mut => go::<MutConfig>(program, sched, budget),
        Semantics::Den => go::<DenConfig>(program, sched, budget),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_program;

    fn p(s: &str) -> Program {
        parse_program(s).unwrap()
    }

    #[test]
    fn literal_returns() {
        for sem in [Semantics::Mut, Semantics::Den] {
            let (o, trace) = run(&p("42"), sem, &Scheduler::FirstRedex, 10);
            assert_eq!(o, Outcome::ReturnedInt(42));
            assert!(trace.is_empty());
        }
    }

    #[test]
    fn arithmetic_under_every_strategy() {
        let scheds = [Scheduler::FirstRedex, Scheduler::LastRedex, Scheduler::RoundRobin, Scheduler::SeededRandom(3)];
        for s in &scheds {
            let (o, _) = run(&p("(1 + 2) * (3 + 4)"), Semantics::Den, s, 100);
            assert_eq!(o, Outcome::ReturnedInt(21));
        }
    }

    #[test]
    fn budget_and_black_hole() {
        let (o, _) = run(&p("let w = seq w in w in w"), Semantics::Mut, &Scheduler::FirstRedex, 100);
        assert!(matches!(o, Outcome::BlackHole(ref c) if !c.is_empty()), "{o}");
        let (o, _) = run(&p("let f = \\x. f x in f 1"), Semantics::Mut, &Scheduler::FirstRedex, 50);
        assert_eq!(o, Outcome::BudgetExhausted(50));
    }

    #[test]
    fn traces_are_reproducible() {
        let prog = p("(\\x. x + x) (2 * 3)");
        let a = run(&prog, Semantics::Den, &Scheduler::SeededRandom(5), 100);
        let b = run(&prog, Semantics::Den, &Scheduler::SeededRandom(5), 100);
        assert_eq!(serde_json::to_string(&a.1).unwrap(), serde_json::to_string(&b.1).unwrap());
        assert_eq!(a.0, Outcome::ReturnedInt(12));
        let first = &a.1[0];
        for k in ["step_index", "rule_id", "target_var", "env_delta", "bids_delta", "history_events"] {
            assert!(first.get(k).is_some(), "missing {k}");
        }
    }
}
