use std::collections::{BTreeSet, HashSet};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use super::graph::{expand, node_cap, par_map, reduction_graph_of, ExplosionAbort, ReductionGraph, StepFailure};
use super::{run_machine, Machine, Outcome, Scheduler};
use crate::runtime::Redex;
use crate::sem_den::DenConfig;
use crate::sem_mut::MutConfig;
use crate::syntax::{Name, Program};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    fn of(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Stats {
    pub nodes: usize,
    pub edges: usize,
    pub runs: usize,
    pub max_depth: usize,
    pub wall_ms: u64,
}

/// The JSON report shared by all checkers.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub check: String,
    pub program: String,
    pub parameters: Value,
    pub verdict: Verdict,
    pub violations: Vec<Value>,
    pub stats: Stats,
}

fn elapsed_ms(t: Instant) -> u64 {
    t.elapsed().as_millis() as u64
}

#[derive(Clone, Debug, Serialize)]
pub struct DiamondViolation {
    pub node: usize,
    pub left: usize,
    pub right: usize,
    pub left_rule: String,
    pub right_rule: String,
    pub configuration: String,
    pub left_configuration: String,
    pub right_configuration: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct DiamondReport {
    pub depth: usize,
    pub cap: usize,
    pub pairs_checked: usize,
    pub violations: Vec<DiamondViolation>,
    pub stuck_nodes: Vec<usize>,
    pub step_failures: Vec<StepFailure>,
    pub aborted: Option<String>,
    pub stats: Stats,
}

impl DiamondReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.stuck_nodes.is_empty() && self.step_failures.is_empty() && self.aborted.is_none()
    }

    pub fn report(&self, program: &str) -> Report {
        let mut violations: Vec<Value> = self.violations.iter().map(|v| json!({"kind": "diamond", "detail": v})).collect();
        violations.extend(self.stuck_nodes.iter().map(|n| json!({"kind": "stuck", "node": n})));
        violations.extend(self.step_failures.iter().map(|f| json!({"kind": "step-failure", "detail": f})));
        violations.extend(self.aborted.iter().map(|a| json!({"kind": "explosion", "message": a})));
        Report {
            check: "confluence".into(),
            program: program.into(),
            parameters: json!({"depth": self.depth, "node_cap": self.cap, "semantics": "den"}),
            verdict: Verdict::of(self.passed()),
            violations,
            stats: self.stats.clone(),
        }
    }
}

/// Replays the discovery path of `id` from the initial configuration.
fn config_of<M: Machine>(g: &ReductionGraph, init: &M, id: usize) -> M {
    let mut path = Vec::new();
    let mut cur = id;
    while cur != 0 {
        let e = g.edges.iter().find(|e| e.to == cur && g.nodes[e.from].depth + 1 == g.nodes[cur].depth);
        let Some(e) = e else { break };
        path.push(e);
        cur = e.from;
    }
    let mut c = init.clone();
    for e in path.into_iter().rev() {
        let r = Redex { target_var: Name::from(e.target_var.as_str()), rule_id: e.rule };
        c = c.step(&r).map(|(n, _)| n).unwrap_or(c);
    }
    c
}

/// Checks the one-step diamond property on the denotational reduction graph
/// explored to `depth`, with the node cap from [`node_cap`].
pub fn check_diamond(program: &Program, depth: usize) -> DiamondReport {
    check_diamond_with(program, depth, node_cap())
}

pub fn check_diamond_with(program: &Program, depth: usize, cap: usize) -> DiamondReport {
    let start = Instant::now();
    let init = DenConfig::initial(program);
    let empty = |aborted: Option<String>| DiamondReport {
        depth,
        cap,
        pairs_checked: 0,
        violations: Vec::new(),
        stuck_nodes: Vec::new(),
        step_failures: Vec::new(),
        aborted,
        stats: Stats { runs: 0, wall_ms: elapsed_ms(start), ..Stats::default() },
    };
    let (g, frontier) = match reduction_graph_of(init.clone(), depth, cap) {
        Ok(r) => r,
        Err(e @ ExplosionAbort { .. }) => return empty(Some(e.to_string())),
    };
    let mut succ: Vec<Option<HashSet<u64>>> = vec![None; g.nodes.len()];
    for n in g.nodes.iter().filter(|n| n.expanded) {
        succ[n.id] = Some(HashSet::new());
    }
    for e in &g.edges {
        let k = g.nodes[e.to].key;
        succ[e.from].get_or_insert_with(HashSet::new).insert(k);
    }
    let mut step_failures = g.step_failures.clone();
    let frontier_succ = par_map(&frontier, |(id, c)| {
        let ex = expand(c);
        let mut keys = HashSet::new();
        let mut fails = Vec::new();
        for (r, res) in ex.succs {
            match res {
                Ok((_, k)) => {
                    keys.insert(k);
                }
                Err(e) => fails.push(StepFailure {
                    node: *id,
                    rule: r.rule_id,
                    target_var: r.target_var.to_string(),
                    error: e.to_string(),
                }),
            }
        }
        (*id, keys, fails)
    });
    for (id, keys, fails) in frontier_succ {
        succ[id] = Some(keys);
        step_failures.extend(fails);
    }
    let mut pairs_checked = 0;
    let mut violations = Vec::new();
    for n in g.nodes.iter().filter(|n| n.expanded) {
        let mut outs: Vec<(usize, String)> = Vec::new();
        for e in g.successors(n.id) {
            if !outs.iter().any(|(to, _)| *to == e.to) {
                outs.push((e.to, format!("{}@{}", e.rule, e.target_var)));
            }
        }
        for i in 0..outs.len() {
            for j in i + 1..outs.len() {
                pairs_checked += 1;
                let (a, b) = (&outs[i], &outs[j]);
                let (sa, sb) = (succ[a.0].as_ref(), succ[b.0].as_ref());
                let joinable = matches!((sa, sb), (Some(sa), Some(sb)) if !sa.is_disjoint(sb));
                if !joinable {
                    violations.push(DiamondViolation {
                        node: n.id,
                        left: a.0,
                        right: b.0,
                        left_rule: a.1.clone(),
                        right_rule: b.1.clone(),
                        configuration: config_of(&g, &init, n.id).to_string(),
                        left_configuration: config_of(&g, &init, a.0).to_string(),
                        right_configuration: config_of(&g, &init, b.0).to_string(),
                    });
                }
            }
        }
    }
    let stuck_nodes =
        g.nodes.iter().filter(|n| matches!(n.outcome, Some(Outcome::Stuck(_)))).map(|n| n.id).collect();
    DiamondReport {
        depth,
        cap,
        pairs_checked,
        violations,
        stuck_nodes,
        step_failures,
        aborted: None,
        stats: Stats { nodes: g.nodes.len(), edges: g.edges.len(), runs: 0, max_depth: g.max_depth, wall_ms: elapsed_ms(start) },
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidueCell {
    pub location: String,
    pub content: String,
    /// Index of the trace step that allocated the cell.
    pub alloc_step: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LeakResidue {
    pub seed: u64,
    pub cells: Vec<ResidueCell>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LeakReport {
    pub schedules: usize,
    pub budget: usize,
    pub normal_forms: usize,
    pub residues: Vec<LeakResidue>,
    pub outcomes: Vec<Outcome>,
    pub stats: Stats,
}

impl LeakReport {
    pub fn passed(&self) -> bool {
        self.residues.is_empty()
    }

    pub fn report(&self, program: &str) -> Report {
        Report {
            check: "leak".into(),
            program: program.into(),
            parameters: json!({"schedules": self.schedules, "budget": self.budget, "semantics": "mut"}),
            verdict: Verdict::of(self.passed()),
            violations: self.residues.iter().map(|r| json!({"kind": "residue", "detail": r})).collect(),
            stats: self.stats.clone(),
        }
    }
}

/// Runs the mutative semantics under `n_schedules` seeded schedules and
/// reports memory left over at normal forms.
pub fn check_leak_freedom(program: &Program, n_schedules: usize, budget: usize) -> LeakReport {
    let start = Instant::now();
    let seeds: Vec<u64> = (0..n_schedules as u64).collect();
    let runs = par_map(&seeds, |&seed| {
        let r = run_machine(MutConfig::initial(program), &Scheduler::SeededRandom(seed), budget, true);
        let residue = if r.outcome.is_terminating() && !r.last.mem.is_empty() {
            let cells = r
                .last
                .mem
                .iter()
                .map(|(l, x)| {
                    let key = l.to_string();
                    let alloc_step = r
                        .trace
                        .iter()
                        .find(|e| e.delta.mem_delta.get(&key).is_some_and(Option::is_some))
                        .map(|e| e.step_index);
                    ResidueCell { location: key, content: x.to_string(), alloc_step }
                })
                .collect();
            Some(LeakResidue { seed, cells })
        } else {
            None
        };
        (r.outcome, residue)
    });
    let normal_forms = runs.iter().filter(|(o, _)| o.is_terminating()).count();
    let (outcomes, residues): (Vec<Outcome>, Vec<Option<LeakResidue>>) = runs.into_iter().unzip();
    LeakReport {
        schedules: n_schedules,
        budget,
        normal_forms,
        residues: residues.into_iter().flatten().collect(),
        outcomes,
        stats: Stats { runs: n_schedules, wall_ms: elapsed_ms(start), ..Stats::default() },
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct UniquenessReport {
    pub schedules: usize,
    pub budget: usize,
    pub mut_outcomes: Vec<Outcome>,
    pub den_outcomes: Vec<Outcome>,
    pub values: BTreeSet<i64>,
    pub violations: Vec<String>,
    pub stats: Stats,
}

impl UniquenessReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn report(&self, program: &str) -> Report {
        Report {
            check: "uniq".into(),
            program: program.into(),
            parameters: json!({"schedules": self.schedules, "budget": self.budget, "semantics": ["mut", "den"]}),
            verdict: Verdict::of(self.passed()),
            violations: self.violations.iter().map(|v| json!({"kind": "behavior", "message": v})).collect(),
            stats: self.stats.clone(),
        }
    }
}

/// Runs both semantics under `n_schedules` seeded schedules each and
/// compares the integers returned.
pub fn check_behavior_uniqueness(program: &Program, n_schedules: usize, budget: usize) -> UniquenessReport {
    let start = Instant::now();
    let seeds: Vec<u64> = (0..n_schedules as u64).collect();
    let mut_outcomes =
        par_map(&seeds, |&s| run_machine(MutConfig::initial(program), &Scheduler::SeededRandom(s), budget, false).outcome);
    let den_outcomes =
        par_map(&seeds, |&s| run_machine(DenConfig::initial(program), &Scheduler::SeededRandom(s), budget, false).outcome);
    let all = || mut_outcomes.iter().chain(&den_outcomes);
    let values: BTreeSet<i64> = all()
        .filter_map(|o| match o {
            Outcome::ReturnedInt(n) => Some(*n),
            _ => None,
        })
        .collect();
    let mut violations = Vec::new();
    if values.len() > 1 {
        violations.push(format!("different integers returned: {values:?}"));
    }
    for (sem, outs) in [("mut", &mut_outcomes), ("den", &den_outcomes)] {
        for (seed, o) in outs.iter().enumerate() {
            if matches!(o, Outcome::Stuck(_) | Outcome::SeparationViolation(_)) {
                violations.push(format!("{sem} seed {seed}: {o}"));
            }
        }
    }
    let terminates = all().any(Outcome::is_terminating);
    let black_holes = all().filter(|o| matches!(o, Outcome::BlackHole(_))).count();
    if terminates && black_holes > 0 {
        violations.push(format!("{black_holes} runs black-hole while others terminate"));
    }
    UniquenessReport {
        schedules: n_schedules,
        budget,
        mut_outcomes,
        den_outcomes,
        values,
        violations,
        stats: Stats { runs: 2 * n_schedules, wall_ms: elapsed_ms(start), ..Stats::default() },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_program;

    #[test]
    fn independent_additions_are_confluent() {
        let r = check_diamond_with(&parse_program("(1 + 2) + (3 + 4)").unwrap(), 20, 1000);
        assert!(r.passed(), "{:?}", r.violations);
        assert!(r.pairs_checked > 0);
    }

    #[test]
    fn single_path_has_no_pairs() {
        let r = check_diamond_with(&parse_program("(\\x. x) 5").unwrap(), 20, 1000);
        assert_eq!(r.pairs_checked, 0);
        assert!(r.passed());
    }

    #[test]
    fn unsafe_allocation_leaks() {
        let p = parse_program("linearly (\\li. case withLinearly li of {(a, b) -> case consume (newRef a 5) of {() -> consume b}})").unwrap();
        let r = check_leak_freedom(&p, 5, 1000);
        assert_eq!(r.residues.len(), 5);
        assert!(r.residues.iter().all(|res| res.cells.len() == 1 && res.cells[0].alloc_step.is_some()));
    }

    #[test]
    fn constant_is_unique() {
        let r = check_behavior_uniqueness(&parse_program("42").unwrap(), 10, 100);
        assert!(r.passed());
        assert_eq!(r.values, BTreeSet::from([42]));
    }
}
