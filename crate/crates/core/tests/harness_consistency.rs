mod common;

use std::collections::BTreeSet;

use pbo_core::harness::{check_diamond_with, reduction_graph, run, Outcome, Scheduler, Semantics};
use pbo_core::syntax::{parse_program, Program};

fn load(name: &str) -> Program {
    let src = std::fs::read_to_string(common::corpus_dir().join(format!("{name}.pbo"))).unwrap();
    parse_program(&src).unwrap()
}

#[test]
fn sampled_outcomes_lie_in_the_explored_graph() {
    for name in ["reduce_example", "share_copy", "case_bor"] {
        let p = load(name);
        for sem in [Semantics::Mut, Semantics::Den] {
            let g = reduction_graph(&p, sem, 400).unwrap();
            assert!(g.nodes.iter().all(|n| n.expanded || n.outcome.is_some()), "{name} {sem} not fully explored");
            let exhaustive: BTreeSet<String> = g.terminal_outcomes().iter().map(|o| o.to_string()).collect();
            for seed in 0..20 {
                let (o, _) = run(&p, sem, &Scheduler::SeededRandom(seed), 10_000);
                assert!(exhaustive.contains(&o.to_string()), "{name} {sem} seed {seed}: {o} not in {exhaustive:?}");
            }
            assert_eq!(exhaustive.len(), 1, "{name} {sem}: {exhaustive:?}");
        }
    }
}

#[test]
fn schedules_are_reproducible() {
    let p = load("par_disjoint");
    for sem in [Semantics::Mut, Semantics::Den] {
        for sched in [Scheduler::SeededRandom(11), Scheduler::RoundRobin, Scheduler::LastRedex] {
            let a = run(&p, sem, &sched, 10_000);
            let b = run(&p, sem, &sched, 10_000);
            assert_eq!(a.0, b.0);
            assert_eq!(a.1, b.1);
        }
    }
}

#[test]
fn different_seeds_take_different_paths() {
    let p = load("par_disjoint");
    let traces: BTreeSet<String> = (0..10)
        .map(|s| serde_json::to_string(&run(&p, Semantics::Den, &Scheduler::SeededRandom(s), 10_000).1).unwrap())
        .collect();
    assert!(traces.len() > 1);
}

#[test]
fn scripted_schedule_replays_choices() {
    let p = load("reduce_example");
    let (o, _) = run(&p, Semantics::Mut, &Scheduler::Scripted(vec![0; 3]), 10_000);
    assert_eq!(o, Outcome::ReturnedInt(7));
}

#[test]
fn diamond_holds_on_the_whole_graph() {
    // exploration to the normal forms, well past the acceptance depth
    let r = check_diamond_with(&load("par_disjoint"), 400, 100_000);
    assert!(r.passed(), "{:?}", r.violations.first());
    assert!(r.stats.nodes > 500 && r.pairs_checked > 50, "{} nodes, {} pairs", r.stats.nodes, r.pairs_checked);
}
