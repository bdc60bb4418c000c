use std::collections::HashMap;

use serde::Serialize;

use super::{classify_final, Machine, Outcome, Semantics};
use crate::runtime::{Redex, Rule, StepError};
use crate::sem_den::DenConfig;
use crate::sem_mut::MutConfig;
use crate::syntax::Program;

pub const DEFAULT_NODE_CAP: usize = 100_000;

/// The exploration cap, overridable through `PBO_NODE_CAP`.
pub fn node_cap() -> usize {
    std::env::var("PBO_NODE_CAP").ok().and_then(|s| s.trim().parse().ok()).unwrap_or(DEFAULT_NODE_CAP)
}

fn threads() -> usize {
    let env = std::env::var("PBO_THREADS").ok().and_then(|s| s.trim().parse().ok());
    env.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())).max(1)
}

/// Order-preserving map, split over worker threads for long inputs. Set
/// `PBO_THREADS=1` to run strictly sequentially.
pub(crate) fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let n = threads();
    if n == 1 || items.len() < 8 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(n);
    let f = &f;
    std::thread::scope(|s| {
        let handles: Vec<_> =
            items.chunks(chunk).map(|ch| s.spawn(move || ch.iter().map(f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("reduction graph exceeded the node cap of {cap} at depth {depth}")]
pub struct ExplosionAbort {
    pub cap: usize,
    pub depth: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct GraphNode {
    pub id: usize,
    #[serde(serialize_with = "hex_key")]
    pub key: u64,
    pub depth: usize,
    pub expanded: bool,
    /// Set when the node has no step other than a self-step.
    pub outcome: Option<Outcome>,
}

fn hex_key<S: serde::Serializer>(k: &u64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{k:016x}"))
}

#[derive(Clone, Debug, Serialize)]
pub struct GraphEdge {
    pub from: usize,
    pub to: usize,
    pub rule: Rule,
    pub target_var: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct StepFailure {
    pub node: usize,
    pub rule: Rule,
    pub target_var: String,
    pub error: String,
}

/// Configurations reachable within a number of steps, identified up to
/// renaming.
#[derive(Clone, Debug, Default, Serialize)]
pub struct ReductionGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    pub max_depth: usize,
    pub step_failures: Vec<StepFailure>,
}

impl ReductionGraph {
    pub fn successors(&self, id: usize) -> impl Iterator<Item = &GraphEdge> {
        self.edges.iter().filter(move |e| e.from == id)
    }

    /// Outcomes of the explored nodes without a proper step.
    pub fn terminal_outcomes(&self) -> Vec<&Outcome> {
        self.nodes.iter().filter_map(|n| n.outcome.as_ref()).collect()
    }
}

pub(crate) struct Expansion<M> {
    pub redexes: Vec<Redex>,
    pub succs: Vec<(Redex, Result<(M, u64), StepError>)>,
}

pub(crate) fn expand<M: Machine>(c: &M) -> Expansion<M> {
    let redexes = c.redexes();
    let succs = redexes.iter().map(|r| (r.clone(), c.step(r).map(|(n, _)| {
        let k = n.key();
        (n, k)
    }))).collect();
    Expansion { redexes, succs }
}

/// Breadth-first exploration to `depth` steps. Returns the graph and the
/// configurations of the unexpanded nodes at the last depth.
pub fn reduction_graph_of<M: Machine>(
    init: M,
    depth: usize,
    cap: usize,
) -> Result<(ReductionGraph, Vec<(usize, M)>), ExplosionAbort> {
    let mut g = ReductionGraph::default();
    let mut index: HashMap<u64, usize> = HashMap::new();
    let k0 = init.key();
    index.insert(k0, 0);
    g.nodes.push(GraphNode { id: 0, key: k0, depth: 0, expanded: false, outcome: None });
    let mut level = vec![(0usize, init)];
    for d in 0..depth {
        if level.is_empty() {
            break;
        }
        let results = par_map(&level, |(_, c)| expand(c));
        let mut next = Vec::new();
        for ((id, c), ex) in level.iter().zip(results) {
            g.nodes[*id].expanded = true;
            g.nodes[*id].outcome = classify_final(c, &ex.redexes);
            for (r, res) in ex.succs {
                match res {
                    Ok((c2, k2)) => {
                        let to = match index.get(&k2) {
                            Some(&i) => i,
                            None => {
                                let i = g.nodes.len();
                                if i >= cap {
                                    return Err(ExplosionAbort { cap, depth: d + 1 });
                                }
                                index.insert(k2, i);
                                g.nodes.push(GraphNode { id: i, key: k2, depth: d + 1, expanded: false, outcome: None });
                                g.max_depth = d + 1;
                                next.push((i, c2));
                                i
                            }
                        };
                        g.edges.push(GraphEdge { from: *id, to, rule: r.rule_id, target_var: r.target_var.to_string() });
                    }
                    Err(e) => g.step_failures.push(StepFailure {
                        node: *id,
                        rule: r.rule_id,
                        target_var: r.target_var.to_string(),
                        error: e.to_string(),
                    }),
                }
            }
        }
        level = next;
    }
    for (id, c) in &level {
        g.nodes[*id].outcome = classify_final(c, &c.redexes());
    }
    Ok((g, level))
}

pub fn reduction_graph(program: &Program, sem: Semantics, depth: usize) -> Result<ReductionGraph, ExplosionAbort> {
    let cap = node_cap();
    match sem {
        Semantics::Mut => reduction_graph_of(MutConfig::initial(program), depth, cap).map(|(g, _)| g),
        Semantics::Den => reduction_graph_of(DenConfig::initial(program), depth, cap).map(|(g, _)| g),
    }
}
