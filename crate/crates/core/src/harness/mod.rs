//! Schedulers, runs, reduction graphs and the metatheory checkers.

mod checks;
mod graph;
mod run;
mod scheduler;

pub use checks::{
    check_behavior_uniqueness, check_diamond, check_leak_freedom, DiamondReport, DiamondViolation, LeakReport,
    check_diamond_with, LeakResidue, Report, ResidueCell, Stats, UniquenessReport, Verdict,
};
pub use graph::{
    node_cap, reduction_graph, reduction_graph_of, ExplosionAbort, GraphEdge, GraphNode, ReductionGraph, StepFailure,
};
pub use run::{classify_final, run, run_machine, Outcome, RunResult, TraceEntry};
pub use scheduler::{Scheduler, SchedulerState};

use std::fmt;

use serde::Serialize;

use crate::canon::{canon_key_den, canon_key_mut};
use crate::runtime::{Env, Redex, StepError};
use crate::sem_den::{step_den_traced, DenConfig, DenDelta};
use crate::sem_mut::{step_mut_traced, MutConfig, MutDelta};
use crate::syntax::{Name, Program};

pub const DEFAULT_BUDGET: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Semantics {
    Mut,
    Den,
}

impl fmt::Display for Semantics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Semantics::Mut => "mut",
            Semantics::Den => "den",
        })
    }
}

/// What the harness needs from a semantics.
pub trait Machine: Clone + Send + Sync + fmt::Display {
    type Delta: Serialize + Clone + Send;
    const SEMANTICS: Semantics;

    fn initial(p: &Program) -> Self;
    fn redexes(&self) -> Vec<Redex>;
    fn step(&self, r: &Redex) -> Result<(Self, Self::Delta), StepError>;
    fn key(&self) -> u64;
    fn env(&self) -> &Env;
    fn root(&self) -> &Name;
}

impl Machine for MutConfig {
    type Delta = MutDelta;
    const SEMANTICS: Semantics = Semantics::Mut;

    fn initial(p: &Program) -> Self {
        MutConfig::from_program(p)
    }
    fn redexes(&self) -> Vec<Redex> {
        MutConfig::redexes(self)
    }
    fn step(&self, r: &Redex) -> Result<(Self, MutDelta), StepError> {
        step_mut_traced(self, r)
    }
    fn key(&self) -> u64 {
        canon_key_mut(self)
    }
    fn env(&self) -> &Env {
        &self.env
    }
    fn root(&self) -> &Name {
        &self.root
    }
}

impl Machine for DenConfig {
    type Delta = DenDelta;
    const SEMANTICS: Semantics = Semantics::Den;

    fn initial(p: &Program) -> Self {
        DenConfig::from_program(p)
    }
    fn redexes(&self) -> Vec<Redex> {
        DenConfig::redexes(self)
    }
    fn step(&self, r: &Redex) -> Result<(Self, DenDelta), StepError> {
        step_den_traced(self, r)
    }
    fn key(&self) -> u64 {
        canon_key_den(self)
    }
    fn env(&self) -> &Env {
        &self.env
    }
    fn root(&self) -> &Name {
        &self.root
    }
}
