use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// How a run picks among the redexes available at each step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "arg", rename_all = "kebab-case")]
pub enum Scheduler {
    SeededRandom(u64),
    FirstRedex,
    LastRedex,
    RoundRobin,
    /// Indices taken modulo the number of candidates; after the script
    /// runs out the first redex is taken.
    Scripted(Vec<usize>),
}

#[derive(Clone, Debug)]
pub struct SchedulerState {
    sched: Scheduler,
    rng: ChaCha8Rng,
    tick: usize,
}

impl Scheduler {
    pub fn start(&self) -> SchedulerState {
        let seed = match self {
            Scheduler::SeededRandom(s) => *s,
            _ => 0,
        };
        SchedulerState { sched: self.clone(), rng: ChaCha8Rng::seed_from_u64(seed), tick: 0 }
    }
}

impl SchedulerState {
    /// Index of the chosen candidate among `n > 0`.
    pub fn pick(&mut self, n: usize) -> usize {
        assert!(n > 0, "nothing to schedule");
        let tick = self.tick;
        self.tick += 1;
        match &self.sched {
            Scheduler::SeededRandom(_) => self.rng.gen_range(0..n),
            Scheduler::FirstRedex => 0,
            Scheduler::LastRedex => n - 1,
            Scheduler::RoundRobin => tick % n,
            Scheduler::Scripted(script) => script.get(tick).map_or(0, |i| i % n),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_choices() {
        let pick = |s: &Scheduler| {
            let mut st = s.start();
            (0..50).map(|i| st.pick(1 + i % 7)).collect::<Vec<_>>()
        };
        assert_eq!(pick(&Scheduler::SeededRandom(9)), pick(&Scheduler::SeededRandom(9)));
        assert_ne!(pick(&Scheduler::SeededRandom(9)), pick(&Scheduler::SeededRandom(10)));
    }

    #[test]
    fn fixed_strategies() {
        let mut st = Scheduler::RoundRobin.start();
        assert_eq!((0..5).map(|_| st.pick(3)).collect::<Vec<_>>(), [0, 1, 2, 0, 1]);
        let mut st = Scheduler::LastRedex.start();
        assert_eq!(st.pick(4), 3);
        let mut st = Scheduler::Scripted(vec![5, 1]).start();
        assert_eq!([st.pick(3), st.pick(3), st.pick(3)], [2, 1, 0]);
    }
}
