use crate::task_model::JobSequence;

/// Counts of distinct states stored during an exploration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExplorationStats {
    /// Adversary-side (V1) states.
    pub adversary_states: usize,
    /// Scheduler-side (V2) states.
    pub scheduler_states: usize,
    /// Number of breadth-first levels expanded.
    pub depth: usize,
}

impl ExplorationStats {
    pub fn total(&self) -> usize {
        self.adversary_states + self.scheduler_states
    }
}

/// Answer of a feasibility or schedulability test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub feasible: bool,
    /// Present iff `feasible` is false.
    pub witness: Option<JobSequence>,
    /// Time of the first unavoidable failure for the witness.
    pub failure_time: Option<usize>,
    pub stats: ExplorationStats,
}

impl Verdict {
    pub(crate) fn holds(stats: ExplorationStats) -> Self {
        Verdict {
            feasible: true,
            witness: None,
            failure_time: None,
            stats,
        }
    }

    pub(crate) fn fails(witness: JobSequence, failure_time: usize, stats: ExplorationStats) -> Self {
        Verdict {
            feasible: false,
            witness: Some(witness),
            failure_time: Some(failure_time),
            stats,
        }
    }
}
