//! Schedulability of a fixed memoryless algorithm.
//!
//! Once the scheduler is fixed there is exactly one scheduler state per
//! node, so the search runs over plain backlog configurations.

use std::fmt;

use indexmap::IndexSet;

use crate::error::{Error, Result};
use crate::online::Strategy;
use crate::par::Parallelism;
use crate::task_model::{BacklogConfig, JobSequence, ReleaseVector, ScheduleStep, Scheduler, TaskSystem};
use crate::verdict::{ExplorationStats, Verdict};

/// A permutation of task indices, highest priority first (0-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriorityOrder(Vec<usize>);

impl PriorityOrder {
    pub fn new(order: Vec<usize>, tasks: usize) -> Result<Self> {
        let mut seen = vec![false; tasks];
        if order.len() != tasks {
            return Err(Error::InvalidOrder(format!(
                "{} entries for {tasks} tasks",
                order.len()
            )));
        }
        for &i in &order {
            if i >= tasks || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidOrder(format!("{order:?} is not a permutation of 0..{tasks}")));
            }
        }
        Ok(PriorityOrder(order))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

/// Built-in and loaded memoryless schedulers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Policy {
    /// Earliest deadline first; ties go to the lower task index.
    Edf,
    FixedPriority(PriorityOrder),
    Strategy(Strategy),
}

impl Policy {
    pub fn fixed_priority(order: Vec<usize>, tasks: usize) -> Result<Self> {
        Ok(Policy::FixedPriority(PriorityOrder::new(order, tasks)?))
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::Edf => write!(f, "EDF-lowindex"),
            Policy::FixedPriority(order) => {
                write!(f, "FP(")?;
                for (n, i) in order.0.iter().enumerate() {
                    if n > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}", i + 1)?;
                }
                write!(f, ")")
            }
            Policy::Strategy(s) => write!(f, "strategy[{} entries]", s.len()),
        }
    }
}

/// Up to `m` pending tasks with the smallest remaining deadline after the
/// releases in `k` are applied.
pub fn policy_edf(sys: &TaskSystem, b: &BacklogConfig, k: &ReleaseVector) -> Result<ScheduleStep> {
    let pending = sys.release(b, k)?;
    let mut ready: Vec<(u32, usize)> = pending
        .tasks()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.remaining > 0)
        .map(|(i, s)| (s.deadline, i))
        .collect();
    ready.sort_unstable();
    Ok(ScheduleStep::from_tasks(
        ready.into_iter().take(sys.processors()).map(|(_, i)| i),
    ))
}

/// Up to `m` pending tasks earliest in `order`.
pub fn policy_fixed_priority(
    order: &PriorityOrder,
    sys: &TaskSystem,
    b: &BacklogConfig,
    k: &ReleaseVector,
) -> Result<ScheduleStep> {
    if order.0.len() != sys.len() {
        return Err(Error::InvalidOrder(format!(
            "order covers {} tasks, system has {}",
            order.0.len(),
            sys.len()
        )));
    }
    let pending = sys.release(b, k)?;
    Ok(ScheduleStep::from_tasks(
        order
            .0
            .iter()
            .copied()
            .filter(|&i| pending.task(i).remaining > 0)
            .take(sys.processors()),
    ))
}

impl Scheduler for Policy {
    fn decide(&self, sys: &TaskSystem, config: &BacklogConfig, release: &ReleaseVector) -> Result<ScheduleStep> {
        match self {
            Policy::Edf => policy_edf(sys, config, release),
            Policy::FixedPriority(order) => policy_fixed_priority(order, sys, config, release),
            Policy::Strategy(s) => s.decide(sys, config, release),
        }
    }

    fn name(&self) -> String {
        self.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchedulabilityOptions {
    pub max_states: usize,
    pub parallelism: Parallelism,
}

impl Default for SchedulabilityOptions {
    fn default() -> Self {
        SchedulabilityOptions {
            max_states: crate::blindfold::DEFAULT_MAX_STATES,
            parallelism: Parallelism::Sequential,
        }
    }
}

pub fn is_schedulable(sys: &TaskSystem, alg: &dyn Scheduler) -> Result<Verdict> {
    is_schedulable_with(sys, alg, &SchedulabilityOptions::default())
}

type Expansion = Result<Vec<(ReleaseVector, BacklogConfig)>>;

/// Breadth-first search over the configurations reachable under `alg`.
/// Every adversary node has one scheduler-side successor per release: the
/// configuration after the releases, paired with `alg`'s decision.
pub fn is_schedulable_with(sys: &TaskSystem, alg: &dyn Scheduler, opts: &SchedulabilityOptions) -> Result<Verdict> {
    opts.parallelism.install(|| bfs(sys, alg, opts))
}

fn bfs(sys: &TaskSystem, alg: &dyn Scheduler, opts: &SchedulabilityOptions) -> Result<Verdict> {
    let mut seen: IndexSet<BacklogConfig> = IndexSet::new();
    let mut parent: Vec<Option<(usize, ReleaseVector)>> = vec![None];
    seen.insert(sys.zero_config());
    let mut frontier = vec![0usize];
    let mut scheduler_states = 0usize;
    let mut depth = 0;

    while !frontier.is_empty() {
        depth += 1;
        let expanded: Vec<Expansion> = opts.parallelism.map(&frontier, |&id| {
            let b = &seen[id];
            sys.legal_releases(b)
                .map(|k| {
                    let s = alg.decide(sys, b, &k)?;
                    sys.check_step(s)?;
                    let next = sys.step(b, &k, s)?;
                    Ok((k, next))
                })
                .collect()
        });
        let mut next = Vec::new();
        for (&id, succs) in frontier.iter().zip(expanded) {
            for (k, b) in succs? {
                scheduler_states += 1;
                if b.is_failure() {
                    let mut releases = vec![k];
                    let mut cur = id;
                    while let Some((p, rk)) = &parent[cur] {
                        releases.push(rk.clone());
                        cur = *p;
                    }
                    releases.reverse();
                    let failure_time = releases.len();
                    let stats = ExplorationStats {
                        adversary_states: seen.len(),
                        scheduler_states,
                        depth,
                    };
                    return Ok(Verdict::fails(
                        JobSequence::from_releases(sys.len(), releases),
                        failure_time,
                        stats,
                    ));
                }
                let (idx, fresh) = seen.insert_full(b);
                if fresh {
                    parent.push(Some((id, k)));
                    next.push(idx);
                }
                if seen.len() > opts.max_states {
                    return Err(Error::ResourceLimit {
                        what: "backlog configurations",
                        limit: opts.max_states as u64,
                    });
                }
            }
        }
        frontier = next;
    }
    Ok(Verdict::holds(ExplorationStats {
        adversary_states: seen.len(),
        scheduler_states,
        depth,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task_model::{simulate, Outcome, TaskState};

    fn rv(v: &[u32]) -> ReleaseVector {
        ReleaseVector::new(v.to_vec())
    }

    fn cfg(states: &[(u32, u32, u32)]) -> BacklogConfig {
        BacklogConfig::new(states.iter().map(|&(c, d, p)| TaskState::new(c, d, p)).collect())
    }

    #[test]
    fn edf_examples() {
        let sys = TaskSystem::from_triples(&[(1, 2, 2), (2, 2, 2)], 1).unwrap();
        let z = sys.zero_config();
        assert_eq!(policy_edf(&sys, &z, &rv(&[1, 2])).unwrap(), ScheduleStep::from_tasks([0]));
        let b = cfg(&[(1, 1, 1), (1, 2, 2)]);
        assert_eq!(policy_edf(&sys, &b, &rv(&[0, 0])).unwrap(), ScheduleStep::from_tasks([0]));
        assert_eq!(policy_edf(&sys, &z, &rv(&[0, 0])).unwrap(), ScheduleStep::EMPTY);
    }

    #[test]
    fn fixed_priority_examples() {
        let sys = TaskSystem::from_triples(&[(1, 2, 2), (2, 2, 2)], 1).unwrap();
        let z = sys.zero_config();
        let k = rv(&[1, 1]);
        let fp12 = PriorityOrder::new(vec![0, 1], 2).unwrap();
        let fp21 = PriorityOrder::new(vec![1, 0], 2).unwrap();
        assert_eq!(policy_fixed_priority(&fp12, &sys, &z, &k).unwrap(), ScheduleStep::from_tasks([0]));
        assert_eq!(policy_fixed_priority(&fp21, &sys, &z, &k).unwrap(), ScheduleStep::from_tasks([1]));
        assert_eq!(
            policy_fixed_priority(&fp12, &sys, &z, &rv(&[0, 0])).unwrap(),
            ScheduleStep::EMPTY
        );
        assert!(PriorityOrder::new(vec![0, 0], 2).is_err());
        assert!(PriorityOrder::new(vec![0], 2).is_err());
        assert!(PriorityOrder::new(vec![0, 2], 2).is_err());
    }

    #[test]
    fn schedulability_examples() {
        let two_task = TaskSystem::from_triples(&[(1, 2, 2), (2, 2, 2)], 1).unwrap();
        let v = is_schedulable(&two_task, &Policy::Edf).unwrap();
        assert!(!v.feasible);
        assert_eq!(v.witness, Some(JobSequence::from_releases(2, vec![rv(&[1, 2])])));

        let one = TaskSystem::from_triples(&[(1, 1, 1)], 1).unwrap();
        assert!(is_schedulable(&one, &Policy::Edf).unwrap().feasible);

        let two = TaskSystem::from_triples(&[(1, 1, 1), (1, 1, 1)], 2).unwrap();
        let fp = Policy::fixed_priority(vec![0, 1], 2).unwrap();
        assert!(is_schedulable(&two, &fp).unwrap().feasible);
    }

    #[test]
    fn witness_replays_to_failure() {
        let systems = [
            TaskSystem::from_triples(&[(1, 2, 2), (2, 2, 2)], 1).unwrap(),
            TaskSystem::from_triples(&[(2, 3, 3), (1, 1, 2), (1, 2, 4)], 1).unwrap(),
            TaskSystem::from_triples(&[(2, 2, 3), (1, 1, 2), (2, 3, 3)], 2).unwrap(),
        ];
        for sys in &systems {
            for pol in [Policy::Edf, Policy::fixed_priority((0..sys.len()).rev().collect(), sys.len()).unwrap()] {
                let v = is_schedulable(sys, &pol).unwrap();
                if let Some(w) = &v.witness {
                    let sim = simulate(sys, w, &pol, None).unwrap();
                    assert_eq!(sim.outcome, Outcome::Failure { time: v.failure_time.unwrap() }, "{sys} {pol}");
                }
            }
        }
    }

    #[test]
    fn parallel_matches_sequential() {
        let sys = TaskSystem::from_triples(&[(2, 3, 4), (1, 2, 3), (2, 4, 4)], 2).unwrap();
        let seq = is_schedulable(&sys, &Policy::Edf).unwrap();
        let par = is_schedulable_with(
            &sys,
            &Policy::Edf,
            &SchedulabilityOptions {
                parallelism: Parallelism::Threads(3),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(seq, par);
    }
}
