//! Low-memory reachability without a visited set.
//!
//! The search stores only paths. Round `k` walks depth-first from the start
//! and follows an arc into a node at depth `j` only if a nested path-only
//! search shows the node is not reachable in fewer than `j` steps. The walk
//! therefore stays on shortest paths. A reachable target at distance `k` is
//! found in round `k`. If round `k` finds no node at distance exactly `k`,
//! no node is farther away and the search ends. Distances are recomputed,
//! never remembered, in the manner of Savitch's midpoint recursion.
//!
//! Memory is `O(bound × state size)`. Time is exponential in the bound, so
//! this mode only suits very small systems.

use std::time::{Duration, Instant};

use crate::blindfold::{KnowledgeGraph, KnowledgeState};
use crate::error::{Error, Result};
use crate::task_model::{BacklogConfig, JobSequence, ReleaseVector, Scheduler, TaskSystem};
use crate::verdict::{ExplorationStats, Verdict};

/// An implicitly given graph with a target predicate.
pub trait ReachGraph {
    type Node: Clone + PartialEq;

    fn initial(&self) -> Result<Self::Node>;

    /// Outgoing arcs labelled by the release vector that produced them.
    fn successors(&self, x: &Self::Node) -> Result<Vec<(ReleaseVector, Self::Node)>>;

    fn is_target(&self, x: &Self::Node) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SavitchOptions {
    /// Upper bound on node expansions across all rounds.
    pub max_expansions: u64,
    pub time_limit: Option<Duration>,
}

impl Default for SavitchOptions {
    fn default() -> Self {
        SavitchOptions {
            max_expansions: 100_000_000,
            time_limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SavitchOutcome {
    /// Labels of a shortest path to a target, if one is reachable.
    pub path: Option<Vec<ReleaseVector>>,
    /// Final depth bound.
    pub bound: usize,
    pub expansions: u64,
    /// Most nodes held at once: the current path plus the path of the
    /// nested distance check. Nothing else is stored.
    pub peak_stored: usize,
}

/// Path-only search state. The only node storage is `path`.
struct PathSearch<'g, G: ReachGraph> {
    graph: &'g G,
    path: Vec<G::Node>,
    labels: Vec<ReleaseVector>,
    expansions: u64,
    peak_stored: usize,
    opts: SavitchOptions,
    started: Instant,
}

impl<G: ReachGraph> PathSearch<'_, G> {
    fn budget(&mut self) -> Result<()> {
        self.expansions += 1;
        if self.expansions > self.opts.max_expansions {
            return Err(Error::ResourceLimit {
                what: "search expansions",
                limit: self.opts.max_expansions,
            });
        }
        if let Some(limit) = self.opts.time_limit {
            if self.expansions.is_multiple_of(1024) && self.started.elapsed() > limit {
                return Err(Error::ResourceLimit {
                    what: "milliseconds of search time",
                    limit: limit.as_millis() as u64,
                });
            }
        }
        Ok(())
    }

    /// Whether `z` is reachable from the start within `limit` steps, by a
    /// nested path-only search. Its path is counted in `peak_stored`.
    fn within(&mut self, z: &G::Node, limit: usize) -> Result<bool> {
        let mut inner = vec![self.path[0].clone()];
        self.within_from(&mut inner, z, limit)
    }

    fn within_from(&mut self, inner: &mut Vec<G::Node>, z: &G::Node, limit: usize) -> Result<bool> {
        let x = inner.last().expect("inner path holds the start node").clone();
        if x == *z {
            return Ok(true);
        }
        if inner.len() > limit {
            return Ok(false);
        }
        self.budget()?;
        for (_, y) in self.graph.successors(&x)? {
            if self.graph.is_target(&y) || inner.contains(&y) {
                continue;
            }
            inner.push(y);
            self.peak_stored = self.peak_stored.max(self.path.len() + inner.len());
            let hit = self.within_from(inner, z, limit)?;
            inner.pop();
            if hit {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Depth-first walk along shortest paths only: a successor at depth `j`
    /// is followed only when it is not reachable in fewer than `j` steps.
    fn round(&mut self, bound: usize, reached_bound: &mut bool) -> Result<bool> {
        let depth = self.path.len() - 1;
        self.budget()?;
        let x = self.path.last().expect("path holds the start node").clone();
        for (label, y) in self.graph.successors(&x)? {
            if self.graph.is_target(&y) {
                self.labels.push(label);
                self.path.push(y);
                self.peak_stored = self.peak_stored.max(self.path.len());
                return Ok(true);
            }
            let next_depth = depth + 1;
            if next_depth == bound && *reached_bound {
                continue;
            }
            if self.path.contains(&y) || self.within(&y, depth)? {
                continue;
            }
            if next_depth == bound {
                *reached_bound = true;
                continue;
            }
            self.labels.push(label);
            self.path.push(y);
            self.peak_stored = self.peak_stored.max(self.path.len());
            if self.round(bound, reached_bound)? {
                return Ok(true);
            }
            self.path.pop();
            self.labels.pop();
        }
        Ok(false)
    }

    /// Deepens until a target turns up or no node lies at the current
    /// distance. Returns the final bound and whether a target was found.
    fn run(&mut self, max_bound: Option<usize>) -> Result<(usize, bool)> {
        let mut bound = 1;
        loop {
            let mut reached = false;
            if self.round(bound, &mut reached)? {
                return Ok((bound, true));
            }
            if !reached || max_bound.is_some_and(|m| bound >= m) {
                return Ok((bound, false));
            }
            bound += 1;
        }
    }
}

/// Whether a target is reachable from the initial node, with a shortest
/// path when it is.
pub fn search<G: ReachGraph>(graph: &G, opts: &SavitchOptions) -> Result<SavitchOutcome> {
    explore(graph, graph.initial()?, None, opts)
}

/// Whether a target is reachable from `x` in at most `k` steps, using
/// the path-only search.
pub fn reach_within<G: ReachGraph>(graph: &G, x: G::Node, k: usize, opts: &SavitchOptions) -> Result<bool> {
    if k == 0 {
        return Ok(graph.is_target(&x));
    }
    Ok(explore(graph, x, Some(k), opts)?.path.is_some())
}

fn explore<G: ReachGraph>(graph: &G, start: G::Node, max_bound: Option<usize>, opts: &SavitchOptions) -> Result<SavitchOutcome> {
    if graph.is_target(&start) {
        return Ok(SavitchOutcome {
            path: Some(Vec::new()),
            bound: 0,
            expansions: 0,
            peak_stored: 1,
        });
    }
    let mut s = PathSearch {
        graph,
        path: vec![start],
        labels: Vec::new(),
        expansions: 0,
        peak_stored: 1,
        opts: *opts,
        started: Instant::now(),
    };
    let (bound, found) = s.run(max_bound)?;
    Ok(SavitchOutcome {
        path: found.then_some(s.labels),
        bound,
        expansions: s.expansions,
        peak_stored: s.peak_stored,
    })
}

/// Adversary side of the knowledge graph. Each arc is a release followed by
/// the unique tick successor.
pub struct KnowledgeReach<'a> {
    graph: KnowledgeGraph<'a>,
}

impl<'a> KnowledgeReach<'a> {
    pub fn new(sys: &'a TaskSystem) -> Result<Self> {
        Ok(KnowledgeReach {
            graph: KnowledgeGraph::new(sys, false)?,
        })
    }
}

impl ReachGraph for KnowledgeReach<'_> {
    type Node = KnowledgeState;

    fn initial(&self) -> Result<KnowledgeState> {
        Ok(self.graph.initial())
    }

    fn successors(&self, x: &KnowledgeState) -> Result<Vec<(ReleaseVector, KnowledgeState)>> {
        Ok(self
            .graph
            .releases(x)
            .map(|k| {
                let y = self.graph.advance(x, &k);
                (k, y)
            })
            .collect())
    }

    fn is_target(&self, x: &KnowledgeState) -> bool {
        x.is_failure()
    }
}

/// Backlog configurations under a fixed scheduler.
pub struct PolicyReach<'a> {
    sys: &'a TaskSystem,
    alg: &'a dyn Scheduler,
}

impl<'a> PolicyReach<'a> {
    pub fn new(sys: &'a TaskSystem, alg: &'a dyn Scheduler) -> Self {
        PolicyReach { sys, alg }
    }
}

impl ReachGraph for PolicyReach<'_> {
    type Node = BacklogConfig;

    fn initial(&self) -> Result<BacklogConfig> {
        Ok(self.sys.zero_config())
    }

    fn successors(&self, b: &BacklogConfig) -> Result<Vec<(ReleaseVector, BacklogConfig)>> {
        self.sys
            .legal_releases(b)
            .map(|k| {
                let s = self.alg.decide(self.sys, b, &k)?;
                self.sys.check_step(s)?;
                let next = self.sys.step(b, &k, s)?;
                Ok((k, next))
            })
            .collect()
    }

    fn is_target(&self, b: &BacklogConfig) -> bool {
        b.is_failure()
    }
}

fn verdict(sys: &TaskSystem, out: SavitchOutcome) -> Verdict {
    let stats = ExplorationStats {
        adversary_states: out.expansions as usize,
        scheduler_states: 0,
        depth: out.bound,
    };
    match out.path {
        Some(labels) => {
            let failure_time = labels.len();
            Verdict::fails(JobSequence::from_releases(sys.len(), labels), failure_time, stats)
        }
        None => Verdict::holds(stats),
    }
}

pub fn savitch_feasible(sys: &TaskSystem) -> Result<bool> {
    Ok(savitch_feasible_with(sys, &SavitchOptions::default())?.feasible)
}

/// Feasibility by the path-only search over the knowledge graph.
pub fn savitch_feasible_with(sys: &TaskSystem, opts: &SavitchOptions) -> Result<Verdict> {
    let g = KnowledgeReach::new(sys)?;
    Ok(verdict(sys, search(&g, opts)?))
}

/// Schedulability by the path-only search over backlog configurations.
pub fn savitch_schedulable_with(sys: &TaskSystem, alg: &dyn Scheduler, opts: &SavitchOptions) -> Result<Verdict> {
    Ok(verdict(sys, search(&PolicyReach::new(sys, alg), opts)?))
}
