//! Online feasibility as a perfect-information safety game.
//!
//! The adversary sees the backlog and picks releases; the scheduler then
//! picks a step. The adversary wins by reaching a failure configuration.
//! Its winning region is the attractor of the failure configurations, and
//! any scheduler move that stays outside the region is an optimal
//! memoryless algorithm.

use std::collections::{BTreeMap, VecDeque};

use indexmap::IndexSet;

use crate::error::{Error, Result};
use crate::par::Parallelism;
use crate::task_model::{subsets_up_to, BacklogConfig, ReleaseVector, ScheduleStep, Scheduler, TaskSystem};

/// A node of the game graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GamePosition {
    /// The adversary is to release jobs in this configuration.
    Adversary(BacklogConfig),
    /// The scheduler is to move; `config` already includes `release`.
    Scheduler {
        config: BacklogConfig,
        release: ReleaseVector,
    },
}

/// One scheduler-side successor per legal release, in release order.
pub fn adversary_moves(sys: &TaskSystem, config: &BacklogConfig) -> Vec<GamePosition> {
    sys.legal_releases(config)
        .map(|k| GamePosition::Scheduler {
            config: sys.release_unchecked(config, &k),
            release: k,
        })
        .collect()
}

/// Distinct successors of a scheduler node, each with the least step that
/// produces it. Steps only matter on pending tasks, so distinct subsets of
/// the pending tasks give distinct successors.
pub fn scheduler_moves(sys: &TaskSystem, pending: &BacklogConfig) -> Vec<(ScheduleStep, BacklogConfig)> {
    subsets_up_to(pending.pending(), sys.processors())
        .map(|s| (s, sys.tick(pending, s)))
        .collect()
}

/// How the attractor fixpoint is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AttractorMode {
    /// Backward propagation with per-node counters of surviving successors.
    #[default]
    Backward,
    /// Recompute `W_{i+1}` from `W_i` until nothing changes.
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OnlineOptions {
    pub max_states: usize,
    pub mode: AttractorMode,
    pub parallelism: Parallelism,
}

impl Default for OnlineOptions {
    fn default() -> Self {
        OnlineOptions {
            max_states: crate::blindfold::DEFAULT_MAX_STATES,
            mode: AttractorMode::Backward,
            parallelism: Parallelism::Sequential,
        }
    }
}

/// The part of the game graph reachable from the empty backlog. Scheduler
/// nodes are identified by their post-release configuration: nodes that
/// differ only in the release that led to them have the same successors.
#[derive(Debug, Clone)]
struct GameGraph {
    adversary: IndexSet<BacklogConfig>,
    scheduler: IndexSet<BacklogConfig>,
    adversary_succ: Vec<Vec<usize>>,
    scheduler_succ: Vec<Vec<(ScheduleStep, usize)>>,
}

impl GameGraph {
    fn explore(sys: &TaskSystem, opts: &OnlineOptions) -> Result<Self> {
        let mut g = GameGraph {
            adversary: IndexSet::new(),
            scheduler: IndexSet::new(),
            adversary_succ: Vec::new(),
            scheduler_succ: Vec::new(),
        };
        g.adversary.insert(sys.zero_config());
        g.adversary_succ.push(Vec::new());
        let mut frontier = vec![0usize];
        let limit = |g: &GameGraph| {
            if g.adversary.len() + g.scheduler.len() > opts.max_states {
                Err(Error::ResourceLimit {
                    what: "game positions",
                    limit: opts.max_states as u64,
                })
            } else {
                Ok(())
            }
        };
        while !frontier.is_empty() {
            // Adversary layer.
            let expanded: Vec<Vec<BacklogConfig>> = opts.parallelism.map(&frontier, |&id| {
                let b = &g.adversary[id];
                if b.is_failure() {
                    Vec::new()
                } else {
                    sys.legal_releases(b).map(|k| sys.release_unchecked(b, &k)).collect()
                }
            });
            let mut fresh_scheduler = Vec::new();
            for (&id, succs) in frontier.iter().zip(expanded) {
                let mut ids: Vec<usize> = Vec::with_capacity(succs.len());
                for w in succs {
                    let (idx, fresh) = g.scheduler.insert_full(w);
                    if fresh {
                        g.scheduler_succ.push(Vec::new());
                        fresh_scheduler.push(idx);
                    }
                    ids.push(idx);
                }
                ids.dedup();
                g.adversary_succ[id] = ids;
                limit(&g)?;
            }
            // Scheduler layer.
            let expanded: Vec<Vec<(ScheduleStep, BacklogConfig)>> =
                opts.parallelism.map(&fresh_scheduler, |&id| scheduler_moves(sys, &g.scheduler[id]));
            let mut next = Vec::new();
            for (&id, succs) in fresh_scheduler.iter().zip(expanded) {
                let mut out = Vec::with_capacity(succs.len());
                for (s, b) in succs {
                    let (idx, fresh) = g.adversary.insert_full(b);
                    if fresh {
                        g.adversary_succ.push(Vec::new());
                        next.push(idx);
                    }
                    out.push((s, idx));
                }
                g.scheduler_succ[id] = out;
                limit(&g)?;
            }
            frontier = next;
        }
        Ok(g)
    }
}

/// Positions from which the adversary forces a failure, restricted to the
/// positions reachable from the empty backlog.
#[derive(Debug, Clone)]
pub struct WinningRegion {
    graph: GameGraph,
    adversary_wins: Vec<bool>,
    scheduler_loses: Vec<bool>,
    iterations: usize,
}

impl WinningRegion {
    /// Whether the empty backlog is in the region, i.e. the system is not
    /// online feasible.
    pub fn contains_initial(&self) -> bool {
        self.adversary_wins[0]
    }

    pub fn contains(&self, pos: &GamePosition) -> bool {
        match pos {
            GamePosition::Adversary(b) => self.graph.adversary.get_index_of(b).is_some_and(|i| self.adversary_wins[i]),
            GamePosition::Scheduler { config, .. } => {
                self.graph.scheduler.get_index_of(config).is_some_and(|i| self.scheduler_loses[i])
            }
        }
    }

    /// Adversary-side members of the region, in discovery order.
    pub fn adversary_positions(&self) -> impl Iterator<Item = &BacklogConfig> {
        self.graph
            .adversary
            .iter()
            .zip(&self.adversary_wins)
            .filter(|(_, &w)| w)
            .map(|(b, _)| b)
    }

    /// Number of positions in the region (scheduler nodes counted once per
    /// post-release configuration).
    pub fn len(&self) -> usize {
        self.adversary_wins.iter().filter(|&&w| w).count() + self.scheduler_loses.iter().filter(|&&w| w).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Reachable positions: `(adversary, scheduler)`.
    pub fn reachable(&self) -> (usize, usize) {
        (self.graph.adversary.len(), self.graph.scheduler.len())
    }

    /// Rounds of the iterative computation, or propagation steps in
    /// backward mode.
    pub fn iterations(&self) -> usize {
        self.iterations
    }
}

pub fn attractor(sys: &TaskSystem) -> Result<WinningRegion> {
    attractor_with(sys, &OnlineOptions::default())
}

pub fn attractor_with(sys: &TaskSystem, opts: &OnlineOptions) -> Result<WinningRegion> {
    let graph = opts.parallelism.install(|| GameGraph::explore(sys, opts))?;
    let base: Vec<bool> = graph.adversary.iter().map(BacklogConfig::is_failure).collect();
    let (adversary_wins, scheduler_loses, iterations) = match opts.mode {
        AttractorMode::Backward => backward(&graph, base),
        AttractorMode::Iterative => iterative(&graph, base),
    };
    Ok(WinningRegion {
        graph,
        adversary_wins,
        scheduler_loses,
        iterations,
    })
}

fn backward(g: &GameGraph, mut a_win: Vec<bool>) -> (Vec<bool>, Vec<bool>, usize) {
    let mut a_pred: Vec<Vec<usize>> = vec![Vec::new(); g.adversary.len()];
    let mut s_pred: Vec<Vec<usize>> = vec![Vec::new(); g.scheduler.len()];
    for (x, succ) in g.adversary_succ.iter().enumerate() {
        for &y in succ {
            s_pred[y].push(x);
        }
    }
    for (y, succ) in g.scheduler_succ.iter().enumerate() {
        for &(_, x) in succ {
            a_pred[x].push(y);
        }
    }
    let mut remaining: Vec<usize> = g.scheduler_succ.iter().map(Vec::len).collect();
    let mut s_lose = vec![false; g.scheduler.len()];
    let mut queue: VecDeque<usize> = (0..a_win.len()).filter(|&x| a_win[x]).collect();
    let mut steps = 0;
    while let Some(x) = queue.pop_front() {
        steps += 1;
        for &y in &a_pred[x] {
            if s_lose[y] {
                continue;
            }
            remaining[y] -= 1;
            if remaining[y] == 0 {
                s_lose[y] = true;
                for &z in &s_pred[y] {
                    if !a_win[z] {
                        a_win[z] = true;
                        queue.push_back(z);
                    }
                }
            }
        }
    }
    (a_win, s_lose, steps)
}

fn iterative(g: &GameGraph, mut a_win: Vec<bool>) -> (Vec<bool>, Vec<bool>, usize) {
    let mut s_lose = vec![false; g.scheduler.len()];
    let mut rounds = 0;
    loop {
        rounds += 1;
        let next_a: Vec<bool> = g
            .adversary_succ
            .iter()
            .enumerate()
            .map(|(x, succ)| a_win[x] || succ.iter().any(|&y| s_lose[y]))
            .collect();
        let next_s: Vec<bool> = g
            .scheduler_succ
            .iter()
            .enumerate()
            .map(|(y, succ)| s_lose[y] || succ.iter().all(|&(_, x)| a_win[x]))
            .collect();
        if next_a == a_win && next_s == s_lose {
            return (a_win, s_lose, rounds);
        }
        a_win = next_a;
        s_lose = next_s;
    }
}

pub fn is_online_feasible(sys: &TaskSystem) -> Result<bool> {
    Ok(!attractor(sys)?.contains_initial())
}

pub fn is_online_feasible_with(sys: &TaskSystem, opts: &OnlineOptions) -> Result<bool> {
    Ok(!attractor_with(sys, opts)?.contains_initial())
}

/// A memoryless scheduler as an explicit decision table, keyed by the
/// backlog before releases and the releases of the current instant.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Strategy {
    table: BTreeMap<(BacklogConfig, ReleaseVector), ScheduleStep>,
}

impl Strategy {
    pub fn new() -> Self {
        Strategy::default()
    }

    pub fn insert(&mut self, config: BacklogConfig, release: ReleaseVector, step: ScheduleStep) {
        self.table.insert((config, release), step);
    }

    pub fn get(&self, config: &BacklogConfig, release: &ReleaseVector) -> Option<ScheduleStep> {
        // BTreeMap lookups need an owned key pair.
        self.table.get(&(config.clone(), release.clone())).copied()
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Entries in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (&BacklogConfig, &ReleaseVector, ScheduleStep)> {
        self.table.iter().map(|((b, k), &s)| (b, k, s))
    }
}

impl Scheduler for Strategy {
    fn decide(&self, _sys: &TaskSystem, config: &BacklogConfig, release: &ReleaseVector) -> Result<ScheduleStep> {
        self.get(config, release).ok_or_else(|| Error::StrategyIncomplete {
            config: config.to_string(),
            release: release.to_string(),
        })
    }

    fn name(&self) -> String {
        format!("strategy[{} entries]", self.len())
    }
}

pub fn synthesize_strategy(sys: &TaskSystem) -> Result<Strategy> {
    synthesize_strategy_with(sys, &OnlineOptions::default())
}

/// Picks, for every reachable scheduler node outside the winning region,
/// the least step whose successor is also outside it, and tabulates those
/// choices over the configurations reachable under the resulting play.
pub fn synthesize_strategy_with(sys: &TaskSystem, opts: &OnlineOptions) -> Result<Strategy> {
    let region = attractor_with(sys, opts)?;
    if region.contains_initial() {
        return Err(Error::NotOnlineFeasible);
    }
    let g = &region.graph;
    let choice: Vec<Option<ScheduleStep>> = g
        .scheduler_succ
        .iter()
        .enumerate()
        .map(|(y, succ)| {
            if region.scheduler_loses[y] {
                None
            } else {
                succ.iter().find(|&&(_, x)| !region.adversary_wins[x]).map(|&(s, _)| s)
            }
        })
        .collect();

    let mut strategy = Strategy::new();
    let mut seen: IndexSet<BacklogConfig> = IndexSet::new();
    seen.insert(sys.zero_config());
    let mut queue = VecDeque::from([0usize]);
    while let Some(id) = queue.pop_front() {
        let b = seen[id].clone();
        for k in sys.legal_releases(&b) {
            let w = sys.release_unchecked(&b, &k);
            let y = g
                .scheduler
                .get_index_of(&w)
                .ok_or_else(|| Error::Internal(format!("unexplored scheduler node {w}")))?;
            let s = choice[y].ok_or_else(|| Error::Internal(format!("no safe step at {w}")))?;
            let next = sys.tick(&w, s);
            strategy.insert(b.clone(), k, s);
            if seen.insert_full(next).1 {
                queue.push_back(seen.len() - 1);
            }
        }
    }
    Ok(strategy)
}
