//! Feasibility by knowledge-set determinization.
//!
//! The adversary releases jobs without seeing the scheduler, so a node of
//! the explored graph records the deadline/separation counters (which do not
//! depend on scheduling) together with the set `Q` of every remaining-work
//! vector that some non-failing schedule could have produced so far. The
//! task system is infeasible iff a node with `Q = {}` is reachable.

use std::collections::HashSet;
use std::fmt;

use indexmap::{IndexMap, IndexSet};

use crate::error::{Error, Result};
use crate::par::Parallelism;
use crate::task_model::{
    simulate_schedule, subsets_up_to, JobSequence, LegalReleases, Outcome, ReleaseVector, Schedule,
    ScheduleStep, TaskSystem,
};
use crate::verdict::{ExplorationStats, Verdict};

/// Default bound on stored knowledge states.
pub const DEFAULT_MAX_STATES: usize = 10_000_000;

/// Mixed-radix encoding of remaining-work vectors; task 1 is the most
/// significant digit, so numeric order on codes is lexicographic order on
/// vectors.
#[derive(Debug, Clone)]
pub(crate) struct Codec {
    radix: Vec<u64>,
    stride: Vec<u64>,
}

impl Codec {
    pub(crate) fn new(sys: &TaskSystem) -> Result<Self> {
        let n = sys.len();
        let radix: Vec<u64> = sys.tasks().iter().map(|t| t.wcet as u64 + 1).collect();
        let mut stride = vec![1u64; n];
        let mut acc: u64 = 1;
        for i in (0..n).rev() {
            stride[i] = acc;
            acc = acc.checked_mul(radix[i]).ok_or(Error::ResourceLimit {
                what: "compute-vector codes (product of C_i+1 exceeds 64 bits)",
                limit: u64::MAX,
            })?;
        }
        Ok(Codec { radix, stride })
    }

    pub(crate) fn digit(&self, code: u64, i: usize) -> u32 {
        (code / self.stride[i] % self.radix[i]) as u32
    }

    pub(crate) fn encode(&self, values: &[u32]) -> u64 {
        values.iter().zip(&self.stride).map(|(&v, &s)| v as u64 * s).sum()
    }

    pub(crate) fn decode(&self, code: u64) -> Vec<u32> {
        (0..self.radix.len()).map(|i| self.digit(code, i)).collect()
    }

    fn leq(&self, a: u64, b: u64) -> bool {
        (0..self.radix.len()).all(|i| self.digit(a, i) <= self.digit(b, i))
    }
}

/// Which player moves next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    /// The adversary chooses releases.
    Adversary,
    /// The (blind) scheduler side: every scheduling choice is applied.
    Scheduler,
}

/// A node of the knowledge graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KnowledgeState {
    side: Side,
    deadline: Box<[u32]>,
    separation: Box<[u32]>,
    /// Sorted, duplicate-free codes of possible remaining-work vectors.
    members: Vec<u64>,
}

impl KnowledgeState {
    pub fn side(&self) -> Side {
        self.side
    }

    pub fn deadlines(&self) -> &[u32] {
        &self.deadline
    }

    pub fn separations(&self) -> &[u32] {
        &self.separation
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// An adversary-side node whose knowledge set is empty.
    pub fn is_failure(&self) -> bool {
        self.side == Side::Adversary && self.members.is_empty()
    }

    /// The possible remaining-work vectors, in lexicographic order.
    pub fn compute_vectors(&self, sys: &TaskSystem) -> Vec<Vec<u32>> {
        let codec = Codec::new(sys).expect("state was built for this system");
        self.members.iter().map(|&c| codec.decode(c)).collect()
    }
}

impl fmt::Display for KnowledgeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = match self.side {
            Side::Adversary => "I",
            Side::Scheduler => "II",
        };
        write!(f, "[{side} d={:?} p={:?} |Q|={}]", self.deadline, self.separation, self.members.len())
    }
}

/// Successor generation for one task system.
#[derive(Debug, Clone)]
pub(crate) struct KnowledgeGraph<'a> {
    sys: &'a TaskSystem,
    codec: Codec,
    antichain: bool,
}

impl<'a> KnowledgeGraph<'a> {
    pub(crate) fn new(sys: &'a TaskSystem, antichain: bool) -> Result<Self> {
        Ok(KnowledgeGraph {
            sys,
            codec: Codec::new(sys)?,
            antichain,
        })
    }

    pub(crate) fn initial(&self) -> KnowledgeState {
        let n = self.sys.len();
        KnowledgeState {
            side: Side::Adversary,
            deadline: vec![0; n].into(),
            separation: vec![0; n].into(),
            members: vec![0],
        }
    }

    pub(crate) fn releases(&self, v: &KnowledgeState) -> LegalReleases {
        let caps = self
            .sys
            .tasks()
            .iter()
            .zip(v.separation.iter())
            .map(|(t, &p)| if p == 0 { t.wcet } else { 0 })
            .collect();
        LegalReleases::new(caps)
    }

    fn check_release(&self, v: &KnowledgeState, k: &ReleaseVector) -> Result<()> {
        if v.side != Side::Adversary {
            return Err(Error::Internal("release from a scheduler-side node".into()));
        }
        if k.len() != self.sys.len() {
            return Err(Error::InvalidSystem("release vector length does not match task count".into()));
        }
        for (i, (&ki, t)) in k.as_slice().iter().zip(self.sys.tasks()).enumerate() {
            if ki > t.wcet || (ki > 0 && v.separation[i] > 0) {
                return Err(Error::IllegalRelease {
                    task: i + 1,
                    time: 0,
                    reason: if ki > t.wcet {
                        format!("compute time {ki} exceeds C={}", t.wcet)
                    } else {
                        format!("{} slots of separation remain", v.separation[i])
                    },
                });
            }
        }
        Ok(())
    }

    pub(crate) fn release(&self, v: &KnowledgeState, k: &ReleaseVector) -> KnowledgeState {
        let mut deadline = v.deadline.clone();
        let mut separation = v.separation.clone();
        let mut set: u64 = 0;
        for (i, &ki) in k.as_slice().iter().enumerate() {
            if ki > 0 {
                let t = self.sys.task(i);
                deadline[i] = t.deadline;
                separation[i] = t.period;
                set += self.codec.stride[i] * ki as u64;
            }
        }
        let mut members: Vec<u64> = if k.is_zero() {
            v.members.clone()
        } else {
            v.members
                .iter()
                .map(|&c| {
                    let mut out = c;
                    for (i, &ki) in k.as_slice().iter().enumerate() {
                        if ki > 0 {
                            out -= self.codec.digit(c, i) as u64 * self.codec.stride[i];
                        }
                    }
                    out + set
                })
                .collect()
        };
        members.sort_unstable();
        members.dedup();
        if self.antichain {
            members = self.minimal(members);
        }
        KnowledgeState {
            side: Side::Scheduler,
            deadline,
            separation,
            members,
        }
    }

    pub(crate) fn tick(&self, v: &KnowledgeState) -> KnowledgeState {
        let n = self.sys.len();
        let m = self.sys.processors();
        let deadline: Box<[u32]> = v.deadline.iter().map(|d| d.saturating_sub(1)).collect();
        let separation: Box<[u32]> = v.separation.iter().map(|p| p.saturating_sub(1)).collect();
        let expiring: u64 = (0..n).filter(|&i| deadline[i] == 0).fold(0, |a, i| a | 1 << i);

        let mut out = Vec::new();
        'member: for &c in &v.members {
            let mut active = 0u64;
            let mut forced = 0u64;
            for i in 0..n {
                let ci = self.codec.digit(c, i);
                if ci > 0 {
                    active |= 1 << i;
                }
                if expiring >> i & 1 == 1 {
                    match ci {
                        0 => {}
                        1 => forced |= 1 << i,
                        _ => continue 'member,
                    }
                }
            }
            if forced.count_ones() as usize > m {
                continue;
            }
            let free = active & !forced;
            let room = m - forced.count_ones() as usize;
            let want = room.min(free.count_ones() as usize);
            for extra in subsets_up_to(free, room) {
                // Larger steps dominate smaller ones once sets are minimized.
                if self.antichain && extra.len() < want {
                    continue;
                }
                let s = extra.bits() | forced;
                let dec: u64 = (0..n).filter(|&i| s >> i & 1 == 1).map(|i| self.codec.stride[i]).sum();
                out.push(c - dec);
            }
        }
        out.sort_unstable();
        out.dedup();
        if self.antichain {
            out = self.minimal(out);
        }
        KnowledgeState {
            side: Side::Adversary,
            deadline,
            separation,
            members: out,
        }
    }

    /// Componentwise-minimal members of a sorted set.
    fn minimal(&self, sorted: Vec<u64>) -> Vec<u64> {
        let mut kept: Vec<u64> = Vec::with_capacity(sorted.len());
        for c in sorted {
            if !kept.iter().any(|&k| self.codec.leq(k, c)) {
                kept.push(c);
            }
        }
        kept
    }

    /// Release followed by tick.
    pub(crate) fn advance(&self, v: &KnowledgeState, k: &ReleaseVector) -> KnowledgeState {
        self.tick(&self.release(v, k))
    }
}

/// The initial node: all counters zero, `Q = {0}`.
pub fn initial_state(sys: &TaskSystem) -> Result<KnowledgeState> {
    Ok(KnowledgeGraph::new(sys, false)?.initial())
}

/// Successor of an adversary node under releases `k`.
pub fn release_successor(sys: &TaskSystem, v: &KnowledgeState, k: &ReleaseVector) -> Result<KnowledgeState> {
    let g = KnowledgeGraph::new(sys, false)?;
    g.check_release(v, k)?;
    Ok(g.release(v, k))
}

/// The unique successor of a scheduler node: every step of at most `m`
/// tasks is applied to every member, then members that miss an expiring
/// deadline are dropped.
pub fn tick_successor(sys: &TaskSystem, v: &KnowledgeState) -> Result<KnowledgeState> {
    if v.side != Side::Scheduler {
        return Err(Error::Internal("tick from an adversary-side node".into()));
    }
    Ok(KnowledgeGraph::new(sys, false)?.tick(v))
}

/// Builds a node directly; used to probe individual transitions.
pub fn knowledge_state(
    sys: &TaskSystem,
    side: Side,
    deadline: &[u32],
    separation: &[u32],
    members: &[Vec<u32>],
) -> Result<KnowledgeState> {
    let codec = Codec::new(sys)?;
    let n = sys.len();
    if deadline.len() != n || separation.len() != n || members.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidSystem("knowledge state dimensions do not match task count".into()));
    }
    for (i, t) in sys.tasks().iter().enumerate() {
        let over = deadline[i] > t.deadline
            || separation[i] > t.period
            || members.iter().any(|c| c[i] > t.wcet);
        if over {
            return Err(Error::InvalidTask {
                task: i + 1,
                message: "knowledge state component out of range".into(),
            });
        }
    }
    let mut codes: Vec<u64> = members.iter().map(|c| codec.encode(c)).collect();
    codes.sort_unstable();
    codes.dedup();
    Ok(KnowledgeState {
        side,
        deadline: deadline.into(),
        separation: separation.into(),
        members: codes,
    })
}

/// The adversary-side nodes visited by the walk of `seq`, for times
/// `0..=steps`.
pub fn knowledge_walk(sys: &TaskSystem, seq: &JobSequence, steps: usize) -> Result<Vec<KnowledgeState>> {
    sys.check_sequence(seq)?;
    let g = KnowledgeGraph::new(sys, false)?;
    let mut v = g.initial();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(v.clone());
    for t in 0..steps {
        v = g.advance(&v, &seq.at(t));
        out.push(v.clone());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeasibilityOptions {
    /// Keep only componentwise-minimal members of each knowledge set.
    pub antichain: bool,
    /// Abort once more than this many states are stored.
    pub max_states: usize,
    pub parallelism: Parallelism,
}

impl Default for FeasibilityOptions {
    fn default() -> Self {
        FeasibilityOptions {
            antichain: false,
            max_states: DEFAULT_MAX_STATES,
            parallelism: Parallelism::Sequential,
        }
    }
}

/// Breadth-first feasibility test with default options.
pub fn is_feasible(sys: &TaskSystem) -> Result<Verdict> {
    is_feasible_with(sys, &FeasibilityOptions::default())
}

type Expansion = Vec<(ReleaseVector, KnowledgeState, KnowledgeState)>;

/// Breadth-first search of the knowledge graph. Levels are expanded in
/// parallel when requested and merged in frontier order, so the verdict,
/// witness and statistics do not depend on the thread count.
pub fn is_feasible_with(sys: &TaskSystem, opts: &FeasibilityOptions) -> Result<Verdict> {
    let g = KnowledgeGraph::new(sys, opts.antichain)?;
    opts.parallelism.install(|| bfs(&g, opts))
}

fn bfs(g: &KnowledgeGraph<'_>, opts: &FeasibilityOptions) -> Result<Verdict> {
    let mut adversary: IndexSet<KnowledgeState> = IndexSet::new();
    let mut parent: Vec<Option<(usize, ReleaseVector)>> = vec![None];
    let mut scheduler: HashSet<KnowledgeState> = HashSet::new();
    adversary.insert(g.initial());
    let mut frontier = vec![0usize];
    let mut depth = 0;

    while !frontier.is_empty() {
        depth += 1;
        let expanded: Vec<Expansion> = opts.parallelism.map(&frontier, |&id| {
            let v = &adversary[id];
            g.releases(v)
                .map(|k| {
                    let w = g.release(v, &k);
                    let u = g.tick(&w);
                    (k, w, u)
                })
                .collect()
        });
        let mut next = Vec::new();
        for (&id, succs) in frontier.iter().zip(expanded) {
            for (k, w, u) in succs {
                scheduler.insert(w);
                if u.is_failure() {
                    let mut releases = vec![k];
                    let mut cur = id;
                    while let Some((p, rk)) = &parent[cur] {
                        releases.push(rk.clone());
                        cur = *p;
                    }
                    releases.reverse();
                    let failure_time = releases.len();
                    let stats = ExplorationStats {
                        adversary_states: adversary.len(),
                        scheduler_states: scheduler.len(),
                        depth,
                    };
                    let witness = JobSequence::from_releases(g.sys.len(), releases);
                    return Ok(Verdict::fails(witness, failure_time, stats));
                }
                let (idx, fresh) = adversary.insert_full(u);
                if fresh {
                    parent.push(Some((id, k)));
                    next.push(idx);
                }
                if adversary.len() + scheduler.len() > opts.max_states {
                    return Err(Error::ResourceLimit {
                        what: "knowledge states",
                        limit: opts.max_states as u64,
                    });
                }
            }
        }
        frontier = next;
    }
    Ok(Verdict::holds(ExplorationStats {
        adversary_states: adversary.len(),
        scheduler_states: scheduler.len(),
        depth,
    }))
}

/// Size of the whole reachable knowledge graph. Failure states are counted
/// but not expanded. Unlike [`is_feasible`] this does not stop at the first
/// failure.
pub fn reachable_knowledge_states(sys: &TaskSystem, max_states: usize) -> Result<ExplorationStats> {
    let g = KnowledgeGraph::new(sys, false)?;
    let mut adversary: HashSet<KnowledgeState> = HashSet::from([g.initial()]);
    let mut scheduler: HashSet<KnowledgeState> = HashSet::new();
    let mut frontier = vec![g.initial()];
    let mut depth = 0;
    while !frontier.is_empty() {
        depth += 1;
        let mut next = Vec::new();
        for v in &frontier {
            for k in g.releases(v) {
                let w = g.release(v, &k);
                let u = g.tick(&w);
                scheduler.insert(w);
                if adversary.insert(u.clone()) && !u.is_failure() {
                    next.push(u);
                }
                if adversary.len() + scheduler.len() > max_states {
                    return Err(Error::ResourceLimit {
                        what: "knowledge states",
                        limit: max_states as u64,
                    });
                }
            }
        }
        frontier = next;
    }
    Ok(ExplorationStats {
        adversary_states: adversary.len(),
        scheduler_states: scheduler.len(),
        depth,
    })
}

/// Result of [`reconstruct_schedule`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reconstruction {
    /// A schedule meeting every deadline of the sequence.
    Feasible(Schedule),
    /// No schedule survives past `time`.
    Infeasible { time: usize },
}

/// Finds a feasible schedule for one finite sequence, or proves there is
/// none. The forward pass records, for each possible remaining-work vector
/// at time `t+1`, one predecessor at time `t` and the step that produced
/// it; the backward pass follows those links from a survivor at the
/// horizon.
pub fn reconstruct_schedule(sys: &TaskSystem, seq: &JobSequence) -> Result<Reconstruction> {
    sys.check_sequence(seq)?;
    let g = KnowledgeGraph::new(sys, false)?;
    let codec = &g.codec;
    let n = sys.len();
    let m = sys.processors();
    let horizon = sys.default_horizon(seq);

    // layers[t]: code -> (index of predecessor in layers[t-1], step at t-1).
    let mut layers: Vec<IndexMap<u64, (usize, ScheduleStep)>> = Vec::with_capacity(horizon + 1);
    layers.push(IndexMap::from([(0u64, (0usize, ScheduleStep::EMPTY))]));
    let mut deadline = vec![0u32; n];
    for t in 0..horizon {
        let k = seq.at(t);
        for (i, &ki) in k.as_slice().iter().enumerate() {
            if ki > 0 {
                deadline[i] = sys.task(i).deadline;
            }
        }
        let next_deadline: Vec<u32> = deadline.iter().map(|d| d.saturating_sub(1)).collect();
        let mut next: IndexMap<u64, (usize, ScheduleStep)> = IndexMap::new();
        let mut members: Vec<(usize, u64)> = layers[t]
            .keys()
            .enumerate()
            .map(|(idx, &c)| {
                let mut vals = codec.decode(c);
                for (i, &ki) in k.as_slice().iter().enumerate() {
                    if ki > 0 {
                        vals[i] = ki;
                    }
                }
                (idx, codec.encode(&vals))
            })
            .collect();
        members.sort_by_key(|&(_, c)| c);
        for (idx, c) in members {
            let active = (0..n).filter(|&i| codec.digit(c, i) > 0).fold(0u64, |a, i| a | 1 << i);
            for s in subsets_up_to(active, m) {
                let after: Vec<u32> = (0..n)
                    .map(|i| codec.digit(c, i) - u32::from(s.contains(i)))
                    .collect();
                let valid = (0..n).all(|i| next_deadline[i] > 0 || after[i] == 0);
                if valid {
                    next.entry(codec.encode(&after)).or_insert((idx, s));
                }
            }
        }
        if next.is_empty() {
            return Ok(Reconstruction::Infeasible { time: t + 1 });
        }
        next.sort_keys();
        layers.push(next);
        deadline = next_deadline;
    }

    let mut steps = vec![ScheduleStep::EMPTY; horizon];
    let mut idx = 0;
    for t in (1..=horizon).rev() {
        let (pred, s) = layers[t][idx];
        steps[t - 1] = s;
        idx = pred;
    }
    let schedule = Schedule::new(steps);
    let check = simulate_schedule(sys, seq, &schedule, Some(horizon))?;
    if check.outcome != Outcome::Met {
        return Err(Error::Internal(format!(
            "reconstructed schedule fails replay: {:?}",
            check.outcome
        )));
    }
    Ok(Reconstruction::Feasible(schedule))
}
