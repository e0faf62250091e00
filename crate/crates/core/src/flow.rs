//! Finite job sets, continuous schedules, and integral rounding by max-flow.
//!
//! The network has a source `a`, one node `x_t` per slot, one node `q_j`
//! per job and a sink `z`. Arcs `a -> x_t` carry `m`, arcs `x_t -> q_j`
//! carry 1 for `r_j <= t < d_j`, and arcs `q_j -> z` carry `c_j`. A job
//! set is schedulable iff the maximum flow saturates every `q_j -> z` arc,
//! and an integral maximum flow is a discrete schedule.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use num_rational::Rational64;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::task_model::{JobSequence, TaskSystem};

/// A job with release slot `r`, compute time `c` and absolute deadline `d`;
/// it may run in slots `r..d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Job {
    pub release: usize,
    pub compute: u32,
    pub deadline: usize,
}

impl Job {
    pub const fn new(release: usize, compute: u32, deadline: usize) -> Self {
        Job {
            release,
            compute,
            deadline,
        }
    }

    pub fn window(&self) -> std::ops::Range<usize> {
        self.release..self.deadline
    }
}

impl fmt::Display for Job {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(r={}, c={}, d={})", self.release, self.compute, self.deadline)
    }
}

pub fn validate_jobs(jobs: &[Job]) -> Result<()> {
    for (index, j) in jobs.iter().enumerate() {
        if j.compute == 0 {
            return Err(Error::InvalidJob {
                index: index + 1,
                message: "compute time must be positive".into(),
            });
        }
        if j.deadline <= j.release {
            return Err(Error::InvalidJob {
                index: index + 1,
                message: format!("deadline {} is not after release {}", j.deadline, j.release),
            });
        }
    }
    Ok(())
}

/// Jobs generated by a job sequence: a release of `k` units of task `i` at
/// `t` becomes `(t, k, t + D_i)`.
pub fn jobs_of(sys: &TaskSystem, seq: &JobSequence) -> Vec<Job> {
    seq.jobs()
        .map(|(t, i, c)| Job::new(t, c, t + sys.task(i).deadline as usize))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowArc {
    pub from: usize,
    pub to: usize,
    pub capacity: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowNetwork {
    slots: usize,
    jobs: usize,
    arcs: Vec<FlowArc>,
    demand: i64,
}

impl FlowNetwork {
    pub fn source(&self) -> usize {
        0
    }

    /// Node of slot `t`, for `t` in `0..=max d_j`.
    pub fn slot_node(&self, t: usize) -> usize {
        1 + t
    }

    pub fn job_node(&self, j: usize) -> usize {
        1 + self.slots + j
    }

    pub fn sink(&self) -> usize {
        1 + self.slots + self.jobs
    }

    pub fn node_count(&self) -> usize {
        self.sink() + 1
    }

    /// Number of slot nodes (`max d_j + 1`).
    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn arcs(&self) -> &[FlowArc] {
        &self.arcs
    }

    /// `K`, the sum of the job-to-sink capacities.
    pub fn total_demand(&self) -> i64 {
        self.demand
    }
}

/// Builds the network. Arcs are listed source arcs first (by slot), then
/// window arcs (by slot, then job), then sink arcs (by job).
pub fn build_network(jobs: &[Job], processors: usize) -> FlowNetwork {
    let horizon = jobs.iter().map(|j| j.deadline).max().unwrap_or(0);
    let slots = horizon + 1;
    let mut net = FlowNetwork {
        slots,
        jobs: jobs.len(),
        arcs: Vec::new(),
        demand: jobs.iter().map(|j| j.compute as i64).sum(),
    };
    for t in 0..slots {
        net.arcs.push(FlowArc {
            from: net.source(),
            to: net.slot_node(t),
            capacity: processors as i64,
        });
    }
    for t in 0..slots {
        for (j, job) in jobs.iter().enumerate() {
            if job.window().contains(&t) {
                net.arcs.push(FlowArc {
                    from: net.slot_node(t),
                    to: net.job_node(j),
                    capacity: 1,
                });
            }
        }
    }
    for (j, job) in jobs.iter().enumerate() {
        net.arcs.push(FlowArc {
            from: net.job_node(j),
            to: net.sink(),
            capacity: job.compute as i64,
        });
    }
    net
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaxFlow {
    pub value: i64,
    /// Flow on each arc of [`FlowNetwork::arcs`], in the same order.
    pub flow: Vec<i64>,
}

struct Edge {
    to: usize,
    cap: i64,
    rev: usize,
}

/// Dinic's blocking-flow algorithm on integer capacities.
struct Dinic {
    graph: Vec<Vec<Edge>>,
    level: Vec<i32>,
    iter: Vec<usize>,
}

impl Dinic {
    fn new(n: usize) -> Self {
        Dinic {
            graph: (0..n).map(|_| Vec::new()).collect(),
            level: vec![-1; n],
            iter: vec![0; n],
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: i64) -> (usize, usize) {
        let fwd = self.graph[from].len();
        let back = self.graph[to].len() + usize::from(from == to);
        self.graph[from].push(Edge { to, cap, rev: back });
        self.graph[to].push(Edge { to: from, cap: 0, rev: fwd });
        (from, fwd)
    }

    fn bfs(&mut self, s: usize) {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for e in &self.graph[v] {
                if e.cap > 0 && self.level[e.to] < 0 {
                    self.level[e.to] = self.level[v] + 1;
                    queue.push_back(e.to);
                }
            }
        }
    }

    fn dfs(&mut self, v: usize, t: usize, limit: i64) -> i64 {
        if v == t {
            return limit;
        }
        while self.iter[v] < self.graph[v].len() {
            let i = self.iter[v];
            let (to, cap) = (self.graph[v][i].to, self.graph[v][i].cap);
            if cap > 0 && self.level[v] < self.level[to] {
                let d = self.dfs(to, t, limit.min(cap));
                if d > 0 {
                    self.graph[v][i].cap -= d;
                    let rev = self.graph[v][i].rev;
                    self.graph[to][rev].cap += d;
                    return d;
                }
            }
            self.iter[v] += 1;
        }
        0
    }

    fn run(&mut self, s: usize, t: usize) -> i64 {
        let mut total = 0;
        loop {
            self.bfs(s);
            if self.level[t] < 0 {
                return total;
            }
            self.iter.iter_mut().for_each(|i| *i = 0);
            loop {
                let f = self.dfs(s, t, i64::MAX);
                if f == 0 {
                    break;
                }
                total += f;
            }
        }
    }
}

/// Integral maximum flow from the source to the sink.
pub fn max_flow(net: &FlowNetwork) -> MaxFlow {
    let mut dinic = Dinic::new(net.node_count());
    let handles: Vec<(usize, usize)> = net
        .arcs
        .iter()
        .map(|a| dinic.add_edge(a.from, a.to, a.capacity))
        .collect();
    let value = dinic.run(net.source(), net.sink());
    let flow = net
        .arcs
        .iter()
        .zip(handles)
        .map(|(a, (v, i))| a.capacity - dinic.graph[v][i].cap)
        .collect();
    MaxFlow { value, flow }
}

/// Whether the jobs admit a discrete schedule on `processors` machines.
pub fn has_feasible_schedule(jobs: &[Job], processors: usize) -> Result<bool> {
    validate_jobs(jobs)?;
    let net = build_network(jobs, processors);
    Ok(max_flow(&net).value == net.total_demand())
}

/// Amount of processing `w(j, t)` given to job `j` during slot `t`; absent
/// entries are zero.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ContinuousSchedule {
    entries: BTreeMap<(usize, usize), Rational64>,
}

impl ContinuousSchedule {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets `w(job, slot)`; zero removes the entry.
    pub fn set(&mut self, job: usize, slot: usize, amount: Rational64) {
        if amount.is_zero() {
            self.entries.remove(&(job, slot));
        } else {
            self.entries.insert((job, slot), amount);
        }
    }

    pub fn get(&self, job: usize, slot: usize) -> Rational64 {
        self.entries.get(&(job, slot)).copied().unwrap_or_else(Rational64::zero)
    }

    /// Nonzero entries as `((job, slot), amount)` in job-then-slot order.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), Rational64)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    pub fn is_integral(&self) -> bool {
        self.entries.values().all(|v| v.is_integer())
    }

    fn job_total(&self, job: usize, window: std::ops::Range<usize>) -> Rational64 {
        self.entries
            .range((job, window.start)..(job, window.end))
            .map(|(_, &v)| v)
            .fold(Rational64::zero(), |a, b| a + b)
    }
}

/// First problem found in a continuous schedule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    UnknownJob { job: usize },
    /// An entry outside `0 <= w(j,t) <= 1`.
    EntryOutOfRange { job: usize, slot: usize, value: Rational64 },
    /// Nonzero processing outside `r_j..d_j`.
    OutsideWindow { job: usize, slot: usize },
    /// More than `m` units of processing in one slot.
    SlotOverload { slot: usize, total: Rational64 },
    /// Fewer than `c_j` units within the job's window.
    Underserved { job: usize, total: Rational64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownJob { job } => write!(f, "entry refers to unknown job {}", job + 1),
            Violation::EntryOutOfRange { job, slot, value } => {
                write!(f, "w(job {}, slot {slot}) = {value} is outside [0,1]", job + 1)
            }
            Violation::OutsideWindow { job, slot } => {
                write!(f, "job {} is processed in slot {slot} outside its window", job + 1)
            }
            Violation::SlotOverload { slot, total } => {
                write!(f, "slot {slot} carries {total} units of processing")
            }
            Violation::Underserved { job, total } => {
                write!(f, "job {} receives only {total} units", job + 1)
            }
        }
    }
}

/// Checks the per-entry bound, window containment, per-slot capacity and
/// per-job demand, in that order.
pub fn validate_continuous(w: &ContinuousSchedule, jobs: &[Job], processors: usize) -> Result<(), Violation> {
    let one = Rational64::one();
    let mut per_slot: BTreeMap<usize, Rational64> = BTreeMap::new();
    for ((job, slot), value) in w.iter() {
        let Some(j) = jobs.get(job) else {
            return Err(Violation::UnknownJob { job });
        };
        if value < Rational64::zero() || value > one {
            return Err(Violation::EntryOutOfRange { job, slot, value });
        }
        if !j.window().contains(&slot) {
            return Err(Violation::OutsideWindow { job, slot });
        }
        *per_slot.entry(slot).or_insert_with(Rational64::zero) += value;
    }
    let cap = Rational64::from_integer(processors as i64);
    if let Some((&slot, &total)) = per_slot.iter().find(|(_, &t)| t > cap) {
        return Err(Violation::SlotOverload { slot, total });
    }
    for (job, j) in jobs.iter().enumerate() {
        let total = w.job_total(job, j.window());
        if total < Rational64::from_integer(j.compute as i64) {
            return Err(Violation::Underserved { job, total });
        }
    }
    Ok(())
}

/// Reduces each job's processing, latest slots first, to exactly `c_j`
/// units. Capacities only shrink, so a valid schedule stays valid.
pub fn trim_excess(w: &ContinuousSchedule, jobs: &[Job]) -> ContinuousSchedule {
    let mut out = w.clone();
    for (job, j) in jobs.iter().enumerate() {
        let mut excess = w.job_total(job, j.window()) - Rational64::from_integer(j.compute as i64);
        for slot in j.window().rev() {
            if excess <= Rational64::zero() {
                break;
            }
            let cur = out.get(job, slot);
            let cut = if cur < excess { cur } else { excess };
            out.set(job, slot, cur - cut);
            excess -= cut;
        }
    }
    out
}

/// Jobs run in each slot; a discrete schedule for a job set.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct JobSchedule {
    slots: Vec<Vec<usize>>,
}

impl JobSchedule {
    pub fn new(slots: Vec<Vec<usize>>) -> Self {
        JobSchedule { slots }
    }

    /// Job indices run in slot `t`, ascending.
    pub fn slot(&self, t: usize) -> &[usize] {
        self.slots.get(t).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn slots(&self) -> &[Vec<usize>] {
        &self.slots
    }

    pub fn to_continuous(&self) -> ContinuousSchedule {
        let mut w = ContinuousSchedule::new();
        for (t, jobs) in self.slots.iter().enumerate() {
            for &j in jobs {
                w.set(j, t, Rational64::one());
            }
        }
        w
    }

    /// Valid as a continuous schedule and every job gets exactly `c_j`.
    pub fn validate(&self, jobs: &[Job], processors: usize) -> Result<(), Violation> {
        for (t, run) in self.slots.iter().enumerate() {
            if run.windows(2).any(|p| p[0] >= p[1]) {
                let job = run.windows(2).find(|p| p[0] >= p[1]).map(|p| p[1]).unwrap_or(0);
                return Err(Violation::EntryOutOfRange {
                    job,
                    slot: t,
                    value: Rational64::from_integer(2),
                });
            }
        }
        let w = self.to_continuous();
        validate_continuous(&w, jobs, processors)?;
        for (job, j) in jobs.iter().enumerate() {
            let total = w.job_total(job, j.window());
            if total != Rational64::from_integer(j.compute as i64) {
                return Err(Violation::Underserved { job, total });
            }
        }
        Ok(())
    }
}

/// Converts a feasible continuous schedule into a discrete one. Integral
/// input is trimmed to exact demands and returned as is; otherwise the
/// integral maximum flow of the job network supplies the slots.
pub fn continuous_to_discrete(jobs: &[Job], processors: usize, w: &ContinuousSchedule) -> Result<JobSchedule> {
    validate_jobs(jobs)?;
    validate_continuous(w, jobs, processors).map_err(Error::Continuous)?;
    let horizon = jobs.iter().map(|j| j.deadline).max().unwrap_or(0);
    let mut slots = vec![Vec::new(); horizon];

    if w.is_integral() {
        for ((job, slot), _) in trim_excess(w, jobs).iter() {
            slots[slot].push(job);
        }
        slots.iter_mut().for_each(|s| s.sort_unstable());
        return Ok(JobSchedule { slots });
    }

    let net = build_network(jobs, processors);
    let flow = max_flow(&net);
    if flow.value != net.total_demand() {
        return Err(Error::Internal(format!(
            "valid continuous schedule but integral flow {} < {}",
            flow.value,
            net.total_demand()
        )));
    }
    for (arc, &f) in net.arcs().iter().zip(&flow.flow) {
        let is_window_arc = arc.from != net.source() && arc.to != net.sink();
        if is_window_arc && f == 1 {
            slots[arc.from - 1].push(arc.to - net.job_node(0));
        }
    }
    slots.iter_mut().for_each(|s| s.sort_unstable());
    Ok(JobSchedule { slots })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    #[test]
    fn network_shape() {
        let jobs = [Job::new(0, 1, 2), Job::new(0, 2, 2)];
        let net = build_network(&jobs, 1);
        assert_eq!(net.total_demand(), 3);
        let a = net.source();
        let expected = vec![
            FlowArc { from: a, to: net.slot_node(0), capacity: 1 },
            FlowArc { from: a, to: net.slot_node(1), capacity: 1 },
            FlowArc { from: a, to: net.slot_node(2), capacity: 1 },
            FlowArc { from: net.slot_node(0), to: net.job_node(0), capacity: 1 },
            FlowArc { from: net.slot_node(0), to: net.job_node(1), capacity: 1 },
            FlowArc { from: net.slot_node(1), to: net.job_node(0), capacity: 1 },
            FlowArc { from: net.slot_node(1), to: net.job_node(1), capacity: 1 },
            FlowArc { from: net.job_node(0), to: net.sink(), capacity: 1 },
            FlowArc { from: net.job_node(1), to: net.sink(), capacity: 2 },
        ];
        assert_eq!(net.arcs(), expected.as_slice());

        let empty = build_network(&[], 2);
        assert_eq!(empty.total_demand(), 0);
        assert_eq!(max_flow(&empty).value, 0);

        let late = build_network(&[Job::new(1, 1, 2)], 1);
        let windows: Vec<_> = late
            .arcs()
            .iter()
            .filter(|a| a.from != late.source() && a.to != late.sink())
            .collect();
        assert_eq!(windows, vec![&FlowArc { from: late.slot_node(1), to: late.job_node(0), capacity: 1 }]);
        assert_eq!(late.total_demand(), 1);
    }

    #[test]
    fn max_flow_values() {
        let net = build_network(&[Job::new(0, 1, 2), Job::new(0, 2, 2)], 1);
        let f = max_flow(&net);
        assert_eq!(f.value, 2);
        let net = build_network(&[Job::new(0, 2, 2), Job::new(0, 2, 2)], 2);
        assert_eq!(max_flow(&net).value, 4);
    }

    #[test]
    fn flow_is_conserved_and_capacitated() {
        let jobs = [Job::new(0, 2, 3), Job::new(1, 1, 2), Job::new(0, 3, 4), Job::new(2, 2, 4)];
        let net = build_network(&jobs, 2);
        let f = max_flow(&net);
        let mut balance = vec![0i64; net.node_count()];
        for (a, &x) in net.arcs().iter().zip(&f.flow) {
            assert!((0..=a.capacity).contains(&x));
            balance[a.from] -= x;
            balance[a.to] += x;
        }
        for (v, &b) in balance.iter().enumerate() {
            if v != net.source() && v != net.sink() {
                assert_eq!(b, 0);
            }
        }
        assert_eq!(balance[net.sink()], f.value);
    }

    #[test]
    fn feasibility_examples() {
        assert!(!has_feasible_schedule(&[Job::new(0, 1, 2), Job::new(0, 2, 2)], 1).unwrap());
        assert!(has_feasible_schedule(&[Job::new(0, 1, 2), Job::new(0, 1, 2), Job::new(0, 2, 2)], 2).unwrap());
        assert!(has_feasible_schedule(&[], 3).unwrap());
        assert!(has_feasible_schedule(&[Job::new(0, 0, 2)], 1).is_err());
        assert!(has_feasible_schedule(&[Job::new(2, 1, 2)], 1).is_err());
    }

    #[test]
    fn rounding_fractional_schedule() {
        let jobs = [Job::new(0, 1, 2), Job::new(0, 1, 2), Job::new(0, 2, 2)];
        let mut w = ContinuousSchedule::new();
        for t in 0..2 {
            w.set(0, t, r(1, 2));
            w.set(1, t, r(1, 2));
            w.set(2, t, r(1, 1));
        }
        let d = continuous_to_discrete(&jobs, 2, &w).unwrap();
        d.validate(&jobs, 2).unwrap();
        assert!(d.slot(0).contains(&2) && d.slot(1).contains(&2));
        let firsts = [d.slot(0), d.slot(1)];
        assert!(firsts == [&[0, 2][..], &[1, 2][..]] || firsts == [&[1, 2][..], &[0, 2][..]]);
    }

    #[test]
    fn rounding_integral_schedule_is_identity() {
        let jobs = [Job::new(0, 2, 2)];
        let mut w = ContinuousSchedule::new();
        w.set(0, 0, r(1, 1));
        w.set(0, 1, r(1, 1));
        let d = continuous_to_discrete(&jobs, 1, &w).unwrap();
        assert_eq!(d.slots(), &[vec![0], vec![0]]);

        let jobs = [Job::new(0, 1, 3), Job::new(1, 2, 3)];
        let mut w = ContinuousSchedule::new();
        w.set(0, 0, r(1, 1));
        w.set(1, 1, r(1, 1));
        w.set(1, 2, r(1, 1));
        let d = continuous_to_discrete(&jobs, 1, &w).unwrap();
        assert_eq!(d.to_continuous(), w);
    }

    #[test]
    fn rounding_rejects_invalid_input() {
        let jobs = [Job::new(0, 2, 2)];
        let mut w = ContinuousSchedule::new();
        w.set(0, 0, r(1, 1));
        let err = continuous_to_discrete(&jobs, 1, &w).unwrap_err();
        assert!(matches!(err, Error::Continuous(Violation::Underserved { job: 0, .. })));
    }

    #[test]
    fn violations_in_order() {
        let jobs = [Job::new(0, 1, 2), Job::new(0, 1, 2)];
        let mut w = ContinuousSchedule::new();
        w.set(0, 0, r(3, 2));
        let v = validate_continuous(&w, &jobs, 1).unwrap_err();
        assert_eq!(v, Violation::EntryOutOfRange { job: 0, slot: 0, value: r(3, 2) });

        let mut w = ContinuousSchedule::new();
        w.set(0, 0, r(1, 1));
        w.set(1, 0, r(1, 2));
        w.set(1, 1, r(1, 2));
        let v = validate_continuous(&w, &jobs, 1).unwrap_err();
        assert_eq!(v, Violation::SlotOverload { slot: 0, total: r(3, 2) });

        let mut w = ContinuousSchedule::new();
        w.set(0, 0, r(1, 1));
        w.set(1, 1, r(1, 2));
        let v = validate_continuous(&w, &jobs, 1).unwrap_err();
        assert_eq!(v, Violation::Underserved { job: 1, total: r(1, 2) });

        let mut w = ContinuousSchedule::new();
        w.set(0, 2, r(1, 1));
        assert_eq!(
            validate_continuous(&w, &jobs, 1).unwrap_err(),
            Violation::OutsideWindow { job: 0, slot: 2 }
        );
        let mut w = ContinuousSchedule::new();
        w.set(5, 0, r(1, 1));
        assert_eq!(validate_continuous(&w, &jobs, 1).unwrap_err(), Violation::UnknownJob { job: 5 });
    }

    #[test]
    fn trimming_keeps_validity() {
        let jobs = [Job::new(0, 1, 3), Job::new(0, 2, 3)];
        let mut w = ContinuousSchedule::new();
        for t in 0..3 {
            w.set(0, t, r(2, 3));
            w.set(1, t, r(1, 1));
        }
        validate_continuous(&w, &jobs, 2).unwrap();
        let trimmed = trim_excess(&w, &jobs);
        validate_continuous(&trimmed, &jobs, 2).unwrap();
        assert_eq!(trimmed.job_total(0, 0..3), r(1, 1));
        assert_eq!(trimmed.job_total(1, 0..3), r(2, 1));
        assert_eq!(trimmed.get(0, 1), r(1, 3));
        assert_eq!(trimmed.get(0, 2), r(0, 1));
    }

    #[test]
    fn jobs_from_sequence() {
        let sys = TaskSystem::from_triples(&[(1, 2, 2), (2, 2, 2)], 1).unwrap();
        let mut seq = JobSequence::empty(2);
        seq.set(0, 0, 1);
        seq.set(0, 1, 2);
        assert_eq!(jobs_of(&sys, &seq), vec![Job::new(0, 1, 2), Job::new(0, 2, 2)]);
    }
}
