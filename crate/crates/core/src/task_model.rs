//! Sporadic task systems and their discrete-time semantics.
//!
//! Time is divided into unit slots. At each integer time `t` the adversary
//! releases a [`ReleaseVector`], the scheduler picks a [`ScheduleStep`] of at
//! most `m` tasks, and the clock advances by one slot. A released job of task
//! `i` must be finished within `D_i` slots, counting the release slot.

use std::fmt;

use crate::error::{Error, Result};

/// Upper bound on tasks; schedule steps are stored as 64-bit masks.
pub const MAX_TASKS: usize = 64;

/// A sporadic task `(C, D, P)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Task {
    /// Worst-case compute time `C`.
    pub wcet: u32,
    /// Relative deadline `D`.
    pub deadline: u32,
    /// Minimum interarrival time `P`.
    pub period: u32,
}

impl Task {
    pub const fn new(wcet: u32, deadline: u32, period: u32) -> Self {
        Task {
            wcet,
            deadline,
            period,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.wcet, self.deadline, self.period)
    }
}

/// A validated constrained-deadline task system on `m` identical processors.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TaskSystem {
    tasks: Vec<Task>,
    processors: usize,
}

impl TaskSystem {
    /// Validates `1 <= m <= n` and `1 <= C_i <= D_i <= P_i`.
    pub fn new(tasks: Vec<Task>, processors: usize) -> Result<Self> {
        if tasks.is_empty() {
            return Err(Error::InvalidSystem("at least one task is required".into()));
        }
        if tasks.len() > MAX_TASKS {
            return Err(Error::InvalidSystem(format!(
                "{} tasks given, at most {MAX_TASKS} are supported",
                tasks.len()
            )));
        }
        if processors == 0 || processors > tasks.len() {
            return Err(Error::InvalidSystem(format!(
                "processor count {processors} must be between 1 and the number of tasks ({})",
                tasks.len()
            )));
        }
        for (i, t) in tasks.iter().enumerate() {
            let task = i + 1;
            if t.wcet == 0 || t.deadline == 0 || t.period == 0 {
                return Err(Error::InvalidTask {
                    task,
                    message: "parameters must be positive".into(),
                });
            }
            if t.wcet > t.deadline {
                return Err(Error::InvalidTask {
                    task,
                    message: format!("C={} exceeds D={}", t.wcet, t.deadline),
                });
            }
            if t.deadline > t.period {
                return Err(Error::InvalidTask {
                    task,
                    message: format!("D={} exceeds P={} (deadlines must be constrained)", t.deadline, t.period),
                });
            }
        }
        Ok(TaskSystem { tasks, processors })
    }

    /// Convenience constructor from `(C, D, P)` triples.
    pub fn from_triples(triples: &[(u32, u32, u32)], processors: usize) -> Result<Self> {
        Self::new(
            triples.iter().map(|&(c, d, p)| Task::new(c, d, p)).collect(),
            processors,
        )
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn task(&self, i: usize) -> &Task {
        &self.tasks[i]
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn processors(&self) -> usize {
        self.processors
    }

    pub fn max_deadline(&self) -> usize {
        self.tasks.iter().map(|t| t.deadline as usize).max().unwrap_or(0)
    }

    /// `|B| = prod_i (C_i+1)(D_i+1)(P_i+1)`.
    pub fn state_space_size(&self) -> Result<u128> {
        self.tasks.iter().try_fold(1u128, |acc, t| {
            let per_task = (t.wcet as u128 + 1) * (t.deadline as u128 + 1) * (t.period as u128 + 1);
            acc.checked_mul(per_task).ok_or(Error::Unbounded)
        })
    }

    pub fn zero_config(&self) -> BacklogConfig {
        BacklogConfig {
            tasks: vec![TaskState::default(); self.len()],
        }
    }

    pub fn zero_release(&self) -> ReleaseVector {
        ReleaseVector::zero(self.len())
    }

    /// Every release vector that may legally occur in configuration `b`,
    /// in lexicographic order (the zero vector first).
    pub fn legal_releases(&self, b: &BacklogConfig) -> LegalReleases {
        let eligible = self
            .tasks
            .iter()
            .zip(&b.tasks)
            .map(|(t, s)| if s.separation == 0 { t.wcet } else { 0 })
            .collect();
        LegalReleases::new(eligible)
    }

    fn check_release(&self, b: &BacklogConfig, k: &ReleaseVector, time: usize) -> Result<()> {
        if k.len() != self.len() || b.len() != self.len() {
            return Err(Error::InvalidSystem("vector length does not match task count".into()));
        }
        for (i, (&ki, t)) in k.0.iter().zip(&self.tasks).enumerate() {
            if ki > t.wcet {
                return Err(Error::IllegalRelease {
                    task: i + 1,
                    time,
                    reason: format!("compute time {ki} exceeds C={}", t.wcet),
                });
            }
            if ki > 0 && b.tasks[i].separation > 0 {
                return Err(Error::IllegalRelease {
                    task: i + 1,
                    time,
                    reason: format!("{} slots of separation remain", b.tasks[i].separation),
                });
            }
        }
        Ok(())
    }

    pub fn check_step(&self, s: ScheduleStep) -> Result<()> {
        if s.len() > self.processors {
            return Err(Error::InvalidStep {
                step: s.to_string(),
                reason: format!("more than m={} tasks", self.processors),
            });
        }
        if self.len() < MAX_TASKS && s.bits() >> self.len() != 0 {
            return Err(Error::InvalidStep {
                step: s.to_string(),
                reason: format!("task index beyond n={}", self.len()),
            });
        }
        Ok(())
    }

    /// Applies the releases in `k` without advancing the clock: released
    /// tasks get `(k_i, D_i, P_i)`.
    pub fn release(&self, b: &BacklogConfig, k: &ReleaseVector) -> Result<BacklogConfig> {
        self.check_release(b, k, 0)?;
        Ok(self.release_unchecked(b, k))
    }

    pub(crate) fn release_unchecked(&self, b: &BacklogConfig, k: &ReleaseVector) -> BacklogConfig {
        let tasks = b
            .tasks
            .iter()
            .zip(&k.0)
            .zip(&self.tasks)
            .map(|((s, &ki), t)| {
                if ki > 0 {
                    TaskState {
                        remaining: ki,
                        deadline: t.deadline,
                        separation: t.period,
                    }
                } else {
                    *s
                }
            })
            .collect();
        BacklogConfig { tasks }
    }

    /// One clock tick from a configuration whose releases were already
    /// applied: tasks in `s` lose one unit of remaining work, all counters
    /// decrement, everything floors at zero.
    pub fn tick(&self, pending: &BacklogConfig, s: ScheduleStep) -> BacklogConfig {
        let tasks = pending
            .tasks
            .iter()
            .enumerate()
            .map(|(i, st)| TaskState {
                remaining: if s.contains(i) {
                    st.remaining.saturating_sub(1)
                } else {
                    st.remaining
                },
                deadline: st.deadline.saturating_sub(1),
                separation: st.separation.saturating_sub(1),
            })
            .collect();
        BacklogConfig { tasks }
    }

    /// Successor configuration: release `k`, process `s` for one slot.
    pub fn step(&self, b: &BacklogConfig, k: &ReleaseVector, s: ScheduleStep) -> Result<BacklogConfig> {
        self.check_release(b, k, 0)?;
        self.check_step(s)?;
        Ok(self.tick(&self.release_unchecked(b, k), s))
    }

    /// Separation and range check of a finite job sequence.
    pub fn is_legal_sequence(&self, seq: &JobSequence) -> bool {
        self.check_sequence(seq).is_ok()
    }

    pub fn check_sequence(&self, seq: &JobSequence) -> Result<()> {
        if seq.tasks() != self.len() {
            return Err(Error::InvalidSystem(format!(
                "job sequence has {} tasks, system has {}",
                seq.tasks(),
                self.len()
            )));
        }
        let mut last: Vec<Option<usize>> = vec![None; self.len()];
        for (time, k) in seq.releases().iter().enumerate() {
            for (i, (&ki, t)) in k.0.iter().zip(&self.tasks).enumerate() {
                if ki == 0 {
                    continue;
                }
                if ki > t.wcet {
                    return Err(Error::IllegalRelease {
                        task: i + 1,
                        time,
                        reason: format!("compute time {ki} exceeds C={}", t.wcet),
                    });
                }
                if let Some(prev) = last[i] {
                    if time - prev < t.period as usize {
                        return Err(Error::IllegalRelease {
                            task: i + 1,
                            time,
                            reason: format!("separation {} from release at {prev} is below P={}", time - prev, t.period),
                        });
                    }
                }
                last[i] = Some(time);
            }
        }
        Ok(())
    }

    /// Horizon after which every job of `seq` has reached its deadline.
    pub fn default_horizon(&self, seq: &JobSequence) -> usize {
        seq.len() + self.max_deadline()
    }
}

impl fmt::Display for TaskSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m={} (", self.processors)?;
        for (i, t) in self.tasks.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{t}")?;
        }
        write!(f, ")")
    }
}

/// Compute times released at one instant; `0` means no release.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ReleaseVector(Vec<u32>);

impl ReleaseVector {
    pub fn new(values: Vec<u32>) -> Self {
        ReleaseVector(values)
    }

    pub fn zero(n: usize) -> Self {
        ReleaseVector(vec![0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> u32 {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&k| k == 0)
    }

    /// Tasks with a release, as a mask.
    pub fn support(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &k)| k > 0)
            .fold(0, |acc, (i, _)| acc | 1 << i)
    }
}

impl fmt::Display for ReleaseVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, ")")
    }
}

/// Lexicographic enumeration of release vectors under per-task caps.
#[derive(Debug, Clone)]
pub struct LegalReleases {
    caps: Vec<u32>,
    next: Option<Vec<u32>>,
}

impl LegalReleases {
    pub(crate) fn new(caps: Vec<u32>) -> Self {
        let next = Some(vec![0; caps.len()]);
        LegalReleases { caps, next }
    }
}

impl Iterator for LegalReleases {
    type Item = ReleaseVector;

    fn next(&mut self) -> Option<ReleaseVector> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut i = succ.len();
        loop {
            if i == 0 {
                break;
            }
            i -= 1;
            if succ[i] < self.caps[i] {
                succ[i] += 1;
                self.next = Some(succ);
                break;
            }
            succ[i] = 0;
        }
        Some(ReleaseVector(current))
    }
}

/// A finite job sequence; entry `t` holds the releases at time `t`.
/// Trailing all-zero entries are trimmed, so `len()` is the conventional
/// length: one past the last nonzero release.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JobSequence {
    tasks: usize,
    releases: Vec<ReleaseVector>,
}

impl JobSequence {
    pub fn empty(tasks: usize) -> Self {
        JobSequence {
            tasks,
            releases: Vec::new(),
        }
    }

    pub fn from_releases(tasks: usize, releases: Vec<ReleaseVector>) -> Self {
        let mut seq = JobSequence { tasks, releases };
        seq.trim();
        seq
    }

    fn trim(&mut self) {
        while self.releases.last().is_some_and(ReleaseVector::is_zero) {
            self.releases.pop();
        }
    }

    /// Sets the compute time released by `task` (0-based) at `time`.
    pub fn set(&mut self, time: usize, task: usize, compute: u32) {
        if self.releases.len() <= time {
            self.releases.resize(time + 1, ReleaseVector::zero(self.tasks));
        }
        self.releases[time].0[task] = compute;
        self.trim();
    }

    pub fn tasks(&self) -> usize {
        self.tasks
    }

    pub fn len(&self) -> usize {
        self.releases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.releases.is_empty()
    }

    pub fn releases(&self) -> &[ReleaseVector] {
        &self.releases
    }

    pub fn at(&self, time: usize) -> ReleaseVector {
        self.releases
            .get(time)
            .cloned()
            .unwrap_or_else(|| ReleaseVector::zero(self.tasks))
    }

    /// `(time, task, compute)` for every release, in time then task order.
    pub fn jobs(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        self.releases.iter().enumerate().flat_map(|(t, k)| {
            k.0.iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(move |(i, &c)| (t, i, c))
        })
    }
}

impl fmt::Display for JobSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        let mut first = true;
        for (t, k) in self.releases.iter().enumerate() {
            if k.is_zero() {
                continue;
            }
            if !first {
                write!(f, ", ")?;
            }
            first = false;
            write!(f, "{t}->{k}")?;
        }
        write!(f, "}}")
    }
}

/// Set of tasks processed during one slot, stored as a bit mask over
/// 0-based task indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ScheduleStep(u64);

impl ScheduleStep {
    pub const EMPTY: ScheduleStep = ScheduleStep(0);

    pub const fn from_bits(bits: u64) -> Self {
        ScheduleStep(bits)
    }

    pub fn from_tasks<I: IntoIterator<Item = usize>>(tasks: I) -> Self {
        ScheduleStep(tasks.into_iter().fold(0, |acc, i| acc | 1 << i))
    }

    pub const fn bits(&self) -> u64 {
        self.0
    }

    pub fn contains(&self, task: usize) -> bool {
        task < 64 && self.0 >> task & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    /// 0-based task indices in ascending order.
    pub fn tasks(&self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..64).filter(move |i| bits >> i & 1 == 1)
    }
}

impl fmt::Display for ScheduleStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (n, i) in self.tasks().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        write!(f, "}}")
    }
}

/// All masks within `candidates` of size at most `limit`, in ascending
/// numeric order (the empty step first).
pub fn subsets_up_to(candidates: u64, limit: usize) -> impl Iterator<Item = ScheduleStep> {
    // Enumerate submasks in increasing order.
    let mut sub: Option<u64> = Some(0);
    std::iter::from_fn(move || loop {
        let s = sub?;
        sub = if s == candidates {
            None
        } else {
            Some(((s | !candidates).wrapping_add(1)) & candidates)
        };
        if s.count_ones() as usize <= limit {
            return Some(ScheduleStep(s));
        }
    })
}

/// A finite schedule; slots past the end are empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Schedule {
    steps: Vec<ScheduleStep>,
}

impl Schedule {
    pub fn new(steps: Vec<ScheduleStep>) -> Self {
        Schedule { steps }
    }

    pub fn steps(&self) -> &[ScheduleStep] {
        &self.steps
    }

    pub fn at(&self, time: usize) -> ScheduleStep {
        self.steps.get(time).copied().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Drops trailing empty steps.
    pub fn trimmed(mut self) -> Self {
        while self.steps.last().is_some_and(ScheduleStep::is_empty) {
            self.steps.pop();
        }
        self
    }
}

/// Per-task backlog `(c, d, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct TaskState {
    /// Remaining compute time of the pending job.
    pub remaining: u32,
    /// Remaining time to that job's deadline.
    pub deadline: u32,
    /// Slots until the task may release again.
    pub separation: u32,
}

impl TaskState {
    pub const fn new(remaining: u32, deadline: u32, separation: u32) -> Self {
        TaskState {
            remaining,
            deadline,
            separation,
        }
    }

    pub fn is_failure(&self) -> bool {
        self.remaining > 0 && self.deadline == 0
    }
}

/// Scheduler-side system state at an integer time.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BacklogConfig {
    tasks: Vec<TaskState>,
}

impl BacklogConfig {
    pub fn new(tasks: Vec<TaskState>) -> Self {
        BacklogConfig { tasks }
    }

    pub fn tasks(&self) -> &[TaskState] {
        &self.tasks
    }

    pub fn task(&self, i: usize) -> &TaskState {
        &self.tasks[i]
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// Some pending job has run out of time.
    pub fn is_failure(&self) -> bool {
        self.tasks.iter().any(TaskState::is_failure)
    }

    /// Tasks with remaining work, as a mask.
    pub fn pending(&self) -> u64 {
        self.tasks
            .iter()
            .enumerate()
            .filter(|(_, s)| s.remaining > 0)
            .fold(0, |acc, (i, _)| acc | 1 << i)
    }

    pub fn within_bounds(&self, sys: &TaskSystem) -> bool {
        self.tasks.len() == sys.len()
            && self.tasks.iter().zip(sys.tasks()).all(|(s, t)| {
                s.remaining <= t.wcet && s.deadline <= t.deadline && s.separation <= t.period
            })
    }
}

impl fmt::Display for BacklogConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.tasks.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "({},{},{})", s.remaining, s.deadline, s.separation)?;
        }
        Ok(())
    }
}

/// A memoryless scheduling algorithm: a function of the current backlog
/// and the releases at the current instant.
pub trait Scheduler: Sync {
    fn decide(&self, sys: &TaskSystem, config: &BacklogConfig, release: &ReleaseVector) -> Result<ScheduleStep>;

    /// Name used in reports.
    fn name(&self) -> String;
}

/// Result of running a job sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Met,
    /// First time at which a failure configuration appears.
    Failure { time: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Simulation {
    /// `b_0 .. b_h`, ending early at the first failure configuration.
    pub trace: Vec<BacklogConfig>,
    pub outcome: Outcome,
}

fn run<F>(sys: &TaskSystem, seq: &JobSequence, horizon: Option<usize>, mut decide: F) -> Result<Simulation>
where
    F: FnMut(usize, &BacklogConfig, &ReleaseVector) -> Result<ScheduleStep>,
{
    sys.check_sequence(seq)?;
    let required = sys.default_horizon(seq);
    let horizon = horizon.unwrap_or(required);
    if horizon < required {
        return Err(Error::HorizonTooShort { horizon, required });
    }
    let mut b = sys.zero_config();
    let mut trace = vec![b.clone()];
    for t in 0..horizon {
        let k = seq.at(t);
        let s = decide(t, &b, &k)?;
        b = sys.step(&b, &k, s)?;
        let failed = b.is_failure();
        trace.push(b.clone());
        if failed {
            return Ok(Simulation {
                trace,
                outcome: Outcome::Failure { time: t + 1 },
            });
        }
    }
    Ok(Simulation {
        trace,
        outcome: Outcome::Met,
    })
}

/// Runs `seq` under a memoryless scheduler. `horizon` defaults to
/// `len(seq) + max D`; a shorter explicit horizon is rejected.
pub fn simulate(
    sys: &TaskSystem,
    seq: &JobSequence,
    alg: &dyn Scheduler,
    horizon: Option<usize>,
) -> Result<Simulation> {
    run(sys, seq, horizon, |_, b, k| {
        let s = alg.decide(sys, b, k)?;
        sys.check_step(s)?;
        Ok(s)
    })
}

/// Runs `seq` under a fixed, time-indexed schedule.
pub fn simulate_schedule(
    sys: &TaskSystem,
    seq: &JobSequence,
    schedule: &Schedule,
    horizon: Option<usize>,
) -> Result<Simulation> {
    run(sys, seq, horizon, |t, _, _| Ok(schedule.at(t)))
}
