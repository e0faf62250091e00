//! Exact feasibility, online feasibility and schedulability analysis for
//! sporadic constrained-deadline task systems on identical multiprocessors.
//!
//! Time is discrete. A task `(C, D, P)` releases jobs of at most `C` units,
//! each due `D` slots after release, at least `P` slots apart. Each
//! question reduces to a reachability or game problem on a finite graph:
//!
//! * [`blindfold`]: feasibility (a clairvoyant schedule exists for every
//!   job sequence). The search runs over knowledge states that track every
//!   compute vector the scheduler could be in.
//! * [`online`]: online feasibility, decided on the perfect-information
//!   game over backlog configurations, with synthesis of a memoryless
//!   winning scheduler.
//! * [`schedulability`]: whether a fixed memoryless algorithm (EDF,
//!   fixed priority, or a synthesized strategy) never misses a deadline.
//! * [`flow`]: finite job sets, max-flow feasibility, and rounding of
//!   fractional schedules.
//! * [`savitch`]: a path-only, low-memory alternative to the
//!   breadth-first searches.
//!
//! Frontier expansion runs on rayon when the `parallel` feature is on (the
//! default) and a [`par::Parallelism`] other than `Sequential` is selected.
//! Results are identical either way.

pub mod blindfold;
pub mod error;
pub mod flow;
pub mod format;
pub mod online;
pub mod oracle;
pub mod par;
pub mod savitch;
pub mod schedulability;
pub mod task_model;
pub mod verdict;

pub use blindfold::{is_feasible, is_feasible_with, reconstruct_schedule, FeasibilityOptions, Reconstruction};
pub use error::{Error, Result};
pub use online::{is_online_feasible, synthesize_strategy, Strategy};
pub use par::Parallelism;
pub use savitch::savitch_feasible;
pub use schedulability::{is_schedulable, Policy};
pub use task_model::{
    simulate, BacklogConfig, JobSequence, Outcome, ReleaseVector, Schedule, ScheduleStep, Scheduler, Task,
    TaskState, TaskSystem,
};
pub use verdict::{ExplorationStats, Verdict};
