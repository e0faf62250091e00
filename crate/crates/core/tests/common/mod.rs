//! Shared fixtures for the integration tests: the seeded random suite, small
//! random job sets, and an exact rational simplex for the linear relaxation
//! of the job-to-slot assignment problem.

#![allow(dead_code)]

use num_rational::{BigRational, Rational64};
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sporadic::flow::{ContinuousSchedule, Job};
use sporadic::TaskSystem;

pub const SUITE_SEED: u64 = 0x5eed;
pub const SUITE_SIZE: usize = 200;

/// A random system with `1..=max_tasks` tasks, `C <= D <= P <= max_param`
/// and `1..=min(n, max_m)` processors.
pub fn random_system(rng: &mut impl Rng, max_tasks: usize, max_param: u32, max_m: usize) -> TaskSystem {
    let n = rng.gen_range(1..=max_tasks);
    let m = rng.gen_range(1..=n.min(max_m));
    let tasks: Vec<(u32, u32, u32)> = (0..n)
        .map(|_| {
            let p = rng.gen_range(1..=max_param);
            let d = rng.gen_range(1..=p);
            let c = rng.gen_range(1..=d);
            (c, d, p)
        })
        .collect();
    TaskSystem::from_triples(&tasks, m).expect("generator respects C <= D <= P")
}

/// The fixed random suite: 200 systems, at most 3 tasks, parameters at
/// most 4, at most 2 processors.
pub fn random_suite() -> Vec<TaskSystem> {
    let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED);
    (0..SUITE_SIZE).map(|_| random_system(&mut rng, 3, 4, 2)).collect()
}

/// Every system with `n <= max_tasks`, parameters at most `max_param` and
/// `m <= min(n, max_m)`, tasks as ordered tuples.
pub fn all_systems(max_tasks: usize, max_param: u32, max_m: usize) -> Vec<TaskSystem> {
    let mut triples = Vec::new();
    for p in 1..=max_param {
        for d in 1..=p {
            for c in 1..=d {
                triples.push((c, d, p));
            }
        }
    }
    let mut out = Vec::new();
    let mut current: Vec<Vec<(u32, u32, u32)>> = vec![Vec::new()];
    for _ in 0..max_tasks {
        current = current
            .iter()
            .flat_map(|prefix| {
                triples.iter().map(move |&t| {
                    let mut v = prefix.clone();
                    v.push(t);
                    v
                })
            })
            .collect();
        for tasks in &current {
            for m in 1..=tasks.len().min(max_m) {
                out.push(TaskSystem::from_triples(tasks, m).unwrap());
            }
        }
    }
    out
}

/// A random job set with releases and deadlines inside `0..=horizon`.
pub fn random_jobs(rng: &mut impl Rng, count: usize, horizon: usize, max_compute: u32) -> Vec<Job> {
    (0..count)
        .map(|_| {
            let r = rng.gen_range(0..horizon);
            let d = rng.gen_range(r + 1..=horizon);
            let c = rng.gen_range(1..=max_compute);
            Job::new(r, c, d)
        })
        .collect()
}

/// A valid continuous schedule with at least one fractional entry, and the
/// job set it serves. Amounts are drawn per job and slot, then scaled per
/// slot to fit `m`. Compute times are the floors of the totals.
pub fn random_fractional_instance(rng: &mut impl Rng) -> (Vec<Job>, usize, ContinuousSchedule) {
    loop {
        let m = rng.gen_range(1..=3usize);
        let horizon = rng.gen_range(2..=6usize);
        let count = rng.gen_range(1..=6usize);
        let windows: Vec<(usize, usize)> = (0..count)
            .map(|_| {
                let r = rng.gen_range(0..horizon);
                (r, rng.gen_range(r + 1..=horizon))
            })
            .collect();
        let mut amounts = vec![vec![Rational64::zero(); horizon]; count];
        for (j, &(r, d)) in windows.iter().enumerate() {
            for slot in amounts[j][r..d].iter_mut() {
                let den = [1i64, 2, 3, 4, 6][rng.gen_range(0..5)];
                *slot = Rational64::new(rng.gen_range(0..=den), den);
            }
        }
        for t in 0..horizon {
            let total: Rational64 = amounts.iter().map(|a| a[t]).sum();
            let cap = Rational64::from_integer(m as i64);
            if total > cap {
                let scale = cap / total;
                amounts.iter_mut().for_each(|a| a[t] *= scale);
            }
        }
        let mut jobs = Vec::new();
        let mut w = ContinuousSchedule::new();
        for (j, &(r, d)) in windows.iter().enumerate() {
            let total: Rational64 = amounts[j].iter().sum();
            let c = total.floor().to_integer();
            if c < 1 {
                continue;
            }
            let idx = jobs.len();
            jobs.push(Job::new(r, c as u32, d));
            for (t, &a) in amounts[j].iter().enumerate() {
                w.set(idx, t, a);
            }
        }
        if !jobs.is_empty() && !w.is_integral() {
            return (jobs, m, w);
        }
    }
}

/// Optimum of the linear relaxation of the assignment problem: maximize
/// `sum w(j,t)` over `0 <= w(j,t) <= 1` on each job's window, with at most
/// `m` per slot and at most `c_j` per job. Solved exactly by the simplex
/// method with Bland's rule; the origin is feasible, so one phase suffices.
pub fn lp_relaxation_value(jobs: &[Job], processors: usize) -> BigRational {
    let vars: Vec<(usize, usize)> = jobs
        .iter()
        .enumerate()
        .flat_map(|(j, job)| job.window().map(move |t| (j, t)))
        .collect();
    let horizon = jobs.iter().map(|j| j.deadline).max().unwrap_or(0);
    let nv = vars.len();

    let int = |x: i64| BigRational::from_integer(x.into());
    let mut rows: Vec<(Vec<BigRational>, BigRational)> = Vec::new();
    for v in 0..nv {
        let mut a = vec![BigRational::zero(); nv];
        a[v] = BigRational::one();
        rows.push((a, BigRational::one()));
    }
    for t in 0..horizon {
        let a = vars.iter().map(|&(_, s)| if s == t { int(1) } else { int(0) }).collect();
        rows.push((a, int(processors as i64)));
    }
    for (j, job) in jobs.iter().enumerate() {
        let a = vars.iter().map(|&(k, _)| if k == j { int(1) } else { int(0) }).collect();
        rows.push((a, int(job.compute as i64)));
    }
    let objective = vec![BigRational::one(); nv];
    simplex_max(&rows, &objective)
}

/// `max c·x` subject to `A x <= b`, `x >= 0`, with every `b >= 0`.
pub fn simplex_max(rows: &[(Vec<BigRational>, BigRational)], c: &[BigRational]) -> BigRational {
    let nv = c.len();
    let nr = rows.len();
    let width = nv + nr + 1;
    // Tableau rows: constraints with slack columns, then the objective row
    // holding reduced costs (negated objective) and the current value.
    let mut tab: Vec<Vec<BigRational>> = rows
        .iter()
        .enumerate()
        .map(|(i, (a, b))| {
            assert!(!b.is_negative());
            let mut row = vec![BigRational::zero(); width];
            row[..nv].clone_from_slice(a);
            row[nv + i] = BigRational::one();
            row[width - 1] = b.clone();
            row
        })
        .collect();
    let mut obj = vec![BigRational::zero(); width];
    for (k, ck) in c.iter().enumerate() {
        obj[k] = -ck.clone();
    }
    tab.push(obj);
    let mut basis: Vec<usize> = (nv..nv + nr).collect();

    loop {
        let Some(col) = (0..width - 1).find(|&k| tab[nr][k].is_negative()) else {
            return tab[nr][width - 1].clone();
        };
        let mut pivot: Option<(usize, BigRational)> = None;
        for (i, row) in tab.iter().enumerate().take(nr) {
            if row[col].is_positive() {
                let ratio = &row[width - 1] / &row[col];
                let better = match &pivot {
                    None => true,
                    Some((p, best)) => ratio < *best || (ratio == *best && basis[i] < basis[*p]),
                };
                if better {
                    pivot = Some((i, ratio));
                }
            }
        }
        let (prow, _) = pivot.expect("the relaxation is bounded");
        let pv = tab[prow][col].clone();
        tab[prow].iter_mut().for_each(|x| *x /= &pv);
        let pivot_row = tab[prow].clone();
        for (i, row) in tab.iter_mut().enumerate() {
            if i != prow && !row[col].is_zero() {
                let factor = row[col].clone();
                for (x, p) in row.iter_mut().zip(&pivot_row) {
                    *x -= &factor * p;
                }
            }
        }
        basis[prow] = col;
    }
}
