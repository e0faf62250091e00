//! Brute-force reference implementations for cross-checking the graph
//! algorithms. They step plain `(c, d, p)` tuples with their own arithmetic
//! and never call into the knowledge graph, the game graph or the BFS code.
//! Nothing here is fast.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::task_model::{JobSequence, ReleaseVector, TaskSystem};

/// Largest number of schedule prefixes [`brute_force_valid_states`] will
/// enumerate.
pub const PREFIX_LIMIT: u64 = 10_000_000;

type Tuple = (u32, u32, u32);

fn params(sys: &TaskSystem) -> Vec<Tuple> {
    sys.tasks().iter().map(|t| (t.wcet, t.deadline, t.period)).collect()
}

/// One time unit: releases `k`, then runs the tasks whose bits are set in
/// `run`. Returns `None` if some task misses its deadline.
fn advance(params: &[Tuple], state: &[Tuple], k: &[u32], run: u64) -> Option<Vec<Tuple>> {
    let mut next = Vec::with_capacity(state.len());
    for (i, (&(c, d, p), &(_, dd, pp))) in state.iter().zip(params).enumerate() {
        let (c, d, p) = if k[i] > 0 { (k[i], dd, pp) } else { (c, d, p) };
        let c = if run >> i & 1 == 1 { c.saturating_sub(1) } else { c };
        let d = d.saturating_sub(1);
        if c > 0 && d == 0 {
            return None;
        }
        next.push((c, d, p.saturating_sub(1)));
    }
    Some(next)
}

/// All task sets of size at most `m`, as bitmasks.
fn choices(n: usize, m: usize) -> Vec<u64> {
    (0u64..1 << n).filter(|s| s.count_ones() as usize <= m).collect()
}

/// Compute-time vectors of every schedule prefix of length `t` that serves
/// `seq` without a deadline miss. Every sequence of processor assignments
/// is tried, including ones that idle or pick finished tasks.
pub fn brute_force_valid_states(sys: &TaskSystem, seq: &JobSequence, t: usize) -> Result<BTreeSet<Vec<u32>>> {
    sys.check_sequence(seq)?;
    let params = params(sys);
    let n = sys.len();
    let choices = choices(n, sys.processors());
    let total = (choices.len() as u64).checked_pow(t as u32);
    if total.is_none_or(|c| c > PREFIX_LIMIT) {
        return Err(Error::ResourceLimit {
            what: "schedule prefixes",
            limit: PREFIX_LIMIT,
        });
    }

    let mut out = BTreeSet::new();
    let mut picks = vec![0usize; t];
    'prefixes: loop {
        let mut state = vec![(0, 0, 0); n];
        let mut ok = true;
        for (time, &pick) in picks.iter().enumerate() {
            let k = seq.at(time);
            match advance(&params, &state, k.as_slice(), choices[pick]) {
                Some(s) => state = s,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            out.insert(state.iter().map(|&(c, _, _)| c).collect());
        }
        for slot in (0..t).rev() {
            picks[slot] += 1;
            if picks[slot] < choices.len() {
                continue 'prefixes;
            }
            picks[slot] = 0;
        }
        return Ok(out);
    }
}

/// Largest release allowed for each task given the current state.
fn release_caps(params: &[Tuple], state: &[Tuple]) -> Vec<u32> {
    state
        .iter()
        .zip(params)
        .map(|(&(_, _, p), &(c, _, _))| if p == 0 { c } else { 0 })
        .collect()
}

fn each_release(caps: &[u32], mut f: impl FnMut(&[u32]) -> bool) -> bool {
    let mut k = vec![0u32; caps.len()];
    loop {
        if f(&k) {
            return true;
        }
        let mut i = 0;
        loop {
            if i == k.len() {
                return false;
            }
            if k[i] < caps[i] {
                k[i] += 1;
                break;
            }
            k[i] = 0;
            i += 1;
        }
    }
}

struct Minimax {
    params: Vec<Tuple>,
    choices: Vec<u64>,
    /// Smallest round budget known to let the adversary win.
    wins_within: HashMap<Vec<Tuple>, usize>,
    /// Largest round budget known to be insufficient.
    survives: HashMap<Vec<Tuple>, usize>,
}

impl Minimax {
    /// Whether the adversary can force a deadline miss within `rounds`
    /// release/run rounds starting from `state`.
    fn adversary_wins(&mut self, state: &[Tuple], rounds: usize) -> bool {
        if rounds == 0 {
            return false;
        }
        if self.wins_within.get(state).is_some_and(|&r| r <= rounds) {
            return true;
        }
        if self.survives.get(state).is_some_and(|&r| r >= rounds) {
            return false;
        }
        let caps = release_caps(&self.params, state);
        let pending_after = |k: &[u32]| -> u64 {
            state
                .iter()
                .enumerate()
                .filter(|&(i, &(c, _, _))| k[i] > 0 || c > 0)
                .fold(0, |acc, (i, _)| acc | 1 << i)
        };
        let params = self.params.clone();
        let choices = self.choices.clone();
        let wins = each_release(&caps, |k| {
            let pending = pending_after(k);
            // The scheduler only ever needs to pick among pending tasks.
            choices.iter().filter(|&&s| s & !pending == 0).all(|&s| match advance(&params, state, k, s) {
                None => true,
                Some(next) => self.adversary_wins(&next, rounds - 1),
            })
        });
        if wins {
            let e = self.wins_within.entry(state.to_vec()).or_insert(rounds);
            *e = (*e).min(rounds);
        } else {
            let e = self.survives.entry(state.to_vec()).or_insert(rounds);
            *e = (*e).max(rounds);
        }
        wins
    }
}

/// Game-tree search for online feasibility: `true` iff no adversary
/// strategy forces a deadline miss within `depth` rounds against every
/// online scheduler. Once `depth` reaches the number of reachable
/// configurations ([`reachable_configurations`]) the answer is exact.
pub fn brute_force_online(sys: &TaskSystem, depth: usize) -> Result<bool> {
    let mut search = Minimax {
        params: params(sys),
        choices: choices(sys.len(), sys.processors()),
        wins_within: HashMap::new(),
        survives: HashMap::new(),
    };
    let start = vec![(0, 0, 0); sys.len()];
    Ok(!search.adversary_wins(&start, depth))
}

/// Number of miss-free configurations reachable from the all-zero one under
/// any releases and any processor assignment, found by depth-first search.
pub fn reachable_configurations(sys: &TaskSystem, limit: usize) -> Result<usize> {
    let params = params(sys);
    let choices = choices(sys.len(), sys.processors());
    let start = vec![(0, 0, 0); sys.len()];
    let mut seen: HashSet<Vec<Tuple>> = HashSet::from([start.clone()]);
    let mut stack = vec![start];
    while let Some(state) = stack.pop() {
        each_release(&release_caps(&params, &state), |k| {
            for &s in &choices {
                if let Some(next) = advance(&params, &state, k, s) {
                    if seen.insert(next.clone()) {
                        stack.push(next);
                    }
                }
            }
            false
        });
        if seen.len() > limit {
            return Err(Error::ResourceLimit {
                what: "configurations",
                limit: limit as u64,
            });
        }
    }
    Ok(seen.len())
}

/// Every legal job sequence whose releases fall in slots `0..horizon`, in
/// lexicographic order of the slot-major release grid (the empty sequence
/// first). Produced lazily.
pub fn enumerate_legal_sequences(sys: &TaskSystem, horizon: usize) -> LegalSequences {
    LegalSequences {
        params: params(sys),
        horizon,
        grid: vec![0; horizon * sys.len()],
        started: false,
    }
}

#[derive(Debug, Clone)]
pub struct LegalSequences {
    params: Vec<Tuple>,
    horizon: usize,
    grid: Vec<u32>,
    started: bool,
}

impl LegalSequences {
    fn tasks(&self) -> usize {
        self.params.len()
    }

    /// Largest value cell `idx` may take given all earlier cells.
    fn cap(&self, idx: usize) -> u32 {
        let n = self.tasks();
        let (t, i) = (idx / n, idx % n);
        let (c, _, p) = self.params[i];
        let lookback = (p as usize - 1).min(t);
        let blocked = (1..=lookback).any(|back| self.grid[(t - back) * n + i] > 0);
        if blocked {
            0
        } else {
            c
        }
    }

    fn current(&self) -> JobSequence {
        let n = self.tasks();
        let releases = (0..self.horizon)
            .map(|t| ReleaseVector::new(self.grid[t * n..(t + 1) * n].to_vec()))
            .collect();
        JobSequence::from_releases(n, releases)
    }
}

impl Iterator for LegalSequences {
    type Item = JobSequence;

    fn next(&mut self) -> Option<JobSequence> {
        if !self.started {
            self.started = true;
            return Some(self.current());
        }
        // Bump the last cell that can still grow; zeroing the cells after
        // it keeps the grid legal.
        for idx in (0..self.grid.len()).rev() {
            if self.grid[idx] < self.cap(idx) {
                self.grid[idx] += 1;
                self.grid[idx + 1..].iter_mut().for_each(|v| *v = 0);
                return Some(self.current());
            }
        }
        None
    }
}
