//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Thresholds are fixed here and must not
//! be relaxed to make a run pass.

mod common;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sporadic::blindfold::{knowledge_walk, reachable_knowledge_states};
use sporadic::flow::{build_network, continuous_to_discrete, has_feasible_schedule, jobs_of, max_flow};
use sporadic::oracle::{brute_force_valid_states, enumerate_legal_sequences};
use sporadic::savitch::{search, KnowledgeReach, SavitchOptions};
use sporadic::{
    is_feasible, is_feasible_with, is_online_feasible, is_schedulable, simulate, synthesize_strategy,
    FeasibilityOptions, JobSequence, Outcome, Parallelism, Policy, ReleaseVector, TaskSystem, Verdict,
};

const SWEEP_HORIZON: usize = 5;
const LEMMA_HORIZON: usize = 4;
const SAVITCH_SCOPE: usize = 500;

struct Check {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

/// Per-instance results shared by several criteria.
struct Solved {
    sys: TaskSystem,
    plain: Verdict,
    antichain: Verdict,
    online: bool,
    edf: Verdict,
}

fn pool() -> Parallelism {
    Parallelism::Threads(0)
}

fn two_task_example() -> Check {
    let started = Instant::now();
    let sys = TaskSystem::from_triples(&[(1, 2, 2), (2, 2, 2)], 1).unwrap();
    let v = is_feasible(&sys).unwrap();
    let expected_witness = JobSequence::from_releases(2, vec![ReleaseVector::new(vec![1, 2])]);
    let walk = knowledge_walk(&sys, &expected_witness, 2).unwrap();
    let q: Vec<BTreeSet<Vec<u32>>> = walk.iter().map(|s| s.compute_vectors(&sys).into_iter().collect()).collect();
    let elapsed = started.elapsed();

    let want_q: Vec<BTreeSet<Vec<u32>>> = vec![
        [vec![0, 0]].into_iter().collect(),
        [vec![0, 2], vec![1, 1], vec![1, 2]].into_iter().collect(),
        BTreeSet::new(),
    ];
    // The walk reaches {(1,2)} on the scheduler side right after the release.
    let release_side = sporadic::blindfold::release_successor(&sys, &walk[0], &expected_witness.at(0)).unwrap();
    let release_q: BTreeSet<Vec<u32>> = release_side.compute_vectors(&sys).into_iter().collect();

    let pass = !v.feasible
        && v.witness.as_ref() == Some(&expected_witness)
        && expected_witness.len() == 1
        && release_q == [vec![1, 2]].into_iter().collect()
        && q == want_q
        && walk[2].is_failure()
        && elapsed < Duration::from_secs(1);
    Check {
        id: 1,
        name: "two-task uniprocessor example",
        pass,
        detail: format!(
            "verdict={} witness={} len={} Q-sets {:?} -> {:?} in {:?}",
            if v.feasible { "feasible" } else { "infeasible" },
            v.witness.as_ref().map(|w| w.to_string()).unwrap_or_default(),
            v.witness.as_ref().map_or(0, |w| w.len()),
            release_q,
            &q[1..],
            elapsed
        ),
    }
}

fn lemma_one() -> Check {
    let started = Instant::now();
    let systems = common::all_systems(2, 3, 2);
    let results = pool().map(&systems, |sys| {
        let mut checked = 0usize;
        let mut mismatches = Vec::new();
        for seq in enumerate_legal_sequences(sys, LEMMA_HORIZON) {
            let walk = knowledge_walk(sys, &seq, LEMMA_HORIZON).unwrap();
            for (t, state) in walk.iter().enumerate() {
                let graph: BTreeSet<Vec<u32>> = state.compute_vectors(sys).into_iter().collect();
                let brute = brute_force_valid_states(sys, &seq, t).unwrap();
                checked += 1;
                if graph != brute && mismatches.len() < 3 {
                    mismatches.push(format!("{sys} {seq} t={t}"));
                }
            }
        }
        (checked, mismatches)
    });
    let checked: usize = results.iter().map(|r| r.0).sum();
    let mismatches: Vec<String> = results.into_iter().flat_map(|r| r.1).collect();
    let elapsed = started.elapsed();
    Check {
        id: 2,
        name: "knowledge-set oracle suite",
        pass: mismatches.is_empty() && elapsed < Duration::from_secs(300),
        detail: format!(
            "{} systems, {checked} (sequence, t) comparisons, {} mismatches {:?}, {:?}",
            systems.len(),
            mismatches.len(),
            mismatches,
            elapsed
        ),
    }
}

fn witness_soundness(suite: &[Solved]) -> Check {
    let results = pool().map(suite, |s| {
        let m = s.sys.processors();
        match &s.plain.witness {
            Some(w) => {
                let bad = has_feasible_schedule(&jobs_of(&s.sys, w), m).unwrap();
                (0usize, usize::from(bad))
            }
            None => {
                let mut n = 0;
                let mut bad = 0;
                for seq in enumerate_legal_sequences(&s.sys, SWEEP_HORIZON) {
                    n += 1;
                    if !has_feasible_schedule(&jobs_of(&s.sys, &seq), m).unwrap() {
                        bad += 1;
                    }
                }
                (n, bad)
            }
        }
    });
    let sequences: usize = results.iter().map(|r| r.0).sum();
    let violations: usize = results.iter().map(|r| r.1).sum();
    let infeasible = suite.iter().filter(|s| !s.plain.feasible).count();
    Check {
        id: 3,
        name: "Witness soundness",
        pass: violations == 0,
        detail: format!(
            "{infeasible} infeasible witnesses, {} feasible systems x all sequences to horizon {SWEEP_HORIZON} ({sequences} sequences), {violations} violations",
            suite.len() - infeasible
        ),
    }
}

fn implication_chain(suite: &[Solved]) -> Check {
    let mut broken = Vec::new();
    let mut uni = 0;
    for s in suite {
        if s.online && !s.plain.feasible {
            broken.push(format!("online but infeasible: {}", s.sys));
        }
        if s.sys.processors() == 1 {
            uni += 1;
            if s.plain.feasible != s.online || s.online != s.edf.feasible {
                broken.push(format!(
                    "m=1 disagreement {}: feasible={} online={} edf={}",
                    s.sys, s.plain.feasible, s.online, s.edf.feasible
                ));
            }
        }
    }
    let online = suite.iter().filter(|s| s.online).count();
    let feasible = suite.iter().filter(|s| s.plain.feasible).count();
    Check {
        id: 4,
        name: "Implication chain",
        pass: broken.is_empty(),
        detail: format!(
            "{online} online-feasible, {feasible} feasible of {}; {uni} uniprocessor systems; {} violations {:?}",
            suite.len(),
            broken.len(),
            broken.iter().take(3).collect::<Vec<_>>()
        ),
    }
}

fn synthesis_closure(suite: &[Solved]) -> Check {
    let targets: Vec<&Solved> = suite.iter().filter(|s| s.online).collect();
    let results = pool().map(&targets, |s| {
        let strategy = synthesize_strategy(&s.sys).unwrap();
        let policy = Policy::Strategy(strategy);
        let schedulable = is_schedulable(&s.sys, &policy).map(|v| v.feasible).unwrap_or(false);
        let mut runs = 0usize;
        let mut failures = 0usize;
        for seq in enumerate_legal_sequences(&s.sys, SWEEP_HORIZON) {
            runs += 1;
            match simulate(&s.sys, &seq, &policy, None) {
                Ok(sim) if sim.outcome == Outcome::Met => {}
                _ => failures += 1,
            }
        }
        (schedulable, runs, failures)
    });
    let unschedulable = results.iter().filter(|r| !r.0).count();
    let runs: usize = results.iter().map(|r| r.1).sum();
    let failures: usize = results.iter().map(|r| r.2).sum();
    Check {
        id: 5,
        name: "Synthesis closure",
        pass: unschedulable == 0 && failures == 0,
        detail: format!(
            "{} strategies, {unschedulable} not schedulable, {runs} simulations, {failures} missed deadlines",
            targets.len()
        ),
    }
}

fn savitch_agreement(suite: &[Solved]) -> Check {
    let opts = SavitchOptions {
        time_limit: Some(Duration::from_secs(120)),
        ..SavitchOptions::default()
    };
    let results = pool().map(suite, |s| {
        let size = reachable_knowledge_states(&s.sys, SAVITCH_SCOPE + 1).map(|st| st.total());
        match size {
            Ok(n) if n <= SAVITCH_SCOPE => {}
            _ => return None,
        }
        let graph = KnowledgeReach::new(&s.sys).unwrap();
        Some(match search(&graph, &opts) {
            Ok(out) => {
                let agrees = out.path.is_none() == s.plain.feasible;
                let path_only = out.peak_stored <= 2 * (out.bound + 1);
                (agrees, path_only, None)
            }
            Err(e) => (false, true, Some(format!("{}: {e}", s.sys))),
        })
    });
    let in_scope: Vec<_> = results.into_iter().flatten().collect();
    let disagree = in_scope.iter().filter(|r| !r.0).count();
    let stored = in_scope.iter().filter(|r| !r.1).count();
    let errors: Vec<&String> = in_scope.iter().filter_map(|r| r.2.as_ref()).collect();
    Check {
        id: 6,
        name: "Savitch/BFS agreement",
        pass: disagree == 0 && stored == 0,
        detail: format!(
            "{} systems with <= {SAVITCH_SCOPE} reachable knowledge states, {disagree} disagreements, {stored} runs storing more than two paths, errors {:?}",
            in_scope.len(),
            errors
        ),
    }
}

fn antichain_agreement(suite: &[Solved]) -> Check {
    let diffs: Vec<String> = suite
        .iter()
        .filter(|s| {
            s.plain.feasible != s.antichain.feasible
                || s.plain.witness.as_ref().map(|w| w.len()) != s.antichain.witness.as_ref().map(|w| w.len())
                || s.plain.failure_time != s.antichain.failure_time
        })
        .map(|s| s.sys.to_string())
        .collect();
    let plain: usize = suite.iter().map(|s| s.plain.stats.total()).sum();
    let pruned: usize = suite.iter().map(|s| s.antichain.stats.total()).sum();
    Check {
        id: 7,
        name: "Antichain agreement",
        pass: diffs.is_empty(),
        detail: format!(
            "{} systems, {} differences {:?}; states explored {plain} plain vs {pruned} pruned",
            suite.len(),
            diffs.len(),
            diffs.iter().take(3).collect::<Vec<_>>()
        ),
    }
}

fn flow_rounding() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xf10e);
    let mut rounding_failures = Vec::new();
    for _ in 0..100 {
        let (jobs, m, w) = common::random_fractional_instance(&mut rng);
        match continuous_to_discrete(&jobs, m, &w) {
            Ok(d) => {
                if let Err(v) = d.validate(&jobs, m) {
                    rounding_failures.push(v.to_string());
                }
            }
            Err(e) => rounding_failures.push(e.to_string()),
        }
    }

    let mut infeasible = 0;
    let mut attempts = 0;
    let mut lp_mismatch = 0;
    let mut wrong_verdict = 0;
    while infeasible < 100 {
        attempts += 1;
        let m = rng.gen_range(1..=2usize);
        let horizon = rng.gen_range(2..=5usize);
        let count = rng.gen_range(2..=6usize);
        let jobs = common::random_jobs(&mut rng, count, horizon, 3);
        let net = build_network(&jobs, m);
        let flow = max_flow(&net);
        if flow.value == net.total_demand() {
            continue;
        }
        infeasible += 1;
        if has_feasible_schedule(&jobs, m).unwrap() {
            wrong_verdict += 1;
        }
        if common::lp_relaxation_value(&jobs, m) != BigRational::from_integer(flow.value.into()) {
            lp_mismatch += 1;
        }
    }
    Check {
        id: 8,
        name: "Flow rounding",
        pass: rounding_failures.is_empty() && wrong_verdict == 0 && lp_mismatch == 0,
        detail: format!(
            "100 fractional schedules: {} rounding failures {:?}; 100 infeasible job sets ({attempts} drawn): {wrong_verdict} wrong verdicts, {lp_mismatch} LP/flow mismatches",
            rounding_failures.len(),
            rounding_failures.iter().take(3).collect::<Vec<_>>()
        ),
    }
}

fn witness_length(suite: &[Solved]) -> Check {
    let mut witnesses = 0;
    let mut over = Vec::new();
    for s in suite {
        for v in [&s.plain, &s.antichain, &s.edf] {
            if let Some(w) = &v.witness {
                witnesses += 1;
                if w.len() > v.stats.adversary_states {
                    over.push(format!("{}: {} > {}", s.sys, w.len(), v.stats.adversary_states));
                }
            }
        }
    }
    Check {
        id: 9,
        name: "Witness-length bound",
        pass: over.is_empty(),
        detail: format!("{witnesses} witnesses, {} over the bound {:?}", over.len(), over.iter().take(3).collect::<Vec<_>>()),
    }
}

fn main() -> ExitCode {
    let started = Instant::now();
    let systems = common::random_suite();
    let suite: Vec<Solved> = pool().map(&systems, |sys| Solved {
        sys: sys.clone(),
        plain: is_feasible(sys).unwrap(),
        antichain: is_feasible_with(
            sys,
            &FeasibilityOptions {
                antichain: true,
                ..FeasibilityOptions::default()
            },
        )
        .unwrap(),
        online: is_online_feasible(sys).unwrap(),
        edf: is_schedulable(sys, &Policy::Edf).unwrap(),
    });

    let checks = vec![
        two_task_example(),
        lemma_one(),
        witness_soundness(&suite),
        implication_chain(&suite),
        synthesis_closure(&suite),
        savitch_agreement(&suite),
        antichain_agreement(&suite),
        flow_rounding(),
        witness_length(&suite),
    ];
    let mut failed = 0;
    for c in &checks {
        println!(
            "criterion {} {:<24} {}  {}",
            c.id,
            c.name,
            if c.pass { "PASS" } else { "FAIL" },
            c.detail
        );
        failed += usize::from(!c.pass);
    }
    println!(
        "acceptance: {}/{} criteria passed in {:?}",
        checks.len() - failed,
        checks.len(),
        started.elapsed()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
