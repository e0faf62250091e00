//! `sporadic`: command-line front end for the task-system analyses.
//!
//! Exit status: 0 when the checked property holds, 1 when it fails (a
//! witness is written where one exists), 2 for input or usage errors, 3 when
//! a resource limit stops the analysis.

mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use sporadic::blindfold::{is_feasible_with, FeasibilityOptions, DEFAULT_MAX_STATES};
use sporadic::flow::{build_network, continuous_to_discrete, has_feasible_schedule, jobs_of, max_flow};
use sporadic::format::{
    parse_continuous_schedule, parse_job_sequence, parse_job_set, parse_strategy, parse_task_system,
    write_continuous_schedule, write_job_schedule, write_job_sequence, write_job_set, write_schedule,
    write_strategy, write_task_system,
};
use sporadic::online::{attractor_with, synthesize_strategy_with, AttractorMode, OnlineOptions};
use sporadic::oracle::{brute_force_online, brute_force_valid_states, enumerate_legal_sequences, reachable_configurations};
use sporadic::savitch::{savitch_feasible_with, savitch_schedulable_with, SavitchOptions};
use sporadic::schedulability::{is_schedulable_with, SchedulabilityOptions};
use sporadic::{
    reconstruct_schedule, simulate, Error, JobSequence, Outcome, Parallelism, Policy, Reconstruction, TaskSystem,
    Verdict,
};

use report::RunReport;

#[derive(Parser)]
#[command(name = "sporadic", version, about = "Exact analyses of sporadic constrained-deadline task systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct SearchArgs {
    /// Abort once more states than this are stored.
    #[arg(long, default_value_t = DEFAULT_MAX_STATES)]
    max_states: usize,
    /// Worker threads for frontier expansion (1 = sequential, 0 = all cores).
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

impl SearchArgs {
    fn parallelism(&self) -> Parallelism {
        Parallelism::from_threads(self.threads)
    }
}

#[derive(Args)]
struct ReportArg {
    /// Write a key=value report to this file.
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Decide feasibility on the knowledge graph; writes a witness job sequence if infeasible.
    Feasible {
        tasks: PathBuf,
        /// Keep only minimal compute vectors in each knowledge set.
        #[arg(long, conflicts_with = "savitch")]
        antichain: bool,
        /// Low-memory path-only search instead of breadth-first search.
        #[arg(long)]
        savitch: bool,
        /// On a feasible verdict, also check every legal sequence up to this length by max-flow.
        #[arg(long)]
        horizon: Option<usize>,
        /// Witness file (default: <tasks>.witness).
        #[arg(long)]
        witness: Option<PathBuf>,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        out: ReportArg,
    },
    /// Decide online feasibility by solving the scheduling game.
    OnlineFeasible {
        tasks: PathBuf,
        /// Use plain fixpoint iteration instead of backward propagation.
        #[arg(long)]
        iterative: bool,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        out: ReportArg,
    },
    /// Decide whether an algorithm meets every deadline of every legal job sequence.
    Schedulable {
        tasks: PathBuf,
        /// edf | fp:<order, 1-based, highest first> | strategy:<file>
        #[arg(long)]
        alg: String,
        #[arg(long)]
        savitch: bool,
        /// Witness file (default: <tasks>.witness).
        #[arg(long)]
        witness: Option<PathBuf>,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        out: ReportArg,
    },
    /// Synthesize a memoryless optimal online scheduler.
    Synthesize {
        tasks: PathBuf,
        /// Strategy file (default: <tasks>.strategy).
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        out: ReportArg,
    },
    /// Run one job sequence under an algorithm.
    Simulate {
        tasks: PathBuf,
        sequence: PathBuf,
        #[arg(long)]
        alg: String,
        /// Number of steps (default: sequence length + largest deadline).
        #[arg(long)]
        horizon: Option<usize>,
        /// Print the backlog configuration after every step.
        #[arg(long)]
        trace: bool,
        #[command(flatten)]
        out: ReportArg,
    },
    /// Build a schedule for one job sequence, or show that none exists.
    Reconstruct {
        tasks: PathBuf,
        sequence: PathBuf,
        /// Schedule file (default: standard output).
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        out: ReportArg,
    },
    /// Check a finite job set for a feasible schedule by max-flow.
    FlowCheck {
        jobs: PathBuf,
        #[arg(short = 'm', long = "processors")]
        processors: usize,
        #[command(flatten)]
        out: ReportArg,
    },
    /// Round a fractional schedule of a job set to an integral one.
    Round {
        jobs: PathBuf,
        schedule: PathBuf,
        #[arg(short = 'm', long = "processors")]
        processors: usize,
        /// Output file (default: standard output).
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        out: ReportArg,
    },
    /// Brute-force reference computations.
    #[command(hide = true, subcommand)]
    Oracle(OracleCommand),
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Game-tree search for online feasibility.
    Online {
        tasks: PathBuf,
        /// Rounds to search (default: reachable configurations + 1).
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Compute vectors of every miss-free schedule prefix of length `time`.
    ValidStates { tasks: PathBuf, sequence: PathBuf, time: usize },
    /// Count (or list) legal job sequences up to a horizon.
    Sequences {
        tasks: PathBuf,
        horizon: usize,
        #[arg(long)]
        list: bool,
    },
}

/// Why a command could not produce a verdict.
enum Failure {
    Usage(String),
    Limit(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::ResourceLimit { .. } => Failure::Limit(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

type CmdResult = Result<bool, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn in_file(path: &Path, e: Error) -> Failure {
    match e {
        Error::ResourceLimit { .. } => Failure::Limit(e.to_string()),
        other => Failure::Usage(format!("{}: {other}", path.display())),
    }
}

fn load_tasks(path: &Path) -> Result<TaskSystem, Failure> {
    parse_task_system(&read(path)?).map_err(|e| in_file(path, e))
}

fn load_sequence(path: &Path, sys: &TaskSystem) -> Result<JobSequence, Failure> {
    let seq = parse_job_sequence(&read(path)?, sys.len()).map_err(|e| in_file(path, e))?;
    sys.check_sequence(&seq).map_err(|e| in_file(path, e))?;
    Ok(seq)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn parse_alg(alg: &str, sys: &TaskSystem) -> Result<Policy, Failure> {
    if alg == "edf" {
        return Ok(Policy::Edf);
    }
    if let Some(order) = alg.strip_prefix("fp:") {
        let order: Vec<usize> = order
            .split(',')
            .map(|s| match s.trim().parse::<usize>() {
                Ok(i) if i >= 1 => Ok(i - 1),
                _ => Err(Failure::Usage(format!("bad priority order `{order}`: expected 1-based task indices"))),
            })
            .collect::<Result<_, _>>()?;
        return Ok(Policy::fixed_priority(order, sys.len())?);
    }
    if let Some(file) = alg.strip_prefix("strategy:") {
        let path = Path::new(file);
        let strategy = parse_strategy(&read(path)?, sys).map_err(|e| in_file(path, e))?;
        return Ok(Policy::Strategy(strategy));
    }
    Err(Failure::Usage(format!("unknown algorithm `{alg}` (expected edf, fp:<order> or strategy:<file>)")))
}

fn finish(report: &RunReport, out: &ReportArg, started: Instant) -> Result<(), Failure> {
    println!("time: {:.3} ms", started.elapsed().as_secs_f64() * 1e3);
    if let Some(path) = &out.report {
        report
            .write_to(path)
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn record_verdict(report: &mut RunReport, v: &Verdict, witness_path: Option<&Path>) {
    if let (Some(w), Some(path)) = (&v.witness, witness_path) {
        report.witness = Some(path.display().to_string());
        report.field("witness_length", w.len());
    }
    if let Some(t) = v.failure_time {
        report.field("failure_time", t);
    }
    report
        .field("adversary_states", v.stats.adversary_states)
        .field("scheduler_states", v.stats.scheduler_states)
        .field("depth", v.stats.depth);
}

fn print_verdict(name: &str, v: &Verdict, witness_path: &Path) {
    if let Some(w) = &v.witness {
        println!(
            "witness: {w} (length {}, first deadline miss at time {}) written to {}",
            w.len(),
            v.failure_time.unwrap_or(0),
            witness_path.display()
        );
    }
    println!(
        "{name}: {} {} adversary states, {} scheduler states, depth {}",
        if name == "savitch" { "expanded" } else { "explored" },
        v.stats.adversary_states,
        v.stats.scheduler_states,
        v.stats.depth
    );
}

fn feasible(
    tasks: &Path,
    antichain: bool,
    savitch: bool,
    horizon: Option<usize>,
    witness: Option<PathBuf>,
    search: SearchArgs,
    out: &ReportArg,
) -> CmdResult {
    let sys = load_tasks(tasks)?;
    let started = Instant::now();
    let mode = match (savitch, antichain) {
        (true, _) => "savitch",
        (false, true) => "antichain",
        (false, false) => "bfs",
    };
    let v = if savitch {
        savitch_feasible_with(&sys, &SavitchOptions::default())?
    } else {
        is_feasible_with(
            &sys,
            &FeasibilityOptions {
                antichain,
                max_states: search.max_states,
                parallelism: search.parallelism(),
            },
        )?
    };
    let witness_path = witness.unwrap_or_else(|| with_suffix(tasks, ".witness"));
    let mut report = RunReport::new("feasible", &write_task_system(&sys));
    report.verdict = if v.feasible { "feasible" } else { "infeasible" };
    report.field("mode", mode);
    println!("{}: {}", tasks.display(), report.verdict);
    if let Some(w) = &v.witness {
        write(&witness_path, &write_job_sequence(w))?;
    }
    print_verdict(mode, &v, &witness_path);
    record_verdict(&mut report, &v, Some(&witness_path));

    if let (true, Some(h)) = (v.feasible, horizon) {
        let mut checked = 0usize;
        for seq in enumerate_legal_sequences(&sys, h) {
            checked += 1;
            if !has_feasible_schedule(&jobs_of(&sys, &seq), sys.processors())? {
                return Err(Error::Internal(format!("sequence {seq} has no feasible schedule")).into());
            }
        }
        println!("spot check: all {checked} legal sequences up to length {h} have feasible schedules");
        report.field("spot_check_horizon", h).field("spot_check_sequences", checked);
    }
    finish(&report, out, started)?;
    Ok(v.feasible)
}

fn online_feasible(tasks: &Path, iterative: bool, search: SearchArgs, out: &ReportArg) -> CmdResult {
    let sys = load_tasks(tasks)?;
    let started = Instant::now();
    let opts = OnlineOptions {
        max_states: search.max_states,
        mode: if iterative { AttractorMode::Iterative } else { AttractorMode::Backward },
        parallelism: search.parallelism(),
    };
    let region = attractor_with(&sys, &opts)?;
    let holds = !region.contains_initial();
    let (adv, sched) = region.reachable();
    let mut report = RunReport::new("online-feasible", &write_task_system(&sys));
    report.verdict = if holds { "online-feasible" } else { "not-online-feasible" };
    println!("{}: {}", tasks.display(), report.verdict);
    println!(
        "game: {adv} adversary and {sched} scheduler positions reachable, {} in the adversary's winning region, {} iterations",
        region.len(),
        region.iterations()
    );
    report
        .field("adversary_positions", adv)
        .field("scheduler_positions", sched)
        .field("winning_region", region.len())
        .field("iterations", region.iterations());
    finish(&report, out, started)?;
    Ok(holds)
}

fn schedulable(
    tasks: &Path,
    alg: &str,
    savitch: bool,
    witness: Option<PathBuf>,
    search: SearchArgs,
    out: &ReportArg,
) -> CmdResult {
    let sys = load_tasks(tasks)?;
    let policy = parse_alg(alg, &sys)?;
    let started = Instant::now();
    let v = if savitch {
        savitch_schedulable_with(&sys, &policy, &SavitchOptions::default())?
    } else {
        is_schedulable_with(
            &sys,
            &policy,
            &SchedulabilityOptions {
                max_states: search.max_states,
                parallelism: search.parallelism(),
            },
        )?
    };
    let witness_path = witness.unwrap_or_else(|| with_suffix(tasks, ".witness"));
    let instance = format!("{}# algorithm {policy}\n", write_task_system(&sys));
    let mut report = RunReport::new("schedulable", &instance);
    report.verdict = if v.feasible { "schedulable" } else { "not-schedulable" };
    report.field("algorithm", &policy);
    println!("{} under {policy}: {}", tasks.display(), report.verdict);
    if let Some(w) = &v.witness {
        write(&witness_path, &write_job_sequence(w))?;
    }
    print_verdict(if savitch { "savitch" } else { "bfs" }, &v, &witness_path);
    record_verdict(&mut report, &v, Some(&witness_path));
    finish(&report, out, started)?;
    Ok(v.feasible)
}

fn synthesize(tasks: &Path, output: Option<PathBuf>, search: SearchArgs, out: &ReportArg) -> CmdResult {
    let sys = load_tasks(tasks)?;
    let started = Instant::now();
    let opts = OnlineOptions {
        max_states: search.max_states,
        parallelism: search.parallelism(),
        ..OnlineOptions::default()
    };
    let mut report = RunReport::new("synthesize", &write_task_system(&sys));
    let holds = match synthesize_strategy_with(&sys, &opts) {
        Ok(strategy) => {
            let path = output.unwrap_or_else(|| with_suffix(tasks, ".strategy"));
            write(&path, &write_strategy(&strategy))?;
            report.verdict = "online-feasible";
            report.field("strategy", path.display()).field("entries", strategy.len());
            println!("{}: online-feasible", tasks.display());
            println!("strategy with {} entries written to {}", strategy.len(), path.display());
            true
        }
        Err(Error::NotOnlineFeasible) => {
            report.verdict = "not-online-feasible";
            println!("{}: not-online-feasible; no strategy exists", tasks.display());
            false
        }
        Err(e) => return Err(e.into()),
    };
    finish(&report, out, started)?;
    Ok(holds)
}

fn simulate_cmd(
    tasks: &Path,
    sequence: &Path,
    alg: &str,
    horizon: Option<usize>,
    trace: bool,
    out: &ReportArg,
) -> CmdResult {
    let sys = load_tasks(tasks)?;
    let seq = load_sequence(sequence, &sys)?;
    let policy = parse_alg(alg, &sys)?;
    let started = Instant::now();
    let sim = simulate(&sys, &seq, &policy, horizon)?;
    if trace {
        for (t, b) in sim.trace.iter().enumerate() {
            println!("{t:>4}  {b}");
        }
    }
    let instance = format!(
        "{}# algorithm {policy}\n{}",
        write_task_system(&sys),
        write_job_sequence(&seq)
    );
    let mut report = RunReport::new("simulate", &instance);
    report.field("algorithm", &policy).field("steps", sim.trace.len() - 1);
    let met = match sim.outcome {
        Outcome::Met => {
            report.verdict = "met";
            println!("{} under {policy}: all deadlines met", sequence.display());
            true
        }
        Outcome::Failure { time } => {
            report.verdict = "failure";
            report.field("failure_time", time);
            println!("{} under {policy}: deadline miss at time {time}", sequence.display());
            false
        }
    };
    finish(&report, out, started)?;
    Ok(met)
}

fn reconstruct(tasks: &Path, sequence: &Path, output: Option<PathBuf>, out: &ReportArg) -> CmdResult {
    let sys = load_tasks(tasks)?;
    let seq = load_sequence(sequence, &sys)?;
    let started = Instant::now();
    let instance = format!("{}{}", write_task_system(&sys), write_job_sequence(&seq));
    let mut report = RunReport::new("reconstruct", &instance);
    let ok = match reconstruct_schedule(&sys, &seq)? {
        Reconstruction::Feasible(schedule) => {
            report.verdict = "feasible";
            report.field("schedule_length", schedule.len());
            let text = write_schedule(&schedule);
            match &output {
                Some(path) => {
                    write(path, &text)?;
                    println!("feasible: schedule written to {}", path.display());
                }
                None => {
                    println!("feasible: schedule follows");
                    print!("{text}");
                }
            }
            true
        }
        Reconstruction::Infeasible { time } => {
            report.verdict = "infeasible";
            report.field("failure_time", time);
            println!("infeasible: every schedule misses a deadline by time {time}");
            false
        }
    };
    finish(&report, out, started)?;
    Ok(ok)
}

fn flow_check(jobs: &Path, processors: usize, out: &ReportArg) -> CmdResult {
    if processors == 0 {
        return Err(Failure::Usage("at least one processor is required".into()));
    }
    let set = parse_job_set(&read(jobs)?).map_err(|e| in_file(jobs, e))?;
    let started = Instant::now();
    let net = build_network(&set, processors);
    let flow = max_flow(&net);
    let ok = flow.value == net.total_demand();
    let instance = format!("processors {processors}\n{}", write_job_set(&set));
    let mut report = RunReport::new("flow-check", &instance);
    report.verdict = if ok { "feasible" } else { "infeasible" };
    report.field("flow_value", flow.value).field("demand", net.total_demand());
    println!(
        "{}: {} (maximum flow {} of total demand {})",
        jobs.display(),
        report.verdict,
        flow.value,
        net.total_demand()
    );
    finish(&report, out, started)?;
    Ok(ok)
}

fn round(jobs: &Path, schedule: &Path, processors: usize, output: Option<PathBuf>, out: &ReportArg) -> CmdResult {
    if processors == 0 {
        return Err(Failure::Usage("at least one processor is required".into()));
    }
    let set = parse_job_set(&read(jobs)?).map_err(|e| in_file(jobs, e))?;
    let w = parse_continuous_schedule(&read(schedule)?, set.len()).map_err(|e| in_file(schedule, e))?;
    let started = Instant::now();
    let instance = format!(
        "processors {processors}\n{}# schedule\n{}",
        write_job_set(&set),
        write_continuous_schedule(&w)
    );
    let mut report = RunReport::new("round", &instance);
    let ok = match continuous_to_discrete(&set, processors, &w) {
        Ok(discrete) => {
            report.verdict = "feasible";
            let text = write_job_schedule(&discrete);
            match &output {
                Some(path) => {
                    write(path, &text)?;
                    println!("rounded schedule written to {}", path.display());
                }
                None => print!("{text}"),
            }
            true
        }
        Err(Error::Continuous(v)) => {
            report.verdict = "infeasible";
            report.field("violation", &v);
            println!("{}: not a valid continuous schedule: {v}", schedule.display());
            false
        }
        Err(e) => return Err(e.into()),
    };
    finish(&report, out, started)?;
    Ok(ok)
}

fn oracle(cmd: OracleCommand) -> CmdResult {
    match cmd {
        OracleCommand::Online { tasks, depth } => {
            let sys = load_tasks(&tasks)?;
            let depth = match depth {
                Some(d) => d,
                None => reachable_configurations(&sys, 1_000_000)? + 1,
            };
            let holds = brute_force_online(&sys, depth)?;
            println!(
                "{}: {} (game-tree search to depth {depth})",
                tasks.display(),
                if holds { "online-feasible" } else { "not-online-feasible" }
            );
            Ok(holds)
        }
        OracleCommand::ValidStates { tasks, sequence, time } => {
            let sys = load_tasks(&tasks)?;
            let seq = load_sequence(&sequence, &sys)?;
            let states = brute_force_valid_states(&sys, &seq, time)?;
            for c in &states {
                let parts: Vec<String> = c.iter().map(u32::to_string).collect();
                println!("({})", parts.join(","));
            }
            println!("{} compute vectors at time {time}", states.len());
            Ok(!states.is_empty())
        }
        OracleCommand::Sequences { tasks, horizon, list } => {
            let sys = load_tasks(&tasks)?;
            let mut count = 0usize;
            for seq in enumerate_legal_sequences(&sys, horizon) {
                if list {
                    println!("{seq}");
                }
                count += 1;
            }
            println!("{count} legal sequences up to length {horizon}");
            Ok(true)
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Feasible {
            tasks,
            antichain,
            savitch,
            horizon,
            witness,
            search,
            out,
        } => feasible(&tasks, antichain, savitch, horizon, witness, search, &out),
        Command::OnlineFeasible {
            tasks,
            iterative,
            search,
            out,
        } => online_feasible(&tasks, iterative, search, &out),
        Command::Schedulable {
            tasks,
            alg,
            savitch,
            witness,
            search,
            out,
        } => schedulable(&tasks, &alg, savitch, witness, search, &out),
        Command::Synthesize {
            tasks,
            output,
            search,
            out,
        } => synthesize(&tasks, output, search, &out),
        Command::Simulate {
            tasks,
            sequence,
            alg,
            horizon,
            trace,
            out,
        } => simulate_cmd(&tasks, &sequence, &alg, horizon, trace, &out),
        Command::Reconstruct {
            tasks,
            sequence,
            output,
            out,
        } => reconstruct(&tasks, &sequence, output, &out),
        Command::FlowCheck { jobs, processors, out } => flow_check(&jobs, processors, &out),
        Command::Round {
            jobs,
            schedule,
            processors,
            output,
            out,
        } => round(&jobs, &schedule, processors, output, &out),
        Command::Oracle(cmd) => oracle(cmd),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Limit(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
