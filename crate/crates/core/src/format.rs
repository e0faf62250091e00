//! Line-oriented text formats for task systems, job sequences, schedules,
//! strategies, job sets and continuous schedules.
//!
//! Every reader accepts `#` comments and blank lines and reports syntax
//! errors with 1-based line and column numbers. Every writer emits a
//! canonical form that the matching reader accepts.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_rational::Rational64;

use crate::error::{Error, Result};
use crate::flow::{validate_jobs, ContinuousSchedule, Job, JobSchedule};
use crate::online::Strategy;
use crate::task_model::{
    BacklogConfig, JobSequence, ReleaseVector, Schedule, ScheduleStep, Task, TaskState, TaskSystem,
};

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

/// Non-blank lines with comments removed, as `(line number, text)`.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(n, raw)| {
        let line = raw.split('#').next().unwrap_or("");
        (!line.trim().is_empty()).then_some((n + 1, line))
    })
}

/// Whitespace-separated tokens with their 1-based columns.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        match (ch.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push((s, &line[s..i]));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, &line[s..]));
    }
    out.into_iter().map(|(s, t)| (line[..s].chars().count() + 1, t)).collect()
}

fn number<T: std::str::FromStr>(line: usize, (column, tok): (usize, &str), what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| syntax(line, column, format!("expected {what}, found `{tok}`")))
}

fn arity(line: usize, toks: &[(usize, &str)], expected: usize, usage: &str) -> Result<()> {
    if toks.len() == expected {
        return Ok(());
    }
    let column = toks.get(expected).or(toks.last()).map_or(1, |t| t.0);
    Err(syntax(line, column, format!("expected `{usage}`")))
}

/// Parses `processors <m>` and `task <C> <D> <P>` lines.
pub fn parse_task_system(text: &str) -> Result<TaskSystem> {
    let mut processors: Option<usize> = None;
    let mut tasks = Vec::new();
    let mut last_line = 0;
    for (line, content) in content_lines(text) {
        last_line = line;
        let toks = tokens(content);
        match toks[0].1 {
            "processors" => {
                arity(line, &toks, 2, "processors <m>")?;
                if processors.is_some() {
                    return Err(syntax(line, toks[0].0, "duplicate `processors` line"));
                }
                processors = Some(number(line, toks[1], "a processor count")?);
            }
            "task" => {
                arity(line, &toks, 4, "task <C> <D> <P>")?;
                let c = number(line, toks[1], "a compute time")?;
                let d = number(line, toks[2], "a relative deadline")?;
                let p = number(line, toks[3], "a period")?;
                tasks.push(Task::new(c, d, p));
            }
            other => {
                return Err(syntax(
                    line,
                    toks[0].0,
                    format!("unknown keyword `{other}` (expected `processors` or `task`)"),
                ))
            }
        }
    }
    let processors = processors.ok_or_else(|| syntax(last_line.max(1), 1, "missing `processors` line"))?;
    TaskSystem::new(tasks, processors)
}

pub fn write_task_system(sys: &TaskSystem) -> String {
    let mut out = format!("processors {}\n", sys.processors());
    for t in sys.tasks() {
        let _ = writeln!(out, "task {} {} {}", t.wcet, t.deadline, t.period);
    }
    out
}

/// Parses `<t> <task> <compute>` lines (1-based task indices, times
/// nondecreasing). Legality against a task system is checked separately.
pub fn parse_job_sequence(text: &str, tasks: usize) -> Result<JobSequence> {
    let mut seq = JobSequence::empty(tasks);
    let mut prev: Option<(usize, usize)> = None;
    for (line, content) in content_lines(text) {
        let toks = tokens(content);
        arity(line, &toks, 3, "<t> <task> <compute>")?;
        let t: usize = number(line, toks[0], "a release time")?;
        let task: usize = number(line, toks[1], "a task index")?;
        let c: u32 = number(line, toks[2], "a compute time")?;
        if task == 0 || task > tasks {
            return Err(syntax(line, toks[1].0, format!("task index must be in 1..={tasks}")));
        }
        if c == 0 {
            return Err(syntax(line, toks[2].0, "compute time must be positive"));
        }
        match prev {
            Some((pt, _)) if t < pt => {
                return Err(syntax(line, toks[0].0, format!("time {t} is earlier than {pt}")));
            }
            Some((pt, pi)) if t == pt && task <= pi => {
                return Err(syntax(line, toks[1].0, format!("task {task} repeated or out of order at time {t}")));
            }
            _ => {}
        }
        prev = Some((t, task));
        seq.set(t, task - 1, c);
    }
    Ok(seq)
}

pub fn write_job_sequence(seq: &JobSequence) -> String {
    let mut out = String::new();
    for (t, i, c) in seq.jobs() {
        let _ = writeln!(out, "{t} {} {c}", i + 1);
    }
    out
}

/// Parses `<t> <task…>` lines; slots not mentioned are idle.
pub fn parse_schedule(text: &str, tasks: usize) -> Result<Schedule> {
    let mut steps: Vec<ScheduleStep> = Vec::new();
    let mut prev: Option<usize> = None;
    for (line, content) in content_lines(text) {
        let toks = tokens(content);
        let t: usize = number(line, toks[0], "a time")?;
        if prev.is_some_and(|p| t <= p) {
            return Err(syntax(line, toks[0].0, "times must be strictly increasing"));
        }
        prev = Some(t);
        let mut bits = 0u64;
        for &tok in &toks[1..] {
            let i: usize = number(line, tok, "a task index")?;
            if i == 0 || i > tasks {
                return Err(syntax(line, tok.0, format!("task index must be in 1..={tasks}")));
            }
            bits |= 1 << (i - 1);
        }
        steps.resize(t, ScheduleStep::EMPTY);
        steps.push(ScheduleStep::from_bits(bits));
    }
    Ok(Schedule::new(steps).trimmed())
}

/// One line per slot up to the last busy one.
pub fn write_schedule(schedule: &Schedule) -> String {
    let mut out = String::new();
    for (t, s) in schedule.steps().iter().enumerate() {
        let _ = write!(out, "{t}");
        for i in s.tasks() {
            let _ = write!(out, " {}", i + 1);
        }
        out.push('\n');
    }
    out
}

/// Character cursor for the bracketed strategy syntax.
struct Cursor<'a> {
    line: usize,
    chars: Vec<char>,
    pos: usize,
    _src: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(line: usize, src: &'a str) -> Self {
        Cursor {
            line,
            chars: src.chars().collect(),
            pos: 0,
            _src: src,
        }
    }

    fn column(&self) -> usize {
        self.pos + 1
    }

    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn error(&self, message: impl Into<String>) -> Error {
        syntax(self.line, self.column(), message)
    }

    fn expect(&mut self, token: &str) -> Result<()> {
        self.skip_ws();
        let end = self.pos + token.chars().count();
        if self.chars.get(self.pos..end).is_some_and(|s| s.iter().copied().eq(token.chars())) {
            self.pos = end;
            Ok(())
        } else {
            Err(self.error(format!("expected `{token}`")))
        }
    }

    fn number(&mut self) -> Result<u32> {
        self.skip_ws();
        let start = self.pos;
        while self.chars.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        let digits: String = self.chars[start..self.pos].iter().collect();
        digits.parse().map_err(|_| {
            self.pos = start;
            self.error("expected a number")
        })
    }

    /// `(` numbers separated by `,` `)`, possibly empty.
    fn list(&mut self, open: &str, close: &str) -> Result<Vec<u32>> {
        self.expect(open)?;
        let mut values = Vec::new();
        if self.peek() == close.chars().next() {
            self.expect(close)?;
            return Ok(values);
        }
        loop {
            values.push(self.number()?);
            if self.peek() == Some(',') {
                self.pos += 1;
            } else {
                self.expect(close)?;
                return Ok(values);
            }
        }
    }

    fn at_end(&mut self) -> bool {
        self.peek().is_none()
    }
}

/// Parses a `strategy` file: a header line, then
/// `(c,d,p) … | (k_1,…,k_n) -> {i,…}` entries with 1-based task indices.
pub fn parse_strategy(text: &str, sys: &TaskSystem) -> Result<Strategy> {
    let n = sys.len();
    let mut lines = content_lines(text);
    match lines.next() {
        Some((line, content)) => {
            let toks = tokens(content);
            if toks.len() != 1 || toks[0].1 != "strategy" {
                return Err(syntax(line, toks[0].0, "expected the header `strategy`"));
            }
        }
        None => return Err(syntax(1, 1, "expected the header `strategy`")),
    }
    let mut strategy = Strategy::new();
    for (line, content) in lines {
        let mut cur = Cursor::new(line, content);
        let mut states = Vec::with_capacity(n);
        for _ in 0..n {
            let column = {
                cur.skip_ws();
                cur.column()
            };
            let triple = cur.list("(", ")")?;
            if triple.len() != 3 {
                return Err(syntax(line, column, "expected a `(c,d,p)` triple"));
            }
            states.push(TaskState::new(triple[0], triple[1], triple[2]));
        }
        cur.expect("|")?;
        cur.skip_ws();
        let column = cur.column();
        let release = cur.list("(", ")")?;
        if release.len() != n {
            return Err(syntax(line, column, format!("release vector needs {n} entries")));
        }
        cur.expect("->")?;
        cur.skip_ws();
        let column = cur.column();
        let set = cur.list("{", "}")?;
        if !cur.at_end() {
            return Err(cur.error("unexpected trailing text"));
        }
        if set.iter().any(|&i| i == 0 || i as usize > n) {
            return Err(syntax(line, column, format!("task index must be in 1..={n}")));
        }
        let step = ScheduleStep::from_tasks(set.iter().map(|&i| i as usize - 1));
        if step.len() > sys.processors() {
            return Err(syntax(
                line,
                column,
                format!("{} tasks scheduled on {} processors", step.len(), sys.processors()),
            ));
        }
        let config = BacklogConfig::new(states);
        if !config.within_bounds(sys) {
            return Err(syntax(line, 1, "configuration exceeds the task parameters"));
        }
        strategy.insert(config, ReleaseVector::new(release), step);
    }
    Ok(strategy)
}

/// Canonical form: entries in ascending (configuration, release) order.
pub fn write_strategy(strategy: &Strategy) -> String {
    let mut out = String::from("strategy\n");
    for (config, release, step) in strategy.iter() {
        let _ = writeln!(out, "{config} | {release} -> {step}");
    }
    out
}

/// Parses `<r> <c> <d>` lines; jobs are numbered from 1 in file order.
pub fn parse_job_set(text: &str) -> Result<Vec<Job>> {
    let mut jobs = Vec::new();
    for (line, content) in content_lines(text) {
        let toks = tokens(content);
        arity(line, &toks, 3, "<r> <c> <d>")?;
        jobs.push(Job::new(
            number(line, toks[0], "a release time")?,
            number(line, toks[1], "a compute time")?,
            number(line, toks[2], "an absolute deadline")?,
        ));
    }
    validate_jobs(&jobs)?;
    Ok(jobs)
}

pub fn write_job_set(jobs: &[Job]) -> String {
    jobs.iter()
        .map(|j| format!("{} {} {}\n", j.release, j.compute, j.deadline))
        .collect()
}

fn rational(line: usize, (column, tok): (usize, &str)) -> Result<Rational64> {
    let bad = || syntax(line, column, format!("expected `<num>/<den>`, found `{tok}`"));
    let (num, den) = match tok.split_once('/') {
        Some((n, d)) => (n.parse::<i64>().map_err(|_| bad())?, d.parse::<i64>().map_err(|_| bad())?),
        None => (tok.parse::<i64>().map_err(|_| bad())?, 1),
    };
    if den == 0 {
        return Err(syntax(line, column, "zero denominator"));
    }
    Ok(Rational64::new(num, den))
}

/// Parses `<job> <t> <num>/<den>` lines (1-based job indices).
pub fn parse_continuous_schedule(text: &str, jobs: usize) -> Result<ContinuousSchedule> {
    let mut seen: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut w = ContinuousSchedule::new();
    for (line, content) in content_lines(text) {
        let toks = tokens(content);
        arity(line, &toks, 3, "<job> <t> <num>/<den>")?;
        let job: usize = number(line, toks[0], "a job index")?;
        if job == 0 || job > jobs {
            return Err(syntax(line, toks[0].0, format!("job index must be in 1..={jobs}")));
        }
        let t: usize = number(line, toks[1], "a slot")?;
        let amount = rational(line, toks[2])?;
        if let Some(first) = seen.insert((job, t), line) {
            return Err(syntax(line, toks[0].0, format!("entry for job {job}, slot {t} already given on line {first}")));
        }
        w.set(job - 1, t, amount);
    }
    Ok(w)
}

pub fn write_continuous_schedule(w: &ContinuousSchedule) -> String {
    w.iter()
        .map(|((j, t), v)| format!("{} {t} {}/{}\n", j + 1, v.numer(), v.denom()))
        .collect()
}

/// `<t> <job…>` per slot with 1-based job indices.
pub fn write_job_schedule(s: &JobSchedule) -> String {
    let mut out = String::new();
    for (t, run) in s.slots().iter().enumerate() {
        let _ = write!(out, "{t}");
        for j in run {
            let _ = write!(out, " {}", j + 1);
        }
        out.push('\n');
    }
    out
}
