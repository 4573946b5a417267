//! Event-driven preemptive fixed-priority simulation with per-job random modes.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

use crate::rng::{seeded, SimRng};
use crate::taskmodel::{Mode, ModelError, Role, TaskId, TaskSet, TaskSpec, Time};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("horizon must cover at least one hyperperiod")]
    EmptyHorizon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JobRecord {
    pub task_id: TaskId,
    pub job_index: u64,
    pub release: Time,
    pub mode: Mode,
    pub exec_demand: Time,
    pub completion: Time,
    pub response: Time,
}

/// A maximal interval during which one job held the processor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub task_id: TaskId,
    pub job_index: u64,
    pub start: Time,
    pub end: Time,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub taskset: TaskSet,
    pub horizon: Time,
    /// Ordered by release, then priority.
    pub jobs: Vec<JobRecord>,
    pub seed: u64,
    /// Execution segments. Empty for traces loaded from disk.
    pub segments: Vec<Segment>,
}

impl Trace {
    /// Rebuild a trace from stored job records, e.g. after reading a CSV.
    pub fn from_jobs(taskset: TaskSet, horizon: Time, seed: u64, mut jobs: Vec<JobRecord>) -> Self {
        let prio = |id: TaskId| taskset.task(id).map_or(u32::MAX, |t| t.priority);
        jobs.sort_by_key(|j| (j.release, prio(j.task_id)));
        Trace { taskset, horizon, jobs, seed, segments: Vec::new() }
    }

    pub fn jobs_of(&self, id: TaskId) -> impl Iterator<Item = &JobRecord> {
        self.jobs.iter().filter(move |j| j.task_id == id)
    }

    pub fn observer_jobs(&self) -> impl Iterator<Item = &JobRecord> {
        self.jobs_of(self.taskset.observer().id)
    }

    pub fn deadline_misses(&self) -> usize {
        self.jobs
            .iter()
            .filter(|j| {
                self.taskset
                    .task(j.task_id)
                    .is_ok_and(|t| j.response > t.deadline)
            })
            .count()
    }
}

struct Pending {
    record: usize,
    remaining: Time,
}

/// Simulate `hyperperiods` hyperperiods from a synchronous release at t = 0.
/// Each job is critical with its task's `critical_rate`, drawn from a
/// generator seeded with `seed`.
pub fn simulate(ts: &TaskSet, hyperperiods: u64, seed: u64) -> Result<Trace, SimError> {
    if hyperperiods == 0 {
        return Err(SimError::EmptyHorizon);
    }
    let horizon = ts
        .hyperperiod()?
        .checked_mul(hyperperiods)
        .ok_or(ModelError::HyperperiodOverflow)?;
    Ok(simulate_with(ts, horizon, seed, |task, _, rng| {
        if rng.gen_bool(task.critical_rate) {
            Mode::Critical
        } else {
            Mode::Typical
        }
    }))
}

/// Simulate up to `horizon` with modes chosen by `mode_of(task, job_index, rng)`.
///
/// Jobs are released while `release < horizon`; jobs still pending at the
/// horizon run to completion. A job that overruns its deadline keeps running
/// and the next release still happens on period.
pub fn simulate_with<F>(ts: &TaskSet, horizon: Time, seed: u64, mut mode_of: F) -> Trace
where
    F: FnMut(&TaskSpec, u64, &mut SimRng) -> Mode,
{
    let tasks = ts.tasks();
    let mut rng = seeded(seed);
    let mut next_release: Vec<Time> = alloc::vec![0; tasks.len()];
    let mut job_count: Vec<u64> = alloc::vec![0; tasks.len()];
    let mut queues: Vec<VecDeque<Pending>> = tasks.iter().map(|_| VecDeque::new()).collect();
    let mut jobs: Vec<JobRecord> = Vec::new();
    let mut segments: Vec<Segment> = Vec::new();
    let mut t: Time = 0;

    loop {
        // releases at t, in priority order
        for (i, task) in tasks.iter().enumerate() {
            if next_release[i] == t && t < horizon {
                let mode = mode_of(task, job_count[i], &mut rng);
                let demand = task.wcet(mode);
                queues[i].push_back(Pending { record: jobs.len(), remaining: demand });
                jobs.push(JobRecord {
                    task_id: task.id,
                    job_index: job_count[i],
                    release: t,
                    mode,
                    exec_demand: demand,
                    completion: 0,
                    response: 0,
                });
                job_count[i] += 1;
                next_release[i] += task.period;
            }
        }

        let upcoming = next_release.iter().copied().filter(|&r| r < horizon).min();
        let Some(run) = queues.iter().position(|q| !q.is_empty()) else {
            match upcoming {
                Some(r) => {
                    t = r;
                    continue;
                }
                None => break,
            }
        };

        let head = queues[run].front_mut().unwrap();
        let until = upcoming.map_or(t + head.remaining, |r| r.min(t + head.remaining));
        let job_index = jobs[head.record].job_index;
        match segments.last_mut() {
            Some(s) if s.end == t && s.task_id == tasks[run].id && s.job_index == job_index => s.end = until,
            _ => segments.push(Segment { task_id: tasks[run].id, job_index, start: t, end: until }),
        }
        head.remaining -= until - t;
        t = until;
        if head.remaining == 0 {
            let done = queues[run].pop_front().unwrap();
            let rec = &mut jobs[done.record];
            rec.completion = t;
            rec.response = t - rec.release;
        }
    }

    Trace { taskset: ts.clone(), horizon, jobs, seed, segments }
}

/// Observer response times in release order.
pub fn observer_sequence(tr: &Trace) -> Vec<Time> {
    tr.observer_jobs().map(|j| j.response).collect()
}

/// An observer job together with the victim jobs released inside its
/// response window `[release, completion)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedSample {
    pub observer_job: JobRecord,
    pub victim_jobs: Vec<JobRecord>,
    /// Critical iff any victim job in the window is critical.
    pub window_label: Mode,
    /// Set when the window contains no victim release.
    pub empty_window: bool,
}

pub fn align(tr: &Trace) -> Vec<AlignedSample> {
    let victim: Vec<&JobRecord> = tr.jobs_of(tr.taskset.victim().id).collect();
    tr.observer_jobs()
        .map(|o| {
            let lo = victim.partition_point(|v| v.release < o.release);
            let hi = victim.partition_point(|v| v.release < o.completion);
            let window: Vec<JobRecord> = victim[lo..hi].iter().map(|v| **v).collect();
            let critical = window.iter().any(|v| v.mode == Mode::Critical);
            AlignedSample {
                observer_job: *o,
                empty_window: window.is_empty(),
                victim_jobs: window,
                window_label: if critical { Mode::Critical } else { Mode::Typical },
            }
        })
        .collect()
}

/// Jobs of `role` tasks, convenience for tests and reports.
pub fn jobs_with_role(tr: &Trace, role: Role) -> impl Iterator<Item = &JobRecord> {
    tr.jobs
        .iter()
        .filter(move |j| tr.taskset.task(j.task_id).is_ok_and(|t| t.role == role))
}
