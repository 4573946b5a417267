//! Response-time analysis for dual-mode fixed-priority tasksets.
//!
//! Two bounds are provided: the coarse window bound, which charges every
//! higher-priority task for a whole period of the task under analysis, and the
//! classic fixed-point recurrence
//!
//! ```text
//! R(k+1) = B + C + Σ_{j ∈ hp} ⌈R(k) / T_j⌉ · C_j,   R(0) = C
//! ```
//!
//! evaluated with every WCET at its critical value to give `r_max`.
//!
//! The same recurrence with typical WCETs only bounds the job released at the
//! critical instant; later jobs of the task can finish sooner. `r_min` is
//! therefore the smallest response in the all-typical synchronous schedule
//! over one hyperperiod (shorter executions never delay anyone under
//! preemptive fixed priorities), falling back to the phase-free best-case
//! recurrence when the hyperperiod is too long to enumerate.

use alloc::vec::Vec;

use num_bigint::BigUint;
use thiserror::Error;

use crate::simulator::simulate_with;
use crate::taskmodel::{Mode, ModelError, TaskId, TaskSet, TaskSpec, Time};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RtaError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("observer is unschedulable (r_max {r_max} > deadline {deadline})")]
    ObserverUnschedulable { r_max: Time, deadline: Time },
}

/// Per-task execution mode used by the single-scenario analyses.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModeAssignment {
    default: Mode,
    overrides: Vec<(TaskId, Mode)>,
}

impl ModeAssignment {
    pub fn all(mode: Mode) -> Self {
        ModeAssignment { default: mode, overrides: Vec::new() }
    }

    pub fn with(mut self, id: TaskId, mode: Mode) -> Self {
        self.overrides.retain(|(t, _)| *t != id);
        self.overrides.push((id, mode));
        self
    }

    pub fn mode_of(&self, id: TaskId) -> Mode {
        self.overrides
            .iter()
            .find(|(t, _)| *t == id)
            .map_or(self.default, |(_, m)| *m)
    }

    fn wcet(&self, task: &TaskSpec) -> Time {
        task.wcet(self.mode_of(task.id))
    }
}

/// B_i: the largest critical WCET among lower-priority tasks, 0 for the
/// lowest-priority task.
pub fn blocking(ts: &TaskSet, id: TaskId) -> Result<Time, RtaError> {
    Ok(ts
        .lower_priority(id)?
        .map(|t| t.wcet_critical)
        .max()
        .unwrap_or(0))
}

fn applied_blocking(ts: &TaskSet, id: TaskId) -> Result<Time, RtaError> {
    if ts.blocking_enabled() {
        blocking(ts, id)
    } else {
        Ok(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowBound {
    pub computation: Time,
    pub blocking: Time,
    pub interference: Time,
}

impl WindowBound {
    pub fn response(&self) -> Time {
        self.computation + self.blocking + self.interference
    }
}

/// Window bound: I_i = Σ_{h ∈ hp(i)} ⌈T_i / T_h⌉ · C_h, response C_i + B_i + I_i.
pub fn window_interference_bound(
    ts: &TaskSet,
    id: TaskId,
    modes: &ModeAssignment,
) -> Result<WindowBound, RtaError> {
    let task = ts.task(id)?;
    let interference = ts
        .higher_priority(id)?
        .map(|h| task.period.div_ceil(h.period) * modes.wcet(h))
        .sum();
    Ok(WindowBound {
        computation: modes.wcet(task),
        blocking: applied_blocking(ts, id)?,
        interference,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedPoint {
    /// Converged response time, or the first iterate that exceeded the
    /// deadline when `schedulable` is false.
    pub response: Time,
    pub schedulable: bool,
    pub iterations: u32,
}

/// Iterate the recurrence from R(0) = `wcet` until it stabilises or exceeds
/// `deadline`. `hp` lists (period, wcet) of the higher-priority tasks.
pub fn fixed_point(wcet: Time, blocking: Time, deadline: Time, hp: &[(Time, Time)]) -> FixedPoint {
    let mut r = wcet;
    let mut iterations = 0;
    loop {
        if r > deadline {
            return FixedPoint { response: r, schedulable: false, iterations };
        }
        let next = blocking + wcet + hp.iter().map(|&(t, c)| r.div_ceil(t) * c).sum::<Time>();
        iterations += 1;
        if next == r {
            return FixedPoint { response: r, schedulable: true, iterations };
        }
        r = next;
    }
}

pub fn response_time_fixed_point(
    ts: &TaskSet,
    id: TaskId,
    modes: &ModeAssignment,
) -> Result<FixedPoint, RtaError> {
    let task = ts.task(id)?;
    let hp: Vec<(Time, Time)> = ts
        .higher_priority(id)?
        .map(|h| (h.period, modes.wcet(h)))
        .collect();
    Ok(fixed_point(
        modes.wcet(task),
        applied_blocking(ts, id)?,
        task.deadline,
        &hp,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RtaResult {
    pub task_id: TaskId,
    pub r_min: Time,
    pub r_max: Time,
    pub schedulable: bool,
    pub iterations: u32,
}

pub fn r_min_max(ts: &TaskSet, id: TaskId) -> Result<RtaResult, RtaError> {
    let worst = response_time_fixed_point(ts, id, &ModeAssignment::all(Mode::Critical))?;
    let best = match best_case_synchronous(ts, id)? {
        Some(r) => r,
        None => best_case_any_phase(ts, id)?,
    };
    Ok(RtaResult {
        task_id: id,
        r_min: best.min(worst.response),
        r_max: worst.response,
        schedulable: worst.schedulable,
        iterations: worst.iterations,
    })
}

/// Jobs per hyperperiod beyond which `r_min` skips the exact enumeration.
pub const EXACT_BEST_CASE_JOB_LIMIT: u64 = 1 << 20;

/// Typical-WCET fixed point without blocking: the response of the job
/// released together with every higher-priority task.
pub fn critical_instant_typical(ts: &TaskSet, id: TaskId) -> Result<FixedPoint, RtaError> {
    let task = ts.task(id)?;
    let hp: Vec<(Time, Time)> = ts
        .higher_priority(id)?
        .map(|h| (h.period, h.wcet_typical))
        .collect();
    Ok(fixed_point(task.wcet_typical, 0, task.deadline, &hp))
}

/// Smallest response of `id` over the first hyperperiod of the all-typical
/// synchronous schedule, or `None` when that hyperperiod holds more than
/// [`EXACT_BEST_CASE_JOB_LIMIT`] jobs.
pub fn best_case_synchronous(ts: &TaskSet, id: TaskId) -> Result<Option<Time>, RtaError> {
    ts.task(id)?;
    let h = match ts.hyperperiod() {
        Ok(h) => h,
        Err(ModelError::HyperperiodOverflow) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let jobs: u64 = ts.tasks().iter().map(|t| h / t.period).sum();
    if jobs > EXACT_BEST_CASE_JOB_LIMIT {
        return Ok(None);
    }
    let tr = simulate_with(ts, h, 0, |_, _, _| Mode::Typical);
    Ok(tr.jobs_of(id).map(|j| j.response).min())
}

/// Best-case response under arbitrary release phasing:
/// `R = C + Σ_{j ∈ hp} max(0, ⌈R / T_j⌉ − 1) · C_j`, iterated downwards
/// from the typical critical-instant response.
pub fn best_case_any_phase(ts: &TaskSet, id: TaskId) -> Result<Time, RtaError> {
    let task = ts.task(id)?;
    let hp: Vec<(Time, Time)> = ts
        .higher_priority(id)?
        .map(|h| (h.period, h.wcet_typical))
        .collect();
    let mut r = critical_instant_typical(ts, id)?.response;
    loop {
        let next = task.wcet_typical
            + hp.iter().map(|&(t, c)| r.div_ceil(t).saturating_sub(1) * c).sum::<Time>();
        if next >= r {
            return Ok(r);
        }
        r = next;
    }
}

/// `r_min_max` for every task, in priority order.
pub fn analyze(ts: &TaskSet) -> Result<Vec<RtaResult>, RtaError> {
    ts.tasks().iter().map(|t| r_min_max(ts, t.id)).collect()
}

pub fn is_schedulable(ts: &TaskSet) -> bool {
    analyze(ts).is_ok_and(|rs| rs.iter().all(|r| r.schedulable))
}

/// Σ over dual-mode tasks h in hp(observer) of ⌈R_o^max / T_h⌉.
pub fn combination_exponent(ts: &TaskSet) -> Result<u64, RtaError> {
    let observer = ts.observer();
    let res = r_min_max(ts, observer.id)?;
    if !res.schedulable {
        return Err(RtaError::ObserverUnschedulable {
            r_max: res.r_max,
            deadline: observer.deadline,
        });
    }
    Ok(ts
        .higher_priority(observer.id)?
        .filter(|h| h.is_dual_mode())
        .map(|h| res.r_max.div_ceil(h.period))
        .sum())
}

/// Number of distinct typical/critical invocation patterns of the
/// higher-priority tasks that can fall inside one observer response window.
pub fn combination_count(ts: &TaskSet) -> Result<BigUint, RtaError> {
    Ok(BigUint::from(1u8) << combination_exponent(ts)?)
}
