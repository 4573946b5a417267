//! Dual-mode periodic tasks and random taskset generation.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

/// Integer simulator time. One unit corresponds to one millisecond at the
/// scale used by the synthetic experiments.
pub type Time = u64;

pub type TaskId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Role {
    Victim,
    Observer,
    Other,
}

/// Execution mode of a single job.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Mode {
    #[default]
    Typical,
    Critical,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Typical => "typical",
            Mode::Critical => "critical",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        match s.trim() {
            "typical" | "Typical" | "T" | "t" => Some(Mode::Typical),
            "critical" | "Critical" | "C" | "c" => Some(Mode::Critical),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("task {id}: {reason}")]
    InvalidTask { id: TaskId, reason: &'static str },
    #[error("duplicate task id {0}")]
    DuplicateId(TaskId),
    #[error("duplicate priority {0}")]
    DuplicatePriority(u32),
    #[error("taskset needs exactly one {0:?} task, found {1}")]
    RoleCount(Role, usize),
    #[error("observer priority must be strictly lower than the victim's")]
    ObserverNotLower,
    #[error("unknown task id {0}")]
    UnknownTask(TaskId),
    #[error("hyperperiod overflows 64-bit time")]
    HyperperiodOverflow,
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("no divisor of the hyperperiod {hyperperiod} lies in [{lo}, {hi}]")]
    NoPeriodInRange { hyperperiod: Time, lo: Time, hi: Time },
    #[error("taskset generation gave up after {0} attempts")]
    GenerationFailed(usize),
}

/// Static parameters of one periodic task. Lower `priority` numbers run first.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TaskSpec {
    pub id: TaskId,
    pub period: Time,
    pub deadline: Time,
    pub wcet_typical: Time,
    pub wcet_critical: Time,
    pub priority: u32,
    pub critical_rate: f64,
    pub role: Role,
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "Option::is_none")
    )]
    pub name: Option<String>,
}

impl TaskSpec {
    /// Implicit-deadline task.
    pub fn new(
        id: TaskId,
        period: Time,
        wcet_typical: Time,
        wcet_critical: Time,
        priority: u32,
        critical_rate: f64,
        role: Role,
    ) -> Self {
        TaskSpec {
            id,
            period,
            deadline: period,
            wcet_typical,
            wcet_critical,
            priority,
            critical_rate,
            role,
            name: None,
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn wcet(&self, mode: Mode) -> Time {
        match mode {
            Mode::Typical => self.wcet_typical,
            Mode::Critical => self.wcet_critical,
        }
    }

    pub fn is_dual_mode(&self) -> bool {
        self.wcet_typical != self.wcet_critical
    }

    pub fn critical_utilization(&self) -> f64 {
        self.wcet_critical as f64 / self.period as f64
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |reason| Err(ModelError::InvalidTask { id: self.id, reason });
        if self.wcet_typical == 0 {
            return bad("typical WCET must be positive");
        }
        if self.wcet_typical > self.wcet_critical {
            return bad("typical WCET exceeds critical WCET");
        }
        if self.wcet_critical >= self.period {
            return bad("critical WCET must be below the period");
        }
        if self.deadline != self.period {
            return bad("deadline must equal period");
        }
        if !(0.0..=1.0).contains(&self.critical_rate) {
            return bad("critical rate outside [0, 1]");
        }
        Ok(())
    }
}

/// A validated taskset, stored in priority order (highest first), with exactly
/// one victim and one observer.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSet {
    tasks: Vec<TaskSpec>,
    blocking: bool,
}

impl TaskSet {
    pub fn new(mut tasks: Vec<TaskSpec>) -> Result<Self, ModelError> {
        for t in &tasks {
            t.validate()?;
        }
        tasks.sort_by_key(|t| t.priority);
        for pair in tasks.windows(2) {
            if pair[0].priority == pair[1].priority {
                return Err(ModelError::DuplicatePriority(pair[0].priority));
            }
        }
        let mut ids: Vec<TaskId> = tasks.iter().map(|t| t.id).collect();
        ids.sort_unstable();
        for pair in ids.windows(2) {
            if pair[0] == pair[1] {
                return Err(ModelError::DuplicateId(pair[0]));
            }
        }
        for role in [Role::Victim, Role::Observer] {
            let n = tasks.iter().filter(|t| t.role == role).count();
            if n != 1 {
                return Err(ModelError::RoleCount(role, n));
            }
        }
        let set = TaskSet { tasks, blocking: false };
        if set.observer().priority <= set.victim().priority {
            return Err(ModelError::ObserverNotLower);
        }
        set.hyperperiod()?;
        Ok(set)
    }

    /// Enable the blocking term in the response-time analyses.
    pub fn with_blocking(mut self, blocking: bool) -> Self {
        self.blocking = blocking;
        self
    }

    pub fn blocking_enabled(&self) -> bool {
        self.blocking
    }

    pub fn tasks(&self) -> &[TaskSpec] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn task(&self, id: TaskId) -> Result<&TaskSpec, ModelError> {
        self.tasks
            .iter()
            .find(|t| t.id == id)
            .ok_or(ModelError::UnknownTask(id))
    }

    pub fn victim(&self) -> &TaskSpec {
        self.by_role(Role::Victim)
    }

    pub fn observer(&self) -> &TaskSpec {
        self.by_role(Role::Observer)
    }

    fn by_role(&self, role: Role) -> &TaskSpec {
        // validated in `new`
        self.tasks.iter().find(|t| t.role == role).unwrap()
    }

    /// hp(τ): tasks with strictly higher priority than `id`.
    pub fn higher_priority(&self, id: TaskId) -> Result<impl Iterator<Item = &TaskSpec>, ModelError> {
        let p = self.task(id)?.priority;
        Ok(self.tasks.iter().filter(move |t| t.priority < p))
    }

    /// lp(τ): tasks with strictly lower priority than `id`.
    pub fn lower_priority(&self, id: TaskId) -> Result<impl Iterator<Item = &TaskSpec>, ModelError> {
        let p = self.task(id)?.priority;
        Ok(self.tasks.iter().filter(move |t| t.priority > p))
    }

    pub fn hyperperiod(&self) -> Result<Time, ModelError> {
        hyperperiod(self.tasks.iter().map(|t| t.period))
    }

    pub fn critical_utilization(&self) -> f64 {
        self.tasks.iter().map(TaskSpec::critical_utilization).sum()
    }

    /// Stable FNV-1a digest of all scheduling parameters.
    pub fn fingerprint(&self) -> u64 {
        const PRIME: u64 = 0x0000_0100_0000_01B3;
        let mut h: u64 = 0xCBF2_9CE4_8422_2325;
        let mut feed = |v: u64| {
            for b in v.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(PRIME);
            }
        };
        feed(self.blocking as u64);
        for t in &self.tasks {
            feed(t.id as u64);
            feed(t.period);
            feed(t.deadline);
            feed(t.wcet_typical);
            feed(t.wcet_critical);
            feed(t.priority as u64);
            feed(t.critical_rate.to_bits());
            feed(t.role as u64);
        }
        h
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Least common multiple of `periods`.
pub fn hyperperiod(periods: impl IntoIterator<Item = Time>) -> Result<Time, ModelError> {
    periods.into_iter().try_fold(1u64, |acc, p| {
        if p == 0 {
            return Err(ModelError::InvalidParameter("zero period"));
        }
        (acc / gcd(acc, p))
            .checked_mul(p)
            .ok_or(ModelError::HyperperiodOverflow)
    })
}

/// Divisors of `n` inside `[lo, hi]`, ascending.
pub fn divisors_in_range(n: Time, lo: Time, hi: Time) -> Vec<Time> {
    (lo.max(1)..=hi.min(n)).filter(|d| n % d == 0).collect()
}

/// UUniFast: `n` utilizations uniformly distributed over the simplex that sums
/// to `total_u`.
pub fn uunifast<R: Rng + ?Sized>(n: usize, total_u: f64, rng: &mut R) -> Result<Vec<f64>, ModelError> {
    if n == 0 {
        return Err(ModelError::InvalidParameter("n must be at least 1"));
    }
    if !(total_u > 0.0 && total_u < 1.0) {
        return Err(ModelError::InvalidParameter("total utilization must lie in (0, 1)"));
    }
    let mut out = Vec::with_capacity(n);
    let mut sum = total_u;
    for i in 1..n {
        let next = sum * libm::pow(rng.gen::<f64>(), 1.0 / (n - i) as f64);
        out.push(sum - next);
        sum = next;
    }
    out.push(sum);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GeneratorConfig {
    pub n_tasks: usize,
    pub total_utilization: f64,
    pub period_range: (Time, Time),
    pub fixed_hyperperiod: Time,
    #[cfg_attr(feature = "serde", serde(default = "default_ratio"))]
    pub typ_to_cri_ratio: f64,
    pub critical_rate: f64,
    pub seed: u64,
}

fn default_ratio() -> f64 {
    0.7
}

impl GeneratorConfig {
    /// Synthetic defaults: 4500 ms hyperperiod, periods in [100, 900] ms,
    /// typical = 0.7 × critical.
    pub fn new(n_tasks: usize, total_utilization: f64, critical_rate: f64, seed: u64) -> Self {
        GeneratorConfig {
            n_tasks,
            total_utilization,
            period_range: (100, 900),
            fixed_hyperperiod: 4500,
            typ_to_cri_ratio: default_ratio(),
            critical_rate,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_tasks < 2 {
            return Err(ModelError::InvalidParameter("n_tasks must be at least 2"));
        }
        if !(self.total_utilization > 0.0 && self.total_utilization < 1.0) {
            return Err(ModelError::InvalidParameter("total utilization must lie in (0, 1)"));
        }
        if !(self.typ_to_cri_ratio > 0.0 && self.typ_to_cri_ratio <= 1.0) {
            return Err(ModelError::InvalidParameter("typ_to_cri_ratio must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.critical_rate) {
            return Err(ModelError::InvalidParameter("critical rate outside [0, 1]"));
        }
        if self.period_range.0 > self.period_range.1 {
            return Err(ModelError::InvalidParameter("empty period range"));
        }
        Ok(())
    }
}

const MAX_GENERATION_ATTEMPTS: usize = 1000;

/// Draw a rate-monotonic dual-mode taskset.
///
/// Periods come from the divisors of `fixed_hyperperiod` inside
/// `period_range`. The shortest-period dual-mode task becomes the victim; the
/// longest-period task becomes a single-mode observer.
pub fn generate_taskset<R: Rng + ?Sized>(cfg: &GeneratorConfig, rng: &mut R) -> Result<TaskSet, ModelError> {
    cfg.validate()?;
    let (lo, hi) = cfg.period_range;
    let divisors = divisors_in_range(cfg.fixed_hyperperiod, lo, hi);
    if divisors.is_empty() {
        return Err(ModelError::NoPeriodInRange {
            hyperperiod: cfg.fixed_hyperperiod,
            lo,
            hi,
        });
    }

    'attempt: for _ in 0..MAX_GENERATION_ATTEMPTS {
        let utils = uunifast(cfg.n_tasks, cfg.total_utilization, rng)?;
        let mut drafts = Vec::with_capacity(cfg.n_tasks);
        for u in utils {
            let period = divisors[rng.gen_range(0..divisors.len())];
            let cri = (libm::round(u * period as f64) as Time).max(1);
            if cri >= period {
                continue 'attempt;
            }
            let typ = (libm::round(cfg.typ_to_cri_ratio * cri as f64) as Time).clamp(1, cri);
            drafts.push((period, typ, cri));
        }
        // rate-monotonic order; the stable sort breaks ties by draw index
        drafts.sort_by_key(|d| d.0);

        let last = drafts.len() - 1;
        let Some(victim) = drafts[..last].iter().position(|d| d.1 < d.2) else {
            continue;
        };
        let tasks = drafts
            .iter()
            .enumerate()
            .map(|(rank, &(period, typ, cri))| {
                let (role, typ, rate) = if rank == last {
                    (Role::Observer, cri, 0.0)
                } else if rank == victim {
                    (Role::Victim, typ, cfg.critical_rate)
                } else {
                    (Role::Other, typ, cfg.critical_rate)
                };
                TaskSpec::new(rank as TaskId, period, typ, cri, rank as u32 + 1, rate, role)
            })
            .collect();
        return TaskSet::new(tasks);
    }
    Err(ModelError::GenerationFailed(MAX_GENERATION_ATTEMPTS))
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Three-task example: victim (10, {1,3}), middle (15, {2,3}), observer (30, 2).
    pub fn three_task_example() -> TaskSet {
        TaskSet::new(alloc::vec![
            TaskSpec::new(0, 10, 1, 3, 1, 0.5, Role::Victim),
            TaskSpec::new(1, 15, 2, 3, 2, 0.5, Role::Other),
            TaskSpec::new(2, 30, 2, 2, 3, 0.0, Role::Observer),
        ])
        .unwrap()
    }

    /// Five-task clustering example.
    pub fn five_task_example() -> TaskSet {
        TaskSet::new(alloc::vec![
            TaskSpec::new(0, 30, 2, 6, 1, 0.3, Role::Victim),
            TaskSpec::new(2, 70, 5, 8, 2, 0.3, Role::Other),
            TaskSpec::new(1, 80, 4, 6, 3, 0.3, Role::Other),
            TaskSpec::new(3, 90, 15, 15, 4, 0.0, Role::Other),
            TaskSpec::new(4, 100, 12, 12, 5, 0.0, Role::Observer),
        ])
        .unwrap()
    }
}
