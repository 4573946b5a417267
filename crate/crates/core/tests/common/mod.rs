#![allow(dead_code)]

use rtinfer_core::{Role, TaskSet, TaskSpec};

/// victim (10, {1,3}), middle (15, {2,3}), observer (30, 2)
pub fn three_task_example() -> TaskSet {
    TaskSet::new(vec![
        TaskSpec::new(0, 10, 1, 3, 1, 0.5, Role::Victim),
        TaskSpec::new(1, 15, 2, 3, 2, 0.5, Role::Other),
        TaskSpec::new(2, 30, 2, 2, 3, 0.0, Role::Observer),
    ])
    .unwrap()
}

pub fn five_task_example() -> TaskSet {
    TaskSet::new(vec![
        TaskSpec::new(0, 30, 2, 6, 1, 0.3, Role::Victim),
        TaskSpec::new(2, 70, 5, 8, 2, 0.3, Role::Other),
        TaskSpec::new(1, 80, 4, 6, 3, 0.3, Role::Other),
        TaskSpec::new(3, 90, 15, 15, 4, 0.0, Role::Other),
        TaskSpec::new(4, 100, 12, 12, 5, 0.0, Role::Observer),
    ])
    .unwrap()
}

/// Periods whose LCM stays at 120 or below.
pub const SMALL_PERIODS: [u64; 10] = [4, 5, 6, 8, 10, 12, 15, 20, 24, 30];

/// Rate-monotonic taskset from (period, typical, critical) drafts. The
/// first task is the victim and the last the single-mode observer; callers
/// make sure the victim is dual-mode.
pub fn rm_taskset(mut drafts: Vec<(u64, u64, u64)>, rate: f64) -> Option<TaskSet> {
    drafts.sort_by_key(|d| d.0);
    let last = drafts.len() - 1;
    let tasks = drafts
        .iter()
        .enumerate()
        .map(|(i, &(p, typ, cri))| {
            let role = match i {
                0 => Role::Victim,
                i if i == last => Role::Observer,
                _ => Role::Other,
            };
            let (typ, rate) = if role == Role::Observer { (cri, 0.0) } else { (typ, rate) };
            TaskSpec::new(i as u32, p, typ, cri, i as u32 + 1, rate, role)
        })
        .collect();
    TaskSet::new(tasks).ok()
}
