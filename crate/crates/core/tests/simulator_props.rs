mod common;

use std::collections::HashMap;

use common::{rm_taskset, five_task_example, SMALL_PERIODS};
use proptest::prelude::*;
use rtinfer_core::simulator::{align, simulate, JobRecord, Trace};
use rtinfer_core::{Mode, TaskSet};

/// Any RM taskset over small periods, overloaded ones included.
fn any_taskset() -> impl Strategy<Value = TaskSet> {
    let draft = (prop::sample::select(SMALL_PERIODS.to_vec()), 1u64..5, 0u64..3)
        .prop_map(|(p, typ, extra)| (p, typ, typ + extra))
        .prop_filter("wcet below period", |&(p, _, cri)| cri < p);
    (prop::collection::vec(draft, 2..=5), 0.0f64..=1.0).prop_filter_map("valid", |(mut d, rate)| {
        d.sort_by_key(|x| x.0);
        if d[0].1 == d[0].2 {
            d[0].2 += 1;
        }
        rm_taskset(d, rate)
    })
}

fn priority(tr: &Trace, j: &JobRecord) -> u32 {
    tr.taskset.task(j.task_id).unwrap().priority
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn schedule_is_a_valid_fixed_priority_schedule(ts in any_taskset(), seed in any::<u64>()) {
        let tr = simulate(&ts, 2, seed).unwrap();

        // segments are disjoint and ordered
        for w in tr.segments.windows(2) {
            prop_assert!(w[0].end <= w[1].start);
        }

        // each job runs exactly its demand inside [release, completion]
        let mut served: HashMap<(u32, u64), u64> = HashMap::new();
        for s in &tr.segments {
            *served.entry((s.task_id, s.job_index)).or_default() += s.end - s.start;
        }
        for j in &tr.jobs {
            prop_assert_eq!(served.get(&(j.task_id, j.job_index)).copied().unwrap_or(0), j.exec_demand);
            prop_assert_eq!(j.response, j.completion - j.release);
            prop_assert_eq!(j.exec_demand, ts.task(j.task_id).unwrap().wcet(j.mode));
        }
        let by_key: HashMap<(u32, u64), &JobRecord> = tr.jobs.iter().map(|j| ((j.task_id, j.job_index), j)).collect();

        for s in &tr.segments {
            let me = by_key[&(s.task_id, s.job_index)];
            prop_assert!(me.release <= s.start && s.end <= me.completion);
            // no higher-priority job is pending while this one runs
            for other in &tr.jobs {
                if priority(&tr, other) < priority(&tr, me) {
                    prop_assert!(!(other.release < s.end && other.completion > s.start && other.release <= s.start),
                        "job {:?} pending while {:?} runs", other, s);
                    prop_assert!(!(other.release > s.start && other.release < s.end));
                }
            }
        }

        // work conservation: idle gaps have no pending work
        let mut gaps = Vec::new();
        let mut t = 0;
        for s in &tr.segments {
            if s.start > t {
                gaps.push((t, s.start));
            }
            t = s.end;
        }
        for (a, b) in gaps {
            for j in &tr.jobs {
                prop_assert!(!(j.release < b && j.completion > a), "job {:?} pending in idle [{}, {})", j, a, b);
            }
        }
    }

    #[test]
    fn windows_hold_the_right_victim_jobs(ts in any_taskset(), seed in any::<u64>()) {
        let tr = simulate(&ts, 2, seed).unwrap();
        let victim: Vec<&JobRecord> = tr.jobs_of(ts.victim().id).collect();
        for s in align(&tr) {
            let o = s.observer_job;
            let want: Vec<JobRecord> = victim.iter().filter(|v| v.release >= o.release && v.release < o.completion).map(|v| **v).collect();
            prop_assert_eq!(&s.victim_jobs, &want);
            let any = want.iter().any(|v| v.mode == Mode::Critical);
            prop_assert_eq!(s.window_label == Mode::Critical, any);
            prop_assert_eq!(s.empty_window, want.is_empty());
        }
    }

    #[test]
    fn same_seed_same_trace(ts in any_taskset(), seed in any::<u64>()) {
        prop_assert_eq!(simulate(&ts, 2, seed).unwrap(), simulate(&ts, 2, seed).unwrap());
    }
}

#[test]
fn critical_share_follows_the_rate() {
    let ts = five_task_example();
    let tr = simulate(&ts, 40, 8).unwrap();
    let victim: Vec<_> = tr.jobs_of(0).collect();
    let share = victim.iter().filter(|j| j.mode == Mode::Critical).count() as f64 / victim.len() as f64;
    // 33600 jobs at p = 0.3: three standard errors is about 0.008
    assert!((share - 0.3).abs() < 0.01, "{share}");
    assert!(tr.jobs_of(4).all(|j| j.mode == Mode::Typical));
}
