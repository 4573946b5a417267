mod common;

use common::{three_task_example, five_task_example};
use proptest::prelude::*;
use rtinfer_core::inference::{evaluate_span, random_baseline, run_attack_from, train, CoinToss, TrainConfig};
use rtinfer_core::metrics::{aggregate, Score, Summary};
use rtinfer_core::simulator::{observer_sequence, simulate, simulate_with};
use rtinfer_core::{Mode, PredictionRecord, Role, TaskSet, TaskSpec};

fn cfg(hyper: u64, window: usize) -> TrainConfig {
    TrainConfig { train_hyperperiods: hyper, window_len: window, ..TrainConfig::default() }
}

#[test]
fn predictions_come_from_the_response_history_alone() {
    let ts = five_task_example();
    let tr = simulate(&ts, 60, 21).unwrap();
    let model = train(&tr, &cfg(50, 20)).unwrap();
    let from = 50 * ts.hyperperiod().unwrap();
    let records = run_attack_from(&model, &tr, from);

    let responses = observer_sequence(&tr);
    let first = tr.observer_jobs().position(|j| j.release >= from).unwrap();
    for (k, r) in records.iter().enumerate() {
        let j = first + 20 + k;
        let history = &responses[j - 20..j];
        assert_eq!(r.observer_job_index, j as u64);
        assert_eq!((r.predicted_response.unwrap(), r.predicted_mode), model.infer_next(history));
        // older history and a longer window do not matter
        assert_eq!(model.infer_next(&responses[..j]), model.infer_next(history));
    }
}

#[test]
fn span_scoring_uses_history_from_before_the_span() {
    let ts = five_task_example();
    let tr = simulate(&ts, 60, 4).unwrap();
    let model = train(&tr, &cfg(50, 20)).unwrap();
    let h = ts.hyperperiod().unwrap();
    let recs = evaluate_span(&mut &model, &tr, 50 * h, 60 * h, 20);
    let jobs = tr.observer_jobs().filter(|j| (50 * h..60 * h).contains(&j.release)).count();
    assert_eq!(recs.len(), jobs);
    // the tail matches the warm-up based evaluation on the shared jobs
    let warm = run_attack_from(&model, &tr, 50 * h);
    assert_eq!(&recs[20..], &warm[..]);
}

#[test]
fn coin_toss_statistics() {
    // 10% critical victim whose windows hold exactly one job
    let ts = TaskSet::new(vec![
        TaskSpec::new(0, 10, 1, 3, 1, 0.1, Role::Victim),
        TaskSpec::new(1, 10, 2, 2, 2, 0.0, Role::Observer),
    ])
    .unwrap();
    let tr = simulate(&ts, 40_000, 3).unwrap();
    let recs = random_baseline(&tr, 17);
    let s = Score::of(&recs).unwrap();
    assert_eq!(s.n_jobs, 40_000);
    // four standard errors of a 40k-sample proportion are at most 0.01
    assert!((s.ip() - 0.5).abs() < 0.01, "{}", s.ip());
    assert!((s.fp_pct() - 0.45).abs() < 0.01, "{}", s.fp_pct());
}

#[test]
fn deterministic_alternation_is_learned_through_interference() {
    // victim jobs alternate by observer window; the middle task stays typical
    let ts = three_task_example();
    let tr = simulate_with(&ts, 30 * 200, 0, |t, j, _| match t.role {
        Role::Victim if (j / 3) % 2 == 1 => Mode::Critical,
        _ => Mode::Typical,
    });
    let model = train(&tr, &cfg(100, 5)).unwrap();
    let recs = run_attack_from(&model, &tr, 30 * 100);
    assert_eq!(recs.len(), 100 - 5);
    assert!(recs.iter().all(|r| r.correct));
}

fn record(pred: Mode, actual: Mode) -> PredictionRecord {
    PredictionRecord {
        observer_job_index: 0,
        predicted_response: None,
        predicted_mode: pred,
        actual_window_label: actual,
        correct: pred == actual,
    }
}

fn mode() -> impl Strategy<Value = Mode> {
    prop_oneof![Just(Mode::Typical), Just(Mode::Critical)]
}

proptest! {
    #[test]
    fn score_partitions_the_records(pairs in prop::collection::vec((mode(), mode()), 1..200)) {
        let recs: Vec<_> = pairs.iter().map(|&(p, a)| record(p, a)).collect();
        let s = Score::of(&recs).unwrap();
        prop_assert_eq!(s.n_correct + s.n_false_positive + s.n_false_negative, recs.len());
        let fp = pairs.iter().filter(|&&(p, a)| p == Mode::Critical && a == Mode::Typical).count();
        prop_assert_eq!(s.n_false_positive, fp);
        prop_assert!((0.0..=1.0).contains(&s.ip()) && (0.0..=1.0).contains(&s.fp_pct()));
        prop_assert!(s.ip() + s.fp_pct() <= 1.0 + 1e-12);
    }

    #[test]
    fn summary_matches_closed_form(values in prop::collection::vec(-10.0f64..10.0, 2..50)) {
        let s = Summary::of(&values);
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        let std = (ss / (n - 1.0)).sqrt();
        prop_assert!((s.mean - mean).abs() < 1e-9);
        prop_assert!((s.std - std).abs() < 1e-9);
        prop_assert!((s.two_sigma.1 - s.two_sigma.0 - 4.0 * std).abs() < 1e-9);
        prop_assert!(s.within_two_sigma(mean));
    }

    #[test]
    fn aggregate_pools_counts(scores in prop::collection::vec((1usize..100, 0usize..100, 0usize..100), 2..10)) {
        let scores: Vec<Score> = scores
            .into_iter()
            .map(|(n, c, f)| {
                let c = c % (n + 1);
                let f = f % (n - c + 1);
                Score { n_jobs: n, n_correct: c, n_false_positive: f, n_false_negative: n - c - f }
            })
            .collect();
        let agg = aggregate(&scores).unwrap();
        let n: usize = scores.iter().map(|s| s.n_jobs).sum();
        prop_assert_eq!(agg.n_jobs, n);
        prop_assert!((agg.ip - agg.n_correct as f64 / n as f64).abs() < 1e-12);
        let ips: Vec<f64> = scores.iter().map(Score::ip).collect();
        prop_assert_eq!(agg.ip_summary, Summary::of(&ips));
    }

    #[test]
    fn coin_toss_is_seed_deterministic(seed in any::<u64>()) {
        use rtinfer_core::inference::ModePredictor;
        let (mut a, mut b) = (CoinToss::new(seed), CoinToss::new(seed));
        for _ in 0..50 {
            prop_assert_eq!(a.predict(&[]), b.predict(&[]));
        }
    }
}
