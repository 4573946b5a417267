//! Wall-clock cost of training and of a single runtime prediction.

use std::time::{Duration, Instant};

use anyhow::Result;
use rtinfer_core::inference::{train, TrainConfig};
use rtinfer_core::simulator::{observer_sequence, Trace};
use rtinfer_core::taskmodel::Time;
use serde::Serialize;

use crate::io;

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub train_hyperperiods: u64,
    pub training_symbols: usize,
    /// Median over the repeats.
    pub train_us: f64,
    pub predict_median_us: f64,
    pub predict_p90_us: f64,
    pub n_predictions: usize,
    /// Serialized model JSON.
    pub model_bytes: usize,
    pub pst_nodes: usize,
    /// λ in trace time units; compare against the prediction times by hand,
    /// the mapping from time units to wall-clock is platform specific.
    pub lambda_budget: Time,
    pub observer_wcet: Time,
}

fn micros(d: Duration) -> f64 {
    d.as_secs_f64() * 1e6
}

/// Nearest-rank percentile of sorted samples.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Train `repeats` times on `trace`, then time one prediction per observer
/// job after the training span.
pub fn bench(trace: &Trace, cfg: &TrainConfig, repeats: usize) -> Result<BenchReport> {
    let mut train_times = Vec::with_capacity(repeats.max(1));
    let mut model = None;
    for _ in 0..repeats.max(1) {
        let t0 = Instant::now();
        let m = train(trace, cfg)?;
        train_times.push(micros(t0.elapsed()));
        model = Some(m);
    }
    let model = model.expect("at least one repeat");
    train_times.sort_by(f64::total_cmp);

    let seq = observer_sequence(trace);
    let start = model.pst.training_length();
    let mut predict_times = Vec::new();
    for j in start.max(1)..seq.len() {
        let history = &seq[j.saturating_sub(cfg.window_len)..j];
        let t0 = Instant::now();
        std::hint::black_box(model.infer_next(std::hint::black_box(history)));
        predict_times.push(micros(t0.elapsed()));
    }
    predict_times.sort_by(f64::total_cmp);

    Ok(BenchReport {
        train_hyperperiods: cfg.train_hyperperiods,
        training_symbols: start,
        train_us: percentile(&train_times, 0.5),
        predict_median_us: percentile(&predict_times, 0.5),
        predict_p90_us: percentile(&predict_times, 0.9),
        n_predictions: predict_times.len(),
        model_bytes: io::model_to_string(&model, &trace.taskset)?.len(),
        pst_nodes: model.pst.nodes().len(),
        lambda_budget: cfg.lambda_budget,
        observer_wcet: trace.taskset.observer().wcet_critical,
    })
}
