//! Synthetic sweeps over utilization, critical rate, training length and
//! history length. Every taskset slot draws its randomness from seeds derived
//! from one master seed and its position in the sweep, so results do not
//! depend on thread scheduling.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::Rng;
use rayon::prelude::*;
use rtinfer_core::inference::{evaluate_span, train, CoinToss, PredictionRecord, TrainConfig};
use rtinfer_core::metrics::{Score, Summary};
use rtinfer_core::rng::{derive_seed, seeded};
use rtinfer_core::rta::is_schedulable;
use rtinfer_core::simulator::{simulate, Trace};
use rtinfer_core::taskmodel::{generate_taskset, GeneratorConfig, Role, TaskSet, Time};
use serde::{Deserialize, Serialize};

use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    /// Inference precision against utilization and critical rate.
    Exp1,
    /// False positives on the same runs.
    Exp2,
    /// Training-length and history-length sweeps at one utilization.
    Exp3,
}

/// Which tasks draw critical jobs at the swept rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateScope {
    /// Every dual-mode task.
    #[default]
    All,
    /// Only the victim; every other task always runs its typical WCET.
    Victim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub name: String,
    pub experiments: Vec<Experiment>,
    pub utilizations: Vec<f64>,
    pub critical_rates: Vec<f64>,
    pub rate_scope: RateScope,
    /// N_u.
    pub tasksets_per_point: usize,
    /// Inclusive range the task count is drawn from.
    pub n_tasks: (usize, usize),
    pub train_hyperperiods: u64,
    pub window_len: usize,
    /// Hyperperiods scored after the training span.
    pub eval_hyperperiods: u64,
    pub pst_depth: usize,
    pub p_min: f64,
    pub sweep_utilization: f64,
    pub train_sweep: Vec<u64>,
    pub window_sweep: Vec<usize>,
    pub hyperperiod: Time,
    pub period_range: (Time, Time),
    pub typ_to_cri_ratio: f64,
    /// Draws per slot before the slot is dropped.
    pub max_attempts: usize,
    /// Use this taskset in every slot instead of generating one; critical
    /// rates are overridden per point according to `rate_scope`.
    pub taskset_file: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            name: "synthetic".into(),
            experiments: vec![Experiment::Exp1, Experiment::Exp2, Experiment::Exp3],
            utilizations: vec![0.2, 0.5, 0.8],
            critical_rates: vec![0.1, 0.2, 0.3],
            rate_scope: RateScope::All,
            tasksets_per_point: 20,
            n_tasks: (7, 20),
            train_hyperperiods: 50,
            window_len: 20,
            eval_hyperperiods: 30,
            pst_depth: 3,
            p_min: 0.001,
            sweep_utilization: 0.6,
            train_sweep: vec![2, 5, 10, 20, 30, 50, 70, 90, 110],
            window_sweep: vec![2, 3, 4, 10, 20, 30, 40, 50],
            hyperperiod: 4500,
            period_range: (100, 900),
            typ_to_cri_ratio: 0.7,
            max_attempts: 50,
            taskset_file: None,
        }
    }
}

impl ExperimentSpec {
    /// Full-scale sweep: 10..90 % utilization, 100 tasksets per point.
    pub fn full(mut self) -> Self {
        self.utilizations = (1..=9).map(|u| u as f64 / 10.0).collect();
        self.tasksets_per_point = 100;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiments.is_empty() {
            bail!("no experiments selected");
        }
        if self.critical_rates.is_empty() || self.tasksets_per_point == 0 {
            bail!("critical_rates and tasksets_per_point must be non-empty");
        }
        if self.taskset_file.is_none() && self.utilizations.is_empty() {
            bail!("utilization sweep is empty");
        }
        if self.experiments.contains(&Experiment::Exp3) && (self.train_sweep.is_empty() || self.window_sweep.is_empty()) {
            bail!("exp3 needs non-empty train_sweep and window_sweep");
        }
        if self.n_tasks.0 < 2 || self.n_tasks.0 > self.n_tasks.1 {
            bail!("n_tasks must be a range starting at 2 or more");
        }
        if self.max_attempts == 0 {
            bail!("max_attempts must be at least 1");
        }
        Ok(())
    }

    fn train_config(&self, train_hyperperiods: u64, window_len: usize, ts: &TaskSet) -> TrainConfig {
        TrainConfig {
            train_hyperperiods,
            pst_depth: self.pst_depth,
            p_min: self.p_min,
            window_len,
            lambda_budget: (ts.observer().wcet_critical / 2).max(1),
        }
    }
}

pub const METHOD: &str = "pst";
pub const BASELINE: &str = "random";

const TAG_EXP12: u64 = 12;
const TAG_EXP3: u64 = 3;
const PURPOSE_TASKSET: u64 = 0;
const PURPOSE_SIM: u64 = 1;
const PURPOSE_COIN: u64 = 2;

/// Where the tasksets of a run come from.
#[derive(Debug, Clone)]
pub enum Source {
    Generated,
    Fixed(TaskSet),
}

impl Source {
    pub fn for_spec(spec: &ExperimentSpec, base_dir: Option<&Path>) -> Result<Source> {
        match &spec.taskset_file {
            None => Ok(Source::Generated),
            Some(p) => {
                let p = match base_dir {
                    Some(dir) if p.is_relative() => dir.join(p),
                    _ => p.clone(),
                };
                Ok(Source::Fixed(io::read_taskset(&p)?))
            }
        }
    }
}

/// `ts` with the victim (and, for [`RateScope::All`], every other dual-mode
/// task) critical at `rate`; the remaining tasks never go critical.
pub fn with_rate_scoped(ts: &TaskSet, rate: f64, scope: RateScope) -> Result<TaskSet> {
    let tasks = ts
        .tasks()
        .iter()
        .map(|t| {
            let mut t = t.clone();
            t.critical_rate = match (t.role, scope) {
                (Role::Victim, _) => rate,
                (_, RateScope::All) if t.is_dual_mode() => rate,
                _ => 0.0,
            };
            t
        })
        .collect();
    Ok(TaskSet::new(tasks)?.with_blocking(ts.blocking_enabled()))
}

fn draw_taskset(spec: &ExperimentSpec, source: &Source, u: f64, rate: f64, seed: u64) -> Option<TaskSet> {
    match source {
        Source::Fixed(ts) => with_rate_scoped(ts, rate, spec.rate_scope).ok(),
        Source::Generated => {
            let mut rng = seeded(seed);
            let n = rng.gen_range(spec.n_tasks.0..=spec.n_tasks.1);
            let cfg = GeneratorConfig {
                n_tasks: n,
                total_utilization: u,
                period_range: spec.period_range,
                fixed_hyperperiod: spec.hyperperiod,
                typ_to_cri_ratio: spec.typ_to_cri_ratio,
                critical_rate: rate,
                seed,
            };
            let ts = generate_taskset(&cfg, &mut rng).ok()?;
            match spec.rate_scope {
                RateScope::All => Some(ts),
                RateScope::Victim => with_rate_scoped(&ts, rate, RateScope::Victim).ok(),
            }
        }
    }
}

/// A schedulable taskset and a trace long enough for every point that uses it.
struct Slot {
    taskset: TaskSet,
    trace: Trace,
    attempts: usize,
}

fn draw_slot(
    spec: &ExperimentSpec,
    source: &Source,
    u: f64,
    rate: f64,
    hyperperiods: u64,
    path: &[u64],
    usable: impl Fn(&Trace) -> bool,
) -> Option<Slot> {
    for attempt in 0..spec.max_attempts {
        let key = |purpose| {
            let mut p = path.to_vec();
            p.extend([attempt as u64, purpose]);
            p
        };
        let Some(ts) = draw_taskset(spec, source, u, rate, derive_seed(0, &key(PURPOSE_TASKSET))) else {
            continue;
        };
        if !is_schedulable(&ts) {
            continue;
        }
        let Ok(trace) = simulate(&ts, hyperperiods, derive_seed(0, &key(PURPOSE_SIM))) else {
            continue;
        };
        if usable(&trace) {
            return Some(Slot { taskset: ts, trace, attempts: attempt + 1 });
        }
    }
    None
}

/// Method and baseline scores of one trained model on one evaluation span.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotScores {
    pub method: Score,
    pub baseline: Score,
}

fn score_span(
    spec: &ExperimentSpec,
    slot: &Slot,
    train_hyperperiods: u64,
    window_len: usize,
    coin_seed: u64,
) -> Option<SlotScores> {
    let cfg = spec.train_config(train_hyperperiods, window_len, &slot.taskset);
    let model = train(&slot.trace, &cfg).ok()?;
    let h = slot.taskset.hyperperiod().ok()?;
    let start = h * train_hyperperiods;
    let end = h * (train_hyperperiods + spec.eval_hyperperiods);
    let method = evaluate_span(&mut &model, &slot.trace, start, end, window_len);
    let baseline = evaluate_span(&mut CoinToss::new(coin_seed), &slot.trace, start, end, window_len);
    Some(SlotScores { method: Score::of(&method).ok()?, baseline: Score::of(&baseline).ok()? })
}

fn trainable(spec: &ExperimentSpec, train_hyperperiods: u64) -> impl Fn(&Trace) -> bool + '_ {
    move |tr: &Trace| {
        let cfg = spec.train_config(train_hyperperiods, spec.window_len, &tr.taskset);
        train(tr, &cfg).is_ok()
    }
}

/// Aggregated scores of one method at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointStats {
    pub n_tasksets: usize,
    pub n_predictions: usize,
    pub ip: Summary,
    pub fp: Summary,
    pub ip_pooled: f64,
    pub fp_pooled: f64,
}

impl PointStats {
    pub fn of(scores: &[Score]) -> Option<PointStats> {
        if scores.is_empty() {
            return None;
        }
        let ips: Vec<f64> = scores.iter().map(Score::ip).collect();
        let fps: Vec<f64> = scores.iter().map(Score::fp_pct).collect();
        let n_predictions: usize = scores.iter().map(|s| s.n_jobs).sum();
        let correct: usize = scores.iter().map(|s| s.n_correct).sum();
        let fp: usize = scores.iter().map(|s| s.n_false_positive).sum();
        Some(PointStats {
            n_tasksets: scores.len(),
            n_predictions,
            ip: Summary::of(&ips),
            fp: Summary::of(&fps),
            ip_pooled: correct as f64 / n_predictions as f64,
            fp_pooled: fp as f64 / n_predictions as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exp12Row {
    pub utilization: f64,
    pub critical_rate: f64,
    pub method: &'static str,
    pub n_tasksets: usize,
    pub dropped: usize,
    pub regenerations: usize,
    pub n_predictions: usize,
    pub ip_mean: f64,
    pub ip_std: f64,
    pub ip_pooled: f64,
    pub fp_mean: f64,
    pub fp_std: f64,
    pub fp_pooled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exp3Row {
    pub sweep: &'static str,
    pub value: u64,
    pub critical_rate: f64,
    pub method: &'static str,
    pub n_tasksets: usize,
    pub dropped: usize,
    pub n_predictions: usize,
    pub ip_mean: f64,
    pub ip_std: f64,
    pub fp_mean: f64,
    pub fp_std: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Results {
    pub exp12: Vec<Exp12Row>,
    pub exp3: Vec<Exp3Row>,
}

fn utilization_points(spec: &ExperimentSpec, source: &Source) -> Vec<f64> {
    match source {
        Source::Generated => spec.utilizations.clone(),
        Source::Fixed(ts) => vec![ts.critical_utilization()],
    }
}

/// Experiments 1 and 2 share their runs: one row per (utilization, rate,
/// method) carrying both precision and false positives.
pub fn run_exp12(spec: &ExperimentSpec, source: &Source, master: u64) -> Vec<Exp12Row> {
    let utils = utilization_points(spec, source);
    let jobs: Vec<(usize, usize, usize)> = (0..utils.len())
        .flat_map(|ui| (0..spec.critical_rates.len()).flat_map(move |ri| (0..spec.tasksets_per_point).map(move |s| (ui, ri, s))))
        .collect();
    let hyper = spec.train_hyperperiods + spec.eval_hyperperiods;
    let outcomes: Vec<((usize, usize, usize), Option<(SlotScores, usize)>)> = jobs
        .par_iter()
        .map(|&(ui, ri, s)| {
            let path = [derive_seed(master, &[TAG_EXP12]), ui as u64, ri as u64, s as u64];
            let slot = draw_slot(spec, source, utils[ui], spec.critical_rates[ri], hyper, &path, trainable(spec, spec.train_hyperperiods));
            let out = slot.and_then(|slot| {
                let coin = derive_seed(0, &[path[0], path[1], path[2], path[3], PURPOSE_COIN]);
                score_span(spec, &slot, spec.train_hyperperiods, spec.window_len, coin).map(|sc| (sc, slot.attempts - 1))
            });
            ((ui, ri, s), out)
        })
        .collect();

    let mut rows = Vec::new();
    for (ui, &u) in utils.iter().enumerate() {
        for (ri, &rate) in spec.critical_rates.iter().enumerate() {
            let here: Vec<&Option<(SlotScores, usize)>> = outcomes
                .iter()
                .filter(|((a, b, _), _)| *a == ui && *b == ri)
                .map(|(_, o)| o)
                .collect();
            let ok: Vec<&(SlotScores, usize)> = here.iter().filter_map(|o| o.as_ref()).collect();
            let dropped = here.len() - ok.len();
            let regenerations = ok.iter().map(|(_, r)| r).sum::<usize>() + dropped * spec.max_attempts;
            for (method, pick) in [(METHOD, true), (BASELINE, false)] {
                let scores: Vec<Score> = ok.iter().map(|(sc, _)| if pick { sc.method } else { sc.baseline }).collect();
                if let Some(st) = PointStats::of(&scores) {
                    rows.push(Exp12Row {
                        utilization: u,
                        critical_rate: rate,
                        method,
                        n_tasksets: st.n_tasksets,
                        dropped,
                        regenerations,
                        n_predictions: st.n_predictions,
                        ip_mean: st.ip.mean,
                        ip_std: st.ip.std,
                        ip_pooled: st.ip_pooled,
                        fp_mean: st.fp.mean,
                        fp_std: st.fp.std,
                        fp_pooled: st.fp_pooled,
                    });
                }
            }
        }
    }
    rows.sort_by(|a, b| {
        (a.utilization, a.critical_rate)
            .partial_cmp(&(b.utilization, b.critical_rate))
            .unwrap()
            .then(a.method.cmp(b.method))
    });
    rows
}

/// Experiment 3. Every rate uses one set of tasksets and one trace per slot,
/// shared by all points of both sweeps.
pub fn run_exp3(spec: &ExperimentSpec, source: &Source, master: u64) -> Vec<Exp3Row> {
    let max_train = spec.train_sweep.iter().copied().chain([spec.train_hyperperiods]).max().unwrap_or(1);
    let hyper = max_train + spec.eval_hyperperiods;
    let min_train = spec.train_sweep.iter().copied().chain([spec.train_hyperperiods]).min().unwrap_or(1);
    let u = match source {
        Source::Generated => spec.sweep_utilization,
        Source::Fixed(ts) => ts.critical_utilization(),
    };

    let slots: Vec<(usize, usize)> = (0..spec.critical_rates.len())
        .flat_map(|ri| (0..spec.tasksets_per_point).map(move |s| (ri, s)))
        .collect();
    // per slot: scores for each train-sweep point, then each window-sweep point
    type PerSlot = Option<Vec<Option<SlotScores>>>;
    let outcomes: Vec<((usize, usize), PerSlot)> = slots
        .par_iter()
        .map(|&(ri, s)| {
            let path = [derive_seed(master, &[TAG_EXP3]), ri as u64, s as u64];
            let slot = draw_slot(spec, source, u, spec.critical_rates[ri], hyper, &path, trainable(spec, min_train));
            let out = slot.map(|slot| {
                let coin = |sweep: u64, k: usize| derive_seed(0, &[path[0], path[1], path[2], sweep, k as u64, PURPOSE_COIN]);
                let mut v: Vec<Option<SlotScores>> = spec
                    .train_sweep
                    .iter()
                    .enumerate()
                    .map(|(k, &h)| score_span(spec, &slot, h, spec.window_len, coin(0, k)))
                    .collect();
                v.extend(
                    spec.window_sweep
                        .iter()
                        .enumerate()
                        .map(|(k, &w)| score_span(spec, &slot, spec.train_hyperperiods, w, coin(1, k))),
                );
                v
            });
            ((ri, s), out)
        })
        .collect();

    let points: Vec<(&'static str, u64)> = spec
        .train_sweep
        .iter()
        .map(|&h| ("train_hyperperiods", h))
        .chain(spec.window_sweep.iter().map(|&w| ("window_len", w as u64)))
        .collect();
    let mut rows = Vec::new();
    for (ri, &rate) in spec.critical_rates.iter().enumerate() {
        let here: Vec<&PerSlot> = outcomes.iter().filter(|((r, _), _)| *r == ri).map(|(_, o)| o).collect();
        for (k, &(sweep, value)) in points.iter().enumerate() {
            let ok: Vec<SlotScores> = here.iter().filter_map(|o| o.as_ref().and_then(|v| v[k])).collect();
            let dropped = here.len() - ok.len();
            for (method, pick) in [(METHOD, true), (BASELINE, false)] {
                let scores: Vec<Score> = ok.iter().map(|sc| if pick { sc.method } else { sc.baseline }).collect();
                if let Some(st) = PointStats::of(&scores) {
                    rows.push(Exp3Row {
                        sweep,
                        value,
                        critical_rate: rate,
                        method,
                        n_tasksets: st.n_tasksets,
                        dropped,
                        n_predictions: st.n_predictions,
                        ip_mean: st.ip.mean,
                        ip_std: st.ip.std,
                        fp_mean: st.fp.mean,
                        fp_std: st.fp.std,
                    });
                }
            }
        }
    }
    rows.sort_by(|a, b| {
        (a.sweep, a.value)
            .cmp(&(b.sweep, b.value))
            .then(a.critical_rate.partial_cmp(&b.critical_rate).unwrap())
            .then(a.method.cmp(b.method))
    });
    rows
}

pub fn run(spec: &ExperimentSpec, source: &Source, master: u64) -> Result<Results> {
    spec.validate()?;
    let mut res = Results::default();
    if spec.experiments.iter().any(|e| matches!(e, Experiment::Exp1 | Experiment::Exp2)) {
        res.exp12 = run_exp12(spec, source, master);
    }
    if spec.experiments.contains(&Experiment::Exp3) {
        res.exp3 = run_exp3(spec, source, master);
    }
    Ok(res)
}

#[derive(Serialize)]
struct Exp1Csv<'a> {
    utilization: f64,
    critical_rate: f64,
    method: &'a str,
    n_tasksets: usize,
    dropped: usize,
    regenerations: usize,
    n_predictions: usize,
    ip_mean: f64,
    ip_std: f64,
    ip_pooled: f64,
}

#[derive(Serialize)]
struct Exp2Csv<'a> {
    utilization: f64,
    critical_rate: f64,
    method: &'a str,
    n_tasksets: usize,
    dropped: usize,
    n_predictions: usize,
    fp_mean: f64,
    fp_std: f64,
    fp_pooled: f64,
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    master_seed: u64,
    seed_scheme: &'static str,
    spec: &'a ExperimentSpec,
    files: Vec<&'static str>,
}

/// Write `exp1.csv`, `exp2.csv`, `exp3.csv` (as selected) and `manifest.json`
/// into `dir`. Returns the written file names.
pub fn write_results(dir: &Path, spec: &ExperimentSpec, master: u64, res: &Results) -> Result<Vec<&'static str>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut files = Vec::new();
    if spec.experiments.contains(&Experiment::Exp1) {
        write_csv(
            &dir.join("exp1.csv"),
            res.exp12.iter().map(|r| Exp1Csv {
                utilization: r.utilization,
                critical_rate: r.critical_rate,
                method: r.method,
                n_tasksets: r.n_tasksets,
                dropped: r.dropped,
                regenerations: r.regenerations,
                n_predictions: r.n_predictions,
                ip_mean: r.ip_mean,
                ip_std: r.ip_std,
                ip_pooled: r.ip_pooled,
            }),
        )?;
        files.push("exp1.csv");
    }
    if spec.experiments.contains(&Experiment::Exp2) {
        write_csv(
            &dir.join("exp2.csv"),
            res.exp12.iter().map(|r| Exp2Csv {
                utilization: r.utilization,
                critical_rate: r.critical_rate,
                method: r.method,
                n_tasksets: r.n_tasksets,
                dropped: r.dropped,
                n_predictions: r.n_predictions,
                fp_mean: r.fp_mean,
                fp_std: r.fp_std,
                fp_pooled: r.fp_pooled,
            }),
        )?;
        files.push("exp2.csv");
    }
    if spec.experiments.contains(&Experiment::Exp3) {
        write_csv(&dir.join("exp3.csv"), &res.exp3)?;
        files.push("exp3.csv");
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        master_seed: master,
        seed_scheme: "splitmix64 chain over (experiment tag, point indices, slot, attempt, purpose)",
        spec,
        files: files.clone(),
    };
    io::write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(files)
}

/// Records of one slot, exposed for the CLI and tests.
pub fn slot_records(
    spec: &ExperimentSpec,
    ts: &TaskSet,
    seed: u64,
) -> Result<(Vec<PredictionRecord>, Vec<PredictionRecord>)> {
    let trace = simulate(ts, spec.train_hyperperiods + spec.eval_hyperperiods, seed)?;
    let model = train(&trace, &spec.train_config(spec.train_hyperperiods, spec.window_len, ts))?;
    let h = ts.hyperperiod()?;
    let (start, end) = (h * spec.train_hyperperiods, h * (spec.train_hyperperiods + spec.eval_hyperperiods));
    let method = evaluate_span(&mut &model, &trace, start, end, spec.window_len);
    let baseline = evaluate_span(&mut CoinToss::new(seed ^ 0x5eed), &trace, start, end, spec.window_len);
    Ok((method, baseline))
}
