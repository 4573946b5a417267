//! Offline training, one-step runtime prediction and the coin-toss baseline.

use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

use crate::cluster::{classify, fit_responses, ClusterError, ClusterModel};
use crate::pst::{Pst, PstError, Symbol};
use crate::rng::{seeded, SimRng};
use crate::simulator::{align, Trace};
use crate::taskmodel::{Mode, ModelError, Time};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cannot form response clusters: {0}")]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Pst(#[from] PstError),
    #[error("trace horizon {horizon} is shorter than the training span {needed}")]
    TraceTooShort { needed: Time, horizon: Time },
    #[error("invalid training config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TrainConfig {
    /// Ĥ: hyperperiods of observer responses used for training.
    pub train_hyperperiods: u64,
    /// L: maximum suffix-tree depth.
    pub pst_depth: usize,
    pub p_min: f64,
    /// |R_o|: number of most recent responses handed to the predictor.
    pub window_len: usize,
    /// λ: per-job inference budget of the observer, in time units. Recorded
    /// for budget accounting; `0 < λ < C_o`.
    pub lambda_budget: Time,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            train_hyperperiods: 50,
            pst_depth: 3,
            p_min: 0.001,
            window_len: 20,
            lambda_budget: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, observer_wcet: Time) -> Result<(), InferenceError> {
        if self.train_hyperperiods == 0 {
            return Err(InferenceError::InvalidConfig("train_hyperperiods must be at least 1"));
        }
        if self.window_len == 0 {
            return Err(InferenceError::InvalidConfig("window_len must be at least 1"));
        }
        if self.lambda_budget == 0 || self.lambda_budget >= observer_wcet {
            return Err(InferenceError::InvalidConfig("lambda_budget must satisfy 0 < λ < C_o"));
        }
        Ok(())
    }
}

/// Suffix tree plus cutoff threshold, built offline from observer responses.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackModel {
    pub pst: Pst,
    pub cluster: ClusterModel,
    pub config: TrainConfig,
    /// [`TaskSet::fingerprint`](crate::TaskSet::fingerprint) of the training taskset.
    pub fingerprint: u64,
}

impl AttackModel {
    /// Predict the next observer response from the last `window_len` entries
    /// of `recent` and map it to a victim mode.
    pub fn infer_next(&self, recent: &[Time]) -> (Symbol, Mode) {
        let start = recent.len().saturating_sub(self.config.window_len);
        let predicted = self.pst.predict(&recent[start..]);
        (predicted, classify(predicted as f64, self.cluster.threshold))
    }
}

/// Build the attack model from the observer responses released during the
/// first Ĥ hyperperiods of `trace`.
pub fn train(trace: &Trace, cfg: &TrainConfig) -> Result<AttackModel, InferenceError> {
    let observer = trace.taskset.observer();
    cfg.validate(observer.wcet_critical)?;
    let span = trace
        .taskset
        .hyperperiod()?
        .checked_mul(cfg.train_hyperperiods)
        .ok_or(ModelError::HyperperiodOverflow)?;
    if trace.horizon < span {
        return Err(InferenceError::TraceTooShort { needed: span, horizon: trace.horizon });
    }
    let responses: Vec<Time> = trace
        .observer_jobs()
        .filter(|j| j.release < span)
        .map(|j| j.response)
        .collect();
    let cluster = fit_responses(&responses)?;
    let pst = Pst::build(&responses, cfg.pst_depth, cfg.p_min)?;
    Ok(AttackModel {
        pst,
        cluster,
        config: cfg.clone(),
        fingerprint: trace.taskset.fingerprint(),
    })
}

/// Free-function form of [`AttackModel::infer_next`].
pub fn infer_next(model: &AttackModel, recent: &[Time]) -> (Symbol, Mode) {
    model.infer_next(recent)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PredictionRecord {
    pub observer_job_index: u64,
    /// `None` for predictors that do not forecast a response time.
    pub predicted_response: Option<Symbol>,
    pub predicted_mode: Mode,
    pub actual_window_label: Mode,
    pub correct: bool,
}

/// Anything that guesses the victim mode for the next observer job from the
/// observer's own past responses. Ground truth is never passed in.
pub trait ModePredictor {
    fn predict(&mut self, history: &[Time]) -> (Option<Symbol>, Mode);
}

impl ModePredictor for &AttackModel {
    fn predict(&mut self, history: &[Time]) -> (Option<Symbol>, Mode) {
        let (r, m) = self.infer_next(history);
        (Some(r), m)
    }
}

/// Fair coin per job, independent of observations.
pub struct CoinToss {
    rng: SimRng,
}

impl CoinToss {
    pub fn new(seed: u64) -> Self {
        CoinToss { rng: seeded(seed) }
    }
}

impl ModePredictor for CoinToss {
    fn predict(&mut self, _history: &[Time]) -> (Option<Symbol>, Mode) {
        let mode = if self.rng.gen_bool(0.5) { Mode::Critical } else { Mode::Typical };
        (None, mode)
    }
}

/// Score `predictor` on the observer jobs released at or after `from`. The
/// first `window_len` of those jobs only seed the history.
pub fn evaluate<P: ModePredictor>(
    predictor: &mut P,
    trace: &Trace,
    from: Time,
    window_len: usize,
) -> Vec<PredictionRecord> {
    let samples: Vec<_> = align(trace)
        .into_iter()
        .filter(|s| s.observer_job.release >= from)
        .collect();
    let responses: Vec<Time> = samples.iter().map(|s| s.observer_job.response).collect();
    (window_len..samples.len())
        .map(|j| {
            let (predicted_response, predicted_mode) = predictor.predict(&responses[j - window_len..j]);
            let actual = samples[j].window_label;
            PredictionRecord {
                observer_job_index: samples[j].observer_job.job_index,
                predicted_response,
                predicted_mode,
                actual_window_label: actual,
                correct: predicted_mode == actual,
            }
        })
        .collect()
}

/// Score `predictor` on the observer jobs released in `[start, end)`. Each
/// prediction sees up to `window_len` responses immediately preceding the
/// job, including ones released before `start`.
pub fn evaluate_span<P: ModePredictor>(
    predictor: &mut P,
    trace: &Trace,
    start: Time,
    end: Time,
    window_len: usize,
) -> Vec<PredictionRecord> {
    let samples = align(trace);
    let responses: Vec<Time> = samples.iter().map(|s| s.observer_job.response).collect();
    samples
        .iter()
        .enumerate()
        .filter(|(_, s)| (start..end).contains(&s.observer_job.release))
        .map(|(j, s)| {
            let history = &responses[j.saturating_sub(window_len)..j];
            let (predicted_response, predicted_mode) = predictor.predict(history);
            PredictionRecord {
                observer_job_index: s.observer_job.job_index,
                predicted_response,
                predicted_mode,
                actual_window_label: s.window_label,
                correct: predicted_mode == s.window_label,
            }
        })
        .collect()
}

/// Run the attack over every observer job of `eval_trace`.
pub fn run_attack(model: &AttackModel, eval_trace: &Trace) -> Vec<PredictionRecord> {
    run_attack_from(model, eval_trace, 0)
}

/// Run the attack over observer jobs released at or after `from`, typically
/// the end of the training span of the same trace.
pub fn run_attack_from(model: &AttackModel, trace: &Trace, from: Time) -> Vec<PredictionRecord> {
    evaluate(&mut &*model, trace, from, model.config.window_len)
}

/// Coin-toss guesses for every observer job of `eval_trace`.
pub fn random_baseline(eval_trace: &Trace, seed: u64) -> Vec<PredictionRecord> {
    evaluate(&mut CoinToss::new(seed), eval_trace, 0, 0)
}

/// Coin-toss guesses on exactly the jobs [`run_attack_from`] scores.
pub fn random_baseline_from(trace: &Trace, from: Time, window_len: usize, seed: u64) -> Vec<PredictionRecord> {
    evaluate(&mut CoinToss::new(seed), trace, from, window_len)
}
