//! Core model for timing-based mode inference on fixed-priority uniprocessors.
//!
//! A low-priority observer task measures only its own response times and tries
//! to tell whether the jobs of a high-priority victim task ran in their typical
//! or critical execution mode. This crate holds the allocation-only pieces:
//!
//! * [`taskmodel`]: dual-mode periodic tasks, UUniFast generation.
//! * [`rta`]: blocking, window bound, fixed-point response times, leakage
//!   surface size.
//! * [`simulator`]: exact event-driven preemptive fixed-priority schedule.
//! * [`pst`]: probabilistic suffix tree over response-time symbols.
//! * [`cluster`]: two-centroid 1-D K-means and the cutoff threshold.
//! * [`inference`]: training, one-step prediction and the coin-toss baseline.
//! * [`metrics`]: inference precision, false positives, aggregation.
//!
//! IO, file formats, timing and the experiment harness live in the `rtinfer`
//! crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod cluster;
pub mod inference;
pub mod metrics;
pub mod pst;
pub mod rta;
pub mod rng;
pub mod simulator;
pub mod taskmodel;

pub use cluster::{classify, kmeans_1d, ClusterError, ClusterModel};
pub use inference::{
    infer_next, random_baseline, run_attack, run_attack_from, train, AttackModel, InferenceError,
    PredictionRecord, TrainConfig,
};
pub use metrics::{aggregate, false_positive_pct, inference_precision, MetricsError, MetricsReport, Score};
pub use pst::{Pst, PstError, PstNode, Symbol};
pub use rta::{RtaError, RtaResult};
pub use simulator::{align, observer_sequence, simulate, AlignedSample, JobRecord, Trace};
pub use taskmodel::{GeneratorConfig, Mode, ModelError, Role, TaskId, TaskSet, TaskSpec, Time};
