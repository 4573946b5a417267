//! Inference precision, false positives and cross-taskset aggregation.

use alloc::vec::Vec;

use thiserror::Error;

use crate::inference::PredictionRecord;
use crate::taskmodel::Mode;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no prediction records to score")]
    Empty,
    #[error("aggregation needs at least 2 reports, got {0}")]
    TooFewReports(usize),
}

/// IP = correct predictions / observed jobs.
pub fn inference_precision(records: &[PredictionRecord]) -> Result<f64, MetricsError> {
    Ok(Score::of(records)?.ip())
}

/// FP = (predicted critical ∧ actually typical) / observed jobs.
pub fn false_positive_pct(records: &[PredictionRecord]) -> Result<f64, MetricsError> {
    Ok(Score::of(records)?.fp_pct())
}

/// Counts for one prediction stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Score {
    pub n_jobs: usize,
    pub n_correct: usize,
    pub n_false_positive: usize,
    pub n_false_negative: usize,
}

impl Score {
    pub fn of(records: &[PredictionRecord]) -> Result<Score, MetricsError> {
        if records.is_empty() {
            return Err(MetricsError::Empty);
        }
        let mut s = Score { n_jobs: records.len(), ..Score::default() };
        for r in records {
            match (r.predicted_mode, r.actual_window_label) {
                (p, a) if p == a => s.n_correct += 1,
                (Mode::Critical, Mode::Typical) => s.n_false_positive += 1,
                _ => s.n_false_negative += 1,
            }
        }
        Ok(s)
    }

    pub fn ip(&self) -> f64 {
        self.n_correct as f64 / self.n_jobs as f64
    }

    pub fn fp_pct(&self) -> f64 {
        self.n_false_positive as f64 / self.n_jobs as f64
    }
}

/// Mean, sample standard deviation and σ-ranges of one metric.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub one_sigma: (f64, f64),
    pub two_sigma: (f64, f64),
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let std = libm::sqrt(var);
        Summary {
            mean,
            std,
            one_sigma: (mean - std, mean + std),
            two_sigma: (mean - 2.0 * std, mean + 2.0 * std),
        }
    }

    pub fn within_two_sigma(&self, v: f64) -> bool {
        v >= self.two_sigma.0 && v <= self.two_sigma.1
    }
}

/// Aggregate over the tasksets of one experiment point.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsReport {
    pub n_reports: usize,
    pub n_jobs: usize,
    pub n_correct: usize,
    pub n_false_positive: usize,
    /// Pooled over all jobs.
    pub ip: f64,
    pub fp_pct: f64,
    /// Per-taskset spread.
    pub ip_summary: Summary,
    pub fp_summary: Summary,
}

pub fn aggregate(scores: &[Score]) -> Result<MetricsReport, MetricsError> {
    if scores.len() < 2 {
        return Err(MetricsError::TooFewReports(scores.len()));
    }
    let ips: Vec<f64> = scores.iter().map(Score::ip).collect();
    let fps: Vec<f64> = scores.iter().map(Score::fp_pct).collect();
    let n_jobs = scores.iter().map(|s| s.n_jobs).sum::<usize>();
    let n_correct = scores.iter().map(|s| s.n_correct).sum::<usize>();
    let n_false_positive = scores.iter().map(|s| s.n_false_positive).sum::<usize>();
    Ok(MetricsReport {
        n_reports: scores.len(),
        n_jobs,
        n_correct,
        n_false_positive,
        ip: n_correct as f64 / n_jobs as f64,
        fp_pct: n_false_positive as f64 / n_jobs as f64,
        ip_summary: Summary::of(&ips),
        fp_summary: Summary::of(&fps),
    })
}
