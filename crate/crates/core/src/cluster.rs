//! Two-cluster 1-D K-means over observer response times.

use alloc::vec::Vec;

use thiserror::Error;

use crate::taskmodel::Mode;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("need at least 2 distinct values to form two clusters")]
    Degenerate,
    #[error("non-finite value in input")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClusterModel {
    /// `[low, high]` centroids.
    pub centroids: [f64; 2],
    pub threshold: f64,
    /// Within-cluster sum of squares of the final partition.
    pub wcss: f64,
    /// Cluster index (0 = low, 1 = high) of every training value.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Vec::is_empty"))]
    pub assignments: Vec<u8>,
    pub iterations: u32,
}

impl ClusterModel {
    pub fn classify(&self, response: f64) -> Mode {
        classify(response, self.threshold)
    }
}

/// Two-cluster K-means: Lloyd iterations seeded at the minimum and maximum
/// value, then checked against the best contiguous split of the sorted data.
/// Lloyd can stall in a local optimum even in 1-D; when a split with strictly
/// lower WCSS exists, Lloyd is re-run from that split's means (the optimum is
/// itself a Lloyd fixed point).
pub fn kmeans_1d(values: &[f64], max_iter: u32, tol: f64) -> Result<ClusterModel, ClusterError> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ClusterError::NonFinite);
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.len() < 2 || lo >= hi {
        return Err(ClusterError::Degenerate);
    }

    let mut run = lloyd(values, [lo, hi], max_iter, tol);
    let split = optimal_split(values)?;
    let current = run.wcss();
    if split.wcss + 1e-9 * (1.0 + split.wcss) < current {
        let iterations = run.iterations;
        run = lloyd(values, split.centroids, max_iter, tol);
        run.iterations += iterations;
    }
    Ok(ClusterModel {
        centroids: run.centroids,
        threshold: threshold_of(&run.centroids),
        wcss: run.wcss(),
        assignments: run.assignments,
        iterations: run.iterations,
    })
}

/// State of a Lloyd run. `wcss_trace[k]` is J after round k + 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Lloyd {
    pub centroids: [f64; 2],
    pub assignments: Vec<u8>,
    pub iterations: u32,
    pub wcss_trace: Vec<f64>,
}

impl Lloyd {
    pub fn wcss(&self) -> f64 {
        self.wcss_trace.last().copied().unwrap_or(f64::INFINITY)
    }
}

/// Plain Lloyd iterations from `init`. A value exactly halfway between the
/// centroids joins the high cluster. Stops when assignments no longer
/// change, when both centroids move by at most `tol`, or after `max_iter`
/// rounds (at least one).
pub fn lloyd(values: &[f64], init: [f64; 2], max_iter: u32, tol: f64) -> Lloyd {
    let mut centroids = init;
    let mut assignments: Vec<u8> = alloc::vec![u8::MAX; values.len()];
    let mut wcss_trace = Vec::new();
    let mut iterations = 0;
    while iterations < max_iter.max(1) {
        iterations += 1;
        let changed = assign(values, &centroids, &mut assignments);
        let next = means(values, &assignments, centroids);
        let moved = (next[0] - centroids[0]).abs().max((next[1] - centroids[1]).abs());
        centroids = next;
        wcss_trace.push(wcss(values, &assignments, &centroids));
        if !changed || moved <= tol {
            break;
        }
    }
    Lloyd { centroids, assignments, iterations, wcss_trace }
}

fn assign(values: &[f64], centroids: &[f64; 2], assignments: &mut [u8]) -> bool {
    let cut = threshold_of(centroids);
    let mut changed = false;
    for (a, &v) in assignments.iter_mut().zip(values) {
        let c = u8::from(v >= cut);
        changed |= *a != c;
        *a = c;
    }
    changed
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    /// Largest value of the low cluster.
    pub low_max: f64,
    pub centroids: [f64; 2],
    pub wcss: f64,
}

/// Minimum-WCSS split of the sorted values into a non-empty prefix and
/// suffix, via prefix sums in O(n log n). Only splits between distinct
/// values are considered.
pub fn optimal_split(values: &[f64]) -> Result<Split, ClusterError> {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let total: f64 = s.iter().sum();
    let total_sq: f64 = s.iter().map(|v| v * v).sum();
    let (mut sum, mut sq) = (0.0, 0.0);
    let mut best: Option<Split> = None;
    for k in 1..n {
        sum += s[k - 1];
        sq += s[k - 1] * s[k - 1];
        if s[k - 1] == s[k] {
            continue;
        }
        let (nl, nh) = (k as f64, (n - k) as f64);
        let (ml, mh) = (sum / nl, (total - sum) / nh);
        let j = (sq - nl * ml * ml) + ((total_sq - sq) - nh * mh * mh);
        if best.is_none_or(|b| j < b.wcss) {
            best = Some(Split { low_max: s[k - 1], centroids: [ml, mh], wcss: j.max(0.0) });
        }
    }
    best.ok_or(ClusterError::Degenerate)
}

fn means(values: &[f64], assignments: &[u8], previous: [f64; 2]) -> [f64; 2] {
    let mut sum = [0.0; 2];
    let mut n = [0usize; 2];
    for (&a, &v) in assignments.iter().zip(values) {
        sum[a as usize] += v;
        n[a as usize] += 1;
    }
    // an empty cluster keeps its centroid
    core::array::from_fn(|i| if n[i] == 0 { previous[i] } else { sum[i] / n[i] as f64 })
}

/// J = Σ_k Σ_{x ∈ C_k} (x − μ_k)².
pub fn wcss(values: &[f64], assignments: &[u8], centroids: &[f64; 2]) -> f64 {
    values
        .iter()
        .zip(assignments)
        .map(|(&v, &a)| {
            let d = v - centroids[a as usize];
            d * d
        })
        .sum()
}

/// Midpoint of the two centroids: the Lloyd decision boundary.
pub fn threshold_of(centroids: &[f64; 2]) -> f64 {
    (centroids[0] + centroids[1]) / 2.0
}

/// Critical iff the response strictly exceeds the threshold.
pub fn classify(response: f64, threshold: f64) -> Mode {
    if response > threshold {
        Mode::Critical
    } else {
        Mode::Typical
    }
}

/// Convenience wrapper for integer response times with the default stopping
/// rule (100 rounds, exact convergence).
pub fn fit_responses(responses: &[u64]) -> Result<ClusterModel, ClusterError> {
    let values: Vec<f64> = responses.iter().map(|&r| r as f64).collect();
    kmeans_1d(&values, 100, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observer_example() {
        let m = fit_responses(&[43, 47, 51, 45, 49]).unwrap();
        assert_eq!(m.centroids, [44.0, 49.0]);
        assert_eq!(m.assignments, alloc::vec![0, 1, 1, 0, 1]);
        assert_eq!(m.threshold, 46.5);
        for (r, want) in [
            (43.0, Mode::Typical),
            (45.0, Mode::Typical),
            (47.0, Mode::Critical),
            (49.0, Mode::Critical),
            (51.0, Mode::Critical),
        ] {
            assert_eq!(m.classify(r), want);
            // same verdict under the integer cutoff 46
            assert_eq!(classify(r, 46.0), want);
        }
        assert_eq!(m.wcss, 2.0 + 8.0);
    }

    #[test]
    fn symmetric_pairs() {
        let m = kmeans_1d(&[0.0, 0.0, 10.0, 10.0], 10, 0.0).unwrap();
        assert_eq!(m.centroids, [0.0, 10.0]);
        assert_eq!(m.threshold, 5.0);
        assert_eq!(m.wcss, 0.0);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(kmeans_1d(&[3.0, 3.0, 3.0], 10, 0.0), Err(ClusterError::Degenerate));
        assert_eq!(kmeans_1d(&[3.0], 10, 0.0), Err(ClusterError::Degenerate));
        assert_eq!(kmeans_1d(&[], 10, 0.0), Err(ClusterError::Degenerate));
        assert_eq!(kmeans_1d(&[1.0, f64::NAN], 10, 0.0), Err(ClusterError::NonFinite));
    }

    #[test]
    fn classify_boundary_is_typical() {
        assert_eq!(classify(46.5, 46.5), Mode::Typical);
        assert_eq!(classify(47.0, 46.5), Mode::Critical);
        assert_eq!(classify(45.0, 46.5), Mode::Typical);
        assert_eq!(threshold_of(&[0.0, 10.0]), 5.0);
    }

    #[test]
    fn escapes_lloyd_local_optimum() {
        // from min/max seeds Lloyd settles on {0,4} | {5,9,10} (J = 22);
        // {0,4,5} | {9,10} has J = 14.5
        let vals = [0.0, 4.0, 5.0, 9.0, 10.0];
        let plain = lloyd(&vals, [0.0, 10.0], 100, 0.0);
        let m = kmeans_1d(&vals, 100, 0.0).unwrap();
        let split = optimal_split(&vals).unwrap();
        assert_eq!(plain.wcss(), 22.0);
        assert!((m.wcss - 14.5).abs() < 1e-9);
        assert!((split.wcss - 14.5).abs() < 1e-9);
        assert_eq!(m.assignments, alloc::vec![0, 0, 0, 1, 1]);
    }

    #[test]
    fn lloyd_trace_non_increasing() {
        let vals = [1.0, 2.0, 2.5, 7.0, 8.0, 30.0, 31.0, 2.2];
        let run = lloyd(&vals, [1.0, 31.0], 50, 0.0);
        for w in run.wcss_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
    }

    #[test]
    fn interval_partition() {
        let vals = [5.0, 1.0, 9.0, 2.0, 7.5, 3.3, 8.8, 4.1];
        let m = kmeans_1d(&vals, 100, 0.0).unwrap();
        let max_low = vals.iter().zip(&m.assignments).filter(|(_, &a)| a == 0).map(|(v, _)| *v).fold(f64::MIN, f64::max);
        let min_high = vals.iter().zip(&m.assignments).filter(|(_, &a)| a == 1).map(|(v, _)| *v).fold(f64::MAX, f64::min);
        assert!(max_low < min_high);
        assert!(m.centroids[0] <= m.threshold && m.threshold <= m.centroids[1]);
    }
}
