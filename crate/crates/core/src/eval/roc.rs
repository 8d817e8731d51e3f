use serde::Serialize;

/// ROC curve with the out-of-distribution class as positives. A batch is
/// flagged when its score is at or below the threshold, so lower scores
/// rank as more anomalous.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RocResult {
    /// `(false positive rate, true positive rate)`, from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    pub auroc: f64,
}

impl RocResult {
    pub fn trapezoid_area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) * 0.5)
            .sum()
    }
}

/// ROC over all distinct thresholds and the area under it.
///
/// The area is `P(out < in) + P(out == in) / 2` over all cross-class
/// pairs, which is what the trapezoidal rule gives on this curve.
///
/// # Panics
///
/// If either list is empty.
pub fn roc_auroc(scores_in: &[f64], scores_out: &[f64]) -> RocResult {
    assert!(
        !scores_in.is_empty() && !scores_out.is_empty(),
        "ROC needs scores from both classes"
    );
    let mut sorted_in = scores_in.to_vec();
    sorted_in.sort_by(f64::total_cmp);
    let mut sorted_out = scores_out.to_vec();
    sorted_out.sort_by(f64::total_cmp);

    let (mut below, mut ties) = (0u64, 0u64);
    for &o in &sorted_out {
        let lo = sorted_in.partition_point(|&v| v < o);
        let hi = sorted_in.partition_point(|&v| v <= o);
        below += (sorted_in.len() - hi) as u64;
        ties += (hi - lo) as u64;
    }
    let pairs = (sorted_in.len() * sorted_out.len()) as f64;
    let auroc = (below as f64 + 0.5 * ties as f64) / pairs;

    let mut thresholds: Vec<f64> = sorted_in.iter().chain(&sorted_out).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup_by(|a, b| a == b);
    let (n_in, n_out) = (sorted_in.len() as f64, sorted_out.len() as f64);
    let mut points = Vec::with_capacity(thresholds.len() + 1);
    points.push((0.0, 0.0));
    for t in thresholds {
        let fp = sorted_in.partition_point(|&v| v <= t);
        let tp = sorted_out.partition_point(|&v| v <= t);
        points.push((fp as f64 / n_in, tp as f64 / n_out));
    }
    RocResult { points, auroc }
}
