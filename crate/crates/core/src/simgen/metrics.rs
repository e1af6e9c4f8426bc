use crate::boxes::{iou, OrientedBox};
use crate::error::{Error, Result};
use crate::simgen::lidar::TruthLabel;

/// Counts for the binary foreground class (NSSO or dynamic).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PointMetrics {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl PointMetrics {
    pub fn merge(&mut self, other: &PointMetrics) {
        self.true_positives += other.true_positives;
        self.false_positives += other.false_positives;
        self.false_negatives += other.false_negatives;
    }

    /// 1 when nothing was predicted and nothing was there; NaN when nothing
    /// was predicted but the truth has foreground.
    pub fn precision(&self) -> f64 {
        let pred = self.true_positives + self.false_positives;
        if pred == 0 {
            return if self.false_negatives == 0 { 1.0 } else { f64::NAN };
        }
        self.true_positives as f64 / pred as f64
    }

    /// 1 when the truth has no foreground.
    pub fn recall(&self) -> f64 {
        let truth = self.true_positives + self.false_negatives;
        if truth == 0 {
            return 1.0;
        }
        self.true_positives as f64 / truth as f64
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p.is_nan() || p + r == 0.0 {
            return 0.0;
        }
        2.0 * p * r / (p + r)
    }
}

/// Scores a per-point foreground mask against truth labels.
pub fn point_metrics(predicted: &[bool], truth: &[TruthLabel]) -> Result<PointMetrics> {
    if predicted.len() != truth.len() {
        return Err(Error::Domain(format!(
            "{} predictions for {} labeled points",
            predicted.len(),
            truth.len()
        )));
    }
    let mut m = PointMetrics::default();
    for (&p, l) in predicted.iter().zip(truth) {
        match (p, l.is_foreground()) {
            (true, true) => m.true_positives += 1,
            (true, false) => m.false_positives += 1,
            (false, true) => m.false_negatives += 1,
            (false, false) => {}
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoxMetrics {
    pub predicted: usize,
    pub truth: usize,
    /// Truth boxes matched at or above the IoU threshold.
    pub detected: usize,
    /// IoU of every accepted match, in match order.
    pub ious: Vec<f64>,
}

impl BoxMetrics {
    pub fn merge(&mut self, other: &BoxMetrics) {
        self.predicted += other.predicted;
        self.truth += other.truth;
        self.detected += other.detected;
        self.ious.extend_from_slice(&other.ious);
    }

    pub fn precision(&self) -> f64 {
        if self.predicted == 0 {
            return if self.truth == 0 { 1.0 } else { f64::NAN };
        }
        self.detected as f64 / self.predicted as f64
    }

    pub fn recall(&self) -> f64 {
        if self.truth == 0 {
            return 1.0;
        }
        self.detected as f64 / self.truth as f64
    }

    /// Mean IoU over accepted matches; 0 when there are none.
    pub fn mean_iou(&self) -> f64 {
        if self.ious.is_empty() {
            return 0.0;
        }
        self.ious.iter().sum::<f64>() / self.ious.len() as f64
    }
}

/// Greedy one-to-one matching by descending IoU.
pub fn box_metrics(predicted: &[OrientedBox], truth: &[OrientedBox], iou_threshold: f64) -> Result<BoxMetrics> {
    if !(iou_threshold > 0.0 && iou_threshold <= 1.0) {
        return Err(Error::Domain(format!("IoU threshold {iou_threshold} outside (0, 1]")));
    }
    let mut pairs = Vec::new();
    for (i, p) in predicted.iter().enumerate() {
        for (j, t) in truth.iter().enumerate() {
            let v = iou(p, t);
            if v > 0.0 {
                pairs.push((v, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_p = vec![false; predicted.len()];
    let mut used_t = vec![false; truth.len()];
    let mut m = BoxMetrics {
        predicted: predicted.len(),
        truth: truth.len(),
        ..Default::default()
    };
    for (v, i, j) in pairs {
        if used_p[i] || used_t[j] {
            continue;
        }
        used_p[i] = true;
        used_t[j] = true;
        if v >= iou_threshold {
            m.detected += 1;
            m.ious.push(v);
        }
    }
    Ok(m)
}
