//! Confidence-ranked one-to-one matching and average precision.

use crate::geom::iou;
use crate::scalar::Scalar;

use super::Annotation;

pub const MATCH_IOU: f64 = 0.5;

/// Prediction indices in ranking order: confidence descending, input order
/// breaking ties.
pub fn ranking<T: Scalar>(pred: &[Annotation<T>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pred.len()).collect();
    order.sort_by(|&a, &b| pred[b].score().total_cmp(&pred[a].score()));
    order
}

/// Greedy assignment. Returns, per prediction, the ground-truth index it
/// claimed. Each prediction in ranking order takes the still-unmatched
/// ground truth of highest IoU, provided that IoU is at least 0.5; equal IoU
/// goes to the lower ground-truth index.
pub fn greedy_match<T: Scalar>(
    pred: &[Annotation<T>],
    gt: &[Annotation<T>],
    label_aware: bool,
) -> Vec<Option<usize>> {
    let thr = T::from_f64_lossy(MATCH_IOU);
    let mut taken = vec![false; gt.len()];
    let mut out = vec![None; pred.len()];
    for p in ranking(pred) {
        let mut best: Option<(usize, T)> = None;
        for (g, ann) in gt.iter().enumerate() {
            if taken[g] || (label_aware && ann.label != pred[p].label) {
                continue;
            }
            let v = iou(&pred[p].bbox, &ann.bbox);
            if v >= thr && best.is_none_or(|(_, b)| v > b) {
                best = Some((g, v));
            }
        }
        if let Some((g, _)) = best {
            taken[g] = true;
            out[p] = Some(g);
        }
    }
    out
}

pub fn matched_count<T: Scalar>(pred: &[Annotation<T>], gt: &[Annotation<T>], label_aware: bool) -> usize {
    greedy_match(pred, gt, label_aware).iter().flatten().count()
}

/// Ranked detections of one class: `(confidence, true_positive)` in ranking
/// order, with the number of ground-truth instances of that class.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassRanking {
    pub n_gt: usize,
    pub ranked: Vec<(f64, bool)>,
}

impl ClassRanking {
    /// Pools rankings from several images. Detections are re-sorted by
    /// confidence; equal confidences keep image order, then rank order.
    pub fn pool<'a>(parts: impl IntoIterator<Item = &'a ClassRanking>) -> ClassRanking {
        let mut n_gt = 0;
        let mut ranked = Vec::new();
        for p in parts {
            n_gt += p.n_gt;
            ranked.extend_from_slice(&p.ranked);
        }
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
        ClassRanking { n_gt, ranked }
    }

    /// All-point average precision: area under the precision/recall curve
    /// after replacing each precision by the maximum precision at any equal
    /// or higher recall. `None` when the class has no ground truth.
    pub fn average_precision(&self) -> Option<f64> {
        if self.n_gt == 0 {
            return None;
        }
        let mut tp = 0usize;
        let mut points = Vec::with_capacity(self.ranked.len());
        for (k, &(_, hit)) in self.ranked.iter().enumerate() {
            tp += usize::from(hit);
            points.push((tp as f64 / self.n_gt as f64, tp as f64 / (k + 1) as f64));
        }
        let mut envelope = 0.0f64;
        for p in points.iter_mut().rev() {
            envelope = envelope.max(p.1);
            p.1 = envelope;
        }
        let mut ap = 0.0;
        let mut prev_recall = 0.0;
        for (r, p) in points {
            ap += (r - prev_recall) * p;
            prev_recall = r;
        }
        Some(ap)
    }
}

/// Per-class rankings for every class present in the ground truth, keyed by
/// label id in ascending order.
pub fn class_rankings<T: Scalar>(pred: &[Annotation<T>], gt: &[Annotation<T>]) -> Vec<(u32, ClassRanking)> {
    let mut labels: Vec<u32> = gt.iter().map(|g| g.label).collect();
    labels.sort_unstable();
    labels.dedup();
    labels
        .into_iter()
        .map(|k| {
            let p: Vec<Annotation<T>> = pred.iter().filter(|a| a.label == k).cloned().collect();
            let g: Vec<Annotation<T>> = gt.iter().filter(|a| a.label == k).cloned().collect();
            let assigned = greedy_match(&p, &g, false);
            let ranked = ranking(&p)
                .into_iter()
                .map(|i| (p[i].score(), assigned[i].is_some()))
                .collect();
            (k, ClassRanking { n_gt: g.len(), ranked })
        })
        .collect()
}

pub fn mean_average_precision<'a>(classes: impl IntoIterator<Item = &'a ClassRanking>) -> Option<f64> {
    let aps: Vec<f64> = classes.into_iter().filter_map(ClassRanking::average_precision).collect();
    (!aps.is_empty()).then(|| aps.iter().sum::<f64>() / aps.len() as f64)
}
