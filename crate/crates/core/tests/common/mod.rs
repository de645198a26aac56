//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use screenparse::metrics::Annotation;
use screenparse::{BBox, PageRecord, Viewport};

#[derive(Debug, Clone, Copy)]
pub struct RawBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub label: u32,
    pub conf: f64,
}

impl RawBox {
    pub fn annotation(&self) -> Annotation<f64> {
        Annotation::new(BBox::new(self.x1, self.y1, self.x2, self.y2), self.label).with_confidence(Some(self.conf))
    }

    fn rounded(&self) -> (i64, i64, i64, i64) {
        (self.x1.round() as i64, self.y1.round() as i64, self.x2.round() as i64, self.y2.round() as i64)
    }

    fn covers(&self, i: i64, j: i64) -> bool {
        let (x1, y1, x2, y2) = self.rounded();
        x1 <= i && i < x2 && y1 <= j && j < y2
    }

    fn pixel_area(&self) -> i64 {
        let (x1, y1, x2, y2) = self.rounded();
        (x2 - x1).max(0) * (y2 - y1).max(0)
    }
}

pub fn annotations(v: &[RawBox]) -> Vec<Annotation<f64>> {
    v.iter().map(RawBox::annotation).collect()
}

/// Label of the smallest covering box at pixel (i, j); lower index on ties.
fn label_at(set: &[RawBox], i: i64, j: i64) -> Option<u32> {
    set.iter()
        .enumerate()
        .filter(|(_, b)| b.covers(i, j))
        .min_by_key(|(k, b)| (b.pixel_area(), *k))
        .map(|(_, b)| b.label)
}

/// (intersection, union, gt pixels, label agreement) by visiting every pixel.
pub fn pixel_counts(pred: &[RawBox], gt: &[RawBox], w: u32, h: u32) -> (u64, u64, u64, u64) {
    let (mut inter, mut union, mut gt_px, mut agree) = (0, 0, 0, 0);
    for j in 0..h as i64 {
        for i in 0..w as i64 {
            let lp = label_at(pred, i, j);
            let lg = label_at(gt, i, j);
            if lp.is_some() || lg.is_some() {
                union += 1;
            }
            if lg.is_some() {
                gt_px += 1;
                if lp.is_some() {
                    inter += 1;
                }
                if lp == lg {
                    agree += 1;
                }
            }
        }
    }
    (inter, union, gt_px, agree)
}

pub fn box_iou(a: &RawBox, b: &RawBox) -> f64 {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    let area = |r: &RawBox| (r.x2 - r.x1).max(0.0) * (r.y2 - r.y1).max(0.0);
    let u = area(a) + area(b) - inter;
    if u <= 0.0 {
        0.0
    } else {
        inter / u
    }
}

/// Greedy matching written out step by step: returns, per prediction in
/// ranking order, whether it found a partner.
fn greedy(pred: &[RawBox], gt: &[RawBox], label_aware: bool) -> Vec<(f64, bool)> {
    let mut order: Vec<usize> = (0..pred.len()).collect();
    // stable: equal confidences keep input order
    order.sort_by(|a, b| pred[*b].conf.partial_cmp(&pred[*a].conf).unwrap());
    let mut used = vec![false; gt.len()];
    let mut out = Vec::new();
    for p in order {
        let mut best = -1.0;
        let mut best_g = None;
        for g in 0..gt.len() {
            if used[g] || (label_aware && gt[g].label != pred[p].label) {
                continue;
            }
            let v = box_iou(&pred[p], &gt[g]);
            if v >= 0.5 && v > best {
                best = v;
                best_g = Some(g);
            }
        }
        if let Some(g) = best_g {
            used[g] = true;
        }
        out.push((pred[p].conf, best_g.is_some()));
    }
    out
}

pub fn recall(pred: &[RawBox], gt: &[RawBox], label_aware: bool) -> f64 {
    if gt.is_empty() {
        return 1.0;
    }
    let hits = greedy(pred, gt, label_aware).iter().filter(|(_, m)| *m).count();
    hits as f64 / gt.len() as f64
}

/// VOC-style all-point AP with sentinel end points.
fn average_precision(hits: &[bool], n_gt: usize) -> f64 {
    let mut tp = 0.0;
    let mut mrec = vec![0.0];
    let mut mpre = vec![0.0];
    for (k, h) in hits.iter().enumerate() {
        if *h {
            tp += 1.0;
        }
        mrec.push(tp / n_gt as f64);
        mpre.push(tp / (k + 1) as f64);
    }
    mrec.push(1.0);
    mpre.push(0.0);
    for i in (0..mpre.len() - 1).rev() {
        mpre[i] = mpre[i].max(mpre[i + 1]);
    }
    let mut ap = 0.0;
    for i in 0..mrec.len() - 1 {
        if mrec[i + 1] != mrec[i] {
            ap += (mrec[i + 1] - mrec[i]) * mpre[i + 1];
        }
    }
    ap
}

pub fn map50(pred: &[RawBox], gt: &[RawBox]) -> Option<f64> {
    let mut classes: Vec<u32> = gt.iter().map(|g| g.label).collect();
    classes.sort();
    classes.dedup();
    if classes.is_empty() {
        return None;
    }
    let mut total = 0.0;
    for k in &classes {
        let p: Vec<RawBox> = pred.iter().filter(|b| b.label == *k).copied().collect();
        let g: Vec<RawBox> = gt.iter().filter(|b| b.label == *k).copied().collect();
        let hits: Vec<bool> = greedy(&p, &g, false).into_iter().map(|(_, m)| m).collect();
        total += average_precision(&hits, g.len());
    }
    Some(total / classes.len() as f64)
}

fn bin(v: f64, extent: f64) -> i64 {
    ((v * 500.0 / extent) + 0.5).floor().clamp(0.0, 500.0) as i64
}

/// Element indices in markup order: depth-first, siblings and roots sorted
/// by their quantized top edge, then left edge, then index.
pub fn markup_order(page: &PageRecord) -> Vec<usize> {
    let vp: Viewport = page.viewport;
    let key = |i: usize| {
        let b = page.elements[i].bbox;
        (bin(b.y1, vp.height as f64), bin(b.x1, vp.width as f64), i)
    };
    let sorted = |mut v: Vec<usize>| {
        v.sort_by_key(|&i| key(i));
        v
    };
    let mut out = Vec::new();
    fn visit(i: usize, page: &PageRecord, out: &mut Vec<usize>, sorted: &dyn Fn(Vec<usize>) -> Vec<usize>) {
        out.push(i);
        for c in sorted(page.elements[i].children.clone()) {
            visit(c, page, out, sorted);
        }
    }
    let roots = sorted(page.roots().collect());
    for r in roots {
        visit(r, page, &mut out, &sorted);
    }
    out
}
