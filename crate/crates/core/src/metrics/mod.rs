//! Page-level and element-level evaluation metrics.
//!
//! Pixel metrics (`page_iou`, `label_page_iou`, `pix_cov`) work on a raster
//! grid with half-open pixel membership after rounding box coordinates.
//! Element metrics (`recall_at_50`, `map_at_50`) use continuous box IoU and
//! greedy confidence-ranked matching.

pub mod labels;
pub mod matching;
pub mod raster;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geom::{BBox, Viewport};
use crate::scalar::Scalar;

pub use labels::{LabelSpace, LabelSpaceKind, UnknownLabel, UNKNOWN_LABEL};
pub use matching::{ClassRanking, MATCH_IOU};
pub use raster::{pixel_stats, union_area, PixelStats};

/// Pixel domain of one image.
pub type RasterGrid = Viewport;

/// One box of a ground-truth or prediction set.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation<T = f64> {
    pub bbox: BBox<T>,
    pub label: u32,
    pub confidence: Option<f64>,
}

impl<T: Scalar> Annotation<T> {
    pub fn new(bbox: BBox<T>, label: u32) -> Self {
        Self {
            bbox,
            label,
            confidence: None,
        }
    }

    pub fn with_confidence(mut self, confidence: Option<f64>) -> Self {
        self.confidence = confidence;
        self
    }

    /// Ranking score; predictions without a confidence rank as 1.0.
    pub fn score(&self) -> f64 {
        self.confidence.unwrap_or(1.0)
    }
}

fn labelled<T: Scalar>(set: &[Annotation<T>]) -> Vec<(BBox<T>, u32)> {
    set.iter().map(|a| (a.bbox, a.label)).collect()
}

fn stats<T: Scalar>(pred: &[Annotation<T>], gt: &[Annotation<T>], grid: RasterGrid) -> PixelStats {
    pixel_stats(&labelled(pred), &labelled(gt), grid)
}

fn ratio_or(num: u64, den: u64, empty: f64) -> f64 {
    if den == 0 {
        empty
    } else {
        num as f64 / den as f64
    }
}

/// Pixel IoU of the prediction and ground-truth unions; 1.0 when both are
/// empty.
pub fn page_iou<T: Scalar>(pred: &[Annotation<T>], gt: &[Annotation<T>], grid: RasterGrid) -> f64 {
    let s = stats(pred, gt, grid);
    ratio_or(s.intersection, s.union, 1.0)
}

/// Pixels whose smallest-box labels agree, over the union of both sets; 1.0
/// when both are empty.
pub fn label_page_iou<T: Scalar>(pred: &[Annotation<T>], gt: &[Annotation<T>], grid: RasterGrid) -> f64 {
    let s = stats(pred, gt, grid);
    ratio_or(s.label_agree, s.union, 1.0)
}

/// Share of ground-truth pixels covered by predictions; undefined when the
/// ground truth covers no pixel.
pub fn pix_cov<T: Scalar>(pred: &[Annotation<T>], gt: &[Annotation<T>], grid: RasterGrid) -> Option<f64> {
    let s = stats(pred, gt, grid);
    (s.gt_area > 0).then(|| s.intersection as f64 / s.gt_area as f64)
}

/// Fraction of ground-truth boxes claimed under greedy matching; 1.0 for
/// an empty ground truth.
pub fn recall_at_50<T: Scalar>(pred: &[Annotation<T>], gt: &[Annotation<T>], label_aware: bool) -> f64 {
    if gt.is_empty() {
        return 1.0;
    }
    matching::matched_count(pred, gt, label_aware) as f64 / gt.len() as f64
}

/// Mean per-class AP over classes present in the ground truth.
pub fn map_at_50<T: Scalar>(pred: &[Annotation<T>], gt: &[Annotation<T>]) -> Option<f64> {
    let cr = matching::class_rankings(pred, gt);
    matching::mean_average_precision(cr.iter().map(|c| &c.1))
}

/// Metric values; `None` marks a metric that is undefined or not requested.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub page_iou: Option<f64>,
    pub label_page_iou: Option<f64>,
    /// Class-agnostic.
    pub recall_at_50: Option<f64>,
    pub label_recall_at_50: Option<f64>,
    pub pix_cov: Option<f64>,
    pub map_at_50: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    PageIou,
    LabelPageIou,
    RecallAt50,
    LabelRecallAt50,
    PixCov,
    MapAt50,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::PageIou,
        Metric::LabelPageIou,
        Metric::RecallAt50,
        Metric::LabelRecallAt50,
        Metric::PixCov,
        Metric::MapAt50,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::PageIou => "page_iou",
            Metric::LabelPageIou => "label_page_iou",
            Metric::RecallAt50 => "recall_at_50",
            Metric::LabelRecallAt50 => "label_recall_at_50",
            Metric::PixCov => "pix_cov",
            Metric::MapAt50 => "map_at_50",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown metric `{s}`"))
    }
}

impl MatchReport {
    pub fn get(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::PageIou => self.page_iou,
            Metric::LabelPageIou => self.label_page_iou,
            Metric::RecallAt50 => self.recall_at_50,
            Metric::LabelRecallAt50 => self.label_recall_at_50,
            Metric::PixCov => self.pix_cov,
            Metric::MapAt50 => self.map_at_50,
        }
    }

    fn slot(&mut self, m: Metric) -> &mut Option<f64> {
        match m {
            Metric::PageIou => &mut self.page_iou,
            Metric::LabelPageIou => &mut self.label_page_iou,
            Metric::RecallAt50 => &mut self.recall_at_50,
            Metric::LabelRecallAt50 => &mut self.label_recall_at_50,
            Metric::PixCov => &mut self.pix_cov,
            Metric::MapAt50 => &mut self.map_at_50,
        }
    }

    /// Clears every metric not in `keep`.
    pub fn restrict(mut self, keep: &[Metric]) -> Self {
        for m in Metric::ALL {
            if !keep.contains(&m) {
                *self.slot(m) = None;
            }
        }
        self
    }
}

/// Everything computed for one image, including the raw counts needed for
/// pooled aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageEval {
    pub page_id: String,
    pub report: MatchReport,
    pub pixels: PixelStats,
    pub n_gt: usize,
    pub matched: usize,
    pub matched_label: usize,
    pub classes: Vec<(u32, ClassRanking)>,
}

pub fn evaluate_image<T: Scalar>(
    page_id: impl Into<String>,
    pred: &[Annotation<T>],
    gt: &[Annotation<T>],
    grid: RasterGrid,
) -> ImageEval {
    let pixels = stats(pred, gt, grid);
    let matched = matching::matched_count(pred, gt, false);
    let matched_label = matching::matched_count(pred, gt, true);
    let classes = matching::class_rankings(pred, gt);
    let n_gt = gt.len();
    let report = MatchReport {
        page_iou: Some(ratio_or(pixels.intersection, pixels.union, 1.0)),
        label_page_iou: Some(ratio_or(pixels.label_agree, pixels.union, 1.0)),
        recall_at_50: Some(ratio_or(matched as u64, n_gt as u64, 1.0)),
        label_recall_at_50: Some(ratio_or(matched_label as u64, n_gt as u64, 1.0)),
        pix_cov: (pixels.gt_area > 0).then(|| pixels.intersection as f64 / pixels.gt_area as f64),
        map_at_50: matching::mean_average_precision(classes.iter().map(|c| &c.1)),
    };
    ImageEval {
        page_id: page_id.into(),
        report,
        pixels,
        n_gt,
        matched,
        matched_label,
        classes,
    }
}

/// One image to evaluate: predictions, ground truth and the pixel grid.
#[derive(Debug, Clone)]
pub struct EvalInput<T = f64> {
    pub page_id: String,
    pub grid: RasterGrid,
    pub pred: Vec<Annotation<T>>,
    pub gt: Vec<Annotation<T>>,
}

/// Evaluates images in parallel; output order follows input order.
pub fn evaluate_all<T: Scalar>(inputs: &[EvalInput<T>]) -> Vec<ImageEval> {
    inputs
        .par_iter()
        .map(|i| evaluate_image(i.page_id.clone(), &i.pred, &i.gt, i.grid))
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Unweighted mean over images, skipping images where a metric is
    /// undefined.
    #[default]
    Macro,
    /// Pixels, matches and ranked detections pooled over all images.
    Micro,
}

impl std::str::FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "macro" => Ok(Aggregation::Macro),
            "micro" => Ok(Aggregation::Micro),
            _ => Err(format!("unknown aggregation `{s}` (expected macro or micro)")),
        }
    }
}

/// Running per-metric sums for the macro mean. Merging is associative.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MacroAccumulator {
    sums: [f64; 6],
    counts: [usize; 6],
}

impl MacroAccumulator {
    pub fn add(&mut self, r: &MatchReport) {
        for (i, m) in Metric::ALL.into_iter().enumerate() {
            if let Some(v) = r.get(m) {
                self.sums[i] += v;
                self.counts[i] += 1;
            }
        }
    }

    pub fn merge(mut self, o: MacroAccumulator) -> Self {
        for i in 0..6 {
            self.sums[i] += o.sums[i];
            self.counts[i] += o.counts[i];
        }
        self
    }

    pub fn finish(&self) -> MatchReport {
        let mut out = MatchReport::default();
        for (i, m) in Metric::ALL.into_iter().enumerate() {
            *out.slot(m) = (self.counts[i] > 0).then(|| self.sums[i] / self.counts[i] as f64);
        }
        out
    }
}

pub fn aggregate(images: &[ImageEval], mode: Aggregation) -> MatchReport {
    match mode {
        Aggregation::Macro => images
            .iter()
            .fold(MacroAccumulator::default(), |mut acc, e| {
                acc.add(&e.report);
                acc
            })
            .finish(),
        Aggregation::Micro => micro(images),
    }
}

fn micro(images: &[ImageEval]) -> MatchReport {
    let mut px = PixelStats::default();
    let (mut n_gt, mut matched, mut matched_label) = (0u64, 0u64, 0u64);
    let mut by_class: std::collections::BTreeMap<u32, Vec<&ClassRanking>> = Default::default();
    for e in images {
        px.add(&e.pixels);
        n_gt += e.n_gt as u64;
        matched += e.matched as u64;
        matched_label += e.matched_label as u64;
        for (k, c) in &e.classes {
            by_class.entry(*k).or_default().push(c);
        }
    }
    let pooled: Vec<ClassRanking> = by_class.into_values().map(ClassRanking::pool).collect();
    MatchReport {
        page_iou: Some(ratio_or(px.intersection, px.union, 1.0)),
        label_page_iou: Some(ratio_or(px.label_agree, px.union, 1.0)),
        recall_at_50: Some(ratio_or(matched, n_gt, 1.0)),
        label_recall_at_50: Some(ratio_or(matched_label, n_gt, 1.0)),
        pix_cov: (px.gt_area > 0).then(|| px.intersection as f64 / px.gt_area as f64),
        map_at_50: matching::mean_average_precision(&pooled),
    }
}
