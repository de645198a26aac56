//! Annotation cleaning: turns raw ingested element records into clean, dense
//! page annotations.
//!
//! Stages run in a fixed order: geometry/visibility filtering, duplicate
//! suppression, the judge filter, page-level hash dedup, and per-class
//! ground-truth cleanup. Element-level stages are pure per page; page dedup
//! keeps the set of accepted hashes and is the only order-dependent stage.

pub mod dedup;
pub mod judge;
pub mod report;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{containment_ratio, iou};
use crate::page::PageRecord;
use crate::scalar::Scalar;
use crate::taxonomy::{Taxonomy, UiClass};

pub use dedup::{dhash, dhash_file, hamming, BkTree, PageDeduper};
pub use judge::{CommandJudge, ConstantJudge, IngestedJudge, Judge, JudgeError, RuleJudge};
pub use report::{FilterReport, Provenance, Reason, RemovedElement, Stage, StageReport, Unit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// Boxes below this area are dropped unless their class is interactive.
    pub min_area_px2: f64,
    /// Boxes above this fraction of the viewport area are dropped unless Image.
    pub max_area_frac: f64,
    pub dup_iou: f64,
    pub cleanup_iou: f64,
    pub cleanup_containment: f64,
    pub hash_radius: u32,
    pub judge_threshold: f64,
    /// Minimum visible fraction of a box inside the viewport.
    pub min_visible_frac: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_area_px2: 4.0,
            max_area_frac: 0.5,
            dup_iou: 0.95,
            cleanup_iou: 0.65,
            cleanup_containment: 0.65,
            hash_radius: 8,
            judge_threshold: 0.70,
            min_visible_frac: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let unit = |name: &'static str, value: f64| {
            if (0.0..=1.0).contains(&value) {
                Ok(())
            } else {
                Err(ConfigError::OutOfRange { name, value, range: "[0, 1]" })
            }
        };
        if !(self.min_area_px2 >= 0.0 && self.min_area_px2.is_finite()) {
            return Err(ConfigError::OutOfRange {
                name: "min_area_px2",
                value: self.min_area_px2,
                range: "[0, inf)",
            });
        }
        unit("max_area_frac", self.max_area_frac)?;
        unit("dup_iou", self.dup_iou)?;
        unit("cleanup_iou", self.cleanup_iou)?;
        unit("cleanup_containment", self.cleanup_containment)?;
        unit("judge_threshold", self.judge_threshold)?;
        unit("min_visible_frac", self.min_visible_frac)?;
        if self.hash_radius > 64 {
            return Err(ConfigError::OutOfRange {
                name: "hash_radius",
                value: self.hash_radius as f64,
                range: "0..=64",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnJudgeError {
    #[default]
    Keep,
    Drop,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("page {0} has neither a phash nor a readable screenshot")]
    MissingHash(String),
}

/// Element removals chosen by one stage, as `(index, reason)` pairs in index order.
pub type Removals = Vec<(usize, Reason)>;

/// Geometric and visibility filtering.
pub fn geometry_removals<T: Scalar>(
    page: &PageRecord<T>,
    cfg: &FilterConfig,
    taxonomy: &Taxonomy,
) -> Removals {
    let vp = page.viewport.as_box::<T>();
    let vp_area = page.viewport.area();
    page.elements
        .iter()
        .enumerate()
        .filter_map(|(i, e)| {
            let b = &e.bbox;
            let reason = if !b.is_valid() {
                Some(Reason::InvalidBox)
            } else {
                let area = b.area().to_f64_lossy();
                let visible = b.intersection_area(&vp).to_f64_lossy();
                if visible <= 0.0 || visible / area < cfg.min_visible_frac {
                    Some(Reason::OffScreen)
                } else if area < cfg.min_area_px2 && !taxonomy.is_interactive(e.class) {
                    Some(Reason::Tiny)
                } else if area > cfg.max_area_frac * vp_area && e.class != UiClass::IMAGE {
                    Some(Reason::Oversized)
                } else {
                    None
                }
            };
            reason.map(|r| (i, r))
        })
        .collect()
}

/// Near-duplicate suppression: greedily keeps elements in preference order
/// (interactive classes first, then lower index) and drops any element whose
/// IoU with an already kept one reaches `dup_iou`.
pub fn duplicate_removals<T: Scalar>(
    page: &PageRecord<T>,
    cfg: &FilterConfig,
    taxonomy: &Taxonomy,
) -> Removals {
    let mut order: Vec<usize> = (0..page.elements.len()).collect();
    order.sort_by_key(|&i| (!taxonomy.is_interactive(page.elements[i].class), i));
    let mut kept: Vec<usize> = Vec::new();
    let mut removed = Vec::new();
    for i in order {
        let b = &page.elements[i].bbox;
        let dup = kept
            .iter()
            .any(|&k| iou(b, &page.elements[k].bbox).to_f64_lossy() >= cfg.dup_iou);
        if dup {
            removed.push((i, Reason::Duplicate));
        } else {
            kept.push(i);
        }
    }
    removed.sort_unstable();
    removed
}

struct DisjointSet(Vec<usize>);

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Per-class duplicate cleanup. Same-class pairs with IoU above `cleanup_iou`
/// are linked, as are atomic-class pairs with containment above
/// `cleanup_containment`; linked elements form clusters (transitively). Each
/// cluster keeps its largest box for container classes and its smallest for
/// atomic classes, ties going to the lower index.
pub fn cleanup_removals<T: Scalar>(
    page: &PageRecord<T>,
    cfg: &FilterConfig,
    taxonomy: &Taxonomy,
) -> Removals {
    let n = page.elements.len();
    let mut ds = DisjointSet::new(n);
    let mut by_containment = vec![false; n];
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); crate::taxonomy::NUM_CLASSES];
    for (i, e) in page.elements.iter().enumerate() {
        by_class[e.class.index()].push(i);
    }
    for members in by_class.iter().filter(|m| m.len() > 1) {
        let atomic = !taxonomy.is_container(page.elements[members[0]].class);
        for (x, &i) in members.iter().enumerate() {
            for &j in &members[x + 1..] {
                let (a, b) = (&page.elements[i].bbox, &page.elements[j].bbox);
                if iou(a, b).to_f64_lossy() > cfg.cleanup_iou {
                    ds.union(i, j);
                } else if atomic && containment_ratio(a, b).to_f64_lossy() > cfg.cleanup_containment {
                    ds.union(i, j);
                    by_containment[i] = true;
                    by_containment[j] = true;
                }
            }
        }
    }
    let mut winner: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let root = ds.find(i);
        let container = taxonomy.is_container(page.elements[i].class);
        let area = page.elements[i].bbox.area();
        winner[root] = Some(match winner[root] {
            None => i,
            Some(w) => {
                let wa = page.elements[w].bbox.area();
                let better = if container { area > wa } else { area < wa };
                if better {
                    i
                } else {
                    w
                }
            }
        });
    }
    (0..n)
        .filter_map(|i| {
            let root = ds.find(i);
            (winner[root] != Some(i)).then(|| {
                let reason = if by_containment[i] {
                    Reason::CleanupContainment
                } else {
                    Reason::CleanupOverlap
                };
                (i, reason)
            })
        })
        .collect()
}

/// A page moving through the pipeline, with each element's index in the page
/// as it entered.
#[derive(Debug, Clone)]
struct Working<T: Scalar> {
    page: PageRecord<T>,
    origin: Vec<usize>,
    removed: Vec<RemovedElement>,
}

impl<T: Scalar> Working<T> {
    fn new(page: PageRecord<T>) -> Self {
        let origin = (0..page.elements.len()).collect();
        Self {
            page,
            origin,
            removed: Vec::new(),
        }
    }

    fn apply(&mut self, stage: Stage, removals: Removals, report: &mut FilterReport) {
        report
            .stage_mut(stage)
            .record(self.page.elements.len(), removals.iter().map(|(_, r)| *r));
        if removals.is_empty() {
            return;
        }
        let mut keep = vec![true; self.page.elements.len()];
        for &(i, reason) in &removals {
            keep[i] = false;
            self.removed.push(RemovedElement {
                index: self.origin[i],
                class: self.page.elements[i].class,
                stage,
                reason,
            });
        }
        let (page, _) = self.page.retain_elements(&keep);
        self.origin = self
            .origin
            .iter()
            .zip(&keep)
            .filter(|(_, k)| **k)
            .map(|(o, _)| *o)
            .collect();
        self.page = page;
    }

    fn finish(mut self) -> PageRecord<T> {
        if !self.removed.is_empty() {
            self.page
                .provenance
                .get_or_insert_with(Provenance::default)
                .removed
                .extend(self.removed);
        }
        self.page
    }
}

fn run_element_stage<T: Scalar>(
    page: &PageRecord<T>,
    stage: Stage,
    removals: Removals,
) -> (PageRecord<T>, FilterReport) {
    let mut report = FilterReport::default();
    let mut w = Working::new(page.clone());
    w.apply(stage, removals, &mut report);
    (w.finish(), report)
}

pub fn filter_geometry<T: Scalar>(
    page: &PageRecord<T>,
    cfg: &FilterConfig,
    taxonomy: &Taxonomy,
) -> (PageRecord<T>, FilterReport) {
    run_element_stage(page, Stage::Geometry, geometry_removals(page, cfg, taxonomy))
}

pub fn suppress_duplicates<T: Scalar>(
    page: &PageRecord<T>,
    cfg: &FilterConfig,
    taxonomy: &Taxonomy,
) -> (PageRecord<T>, FilterReport) {
    run_element_stage(page, Stage::DuplicateSuppression, duplicate_removals(page, cfg, taxonomy))
}

pub fn cleanup_ground_truth<T: Scalar>(
    page: &PageRecord<T>,
    cfg: &FilterConfig,
    taxonomy: &Taxonomy,
) -> (PageRecord<T>, FilterReport) {
    run_element_stage(page, Stage::GroundTruthCleanup, cleanup_removals(page, cfg, taxonomy))
}

/// Resolves the page's hash, falling back to a difference hash of the
/// referenced screenshot.
pub fn page_hash<T: Scalar>(page: &PageRecord<T>) -> Result<u64, PipelineError> {
    if let Some(h) = page.phash {
        return Ok(h);
    }
    page.screenshot_path
        .as_deref()
        .and_then(|p| dhash_file(p).ok())
        .ok_or_else(|| PipelineError::MissingHash(page.page_id.clone()))
}

/// Drops pages whose hash lies within `hash_radius` of an earlier accepted
/// page. Pages without a usable hash come back as errors, in stream order.
pub fn dedup_pages<T: Scalar>(
    pages: impl IntoIterator<Item = PageRecord<T>>,
    cfg: &FilterConfig,
) -> Vec<Result<PageRecord<T>, PipelineError>> {
    let mut deduper = PageDeduper::new(cfg.hash_radius);
    pages
        .into_iter()
        .filter_map(|mut page| match page_hash(&page) {
            Err(e) => Some(Err(e)),
            Ok(h) => {
                page.phash = Some(h);
                deduper.check_and_insert(h).ok().map(|_| Ok(page))
            }
        })
        .collect()
}

/// Scores each page, persists the score on the record, and drops pages below
/// `judge_threshold`. A judge failure keeps or drops the page per `on_error`.
pub fn judge_filter<T: Scalar>(
    pages: impl IntoIterator<Item = PageRecord<T>>,
    judge: &dyn Judge<T>,
    cfg: &FilterConfig,
    on_error: OnJudgeError,
) -> Vec<PageRecord<T>> {
    pages
        .into_iter()
        .filter_map(|mut page| match apply_judge(&mut page, judge, cfg, on_error) {
            JudgeOutcome::Pass | JudgeOutcome::ErrorKept => Some(page),
            JudgeOutcome::Reject(_) => None,
        })
        .collect()
}

enum JudgeOutcome {
    Pass,
    ErrorKept,
    Reject(Reason),
}

fn apply_judge<T: Scalar>(
    page: &mut PageRecord<T>,
    judge: &dyn Judge<T>,
    cfg: &FilterConfig,
    on_error: OnJudgeError,
) -> JudgeOutcome {
    match judge.score(page) {
        Ok(score) => {
            page.judge_score = Some(score);
            if score < cfg.judge_threshold {
                JudgeOutcome::Reject(Reason::LowJudgeScore)
            } else {
                JudgeOutcome::Pass
            }
        }
        Err(e) => {
            page.provenance.get_or_insert_with(Provenance::default).judge_error = Some(e.to_string());
            match on_error {
                OnJudgeError::Keep => JudgeOutcome::ErrorKept,
                OnJudgeError::Drop => JudgeOutcome::Reject(Reason::JudgeError),
            }
        }
    }
}

/// What happened to one input page.
#[derive(Debug, Clone, PartialEq)]
pub enum PageOutcome<T: Scalar = f64> {
    Kept(PageRecord<T>),
    Dropped {
        page_id: String,
        stage: Stage,
        reason: Reason,
        detail: Option<String>,
    },
}

impl<T: Scalar> PageOutcome<T> {
    pub fn kept(self) -> Option<PageRecord<T>> {
        match self {
            PageOutcome::Kept(p) => Some(p),
            PageOutcome::Dropped { .. } => None,
        }
    }
}

enum PreDedup<T: Scalar> {
    Ready(Working<T>, Result<u64, PipelineError>),
    Dropped(PageOutcome<T>),
}

/// The composed filter stack. Holds the accepted-hash index across calls, so
/// one instance processes one corpus in order.
pub struct Pipeline<'a, T: Scalar = f64> {
    cfg: FilterConfig,
    taxonomy: Taxonomy,
    judge: &'a dyn Judge<T>,
    on_judge_error: OnJudgeError,
    deduper: PageDeduper,
    report: FilterReport,
}

impl<'a, T: Scalar> Pipeline<'a, T> {
    pub fn new(
        cfg: FilterConfig,
        taxonomy: Taxonomy,
        judge: &'a dyn Judge<T>,
        on_judge_error: OnJudgeError,
    ) -> Self {
        let deduper = PageDeduper::new(cfg.hash_radius);
        Self {
            cfg,
            taxonomy,
            judge,
            on_judge_error,
            deduper,
            report: FilterReport::default(),
        }
    }

    pub fn report(&self) -> &FilterReport {
        &self.report
    }

    pub fn into_report(self) -> FilterReport {
        self.report
    }

    pub fn process(&mut self, page: PageRecord<T>) -> PageOutcome<T> {
        self.process_batch(vec![page]).pop().expect("one in, one out")
    }

    /// Processes pages in input order. The per-page stages before dedup and
    /// the cleanup after it run on the rayon pool; dedup runs sequentially.
    pub fn process_batch(&mut self, pages: Vec<PageRecord<T>>) -> Vec<PageOutcome<T>> {
        let pre: Vec<(PreDedup<T>, FilterReport)> = pages
            .into_par_iter()
            .map(|p| self.pre_dedup(p))
            .collect();

        let mut staged = Vec::with_capacity(pre.len());
        for (item, rep) in pre {
            self.report.merge(&rep);
            staged.push(match item {
                PreDedup::Dropped(out) => Err(out),
                PreDedup::Ready(w, hash) => self.dedup_one(w, hash),
            });
        }

        let post: Vec<(PageOutcome<T>, FilterReport)> = staged
            .into_par_iter()
            .map(|s| match s {
                Err(out) => (out, FilterReport::default()),
                Ok(mut w) => {
                    let mut rep = FilterReport::default();
                    let removals = cleanup_removals(&w.page, &self.cfg, &self.taxonomy);
                    w.apply(Stage::GroundTruthCleanup, removals, &mut rep);
                    (PageOutcome::Kept(w.finish()), rep)
                }
            })
            .collect();

        post.into_iter()
            .map(|(out, rep)| {
                self.report.merge(&rep);
                out
            })
            .collect()
    }

    fn dedup_one(
        &mut self,
        mut w: Working<T>,
        hash: Result<u64, PipelineError>,
    ) -> Result<Working<T>, PageOutcome<T>> {
        let stage = self.report.stage_mut(Stage::PageDedup);
        match hash {
            Err(e) => {
                stage.record(1, [Reason::MissingHash]);
                Err(PageOutcome::Dropped {
                    page_id: w.page.page_id.clone(),
                    stage: Stage::PageDedup,
                    reason: Reason::MissingHash,
                    detail: Some(e.to_string()),
                })
            }
            Ok(h) => match self.deduper.check_and_insert(h) {
                Ok(()) => {
                    stage.record(1, []);
                    w.page.phash = Some(h);
                    Ok(w)
                }
                Err((other, dist)) => {
                    stage.record(1, [Reason::NearDuplicate]);
                    Err(PageOutcome::Dropped {
                        page_id: w.page.page_id.clone(),
                        stage: Stage::PageDedup,
                        reason: Reason::NearDuplicate,
                        detail: Some(format!("hamming {dist} to accepted hash {other:016x}")),
                    })
                }
            },
        }
    }

    fn pre_dedup(&self, mut page: PageRecord<T>) -> (PreDedup<T>, FilterReport) {
        let mut rep = FilterReport::default();
        let invalid = if !page.viewport.is_valid() {
            Some((Reason::InvalidViewport, None))
        } else {
            page.link_children_from_parents();
            page.validate_forest()
                .err()
                .map(|e| (Reason::MalformedForest, Some(e.to_string())))
        };
        if let Some((reason, detail)) = invalid {
            rep.stage_mut(Stage::Validation).record(1, [reason]);
            let out = PageOutcome::Dropped {
                page_id: page.page_id,
                stage: Stage::Validation,
                reason,
                detail,
            };
            return (PreDedup::Dropped(out), rep);
        }
        rep.stage_mut(Stage::Validation).record(1, []);

        let mut w = Working::new(page);
        let removals = geometry_removals(&w.page, &self.cfg, &self.taxonomy);
        w.apply(Stage::Geometry, removals, &mut rep);
        let removals = duplicate_removals(&w.page, &self.cfg, &self.taxonomy);
        w.apply(Stage::DuplicateSuppression, removals, &mut rep);

        match apply_judge(&mut w.page, self.judge, &self.cfg, self.on_judge_error) {
            JudgeOutcome::Reject(reason) => {
                rep.stage_mut(Stage::JudgeFilter).record(1, [reason]);
                let detail = w.page.provenance.as_ref().and_then(|p| p.judge_error.clone());
                let out = PageOutcome::Dropped {
                    page_id: w.page.page_id.clone(),
                    stage: Stage::JudgeFilter,
                    reason,
                    detail,
                };
                return (PreDedup::Dropped(out), rep);
            }
            JudgeOutcome::ErrorKept => {
                rep.stage_mut(Stage::JudgeFilter).record(1, []);
                rep.judge_errors_kept += 1;
            }
            JudgeOutcome::Pass => rep.stage_mut(Stage::JudgeFilter).record(1, []),
        }
        let hash = page_hash(&w.page);
        (PreDedup::Ready(w, hash), rep)
    }
}

/// Runs the whole stack over a corpus; returns surviving pages in input order.
pub fn run_pipeline<T: Scalar>(
    pages: Vec<PageRecord<T>>,
    cfg: &FilterConfig,
    taxonomy: &Taxonomy,
    judge: &dyn Judge<T>,
    on_judge_error: OnJudgeError,
) -> (Vec<PageRecord<T>>, FilterReport) {
    let mut p = Pipeline::new(cfg.clone(), taxonomy.clone(), judge, on_judge_error);
    let kept = p
        .process_batch(pages)
        .into_iter()
        .filter_map(PageOutcome::kept)
        .collect();
    (kept, p.into_report())
}
