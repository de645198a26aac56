//! Seeded synthetic screens and labelled noise.
//!
//! Clean pages hold a containment-true forest: every child lies inside its
//! parent with at most half its area, siblings are pairwise disjoint,
//! container classes are the only internal nodes, every root covers at most
//! half the viewport, and every box is at least 4x4 pixels with integer
//! coordinates. Such a page passes the cleaning pipeline untouched. Each noise
//! kind then breaks exactly one rule, and the injection log records which
//! element (or page) the pipeline is expected to remove, at which stage and
//! for which reason.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{BBox, Viewport};
use crate::page::{PageRecord, UiElement};
use crate::pipeline::{BkTree, Reason, Stage};
use crate::scalar::Scalar;
use crate::taxonomy::{Taxonomy, UiClass, NUM_CLASSES};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),
}

/// Which noise kinds to inject. Page-level kinds only apply to corpora.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseToggles {
    pub duplicates: bool,
    pub off_screen: bool,
    pub tiny: bool,
    pub page_wrappers: bool,
    pub invalid_boxes: bool,
    pub cleanup_overlaps: bool,
    pub near_duplicate_pages: bool,
    pub low_judge_pages: bool,
}

impl NoiseToggles {
    pub fn all() -> Self {
        Self {
            duplicates: true,
            off_screen: true,
            tiny: true,
            page_wrappers: true,
            invalid_boxes: true,
            cleanup_overlaps: true,
            near_duplicate_pages: true,
            low_judge_pages: true,
        }
    }

    /// Parses a comma-separated list such as `duplicates,tiny`; `all` and
    /// `none` are accepted as well.
    pub fn parse_list(s: &str) -> Result<Self, SynthError> {
        let mut t = Self::default();
        for name in s.split(',').map(str::trim).filter(|n| !n.is_empty()) {
            match name {
                "all" => t = Self::all(),
                "none" => t = Self::default(),
                "duplicates" => t.duplicates = true,
                "off_screen" => t.off_screen = true,
                "tiny" => t.tiny = true,
                "page_wrappers" => t.page_wrappers = true,
                "invalid_boxes" => t.invalid_boxes = true,
                "cleanup_overlaps" => t.cleanup_overlaps = true,
                "near_duplicate_pages" => t.near_duplicate_pages = true,
                "low_judge_pages" => t.low_judge_pages = true,
                other => return Err(SynthError::InvalidConfig(format!("unknown noise kind `{other}`"))),
            }
        }
        Ok(t)
    }

    fn any_element(&self) -> bool {
        self.duplicates
            || self.off_screen
            || self.tiny
            || self.page_wrappers
            || self.invalid_boxes
            || self.cleanup_overlaps
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub viewport: Viewport,
    /// Inclusive range of tree heights; 1 means roots only.
    pub depth: (u32, u32),
    pub children: (u32, u32),
    pub roots: (u32, u32),
    /// Relative class frequencies, indexed by class id minus one.
    pub class_weights: Vec<f64>,
    pub noise: NoiseToggles,
    /// In a corpus, the chance that a page receives each enabled noise kind.
    pub noise_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            viewport: Viewport::DEFAULT,
            depth: (1, 4),
            children: (1, 4),
            roots: (1, 6),
            class_weights: vec![1.0; NUM_CLASSES],
            noise: NoiseToggles::default(),
            noise_rate: 0.5,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if self.viewport.width < 64 || self.viewport.height < 64 {
            return bad(format!(
                "viewport {}x{} is smaller than 64x64",
                self.viewport.width, self.viewport.height
            ));
        }
        for (name, (lo, hi)) in [("depth", self.depth), ("children", self.children), ("roots", self.roots)] {
            if lo == 0 || lo > hi {
                return bad(format!("{name} range {lo}..={hi} is empty or starts at 0"));
            }
        }
        if self.class_weights.len() != NUM_CLASSES
            || self.class_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
            || self.class_weights.iter().all(|w| *w == 0.0)
        {
            return bad("class_weights needs 55 non-negative finite values, not all zero".into());
        }
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return bad(format!("noise_rate {} is outside [0, 1]", self.noise_rate));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Duplicate,
    OffScreen,
    Tiny,
    PageWrapper,
    InvalidBox,
    CleanupOverlap,
    NearDuplicatePage,
    LowJudgePage,
}

/// One expected removal. `element` is the index in the emitted (noisy) page;
/// page-level entries leave it empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Injection {
    pub page_id: String,
    pub kind: NoiseKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element: Option<usize>,
    pub stage: Stage,
    pub reason: Reason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus<T = f64> {
    pub pages: Vec<PageRecord<T>>,
    pub injections: Vec<Injection>,
}

const WORDS: &[&str] = &[
    "Home", "Search", "Sign in", "Settings", "Q&A", "Price < $10", "a > b", "Next", "Back",
    "Download", "Über uns", "日本語", "Terms & Conditions", "Cart (3)", "Learn more", "Menu",
    "Profile", "2026-10-15", "Subscribe", "<none>", "line one\nline two", "  padded  ",
];

struct Builder<'a, T: Scalar> {
    rng: ChaCha8Rng,
    cfg: &'a SynthConfig,
    tax: &'a Taxonomy,
    classes: WeightedIndex<f64>,
    page: PageRecord<T>,
}

fn pix<T: Scalar>(x1: i64, y1: i64, x2: i64, y2: i64) -> BBox<T> {
    BBox::from_f64(x1 as f64, y1 as f64, x2 as f64, y2 as f64)
}

fn ints<T: Scalar>(b: &BBox<T>) -> [i64; 4] {
    b.to_array().map(|v| v.to_f64_lossy().round() as i64)
}

impl<'a, T: Scalar> Builder<'a, T> {
    fn new(cfg: &'a SynthConfig, tax: &'a Taxonomy, seed: u64, page_id: String) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            cfg,
            tax,
            classes: WeightedIndex::new(&cfg.class_weights).expect("validated weights"),
            page: PageRecord::new(page_id, cfg.viewport),
        }
    }

    fn class(&mut self) -> UiClass {
        let i = self.classes.sample(&mut self.rng);
        UiClass::from_id(i as u32 + 1).expect("55 weights")
    }

    fn text(&mut self, class: UiClass) -> Option<String> {
        let p = if self.tax.is_container(class) { 0.1 } else { 0.6 };
        if !self.rng.gen_bool(p) {
            return None;
        }
        let n = self.rng.gen_range(1..=3);
        let words: Vec<&str> = (0..n).map(|_| *WORDS.choose(&mut self.rng).expect("non-empty")).collect();
        Some(words.join(" "))
    }

    /// Places up to `k` disjoint boxes inside `region`, each at most half of
    /// `parent_area`, separated by a 2 px gap along the split axis.
    fn layout(&mut self, region: [i64; 4], parent_area: i64, k: u32) -> Vec<[i64; 4]> {
        const GAP: i64 = 2;
        const MIN: i64 = 4;
        let [x1, y1, x2, y2] = region;
        let (w, h) = (x2 - x1, y2 - y1);
        let horizontal = if w == h { self.rng.gen_bool(0.5) } else { w > h };
        let (len, cross) = if horizontal { (w, h) } else { (h, w) };
        let mut k = k as i64;
        while k > 1 && (len - (k - 1) * GAP) / k < MIN {
            k -= 1;
        }
        let strip = (len - (k - 1) * GAP) / k;
        if strip < MIN || cross < MIN {
            return Vec::new();
        }
        let mut out = Vec::new();
        for s in 0..k {
            let start = s * (strip + GAP);
            let mut a = self.rng.gen_range(MIN.max(strip / 2)..=strip);
            let mut c = self.rng.gen_range(MIN.max(cross * 3 / 10)..=cross);
            while 2 * a * c > parent_area && (a > MIN || c > MIN) {
                if a >= c && a > MIN {
                    a -= 1;
                } else if c > MIN {
                    c -= 1;
                } else {
                    a -= 1;
                }
            }
            if 2 * a * c > parent_area {
                continue;
            }
            let off_a = start + self.rng.gen_range(0..=strip - a);
            let off_c = self.rng.gen_range(0..=cross - c);
            let b = if horizontal {
                [x1 + off_a, y1 + off_c, x1 + off_a + a, y1 + off_c + c]
            } else {
                [x1 + off_c, y1 + off_a, x1 + off_c + c, y1 + off_a + a]
            };
            out.push(b);
        }
        out
    }

    fn grow(&mut self, rect: [i64; 4], parent: Option<usize>, depth_left: u32) {
        let class = self.class();
        let text = self.text(class);
        let mut el = UiElement::new(pix(rect[0], rect[1], rect[2], rect[3]), class);
        el.text = text;
        let idx = self.page.push(el, parent);
        if depth_left <= 1 || !self.tax.is_container(class) {
            return;
        }
        let pad = 2;
        let inner = [rect[0] + pad, rect[1] + pad, rect[2] - pad, rect[3] - pad];
        if inner[2] - inner[0] < 4 || inner[3] - inner[1] < 4 {
            return;
        }
        let area = (rect[2] - rect[0]) * (rect[3] - rect[1]);
        let k = self.rng.gen_range(self.cfg.children.0..=self.cfg.children.1);
        for child in self.layout(inner, area, k) {
            self.grow(child, Some(idx), depth_left - 1);
        }
    }

    fn clean(&mut self) {
        let vp = self.cfg.viewport;
        let depth = self.rng.gen_range(self.cfg.depth.0..=self.cfg.depth.1);
        let k = self.rng.gen_range(self.cfg.roots.0..=self.cfg.roots.1);
        let full = [0, 0, vp.width as i64, vp.height as i64];
        let area = vp.width as i64 * vp.height as i64;
        let mut roots = self.layout(full, area, k);
        if roots.is_empty() {
            roots.push([0, 0, (vp.width / 2) as i64, (vp.height / 2) as i64]);
        }
        for r in roots {
            self.grow(r, None, depth);
        }
        self.page.judge_score = Some(self.rng.gen_range(0.70..=1.0));
    }

    fn leaves(&self) -> Vec<usize> {
        (0..self.page.elements.len())
            .filter(|&i| self.page.elements[i].children.is_empty())
            .collect()
    }

    fn pick_distinct(&mut self, pool: &[usize], used: &mut Vec<usize>) -> Option<usize> {
        let free: Vec<usize> = pool.iter().copied().filter(|i| !used.contains(i)).collect();
        let i = *free.choose(&mut self.rng)?;
        used.push(i);
        Some(i)
    }

    fn log(&self, log: &mut Vec<Injection>, kind: NoiseKind, element: usize, stage: Stage, reason: Reason) {
        log.push(Injection {
            page_id: self.page.page_id.clone(),
            kind,
            element: Some(element),
            stage,
            reason,
        });
    }

    fn other_atomic(&mut self, interactive: Option<bool>) -> UiClass {
        let pool: Vec<UiClass> = self
            .tax
            .atomics()
            .filter(|c| interactive.is_none_or(|want| self.tax.is_interactive(*c) == want))
            .collect();
        pool.choose(&mut self.rng).copied().unwrap_or(UiClass::TEXT)
    }

    /// Applies each enabled element-level noise kind with probability `rate`.
    fn noise(&mut self, rate: f64, log: &mut Vec<Injection>) {
        let t = self.cfg.noise;
        let vp = self.cfg.viewport;
        let (w, h) = (vp.width as i64, vp.height as i64);
        let clean_len = self.page.elements.len();
        let mut used = Vec::new();
        let roll = |rng: &mut ChaCha8Rng, on: bool| on && rng.gen_bool(rate);

        if roll(&mut self.rng, t.duplicates) {
            let leaves = self.leaves();
            for _ in 0..self.rng.gen_range(1..=2) {
                let Some(src) = self.pick_distinct(&leaves, &mut used) else { break };
                let mut copy = self.page.elements[src].clone();
                copy.confidence = None;
                let parent = copy.parent;
                let idx = self.page.push(copy, parent);
                self.log(log, NoiseKind::Duplicate, idx, Stage::DuplicateSuppression, Reason::Duplicate);
            }
        }
        if roll(&mut self.rng, t.cleanup_overlaps) {
            let pool: Vec<usize> = (0..clean_len).collect();
            if let Some(src) = self.pick_distinct(&pool, &mut used) {
                let e = &self.page.elements[src];
                let [x1, y1, x2, y2] = ints(&e.bbox);
                // shrink the longer side by about a fifth: IoU lands between 0.75 and 0.86
                let (bw, bh) = (x2 - x1, y2 - y1);
                let b = if bw >= bh {
                    let d = ((bw as f64 * 0.2).round() as i64).max(1);
                    pix(x1, y1, x2 - d, y2)
                } else {
                    let d = ((bh as f64 * 0.2).round() as i64).max(1);
                    pix(x1, y1, x2, y2 - d)
                };
                let class = e.class;
                let parent = e.parent;
                let idx = self.page.push(UiElement::new(b, class), parent);
                let loser = if self.tax.is_container(class) { idx } else { src };
                self.log(log, NoiseKind::CleanupOverlap, loser, Stage::GroundTruthCleanup, Reason::CleanupOverlap);
            }
        }
        if roll(&mut self.rng, t.tiny) {
            let class = self.other_atomic(Some(false));
            let x = self.rng.gen_range(0..w - 1);
            let y = self.rng.gen_range(0..h - 3);
            let idx = self.page.push(UiElement::new(pix(x, y, x + 1, y + 3), class), None);
            self.log(log, NoiseKind::Tiny, idx, Stage::Geometry, Reason::Tiny);
        }
        if roll(&mut self.rng, t.off_screen) {
            let class = self.other_atomic(None);
            let bw = self.rng.gen_range(8..=64);
            let bh = self.rng.gen_range(8..=64);
            let b = match self.rng.gen_range(0..4) {
                0 => pix(w + 5, 10, w + 5 + bw, 10 + bh),
                1 => pix(10, h + 5, 10 + bw, h + 5 + bh),
                2 => pix(-bw - 5, 20, -5, 20 + bh),
                // a sliver of one column inside the viewport: visible share 1/100
                _ => pix(w - 1, 30, w + 99, 30 + bh),
            };
            let idx = self.page.push(UiElement::new(b, class), None);
            self.log(log, NoiseKind::OffScreen, idx, Stage::Geometry, Reason::OffScreen);
        }
        if roll(&mut self.rng, t.invalid_boxes) {
            let class = self.other_atomic(None);
            let x = self.rng.gen_range(10..w - 10);
            let y = self.rng.gen_range(10..h - 10);
            let b = if self.rng.gen_bool(0.5) { pix(x, y, x - 5, y + 5) } else { pix(x, y, x + 5, y) };
            let idx = self.page.push(UiElement::new(b, class), None);
            self.log(log, NoiseKind::InvalidBox, idx, Stage::Geometry, Reason::InvalidBox);
        }
        if roll(&mut self.rng, t.page_wrappers) {
            let class = if self.rng.gen_bool(0.5) { UiClass::SCREEN } else { UiClass::WINDOW };
            let roots: Vec<usize> = self.page.roots().collect();
            let idx = self.page.push(UiElement::new(pix(0, 0, w, h), class), None);
            for r in roots {
                self.page.elements[r].parent = Some(idx);
            }
            self.page.elements[idx].children = (0..idx).filter(|&i| self.page.elements[i].parent == Some(idx)).collect();
            self.log(log, NoiseKind::PageWrapper, idx, Stage::Geometry, Reason::Oversized);
        }
    }
}

/// Hashes at pairwise Hamming distance above 16, drawn from `rng`.
fn spread_hashes(rng: &mut ChaCha8Rng, n: usize) -> Vec<u64> {
    let mut tree = BkTree::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let h: u64 = rng.gen();
        if tree.nearest_within(h, 16).is_none() {
            tree.insert(h);
            out.push(h);
        }
    }
    out
}

/// One page from `cfg.seed`, with every enabled element-level noise kind
/// applied once. Page-level toggles are ignored.
pub fn generate<T: Scalar>(cfg: &SynthConfig) -> Result<PageRecord<T>, SynthError> {
    generate_with(cfg, &Taxonomy::default()).map(|(p, _)| p)
}

/// Like [`generate`] with an explicit class partition, also returning the
/// injection log.
pub fn generate_with<T: Scalar>(
    cfg: &SynthConfig,
    tax: &Taxonomy,
) -> Result<(PageRecord<T>, Vec<Injection>), SynthError> {
    cfg.validate()?;
    let mut b = Builder::<T>::new(cfg, tax, cfg.seed, format!("synth-{:016x}", cfg.seed));
    b.clean();
    b.page.phash = Some(b.rng.gen());
    let mut log = Vec::new();
    if cfg.noise.any_element() {
        b.noise(1.0, &mut log);
    }
    Ok((b.page, log))
}

/// `count` source pages plus any near-duplicate copies, in stream order.
/// Each enabled noise kind hits a page with probability `cfg.noise_rate`.
/// A page carries either page-level noise or element-level noise, not both,
/// and near-duplicate copies follow their source directly.
pub fn generate_corpus<T: Scalar>(
    cfg: &SynthConfig,
    tax: &Taxonomy,
    count: usize,
) -> Result<Corpus<T>, SynthError> {
    cfg.validate()?;
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let hashes = spread_hashes(&mut master, count);
    #[derive(Clone, Copy)]
    enum Plan {
        Plain,
        NearDup,
        LowJudge,
    }
    let plans: Vec<(u64, Plan, u64)> = (0..count)
        .map(|_| {
            let seed: u64 = master.gen();
            let mut plan = Plan::Plain;
            if cfg.noise.near_duplicate_pages && master.gen_bool(cfg.noise_rate) {
                plan = Plan::NearDup;
            } else if cfg.noise.low_judge_pages && master.gen_bool(cfg.noise_rate) {
                plan = Plan::LowJudge;
            }
            let flips: u64 = master.gen();
            (seed, plan, flips)
        })
        .collect();

    let built: Vec<(Vec<PageRecord<T>>, Vec<Injection>)> = plans
        .par_iter()
        .enumerate()
        .map(|(i, &(seed, plan, flip_seed))| {
            let id = format!("synth-{:x}-{i:06}", cfg.seed);
            let mut b = Builder::<T>::new(cfg, tax, seed, id);
            b.clean();
            b.page.phash = Some(hashes[i]);
            let mut log = Vec::new();
            match plan {
                Plan::Plain => {
                    b.noise(cfg.noise_rate, &mut log);
                    (vec![b.page], log)
                }
                Plan::LowJudge => {
                    b.page.judge_score = Some(b.rng.gen_range(0.0..0.70));
                    log.push(Injection {
                        page_id: b.page.page_id.clone(),
                        kind: NoiseKind::LowJudgePage,
                        element: None,
                        stage: Stage::JudgeFilter,
                        reason: Reason::LowJudgeScore,
                    });
                    (vec![b.page], log)
                }
                Plan::NearDup => {
                    let mut frng = ChaCha8Rng::seed_from_u64(flip_seed);
                    let n_flips = frng.gen_range(1..=8);
                    let mut bits: Vec<u32> = (0..64).collect();
                    bits.shuffle(&mut frng);
                    let mask = bits[..n_flips].iter().fold(0u64, |m, b| m | (1 << b));
                    let mut copy = b.page.clone();
                    copy.page_id = format!("{}-near", b.page.page_id);
                    copy.phash = Some(hashes[i] ^ mask);
                    log.push(Injection {
                        page_id: copy.page_id.clone(),
                        kind: NoiseKind::NearDuplicatePage,
                        element: None,
                        stage: Stage::PageDedup,
                        reason: Reason::NearDuplicate,
                    });
                    (vec![b.page, copy], log)
                }
            }
        })
        .collect();

    let mut corpus = Corpus {
        pages: Vec::new(),
        injections: Vec::new(),
    };
    for (pages, log) in built {
        corpus.pages.extend(pages);
        corpus.injections.extend(log);
    }
    Ok(corpus)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbKind {
    /// Moves every box edge by up to `magnitude` times the box extent.
    Jitter,
    /// Gives a `magnitude` share of elements a different class.
    Relabel,
    /// Removes a `magnitude` share of elements; children move up.
    Drop,
}

impl std::str::FromStr for PerturbKind {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jitter" => Ok(PerturbKind::Jitter),
            "relabel" => Ok(PerturbKind::Relabel),
            "drop" => Ok(PerturbKind::Drop),
            other => Err(SynthError::InvalidPerturbation(format!("unknown kind `{other}`"))),
        }
    }
}

/// Deterministic degradation of a page, for building prediction sets with a
/// known distance from the ground truth. `magnitude` lies in `[0, 1]`; zero
/// returns the page unchanged. Relabel and drop act on exactly
/// `round(magnitude * n)` elements chosen at random.
pub fn perturb<T: Scalar>(
    page: &PageRecord<T>,
    kind: PerturbKind,
    magnitude: f64,
    seed: u64,
) -> Result<PageRecord<T>, SynthError> {
    if !(0.0..=1.0).contains(&magnitude) {
        return Err(SynthError::InvalidPerturbation(format!("magnitude {magnitude} is outside [0, 1]")));
    }
    if magnitude == 0.0 {
        return Ok(page.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = page.elements.len();
    let chosen = |rng: &mut ChaCha8Rng| {
        let k = (magnitude * n as f64).round() as usize;
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(rng);
        let mut mask = vec![false; n];
        for i in &idx[..k] {
            mask[*i] = true;
        }
        mask
    };
    match kind {
        PerturbKind::Jitter => {
            let mut out = page.clone();
            for e in &mut out.elements {
                let b = e.bbox;
                let (w, h) = (b.width().to_f64_lossy(), b.height().to_f64_lossy());
                let mut d = |ext: f64| rng.gen_range(-1.0..=1.0) * magnitude * ext;
                let x1 = b.x1.to_f64_lossy() + d(w);
                let y1 = b.y1.to_f64_lossy() + d(h);
                let x2 = (b.x2.to_f64_lossy() + d(w)).max(x1 + 1.0);
                let y2 = (b.y2.to_f64_lossy() + d(h)).max(y1 + 1.0);
                e.bbox = BBox::from_f64(x1, y1, x2, y2);
            }
            Ok(out)
        }
        PerturbKind::Relabel => {
            let mask = chosen(&mut rng);
            let mut out = page.clone();
            for (e, _) in out.elements.iter_mut().zip(&mask).filter(|(_, m)| **m) {
                let shift = rng.gen_range(1..NUM_CLASSES as u32);
                let id = (e.class.id() - 1 + shift) % NUM_CLASSES as u32 + 1;
                e.class = UiClass::from_id(id).expect("in range");
            }
            Ok(out)
        }
        PerturbKind::Drop => {
            let mask = chosen(&mut rng);
            let keep: Vec<bool> = mask.iter().map(|m| !m).collect();
            Ok(page.retain_elements(&keep).0)
        }
    }
}
