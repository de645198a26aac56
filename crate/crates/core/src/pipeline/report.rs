use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::taxonomy::UiClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Validation,
    Geometry,
    DuplicateSuppression,
    JudgeFilter,
    PageDedup,
    GroundTruthCleanup,
}

impl Stage {
    pub const ORDER: [Stage; 6] = [
        Stage::Validation,
        Stage::Geometry,
        Stage::DuplicateSuppression,
        Stage::JudgeFilter,
        Stage::PageDedup,
        Stage::GroundTruthCleanup,
    ];

    pub fn unit(self) -> Unit {
        match self {
            Stage::Geometry | Stage::DuplicateSuppression | Stage::GroundTruthCleanup => {
                Unit::Elements
            }
            Stage::Validation | Stage::JudgeFilter | Stage::PageDedup => Unit::Pages,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Validation => "validation",
            Stage::Geometry => "geometry",
            Stage::DuplicateSuppression => "duplicate_suppression",
            Stage::JudgeFilter => "judge_filter",
            Stage::PageDedup => "page_dedup",
            Stage::GroundTruthCleanup => "ground_truth_cleanup",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Elements,
    Pages,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    InvalidBox,
    OffScreen,
    Tiny,
    Oversized,
    Duplicate,
    CleanupOverlap,
    CleanupContainment,
    InvalidViewport,
    MalformedForest,
    LowJudgeScore,
    JudgeError,
    NearDuplicate,
    MissingHash,
}

impl Reason {
    pub fn as_str(self) -> &'static str {
        match self {
            Reason::InvalidBox => "invalid_box",
            Reason::OffScreen => "off_screen",
            Reason::Tiny => "tiny",
            Reason::Oversized => "oversized",
            Reason::Duplicate => "duplicate",
            Reason::CleanupOverlap => "cleanup_overlap",
            Reason::CleanupContainment => "cleanup_containment",
            Reason::InvalidViewport => "invalid_viewport",
            Reason::MalformedForest => "malformed_forest",
            Reason::LowJudgeScore => "low_judge_score",
            Reason::JudgeError => "judge_error",
            Reason::NearDuplicate => "near_duplicate",
            Reason::MissingHash => "missing_hash",
        }
    }
}

/// Counts for one stage. `input == removed + survivors` always holds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: Stage,
    pub unit: Unit,
    pub input: usize,
    pub removed: usize,
    pub survivors: usize,
    pub reasons: BTreeMap<Reason, usize>,
}

impl StageReport {
    pub fn new(stage: Stage) -> Self {
        Self {
            stage,
            unit: stage.unit(),
            input: 0,
            removed: 0,
            survivors: 0,
            reasons: BTreeMap::new(),
        }
    }

    pub fn record(&mut self, input: usize, removals: impl IntoIterator<Item = Reason>) {
        let mut removed = 0;
        for r in removals {
            *self.reasons.entry(r).or_default() += 1;
            removed += 1;
        }
        self.input += input;
        self.removed += removed;
        self.survivors += input - removed;
    }

    pub fn merge(&mut self, other: &StageReport) {
        debug_assert_eq!(self.stage, other.stage);
        self.input += other.input;
        self.removed += other.removed;
        self.survivors += other.survivors;
        for (r, n) in &other.reasons {
            *self.reasons.entry(*r).or_default() += n;
        }
    }

    pub fn is_conserved(&self) -> bool {
        self.input == self.removed + self.survivors
            && self.reasons.values().sum::<usize>() == self.removed
    }
}

/// Per-stage removal counts, always listing every stage in pipeline order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub stages: Vec<StageReport>,
    /// Pages kept despite a judge failure (`--on-judge-error keep`).
    pub judge_errors_kept: usize,
}

impl Default for FilterReport {
    fn default() -> Self {
        Self {
            stages: Stage::ORDER.iter().map(|s| StageReport::new(*s)).collect(),
            judge_errors_kept: 0,
        }
    }
}

impl FilterReport {
    pub fn stage(&self, stage: Stage) -> &StageReport {
        self.stages.iter().find(|s| s.stage == stage).expect("every stage present")
    }

    pub fn stage_mut(&mut self, stage: Stage) -> &mut StageReport {
        self.stages.iter_mut().find(|s| s.stage == stage).expect("every stage present")
    }

    pub fn merge(&mut self, other: &FilterReport) {
        for s in &other.stages {
            self.stage_mut(s.stage).merge(s);
        }
        self.judge_errors_kept += other.judge_errors_kept;
    }

    pub fn is_conserved(&self) -> bool {
        self.stages.iter().all(StageReport::is_conserved)
    }

    pub fn total_removed(&self, unit: Unit) -> usize {
        self.stages.iter().filter(|s| s.unit == unit).map(|s| s.removed).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovedElement {
    /// Index in the page as it entered the pipeline.
    pub index: usize,
    pub class: UiClass,
    pub stage: Stage,
    pub reason: Reason,
}

/// Filter provenance carried on output records.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default)]
    pub removed: Vec<RemovedElement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge_error: Option<String>,
}
