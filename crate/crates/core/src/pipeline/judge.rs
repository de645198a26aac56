//! Page-level quality judges. A judge maps a page to a score in `[0, 1]`;
//! pages scoring below the configured threshold are dropped.

use std::io::Write;
use std::process::{Command, Stdio};

use serde::Serialize;
use thiserror::Error;

use crate::geom::iou;
use crate::metrics::raster::union_area;
use crate::page::PageRecord;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JudgeError {
    #[error("page has no judge score")]
    MissingScore,
    #[error("judge returned {0}, outside the accepted range")]
    OutOfRange(f64),
    #[error("judge failed: {0}")]
    Failed(String),
}

pub trait Judge<T: Scalar = f64>: Send + Sync {
    fn score(&self, page: &PageRecord<T>) -> Result<f64, JudgeError>;
}

/// Same score for every page.
#[derive(Debug, Clone, Copy)]
pub struct ConstantJudge(pub f64);

impl<T: Scalar> Judge<T> for ConstantJudge {
    fn score(&self, _page: &PageRecord<T>) -> Result<f64, JudgeError> {
        check_unit(self.0)
    }
}

/// Uses the `judge_score` already present on the record.
#[derive(Debug, Clone, Copy, Default)]
pub struct IngestedJudge;

impl<T: Scalar> Judge<T> for IngestedJudge {
    fn score(&self, page: &PageRecord<T>) -> Result<f64, JudgeError> {
        page.judge_score.ok_or(JudgeError::MissingScore).and_then(check_unit)
    }
}

/// Deterministic heuristic: rewards layout coverage and penalizes same-class
/// redundancy.
///
/// `score = 0.4 * min(1, coverage / 0.5) + 0.6 * (1 - redundant_fraction)`
/// where coverage is the union of element boxes over the viewport area and
/// `redundant_fraction` is the share of elements with a same-class partner at
/// IoU above `overlap`. Empty pages score 0.
#[derive(Debug, Clone)]
pub struct RuleJudge {
    pub overlap: f64,
}

impl Default for RuleJudge {
    fn default() -> Self {
        Self { overlap: 0.65 }
    }
}

impl<T: Scalar> Judge<T> for RuleJudge {
    fn score(&self, page: &PageRecord<T>) -> Result<f64, JudgeError> {
        let n = page.elements.len();
        if n == 0 || !page.viewport.is_valid() {
            return Ok(0.0);
        }
        let boxes: Vec<_> = page.elements.iter().map(|e| e.bbox).collect();
        let coverage = union_area(&boxes, page.viewport) as f64 / page.viewport.area();
        let mut redundant = vec![false; n];
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (&page.elements[i], &page.elements[j]);
                if a.class == b.class && iou(&a.bbox, &b.bbox).to_f64_lossy() > self.overlap {
                    redundant[i] = true;
                    redundant[j] = true;
                }
            }
        }
        let frac = redundant.iter().filter(|r| **r).count() as f64 / n as f64;
        Ok(0.4 * (coverage / 0.5).min(1.0) + 0.6 * (1.0 - frac))
    }
}

/// Runs an external program once per page. The page record is written to its
/// stdin as JSON; stdout must hold either a bare number or a JSON object with
/// an `overall_quality` field, on a 0-100 scale.
#[derive(Debug, Clone)]
pub struct CommandJudge {
    pub program: String,
    pub args: Vec<String>,
}

impl CommandJudge {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        Self {
            program: program.into(),
            args,
        }
    }

    pub(crate) fn parse_output(stdout: &str) -> Result<f64, JudgeError> {
        let trimmed = stdout.trim();
        let quality = match trimmed.parse::<f64>() {
            Ok(v) => v,
            Err(_) => {
                let v: serde_json::Value = serde_json::from_str(trimmed)
                    .map_err(|e| JudgeError::Failed(format!("unreadable judge output: {e}")))?;
                v.get("overall_quality")
                    .and_then(serde_json::Value::as_f64)
                    .ok_or_else(|| JudgeError::Failed("judge output lacks overall_quality".into()))?
            }
        };
        if !(0.0..=100.0).contains(&quality) {
            return Err(JudgeError::OutOfRange(quality));
        }
        Ok(quality / 100.0)
    }
}

impl<T: Scalar + Serialize> Judge<T> for CommandJudge {
    fn score(&self, page: &PageRecord<T>) -> Result<f64, JudgeError> {
        let payload =
            serde_json::to_vec(page).map_err(|e| JudgeError::Failed(format!("encoding page: {e}")))?;
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| JudgeError::Failed(format!("spawning {}: {e}", self.program)))?;
        if let Some(mut stdin) = child.stdin.take() {
            stdin
                .write_all(&payload)
                .map_err(|e| JudgeError::Failed(format!("writing to judge: {e}")))?;
        }
        let out = child
            .wait_with_output()
            .map_err(|e| JudgeError::Failed(format!("waiting for judge: {e}")))?;
        if !out.status.success() {
            return Err(JudgeError::Failed(format!("judge exited with {}", out.status)));
        }
        Self::parse_output(&String::from_utf8_lossy(&out.stdout))
    }
}

fn check_unit(v: f64) -> Result<f64, JudgeError> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(JudgeError::OutOfRange(v))
    }
}
