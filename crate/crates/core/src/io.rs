//! Line-oriented file formats.
//!
//! * JSONL page records, one [`PageRecord`] per line.
//! * `.st` ScreenTag files, one page per line as `page_id<TAB>markup`. Line
//!   breaks and tabs inside text are written as `&#10;`, `&#13;` and `&#9;`,
//!   which the markup parser reads back as ordinary character references.
//! * Evaluation records: any JSONL whose lines carry `page_id`, an optional
//!   `viewport` and `elements` with `bbox_ltrb`, a `label` (or `class`) name
//!   and an optional `confidence`. Page records qualify.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{BBox, Viewport};
use crate::metrics::{Annotation, EvalInput, LabelSpace, UnknownLabel};
use crate::page::PageRecord;
use crate::scalar::Scalar;
use crate::screentag::{self, ScreenTagError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: {source}")]
    Markup {
        line: usize,
        #[source]
        source: ScreenTagError,
    },
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
}

/// Streams JSON values from non-blank lines, tagging errors with 1-based
/// line numbers.
pub fn read_jsonl<V: DeserializeOwned, R: BufRead>(reader: R) -> impl Iterator<Item = Result<V, IoError>> {
    reader.lines().enumerate().filter_map(|(i, line)| match line {
        Err(e) => Some(Err(IoError::Io(e))),
        Ok(l) if l.trim().is_empty() => None,
        Ok(l) => Some(serde_json::from_str(&l).map_err(|source| IoError::Json { line: i + 1, source })),
    })
}

pub fn read_pages<T, R>(reader: R) -> impl Iterator<Item = Result<PageRecord<T>, IoError>>
where
    T: Scalar + DeserializeOwned,
    R: BufRead,
{
    read_jsonl(reader)
}

pub fn write_jsonl<V: Serialize, W: Write>(mut w: W, value: &V) -> std::io::Result<()> {
    serde_json::to_writer(&mut w, value)?;
    w.write_all(b"\n")
}

/// One `.st` line for `page`, without the trailing newline.
pub fn to_st_line<T: Scalar>(page: &PageRecord<T>) -> Result<String, ScreenTagError> {
    if page.page_id.contains(['\t', '\n', '\r']) {
        return Err(ScreenTagError::MalformedMarkup {
            offset: 0,
            reason: format!("page id {:?} contains a tab or line break", page.page_id),
        });
    }
    let markup = screentag::to_markup(page)?;
    let mut out = String::with_capacity(page.page_id.len() + 1 + markup.len());
    out.push_str(&page.page_id);
    out.push('\t');
    for c in markup.chars() {
        match c {
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
    Ok(out)
}

/// Parses one `.st` line. Malformed-markup offsets are byte offsets into the
/// markup column.
pub fn parse_st_line<T: Scalar>(line: &str, viewport: Viewport) -> Result<PageRecord<T>, ScreenTagError> {
    let (id, markup) = line.split_once('\t').ok_or_else(|| ScreenTagError::MalformedMarkup {
        offset: 0,
        reason: "expected `page_id<TAB>markup`".into(),
    })?;
    let mut page = screentag::parse(markup, viewport)?;
    page.page_id = id.to_string();
    Ok(page)
}

pub fn read_st<T: Scalar, R: BufRead>(
    reader: R,
    viewport: Viewport,
) -> impl Iterator<Item = Result<PageRecord<T>, IoError>> {
    reader.lines().enumerate().filter_map(move |(i, line)| match line {
        Err(e) => Some(Err(IoError::Io(e))),
        Ok(l) if l.is_empty() => None,
        Ok(l) => Some(
            parse_st_line(l.strip_suffix('\r').unwrap_or(&l), viewport)
                .map_err(|source| IoError::Markup { line: i + 1, source }),
        ),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalElement {
    pub bbox_ltrb: [f64; 4],
    #[serde(alias = "class")]
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub page_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub viewport: Option<Viewport>,
    #[serde(default)]
    pub elements: Vec<EvalElement>,
}

#[derive(Debug, Error)]
pub enum EvalDataError {
    #[error("page {page_id}: {source}")]
    UnknownLabel {
        page_id: String,
        #[source]
        source: UnknownLabel,
    },
    #[error("duplicate page_id {0} in {1}")]
    DuplicatePage(String, &'static str),
    #[error("prediction for page {0} has no ground truth")]
    UnmatchedPrediction(String),
    #[error("page {0}: ground truth has no valid viewport")]
    MissingViewport(String),
    #[error("page {page_id}: confidence {value} outside [0, 1]")]
    BadConfidence { page_id: String, value: f64 },
}

/// Pairs predictions with ground truth by `page_id`, in ground-truth order.
/// Ground-truth pages without a prediction record are scored against an
/// empty prediction set.
pub fn pair_records<T: Scalar>(
    preds: Vec<EvalRecord>,
    gts: Vec<EvalRecord>,
    space: &LabelSpace,
) -> Result<Vec<EvalInput<T>>, EvalDataError> {
    let mut by_id: HashMap<String, EvalRecord> = HashMap::with_capacity(preds.len());
    for p in preds {
        if by_id.contains_key(&p.page_id) {
            return Err(EvalDataError::DuplicatePage(p.page_id, "predictions"));
        }
        by_id.insert(p.page_id.clone(), p);
    }
    let mut seen = std::collections::HashSet::with_capacity(gts.len());
    let mut out = Vec::with_capacity(gts.len());
    for g in gts {
        if !seen.insert(g.page_id.clone()) {
            return Err(EvalDataError::DuplicatePage(g.page_id, "ground truth"));
        }
        let grid = g
            .viewport
            .filter(Viewport::is_valid)
            .ok_or_else(|| EvalDataError::MissingViewport(g.page_id.clone()))?;
        let gt = g
            .elements
            .iter()
            .map(|e| {
                space
                    .resolve_gt(&e.label)
                    .map(|l| Annotation::new(to_box(e.bbox_ltrb), l))
                    .map_err(|source| EvalDataError::UnknownLabel {
                        page_id: g.page_id.clone(),
                        source,
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let pred = match by_id.remove(&g.page_id) {
            None => Vec::new(),
            Some(p) => p
                .elements
                .iter()
                .map(|e| match e.confidence {
                    Some(c) if !(0.0..=1.0).contains(&c) => Err(EvalDataError::BadConfidence {
                        page_id: g.page_id.clone(),
                        value: c,
                    }),
                    c => Ok(Annotation::new(to_box(e.bbox_ltrb), space.resolve_pred(&e.label))
                        .with_confidence(c)),
                })
                .collect::<Result<Vec<_>, _>>()?,
        };
        out.push(EvalInput {
            page_id: g.page_id,
            grid,
            pred,
            gt,
        });
    }
    if let Some(id) = by_id.into_keys().min() {
        return Err(EvalDataError::UnmatchedPrediction(id));
    }
    Ok(out)
}

fn to_box<T: Scalar>(b: [f64; 4]) -> BBox<T> {
    BBox::from_f64(b[0], b[1], b[2], b[3])
}
