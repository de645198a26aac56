//! Label vocabularies for evaluation. Names are matched exactly; the only
//! normalisation is trimming surrounding whitespace, plus the tag-name form
//! for the 55-class space (`list_item` for `List Item`).

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::UiClass;

/// Label id assigned to prediction labels outside the active space. It never
/// equals a ground-truth label, so such predictions count toward occupancy
/// but never toward any label agreement.
pub const UNKNOWN_LABEL: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSpaceKind {
    Screentag55,
    Groundcua8,
    Screenspot2,
}

impl LabelSpaceKind {
    pub const ALL: [LabelSpaceKind; 3] = [
        LabelSpaceKind::Screentag55,
        LabelSpaceKind::Groundcua8,
        LabelSpaceKind::Screenspot2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LabelSpaceKind::Screentag55 => "screentag55",
            LabelSpaceKind::Groundcua8 => "groundcua8",
            LabelSpaceKind::Screenspot2 => "screenspot2",
        }
    }

    fn data(self) -> &'static str {
        match self {
            LabelSpaceKind::Screentag55 => include_str!("../../data/labels/screentag55.txt"),
            LabelSpaceKind::Groundcua8 => include_str!("../../data/labels/groundcua8.txt"),
            LabelSpaceKind::Screenspot2 => include_str!("../../data/labels/screenspot2.txt"),
        }
    }
}

impl fmt::Display for LabelSpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LabelSpaceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown label space `{s}` (expected screentag55, groundcua8 or screenspot2)"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("ground-truth label `{label}` is not in label space {space}")]
pub struct UnknownLabel {
    pub space: LabelSpaceKind,
    pub label: String,
}

#[derive(Debug, Clone)]
pub struct LabelSpace {
    kind: LabelSpaceKind,
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl LabelSpace {
    pub fn new(kind: LabelSpaceKind) -> Self {
        let names: Vec<String> = kind
            .data()
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect();
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as u32))
            .collect();
        Self { kind, names, index }
    }

    pub fn kind(&self) -> LabelSpaceKind {
        self.kind
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn lookup(&self, label: &str) -> Option<u32> {
        let label = label.trim();
        if let Some(&i) = self.index.get(label) {
            return Some(i);
        }
        match self.kind {
            LabelSpaceKind::Screentag55 => UiClass::from_name(label).map(|c| c.index() as u32),
            _ => None,
        }
    }

    /// Ground-truth labels must belong to the space.
    pub fn resolve_gt(&self, label: &str) -> Result<u32, UnknownLabel> {
        self.lookup(label).ok_or_else(|| UnknownLabel {
            space: self.kind,
            label: label.to_string(),
        })
    }

    /// Prediction labels outside the space map to [`UNKNOWN_LABEL`].
    pub fn resolve_pred(&self, label: &str) -> u32 {
        self.lookup(label).unwrap_or(UNKNOWN_LABEL)
    }
}
