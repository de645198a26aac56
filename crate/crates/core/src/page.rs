//! Page records: a viewport plus a forest of annotated UI elements.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{BBox, Viewport};
use crate::pipeline::report::Provenance;
use crate::scalar::Scalar;
use crate::taxonomy::UiClass;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct UiElement<T = f64> {
    #[serde(rename = "bbox_ltrb")]
    pub bbox: BBox<T>,
    #[serde(alias = "label")]
    pub class: UiClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<usize>,
    /// Only set on predictions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

impl<T: Scalar> UiElement<T> {
    pub fn new(bbox: BBox<T>, class: UiClass) -> Self {
        Self {
            bbox,
            class,
            text: None,
            parent: None,
            children: Vec::new(),
            confidence: None,
        }
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.text = Some(text.into());
        self
    }

    /// Text if present and non-empty.
    pub fn visible_text(&self) -> Option<&str> {
        self.text.as_deref().filter(|t| !t.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ForestError {
    #[error("element {element}: parent index {parent} out of range")]
    ParentOutOfRange { element: usize, parent: usize },
    #[error("element {element}: child index {child} out of range")]
    ChildOutOfRange { element: usize, child: usize },
    #[error("element {0} is its own parent")]
    SelfParent(usize),
    #[error("element {child} listed under {listed_under} but its parent is {actual:?}")]
    BrokenBackReference {
        child: usize,
        listed_under: usize,
        actual: Option<usize>,
    },
    #[error("element {child} has parent {parent} but is missing from its children list")]
    MissingChild { child: usize, parent: usize },
    #[error("element {0} appears more than once in its parent's children list")]
    DuplicateChild(usize),
    #[error("hierarchy cycle through element {0}")]
    Cycle(usize),
}

/// One rendered page. Element links (`parent`, `children`) index into `elements`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct PageRecord<T = f64> {
    pub page_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    pub viewport: Viewport,
    #[serde(default)]
    pub elements: Vec<UiElement<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screenshot_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "hex_hash")]
    pub phash: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl<T: Scalar> PageRecord<T> {
    pub fn new(page_id: impl Into<String>, viewport: Viewport) -> Self {
        Self {
            page_id: page_id.into(),
            url: None,
            viewport,
            elements: Vec::new(),
            screenshot_path: None,
            phash: None,
            judge_score: None,
            provenance: None,
        }
    }

    /// Appends an element under `parent` (or as a root) and returns its index.
    pub fn push(&mut self, mut element: UiElement<T>, parent: Option<usize>) -> usize {
        let idx = self.elements.len();
        element.parent = parent;
        element.children.clear();
        self.elements.push(element);
        if let Some(p) = parent {
            self.elements[p].children.push(idx);
        }
        idx
    }

    pub fn roots(&self) -> impl Iterator<Item = usize> + '_ {
        self.elements
            .iter()
            .enumerate()
            .filter(|(_, e)| e.parent.is_none())
            .map(|(i, _)| i)
    }

    /// Checks that parent/children links form a forest with consistent back-references.
    pub fn validate_forest(&self) -> Result<(), ForestError> {
        let n = self.elements.len();
        let mut listed = vec![0usize; n];
        for (i, e) in self.elements.iter().enumerate() {
            if let Some(p) = e.parent {
                if p >= n {
                    return Err(ForestError::ParentOutOfRange { element: i, parent: p });
                }
                if p == i {
                    return Err(ForestError::SelfParent(i));
                }
            }
            for &c in &e.children {
                if c >= n {
                    return Err(ForestError::ChildOutOfRange { element: i, child: c });
                }
                if self.elements[c].parent != Some(i) {
                    return Err(ForestError::BrokenBackReference {
                        child: c,
                        listed_under: i,
                        actual: self.elements[c].parent,
                    });
                }
                listed[c] += 1;
            }
        }
        for (i, e) in self.elements.iter().enumerate() {
            match (e.parent, listed[i]) {
                (Some(p), 0) => return Err(ForestError::MissingChild { child: i, parent: p }),
                (_, k) if k > 1 => return Err(ForestError::DuplicateChild(i)),
                _ => {}
            }
        }
        // 0 = unvisited, 1 = on current path, 2 = reaches a root
        let mut state = vec![0u8; n];
        for start in 0..n {
            let mut path = Vec::new();
            let mut cur = Some(start);
            while let Some(i) = cur {
                match state[i] {
                    2 => break,
                    1 => return Err(ForestError::Cycle(i)),
                    _ => {
                        state[i] = 1;
                        path.push(i);
                        cur = self.elements[i].parent;
                    }
                }
            }
            for i in path {
                state[i] = 2;
            }
        }
        Ok(())
    }

    /// When no element lists children, rebuild every children list from the
    /// parent links (in index order). Ingested records may carry only parents.
    pub fn link_children_from_parents(&mut self) {
        if self.elements.iter().any(|e| !e.children.is_empty()) {
            return;
        }
        let n = self.elements.len();
        for i in 0..n {
            if let Some(p) = self.elements[i].parent {
                if p < n && p != i {
                    self.elements[p].children.push(i);
                }
            }
        }
    }

    /// Keeps elements where `keep[i]` holds and compacts indices. Children of a
    /// removed element move to its nearest surviving ancestor, taking its place
    /// in that ancestor's child order. Returns the old-to-new index map.
    ///
    /// The forest must be valid.
    pub fn retain_elements(&self, keep: &[bool]) -> (PageRecord<T>, Vec<Option<usize>>) {
        assert_eq!(keep.len(), self.elements.len());
        let mut map = vec![None; keep.len()];
        let mut next = 0;
        for (i, &k) in keep.iter().enumerate() {
            if k {
                map[i] = Some(next);
                next += 1;
            }
        }
        let nearest_kept_ancestor = |mut i: usize| -> Option<usize> {
            while let Some(p) = self.elements[i].parent {
                if keep[p] {
                    return map[p];
                }
                i = p;
            }
            None
        };
        let mut elements = Vec::with_capacity(next);
        for (i, e) in self.elements.iter().enumerate() {
            if !keep[i] {
                continue;
            }
            let mut children = Vec::new();
            let mut stack: Vec<usize> = e.children.iter().rev().copied().collect();
            while let Some(c) = stack.pop() {
                if keep[c] {
                    children.push(map[c].expect("kept"));
                } else {
                    stack.extend(self.elements[c].children.iter().rev().copied());
                }
            }
            elements.push(UiElement {
                bbox: e.bbox,
                class: e.class,
                text: e.text.clone(),
                parent: nearest_kept_ancestor(i),
                children,
                confidence: e.confidence,
            });
        }
        let page = PageRecord {
            elements,
            ..self.clone_header()
        };
        (page, map)
    }

    /// Copy of everything but the elements.
    pub fn clone_header(&self) -> PageRecord<T> {
        PageRecord {
            page_id: self.page_id.clone(),
            url: self.url.clone(),
            viewport: self.viewport,
            elements: Vec::new(),
            screenshot_path: self.screenshot_path.clone(),
            phash: self.phash,
            judge_score: self.judge_score,
            provenance: self.provenance.clone(),
        }
    }
}

pub(crate) mod hex_hash {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<u64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(h) => s.serialize_str(&format!("{h:016x}")),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
        let Some(s) = Option::<String>::deserialize(d)? else {
            return Ok(None);
        };
        let t = s.trim_start_matches("0x");
        if t.is_empty() || t.len() > 16 {
            return Err(serde::de::Error::custom(format!("phash {s:?} is not 1-16 hex digits")));
        }
        u64::from_str_radix(t, 16)
            .map(Some)
            .map_err(|e| serde::de::Error::custom(format!("phash {s:?}: {e}")))
    }
}
