//! The 55-class UI taxonomy and its container/atomic and interactive partitions.

use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Canonical class names, indexed by `id - 1`.
pub const CLASS_NAMES: [&str; 55] = [
    "Table",
    "Column/Browser",
    "Button",
    "Utility Button",
    "App Icon",
    "Navigation Bar",
    "Status Bar",
    "Search Field",
    "Toolbar",
    "Tooltip",
    "Video",
    "Tab Bar",
    "Side Bar",
    "Slider",
    "Picker",
    "ContextMenu",
    "DockMenu",
    "EditMenu",
    "Image",
    "Scroll",
    "Switch",
    "File Icon",
    "Chart",
    "Window",
    "Screen",
    "List",
    "List Item",
    "PopUp Menu",
    "Steppers",
    "Toggles",
    "Text Input",
    "Rating Indicator",
    "Checkbox",
    "Radiobox",
    "Select",
    "Avatar",
    "Badge",
    "Alert",
    "Bottom navigation",
    "Breadcrumb",
    "Page control",
    "Link",
    "Menu",
    "Pagination",
    "Tab",
    "Search Bar",
    "Date-Time picker",
    "Calendar",
    "Text",
    "Heading",
    "Code snippet",
    "Carousel",
    "Notification",
    "Logo",
    "Progress bar",
];

pub const NUM_CLASSES: usize = CLASS_NAMES.len();

const DEFAULT_CONTAINERS: [&str; 23] = [
    "Table",
    "Column/Browser",
    "Navigation Bar",
    "Status Bar",
    "Toolbar",
    "Tab Bar",
    "Side Bar",
    "ContextMenu",
    "DockMenu",
    "EditMenu",
    "Window",
    "Screen",
    "List",
    "PopUp Menu",
    "Bottom navigation",
    "Breadcrumb",
    "Menu",
    "Pagination",
    "Search Bar",
    "Calendar",
    "Carousel",
    "Scroll",
    "Notification",
];

const DEFAULT_INTERACTIVE: [&str; 19] = [
    "Button",
    "Utility Button",
    "Search Field",
    "Slider",
    "Switch",
    "Steppers",
    "Toggles",
    "Text Input",
    "Checkbox",
    "Radiobox",
    "Select",
    "Link",
    "Tab",
    "Date-Time picker",
    "Picker",
    "Page control",
    "Menu",
    "Pagination",
    "Rating Indicator",
];

/// Lowercase, replace runs of non-alphanumerics with a single `_`, trim `_`.
pub fn tag_name_for(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    let mut pending_sep = false;
    for ch in name.chars() {
        if ch.is_ascii_alphanumeric() {
            if pending_sep && !out.is_empty() {
                out.push('_');
            }
            pending_sep = false;
            out.push(ch.to_ascii_lowercase());
        } else {
            pending_sep = true;
        }
    }
    out
}

fn tag_names() -> &'static [String; NUM_CLASSES] {
    static TAGS: OnceLock<[String; NUM_CLASSES]> = OnceLock::new();
    TAGS.get_or_init(|| std::array::from_fn(|i| tag_name_for(CLASS_NAMES[i])))
}

/// One of the 55 taxonomy classes, identified by its 1-based id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UiClass(u8);

impl UiClass {
    pub const TEXT: UiClass = UiClass(49);
    pub const BUTTON: UiClass = UiClass(3);
    pub const IMAGE: UiClass = UiClass(19);
    pub const WINDOW: UiClass = UiClass(24);
    pub const SCREEN: UiClass = UiClass(25);
    pub const CHECKBOX: UiClass = UiClass(33);

    pub fn from_id(id: u32) -> Option<Self> {
        (1..=NUM_CLASSES as u32).contains(&id).then_some(Self(id as u8))
    }

    /// Looks up a canonical name or its tag form (`"Date-Time picker"` or `"date_time_picker"`).
    pub fn from_name(name: &str) -> Option<Self> {
        CLASS_NAMES
            .iter()
            .position(|n| *n == name)
            .or_else(|| tag_names().iter().position(|t| t == name))
            .map(|i| Self(i as u8 + 1))
    }

    pub fn from_tag_name(tag: &str) -> Option<Self> {
        tag_names().iter().position(|t| t == tag).map(|i| Self(i as u8 + 1))
    }

    pub fn id(self) -> u32 {
        self.0 as u32
    }

    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn name(self) -> &'static str {
        CLASS_NAMES[self.index()]
    }

    pub fn tag_name(self) -> &'static str {
        &tag_names()[self.index()]
    }

    pub fn all() -> impl Iterator<Item = UiClass> + Clone {
        (1..=NUM_CLASSES as u8).map(UiClass)
    }
}

impl fmt::Display for UiClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for UiClass {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for UiClass {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Id(u32),
            Name(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Id(id) => UiClass::from_id(id)
                .ok_or_else(|| serde::de::Error::custom(format!("class id {id} outside 1..=55"))),
            Repr::Name(name) => UiClass::from_name(&name)
                .ok_or_else(|| serde::de::Error::custom(format!("unknown class {name:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassKind {
    Container,
    Atomic,
}

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("unknown class {0:?} in taxonomy config")]
    UnknownClass(String),
    #[error("reading taxonomy config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing taxonomy config: {0}")]
    Parse(#[from] toml::de::Error),
}

/// Config-file form of the partitions. Either list may be omitted to keep
/// the compiled-in default.
///
/// ```toml
/// container = ["Window", "List"]
/// interactive = ["Button", "Link"]
/// ```
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaxonomyConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub container: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interactive: Option<Vec<String>>,
}

/// Container/atomic and interactive flags for every class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    container: [bool; NUM_CLASSES],
    interactive: [bool; NUM_CLASSES],
}

impl Default for Taxonomy {
    fn default() -> Self {
        Self::with_partitions(&DEFAULT_CONTAINERS, &DEFAULT_INTERACTIVE)
            .expect("default partitions name known classes")
    }
}

impl Taxonomy {
    pub fn with_partitions<S: AsRef<str>>(
        containers: &[S],
        interactive: &[S],
    ) -> Result<Self, TaxonomyError> {
        Ok(Self {
            container: mask(containers)?,
            interactive: mask(interactive)?,
        })
    }

    pub fn from_config(cfg: &TaxonomyConfig) -> Result<Self, TaxonomyError> {
        let mut tax = Self::default();
        if let Some(c) = &cfg.container {
            tax.container = mask(c)?;
        }
        if let Some(i) = &cfg.interactive {
            tax.interactive = mask(i)?;
        }
        Ok(tax)
    }

    pub fn from_toml_str(s: &str) -> Result<Self, TaxonomyError> {
        Self::from_config(&toml::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TaxonomyError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TaxonomyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn kind(&self, class: UiClass) -> ClassKind {
        if self.container[class.index()] {
            ClassKind::Container
        } else {
            ClassKind::Atomic
        }
    }

    pub fn is_container(&self, class: UiClass) -> bool {
        self.container[class.index()]
    }

    pub fn is_interactive(&self, class: UiClass) -> bool {
        self.interactive[class.index()]
    }

    pub fn containers(&self) -> impl Iterator<Item = UiClass> + '_ {
        UiClass::all().filter(|c| self.is_container(*c))
    }

    pub fn atomics(&self) -> impl Iterator<Item = UiClass> + '_ {
        UiClass::all().filter(|c| !self.is_container(*c))
    }

    pub fn to_config(&self) -> TaxonomyConfig {
        let names = |m: &[bool; NUM_CLASSES]| {
            UiClass::all()
                .filter(|c| m[c.index()])
                .map(|c| c.name().to_string())
                .collect()
        };
        TaxonomyConfig {
            container: Some(names(&self.container)),
            interactive: Some(names(&self.interactive)),
        }
    }
}

fn mask<S: AsRef<str>>(names: &[S]) -> Result<[bool; NUM_CLASSES], TaxonomyError> {
    let mut m = [false; NUM_CLASSES];
    for n in names {
        let class = UiClass::from_name(n.as_ref())
            .ok_or_else(|| TaxonomyError::UnknownClass(n.as_ref().to_string()))?;
        m[class.index()] = true;
    }
    Ok(m)
}
