//! Screen-parsing toolkit: the ScreenTag markup format, an annotation
//! cleaning pipeline, page-level evaluation metrics, a reference weighted
//! cross-entropy and a synthetic page generator.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common `f64` instantiations.

pub mod geom;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod page;
pub mod pipeline;
pub mod scalar;
pub mod screentag;
pub mod synth;
pub mod taxonomy;

pub use geom::{containment_ratio, iou, BBox, Viewport};
pub use page::{ForestError, PageRecord, UiElement};
pub use scalar::Scalar;
pub use taxonomy::{ClassKind, Taxonomy, UiClass, CLASS_NAMES, NUM_CLASSES};

pub type BBoxF64 = BBox<f64>;
pub type BBoxF32 = BBox<f32>;
pub type Element = UiElement<f64>;
pub type ElementF32 = UiElement<f32>;
pub type Page = PageRecord<f64>;
pub type PageF32 = PageRecord<f32>;
pub type Annotation = metrics::Annotation<f64>;
pub type WeightSpec = loss::WeightSpec<f64>;
pub type ScoredSequence = loss::ScoredSequence<f64>;
