//! Axis-aligned boxes in continuous pixel coordinates.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::scalar::Scalar;

/// Left, top, right, bottom in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BBox<T = f64> {
    pub x1: T,
    pub y1: T,
    pub x2: T,
    pub y2: T,
}

impl<T: Scalar> BBox<T> {
    pub fn new(x1: T, y1: T, x2: T, y2: T) -> Self {
        Self { x1, y1, x2, y2 }
    }

    pub fn from_f64(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self::new(
            T::from_f64_lossy(x1),
            T::from_f64_lossy(y1),
            T::from_f64_lossy(x2),
            T::from_f64_lossy(y2),
        )
    }

    pub fn width(&self) -> T {
        self.x2 - self.x1
    }

    pub fn height(&self) -> T {
        self.y2 - self.y1
    }

    /// `(x2-x1)*(y2-y1)`, or zero for degenerate and inverted boxes.
    pub fn area(&self) -> T {
        let w = self.width();
        let h = self.height();
        if w > T::zero() && h > T::zero() {
            w * h
        } else {
            T::zero()
        }
    }

    /// True when both extents are strictly positive and every coordinate is finite.
    pub fn is_valid(&self) -> bool {
        [self.x1, self.y1, self.x2, self.y2].iter().all(|v| v.is_finite())
            && self.width() > T::zero()
            && self.height() > T::zero()
    }

    pub fn intersection(&self, other: &Self) -> Option<Self> {
        let b = Self::new(
            self.x1.max(other.x1),
            self.y1.max(other.y1),
            self.x2.min(other.x2),
            self.y2.min(other.y2),
        );
        (b.width() > T::zero() && b.height() > T::zero()).then_some(b)
    }

    pub fn intersection_area(&self, other: &Self) -> T {
        let w = self.x2.min(other.x2) - self.x1.max(other.x1);
        let h = self.y2.min(other.y2) - self.y1.max(other.y1);
        if w > T::zero() && h > T::zero() {
            w * h
        } else {
            T::zero()
        }
    }

    pub fn contains_box(&self, other: &Self) -> bool {
        self.x1 <= other.x1 && self.y1 <= other.y1 && self.x2 >= other.x2 && self.y2 >= other.y2
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> BBox<U> {
        BBox::new(f(self.x1), f(self.y1), f(self.x2), f(self.y2))
    }

    pub fn to_array(&self) -> [T; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }
}

/// Intersection over union. Zero when the union has no area.
pub fn iou<T: Scalar>(a: &BBox<T>, b: &BBox<T>) -> T {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union > T::zero() {
        inter / union
    } else {
        T::zero()
    }
}

/// Intersection area divided by the area of the smaller box. Zero when the
/// smaller box is degenerate.
pub fn containment_ratio<T: Scalar>(a: &BBox<T>, b: &BBox<T>) -> T {
    let smaller = a.area().min(b.area());
    if smaller > T::zero() {
        a.intersection_area(b) / smaller
    } else {
        T::zero()
    }
}

impl<T: Scalar + Serialize> Serialize for BBox<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_array().serialize(serializer)
    }
}

impl<'de, T: Scalar + Deserialize<'de>> Deserialize<'de> for BBox<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [x1, y1, x2, y2] = <[T; 4]>::deserialize(deserializer)?;
        Ok(Self { x1, y1, x2, y2 })
    }
}

/// Rendered page size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Viewport {
    pub width: u32,
    pub height: u32,
}

impl Viewport {
    pub const DEFAULT: Viewport = Viewport { width: 1440, height: 900 };

    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }

    pub fn is_valid(&self) -> bool {
        self.width > 0 && self.height > 0
    }

    pub fn area(&self) -> f64 {
        self.width as f64 * self.height as f64
    }

    pub fn as_box<T: Scalar>(&self) -> BBox<T> {
        BBox::from_f64(0.0, 0.0, self.width as f64, self.height as f64)
    }
}

impl Default for Viewport {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl std::str::FromStr for Viewport {
    type Err = String;

    /// Parses `WxH`, e.g. `1440x900`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (w, h) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
        let width = w.trim().parse::<u32>().map_err(|e| format!("bad width {w:?}: {e}"))?;
        let height = h.trim().parse::<u32>().map_err(|e| format!("bad height {h:?}: {e}"))?;
        let vp = Viewport { width, height };
        if !vp.is_valid() {
            return Err(format!("viewport extents must be positive, got {s:?}"));
        }
        Ok(vp)
    }
}
