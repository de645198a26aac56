//! Pixel-domain computations on a coordinate-compressed grid.
//!
//! A pixel `(i, j)` belongs to a box when `x1 <= i < x2` and `y1 <= j < y2`
//! after rounding the box coordinates to integers and clamping them to the
//! grid. Rather than visiting every pixel, the grid is cut along every box
//! edge into slabs whose pixels share the same covering set; each slab is
//! labelled once and weighted by its pixel count.

use crate::geom::{BBox, Viewport};
use crate::scalar::Scalar;

/// A box snapped to integer pixel edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelBox {
    pub x1: i64,
    pub y1: i64,
    pub x2: i64,
    pub y2: i64,
}

impl PixelBox {
    pub fn from_bbox<T: Scalar>(b: &BBox<T>) -> Option<Self> {
        let r = |v: T| v.round().to_i64();
        Some(Self {
            x1: r(b.x1)?,
            y1: r(b.y1)?,
            x2: r(b.x2)?,
            y2: r(b.y2)?,
        })
    }

    /// Area before clamping; this is what "smallest covering box" compares.
    pub fn area(&self) -> i64 {
        (self.x2 - self.x1).max(0) * (self.y2 - self.y1).max(0)
    }

    pub fn clamp(&self, grid: Viewport) -> Option<PixelBox> {
        let c = PixelBox {
            x1: self.x1.clamp(0, grid.width as i64),
            y1: self.y1.clamp(0, grid.height as i64),
            x2: self.x2.clamp(0, grid.width as i64),
            y2: self.y2.clamp(0, grid.height as i64),
        };
        (c.x2 > c.x1 && c.y2 > c.y1).then_some(c)
    }

    pub fn contains(&self, i: i64, j: i64) -> bool {
        self.x1 <= i && i < self.x2 && self.y1 <= j && j < self.y2
    }
}

/// Pixel counts over the grid for one prediction/ground-truth pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PixelStats {
    /// Pixels covered by both unions.
    pub intersection: u64,
    /// Pixels covered by either union.
    pub union: u64,
    pub gt_area: u64,
    pub pred_area: u64,
    /// Pixels where both label maps carry the same (non-background) label.
    pub label_agree: u64,
}

impl PixelStats {
    pub fn add(&mut self, o: &PixelStats) {
        self.intersection += o.intersection;
        self.union += o.union;
        self.gt_area += o.gt_area;
        self.pred_area += o.pred_area;
        self.label_agree += o.label_agree;
    }
}

struct Prepared {
    boxes: Vec<PixelBox>,
    labels: Vec<u32>,
    /// Box indices sorted by (area, index): first hit on a pixel wins.
    priority: Vec<usize>,
}

fn prepare<T: Scalar>(items: &[(BBox<T>, u32)], grid: Viewport) -> Prepared {
    let mut boxes = Vec::new();
    let mut labels = Vec::new();
    let mut areas = Vec::new();
    for (b, l) in items {
        let Some(pb) = PixelBox::from_bbox(b) else { continue };
        if let Some(c) = pb.clamp(grid) {
            boxes.push(c);
            labels.push(*l);
            areas.push(pb.area());
        }
    }
    let mut priority: Vec<usize> = (0..boxes.len()).collect();
    priority.sort_by_key(|&i| (areas[i], i));
    Prepared {
        boxes,
        labels,
        priority,
    }
}

/// Next-unpainted-column lookup for one slab row.
struct Skip(Vec<usize>);

impl Skip {
    fn reset(&mut self, n: usize) {
        self.0.clear();
        self.0.extend(0..=n);
    }

    fn next(&mut self, mut c: usize) -> usize {
        let mut root = c;
        while self.0[root] != root {
            root = self.0[root];
        }
        while self.0[c] != root {
            let nxt = self.0[c];
            self.0[c] = root;
            c = nxt;
        }
        root
    }
}

fn paint_row(
    prep: &Prepared,
    y_lo: i64,
    y_hi: i64,
    xs: &[i64],
    out: &mut [Option<u32>],
    skip: &mut Skip,
) {
    out.iter_mut().for_each(|v| *v = None);
    skip.reset(out.len());
    for &i in &prep.priority {
        let b = &prep.boxes[i];
        if b.y1 > y_lo || b.y2 < y_hi {
            continue;
        }
        let c0 = xs.partition_point(|&x| x < b.x1);
        let c1 = xs.partition_point(|&x| x < b.x2);
        let mut c = skip.next(c0);
        while c < c1 {
            out[c] = Some(prep.labels[i]);
            skip.0[c] = c + 1;
            c = skip.next(c + 1);
        }
    }
}

/// Occupancy and smallest-box label statistics for `pred` against `gt`.
pub fn pixel_stats<T: Scalar>(
    pred: &[(BBox<T>, u32)],
    gt: &[(BBox<T>, u32)],
    grid: Viewport,
) -> PixelStats {
    let p = prepare(pred, grid);
    let g = prepare(gt, grid);
    let mut xs: Vec<i64> = vec![0, grid.width as i64];
    let mut ys: Vec<i64> = vec![0, grid.height as i64];
    for b in p.boxes.iter().chain(&g.boxes) {
        xs.extend([b.x1, b.x2]);
        ys.extend([b.y1, b.y2]);
    }
    xs.sort_unstable();
    xs.dedup();
    ys.sort_unstable();
    ys.dedup();

    let cols = xs.len() - 1;
    let mut lp = vec![None; cols];
    let mut lg = vec![None; cols];
    let mut skip = Skip(Vec::with_capacity(cols + 1));
    let mut stats = PixelStats::default();
    for row in ys.windows(2) {
        let (y_lo, y_hi) = (row[0], row[1]);
        let h = (y_hi - y_lo) as u64;
        paint_row(&p, y_lo, y_hi, &xs, &mut lp, &mut skip);
        paint_row(&g, y_lo, y_hi, &xs, &mut lg, &mut skip);
        for c in 0..cols {
            let w = (xs[c + 1] - xs[c]) as u64;
            let cell = w * h;
            let (a, b) = (lp[c], lg[c]);
            if a.is_some() || b.is_some() {
                stats.union += cell;
            }
            if a.is_some() {
                stats.pred_area += cell;
            }
            if b.is_some() {
                stats.gt_area += cell;
                if a.is_some() {
                    stats.intersection += cell;
                    if a == b {
                        stats.label_agree += cell;
                    }
                }
            }
        }
    }
    stats
}

/// Number of grid pixels covered by at least one box.
pub fn union_area<T: Scalar>(boxes: &[BBox<T>], grid: Viewport) -> u64 {
    let items: Vec<(BBox<T>, u32)> = boxes.iter().map(|b| (*b, 0)).collect();
    pixel_stats(&items, &[], grid).pred_area
}

#[cfg(test)]
mod tests {
    use super::*;

    fn items(v: &[(f64, f64, f64, f64, u32)]) -> Vec<(BBox<f64>, u32)> {
        v.iter().map(|&(a, b, c, d, l)| (BBox::new(a, b, c, d), l)).collect()
    }

    #[test]
    fn one_dimensional_overlap() {
        let s = pixel_stats(
            &items(&[(0., 0., 2., 1., 1)]),
            &items(&[(1., 0., 3., 1., 1)]),
            Viewport::new(4, 1),
        );
        assert_eq!((s.intersection, s.union, s.gt_area, s.pred_area), (1, 3, 2, 2));
    }

    #[test]
    fn rounding_and_clamping() {
        // 0.4 rounds down, 2.6 rounds up; the second box leaves the grid
        let s = pixel_stats(
            &items(&[(0.4, 0., 2.6, 1., 1), (3., -5., 99., 99., 2)]),
            &[],
            Viewport::new(4, 2),
        );
        assert_eq!(s.pred_area, 3 + 2);
    }

    #[test]
    fn smallest_box_label_wins() {
        let gt = items(&[(0., 0., 10., 10., 7), (2., 2., 4., 4., 3)]);
        let same = pixel_stats(&gt, &gt, Viewport::new(10, 10));
        assert_eq!(same.label_agree, 100);
        let relabeled = items(&[(0., 0., 10., 10., 7), (2., 2., 4., 4., 7)]);
        let s = pixel_stats(&relabeled, &gt, Viewport::new(10, 10));
        assert_eq!(s.label_agree, 96);
    }

    #[test]
    fn equal_area_tie_goes_to_lower_index() {
        let gt = items(&[(0., 0., 2., 2., 1), (0., 0., 2., 2., 2)]);
        let pred = items(&[(0., 0., 2., 2., 1)]);
        assert_eq!(pixel_stats(&pred, &gt, Viewport::new(2, 2)).label_agree, 4);
    }

    #[test]
    fn union_area_counts_overlap_once() {
        let b = [BBox::new(0., 0., 10., 10.), BBox::new(5., 5., 15., 15.)];
        assert_eq!(union_area(&b, Viewport::new(20, 20)), 175);
        assert_eq!(union_area::<f64>(&[], Viewport::new(20, 20)), 0);
    }
}
