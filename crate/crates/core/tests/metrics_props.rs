mod common;

use proptest::prelude::*;

use common::RawBox;
use screenparse::metrics::{self, Aggregation, Annotation};
use screenparse::{BBox, Viewport};

const W: u32 = 48;
const H: u32 = 40;

fn raw_box() -> impl Strategy<Value = RawBox> {
    (-5i32..50, -5i32..45, 0i32..30, 0i32..30, 0u32..3, 0u32..=4).prop_map(|(x, y, w, h, label, c)| RawBox {
        x1: x as f64,
        y1: y as f64,
        x2: (x + w) as f64,
        y2: (y + h) as f64,
        label,
        conf: c as f64 / 4.0,
    })
}

fn boxes(max: usize) -> impl Strategy<Value = Vec<RawBox>> {
    prop::collection::vec(raw_box(), 0..=max)
}

fn grid() -> Viewport {
    Viewport::new(W, H)
}

/// Largest one-to-one matching at IoU >= 0.5, by exhaustive search.
fn optimal_matches(pred: &[RawBox], gt: &[RawBox]) -> usize {
    fn go(i: usize, used: u32, pred: &[RawBox], gt: &[RawBox]) -> usize {
        if i == pred.len() {
            return 0;
        }
        let mut best = go(i + 1, used, pred, gt);
        for (j, g) in gt.iter().enumerate() {
            if used & (1 << j) == 0 && common::box_iou(&pred[i], g) >= 0.5 {
                best = best.max(1 + go(i + 1, used | (1 << j), pred, gt));
            }
        }
        best
    }
    go(0, 0, pred, gt)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn page_iou_is_symmetric(p in boxes(8), g in boxes(8)) {
        let (p, g) = (common::annotations(&p), common::annotations(&g));
        prop_assert_eq!(metrics::page_iou(&p, &g, grid()), metrics::page_iou(&g, &p, grid()));
    }

    #[test]
    fn label_iou_never_exceeds_page_iou(p in boxes(8), g in boxes(8)) {
        let (p, g) = (common::annotations(&p), common::annotations(&g));
        let full = metrics::page_iou(&p, &g, grid());
        let labelled = metrics::label_page_iou(&p, &g, grid());
        prop_assert!(labelled <= full + 1e-12);
        prop_assert!((0.0..=1.0).contains(&labelled));
    }

    #[test]
    fn pixel_metrics_equal_oracle(p in boxes(10), g in boxes(10)) {
        let (inter, union, gt_px, agree) = common::pixel_counts(&p, &g, W, H);
        let (pa, ga) = (common::annotations(&p), common::annotations(&g));
        let s = metrics::pixel_stats(
            &pa.iter().map(|a| (a.bbox, a.label)).collect::<Vec<_>>(),
            &ga.iter().map(|a| (a.bbox, a.label)).collect::<Vec<_>>(),
            grid(),
        );
        prop_assert_eq!((s.intersection, s.union, s.gt_area, s.label_agree), (inter, union, gt_px, agree));
    }

    #[test]
    fn pix_cov_self_and_monotone(g in boxes(6), p in boxes(6), extra in raw_box()) {
        let ga = common::annotations(&g);
        if let Some(c) = metrics::pix_cov(&ga, &ga, grid()) {
            prop_assert_eq!(c, 1.0);
        }
        let mut pa = common::annotations(&p);
        let before = metrics::pix_cov(&pa, &ga, grid());
        pa.push(extra.annotation());
        let after = metrics::pix_cov(&pa, &ga, grid());
        prop_assert_eq!(before.is_some(), after.is_some());
        if let (Some(b), Some(a)) = (before, after) {
            prop_assert!(a >= b);
        }
    }

    #[test]
    fn recall_monotone_in_predictions(g in boxes(6), p in boxes(6), extra in raw_box(), aware in any::<bool>()) {
        let ga = common::annotations(&g);
        let mut pa = common::annotations(&p);
        let before = metrics::recall_at_50(&pa, &ga, aware);
        pa.push(extra.annotation());
        prop_assert!(metrics::recall_at_50(&pa, &ga, aware) >= before);
    }

    #[test]
    fn greedy_never_beats_optimal(p in boxes(6), g in boxes(6)) {
        let greedy = metrics::recall_at_50(&common::annotations(&p), &common::annotations(&g), false);
        let greedy_count = (greedy * g.len() as f64).round() as usize;
        prop_assert!(greedy_count <= optimal_matches(&p, &g));
        prop_assert_eq!(greedy, common::recall(&p, &g, false));
    }

    #[test]
    fn map_bounded_and_low_confidence_miss_never_helps(p in boxes(8), g in boxes(8)) {
        let (pa, ga) = (common::annotations(&p), common::annotations(&g));
        let base = metrics::map_at_50(&pa, &ga);
        prop_assert_eq!(base.is_some(), !g.is_empty());
        if let Some(v) = base {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        // far outside every box, so zero IoU with all ground truth
        for label in 0..3 {
            let mut more = pa.clone();
            more.push(Annotation::new(BBox::new(500.0, 500.0, 510.0, 510.0), label).with_confidence(Some(0.0)));
            let after = metrics::map_at_50(&more, &ga);
            if let (Some(b), Some(a)) = (base, after) {
                prop_assert!(a <= b + 1e-12);
            }
        }
    }
}

#[test]
fn documented_examples() {
    let a = |x1, y1, x2, y2, l| Annotation::new(BBox::new(x1, y1, x2, y2), l);
    let g4 = Viewport::new(4, 1);
    let v = metrics::page_iou(&[a(0., 0., 2., 1., 0)], &[a(1., 0., 3., 1., 0)], g4);
    assert!((v - 1.0 / 3.0).abs() < 1e-15);

    let g = Viewport::new(10, 10);
    let gt = [a(0., 0., 10., 10., 0), a(2., 2., 4., 4., 1)];
    assert_eq!(metrics::label_page_iou(&gt, &gt, g), 1.0);
    let pred = [a(0., 0., 10., 10., 0), a(2., 2., 4., 4., 0)];
    assert!((metrics::label_page_iou(&pred, &gt, g) - 0.96).abs() < 1e-15);

    let g100 = [a(0., 0., 100., 100., 0)];
    let two = [
        a(0., 0., 100., 60., 0).with_confidence(Some(0.9)),
        a(0., 0., 100., 90., 0).with_confidence(Some(0.8)),
    ];
    assert_eq!(metrics::recall_at_50(&two, &g100, true), 1.0);
    let half = [a(0., 0., 50., 100., 0)];
    assert_eq!(metrics::pix_cov(&half, &g100, Viewport::new(100, 100)), Some(0.5));
    assert_eq!(metrics::pix_cov::<f64>(&[], &g100, Viewport::new(100, 100)), Some(0.0));
    assert_eq!(metrics::page_iou::<f64>(&[], &g100, Viewport::new(100, 100)), 0.0);
    assert_eq!(metrics::recall_at_50::<f64>(&[], &[], true), 1.0);
}

#[test]
fn aggregation_skips_undefined_values() {
    let a = |x2| Annotation::new(BBox::new(0., 0., x2, 10.), 0);
    let grid = Viewport::new(10, 10);
    let imgs = vec![
        metrics::evaluate_image("a", &[a(2.)], &[a(10.)], grid),
        metrics::evaluate_image("b", &[a(4.)], &[a(10.)], grid),
        metrics::evaluate_image::<f64>("c", &[], &[], grid),
    ];
    let r = metrics::aggregate(&imgs[..2], Aggregation::Macro);
    assert!((r.page_iou.unwrap() - 0.3).abs() < 1e-12);
    let single = metrics::aggregate(&imgs[..1], Aggregation::Macro);
    assert_eq!(single, imgs[0].report);
    let with_empty = metrics::aggregate(&imgs, Aggregation::Macro);
    assert_eq!(with_empty.pix_cov, r.pix_cov);
    assert!((with_empty.page_iou.unwrap() - (0.2 + 0.4 + 1.0) / 3.0).abs() < 1e-12);
    let micro = metrics::aggregate(&imgs[..2], Aggregation::Micro);
    assert!((micro.page_iou.unwrap() - 0.3).abs() < 1e-12);
}
