use std::cmp::Ordering;

use super::{box_iou, LabeledBox};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmsConfig {
    /// A box is suppressed when its IoU with a kept box exceeds this.
    pub iou_threshold: f64,
    /// Only boxes of the same class suppress each other.
    pub per_class: bool,
}

impl Default for NmsConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.3,
            per_class: true,
        }
    }
}

/// Per-class greedy non-maximum suppression. See [`nms_with`].
pub fn nms(dets: &[LabeledBox], iou_threshold: f64) -> Vec<LabeledBox> {
    nms_with(
        dets,
        NmsConfig {
            iou_threshold,
            ..NmsConfig::default()
        },
    )
}

/// Greedy non-maximum suppression.
///
/// Boxes are visited in descending score order, ties broken by position in
/// `dets`. The result keeps that order. Boxes without a score rank as 0.
pub fn nms_with(dets: &[LabeledBox], cfg: NmsConfig) -> Vec<LabeledBox> {
    let score = |i: usize| dets[i].score().unwrap_or(0.0);
    let mut order: Vec<usize> = (0..dets.len()).collect();
    // stable sort keeps insertion order among equal scores
    order.sort_by(|&a, &b| score(b).partial_cmp(&score(a)).unwrap_or(Ordering::Equal));

    let mut suppressed = vec![false; dets.len()];
    let mut keep = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        keep.push(dets[i]);
        let kept = &dets[i];
        for &j in &order[pos + 1..] {
            if suppressed[j] || (cfg.per_class && dets[j].class != kept.class) {
                continue;
            }
            if box_iou(&kept.bbox, &dets[j].bbox) > cfg.iou_threshold {
                suppressed[j] = true;
            }
        }
    }
    keep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BBox, ClassId};

    fn det(x0: f64, y0: f64, x1: f64, y1: f64, class: ClassId, s: f64) -> LabeledBox {
        LabeledBox::scored(BBox::new(x0, y0, x1, y1).unwrap(), class, s).unwrap()
    }

    #[test]
    fn trivial_inputs() {
        assert!(nms(&[], 0.3).is_empty());
        let one = det(0., 0., 5., 5., ClassId::HEALTHY, 0.9);
        assert_eq!(nms(&[one], 0.3), vec![one]);
    }

    #[test]
    fn duplicate_keeps_higher_score() {
        let a = det(0., 0., 5., 5., ClassId::HEALTHY, 0.8);
        let b = det(0., 0., 5., 5., ClassId::HEALTHY, 0.9);
        assert_eq!(nms(&[a, b], 0.3), vec![b]);
    }

    #[test]
    fn classes_do_not_suppress_each_other() {
        let a = det(0., 0., 5., 5., ClassId::HEALTHY, 0.8);
        let b = det(0., 0., 5., 5., ClassId::STRESSED, 0.9);
        assert_eq!(nms(&[a, b], 0.3), vec![b, a]);
        let agnostic = NmsConfig {
            per_class: false,
            ..NmsConfig::default()
        };
        assert_eq!(nms_with(&[a, b], agnostic), vec![b]);
    }

    #[test]
    fn threshold_is_strict() {
        // IoU exactly 1/3 against a threshold of 1/3 is not suppressed
        let a = det(0., 0., 2., 1., ClassId::HEALTHY, 0.9);
        let b = det(1., 0., 3., 1., ClassId::HEALTHY, 0.8);
        assert!((box_iou(&a.bbox, &b.bbox) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(nms(&[a, b], box_iou(&a.bbox, &b.bbox)).len(), 2);
        assert_eq!(nms(&[a, b], 0.3).len(), 1);
    }

    #[test]
    fn ties_break_by_insertion_order() {
        let a = det(0., 0., 5., 5., ClassId::HEALTHY, 0.5);
        let b = det(1., 0., 6., 5., ClassId::HEALTHY, 0.5);
        assert_eq!(nms(&[a, b], 0.3), vec![a]);
        assert_eq!(nms(&[b, a], 0.3), vec![b]);
    }
}
