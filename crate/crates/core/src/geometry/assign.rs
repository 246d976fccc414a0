use crate::error::{Error, Result};

use super::{box_iou, BBox, LabeledBox};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssignConfig {
    pub pos_thresh: f64,
    pub neg_thresh: f64,
}

impl Default for AssignConfig {
    fn default() -> Self {
        Self {
            pos_thresh: 0.5,
            neg_thresh: 0.4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorLabel {
    Positive { gt: usize },
    Negative,
    /// Between the thresholds; contributes to no loss term.
    Ignore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorAssignment {
    pub labels: Vec<AnchorLabel>,
}

impl AnchorAssignment {
    pub fn num_positive(&self) -> usize {
        self.labels
            .iter()
            .filter(|l| matches!(l, AnchorLabel::Positive { .. }))
            .count()
    }
}

/// Labels every anchor against the ground truth.
///
/// An anchor whose best overlap reaches `pos_thresh` is positive and matched
/// to the ground-truth box it overlaps most (lowest index on ties); below
/// `neg_thresh` it is negative, in between it is ignored. A ground-truth box
/// that no anchor reaches `pos_thresh` for is force-matched to its single
/// best anchor, provided that overlap is non-zero. When two such boxes want
/// the same anchor, the higher overlap wins.
pub fn assign_targets(
    anchors: &[BBox],
    gt: &[LabeledBox],
    cfg: AssignConfig,
) -> Result<AnchorAssignment> {
    let AssignConfig {
        pos_thresh,
        neg_thresh,
    } = cfg;
    if !(0.0 <= neg_thresh && neg_thresh <= pos_thresh && pos_thresh <= 1.0) {
        return Err(Error::Config(format!(
            "thresholds must satisfy 0 <= neg ({neg_thresh}) <= pos ({pos_thresh}) <= 1"
        )));
    }
    if gt.is_empty() {
        return Ok(AnchorAssignment {
            labels: vec![AnchorLabel::Negative; anchors.len()],
        });
    }

    // per-gt best anchor: (iou, anchor index)
    let mut best_anchor = vec![(0.0f64, usize::MAX); gt.len()];
    let mut labels = Vec::with_capacity(anchors.len());
    for (ai, anchor) in anchors.iter().enumerate() {
        let mut best = (0.0f64, 0usize);
        for (gi, g) in gt.iter().enumerate() {
            let iou = box_iou(anchor, &g.bbox);
            if iou > best.0 {
                best = (iou, gi);
            }
            if iou > best_anchor[gi].0 {
                best_anchor[gi] = (iou, ai);
            }
        }
        labels.push(if best.0 >= pos_thresh {
            AnchorLabel::Positive { gt: best.1 }
        } else if best.0 < neg_thresh {
            AnchorLabel::Negative
        } else {
            AnchorLabel::Ignore
        });
    }

    let mut forced: Vec<Option<f64>> = vec![None; anchors.len()];
    for (gi, &(iou, ai)) in best_anchor.iter().enumerate() {
        if iou <= 0.0 || iou >= pos_thresh {
            continue;
        }
        if forced[ai].is_some_and(|prev| prev >= iou) {
            continue;
        }
        forced[ai] = Some(iou);
        labels[ai] = AnchorLabel::Positive { gt: gi };
    }
    Ok(AnchorAssignment { labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ClassId;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lb(x0: f64, y0: f64, x1: f64, y1: f64) -> LabeledBox {
        LabeledBox::new(BBox::new(x0, y0, x1, y1).unwrap(), ClassId::HEALTHY)
    }

    #[test]
    fn exact_match_is_positive() {
        let g = lb(10., 10., 30., 30.);
        let a = assign_targets(&[g.bbox], &[g], AssignConfig::default()).unwrap();
        assert_eq!(a.labels, vec![AnchorLabel::Positive { gt: 0 }]);
    }

    #[test]
    fn disjoint_is_negative() {
        let g = lb(10., 10., 30., 30.);
        let anchors = [BBox::new(100., 100., 120., 120.).unwrap(), g.bbox];
        let a = assign_targets(&anchors, &[g], AssignConfig::default()).unwrap();
        assert_eq!(a.labels[0], AnchorLabel::Negative);
    }

    #[test]
    fn empty_ground_truth() {
        let anchors = [BBox::new(0., 0., 1., 1.).unwrap(); 4];
        let a = assign_targets(&anchors, &[], AssignConfig::default()).unwrap();
        assert!(a.labels.iter().all(|l| *l == AnchorLabel::Negative));
    }

    #[test]
    fn forced_match_for_small_object() {
        // IoU 0.25 with the only overlapping anchor: below both thresholds.
        let g = lb(0., 0., 10., 10.);
        let anchors = [
            BBox::new(0., 0., 20., 20.).unwrap(),
            BBox::new(50., 50., 60., 60.).unwrap(),
        ];
        let a = assign_targets(&anchors, &[g], AssignConfig::default()).unwrap();
        assert_eq!(a.labels, vec![AnchorLabel::Positive { gt: 0 }, AnchorLabel::Negative]);
    }

    #[test]
    fn invalid_thresholds() {
        let cfg = AssignConfig {
            pos_thresh: 0.3,
            neg_thresh: 0.4,
        };
        assert!(assign_targets(&[], &[], cfg).is_err());
    }

    /// Exhaustive recomputation from the full IoU matrix.
    fn oracle(anchors: &[BBox], gt: &[LabeledBox], cfg: AssignConfig) -> Vec<AnchorLabel> {
        let m: Vec<Vec<f64>> = anchors
            .iter()
            .map(|a| gt.iter().map(|g| box_iou(a, &g.bbox)).collect())
            .collect();
        let mut out: Vec<AnchorLabel> = m
            .iter()
            .map(|row| {
                let max = row.iter().cloned().fold(0.0, f64::max);
                let arg = row.iter().position(|&v| v == max).unwrap();
                if max >= cfg.pos_thresh {
                    AnchorLabel::Positive { gt: arg }
                } else if max < cfg.neg_thresh {
                    AnchorLabel::Negative
                } else {
                    AnchorLabel::Ignore
                }
            })
            .collect();
        let mut claimed: Vec<f64> = vec![-1.0; anchors.len()];
        for gi in 0..gt.len() {
            let col: Vec<f64> = m.iter().map(|r| r[gi]).collect();
            let max = col.iter().cloned().fold(0.0, f64::max);
            if max <= 0.0 || max >= cfg.pos_thresh {
                continue;
            }
            let ai = col.iter().position(|&v| v == max).unwrap();
            if claimed[ai] >= max {
                continue;
            }
            claimed[ai] = max;
            out[ai] = AnchorLabel::Positive { gt: gi };
        }
        out
    }

    #[test]
    fn matches_exhaustive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rand_box = |rng: &mut ChaCha8Rng| {
            let x = rng.random_range(0.0..80.0);
            let y = rng.random_range(0.0..80.0);
            BBox::new(x, y, x + rng.random_range(4.0..30.0), y + rng.random_range(4.0..30.0)).unwrap()
        };
        for _ in 0..50 {
            let anchors: Vec<BBox> = (0..50).map(|_| rand_box(&mut rng)).collect();
            let gt: Vec<LabeledBox> = (0..5)
                .map(|i| LabeledBox::new(rand_box(&mut rng), ClassId(i % 2)))
                .collect();
            let cfg = AssignConfig::default();
            let got = assign_targets(&anchors, &gt, cfg).unwrap();
            assert_eq!(got.labels, oracle(&anchors, &gt, cfg));
            assert!(got.labels.iter().all(|l| match l {
                AnchorLabel::Positive { gt: g } => *g < gt.len(),
                _ => true,
            }));
        }
    }
}
