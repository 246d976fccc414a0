use crate::error::{Error, Result};

use super::{BBox, Extent};

/// Offsets of a box relative to an anchor: center shifts in units of the
/// anchor size, and log size ratios.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RegressionDeltas {
    pub tx: f64,
    pub ty: f64,
    pub tw: f64,
    pub th: f64,
}

impl RegressionDeltas {
    pub fn new(tx: f64, ty: f64, tw: f64, th: f64) -> Self {
        Self { tx, ty, tw, th }
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.tx, self.ty, self.tw, self.th]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Encodes `gt` relative to `anchor`.
pub fn encode_box(anchor: &BBox, gt: &BBox) -> RegressionDeltas {
    // BBox guarantees positive sizes, so the logs and divisions are defined.
    let (xa, ya) = anchor.center();
    let (xg, yg) = gt.center();
    let (wa, ha) = (anchor.width(), anchor.height());
    RegressionDeltas {
        tx: (xg - xa) / wa,
        ty: (yg - ya) / ha,
        tw: (gt.width() / wa).ln(),
        th: (gt.height() / ha).ln(),
    }
}

/// Inverse of [`encode_box`] without clipping, as `[xmin, ymin, xmax, ymax]`.
/// Corners may be infinite when the size terms overflow.
pub fn decode_unclipped(anchor: &BBox, d: &RegressionDeltas) -> [f64; 4] {
    let (xa, ya) = anchor.center();
    let (wa, ha) = (anchor.width(), anchor.height());
    let cx = xa + d.tx * wa;
    let cy = ya + d.ty * ha;
    let w = wa * d.tw.exp();
    let h = ha * d.th.exp();
    [cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h]
}

/// A decoded, clipped box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodedBox {
    pub bbox: BBox,
    /// Set when the size terms overflowed and the box was saturated to the
    /// image bounds.
    pub saturated: bool,
}

/// Applies `d` to `anchor` and clips the result to `bounds`.
///
/// Fails when the deltas are not finite or when nothing of the decoded box
/// remains inside the image.
pub fn decode_box(anchor: &BBox, d: &RegressionDeltas, bounds: Extent) -> Result<DecodedBox> {
    if !d.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite deltas {d:?}")));
    }
    let raw = decode_unclipped(anchor, d);
    let saturated = raw.iter().any(|v| !v.is_finite());
    let clamp = |v: f64, hi: f64| {
        if v.is_nan() {
            0.0
        } else {
            v.clamp(0.0, hi)
        }
    };
    let bbox = BBox::new(
        clamp(raw[0], bounds.width),
        clamp(raw[1], bounds.height),
        clamp(raw[2], bounds.width),
        clamp(raw[3], bounds.height),
    )
    .map_err(|_| {
        Error::InvalidInput(format!(
            "decoded box {raw:?} has no area inside {}x{}",
            bounds.width, bounds.height
        ))
    })?;
    Ok(DecodedBox { bbox, saturated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_encoding() {
        let a = BBox::new(3.0, 4.0, 19.0, 40.0).unwrap();
        assert_eq!(encode_box(&a, &a), RegressionDeltas::default());
    }

    #[test]
    fn hand_computed_deltas() {
        let anchor = BBox::from_center(50.0, 50.0, 100.0, 100.0).unwrap();
        let gt = BBox::from_center(60.0, 50.0, 200.0, 100.0).unwrap();
        let d = encode_box(&anchor, &gt);
        assert!((d.tx - 0.1).abs() < 1e-15);
        assert_eq!(d.ty, 0.0);
        assert!((d.tw - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(d.th, 0.0);
        let back = decode_unclipped(&anchor, &d);
        for (x, y) in back.iter().zip(gt.corners()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_deltas_clip_anchor() {
        let anchor = BBox::new(-6.0, -6.0, 10.0, 10.0).unwrap();
        let out = decode_box(&anchor, &RegressionDeltas::default(), Extent::new(672.0, 672.0)).unwrap();
        assert_eq!(out.bbox.corners(), [0.0, 0.0, 10.0, 10.0]);
        assert!(!out.saturated);

        let inside = BBox::new(20.0, 30.0, 50.0, 45.0).unwrap();
        let out = decode_box(&inside, &RegressionDeltas::default(), Extent::new(672.0, 672.0)).unwrap();
        assert_eq!(out.bbox, inside);
    }

    #[test]
    fn overflow_saturates_to_bounds() {
        let anchor = BBox::new(100.0, 100.0, 132.0, 132.0).unwrap();
        let d = RegressionDeltas::new(0.0, 0.0, 1000.0, 1000.0);
        let out = decode_box(&anchor, &d, Extent::new(640.0, 480.0)).unwrap();
        assert!(out.saturated);
        assert_eq!(out.bbox.corners(), [0.0, 0.0, 640.0, 480.0]);
    }

    #[test]
    fn non_finite_or_outside_is_error() {
        let anchor = BBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let bounds = Extent::new(64.0, 64.0);
        assert!(decode_box(&anchor, &RegressionDeltas::new(f64::NAN, 0., 0., 0.), bounds).is_err());
        assert!(decode_box(&anchor, &RegressionDeltas::new(100.0, 0., 0., 0.), bounds).is_err());
    }

    #[test]
    fn seeded_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let anchor = BBox::from_center(
                rng.random_range(-50.0..700.0),
                rng.random_range(-50.0..700.0),
                rng.random_range(4.0..400.0),
                rng.random_range(4.0..400.0),
            )
            .unwrap();
            let gt = BBox::from_center(
                rng.random_range(0.0..672.0),
                rng.random_range(0.0..672.0),
                rng.random_range(1.0..300.0),
                rng.random_range(1.0..300.0),
            )
            .unwrap();
            let back = decode_unclipped(&anchor, &encode_box(&anchor, &gt));
            for (x, y) in back.iter().zip(gt.corners()) {
                assert!((x - y).abs() <= 1e-9, "{back:?} vs {gt}");
            }
        }
    }
}
