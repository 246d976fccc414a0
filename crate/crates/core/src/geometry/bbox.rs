use std::fmt;

use crate::error::{Error, Result};

/// Axis-aligned rectangle in continuous pixel coordinates.
///
/// Construction checks that every coordinate is finite and that the box has
/// strictly positive width and height, so every `BBox` in circulation has a
/// positive area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    xmin: f64,
    ymin: f64,
    xmax: f64,
    ymax: f64,
}

impl BBox {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Result<Self> {
        if ![xmin, ymin, xmax, ymax].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "box ({xmin}, {ymin}, {xmax}, {ymax}) has non-finite coordinates"
            )));
        }
        if xmax <= xmin || ymax <= ymin {
            return Err(Error::InvalidInput(format!(
                "box ({xmin}, {ymin}, {xmax}, {ymax}) has non-positive area"
            )));
        }
        Ok(Self {
            xmin,
            ymin,
            xmax,
            ymax,
        })
    }

    /// Builds a box from its center and size.
    pub fn from_center(cx: f64, cy: f64, width: f64, height: f64) -> Result<Self> {
        Self::new(
            cx - 0.5 * width,
            cy - 0.5 * height,
            cx + 0.5 * width,
            cy + 0.5 * height,
        )
    }

    pub fn xmin(&self) -> f64 {
        self.xmin
    }

    pub fn ymin(&self) -> f64 {
        self.ymin
    }

    pub fn xmax(&self) -> f64 {
        self.xmax
    }

    pub fn ymax(&self) -> f64 {
        self.ymax
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.xmin + self.xmax),
            0.5 * (self.ymin + self.ymax),
        )
    }

    pub fn corners(&self) -> [f64; 4] {
        [self.xmin, self.ymin, self.xmax, self.ymax]
    }

    /// Area of the overlap with `other`, zero when the interiors are disjoint.
    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.xmax.min(other.xmax) - self.xmin.max(other.xmin);
        let h = self.ymax.min(other.ymax) - self.ymin.max(other.ymin);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Intersects the box with `[0, width] x [0, height]`. Returns `None` when
    /// nothing of positive area is left.
    pub fn clip(&self, bounds: Extent) -> Option<BBox> {
        BBox::new(
            self.xmin.clamp(0.0, bounds.width),
            self.ymin.clamp(0.0, bounds.height),
            self.xmax.clamp(0.0, bounds.width),
            self.ymax.clamp(0.0, bounds.height),
        )
        .ok()
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Result<BBox> {
        BBox::new(self.xmin + dx, self.ymin + dy, self.xmax + dx, self.ymax + dy)
    }

    pub fn is_within(&self, bounds: Extent) -> bool {
        self.xmin >= 0.0 && self.ymin >= 0.0 && self.xmax <= bounds.width && self.ymax <= bounds.height
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.xmin, self.ymin, self.xmax, self.ymax)
    }
}

/// Intersection over union under the continuous-area convention.
pub fn box_iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Image extent in pixels, used for clipping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extent {
    pub width: f64,
    pub height: f64,
}

impl Extent {
    pub fn new(width: f64, height: f64) -> Self {
        Self { width, height }
    }
}

/// Class index. The detector is built for two classes, healthy and stressed;
/// name mapping lives in [`crate::dataio::ClassMap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId(pub usize);

impl ClassId {
    pub const HEALTHY: ClassId = ClassId(0);
    pub const STRESSED: ClassId = ClassId(1);
    /// Number of foreground classes the heads predict.
    pub const COUNT: usize = 2;

    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A box with a class and, for detections, a confidence score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledBox {
    pub bbox: BBox,
    pub class: ClassId,
    score: Option<f64>,
}

impl LabeledBox {
    /// Ground-truth style box without a score.
    pub fn new(bbox: BBox, class: ClassId) -> Self {
        Self {
            bbox,
            class,
            score: None,
        }
    }

    pub fn scored(bbox: BBox, class: ClassId, score: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::InvalidInput(format!(
                "score {score} outside [0, 1]"
            )));
        }
        Ok(Self {
            bbox,
            class,
            score: Some(score),
        })
    }

    pub fn score(&self) -> Option<f64> {
        self.score
    }
}
