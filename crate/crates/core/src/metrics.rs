//! Pixel-wise evaluation of box detections.
//!
//! Ground-truth and predicted boxes of each class are rasterized into binary
//! masks on the image grid; true positives, false positives and false
//! negatives are pixel counts of the mask intersections and differences.
//!
//! Rasterization uses a half-open integer convention: box `(xmin, ymin,
//! xmax, ymax)` covers pixel `(row i, col j)` iff
//! `floor(xmin) <= j <= floor(xmax) - 1` and `floor(ymin) <= i <= floor(ymax) - 1`,
//! clamped to the grid. This is unrelated to the continuous convention of
//! [`box_iou`](crate::geometry::box_iou).

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::{BBox, ClassId, LabeledBox};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelGrid {
    pub height: usize,
    pub width: usize,
}

impl PixelGrid {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidInput(format!("empty pixel grid {height}x{width}")));
        }
        Ok(Self { height, width })
    }
}

/// Row-major binary mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub grid: PixelGrid,
    bits: Vec<bool>,
}

impl Mask {
    pub fn empty(grid: PixelGrid) -> Self {
        Self {
            grid,
            bits: vec![false; grid.height * grid.width],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.grid.width + col]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Sets every pixel `box` covers.
    pub fn fill(&mut self, b: &BBox) {
        let (rows, cols) = pixel_span(b, self.grid);
        for r in rows {
            self.bits[r * self.grid.width..(r + 1) * self.grid.width][cols.clone()].fill(true);
        }
    }
}

/// Row and column ranges a box covers on `grid`.
pub fn pixel_span(b: &BBox, grid: PixelGrid) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
    let span = |lo: f64, hi: f64, n: usize| {
        let clamp = |v: f64| v.floor().clamp(0.0, n as f64) as usize;
        let (a, z) = (clamp(lo), clamp(hi));
        a..z.max(a)
    };
    (
        span(b.ymin(), b.ymax(), grid.height),
        span(b.xmin(), b.xmax(), grid.width),
    )
}

/// Union of the boxes as a mask.
pub fn rasterize<'a>(boxes: impl IntoIterator<Item = &'a BBox>, grid: PixelGrid) -> Mask {
    let mut m = Mask::empty(grid);
    for b in boxes {
        m.fill(b);
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, fp, fn_ }
    }

    pub fn merge(self, other: Self) -> Self {
        Self {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.tp == 0 && self.fp == 0 && self.fn_ == 0
    }
}

/// Confusion counts of one class between two masks.
pub fn mask_confusion(gt: &Mask, pred: &Mask) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for (&g, &p) in gt.bits().iter().zip(pred.bits()) {
        match (g, p) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => {}
        }
    }
    c
}

/// Per-class pixel confusion of one image. Classes are evaluated
/// independently; index `k` of the result is class `k`.
pub fn pixel_confusion(
    gt: &[LabeledBox],
    pred: &[LabeledBox],
    grid: PixelGrid,
    num_classes: usize,
) -> Result<Vec<ConfusionCounts>> {
    if let Some(b) = gt.iter().chain(pred).find(|b| b.class.index() >= num_classes) {
        return Err(Error::InvalidInput(format!(
            "class {} outside the {num_classes} declared classes",
            b.class
        )));
    }
    Ok((0..num_classes)
        .map(|k| {
            let of = |set: &'_ [LabeledBox]| -> Vec<BBox> {
                set.iter().filter(|b| b.class == ClassId(k)).map(|b| b.bbox).collect()
            };
            let g = rasterize(&of(gt), grid);
            let p = rasterize(&of(pred), grid);
            mask_confusion(&g, &p)
        })
        .collect())
}

/// Overlap metrics of one class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub dsc: f64,
    pub iou: f64,
    pub precision: f64,
    pub recall: f64,
    /// No ground-truth or predicted pixels; metrics were set to 1.
    pub absent: bool,
}

/// DSC = 2TP/(2TP+FP+FN), IoU = TP/(TP+FP+FN), precision = TP/(TP+FP),
/// recall = TP/(TP+FN).
///
/// All four are 1 when the class is absent from both masks, and 0 when
/// there are no true positives but some errors.
pub fn compute_metrics(c: ConfusionCounts) -> ClassMetrics {
    if c.is_empty() {
        return ClassMetrics {
            dsc: 1.0,
            iou: 1.0,
            precision: 1.0,
            recall: 1.0,
            absent: true,
        };
    }
    if c.tp == 0 {
        return ClassMetrics {
            dsc: 0.0,
            iou: 0.0,
            precision: 0.0,
            recall: 0.0,
            absent: false,
        };
    }
    let (tp, fp, fn_) = (c.tp as f64, c.fp as f64, c.fn_ as f64);
    ClassMetrics {
        dsc: 2.0 * tp / (2.0 * tp + fp + fn_),
        iou: tp / (tp + fp + fn_),
        precision: tp / (tp + fp),
        recall: tp / (tp + fn_),
        absent: false,
    }
}

/// How per-image counts are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Averaging {
    /// Sum counts over images, then compute metrics.
    #[default]
    Pooled,
    /// Compute metrics per image, then take the mean over images.
    PerImage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub class: ClassId,
    pub name: String,
    pub counts: ConfusionCounts,
    pub metrics: ClassMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub averaging: Averaging,
    pub classes: Vec<ClassReport>,
    /// Mean DSC over classes.
    pub macro_dsc: f64,
}

/// Combines per-image, per-class counts into a report. `class_names[k]`
/// labels class `k`.
pub fn aggregate(
    per_image: &[Vec<ConfusionCounts>],
    class_names: &[String],
    averaging: Averaging,
) -> Result<MetricsReport> {
    if per_image.is_empty() {
        return Err(Error::InvalidInput("no images to aggregate".into()));
    }
    let k = class_names.len();
    if let Some(bad) = per_image.iter().find(|c| c.len() != k) {
        return Err(Error::shape(
            "aggregate",
            format!("{} class counts for {k} classes", bad.len()),
        ));
    }
    let classes: Vec<ClassReport> = (0..k)
        .map(|ci| {
            let counts = per_image
                .iter()
                .fold(ConfusionCounts::default(), |acc, img| acc.merge(img[ci]));
            let metrics = match averaging {
                Averaging::Pooled => compute_metrics(counts),
                Averaging::PerImage => {
                    let n = per_image.len() as f64;
                    let all: Vec<ClassMetrics> =
                        per_image.iter().map(|img| compute_metrics(img[ci])).collect();
                    let mean = |f: fn(&ClassMetrics) -> f64| all.iter().map(f).sum::<f64>() / n;
                    ClassMetrics {
                        dsc: mean(|m| m.dsc),
                        iou: mean(|m| m.iou),
                        precision: mean(|m| m.precision),
                        recall: mean(|m| m.recall),
                        absent: all.iter().all(|m| m.absent),
                    }
                }
            };
            ClassReport {
                class: ClassId(ci),
                name: class_names[ci].clone(),
                counts,
                metrics,
            }
        })
        .collect();
    let macro_dsc = classes.iter().map(|c| c.metrics.dsc).sum::<f64>() / k.max(1) as f64;
    Ok(MetricsReport {
        averaging,
        classes,
        macro_dsc,
    })
}

impl MetricsReport {
    /// Tab-separated report.
    ///
    /// ```text
    /// # averaging=pooled
    /// class  tp  fp  fn  dsc  iou  precision  recall  absent
    /// healthy  30  20  20  0.600000  0.428571  0.600000  0.600000  0
    /// ...
    /// macro_avg  -  -  -  0.600000  -  -  -  -
    /// ```
    ///
    /// Counts are integers, ratios have six decimals, `absent` is 1 when the
    /// class had no pixels in either mask. The last row holds the mean DSC
    /// over classes.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mode = match self.averaging {
            Averaging::Pooled => "pooled",
            Averaging::PerImage => "per-image",
        };
        writeln!(s, "# averaging={mode}").unwrap();
        writeln!(s, "class\ttp\tfp\tfn\tdsc\tiou\tprecision\trecall\tabsent").unwrap();
        for c in &self.classes {
            let m = &c.metrics;
            writeln!(
                s,
                "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}",
                c.name, c.counts.tp, c.counts.fp, c.counts.fn_, m.dsc, m.iou, m.precision, m.recall,
                u8::from(m.absent)
            )
            .unwrap();
        }
        writeln!(s, "macro_avg\t-\t-\t-\t{:.6}\t-\t-\t-\t-", self.macro_dsc).unwrap();
        s
    }
}
