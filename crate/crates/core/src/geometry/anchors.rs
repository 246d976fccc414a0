use crate::error::{Error, Result};

use super::BBox;

/// Anchor pyramid layout: one anchor size per pyramid level, every size
/// combined with every width/height ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorConfig {
    /// Stride of each level relative to the input, P2 first.
    pub level_strides: Vec<u32>,
    /// Anchor side length (pixels) at ratio 1, one per level.
    pub level_sizes: Vec<f64>,
    /// Width/height ratios.
    pub ratios: Vec<f64>,
    /// Input (height, width) in pixels.
    pub input_size: (u32, u32),
}

impl Default for AnchorConfig {
    fn default() -> Self {
        Self {
            level_strides: vec![4, 8, 16, 32, 64],
            level_sizes: vec![16.0, 32.0, 64.0, 128.0, 256.0],
            ratios: vec![0.5, 1.0, 2.0],
            input_size: (672, 672),
        }
    }
}

/// Input dimensions must be multiples of this.
pub const INPUT_MULTIPLE: u32 = 32;

impl AnchorConfig {
    pub fn with_input_size(height: u32, width: u32) -> Self {
        Self {
            input_size: (height, width),
            ..Self::default()
        }
    }

    pub fn anchors_per_cell(&self) -> usize {
        self.ratios.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (h, w) = self.input_size;
        if h == 0 || w == 0 || h % INPUT_MULTIPLE != 0 || w % INPUT_MULTIPLE != 0 {
            return Err(Error::Config(format!(
                "input size {h}x{w} must be a positive multiple of {INPUT_MULTIPLE}"
            )));
        }
        if self.level_strides.is_empty() {
            return Err(Error::Config("no pyramid levels configured".into()));
        }
        if self.level_sizes.len() != self.level_strides.len() {
            return Err(Error::Config(format!(
                "{} anchor sizes for {} levels",
                self.level_sizes.len(),
                self.level_strides.len()
            )));
        }
        if !self.level_strides.iter().all(|s| s.is_power_of_two())
            || !self.level_strides.windows(2).all(|p| p[0] < p[1])
        {
            return Err(Error::Config(format!(
                "strides {:?} must be strictly increasing powers of two",
                self.level_strides
            )));
        }
        if !self.level_sizes.iter().all(|s| s.is_finite() && *s > 0.0) {
            return Err(Error::Config("anchor sizes must be positive".into()));
        }
        if self.ratios.is_empty() || !self.ratios.iter().all(|r| r.is_finite() && *r > 0.0) {
            return Err(Error::Config(format!(
                "ratios {:?} must be non-empty and positive",
                self.ratios
            )));
        }
        Ok(())
    }

    /// Feature-map (rows, cols) for a level with the given stride.
    pub fn grid_for_stride(&self, stride: u32) -> (usize, usize) {
        let (h, w) = self.input_size;
        (h.div_ceil(stride) as usize, w.div_ceil(stride) as usize)
    }
}

/// Anchors of one pyramid level in row-major cell order, ratios innermost.
#[derive(Debug, Clone)]
pub struct LevelAnchors {
    pub stride: u32,
    pub size: f64,
    /// (rows, cols)
    pub grid: (usize, usize),
    pub boxes: Vec<BBox>,
}

/// The full anchor pyramid. Flattened order (level, row, col, ratio) is the
/// order in which the detection heads emit their outputs.
#[derive(Debug, Clone)]
pub struct AnchorSet {
    pub levels: Vec<LevelAnchors>,
}

impl AnchorSet {
    pub fn len(&self) -> usize {
        self.levels.iter().map(|l| l.boxes.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &BBox> {
        self.levels.iter().flat_map(|l| l.boxes.iter())
    }

    pub fn to_vec(&self) -> Vec<BBox> {
        self.iter().copied().collect()
    }
}

/// Tiles anchors over every level. Cell `(row, col)` of a level with stride
/// `s` is centered at `((col + 0.5) s, (row + 0.5) s)`; a ratio `r` gives
/// width `size * sqrt(r)` and height `size / sqrt(r)`. Anchors crossing the
/// image border are kept.
pub fn generate_anchors(cfg: &AnchorConfig) -> Result<AnchorSet> {
    cfg.validate()?;
    let levels = cfg
        .level_strides
        .iter()
        .zip(&cfg.level_sizes)
        .map(|(&stride, &size)| {
            let (rows, cols) = cfg.grid_for_stride(stride);
            let shapes: Vec<(f64, f64)> = cfg
                .ratios
                .iter()
                .map(|r| (size * r.sqrt(), size / r.sqrt()))
                .collect();
            let s = f64::from(stride);
            let mut boxes = Vec::with_capacity(rows * cols * shapes.len());
            for row in 0..rows {
                let cy = (row as f64 + 0.5) * s;
                for col in 0..cols {
                    let cx = (col as f64 + 0.5) * s;
                    for &(w, h) in &shapes {
                        boxes.push(BBox::from_center(cx, cy, w, h)?);
                    }
                }
            }
            Ok(LevelAnchors {
                stride,
                size,
                grid: (rows, cols),
                boxes,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AnchorSet { levels })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_pyramid_counts() {
        let set = generate_anchors(&AnchorConfig::default()).unwrap();
        let grids: Vec<_> = set.levels.iter().map(|l| l.grid).collect();
        assert_eq!(grids, vec![(168, 168), (84, 84), (42, 42), (21, 21), (11, 11)]);

        let mut expected = 0;
        for stride in [4u32, 8, 16, 32, 64] {
            let mut cells = 0;
            let mut y = 0;
            while y < 672 {
                let mut x = 0;
                while x < 672 {
                    cells += 1;
                    x += stride;
                }
                y += stride;
            }
            expected += 3 * cells;
        }
        assert_eq!(expected, 112_818);
        assert_eq!(set.len(), expected);
    }

    #[test]
    fn first_p2_anchor() {
        let set = generate_anchors(&AnchorConfig::default()).unwrap();
        // ratios are [0.5, 1, 2]; index 1 is the square anchor
        let a = set.levels[0].boxes[1];
        assert_eq!(a.center(), (2.0, 2.0));
        assert_eq!(a.corners(), [-6.0, -6.0, 10.0, 10.0]);
    }

    #[test]
    fn ratio_preserves_area() {
        let set = generate_anchors(&AnchorConfig::with_input_size(64, 64)).unwrap();
        let a = set.levels[0].boxes[0];
        assert!((a.width() - 16.0 / 2f64.sqrt()).abs() < 1e-12);
        assert!((a.height() - 16.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!((a.area() - 256.0).abs() < 1e-9);
        for level in &set.levels {
            for b in &level.boxes {
                assert!((b.area() - level.size * level.size).abs() < 1e-9 * level.size * level.size);
            }
        }
    }

    #[test]
    fn small_input_grids() {
        let set = generate_anchors(&AnchorConfig::with_input_size(64, 64)).unwrap();
        let rows: Vec<_> = set.levels.iter().map(|l| l.grid.0).collect();
        assert_eq!(rows, vec![16, 8, 4, 2, 1]);
        assert_eq!(set.len(), 1_023);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(matches!(
            generate_anchors(&AnchorConfig::with_input_size(100, 64)),
            Err(Error::Config(_))
        ));
        let mut cfg = AnchorConfig::default();
        cfg.level_sizes.pop();
        assert!(cfg.validate().is_err());
        let cfg = AnchorConfig {
            level_strides: vec![4, 8, 12, 32, 64],
            ..AnchorConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = AnchorConfig {
            ratios: vec![0.5, 0.0],
            ..AnchorConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
