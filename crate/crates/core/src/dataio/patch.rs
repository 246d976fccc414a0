use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::geometry::{BBox, Extent, LabeledBox};

use super::{Annotation, ImageBuffer};

/// A box survives cropping only if at least this fraction of its rotated
/// extent stays inside the patch.
pub const MIN_RETAINED_AREA: f64 = 0.25;

/// Counter-clockwise rotation of the source before cropping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rotation {
    Deg0,
    Deg45,
    Deg90,
    Deg135,
}

impl Rotation {
    pub const ALL: [Rotation; 4] = [Rotation::Deg0, Rotation::Deg45, Rotation::Deg90, Rotation::Deg135];

    pub fn from_degrees(deg: u32) -> Result<Self> {
        match deg {
            0 => Ok(Rotation::Deg0),
            45 => Ok(Rotation::Deg45),
            90 => Ok(Rotation::Deg90),
            135 => Ok(Rotation::Deg135),
            d => Err(Error::Config(format!("rotation {d} is not one of 0, 45, 90, 135"))),
        }
    }

    pub fn degrees(self) -> u32 {
        match self {
            Rotation::Deg0 => 0,
            Rotation::Deg45 => 45,
            Rotation::Deg90 => 90,
            Rotation::Deg135 => 135,
        }
    }

    /// (cos, sin), exact for the right angles.
    fn cos_sin(self) -> (f64, f64) {
        match self {
            Rotation::Deg0 => (1.0, 0.0),
            Rotation::Deg45 => (FRAC_1_SQRT_2, FRAC_1_SQRT_2),
            Rotation::Deg90 => (0.0, 1.0),
            Rotation::Deg135 => (-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
        }
    }
}

/// Rotates `img` about `center` (pixel coordinates, y down) and crops the
/// `size` x `size` window centered there. The whole window must map inside
/// the source. Pixels are sampled bilinearly at their centers. Boxes become
/// the axis-aligned hull of their rotated corners, clipped to the patch.
pub fn extract_patch(
    img: &ImageBuffer,
    ann: &Annotation,
    center: (f64, f64),
    size: usize,
    rotation: Rotation,
) -> Result<(ImageBuffer, Annotation)> {
    if size == 0 {
        return Err(Error::InvalidInput("patch size is zero".into()));
    }
    if (ann.width as usize, ann.height as usize) != (img.width(), img.height()) {
        return Err(Error::InvalidInput(format!(
            "annotation is {}x{}, image is {}x{}",
            ann.width,
            ann.height,
            img.width(),
            img.height()
        )));
    }
    let (cx, cy) = center;
    let (c, s) = rotation.cos_sin();
    let half = size as f64 / 2.0;
    // patch offset (u, v) from the window center back to the source
    let to_source = |u: f64, v: f64| (cx + c * u - s * v, cy + s * u + c * v);
    let (w, h) = (img.width() as f64, img.height() as f64);
    for (u, v) in [(-half, -half), (half, -half), (-half, half), (half, half)] {
        let (x, y) = to_source(u, v);
        let eps = 1e-9;
        if !(x >= -eps && x <= w + eps && y >= -eps && y <= h + eps) {
            return Err(Error::InvalidInput(format!(
                "{size}px window at ({cx}, {cy}) rotated {} degrees leaves the {}x{} image",
                rotation.degrees(),
                img.width(),
                img.height()
            )));
        }
    }

    let ch = img.channels();
    let mut data = Vec::with_capacity(size * size * ch);
    for row in 0..size {
        for col in 0..size {
            let (x, y) = to_source(col as f64 + 0.5 - half, row as f64 + 0.5 - half);
            sample_bilinear(img, x - 0.5, y - 0.5, &mut data);
        }
    }
    let patch = ImageBuffer::new(size, size, ch, data)?;

    let bounds = Extent::new(size as f64, size as f64);
    let mut objects = Vec::new();
    for obj in &ann.objects {
        let [x0, y0, x1, y1] = obj.bbox.corners();
        let mut hull = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for (x, y) in [(x0, y0), (x1, y0), (x0, y1), (x1, y1)] {
            let (dx, dy) = (x - cx, y - cy);
            let u = c * dx + s * dy + half;
            let v = -s * dx + c * dy + half;
            hull = [hull[0].min(u), hull[1].min(v), hull[2].max(u), hull[3].max(v)];
        }
        let rotated = BBox::new(hull[0], hull[1], hull[2], hull[3])?;
        if let Some(clipped) = rotated.clip(bounds) {
            if clipped.area() >= MIN_RETAINED_AREA * rotated.area() {
                objects.push(LabeledBox::new(clipped, obj.class));
            }
        }
    }
    let out = Annotation {
        filename: ann.filename.clone(),
        width: size as u32,
        height: size as u32,
        depth: ch as u32,
        objects,
    };
    Ok((patch, out))
}

/// `x`, `y` are in pixel-index units (pixel centers at integers). Indices
/// are clamped at the border.
fn sample_bilinear(img: &ImageBuffer, x: f64, y: f64, out: &mut Vec<f64>) {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let clamp = |v: isize, hi: isize| v.clamp(0, hi - 1) as usize;
    let (c0, c1) = (clamp(x0 as isize, w), clamp(x0 as isize + 1, w));
    let (r0, r1) = (clamp(y0 as isize, h), clamp(y0 as isize + 1, h));
    for ch in 0..img.channels() {
        let top = img.get(r0, c0, ch) * (1.0 - fx) + img.get(r0, c1, ch) * fx;
        let bottom = img.get(r1, c0, ch) * (1.0 - fx) + img.get(r1, c1, ch) * fx;
        out.push((top * (1.0 - fy) + bottom * fy).clamp(0.0, 1.0));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ClassId;

    fn blank(w: u32, h: u32, objects: Vec<LabeledBox>) -> Annotation {
        Annotation {
            filename: "x.ppm".into(),
            width: w,
            height: h,
            depth: 1,
            objects,
        }
    }

    fn ramp(w: usize, h: usize) -> ImageBuffer {
        let n = w * h;
        ImageBuffer::new(w, h, 1, (0..n).map(|i| i as f64 / n as f64).collect()).unwrap()
    }

    #[test]
    fn quarter_turn_of_two_by_two() {
        // a b     b d
        // c d ->  a c
        let img = ImageBuffer::new(2, 2, 1, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let (p, _) = extract_patch(&img, &blank(2, 2, vec![]), (1.0, 1.0), 2, Rotation::Deg90).unwrap();
        assert_eq!(p.data(), &[0.2, 0.4, 0.1, 0.3]);
    }

    #[test]
    fn four_quarter_turns_are_identity() {
        let img = ramp(6, 6);
        let b = BBox::new(1.0, 0.5, 4.0, 2.0).unwrap();
        let ann = blank(6, 6, vec![LabeledBox::new(b, ClassId::STRESSED)]);
        let (mut p, mut a) = (img.clone(), ann.clone());
        for _ in 0..4 {
            (p, a) = extract_patch(&p, &a, (3.0, 3.0), 6, Rotation::Deg90).unwrap();
        }
        assert_eq!(p, img);
        assert_eq!(a.objects, ann.objects);
    }

    #[test]
    fn zero_rotation_is_a_crop() {
        let img = ramp(8, 5);
        let b = BBox::new(2.0, 1.0, 5.0, 4.0).unwrap();
        let ann = blank(8, 5, vec![LabeledBox::new(b, ClassId::HEALTHY)]);
        let (p, a) = extract_patch(&img, &ann, (4.0, 2.0), 4, Rotation::Deg0).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(p.get(r, c, 0), img.get(r, c + 2, 0));
            }
        }
        assert_eq!(a.objects[0].bbox.corners(), [0.0, 1.0, 3.0, 4.0]);
    }

    #[test]
    fn diagonal_turn_maps_box_corners() {
        let img = ramp(20, 20);
        let b = BBox::new(9.0, 9.0, 11.0, 11.0).unwrap();
        let ann = blank(20, 20, vec![LabeledBox::new(b, ClassId::HEALTHY)]);
        let (_, a) = extract_patch(&img, &ann, (10.0, 10.0), 8, Rotation::Deg45).unwrap();
        let r = std::f64::consts::SQRT_2;
        let got = a.objects[0].bbox.corners();
        let want = [4.0 - r, 4.0 - r, 4.0 + r, 4.0 + r];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-12, "{got:?}");
        }
    }

    #[test]
    fn rejects_windows_outside_the_image() {
        let img = ramp(10, 10);
        let ann = blank(10, 10, vec![]);
        assert!(extract_patch(&img, &ann, (5.0, 5.0), 10, Rotation::Deg0).is_ok());
        assert!(extract_patch(&img, &ann, (5.0, 5.0), 10, Rotation::Deg45).is_err());
        assert!(extract_patch(&img, &ann, (5.0, 5.0), 7, Rotation::Deg135).is_ok());
        assert!(extract_patch(&img, &ann, (2.0, 5.0), 6, Rotation::Deg0).is_err());
    }

    #[test]
    fn drops_mostly_outside_boxes() {
        let img = ramp(20, 20);
        let keep = BBox::new(4.0, 4.0, 8.0, 8.0).unwrap();
        let drop = BBox::new(0.0, 0.0, 10.0, 5.5).unwrap();
        let ann = blank(20, 20, vec![LabeledBox::new(keep, ClassId(0)), LabeledBox::new(drop, ClassId(1))]);
        let (_, a) = extract_patch(&img, &ann, (10.0, 10.0), 10, Rotation::Deg0).unwrap();
        assert_eq!(a.objects.len(), 1);
        assert_eq!(a.objects[0].bbox.corners(), [0.0, 0.0, 3.0, 3.0]);
        assert!(Rotation::from_degrees(30).is_err());
    }
}
