use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use stressdet::dataio::{
    encode_pnm, load_manifest, parse_annotation, read_detections, read_image, scan_dataset, write_detections,
    Annotation, BitDepth, ClassMap, DatasetManifest, Detection, ImageBuffer,
};
use stressdet::geometry::{nms_with, BBox, ClassId, LabeledBox, NmsConfig};
use stressdet::metrics::{aggregate, compute_metrics, pixel_confusion, Averaging, PixelGrid};
use stressdet::Error;

use super::{emit, read_text, write_bytes};
use crate::settings::Settings;

fn load_detections(path: &Path, classes: &ClassMap) -> Result<Vec<Detection>, Error> {
    read_detections(&read_text(path)?, classes, &path.display().to_string())
}

/// Groups by image id in order of first appearance.
fn group(dets: Vec<Detection>) -> Vec<(String, Vec<LabeledBox>)> {
    let mut out: Vec<(String, Vec<LabeledBox>)> = Vec::new();
    for d in dets {
        match out.iter_mut().find(|(id, _)| *id == d.image_id) {
            Some((_, v)) => v.push(d.det),
            None => out.push((d.image_id, vec![d.det])),
        }
    }
    out
}

pub fn postprocess(s: &Settings, input: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let dets = load_detections(input, &s.classes)?;
    let cfg = NmsConfig {
        iou_threshold: s.nms_iou,
        ..NmsConfig::default()
    };
    let mut kept = Vec::new();
    for (id, boxes) in group(dets) {
        let candidates: Vec<LabeledBox> = boxes
            .into_iter()
            .filter(|b| b.score().unwrap_or(0.0) >= s.score_threshold)
            .collect();
        kept.extend(nms_with(&candidates, cfg).into_iter().map(|det| Detection {
            image_id: id.clone(),
            det,
        }));
    }
    emit(out, &write_detections(&kept, &s.classes)?)?;
    Ok(())
}

/// Ground truth keyed by image file stem.
fn load_ground_truth(path: &Path, s: &Settings) -> Result<(ClassMap, BTreeMap<String, Annotation>), Error> {
    let manifest: DatasetManifest = if path.is_dir() {
        scan_dataset(path, "test", s.classes.clone())?.manifest
    } else {
        load_manifest(path)?
    };
    let mut out = BTreeMap::new();
    for pair in &manifest.pairs {
        let id = pair
            .image
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let context = pair.annotation.display().to_string();
        let ann = parse_annotation(&read_text(&pair.annotation)?, &manifest.classes, &context)?;
        if out.insert(id.clone(), ann).is_some() {
            return Err(Error::InvalidInput(format!("image id {id:?} appears twice in the ground truth")));
        }
    }
    Ok((manifest.classes, out))
}

pub fn eval(
    s: &Settings,
    ground_truth: &Path,
    detections: &Path,
    per_image: bool,
    image_average: bool,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let (classes, gt) = load_ground_truth(ground_truth, s)?;
    let dets = load_detections(detections, &classes)?;
    let mut unknown: Vec<&str> = dets
        .iter()
        .map(|d| d.image_id.as_str())
        .filter(|id| !gt.contains_key(*id))
        .collect();
    unknown.sort_unstable();
    unknown.dedup();
    if !unknown.is_empty() {
        return Err(Error::InvalidInput(format!(
            "detections reference images missing from the ground truth: {}",
            unknown.join(", ")
        ))
        .into());
    }
    let mut preds: BTreeMap<&str, Vec<LabeledBox>> = BTreeMap::new();
    for d in &dets {
        preds.entry(d.image_id.as_str()).or_default().push(d.det);
    }

    let names = classes.names();
    let mut counts = Vec::with_capacity(gt.len());
    for (id, ann) in &gt {
        let grid = PixelGrid::new(ann.height as usize, ann.width as usize)?;
        let p = preds.get(id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        counts.push(pixel_confusion(&ann.objects, p, grid, names.len())?);
    }
    let averaging = if image_average { Averaging::PerImage } else { Averaging::Pooled };
    let report = aggregate(&counts, &names, averaging)?;
    let mut text = report.to_text();
    if per_image {
        text.push_str("# per-image\nimage\tclass\ttp\tfp\tfn\tdsc\tiou\tprecision\trecall\n");
        for ((id, _), image_counts) in gt.iter().zip(&counts) {
            for (name, c) in names.iter().zip(image_counts) {
                let m = compute_metrics(*c);
                writeln!(
                    text,
                    "{id}\t{name}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
                    c.tp, c.fp, c.fn_, m.dsc, m.iou, m.precision, m.recall
                )
                .unwrap();
            }
        }
    }
    emit(out, &text)?;
    Ok(())
}

const HEALTHY_RGB: [f64; 3] = [0.0, 0.0, 1.0];
const STRESSED_RGB: [f64; 3] = [1.0, 1.0, 0.0];
const EDGE: i64 = 2;

fn to_rgb(img: &ImageBuffer) -> Result<ImageBuffer, Error> {
    match img.channels() {
        3 => Ok(img.clone()),
        1 => {
            let data = img.data().iter().flat_map(|&v| [v, v, v]).collect();
            ImageBuffer::new(img.width(), img.height(), 3, data)
        }
        c => Err(Error::InvalidInput(format!("cannot overlay on a {c}-channel image"))),
    }
}

/// Paints the `EDGE`-pixel inner border of the pixels `b` covers. Pixels
/// outside the image are skipped.
fn draw_box(img: &mut ImageBuffer, b: &BBox, rgb: [f64; 3]) {
    let (x0, x1) = (b.xmin().floor() as i64, b.xmax().floor() as i64);
    let (y0, y1) = (b.ymin().floor() as i64, b.ymax().floor() as i64);
    let (w, h) = (img.width() as i64, img.height() as i64);
    for r in y0.max(0)..y1.min(h) {
        for c in x0.max(0)..x1.min(w) {
            let edge = r < y0 + EDGE || r >= y1 - EDGE || c < x0 + EDGE || c >= x1 - EDGE;
            if edge {
                for (ch, &v) in rgb.iter().enumerate() {
                    img.set(r as usize, c as usize, ch, v);
                }
            }
        }
    }
}

fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("scores.tsv")
}

pub fn overlay(s: &Settings, image: &Path, detections: &Path, out: &Path, image_id: Option<&str>) -> anyhow::Result<()> {
    let id = match image_id {
        Some(id) => id.to_string(),
        None => image
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    let mut canvas = to_rgb(&read_image(image)?)?;
    let dets: Vec<Detection> = load_detections(detections, &s.classes)?
        .into_iter()
        .filter(|d| d.image_id == id)
        .collect();
    for d in &dets {
        let rgb = match d.det.class {
            ClassId::HEALTHY => HEALTHY_RGB,
            ClassId::STRESSED => STRESSED_RGB,
            other => {
                return Err(Error::InvalidInput(format!("no overlay colour for class {other}")).into());
            }
        };
        draw_box(&mut canvas, &d.det.bbox, rgb);
    }
    write_bytes(out, &encode_pnm(&canvas, BitDepth::Eight)?)?;
    let side = sidecar_path(out);
    write_bytes(&side, write_detections(&dets, &s.classes)?.as_bytes())?;
    println!("drawn\t{}\t{id}", dets.len());
    println!("sidecar\t{}", side.display());
    Ok(())
}
