use std::fmt::Write as _;
use std::path::Path;

use stressdet::geometry::generate_anchors;
use stressdet::network::{
    raw_detection_count, Detector, Fault, FeatureMap, Model, ModelConfig, Shape, Tensor, PYRAMID_CHANNELS,
};
use stressdet::Error;

use super::write_bytes;
use crate::settings::Settings;

pub fn anchors(s: &Settings, dump: Option<&Path>) -> anyhow::Result<()> {
    let cfg = s.anchor_config();
    let set = generate_anchors(&cfg)?;
    println!("level\tstride\tsize\tgrid\tanchors");
    for (i, level) in set.levels.iter().enumerate() {
        println!(
            "P{}\t{}\t{}\t{}x{}\t{}",
            i + 2,
            level.stride,
            level.size,
            level.grid.0,
            level.grid.1,
            level.boxes.len()
        );
    }
    println!("total\t-\t-\t-\t{}", set.len());
    if let Some(path) = dump {
        let mut t = String::from("index\tlevel\txmin\tymin\txmax\tymax\n");
        let mut index = 0;
        for (i, level) in set.levels.iter().enumerate() {
            for b in &level.boxes {
                let [x0, y0, x1, y1] = b.corners();
                writeln!(t, "{index}\tP{}\t{x0}\t{y0}\t{x1}\t{y1}", i + 2).unwrap();
                index += 1;
            }
        }
        write_bytes(path, t.as_bytes())?;
    }
    Ok(())
}

/// Spatial size after `n` stride-2 same-padded convolutions.
fn halved(mut v: usize, n: usize) -> usize {
    for _ in 0..n {
        v = v.div_ceil(2);
    }
    v
}

/// Deterministic test card in `[0, 1]`.
fn test_image(shape: Shape) -> Tensor {
    let mut t = Tensor::zeros(shape);
    for r in 0..shape.height {
        for c in 0..shape.width {
            for ch in 0..shape.channels {
                t.set(r, c, ch, ((r * 31 + c * 17 + ch * 7) % 256) as f64 / 255.0);
            }
        }
    }
    t
}

pub fn forward_check(s: &Settings, fault_lateral: Option<usize>, compute: bool) -> anyhow::Result<()> {
    let cfg = ModelConfig {
        seed: s.seed,
        fault: fault_lateral.map(|level| Fault::LateralChannels { level }),
        ..ModelConfig::default()
    };
    let model = Model::new(&cfg)?;
    let (h, w) = (s.input_size.0 as usize, s.input_size.1 as usize);
    let input = Shape::new(h, w, cfg.in_channels);
    println!("layer\tshape");
    println!("input\t{input}");
    let mut merge_p2 = None;
    let out = model.run(&input, &mut |name, shape| {
        if name == "pyramid.add_p2" {
            merge_p2 = Some(shape);
        }
        println!("{name}\t{shape}");
    })?;

    let check = |name: &str, got: Shape, want: Shape| -> Result<(), Error> {
        if got != want {
            return Err(Error::Shape {
                layer: name.to_string(),
                detail: format!("{got}, expected {want}"),
            });
        }
        println!("check\t{name}\t{got}\tok");
        Ok(())
    };
    for (i, level) in out.pyramid.levels().iter().enumerate() {
        let want = Shape::new(halved(h, i + 2), halved(w, i + 2), PYRAMID_CHANNELS);
        check(&format!("pyramid.p{}", i + 2), level.shape(), want)?;
    }
    let merge = merge_p2.ok_or_else(|| Error::Shape {
        layer: "pyramid.add_p2".into(),
        detail: "layer never ran".into(),
    })?;
    check("pyramid.add_p2", merge, Shape::new(halved(h, 2), halved(w, 2), PYRAMID_CHANNELS))?;

    let raw = raw_detection_count(&out.heads, cfg.heads.anchors_per_cell);
    let anchors = generate_anchors(&s.anchor_config())?.len();
    if raw != anchors {
        return Err(Error::Shape {
            layer: "heads".into(),
            detail: format!("{raw} raw detections for {anchors} anchors"),
        }
        .into());
    }
    println!("raw_detections\t{raw}");
    println!("parameters\t{}", model.parameter_count());

    if compute {
        let detector = Detector::with_model(model, s.detect_config())?;
        let image = test_image(detector.input_shape());
        let raw = detector.model.forward(&image)?;
        let max_logit = raw.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        println!("max_logit\t{max_logit:.9}");
        let dets = detector.postprocess(&raw)?;
        println!("detections\t{}", dets.len());
    }
    Ok(())
}
