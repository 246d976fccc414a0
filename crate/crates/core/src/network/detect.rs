use crate::error::{Error, Result};
use crate::geometry::{
    decode_box, generate_anchors, nms_with, AnchorConfig, AnchorSet, BBox, ClassId, Extent,
    LabeledBox, NmsConfig, RegressionDeltas,
};

use super::model::{Model, ModelConfig, RawDetections};
use super::{graph::Backbone, Shape, Tensor};

/// Inference post-processing thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectConfig {
    pub anchors: AnchorConfig,
    /// Candidates scoring below this are dropped before NMS.
    pub score_threshold: f64,
    pub nms: NmsConfig,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            anchors: AnchorConfig::default(),
            score_threshold: 0.7,
            nms: NmsConfig::default(),
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Turns raw head outputs into final detections: sigmoid scores, score
/// threshold, decoding against `anchors`, then NMS.
///
/// Candidates whose decoded box falls entirely outside the image are
/// skipped.
pub fn postprocess(
    raw: &RawDetections,
    anchors: &AnchorSet,
    bounds: Extent,
    cfg: &DetectConfig,
) -> Result<Vec<LabeledBox>> {
    let n = anchors.len();
    if raw.num_anchors() != n || raw.logits.len() != n * raw.num_classes {
        return Err(Error::shape(
            "postprocess",
            format!(
                "{} logits / {} deltas for {n} anchors and {} classes",
                raw.logits.len(),
                raw.deltas.len(),
                raw.num_classes
            ),
        ));
    }
    let mut candidates = Vec::new();
    for (i, anchor) in anchors.iter().enumerate() {
        let logits = &raw.logits[i * raw.num_classes..(i + 1) * raw.num_classes];
        let mut decoded: Option<Option<BBox>> = None;
        for (k, &logit) in logits.iter().enumerate() {
            let score = sigmoid(logit);
            if score < cfg.score_threshold {
                continue;
            }
            let bbox = *decoded.get_or_insert_with(|| {
                let d = RegressionDeltas::from_slice(&raw.deltas[i * 4..i * 4 + 4]);
                decode_box(anchor, &d, bounds).ok().map(|d| d.bbox)
            });
            if let Some(bbox) = bbox {
                candidates.push(LabeledBox::scored(bbox, ClassId(k), score)?);
            }
        }
    }
    Ok(nms_with(&candidates, cfg.nms))
}

/// End-to-end inference: backbone, pyramid, heads, then [`postprocess`].
pub struct Detector<B = super::graph::StubBackbone> {
    pub model: Model<B>,
    pub config: DetectConfig,
    anchors: AnchorSet,
}

impl Detector {
    pub fn new(model_cfg: &ModelConfig, config: DetectConfig) -> Result<Self> {
        Self::with_model(Model::new(model_cfg)?, config)
    }
}

impl<B: Backbone> Detector<B> {
    pub fn with_model(model: Model<B>, config: DetectConfig) -> Result<Self> {
        let anchors = generate_anchors(&config.anchors)?;
        if anchors.levels.len() != 5 || config.anchors.anchors_per_cell() != model.heads.config.anchors_per_cell {
            return Err(Error::Config(
                "anchor layout does not match the five-level heads".into(),
            ));
        }
        Ok(Self {
            model,
            config,
            anchors,
        })
    }

    pub fn anchors(&self) -> &AnchorSet {
        &self.anchors
    }

    pub fn bounds(&self) -> Extent {
        let (h, w) = self.config.anchors.input_size;
        Extent::new(f64::from(w), f64::from(h))
    }

    pub fn detect(&self, image: &Tensor) -> Result<Vec<LabeledBox>> {
        let (h, w) = self.config.anchors.input_size;
        let s = image.shape();
        if (s.height, s.width) != (h as usize, w as usize) {
            return Err(Error::InvalidInput(format!(
                "image is {}x{}, detector expects {h}x{w}",
                s.height, s.width
            )));
        }
        let raw = self.model.forward(image)?;
        self.postprocess(&raw)
    }

    pub fn postprocess(&self, raw: &RawDetections) -> Result<Vec<LabeledBox>> {
        postprocess(raw, &self.anchors, self.bounds(), &self.config)
    }

    pub fn input_shape(&self) -> Shape {
        let (h, w) = self.config.anchors.input_size;
        Shape::new(h as usize, w as usize, 3)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::encode_box;

    fn small_detector(threshold: f64) -> Detector {
        Detector::new(
            &ModelConfig {
                seed: 5,
                ..ModelConfig::default()
            },
            DetectConfig {
                anchors: AnchorConfig::with_input_size(64, 64),
                score_threshold: threshold,
                ..DetectConfig::default()
            },
        )
        .unwrap()
    }

    fn test_image() -> Tensor {
        let s = Shape::new(64, 64, 3);
        Tensor::from_vec(s, (0..s.len()).map(|i| ((i * 7919) % 1000) as f64 / 999.0).collect()).unwrap()
    }

    #[test]
    fn random_weights_contract() {
        let det = small_detector(0.7);
        let out = det.detect(&test_image()).unwrap();
        for b in &out {
            assert!(b.score().unwrap() >= 0.7);
            assert!(b.bbox.is_within(det.bounds()));
        }
    }

    #[test]
    fn vacuous_threshold() {
        let det = small_detector(1.01);
        assert!(det.detect(&test_image()).unwrap().is_empty());
    }

    #[test]
    fn injected_logits_select_one_anchor() {
        let det = small_detector(0.7);
        let n = det.anchors().len();
        let mut raw = RawDetections {
            num_classes: 2,
            logits: vec![-20.0; 2 * n],
            deltas: vec![0.0; 4 * n],
        };
        let target = BBox::new(20.0, 12.0, 41.0, 30.0).unwrap();
        let i = 200;
        let anchor = det.anchors().to_vec()[i];
        raw.logits[i * 2 + ClassId::STRESSED.index()] = (0.99f64 / 0.01).ln();
        raw.deltas[i * 4..i * 4 + 4].copy_from_slice(&encode_box(&anchor, &target).to_array());
        let out = det.postprocess(&raw).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].class, ClassId::STRESSED);
        assert!((out[0].score().unwrap() - 0.99).abs() < 1e-12);
        for (a, b) in out[0].bbox.corners().iter().zip(target.corners()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn wrong_image_size() {
        let det = small_detector(0.7);
        let img = Tensor::zeros(Shape::new(32, 32, 3));
        assert!(det.detect(&img).is_err());
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
    }
}
