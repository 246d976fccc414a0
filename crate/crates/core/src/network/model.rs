use crate::error::{Error, Result};

use super::graph::{
    Backbone, BackboneFeatures, Fault, FeatureMap, HeadConfig, Heads, LevelOutputs, Pyramid,
    PyramidFeatures, StubBackbone, DEFAULT_CHANNEL_PLAN, PYRAMID_CHANNELS,
};
use super::{Conv2d, Shape, Tensor};

/// Layer names and output shapes in evaluation order.
pub type ShapeTrace = Vec<(String, Shape)>;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub in_channels: usize,
    pub channel_plan: [usize; 4],
    pub heads: HeadConfig,
    pub seed: u64,
    pub fault: Option<Fault>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            in_channels: 3,
            channel_plan: DEFAULT_CHANNEL_PLAN,
            heads: HeadConfig::default(),
            seed: 0,
            fault: None,
        }
    }
}

/// Head outputs flattened over levels P2..P6, then rows, columns and
/// anchors. Entry `i` lines up with anchor `i` of
/// [`generate_anchors`](crate::geometry::generate_anchors).
#[derive(Debug, Clone, PartialEq)]
pub struct RawDetections {
    pub num_classes: usize,
    /// `num_anchors * num_classes` logits.
    pub logits: Vec<f64>,
    /// `num_anchors * 4` deltas in (tx, ty, tw, th) order.
    pub deltas: Vec<f64>,
}

impl RawDetections {
    pub fn num_anchors(&self) -> usize {
        self.deltas.len() / 4
    }

    pub fn from_levels(levels: &[LevelOutputs<Tensor>], num_classes: usize) -> Self {
        let mut logits = Vec::new();
        let mut deltas = Vec::new();
        for l in levels {
            logits.extend_from_slice(l.logits.data());
            deltas.extend_from_slice(l.deltas.data());
        }
        Self {
            num_classes,
            logits,
            deltas,
        }
    }
}

/// Backbone, pyramid and heads with immutable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<B = StubBackbone> {
    pub backbone: B,
    pub pyramid: Pyramid,
    pub heads: Heads,
}

/// Every intermediate result of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardOutputs<F> {
    pub backbone: BackboneFeatures<F>,
    pub pyramid: PyramidFeatures<F>,
    pub heads: Vec<LevelOutputs<F>>,
}

impl Model<StubBackbone> {
    /// Builds the stub backbone, pyramid and heads with weights drawn from
    /// seeds derived from `cfg.seed`.
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        let backbone = StubBackbone::new(cfg.in_channels, cfg.channel_plan, cfg.seed)?;
        Self::with_backbone(backbone, cfg)
    }
}

impl<B: Backbone> Model<B> {
    pub fn with_backbone(backbone: B, cfg: &ModelConfig) -> Result<Self> {
        let pyramid = Pyramid::with_fault(
            backbone.out_channels(),
            cfg.seed.wrapping_add(1),
            cfg.fault,
        )?;
        let heads = Heads::new(cfg.heads, cfg.seed.wrapping_add(2))?;
        Ok(Self {
            backbone,
            pyramid,
            heads,
        })
    }

    pub fn run<F: FeatureMap>(
        &self,
        image: &F,
        trace: &mut dyn FnMut(&str, Shape),
    ) -> Result<ForwardOutputs<F>> {
        let backbone = self.backbone.forward(image, trace)?;
        let pyramid = self.pyramid.forward(&backbone, trace)?;
        for (i, level) in pyramid.levels().iter().enumerate() {
            if level.shape().channels != PYRAMID_CHANNELS {
                return Err(Error::shape(
                    format!("pyramid.p{}", i + 2),
                    format!("{} channels, expected {PYRAMID_CHANNELS}", level.shape().channels),
                ));
            }
        }
        let heads = self.heads.forward(&pyramid, trace)?;
        Ok(ForwardOutputs {
            backbone,
            pyramid,
            heads,
        })
    }

    /// Numeric forward pass to raw per-anchor outputs.
    pub fn forward(&self, image: &Tensor) -> Result<RawDetections> {
        let out = self.run(image, &mut |_, _| {})?;
        Ok(RawDetections::from_levels(&out.heads, self.heads.config.num_classes))
    }

    /// Shape propagation through the whole graph, returning every layer's
    /// output shape in evaluation order.
    pub fn trace_shapes(&self, input: Shape) -> Result<(ShapeTrace, ForwardOutputs<Shape>)> {
        let mut log = Vec::new();
        let out = self.run(&input, &mut |name, s| log.push((name.to_string(), s)))?;
        Ok((log, out))
    }

    /// All layers in a fixed order: backbone, pyramid, heads.
    pub fn layers(&self) -> Vec<&Conv2d> {
        let mut v = self.backbone.layers();
        v.extend(self.pyramid.layers());
        v.extend(self.heads.layers());
        v
    }

    pub fn layers_mut(&mut self) -> Vec<&mut Conv2d> {
        let mut v = self.backbone.layers_mut();
        v.extend(self.pyramid.layers_mut());
        v.extend(self.heads.layers_mut());
        v
    }

    pub fn parameter_count(&self) -> usize {
        self.layers().iter().map(|l| l.parameter_count()).sum()
    }
}

/// Number of raw detections the heads emit for an input shape.
pub fn raw_detection_count(levels: &[LevelOutputs<Shape>], anchors_per_cell: usize) -> usize {
    levels
        .iter()
        .map(|l| l.deltas.height * l.deltas.width * anchors_per_cell)
        .sum()
}
