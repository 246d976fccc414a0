//! The detector's forward graph.
//!
//! Every stage is written once against [`FeatureMap`], which is implemented
//! both by [`Tensor`] (numeric evaluation) and by [`Shape`] (shape
//! propagation only). Running the graph on shapes exercises exactly the same
//! layer wiring and merge checks as a numeric pass, at no arithmetic cost.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::{conv2d, Conv2d, Shape, Tensor};

/// Channel count of every pyramid level and head layer.
pub const PYRAMID_CHANNELS: usize = 256;

/// Operations the graph needs from a feature map.
pub trait FeatureMap: Sized + Clone {
    fn shape(&self) -> Shape;
    fn conv(&self, layer: &Conv2d) -> Result<Self>;
    fn relu(self) -> Self;
    fn upsample_2x(&self) -> Self;
    fn crop(&self, height: usize, width: usize) -> Result<Self>;
    /// Element-wise sum; `at` names the merge point for error reporting.
    fn add(&self, other: &Self, at: &str) -> Result<Self>;
}

impl FeatureMap for Tensor {
    fn shape(&self) -> Shape {
        Tensor::shape(self)
    }

    fn conv(&self, layer: &Conv2d) -> Result<Self> {
        conv2d(self, layer)
    }

    fn relu(self) -> Self {
        Tensor::relu(self)
    }

    fn upsample_2x(&self) -> Self {
        self.upsample_nearest_2x()
    }

    fn crop(&self, height: usize, width: usize) -> Result<Self> {
        Tensor::crop(self, height, width)
    }

    fn add(&self, other: &Self, at: &str) -> Result<Self> {
        check_same(self.shape(), other.shape(), at)?;
        Tensor::add(self, other)
    }
}

impl FeatureMap for Shape {
    fn shape(&self) -> Shape {
        *self
    }

    fn conv(&self, layer: &Conv2d) -> Result<Self> {
        layer.output_shape(*self)
    }

    fn relu(self) -> Self {
        self
    }

    fn upsample_2x(&self) -> Self {
        Shape::new(2 * self.height, 2 * self.width, self.channels)
    }

    fn crop(&self, height: usize, width: usize) -> Result<Self> {
        if height > self.height || width > self.width {
            return Err(Error::shape("crop", format!("cannot crop {self} to {height}x{width}")));
        }
        Ok(Shape::new(height, width, self.channels))
    }

    fn add(&self, other: &Self, at: &str) -> Result<Self> {
        check_same(*self, *other, at)?;
        Ok(*self)
    }
}

fn check_same(a: Shape, b: Shape, at: &str) -> Result<()> {
    if a != b {
        return Err(Error::shape(at, format!("top-down {a} vs lateral {b}")));
    }
    Ok(())
}

/// Receives `(layer name, output shape)` for every layer evaluated.
pub type Trace<'a> = &'a mut dyn FnMut(&str, Shape);

/// Backbone stage outputs at strides 4, 8, 16 and 32.
#[derive(Debug, Clone, PartialEq)]
pub struct BackboneFeatures<F> {
    pub c2: F,
    pub c3: F,
    pub c4: F,
    pub c5: F,
}

impl<F: FeatureMap> BackboneFeatures<F> {
    pub fn levels(&self) -> [&F; 4] {
        [&self.c2, &self.c3, &self.c4, &self.c5]
    }
}

/// A feature extractor producing C2..C5.
pub trait Backbone {
    /// Channel counts of C2..C5.
    fn out_channels(&self) -> [usize; 4];
    fn forward<F: FeatureMap>(&self, image: &F, trace: Trace<'_>) -> Result<BackboneFeatures<F>>;
    fn layers(&self) -> Vec<&Conv2d>;
    fn layers_mut(&mut self) -> Vec<&mut Conv2d>;
}

/// Small strided CNN standing in for a pretrained encoder: a stride-2 stem
/// followed by one stride-2 3x3 convolution per stage, ReLU after each.
#[derive(Debug, Clone, PartialEq)]
pub struct StubBackbone {
    stem: Conv2d,
    stages: [Conv2d; 4],
}

pub const DEFAULT_CHANNEL_PLAN: [usize; 4] = [64, 128, 256, 512];

impl StubBackbone {
    pub fn new(in_channels: usize, plan: [usize; 4], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stem = Conv2d::random("backbone.stem", 3, 2, in_channels, plan[0], 0.0, &mut rng)?;
        let mut prev = plan[0];
        let mut stages = Vec::with_capacity(4);
        for (i, &ch) in plan.iter().enumerate() {
            stages.push(Conv2d::random(
                format!("backbone.c{}", i + 2),
                3,
                2,
                prev,
                ch,
                0.0,
                &mut rng,
            )?);
            prev = ch;
        }
        Ok(Self {
            stem,
            stages: stages.try_into().expect("four stages"),
        })
    }
}

impl Backbone for StubBackbone {
    fn out_channels(&self) -> [usize; 4] {
        [0, 1, 2, 3].map(|i| self.stages[i].out_channels)
    }

    fn forward<F: FeatureMap>(&self, image: &F, trace: Trace<'_>) -> Result<BackboneFeatures<F>> {
        let s = image.shape();
        if s.height == 0 || s.width == 0 || !s.height.is_multiple_of(32) || !s.width.is_multiple_of(32) {
            return Err(Error::InvalidInput(format!(
                "input {}x{} is not a multiple of 32",
                s.height, s.width
            )));
        }
        let mut x = image.conv(&self.stem)?.relu();
        trace(&self.stem.name, x.shape());
        let mut outs = Vec::with_capacity(4);
        for stage in &self.stages {
            x = x.conv(stage)?.relu();
            trace(&stage.name, x.shape());
            outs.push(x.clone());
        }
        let [c2, c3, c4, c5]: [F; 4] = outs.try_into().ok().expect("four stages");
        Ok(BackboneFeatures { c2, c3, c4, c5 })
    }

    fn layers(&self) -> Vec<&Conv2d> {
        std::iter::once(&self.stem).chain(&self.stages).collect()
    }

    fn layers_mut(&mut self) -> Vec<&mut Conv2d> {
        std::iter::once(&mut self.stem).chain(&mut self.stages).collect()
    }
}

/// Pyramid levels P2..P6, all with [`PYRAMID_CHANNELS`] channels.
#[derive(Debug, Clone, PartialEq)]
pub struct PyramidFeatures<F> {
    pub p2: F,
    pub p3: F,
    pub p4: F,
    pub p5: F,
    pub p6: F,
}

impl<F> PyramidFeatures<F> {
    pub fn levels(&self) -> [&F; 5] {
        [&self.p2, &self.p3, &self.p4, &self.p5, &self.p6]
    }
}

/// Deliberate wiring faults, for exercising the shape checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Build the lateral convolution of backbone stage `C{level}` (2..=5)
    /// with half the pyramid channel count.
    LateralChannels { level: usize },
}

/// Top-down decoder over C2..C5.
///
/// ```text
/// P6 = conv3x3/2(C5)
/// P5 = conv3x3(up(P6) + lateral(C5))
/// P4 = conv3x3(up(P5) + lateral(C4))
/// P3 = conv3x3(up(P4) + lateral(C3))
/// P2 = conv3x3(up(P3) + lateral(C2))
/// ```
///
/// Laterals are 1x1 convolutions to 256 channels. Where a level has odd
/// size, the upsampled map is one row or column larger than the lateral map
/// and is cropped to it.
#[derive(Debug, Clone, PartialEq)]
pub struct Pyramid {
    p6: Conv2d,
    /// Indexed by backbone stage: lateral[0] reads C2.
    lateral: [Conv2d; 4],
    /// merge[0] produces P2.
    merge: [Conv2d; 4],
}

impl Pyramid {
    pub fn new(backbone_channels: [usize; 4], seed: u64) -> Result<Self> {
        Self::with_fault(backbone_channels, seed, None)
    }

    pub fn with_fault(backbone_channels: [usize; 4], seed: u64, fault: Option<Fault>) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = PYRAMID_CHANNELS;
        let p6 = Conv2d::random("pyramid.p6", 3, 2, backbone_channels[3], c, 0.0, &mut rng)?;
        let mut lateral = Vec::with_capacity(4);
        let mut merge = Vec::with_capacity(4);
        for (i, &cin) in backbone_channels.iter().enumerate() {
            let level = i + 2;
            let out = match fault {
                Some(Fault::LateralChannels { level: l }) if l == level => c / 2,
                _ => c,
            };
            lateral.push(Conv2d::random(
                format!("pyramid.lateral_c{level}"),
                1,
                1,
                cin,
                out,
                0.0,
                &mut rng,
            )?);
            merge.push(Conv2d::random(
                format!("pyramid.merge_p{level}"),
                3,
                1,
                c,
                c,
                0.0,
                &mut rng,
            )?);
        }
        Ok(Self {
            p6,
            lateral: lateral.try_into().expect("four laterals"),
            merge: merge.try_into().expect("four merges"),
        })
    }

    pub fn forward<F: FeatureMap>(
        &self,
        f: &BackboneFeatures<F>,
        trace: Trace<'_>,
    ) -> Result<PyramidFeatures<F>> {
        let p6 = f.c5.conv(&self.p6)?.relu();
        trace(&self.p6.name, p6.shape());

        let stages = f.levels();
        let mut above = p6.clone();
        let mut outs: Vec<F> = Vec::with_capacity(4);
        for i in (0..4).rev() {
            let level = i + 2;
            let lat = stages[i].conv(&self.lateral[i])?.relu();
            trace(&self.lateral[i].name, lat.shape());

            let up = above.upsample_2x();
            let (lh, lw) = (lat.shape().height, lat.shape().width);
            let (uh, uw) = (up.shape().height, up.shape().width);
            let at = format!("pyramid.merge_p{level}");
            if uh < lh || uw < lw || uh - lh > 1 || uw - lw > 1 {
                return Err(Error::shape(
                    at,
                    format!("upsampled P{} is {}, lateral is {}", level + 1, up.shape(), lat.shape()),
                ));
            }
            let up = up.crop(lh, lw)?;
            trace(&format!("pyramid.upsample_p{}", level + 1), up.shape());

            let sum = up.add(&lat, &at)?;
            trace(&format!("pyramid.add_p{level}"), sum.shape());
            let p = sum.conv(&self.merge[i])?.relu();
            trace(&self.merge[i].name, p.shape());
            above = p.clone();
            outs.push(p);
        }
        let mut it = outs.into_iter().rev();
        let mut next = || it.next().expect("four merged levels");
        Ok(PyramidFeatures {
            p2: next(),
            p3: next(),
            p4: next(),
            p5: next(),
            p6,
        })
    }

    pub fn layers(&self) -> Vec<&Conv2d> {
        let mut v = vec![&self.p6];
        for i in (0..4).rev() {
            v.push(&self.lateral[i]);
            v.push(&self.merge[i]);
        }
        v
    }

    pub fn layers_mut(&mut self) -> Vec<&mut Conv2d> {
        let mut v = vec![&mut self.p6];
        for (l, m) in self.lateral.iter_mut().zip(self.merge.iter_mut()).rev() {
            v.push(l);
            v.push(m);
        }
        v
    }
}

/// Head configuration: anchors per cell, classes, and hidden depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeadConfig {
    pub anchors_per_cell: usize,
    pub num_classes: usize,
    pub depth: usize,
}

impl Default for HeadConfig {
    fn default() -> Self {
        Self {
            anchors_per_cell: 3,
            num_classes: 2,
            depth: 4,
        }
    }
}

/// Prior foreground probability encoded in the classification output bias.
pub const CLASS_PRIOR: f64 = 0.01;

/// Classification and box-regression subnets, shared across levels.
#[derive(Debug, Clone, PartialEq)]
pub struct Heads {
    pub config: HeadConfig,
    cls: Vec<Conv2d>,
    reg: Vec<Conv2d>,
}

/// Per-level head outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelOutputs<F> {
    /// H x W x (A * K) logits.
    pub logits: F,
    /// H x W x (A * 4) deltas.
    pub deltas: F,
}

impl Heads {
    pub fn new(config: HeadConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = PYRAMID_CHANNELS;
        let prior_bias = -((1.0 - CLASS_PRIOR) / CLASS_PRIOR).ln();
        let mut subnet = |prefix: &str, out: usize, bias: f64| -> Result<Vec<Conv2d>> {
            let mut layers = (0..config.depth)
                .map(|i| Conv2d::random(format!("{prefix}.{i}"), 3, 1, c, c, 0.0, &mut rng))
                .collect::<Result<Vec<_>>>()?;
            layers.push(Conv2d::random(format!("{prefix}.out"), 3, 1, c, out, bias, &mut rng)?);
            Ok(layers)
        };
        let cls = subnet("head.cls", config.anchors_per_cell * config.num_classes, prior_bias)?;
        let reg = subnet("head.box", config.anchors_per_cell * 4, 0.0)?;
        Ok(Self { config, cls, reg })
    }

    pub fn forward<F: FeatureMap>(
        &self,
        p: &PyramidFeatures<F>,
        trace: Trace<'_>,
    ) -> Result<Vec<LevelOutputs<F>>> {
        let mut outs = Vec::with_capacity(5);
        for (i, level) in p.levels().into_iter().enumerate() {
            let logits = run_subnet(&self.cls, level, i + 2, trace)?;
            let deltas = run_subnet(&self.reg, level, i + 2, trace)?;
            outs.push(LevelOutputs { logits, deltas });
        }
        Ok(outs)
    }

    pub fn layers(&self) -> Vec<&Conv2d> {
        self.cls.iter().chain(&self.reg).collect()
    }

    pub fn layers_mut(&mut self) -> Vec<&mut Conv2d> {
        self.cls.iter_mut().chain(self.reg.iter_mut()).collect()
    }
}

fn run_subnet<F: FeatureMap>(layers: &[Conv2d], x: &F, level: usize, trace: Trace<'_>) -> Result<F> {
    let (last, hidden) = layers.split_last().expect("output layer");
    let mut h = x.clone();
    for l in hidden {
        h = h.conv(l)?.relu();
    }
    let out = h.conv(last)?;
    trace(&format!("{}@p{level}", last.name), out.shape());
    Ok(out)
}
