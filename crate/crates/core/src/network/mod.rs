//! Dense tensor core and the detector's forward graph: a stub backbone
//! producing C2..C5, the P2..P6 feature pyramid, and shared classification
//! and box-regression heads.

mod conv;
mod detect;
mod graph;
mod model;
mod tensor;
pub mod weights;

pub use conv::{conv2d, Conv2d};
pub use detect::{postprocess, sigmoid, DetectConfig, Detector};
pub use graph::{
    Backbone, BackboneFeatures, Fault, FeatureMap, HeadConfig, Heads, LevelOutputs, Pyramid,
    PyramidFeatures, StubBackbone, Trace, CLASS_PRIOR, DEFAULT_CHANNEL_PLAN, PYRAMID_CHANNELS,
};
pub use model::{raw_detection_count, ForwardOutputs, Model, ModelConfig, RawDetections, ShapeTrace};
pub use tensor::{Shape, Tensor};
