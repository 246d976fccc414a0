//! Box arithmetic, anchor pyramids, box/delta coding, training-target
//! assignment and non-maximum suppression.
//!
//! All coordinates are continuous pixel coordinates with the origin at the
//! top-left corner, x growing rightward and y growing downward.

mod anchors;
mod assign;
mod bbox;
mod coding;
mod nms;

pub use anchors::{generate_anchors, AnchorConfig, AnchorSet, LevelAnchors};
pub use assign::{assign_targets, AnchorAssignment, AnchorLabel, AssignConfig};
pub use bbox::{box_iou, BBox, ClassId, Extent, LabeledBox};
pub use coding::{decode_box, decode_unclipped, encode_box, DecodedBox, RegressionDeltas};
pub use nms::{nms, nms_with, NmsConfig};
