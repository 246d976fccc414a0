//! Building blocks of a crop-stress detector for aerial imagery.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod losses;
pub mod metrics;
pub mod network;
pub mod dataio;
pub mod augment;

pub use error::{Error, ErrorClass, Result};
