//! Annotation files, portable pixmap images, multispectral band
//! composition, rotated patch extraction, dataset manifests and the
//! detections interchange table.

mod annotation;
mod bands;
mod detections;
mod image;
mod manifest;
mod patch;

pub use annotation::{parse_annotation, write_annotation, Annotation};
pub use bands::{compose_bands, Band, BandSelection};
pub use detections::{read_detections, write_detections, Detection, DETECTIONS_HEADER};
pub use image::{decode_pnm, decode_pnm_with_depth, encode_pnm, read_image, write_image, BitDepth, ImageBuffer};
pub use manifest::{
    load_manifest, parse_manifest, render_manifest, save_manifest, scan_dataset, DatasetManifest, ManifestPair, ScanReport,
    IMAGE_EXTENSIONS,
};
pub use patch::{extract_patch, Rotation, MIN_RETAINED_AREA};

use crate::error::{Error, Result};
use crate::geometry::ClassId;

/// Mapping between class names in label files and class ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMap {
    entries: Vec<(String, ClassId)>,
}

impl Default for ClassMap {
    fn default() -> Self {
        Self {
            entries: vec![
                ("healthy".to_string(), ClassId::HEALTHY),
                ("stressed".to_string(), ClassId::STRESSED),
            ],
        }
    }
}

impl ClassMap {
    /// Names and ids must both be unique, and the ids must be `0..n`.
    pub fn new(mut entries: Vec<(String, ClassId)>) -> Result<Self> {
        entries.sort_by_key(|(_, id)| *id);
        for (i, (name, id)) in entries.iter().enumerate() {
            if id.index() != i {
                return Err(Error::Config(format!(
                    "class ids must be 0..{} without gaps; found {id} for {name:?}",
                    entries.len()
                )));
            }
            if name.is_empty() || entries[..i].iter().any(|(n, _)| n == name) {
                return Err(Error::Config(format!("empty or duplicate class name {name:?}")));
            }
        }
        if entries.is_empty() {
            return Err(Error::Config("no classes".into()));
        }
        Ok(Self { entries })
    }

    /// Parses `name:id,name:id`.
    pub fn parse(spec: &str) -> Result<Self> {
        let entries = spec
            .split(',')
            .map(|pair| {
                let (name, id) = pair
                    .split_once(':')
                    .ok_or_else(|| Error::Config(format!("class entry {pair:?} is not name:id")))?;
                let id = id
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("class id {id:?} is not an integer")))?;
                Ok((name.trim().to_string(), ClassId(id)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    pub fn id(&self, name: &str) -> Option<ClassId> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, id)| *id)
    }

    pub fn name(&self, id: ClassId) -> Option<&str> {
        self.entries.get(id.index()).map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Names ordered by id.
    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn to_spec(&self) -> String {
        self.entries
            .iter()
            .map(|(n, id)| format!("{n}:{id}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}
