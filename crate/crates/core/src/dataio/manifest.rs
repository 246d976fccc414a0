//! Dataset manifests: which image goes with which annotation file.
//!
//! On disk a manifest is a text file of directives and tab-separated pairs:
//!
//! ```text
//! #split=train
//! #class=healthy:0
//! #class=stressed:1
//! images/a.ppm<TAB>labels/a.xml
//! ```
//!
//! Relative paths are resolved against the manifest's directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::ClassId;

use super::ClassMap;

/// File extensions recognised as images when scanning.
pub const IMAGE_EXTENSIONS: [&str; 3] = ["ppm", "pgm", "pnm"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestPair {
    pub image: PathBuf,
    pub annotation: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub split: String,
    pub classes: ClassMap,
    pub pairs: Vec<ManifestPair>,
}

/// A scanned dataset and the files that had no partner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanReport {
    pub manifest: DatasetManifest,
    pub unpaired: Vec<PathBuf>,
}

/// Pairs images with `.xml` files of the same stem in `dir` (not
/// recursive). Pairs come out sorted by stem.
pub fn scan_dataset(dir: &Path, split: &str, classes: ClassMap) -> Result<ScanReport> {
    let mut images: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut labels: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut unpaired = Vec::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if !path.is_file() {
            continue;
        }
        let (Some(stem), Some(ext)) = (
            path.file_stem().and_then(|s| s.to_str()),
            path.extension().and_then(|s| s.to_str()),
        ) else {
            continue;
        };
        let ext = ext.to_ascii_lowercase();
        let slot = if ext == "xml" {
            &mut labels
        } else if IMAGE_EXTENSIONS.contains(&ext.as_str()) {
            &mut images
        } else {
            continue;
        };
        if let Some(prev) = slot.insert(stem.to_string(), path.clone()) {
            let (a, b) = if prev < path { (prev, path) } else { (path, prev) };
            return Err(Error::InvalidInput(format!(
                "{} and {} share a stem",
                a.display(),
                b.display()
            )));
        }
    }
    let mut pairs = Vec::new();
    for (stem, image) in images {
        match labels.remove(&stem) {
            Some(annotation) => pairs.push(ManifestPair { image, annotation }),
            None => unpaired.push(image),
        }
    }
    unpaired.extend(labels.into_values());
    unpaired.sort();
    Ok(ScanReport {
        manifest: DatasetManifest {
            split: split.to_string(),
            classes,
            pairs,
        },
        unpaired,
    })
}

pub fn parse_manifest(text: &str, base: &Path, context: &str) -> Result<DatasetManifest> {
    let err = |line: usize, message: String| Error::Parse {
        context: context.to_string(),
        line: Some(line),
        message,
    };
    let mut split = None;
    let mut classes = Vec::new();
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if let Some(directive) = line.strip_prefix('#') {
            let Some((key, value)) = directive.split_once('=') else {
                continue;
            };
            match key.trim() {
                "split" => split = Some(value.trim().to_string()),
                "class" => {
                    let (name, id) = value
                        .split_once(':')
                        .ok_or_else(|| err(lineno, format!("class directive {value:?} is not name:id")))?;
                    let id = id
                        .trim()
                        .parse::<usize>()
                        .map_err(|_| err(lineno, format!("class id {id:?} is not an integer")))?;
                    classes.push((name.trim().to_string(), ClassId(id)));
                }
                other => return Err(err(lineno, format!("unknown directive {other:?}"))),
            }
            continue;
        }
        let mut cols = line.split('\t');
        let (Some(image), Some(annotation), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(err(lineno, "expected image<TAB>annotation".into()));
        };
        if image.is_empty() || annotation.is_empty() {
            return Err(err(lineno, "empty path".into()));
        }
        pairs.push(ManifestPair {
            image: base.join(image),
            annotation: base.join(annotation),
        });
    }
    let split = split.ok_or_else(|| Error::Parse {
        context: context.to_string(),
        line: None,
        message: "missing #split directive".into(),
    })?;
    let classes = if classes.is_empty() {
        ClassMap::default()
    } else {
        ClassMap::new(classes).map_err(|e| Error::Parse {
            context: context.to_string(),
            line: None,
            message: e.to_string(),
        })?
    };
    Ok(DatasetManifest { split, classes, pairs })
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    parse_manifest(&text, base, &path.display().to_string())
}

/// Paths under the manifest's directory are written relative to it.
pub fn render_manifest(m: &DatasetManifest, base: &Path) -> Result<String> {
    let mut out = format!("#split={}\n", m.split);
    for name in m.classes.names() {
        let id = m.classes.id(&name).expect("name from the map");
        out.push_str(&format!("#class={name}:{id}\n"));
    }
    for pair in &m.pairs {
        let rel = |p: &Path| -> Result<String> {
            let p = p.strip_prefix(base).unwrap_or(p);
            let s = p
                .to_str()
                .ok_or_else(|| Error::InvalidInput(format!("{} is not valid UTF-8", p.display())))?;
            if s.contains('\t') || s.contains('\n') {
                return Err(Error::InvalidInput(format!("path {s:?} contains a tab or newline")));
            }
            Ok(s.to_string())
        };
        out.push_str(&format!("{}\t{}\n", rel(&pair.image)?, rel(&pair.annotation)?));
    }
    Ok(out)
}

pub fn save_manifest(m: &DatasetManifest, path: &Path) -> Result<()> {
    let base = path.parent().unwrap_or(Path::new(""));
    let text = render_manifest(m, base)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
