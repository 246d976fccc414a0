//! Flat weight blobs with a textual manifest.
//!
//! The blob is the concatenation of every parameter tensor as little-endian
//! IEEE-754 32-bit floats. The manifest has one tab-separated line per
//! tensor, `name  dims  offset`, where `dims` is a comma-separated list and
//! `offset` is the byte offset of the tensor in the blob. Lines starting
//! with `#` are comments. Convolution weights are listed with dims
//! `k,k,in,out` under `<layer>.weight`, biases with dims `out` under
//! `<layer>.bias`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::graph::Backbone;
use super::model::Model;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub name: String,
    pub dims: Vec<usize>,
    pub offset: usize,
}

impl ManifestEntry {
    fn byte_len(&self) -> usize {
        self.dims.iter().product::<usize>() * 4
    }
}

pub fn export_weights<B: Backbone>(model: &Model<B>) -> (Vec<u8>, String) {
    let mut blob = Vec::new();
    let mut manifest = String::from("# name\tdims\toffset\n");
    for layer in model.layers() {
        let k = layer.kernel;
        let tensors = [
            (
                format!("{}.weight", layer.name),
                vec![k, k, layer.in_channels, layer.out_channels],
                &layer.weights,
            ),
            (format!("{}.bias", layer.name), vec![layer.out_channels], &layer.bias),
        ];
        for (name, dims, values) in tensors {
            let dims_s: Vec<String> = dims.iter().map(|d| d.to_string()).collect();
            writeln!(manifest, "{name}\t{}\t{}", dims_s.join(","), blob.len()).expect("string write");
            for &v in values {
                blob.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    (blob, manifest)
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse {
            context: "weight manifest".into(),
            line: Some(i + 1),
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        let [name, dims, offset] = fields[..] else {
            return Err(err(format!("expected 3 tab-separated fields, got {}", fields.len())));
        };
        let dims = dims
            .split(',')
            .map(|d| d.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| err(format!("bad dims {dims:?}: {e}")))?;
        let offset = offset
            .parse::<usize>()
            .map_err(|e| err(format!("bad offset {offset:?}: {e}")))?;
        entries.push(ManifestEntry {
            name: name.to_string(),
            dims,
            offset,
        });
    }
    Ok(entries)
}

/// Loads parameters into `model`. Every layer must be present with matching
/// dims; the model is left untouched on error.
pub fn import_weights<B: Backbone>(model: &mut Model<B>, blob: &[u8], manifest: &str) -> Result<()> {
    let entries = parse_manifest(manifest)?;
    let lookup = |name: &str, dims: &[usize]| -> Result<Vec<f64>> {
        let e = entries
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| Error::InvalidInput(format!("weight manifest lacks {name}")))?;
        if e.dims != dims {
            return Err(Error::shape(
                name,
                format!("manifest dims {:?}, model expects {dims:?}", e.dims),
            ));
        }
        let bytes = blob
            .get(e.offset..e.offset + e.byte_len())
            .ok_or_else(|| Error::Format(format!("{name} runs past the end of the blob")))?;
        Ok(bytes
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
            .collect())
    };

    let mut loaded = Vec::new();
    for layer in model.layers() {
        let k = layer.kernel;
        let w = lookup(
            &format!("{}.weight", layer.name),
            &[k, k, layer.in_channels, layer.out_channels],
        )?;
        let b = lookup(&format!("{}.bias", layer.name), &[layer.out_channels])?;
        loaded.push((w, b));
    }
    for (layer, (w, b)) in model.layers_mut().into_iter().zip(loaded) {
        layer.weights = w;
        layer.bias = b;
    }
    Ok(())
}

pub fn save_weights<B: Backbone>(model: &Model<B>, blob_path: &Path, manifest_path: &Path) -> Result<()> {
    let (blob, manifest) = export_weights(model);
    fs::write(blob_path, blob).map_err(|e| Error::io(blob_path, e))?;
    fs::write(manifest_path, manifest).map_err(|e| Error::io(manifest_path, e))?;
    Ok(())
}

pub fn load_weights<B: Backbone>(model: &mut Model<B>, blob_path: &Path, manifest_path: &Path) -> Result<()> {
    let blob = fs::read(blob_path).map_err(|e| Error::io(blob_path, e))?;
    let manifest = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    import_weights(model, &blob, &manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{HeadConfig, ModelConfig};

    fn small_cfg(seed: u64) -> ModelConfig {
        ModelConfig {
            channel_plan: [8, 8, 8, 8],
            heads: HeadConfig {
                depth: 1,
                ..HeadConfig::default()
            },
            seed,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn round_trip_through_f32() {
        let src = Model::new(&small_cfg(1)).unwrap();
        let (blob, manifest) = export_weights(&src);
        assert_eq!(blob.len(), src.parameter_count() * 4);
        let mut dst = Model::new(&small_cfg(2)).unwrap();
        import_weights(&mut dst, &blob, &manifest).unwrap();
        for (a, b) in src.layers().iter().zip(dst.layers()) {
            for (x, y) in a.weights.iter().zip(&b.weights) {
                assert_eq!(*y, f64::from(*x as f32));
            }
        }
        // a second export is byte-identical
        assert_eq!(export_weights(&dst), (blob, manifest));
    }

    #[test]
    fn manifest_layout() {
        let model = Model::new(&small_cfg(1)).unwrap();
        let (_, manifest) = export_weights(&model);
        let entries = parse_manifest(&manifest).unwrap();
        assert_eq!(entries[0].name, "backbone.stem.weight");
        assert_eq!(entries[0].dims, vec![3, 3, 3, 8]);
        assert_eq!(entries[0].offset, 0);
        assert_eq!(entries[1].offset, 3 * 3 * 3 * 8 * 4);
    }

    #[test]
    fn rejects_mismatches() {
        let model = Model::new(&small_cfg(1)).unwrap();
        let (blob, manifest) = export_weights(&model);
        let mut other = Model::new(&ModelConfig {
            channel_plan: [16, 8, 8, 8],
            ..small_cfg(1)
        })
        .unwrap();
        let before = other.clone();
        assert!(matches!(
            import_weights(&mut other, &blob, &manifest),
            Err(Error::Shape { .. })
        ));
        assert_eq!(other, before);

        let mut same = model.clone();
        assert!(import_weights(&mut same, &blob[..blob.len() - 4], &manifest).is_err());
        assert!(matches!(
            import_weights(&mut same, &blob, "backbone.stem.weight\t3,x\t0\n"),
            Err(Error::Parse { line: Some(1), .. })
        ));
    }
}
