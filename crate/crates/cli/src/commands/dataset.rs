use std::fs;
use std::path::Path;

use anyhow::Context;
use stressdet::augment::augment_dataset;
use stressdet::dataio::{load_manifest, parse_annotation, read_image, save_manifest, scan_dataset};
use stressdet::Error;

use super::read_text;
use crate::settings::Settings;

fn relative<'a>(p: &'a Path, root: &Path) -> std::path::Display<'a> {
    p.strip_prefix(root).unwrap_or(p).display()
}

pub fn validate(s: &Settings, root: &Path, split: &str, write: Option<&Path>) -> anyhow::Result<()> {
    let report = scan_dataset(root, split, s.classes.clone())?;
    let mut errors: Vec<Error> = Vec::new();
    for pair in &report.manifest.pairs {
        let name = relative(&pair.annotation, root).to_string();
        let ann = match read_text(&pair.annotation).and_then(|t| parse_annotation(&t, &s.classes, &name)) {
            Ok(a) => a,
            Err(e) => {
                errors.push(e);
                continue;
            }
        };
        match read_image(&pair.image) {
            Ok(img) if (img.width(), img.height()) != (ann.width as usize, ann.height as usize) => {
                errors.push(Error::InvalidInput(format!(
                    "{name}: annotation size {}x{} but {} is {}x{}",
                    ann.width,
                    ann.height,
                    relative(&pair.image, root),
                    img.width(),
                    img.height()
                )))
            }
            Ok(_) => {}
            Err(e) => errors.push(e),
        }
    }
    println!("pairs\t{}", report.manifest.pairs.len());
    for e in &errors {
        println!("error\t{e}");
    }
    for u in &report.unpaired {
        println!("warning\tunpaired\t{}", relative(u, root));
    }
    println!("summary\t{} errors\t{} warnings", errors.len(), report.unpaired.len());
    if let Some(path) = write {
        save_manifest(&report.manifest, path)?;
    }
    let count = errors.len();
    match errors.into_iter().next() {
        None => Ok(()),
        Some(first) => Err(anyhow::Error::new(first).context(format!("{count} files failed validation; first"))),
    }
}

pub fn augment(s: &Settings, manifest: &Path, out: &Path) -> anyhow::Result<()> {
    let m = load_manifest(manifest)?;
    if m.split != "train" {
        return Err(Error::Config(format!(
            "only training manifests are augmented; {} has split {:?}",
            manifest.display(),
            m.split
        ))
        .into());
    }
    fs::create_dir_all(out).map_err(|source| Error::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let out_dir = fs::canonicalize(out).with_context(|| out.display().to_string())?;
    for pair in &m.pairs {
        if let Some(parent) = pair.image.parent().and_then(|p| fs::canonicalize(p).ok()) {
            if parent == out_dir {
                return Err(Error::Config(format!(
                    "output directory {} holds source images; choose another",
                    out.display()
                ))
                .into());
            }
        }
    }
    let report = augment_dataset(&m, &s.augment, out)?;
    let out_manifest = out.join(format!("{}.manifest", m.split));
    save_manifest(&report.manifest, &out_manifest)?;
    println!("sources\t{}", m.pairs.len());
    println!("outputs\t{}", report.manifest.pairs.len());
    println!("manifest\t{}", out_manifest.display());
    for (p, e) in &report.failures {
        eprintln!("failed\t{}\t{e}", p.display());
    }
    let count = report.failures.len();
    match report.failures.into_iter().next() {
        None => Ok(()),
        Some((p, e)) => Err(anyhow::Error::new(e).context(format!("{count} sources failed; first {}", p.display()))),
    }
}
