mod dataset;
mod detections;
mod network;

use std::fs;
use std::path::Path;

use stressdet::dataio::{compose_bands as stack_bands, decode_pnm_with_depth, encode_pnm, BandSelection, BitDepth};
use stressdet::Error;

pub use dataset::{augment, validate};
pub use detections::{eval, overlay, postprocess};
pub use network::{anchors, forward_check};

fn read_text(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, Error> {
    fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes to `path`, or to standard output without one.
fn emit(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => write_bytes(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn compose_bands(
    green: &Path,
    red: &Path,
    red_edge: &Path,
    nir: &Path,
    select: &str,
    out: &Path,
) -> anyhow::Result<()> {
    let sel: BandSelection = select.parse()?;
    let mut sixteen = false;
    let mut load = |p: &Path| -> anyhow::Result<_> {
        let (img, depth) = decode_pnm_with_depth(&read_bytes(p)?)
            .map_err(|e| anyhow::Error::new(e).context(p.display().to_string()))?;
        sixteen |= depth == BitDepth::Sixteen;
        Ok(img)
    };
    let (g, r, re, n) = (load(green)?, load(red)?, load(red_edge)?, load(nir)?);
    let img = stack_bands(&g, &r, &re, &n, sel)?;
    let depth = if sixteen { BitDepth::Sixteen } else { BitDepth::Eight };
    write_bytes(out, &encode_pnm(&img, depth)?)?;
    println!("composed\t{sel}\t{}x{}", img.width(), img.height());
    Ok(())
}
