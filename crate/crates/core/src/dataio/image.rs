//! Normalized image buffers and binary portable graymap/pixmap IO.
//!
//! Supported files are `P5` (one channel) and `P6` (three channels) with a
//! maximum value up to 65535. Samples are one byte when the maximum value is
//! below 256 and two big-endian bytes otherwise. Reading divides every sample
//! by the maximum value; writing multiplies by it and rounds to nearest.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{Shape, Tensor};

/// Interleaved row-major image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if !matches!(channels, 1 | 3 | 4) {
            return Err(Error::InvalidInput(format!("{channels} channels; expected 1, 3 or 4")));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!("empty image {width}x{height}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidInput(format!(
                "{} values for a {width}x{height}x{channels} image",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidInput(format!("value {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds from values already known to lie in `[0, 1]`.
    pub(crate) fn from_unit_values(like: &ImageBuffer, data: Vec<f64>) -> Self {
        debug_assert!(data.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(data.len(), like.data.len());
        Self {
            width: like.width,
            height: like.height,
            channels: like.channels,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels + ch]
    }

    pub fn set(&mut self, row: usize, col: usize, ch: usize, v: f64) {
        assert!((0.0..=1.0).contains(&v), "value {v} outside [0, 1]");
        self.data[(row * self.width + col) * self.channels + ch] = v;
    }

    /// One channel as a single-channel image.
    pub fn channel(&self, ch: usize) -> Result<ImageBuffer> {
        if ch >= self.channels {
            return Err(Error::InvalidInput(format!("channel {ch} of {}", self.channels)));
        }
        let data = self.data.iter().skip(ch).step_by(self.channels).copied().collect();
        ImageBuffer::new(self.width, self.height, 1, data)
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_vec(Shape::new(self.height, self.width, self.channels), self.data.clone())
            .expect("image values are finite")
    }
}

pub fn decode_pnm(bytes: &[u8]) -> Result<ImageBuffer> {
    decode_pnm_with_depth(bytes).map(|(img, _)| img)
}

/// Also reports whether samples were stored in one or two bytes.
pub fn decode_pnm_with_depth(bytes: &[u8]) -> Result<(ImageBuffer, BitDepth)> {
    let mut pos = 0;
    let mut token = || -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    let channels = match magic.as_str() {
        "P5" => 1,
        "P6" => 3,
        other => return Err(Error::Format(format!("unsupported magic {other:?}"))),
    };
    let mut num = |what: &str| -> Result<usize> {
        let t = token()?;
        t.parse::<usize>()
            .map_err(|_| Error::Format(format!("bad {what} {t:?} in header")))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maximum value")?;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!(
            "header {width}x{height} max {maxval} out of range"
        )));
    }
    // exactly one whitespace byte separates the header from the samples
    let start = pos + 1;
    let bytes_per = if maxval < 256 { 1 } else { 2 };
    let n = width * height * channels;
    let payload = bytes
        .get(start..start + n * bytes_per)
        .ok_or_else(|| Error::Format(format!("truncated payload: expected {} bytes", n * bytes_per)))?;
    let max = maxval as f64;
    let mut data = Vec::with_capacity(n);
    for chunk in payload.chunks_exact(bytes_per) {
        let raw = if bytes_per == 1 {
            chunk[0] as usize
        } else {
            u16::from_be_bytes([chunk[0], chunk[1]]) as usize
        };
        if raw > maxval {
            return Err(Error::Format(format!("sample {raw} exceeds maximum {maxval}")));
        }
        data.push(raw as f64 / max);
    }
    let depth = if bytes_per == 1 { BitDepth::Eight } else { BitDepth::Sixteen };
    Ok((ImageBuffer::new(width, height, channels, data)?, depth))
}

/// Sample depth when writing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

pub fn encode_pnm(img: &ImageBuffer, depth: BitDepth) -> Result<Vec<u8>> {
    let magic = match img.channels {
        1 => "P5",
        3 => "P6",
        c => return Err(Error::Format(format!("cannot store {c} channels in a portable map"))),
    };
    let maxval: u32 = match depth {
        BitDepth::Eight => 255,
        BitDepth::Sixteen => 65535,
    };
    let mut out = format!("{magic}\n{} {}\n{maxval}\n", img.width, img.height).into_bytes();
    for &v in &img.data {
        let q = (v * f64::from(maxval)).round() as u32;
        match depth {
            BitDepth::Eight => out.push(q as u8),
            BitDepth::Sixteen => out.extend_from_slice(&(q as u16).to_be_bytes()),
        }
    }
    Ok(out)
}

pub fn read_image(path: &Path) -> Result<ImageBuffer> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pnm(&bytes).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        e => e,
    })
}

pub fn write_image(path: &Path, img: &ImageBuffer, depth: BitDepth) -> Result<()> {
    let bytes = encode_pnm(img, depth)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
