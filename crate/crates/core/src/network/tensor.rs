use std::fmt;

use crate::error::{Error, Result};

/// Spatial and channel extent of a feature map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Shape {
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
        }
    }

    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

/// Dense rank-3 feature map stored row-major as height x width x channels,
/// channels innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: Shape) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.len()],
        }
    }

    pub fn filled(shape: Shape, value: f64) -> Self {
        Self {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn from_vec(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if shape.height == 0 || shape.width == 0 || shape.channels == 0 {
            return Err(Error::InvalidInput(format!("empty tensor shape {shape}")));
        }
        if data.len() != shape.len() {
            return Err(Error::shape(
                "tensor",
                format!("{} values for shape {shape}", data.len()),
            ));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value at flat index {bad}"
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    fn index(&self, row: usize, col: usize, ch: usize) -> usize {
        (row * self.shape.width + col) * self.shape.channels + ch
    }

    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.data[self.index(row, col, ch)]
    }

    pub fn set(&mut self, row: usize, col: usize, ch: usize, v: f64) {
        let i = self.index(row, col, ch);
        self.data[i] = v;
    }

    /// Channel vector at one spatial position.
    pub fn pixel(&self, row: usize, col: usize) -> &[f64] {
        let i = self.index(row, col, 0);
        &self.data[i..i + self.shape.channels]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn relu(mut self) -> Tensor {
        for v in &mut self.data {
            *v = v.max(0.0);
        }
        self
    }

    /// Pointwise sum. Fails unless both shapes are identical.
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::shape(
                "add",
                format!("{} + {}", self.shape, other.shape),
            ));
        }
        Ok(Tensor {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// Nearest-neighbour 2x upsampling: each value fills a 2x2 block.
    pub fn upsample_nearest_2x(&self) -> Tensor {
        let Shape {
            height,
            width,
            channels,
        } = self.shape;
        let out_shape = Shape::new(2 * height, 2 * width, channels);
        let mut out = Vec::with_capacity(out_shape.len());
        for row in 0..2 * height {
            for col in 0..2 * width {
                out.extend_from_slice(self.pixel(row / 2, col / 2));
            }
        }
        Tensor {
            shape: out_shape,
            data: out,
        }
    }

    /// Keeps the top-left value of each 2x2 block.
    pub fn downsample_pick_2x(&self) -> Tensor {
        let Shape {
            height,
            width,
            channels,
        } = self.shape;
        let out_shape = Shape::new(height.div_ceil(2), width.div_ceil(2), channels);
        let mut out = Vec::with_capacity(out_shape.len());
        for row in (0..height).step_by(2) {
            for col in (0..width).step_by(2) {
                out.extend_from_slice(self.pixel(row, col));
            }
        }
        Tensor {
            shape: out_shape,
            data: out,
        }
    }

    /// Keeps the top-left `height x width` window.
    pub fn crop(&self, height: usize, width: usize) -> Result<Tensor> {
        if height > self.shape.height || width > self.shape.width {
            return Err(Error::shape(
                "crop",
                format!("cannot crop {} to {height}x{width}", self.shape),
            ));
        }
        let channels = self.shape.channels;
        let mut out = Vec::with_capacity(height * width * channels);
        for row in 0..height {
            let start = self.index(row, 0, 0);
            out.extend_from_slice(&self.data[start..start + width * channels]);
        }
        Ok(Tensor {
            shape: Shape::new(height, width, channels),
            data: out,
        })
    }
}
