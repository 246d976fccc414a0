use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};

use super::{Shape, Tensor};

/// A 2-D convolution layer with "same"-style padding: the output spatial
/// size is `ceil(input / stride)`.
///
/// Weights are laid out `[ky][kx][in_channel][out_channel]`. When the total
/// padding along an axis is odd, the extra row or column goes to the bottom
/// or right side.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub name: String,
    pub kernel: usize,
    pub stride: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv2d {
    pub fn new(
        name: impl Into<String>,
        kernel: usize,
        stride: usize,
        in_channels: usize,
        out_channels: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        let name = name.into();
        if kernel != 1 && kernel != 3 {
            return Err(Error::Config(format!("{name}: kernel {kernel} not in {{1, 3}}")));
        }
        if stride == 0 || in_channels == 0 || out_channels == 0 {
            return Err(Error::Config(format!("{name}: zero stride or channel count")));
        }
        let expected = kernel * kernel * in_channels * out_channels;
        if weights.len() != expected || bias.len() != out_channels {
            return Err(Error::shape(
                name,
                format!(
                    "expected {expected} weights and {out_channels} biases, got {} and {}",
                    weights.len(),
                    bias.len()
                ),
            ));
        }
        Ok(Self {
            name,
            kernel,
            stride,
            in_channels,
            out_channels,
            weights,
            bias,
        })
    }

    /// He-normal weights, constant bias.
    pub fn random(
        name: impl Into<String>,
        kernel: usize,
        stride: usize,
        in_channels: usize,
        out_channels: usize,
        bias: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let fan_in = (kernel * kernel * in_channels) as f64;
        let normal = Normal::new(0.0, (2.0 / fan_in).sqrt())
            .map_err(|e| Error::Config(e.to_string()))?;
        let weights = (0..kernel * kernel * in_channels * out_channels)
            .map(|_| normal.sample(rng))
            .collect();
        Self::new(
            name,
            kernel,
            stride,
            in_channels,
            out_channels,
            weights,
            vec![bias; out_channels],
        )
    }

    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        if input.channels != self.in_channels {
            return Err(Error::shape(
                &self.name,
                format!(
                    "input {input} has {} channels, layer expects {}",
                    input.channels, self.in_channels
                ),
            ));
        }
        Ok(Shape::new(
            input.height.div_ceil(self.stride),
            input.width.div_ceil(self.stride),
            self.out_channels,
        ))
    }

    /// Leading (top or left) padding for an axis of length `input`.
    pub fn pad_before(&self, input: usize) -> usize {
        let out = input.div_ceil(self.stride);
        let total = ((out - 1) * self.stride + self.kernel).saturating_sub(input);
        total / 2
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Cross-correlation of `x` with `layer`, zero padded.
pub fn conv2d(x: &Tensor, layer: &Conv2d) -> Result<Tensor> {
    let in_shape = x.shape();
    let out_shape = layer.output_shape(in_shape)?;
    let (k, s) = (layer.kernel, layer.stride);
    let (cin, cout) = (layer.in_channels, layer.out_channels);
    let pad_top = layer.pad_before(in_shape.height) as isize;
    let pad_left = layer.pad_before(in_shape.width) as isize;
    let input = x.data();

    let mut out = vec![0.0; out_shape.len()];
    out.par_chunks_mut(out_shape.width * cout)
        .enumerate()
        .for_each(|(oy, row_out)| {
            for ox in 0..out_shape.width {
                let acc = &mut row_out[ox * cout..(ox + 1) * cout];
                acc.copy_from_slice(&layer.bias);
                for ky in 0..k {
                    let iy = (oy * s + ky) as isize - pad_top;
                    if iy < 0 || iy >= in_shape.height as isize {
                        continue;
                    }
                    for kx in 0..k {
                        let ix = (ox * s + kx) as isize - pad_left;
                        if ix < 0 || ix >= in_shape.width as isize {
                            continue;
                        }
                        let base = (iy as usize * in_shape.width + ix as usize) * cin;
                        let pixel = &input[base..base + cin];
                        let wbase = (ky * k + kx) * cin * cout;
                        for (ci, &v) in pixel.iter().enumerate() {
                            if v == 0.0 {
                                continue;
                            }
                            let w = &layer.weights[wbase + ci * cout..wbase + (ci + 1) * cout];
                            for (a, &wv) in acc.iter_mut().zip(w) {
                                *a += v * wv;
                            }
                        }
                    }
                }
            }
        });
    Tensor::from_vec(out_shape, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Pads explicitly, then evaluates the defining sum with nested loops.
    fn naive(x: &Tensor, l: &Conv2d) -> Tensor {
        let sh = x.shape();
        let (oh, ow) = (sh.height.div_ceil(l.stride), sh.width.div_ceil(l.stride));
        let total_h = ((oh - 1) * l.stride + l.kernel).saturating_sub(sh.height);
        let total_w = ((ow - 1) * l.stride + l.kernel).saturating_sub(sh.width);
        let (pt, pl) = (total_h / 2, total_w / 2);
        let (ph, pw) = (sh.height + total_h, sh.width + total_w);
        let mut padded = vec![0.0; ph * pw * sh.channels];
        for r in 0..sh.height {
            for c in 0..sh.width {
                for ch in 0..sh.channels {
                    padded[((r + pt) * pw + c + pl) * sh.channels + ch] = x.get(r, c, ch);
                }
            }
        }
        let mut out = Tensor::zeros(Shape::new(oh, ow, l.out_channels));
        for oy in 0..oh {
            for ox in 0..ow {
                for co in 0..l.out_channels {
                    let mut sum = l.bias[co];
                    for ky in 0..l.kernel {
                        for kx in 0..l.kernel {
                            for ci in 0..l.in_channels {
                                let v = padded[((oy * l.stride + ky) * pw + ox * l.stride + kx)
                                    * sh.channels
                                    + ci];
                                let w = l.weights
                                    [((ky * l.kernel + kx) * l.in_channels + ci) * l.out_channels + co];
                                sum += v * w;
                            }
                        }
                    }
                    out.set(oy, ox, co, sum);
                }
            }
        }
        out
    }

    fn random_tensor(shape: Shape, rng: &mut ChaCha8Rng) -> Tensor {
        let data = (0..shape.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor::from_vec(shape, data).unwrap()
    }

    #[test]
    fn identity_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_tensor(Shape::new(5, 7, 3), &mut rng);
        let mut w = vec![0.0; 9];
        for c in 0..3 {
            w[c * 3 + c] = 1.0;
        }
        let l = Conv2d::new("id", 1, 1, 3, 3, w, vec![0.0; 3]).unwrap();
        assert_eq!(conv2d(&x, &l).unwrap(), x);
    }

    #[test]
    fn box_filter_on_constant() {
        let x = Tensor::filled(Shape::new(6, 6, 1), 2.5);
        let l = Conv2d::new("ones", 3, 1, 1, 1, vec![1.0; 9], vec![0.0]).unwrap();
        let y = conv2d(&x, &l).unwrap();
        for r in 1..5 {
            for c in 1..5 {
                assert_eq!(y.get(r, c, 0), 22.5);
            }
        }
        // corners see a 2x2 neighbourhood
        assert_eq!(y.get(0, 0, 0), 10.0);
    }

    #[test]
    fn matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_tensor(Shape::new(8, 8, 3), &mut rng);
        let l = Conv2d::random("r", 3, 1, 3, 4, 0.1, &mut rng).unwrap();
        let (got, want) = (conv2d(&x, &l).unwrap(), naive(&x, &l));
        for (a, b) in got.data().iter().zip(want.data()) {
            assert!((a - b).abs() <= 1e-12);
        }
        for (h, w, stride) in [(7, 9, 2), (21, 21, 2), (5, 4, 2), (3, 3, 1)] {
            let x = random_tensor(Shape::new(h, w, 2), &mut rng);
            let l = Conv2d::random("r", 3, stride, 2, 3, -0.2, &mut rng).unwrap();
            let got = conv2d(&x, &l).unwrap();
            assert_eq!(got.shape(), Shape::new(h.div_ceil(stride), w.div_ceil(stride), 3));
            for (a, b) in got.data().iter().zip(naive(&x, &l).data()) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn odd_input_stride_two_padding() {
        let l = Conv2d::random("p6", 3, 2, 1, 1, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        // 21 -> 11 needs 2 padding rows, one on each side
        assert_eq!(l.pad_before(21), 1);
        // 168 -> 84 needs one, placed after
        assert_eq!(l.pad_before(168), 0);
    }

    #[test]
    fn channel_mismatch() {
        let x = Tensor::zeros(Shape::new(4, 4, 2));
        let l = Conv2d::new("c", 1, 1, 3, 1, vec![0.0; 3], vec![0.0]).unwrap();
        assert!(matches!(conv2d(&x, &l), Err(Error::Shape { layer, .. }) if layer == "c"));
    }

    #[test]
    fn weight_count_checked() {
        assert!(Conv2d::new("c", 3, 1, 2, 2, vec![0.0; 35], vec![0.0; 2]).is_err());
        assert!(Conv2d::new("c", 5, 1, 1, 1, vec![0.0; 25], vec![0.0]).is_err());
    }
}
