//! Photometric augmentation: percentile rescaling, gamma, sigmoid contrast
//! and additive Gaussian noise, applied independently to each source image.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::dataio::{decode_pnm_with_depth, encode_pnm, DatasetManifest, ImageBuffer, ManifestPair};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentSpec {
    /// Lower and upper percentile in `[0, 100]`.
    pub rescale_lo: f64,
    pub rescale_hi: f64,
    pub gamma: f64,
    pub gamma_gain: f64,
    pub sigmoid_cutoff: f64,
    pub sigmoid_gain: f64,
    pub noise_mean: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self {
            rescale_lo: 0.2,
            rescale_hi: 99.8,
            gamma: 0.8,
            gamma_gain: 0.8,
            sigmoid_cutoff: 0.5,
            sigmoid_gain: 10.0,
            noise_mean: 0.0,
            noise_std: 0.1,
            seed: 0,
        }
    }
}

impl AugmentSpec {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = (self.rescale_lo, self.rescale_hi);
        if !(0.0 <= lo && lo < hi && hi <= 100.0) {
            return Err(Error::Config(format!("percentiles {lo}, {hi} need 0 <= lo < hi <= 100")));
        }
        for (name, v) in [
            ("gamma", self.gamma),
            ("gamma gain", self.gamma_gain),
            ("sigmoid gain", self.sigmoid_gain),
            ("noise std", self.noise_std),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} {v} must be positive")));
            }
        }
        if !self.sigmoid_cutoff.is_finite() || !self.noise_mean.is_finite() {
            return Err(Error::Config("sigmoid cutoff and noise mean must be finite".into()));
        }
        Ok(())
    }
}

/// The augmented variants, in output order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Rescale,
    Gamma,
    Sigmoid,
    Noise,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Rescale, Variant::Gamma, Variant::Sigmoid, Variant::Noise];

    pub fn suffix(self) -> &'static str {
        match self {
            Variant::Rescale => "-rescale",
            Variant::Gamma => "-gamma",
            Variant::Sigmoid => "-sigmoid",
            Variant::Noise => "-noise",
        }
    }
}

/// Linearly interpolated percentile: rank `p / 100 * (n - 1)` between the
/// two neighbouring order statistics. Reorders `values`.
fn percentile(values: &mut [f64], p: f64) -> f64 {
    let rank = p / 100.0 * (values.len() - 1) as f64;
    let k = rank.floor() as usize;
    let frac = rank - k as f64;
    let (_, &mut lower, upper) = values.select_nth_unstable_by(k, f64::total_cmp);
    if frac == 0.0 || upper.is_empty() {
        return lower;
    }
    let next = upper.iter().copied().fold(f64::INFINITY, f64::min);
    lower + frac * (next - lower)
}

/// Maps the `lo` and `hi` percentiles of all samples to 0 and 1, clamping
/// outside. A flat image maps to zeros.
pub fn rescale_intensity(img: &ImageBuffer, lo: f64, hi: f64) -> ImageBuffer {
    let mut scratch = img.data().to_vec();
    let p_lo = percentile(&mut scratch, lo);
    let p_hi = percentile(&mut scratch, hi);
    let span = p_hi - p_lo;
    let data = img
        .data()
        .iter()
        .map(|&v| if span > 0.0 { ((v - p_lo) / span).clamp(0.0, 1.0) } else { 0.0 })
        .collect();
    ImageBuffer::from_unit_values(img, data)
}

/// `gain * v^gamma`, clamped.
pub fn adjust_gamma(img: &ImageBuffer, gamma: f64, gain: f64) -> ImageBuffer {
    let data = img.data().iter().map(|&v| (gain * v.powf(gamma)).clamp(0.0, 1.0)).collect();
    ImageBuffer::from_unit_values(img, data)
}

/// Logistic contrast curve `1 / (1 + e^(gain (cutoff - v)))`.
pub fn adjust_sigmoid(img: &ImageBuffer, cutoff: f64, gain: f64) -> ImageBuffer {
    let data = img
        .data()
        .iter()
        .map(|&v| 1.0 / (1.0 + (gain * (cutoff - v)).exp()))
        .collect();
    ImageBuffer::from_unit_values(img, data)
}

/// `n` draws from Normal(mean, std) on stream `stream` of the generator
/// seeded with `seed`.
pub fn gaussian_noise(n: usize, mean: f64, std: f64, seed: u64, stream: u64) -> Result<Vec<f64>> {
    let normal = Normal::new(mean, std)
        .map_err(|e| Error::Config(format!("noise distribution ({mean}, {std}): {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    Ok((0..n).map(|_| normal.sample(&mut rng)).collect())
}

/// Adds independent noise to every sample and clamps.
pub fn add_gaussian_noise(img: &ImageBuffer, mean: f64, std: f64, seed: u64, stream: u64) -> Result<ImageBuffer> {
    let noise = gaussian_noise(img.data().len(), mean, std, seed, stream)?;
    let data = img
        .data()
        .iter()
        .zip(noise)
        .map(|(&v, n)| (v + n).clamp(0.0, 1.0))
        .collect();
    Ok(ImageBuffer::from_unit_values(img, data))
}

/// Applies one variant. `index` selects the noise stream, so results do not
/// depend on processing order.
pub fn apply_variant(img: &ImageBuffer, variant: Variant, spec: &AugmentSpec, index: u64) -> Result<ImageBuffer> {
    Ok(match variant {
        Variant::Rescale => rescale_intensity(img, spec.rescale_lo, spec.rescale_hi),
        Variant::Gamma => adjust_gamma(img, spec.gamma, spec.gamma_gain),
        Variant::Sigmoid => adjust_sigmoid(img, spec.sigmoid_cutoff, spec.sigmoid_gain),
        Variant::Noise => add_gaussian_noise(img, spec.noise_mean, spec.noise_std, spec.seed, index)?,
    })
}

#[derive(Debug)]
pub struct AugmentReport {
    /// Originals and variants of every source that succeeded.
    pub manifest: DatasetManifest,
    /// Sources that failed, with the reason.
    pub failures: Vec<(PathBuf, Error)>,
}

/// Writes each source image and annotation to `out_dir` together with the
/// four variants (`<stem>-rescale.<ext>` and so on). Annotation bytes are
/// copied unchanged. A failing source is reported and skipped.
pub fn augment_dataset(manifest: &DatasetManifest, spec: &AugmentSpec, out_dir: &Path) -> Result<AugmentReport> {
    spec.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut stems: Vec<&std::ffi::OsStr> = Vec::new();
    for pair in &manifest.pairs {
        let stem = pair
            .image
            .file_stem()
            .ok_or_else(|| Error::InvalidInput(format!("{} has no file name", pair.image.display())))?;
        if stems.contains(&stem) {
            return Err(Error::InvalidInput(format!(
                "two sources share the name {}",
                stem.to_string_lossy()
            )));
        }
        stems.push(stem);
    }

    let results: Vec<Result<Vec<ManifestPair>>> = manifest
        .pairs
        .par_iter()
        .enumerate()
        .map(|(i, pair)| augment_one(pair, spec, i as u64, out_dir))
        .collect();

    let mut pairs = Vec::new();
    let mut failures = Vec::new();
    for (pair, r) in manifest.pairs.iter().zip(results) {
        match r {
            Ok(p) => pairs.extend(p),
            Err(e) => failures.push((pair.image.clone(), e)),
        }
    }
    Ok(AugmentReport {
        manifest: DatasetManifest {
            split: manifest.split.clone(),
            classes: manifest.classes.clone(),
            pairs,
        },
        failures,
    })
}

fn augment_one(pair: &ManifestPair, spec: &AugmentSpec, index: u64, out_dir: &Path) -> Result<Vec<ManifestPair>> {
    let image_bytes = fs::read(&pair.image).map_err(|e| Error::io(&pair.image, e))?;
    let label_bytes = fs::read(&pair.annotation).map_err(|e| Error::io(&pair.annotation, e))?;
    let (img, depth) = decode_pnm_with_depth(&image_bytes)
        .map_err(|e| Error::Format(format!("{}: {e}", pair.image.display())))?;
    let stem = pair.image.file_stem().unwrap_or_default().to_string_lossy().into_owned();
    let ext = pair
        .image
        .extension()
        .map(|e| e.to_string_lossy().into_owned())
        .unwrap_or_else(|| if img.channels() == 1 { "pgm".into() } else { "ppm".into() });

    let write = |path: PathBuf, bytes: &[u8]| -> Result<PathBuf> {
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    };
    let mut out = Vec::with_capacity(5);
    out.push(ManifestPair {
        image: write(out_dir.join(format!("{stem}.{ext}")), &image_bytes)?,
        annotation: write(out_dir.join(format!("{stem}.xml")), &label_bytes)?,
    });
    for v in Variant::ALL {
        let aug = apply_variant(&img, v, spec, index)?;
        let name = format!("{stem}{}", v.suffix());
        out.push(ManifestPair {
            image: write(out_dir.join(format!("{name}.{ext}")), &encode_pnm(&aug, depth)?)?,
            annotation: write(out_dir.join(format!("{name}.xml")), &label_bytes)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(values: Vec<f64>) -> ImageBuffer {
        ImageBuffer::new(values.len(), 1, 1, values).unwrap()
    }

    #[test]
    fn gamma_values() {
        let out = adjust_gamma(&img(vec![0.0, 0.5, 1.0]), 0.8, 0.8);
        assert_eq!(out.data()[0], 0.0);
        assert!((out.data()[1] - 0.459_479_341_998_814).abs() < 1e-12);
        assert_eq!(out.data()[2], 0.8);
        let x = img(vec![0.1, 0.37, 0.9]);
        assert_eq!(adjust_gamma(&x, 1.0, 1.0), x);
    }

    #[test]
    fn sigmoid_values() {
        let out = adjust_sigmoid(&img(vec![0.0, 0.5]), 0.5, 10.0);
        assert!((out.data()[0] - 0.006_692_850_924_284_856).abs() < 1e-15);
        assert_eq!(out.data()[1], 0.5);
    }

    #[test]
    fn rescale_degenerate_and_endpoints() {
        let flat = img(vec![0.3; 7]);
        assert!(rescale_intensity(&flat, 0.2, 99.8).data().iter().all(|&v| v == 0.0));
        let out = rescale_intensity(&img(vec![0.2, 0.4, 0.6]), 0.0, 100.0);
        assert_eq!(out.data()[0], 0.0);
        assert_eq!(out.data()[2], 1.0);
        assert!((out.data()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn percentile_interpolates() {
        let mut v = vec![4.0, 1.0, 3.0, 2.0];
        assert_eq!(percentile(&mut v, 50.0), 2.5);
        assert_eq!(percentile(&mut v, 100.0), 4.0);
        assert_eq!(percentile(&mut v, 0.0), 1.0);
        let mut one = vec![0.7];
        assert_eq!(percentile(&mut one, 99.8), 0.7);
    }

    #[test]
    fn noise_is_seeded() {
        let x = ImageBuffer::filled(8, 8, 3, 0.5).unwrap();
        let a = add_gaussian_noise(&x, 0.0, 0.1, 7, 3).unwrap();
        assert_eq!(a, add_gaussian_noise(&x, 0.0, 0.1, 7, 3).unwrap());
        assert_ne!(a, add_gaussian_noise(&x, 0.0, 0.1, 7, 4).unwrap());
        let tiny = add_gaussian_noise(&x, 0.0, 1e-12, 7, 0).unwrap();
        assert!(tiny.data().iter().all(|v| (v - 0.5).abs() <= 1e-9));
    }

    #[test]
    fn spec_validation() {
        assert!(AugmentSpec::default().validate().is_ok());
        let bad = AugmentSpec {
            rescale_lo: 50.0,
            rescale_hi: 50.0,
            ..AugmentSpec::default()
        };
        assert!(bad.validate().is_err());
        let bad = AugmentSpec {
            noise_std: 0.0,
            ..AugmentSpec::default()
        };
        assert!(bad.validate().is_err());
    }
}
