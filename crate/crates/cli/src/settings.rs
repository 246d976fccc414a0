//! Run settings resolved from defaults, the environment, a config file and
//! command-line flags, in increasing precedence.
//!
//! Config files hold one `key = value` per line; `#` starts a comment.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use stressdet::augment::AugmentSpec;
use stressdet::dataio::ClassMap;
use stressdet::geometry::{AnchorConfig, NmsConfig};
use stressdet::network::DetectConfig;
use stressdet::Error;

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "STRESSDET_THREADS";

pub const KEYS: [&str; 14] = [
    "score_threshold",
    "nms_iou",
    "input_size",
    "seed",
    "threads",
    "classes",
    "rescale_lo",
    "rescale_hi",
    "gamma",
    "gamma_gain",
    "sigmoid_cutoff",
    "sigmoid_gain",
    "noise_mean",
    "noise_std",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub score_threshold: f64,
    pub nms_iou: f64,
    /// (height, width)
    pub input_size: (u32, u32),
    pub seed: u64,
    pub threads: Option<usize>,
    pub classes: ClassMap,
    pub augment: AugmentSpec,
}

impl Default for Settings {
    fn default() -> Self {
        let d = DetectConfig::default();
        Self {
            score_threshold: d.score_threshold,
            nms_iou: d.nms.iou_threshold,
            input_size: d.anchors.input_size,
            seed: 0,
            threads: None,
            classes: ClassMap::default(),
            augment: AugmentSpec::default(),
        }
    }
}

fn config_err(msg: String) -> Error {
    Error::Config(msg)
}

pub fn parse_config_text(text: &str, context: &str) -> Result<Vec<(String, String)>, Error> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            config_err(format!("{context} line {}: expected key = value", i + 1))
        })?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(config_err(format!("{context} line {}: unknown key {k:?}", i + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// `672` or `HxW`.
pub fn parse_size(s: &str) -> Result<(u32, u32), Error> {
    let bad = || config_err(format!("input size {s:?} is not N or HxW"));
    match s.split_once(['x', 'X']) {
        Some((h, w)) => Ok((h.trim().parse().map_err(|_| bad())?, w.trim().parse().map_err(|_| bad())?)),
        None => {
            let n = s.trim().parse().map_err(|_| bad())?;
            Ok((n, n))
        }
    }
}

impl Settings {
    /// Layers `env_threads`, then the config file, then `flags` over the
    /// defaults.
    pub fn resolve(
        config: Option<&Path>,
        env_threads: Option<String>,
        flags: &[(&str, Option<String>)],
    ) -> Result<Settings, Error> {
        let mut values: BTreeMap<String, String> = BTreeMap::new();
        if let Some(t) = env_threads.filter(|t| !t.trim().is_empty()) {
            values.insert("threads".into(), t);
        }
        if let Some(path) = config {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.to_path_buf(),
                source: e,
            })?;
            values.extend(parse_config_text(&text, &path.display().to_string())?);
        }
        for (k, v) in flags {
            debug_assert!(KEYS.contains(k), "{k}");
            if let Some(v) = v {
                values.insert((*k).to_string(), v.clone());
            }
        }
        let mut s = Settings::default();
        for (k, v) in &values {
            let num = || -> Result<f64, Error> {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| config_err(format!("{k} = {v:?} is not a number")))
            };
            match k.as_str() {
                "score_threshold" => s.score_threshold = num()?,
                "nms_iou" => s.nms_iou = num()?,
                "input_size" => s.input_size = parse_size(v)?,
                "seed" => {
                    s.seed = v
                        .parse()
                        .map_err(|_| config_err(format!("seed {v:?} is not an unsigned integer")))?
                }
                "threads" => {
                    let n: usize = v
                        .trim()
                        .parse()
                        .ok()
                        .filter(|&n| n > 0)
                        .ok_or_else(|| config_err(format!("threads {v:?} is not a positive integer")))?;
                    s.threads = Some(n);
                }
                "classes" => s.classes = ClassMap::parse(v)?,
                "rescale_lo" => s.augment.rescale_lo = num()?,
                "rescale_hi" => s.augment.rescale_hi = num()?,
                "gamma" => s.augment.gamma = num()?,
                "gamma_gain" => s.augment.gamma_gain = num()?,
                "sigmoid_cutoff" => s.augment.sigmoid_cutoff = num()?,
                "sigmoid_gain" => s.augment.sigmoid_gain = num()?,
                "noise_mean" => s.augment.noise_mean = num()?,
                "noise_std" => s.augment.noise_std = num()?,
                other => return Err(config_err(format!("unknown key {other:?}"))),
            }
        }
        s.augment.seed = s.seed;
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<(), Error> {
        for (name, v) in [("score_threshold", self.score_threshold), ("nms_iou", self.nms_iou)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(config_err(format!("{name} {v} outside [0, 1]")));
            }
        }
        self.anchor_config().validate()?;
        self.augment.validate()
    }

    pub fn anchor_config(&self) -> AnchorConfig {
        AnchorConfig::with_input_size(self.input_size.0, self.input_size.1)
    }

    pub fn detect_config(&self) -> DetectConfig {
        DetectConfig {
            anchors: self.anchor_config(),
            score_threshold: self.score_threshold,
            nms: NmsConfig {
                iou_threshold: self.nms_iou,
                ..NmsConfig::default()
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, "# thresholds\nscore_threshold = 0.5\nthreads=3\nseed = 9 # trailing\n").unwrap();
        let s = Settings::resolve(Some(&path), Some("7".into()), &[("score_threshold", Some("0.6".into()))]).unwrap();
        assert_eq!(s.score_threshold, 0.6);
        assert_eq!(s.threads, Some(3));
        assert_eq!(s.seed, 9);
        assert_eq!(s.augment.seed, 9);
        let s = Settings::resolve(None, Some("7".into()), &[]).unwrap();
        assert_eq!(s.threads, Some(7));
        assert_eq!(s, Settings { threads: Some(7), ..Settings::default() });
    }

    #[test]
    fn rejects_bad_values() {
        let conf = |pairs: &[(&'static str, &str)]| {
            let flags: Vec<_> = pairs.iter().map(|(k, v)| (*k, Some(v.to_string()))).collect();
            Settings::resolve(None, None, &flags)
        };
        assert!(conf(&[("score_threshold", "1.5")]).is_err());
        assert!(conf(&[("input_size", "100")]).is_err());
        assert!(conf(&[("input_size", "64x96")]).is_ok());
        assert!(conf(&[("threads", "0")]).is_err());
        assert!(conf(&[("gamma", "-1")]).is_err());
        assert!(parse_config_text("colour = red", "c").is_err());
        assert!(parse_config_text("seed", "c").is_err());
    }
}
