//! Detection loss terms with closed-form gradients: sigmoid focal loss for
//! classification and smooth-L1 for box regression.

use crate::error::{Error, Result};
use crate::geometry::{encode_box, AnchorAssignment, AnchorLabel, BBox, ClassId, LabeledBox, RegressionDeltas};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    /// Weight of the positive class in (0, 1).
    pub alpha: f64,
    /// Focusing exponent, >= 0.
    pub gamma: f64,
    /// Smooth-L1 transition point, > 0.
    pub beta: f64,
    /// Weight of the regression term, >= 0.
    pub box_weight: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            alpha: 0.25,
            gamma: 2.0,
            beta: 1.0,
            box_weight: 1.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha {} not in (0, 1)", self.alpha)));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::Config(format!("gamma {} is negative", self.gamma)));
        }
        if !(self.beta > 0.0) {
            return Err(Error::Config(format!("beta {} is not positive", self.beta)));
        }
        if !(self.box_weight >= 0.0) {
            return Err(Error::Config(format!("box_weight {} is negative", self.box_weight)));
        }
        Ok(())
    }
}

/// A scalar loss and its derivative with respect to one input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarLoss {
    pub value: f64,
    pub grad: f64,
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Sigmoid focal loss of one logit against a binary target.
///
/// With `z = logit` for a positive target and `-logit` otherwise,
/// `p_t = sigmoid(z)` and the loss is `-alpha_t (1 - p_t)^gamma ln p_t`.
/// `ln p_t` is evaluated as `-softplus(-z)` and `1 - p_t` as `sigmoid(-z)`,
/// so neither saturates for large logits.
pub fn focal_loss(logit: f64, target: bool, cfg: &LossConfig) -> ScalarLoss {
    let (z, sign, alpha_t) = if target {
        (logit, 1.0, cfg.alpha)
    } else {
        (-logit, -1.0, 1.0 - cfg.alpha)
    };
    let log_pt = -softplus(-z);
    let pt = log_pt.exp();
    let one_minus_pt = (-softplus(z)).exp();
    let modulator = if cfg.gamma == 0.0 {
        1.0
    } else {
        one_minus_pt.powf(cfg.gamma)
    };
    let value = -alpha_t * modulator * log_pt;
    // d/dz = alpha_t (1-p)^gamma (gamma p ln p - (1-p))
    let dz = alpha_t * modulator * (cfg.gamma * pt * log_pt - one_minus_pt);
    ScalarLoss {
        value,
        grad: sign * dz,
    }
}

/// Smooth-L1: quadratic inside `|x| < beta`, linear outside.
pub fn smooth_l1(x: f64, beta: f64) -> ScalarLoss {
    if x.abs() < beta {
        ScalarLoss {
            value: 0.5 * x * x / beta,
            grad: x / beta,
        }
    } else {
        ScalarLoss {
            value: x.abs() - 0.5 * beta,
            grad: x.signum(),
        }
    }
}

/// Per-anchor training target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnchorTarget {
    Background,
    Ignore,
    Object {
        class: ClassId,
        deltas: RegressionDeltas,
    },
}

/// Resolves an assignment into per-anchor class and box targets.
pub fn encode_targets(
    anchors: &[BBox],
    gt: &[LabeledBox],
    assignment: &AnchorAssignment,
) -> Result<Vec<AnchorTarget>> {
    if assignment.labels.len() != anchors.len() {
        return Err(Error::shape(
            "encode_targets",
            format!("{} labels for {} anchors", assignment.labels.len(), anchors.len()),
        ));
    }
    anchors
        .iter()
        .zip(&assignment.labels)
        .map(|(anchor, label)| match *label {
            AnchorLabel::Negative => Ok(AnchorTarget::Background),
            AnchorLabel::Ignore => Ok(AnchorTarget::Ignore),
            AnchorLabel::Positive { gt: g } => {
                let b = gt.get(g).ok_or_else(|| {
                    Error::InvalidInput(format!("assignment references ground truth {g}"))
                })?;
                Ok(AnchorTarget::Object {
                    class: b.class,
                    deltas: encode_box(anchor, &b.bbox),
                })
            }
        })
        .collect()
}

/// Total detection loss with gradients for every logit and delta.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionLoss {
    pub value: f64,
    pub classification: f64,
    pub regression: f64,
    pub num_positive: usize,
    /// Same layout as the logits input.
    pub grad_logits: Vec<f64>,
    /// Same layout as the deltas input.
    pub grad_deltas: Vec<f64>,
}

/// Classification: focal loss over every class of every non-ignored anchor.
/// Regression: smooth-L1 over the four deltas of each positive anchor. Both
/// are divided by the positive count (at least 1), and the total is
/// `classification + box_weight * regression`.
///
/// `logits` is `N * num_classes`, `deltas` is `N * 4`, laid out anchor-major.
pub fn detection_loss(
    logits: &[f64],
    deltas: &[f64],
    targets: &[AnchorTarget],
    num_classes: usize,
    cfg: &LossConfig,
) -> Result<DetectionLoss> {
    cfg.validate()?;
    let n = targets.len();
    if logits.len() != n * num_classes || deltas.len() != n * 4 {
        return Err(Error::shape(
            "detection_loss",
            format!(
                "{} logits and {} deltas for {n} anchors x {num_classes} classes",
                logits.len(),
                deltas.len()
            ),
        ));
    }
    let num_positive = targets
        .iter()
        .filter(|t| matches!(t, AnchorTarget::Object { .. }))
        .count();
    let norm = num_positive.max(1) as f64;

    let mut grad_logits = vec![0.0; logits.len()];
    let mut grad_deltas = vec![0.0; deltas.len()];
    let (mut cls, mut reg) = (0.0, 0.0);
    for (i, target) in targets.iter().enumerate() {
        let positive_class = match target {
            AnchorTarget::Ignore => continue,
            AnchorTarget::Background => None,
            AnchorTarget::Object { class, deltas: t } => {
                for (j, &goal) in t.to_array().iter().enumerate() {
                    let l = smooth_l1(deltas[i * 4 + j] - goal, cfg.beta);
                    reg += l.value;
                    grad_deltas[i * 4 + j] = cfg.box_weight * l.grad / norm;
                }
                if class.index() >= num_classes {
                    return Err(Error::InvalidInput(format!(
                        "class {class} outside {num_classes} classes"
                    )));
                }
                Some(class.index())
            }
        };
        for k in 0..num_classes {
            let l = focal_loss(logits[i * num_classes + k], positive_class == Some(k), cfg);
            cls += l.value;
            grad_logits[i * num_classes + k] = l.grad / norm;
        }
    }
    let classification = cls / norm;
    let regression = reg / norm;
    Ok(DetectionLoss {
        value: classification + cfg.box_weight * regression,
        classification,
        regression,
        num_positive,
        grad_logits,
        grad_deltas,
    })
}
