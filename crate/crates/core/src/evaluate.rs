//! Per-image evaluation and the deterministic mean reduction over images.

use crate::annotation::{Annotation, IGNORE_LABEL};
use crate::cam::{saliency, Method};
use crate::curve::{insertion_deletion, Baseline, CurveMode};
use crate::error::{Error, Result};
use crate::metrics::{
    binarize, dice, drop_fraction, increase_indicator, iou, pointing_game, soft_mask, BinaryMask,
    Zone,
};
use crate::postprocess::{postprocess, PostprocessConfig, SaliencyMap};
use crate::scorer::Scorer;
use crate::tensor::{FeatureStack, GradientStack, Tensor};

/// Settings shared by every image of an evaluation run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub smoothing_sigma: f64,
    pub smoothing_kernel: usize,
    /// Binarization threshold for Dice/IoU.
    pub tau: f64,
    /// Curve resolution; each curve has `steps + 1` samples.
    pub steps: usize,
    pub insertion_baseline: Baseline,
    pub deletion_baseline: Baseline,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            smoothing_sigma: PostprocessConfig::DEFAULT_SIGMA,
            smoothing_kernel: PostprocessConfig::DEFAULT_KERNEL,
            tau: 0.5,
            steps: 100,
            insertion_baseline: Baseline::Blur {
                sigma: Baseline::DEFAULT_BLUR_SIGMA,
            },
            deletion_baseline: Baseline::Zero,
        }
    }
}

impl EvalConfig {
    pub fn postprocess_for(&self, height: usize, width: usize) -> PostprocessConfig {
        PostprocessConfig::new(height, width)
            .with_smoothing(self.smoothing_sigma, self.smoothing_kernel)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Config(alloc::format!(
                "tau must lie in (0, 1), got {}",
                self.tau
            )));
        }
        if self.steps < 2 {
            return Err(Error::Config(alloc::format!(
                "steps must be ≥ 2, got {}",
                self.steps
            )));
        }
        self.postprocess_for(1, 1).validate((1, 1))?;
        for b in [&self.insertion_baseline, &self.deletion_baseline] {
            if let Baseline::Blur { sigma } = b {
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return Err(Error::Config(alloc::format!(
                        "baseline blur sigma must be > 0, got {sigma}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Everything needed to evaluate one image.
#[derive(Debug, Clone, Copy)]
pub struct ImageInputs<'a> {
    pub image: &'a Tensor,
    pub features: &'a FeatureStack,
    pub gradients: &'a GradientStack,
    /// Model class whose probability is tracked.
    pub class_index: usize,
    /// Ground truth and the annotation class that stands for the target.
    pub annotation: Option<(&'a Annotation, u32)>,
}

/// Metric values for a single image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub drop_salience: f64,
    /// 1 when the salient-zone image scored higher than the original, else 0.
    pub increase_salience: f64,
    pub drop_context: f64,
    pub increase_context: f64,
    /// `None` without an annotation.
    pub pointing_hit: Option<bool>,
    /// Set when the saliency map was identically zero.
    pub pointing_degenerate: bool,
    /// Only for segmentation-mask annotations.
    pub dice: Option<f64>,
    pub iou: Option<f64>,
    pub insertion_auc: f64,
    pub deletion_auc: f64,
}

/// Computes the saliency map for `method` and every applicable metric.
///
/// Each zone costs exactly one forward pass; drop and increase for that zone
/// are both derived from it.
pub fn evaluate_image<S: Scorer + ?Sized>(
    inputs: &ImageInputs<'_>,
    method: Method,
    cfg: &EvalConfig,
    scorer: &mut S,
) -> Result<(SaliencyMap, ImageRecord)> {
    cfg.validate()?;
    let (_, h, w) = inputs.image.chw()?;
    let raw = saliency(inputs.features, inputs.gradients, method)?;
    let map = postprocess(&raw, &cfg.postprocess_for(h, w))?;
    let class = inputs.class_index;

    let orig = scorer.probability(inputs.image, class)?;
    let salient = scorer.probability(&soft_mask(inputs.image, &map, Zone::Salient)?, class)?;
    let context = scorer.probability(&soft_mask(inputs.image, &map, Zone::Context)?, class)?;

    let mut record = ImageRecord {
        drop_salience: drop_fraction(orig, salient)?,
        increase_salience: f64::from(increase_indicator(orig, salient)?),
        drop_context: drop_fraction(orig, context)?,
        increase_context: f64::from(increase_indicator(orig, context)?),
        pointing_hit: None,
        pointing_degenerate: false,
        dice: None,
        iou: None,
        insertion_auc: 0.0,
        deletion_auc: 0.0,
    };

    if let Some((annotation, target)) = inputs.annotation {
        let outcome = pointing_game(&map, annotation, target)?;
        record.pointing_hit = Some(outcome.hit);
        record.pointing_degenerate = outcome.degenerate;
        if let Annotation::SegMask(labels) = annotation {
            let (mh, mw) = labels.dims();
            let gt = BinaryMask::from_fn(mh, mw, |r, c| u32::from(labels.get(r, c)) == target);
            let ignore = BinaryMask::from_fn(mh, mw, |r, c| labels.get(r, c) == IGNORE_LABEL);
            let pred = binarize(&map, cfg.tau)?.without(&ignore)?;
            record.dice = Some(dice(&pred, &gt)?);
            record.iou = Some(iou(&pred, &gt)?);
        }
    }

    record.insertion_auc = insertion_deletion(
        inputs.image,
        &map,
        scorer,
        class,
        CurveMode::Insertion,
        cfg.steps,
        &cfg.insertion_baseline,
    )?
    .auc;
    record.deletion_auc = insertion_deletion(
        inputs.image,
        &map,
        scorer,
        class,
        CurveMode::Deletion,
        cfg.steps,
        &cfg.deletion_baseline,
    )?
    .auc;

    Ok((map, record))
}

/// Arithmetic means over images. Optional metrics average only the images
/// that have them and stay `None` when none do.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub count: usize,
    pub drop_salience: f64,
    pub increase_salience: f64,
    pub drop_context: f64,
    pub increase_context: f64,
    /// Pointing accuracy `Hits / (Hits + Misses)`.
    pub pointing_hit: Option<f64>,
    pub dice: Option<f64>,
    pub iou: Option<f64>,
    pub insertion_auc: f64,
    pub deletion_auc: f64,
}

/// Sequential reduction in slice order. `None` for an empty slice.
pub fn aggregate(records: &[ImageRecord]) -> Option<Aggregate> {
    if records.is_empty() {
        return None;
    }
    let mean =
        |f: &dyn Fn(&ImageRecord) -> f64| records.iter().map(f).sum::<f64>() / records.len() as f64;
    let mean_opt = |f: &dyn Fn(&ImageRecord) -> Option<f64>| {
        let (sum, n) = records
            .iter()
            .filter_map(f)
            .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        (n > 0).then(|| sum / n as f64)
    };
    Some(Aggregate {
        count: records.len(),
        drop_salience: mean(&|r| r.drop_salience),
        increase_salience: mean(&|r| r.increase_salience),
        drop_context: mean(&|r| r.drop_context),
        increase_context: mean(&|r| r.increase_context),
        pointing_hit: mean_opt(&|r| r.pointing_hit.map(|h| if h { 1.0 } else { 0.0 })),
        dice: mean_opt(&|r| r.dice),
        iou: mean_opt(&|r| r.iou),
        insertion_auc: mean(&|r| r.insertion_auc),
        deletion_auc: mean(&|r| r.deletion_auc),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(drop: f64, hit: Option<bool>, dice: Option<f64>) -> ImageRecord {
        ImageRecord {
            drop_salience: drop,
            increase_salience: 1.0,
            drop_context: 0.5,
            increase_context: 0.0,
            pointing_hit: hit,
            pointing_degenerate: false,
            dice,
            iou: dice,
            insertion_auc: 0.25,
            deletion_auc: drop,
        }
    }

    #[test]
    fn empty_has_no_aggregate() {
        assert_eq!(aggregate(&[]), None);
    }

    #[test]
    fn means_over_records() {
        let agg = aggregate(&[
            record(0.2, Some(true), None),
            record(0.6, Some(false), Some(0.5)),
        ])
        .unwrap();
        assert_eq!(agg.count, 2);
        assert!((agg.drop_salience - 0.4).abs() < 1e-15);
        assert_eq!(agg.pointing_hit, Some(0.5));
        assert_eq!(agg.dice, Some(0.5));
        assert_eq!(agg.increase_salience, 1.0);
    }

    #[test]
    fn optional_metrics_stay_none() {
        let agg = aggregate(&[record(0.2, None, None)]).unwrap();
        assert_eq!(agg.pointing_hit, None);
        assert_eq!(agg.dice, None);
    }

    #[test]
    fn config_validation() {
        assert!(EvalConfig::default().validate().is_ok());
        assert!(EvalConfig {
            tau: 1.0,
            ..EvalConfig::default()
        }
        .validate()
        .is_err());
        assert!(EvalConfig {
            steps: 1,
            ..EvalConfig::default()
        }
        .validate()
        .is_err());
    }
}
