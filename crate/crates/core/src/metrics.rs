//! Zone masking, drop/increase, pointing game and overlap metrics.

use alloc::format;
use alloc::vec::Vec;

use crate::annotation::Annotation;
use crate::error::{shape_err, Error, Result};
use crate::postprocess::SaliencyMap;
use crate::tensor::Tensor;

/// Image region kept when re-querying the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Zone {
    /// Keep the salient region: `image ⊙ S`.
    Salient,
    /// Keep everything but the salient region: `image ⊙ (1 − S)`.
    Context,
}

/// Soft-masks every channel of a `C×H×W` image by the saliency map.
pub fn soft_mask(image: &Tensor, saliency: &SaliencyMap, zone: Zone) -> Result<Tensor> {
    let (c, h, w) = image.chw()?;
    if saliency.dims() != (h, w) {
        let (sh, sw) = saliency.dims();
        return Err(shape_err!("saliency {sh}x{sw} vs image {h}x{w}"));
    }
    let s = saliency.grid().values();
    let mut data = Vec::with_capacity(image.len());
    for plane in image.data().chunks_exact(h * w).take(c) {
        data.extend(plane.iter().zip(s).map(|(&x, &sv)| {
            let factor = match zone {
                Zone::Salient => sv,
                Zone::Context => 1.0 - sv,
            };
            (f64::from(x) * factor) as f32
        }));
    }
    Tensor::new(image.shape().to_vec(), data)
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Range(format!(
            "{name} probability {p} outside [0, 1]"
        )))
    }
}

/// Relative confidence loss `max(0, orig − masked) / orig`; 0 when `orig == 0`.
pub fn drop_fraction(orig_prob: f64, masked_prob: f64) -> Result<f64> {
    check_probability("original", orig_prob)?;
    check_probability("masked", masked_prob)?;
    if orig_prob == 0.0 {
        return Ok(0.0);
    }
    Ok(((orig_prob - masked_prob).max(0.0) / orig_prob).min(1.0))
}

/// 1 when masking strictly raised the class probability, else 0.
pub fn increase_indicator(orig_prob: f64, masked_prob: f64) -> Result<u8> {
    check_probability("original", orig_prob)?;
    check_probability("masked", masked_prob)?;
    Ok(u8::from(masked_prob > orig_prob))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PointingOutcome {
    pub hit: bool,
    /// The saliency map was identically zero, so no peak exists; counted as a miss.
    pub degenerate: bool,
    /// `(row, col)` of the peak used for the decision.
    pub peak: (usize, usize),
}

/// Hit when the saliency peak lies on the target class's annotated region.
pub fn pointing_game(
    saliency: &SaliencyMap,
    annotation: &Annotation,
    target_class: u32,
) -> Result<PointingOutcome> {
    if !annotation.contains_class(target_class) {
        return Err(Error::Annotation(format!(
            "annotation has no region of class {target_class}"
        )));
    }
    if let Annotation::SegMask(mask) = annotation {
        if mask.dims() != saliency.dims() {
            return Err(shape_err!(
                "mask {:?} vs saliency {:?}",
                mask.dims(),
                saliency.dims()
            ));
        }
    }
    let peak = saliency.grid().argmax();
    if saliency.grid().is_all_zero() {
        return Ok(PointingOutcome {
            hit: false,
            degenerate: true,
            peak,
        });
    }
    let hit = annotation.covers(peak.0, peak.1, target_class);
    Ok(PointingOutcome {
        hit,
        degenerate: false,
        peak,
    })
}

/// `Hits / (Hits + Misses)`; `None` for an empty collection.
pub fn pointing_accuracy(outcomes: &[PointingOutcome]) -> Option<f64> {
    if outcomes.is_empty() {
        return None;
    }
    let hits = outcomes.iter().filter(|o| o.hit).count();
    Some(hits as f64 / outcomes.len() as f64)
}

/// Boolean per-pixel mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(shape_err!(
                "mask {height}x{width} cannot hold {} bits",
                bits.len()
            ));
        }
        Ok(Self {
            height,
            width,
            bits,
        })
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let bits = (0..height * width)
            .map(|i| f(i / width, i % width))
            .collect();
        Self {
            height,
            width,
            bits,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Clears every pixel where `exclude` is set.
    pub fn without(&self, exclude: &BinaryMask) -> Result<Self> {
        check_dims(self, exclude)?;
        let bits = self
            .bits
            .iter()
            .zip(&exclude.bits)
            .map(|(&a, &e)| a && !e)
            .collect();
        Ok(Self {
            height: self.height,
            width: self.width,
            bits,
        })
    }
}

/// Pseudo-segmentation: `saliency ≥ tau`, with `tau` strictly inside `(0, 1)`.
pub fn binarize(saliency: &SaliencyMap, tau: f64) -> Result<BinaryMask> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Config(format!(
            "threshold must lie in (0, 1), got {tau}"
        )));
    }
    let (h, w) = saliency.dims();
    let bits = saliency.grid().values().iter().map(|&v| v >= tau).collect();
    BinaryMask::new(h, w, bits)
}

fn check_dims(a: &BinaryMask, b: &BinaryMask) -> Result<()> {
    if a.dims() == b.dims() {
        Ok(())
    } else {
        Err(shape_err!("mask {:?} vs mask {:?}", a.dims(), b.dims()))
    }
}

fn overlap_counts(a: &BinaryMask, b: &BinaryMask) -> (usize, usize, usize) {
    let inter = a.bits.iter().zip(&b.bits).filter(|(&x, &y)| x && y).count();
    (inter, a.count(), b.count())
}

/// `2|A∩B| / (|A|+|B|)`; 1 when both masks are empty.
pub fn dice(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    check_dims(pred, gt)?;
    let (inter, na, nb) = overlap_counts(pred, gt);
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (na + nb) as f64)
}

/// `|A∩B| / |A∪B|`; 1 when both masks are empty.
pub fn iou(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    check_dims(pred, gt)?;
    let (inter, na, nb) = overlap_counts(pred, gt);
    let union = na + nb - inter;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}
