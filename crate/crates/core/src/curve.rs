//! Insertion and deletion curves.
//!
//! Pixels are ranked by descending saliency with ties broken by row-major index.
//! Deletion starts from the image and progressively swaps top-ranked pixels for
//! the baseline; insertion starts from the baseline and restores them.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{shape_err, Error, Result};
use crate::filter;
use crate::postprocess::SaliencyMap;
use crate::scorer::Scorer;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveMode {
    Insertion,
    Deletion,
}

/// Image that removed pixels are replaced with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Baseline {
    Zero,
    /// Gaussian-blurred copy of the image, `sigma` in input pixels.
    Blur {
        sigma: f64,
    },
}

impl Baseline {
    pub const DEFAULT_BLUR_SIGMA: f64 = 10.0;

    pub fn render(&self, image: &Tensor) -> Result<Tensor> {
        match *self {
            Baseline::Zero => Ok(Tensor::zeros(image.shape().to_vec())),
            Baseline::Blur { sigma } => {
                if !(sigma.is_finite() && sigma >= 0.0) {
                    return Err(Error::Config(format!(
                        "blur sigma must be ≥ 0, got {sigma}"
                    )));
                }
                filter::blur_image(image, sigma)
            }
        }
    }
}

/// Class probability sampled at evenly spaced fractions of modified pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub fractions: Vec<f64>,
    pub scores: Vec<f64>,
    pub auc: f64,
}

/// Trapezoidal integral of `ys` over `xs`.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0)
        .sum()
}

/// Pixel indices ordered by descending saliency, ties by row-major index.
pub fn saliency_ranking(saliency: &SaliencyMap) -> Vec<usize> {
    let values = saliency.grid().values();
    let mut order: Vec<usize> = (0..values.len()).collect();
    // stable sort keeps row-major order among equal values
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order
}

/// Number of modified pixels at step `i` of `steps`, rounded half up.
pub fn pixels_at_step(i: usize, steps: usize, total: usize) -> usize {
    (2 * i * total + steps) / (2 * steps)
}

pub fn insertion_deletion<S: Scorer + ?Sized>(
    image: &Tensor,
    saliency: &SaliencyMap,
    scorer: &mut S,
    target_class: usize,
    mode: CurveMode,
    steps: usize,
    baseline: &Baseline,
) -> Result<Curve> {
    if steps < 2 {
        return Err(Error::Config(format!(
            "curves need at least 2 steps, got {steps}"
        )));
    }
    let (c, h, w) = image.chw()?;
    if saliency.dims() != (h, w) {
        return Err(shape_err!(
            "saliency {:?} vs image {h}x{w}",
            saliency.dims()
        ));
    }
    let base = baseline.render(image)?;
    let (mut current, source) = match mode {
        CurveMode::Deletion => (image.clone(), base),
        CurveMode::Insertion => (base, image.clone()),
    };
    let plane = h * w;
    let order = saliency_ranking(saliency);

    let mut fractions = Vec::with_capacity(steps + 1);
    let mut scores = Vec::with_capacity(steps + 1);
    let mut applied = 0;
    for i in 0..=steps {
        let upto = pixels_at_step(i, steps, plane);
        for &p in &order[applied..upto] {
            for ch in 0..c {
                current.data_mut()[ch * plane + p] = source.data()[ch * plane + p];
            }
        }
        applied = upto;
        fractions.push(i as f64 / steps as f64);
        scores.push(scorer.probability(&current, target_class)?);
    }
    let auc = trapezoid(&fractions, &scores);
    Ok(Curve {
        fractions,
        scores,
        auc,
    })
}
