use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Class logits from one forward pass and their softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassScore {
    pub logits: Vec<f32>,
    pub probabilities: Vec<f64>,
}

impl ClassScore {
    pub fn from_logits(logits: Vec<f32>) -> Self {
        let probabilities = softmax(&logits);
        Self {
            logits,
            probabilities,
        }
    }

    pub fn probability(&self, class: usize) -> Result<f64> {
        self.probabilities.get(class).copied().ok_or_else(|| {
            Error::Range(format!(
                "class {class} out of {} scores",
                self.probabilities.len()
            ))
        })
    }

    pub fn top1(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probabilities.iter().enumerate() {
            if p > self.probabilities[best] {
                best = i;
            }
        }
        best
    }
}

/// Numerically stable softmax, evaluated in `f64`.
pub fn softmax(logits: &[f32]) -> Vec<f64> {
    let max = logits
        .iter()
        .map(|&l| f64::from(l))
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits
        .iter()
        .map(|&l| libm::exp(f64::from(l) - max))
        .collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Forward-only model access.
///
/// Implementations must be deterministic: identical input bytes give identical
/// logits. Instances need not be shareable across threads; parallel callers
/// build one scorer per worker.
pub trait Scorer {
    fn num_classes(&self) -> usize;

    /// Scores a single preprocessed `3×H×W` image.
    fn score(&mut self, image: &Tensor) -> Result<ClassScore>;

    fn probability(&mut self, image: &Tensor, class: usize) -> Result<f64> {
        self.score(image)?.probability(class)
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }

    fn score(&mut self, image: &Tensor) -> Result<ClassScore> {
        (**self).score(image)
    }
}

impl<S: Scorer + ?Sized> Scorer for &mut S {
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }

    fn score(&mut self, image: &Tensor) -> Result<ClassScore> {
        (**self).score(image)
    }
}

/// Scorer backed by a closure returning logits; handy as a test double.
pub struct FnScorer<F> {
    num_classes: usize,
    f: F,
}

impl<F> FnScorer<F>
where
    F: FnMut(&Tensor) -> Result<Vec<f32>>,
{
    pub fn new(num_classes: usize, f: F) -> Self {
        Self { num_classes, f }
    }
}

impl<F> Scorer for FnScorer<F>
where
    F: FnMut(&Tensor) -> Result<Vec<f32>>,
{
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn score(&mut self, image: &Tensor) -> Result<ClassScore> {
        let logits = (self.f)(image)?;
        if logits.len() != self.num_classes {
            return Err(Error::Scorer(format!(
                "expected {} logits, got {}",
                self.num_classes,
                logits.len()
            )));
        }
        Ok(ClassScore::from_logits(logits))
    }
}
