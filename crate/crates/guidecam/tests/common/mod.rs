#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use guidecam::bundle::{BundleParts, ExtractionBundle, Preprocessing};
use guidecam_core::Tensor;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(rel)
}

/// Deterministic pseudo-random values in [-1, 1).
pub fn ramp(n: usize, seed: u32) -> Vec<f32> {
    let mut x = seed.wrapping_mul(2_654_435_761).wrapping_add(1);
    (0..n)
        .map(|_| {
            x ^= x << 13;
            x ^= x >> 17;
            x ^= x << 5;
            (x % 2000) as f32 / 1000.0 - 1.0
        })
        .collect()
}

pub fn tensor(shape: &[usize], seed: u32) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), ramp(n, seed)).unwrap()
}

pub fn parts(k: usize, fh: usize, fw: usize, ih: usize, iw: usize, classes: usize) -> BundleParts {
    BundleParts {
        image: tensor(&[3, ih, iw], 1),
        features: tensor(&[k, fh, fw], 2),
        gradients: tensor(&[k, fh, fw], 3),
        class_scores: tensor(&[classes], 4),
        class_index: classes / 2,
        layer_name: "layer4".into(),
        model_id: "synthetic".into(),
        preprocessing: Preprocessing::default(),
        annotation_class: None,
        extra: BTreeMap::new(),
    }
}

pub fn bundle(
    k: usize,
    fh: usize,
    fw: usize,
    ih: usize,
    iw: usize,
    classes: usize,
) -> ExtractionBundle {
    ExtractionBundle::new(parts(k, fh, fw, ih, iw, classes)).unwrap()
}
