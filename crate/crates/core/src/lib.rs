//! Numeric core for class activation maps.
//!
//! Computes plain feature aggregation, gradient-weighted CAM and the globally
//! guided variant from feature and gradient stacks, post-processes raw maps into
//! normalized saliency at input resolution, and evaluates saliency maps with
//! zone drop/increase, pointing game, Dice/IoU and insertion/deletion curves.
//!
//! The crate is `no_std` and only needs `alloc`. Anything touching files, model
//! graphs or the command line lives in the `guidecam` companion crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod annotation;
pub mod cam;
pub mod curve;
pub mod error;
pub mod evaluate;
pub mod filter;
pub mod grid;
pub mod metrics;
pub mod postprocess;
pub mod scorer;
pub mod tensor;

pub use annotation::{Annotation, BoundingBox, LabelMap, IGNORE_LABEL};
pub use cam::{
    aggregate_features, channel_weights, gradcam, guidance_map, guided_cam, saliency,
    ChannelWeights, GuidanceMap, Method, RawSaliency,
};
pub use curve::{insertion_deletion, Baseline, Curve, CurveMode};
pub use error::{Error, Result};
pub use grid::Grid;
pub use metrics::{
    binarize, dice, drop_fraction, increase_indicator, iou, pointing_game, soft_mask, BinaryMask,
    PointingOutcome, Zone,
};
pub use postprocess::{postprocess, Interpolation, PostprocessConfig, SaliencyMap};
pub use scorer::{softmax, ClassScore, Scorer};
pub use tensor::{FeatureStack, GradientStack, Stack, Tensor};
