//! Ground-truth annotations used by the pointing game and Dice/IoU.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Label value for pixels excluded from evaluation (VOC convention).
pub const IGNORE_LABEL: u8 = 255;

/// Per-pixel class map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    labels: Vec<u8>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != height * width || height == 0 || width == 0 {
            return Err(Error::Annotation(format!(
                "label map {height}x{width} cannot hold {} labels",
                labels.len()
            )));
        }
        Ok(Self {
            height,
            width,
            labels,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.labels[row * self.width + col]
    }

    /// Sorted distinct labels, excluding [`IGNORE_LABEL`].
    pub fn classes(&self) -> Vec<u8> {
        let mut seen = [false; 256];
        for &l in &self.labels {
            seen[l as usize] = true;
        }
        (0..=254u8).filter(|&l| seen[l as usize]).collect()
    }
}

/// Axis-aligned box in pixel coordinates; `x` is the column, `y` the row.
///
/// A pixel `(row, col)` is inside when `x0 ≤ col ≤ x1` and `y0 ≤ row ≤ y1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingBox {
    pub class: u32,
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl BoundingBox {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        let (r, c) = (row as u64, col as u64);
        u64::from(self.x0) <= c
            && c <= u64::from(self.x1)
            && u64::from(self.y0) <= r
            && r <= u64::from(self.y1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Annotation {
    SegMask(LabelMap),
    BBoxes(Vec<BoundingBox>),
}

impl Annotation {
    /// Checks bounds and class indices against an image of `dims` and a label
    /// space of `num_classes` classes.
    pub fn validate(&self, dims: (usize, usize), num_classes: u32) -> Result<()> {
        let (h, w) = dims;
        match self {
            Annotation::SegMask(mask) => {
                if mask.dims() != dims {
                    return Err(Error::Annotation(format!(
                        "mask is {}x{}, image is {h}x{w}",
                        mask.height, mask.width
                    )));
                }
                if let Some(&bad) = mask
                    .labels
                    .iter()
                    .find(|&&l| l != IGNORE_LABEL && u32::from(l) >= num_classes)
                {
                    return Err(Error::Annotation(format!(
                        "mask label {bad} outside the {num_classes}-class label space"
                    )));
                }
            }
            Annotation::BBoxes(boxes) => {
                for b in boxes {
                    if b.x0 >= b.x1 || b.y0 >= b.y1 {
                        return Err(Error::Annotation(format!(
                            "degenerate box ({}, {}, {}, {})",
                            b.x0, b.y0, b.x1, b.y1
                        )));
                    }
                    if b.x1 as usize >= w || b.y1 as usize >= h {
                        return Err(Error::Annotation(format!(
                            "box ({}, {}, {}, {}) exceeds {h}x{w} image",
                            b.x0, b.y0, b.x1, b.y1
                        )));
                    }
                    if b.class >= num_classes {
                        return Err(Error::Annotation(format!(
                            "box class {} outside the {num_classes}-class label space",
                            b.class
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn contains_class(&self, class: u32) -> bool {
        match self {
            Annotation::SegMask(mask) => {
                class != u32::from(IGNORE_LABEL)
                    && mask.labels.iter().any(|&l| u32::from(l) == class)
            }
            Annotation::BBoxes(boxes) => boxes.iter().any(|b| b.class == class),
        }
    }

    /// Whether pixel `(row, col)` belongs to `class`.
    pub fn covers(&self, row: usize, col: usize, class: u32) -> bool {
        match self {
            Annotation::SegMask(mask) => u32::from(mask.get(row, col)) == class,
            Annotation::BBoxes(boxes) => boxes
                .iter()
                .any(|b| b.class == class && b.contains(row, col)),
        }
    }
}
