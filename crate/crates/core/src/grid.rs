use alloc::vec;
use alloc::vec::Vec;

use crate::error::{shape_err, Result};

/// Row-major 2-D map of `f64` values.
///
/// Maps are kept in double precision: they are small (feature or image
/// resolution) and the channel sums that produce them can reach magnitudes
/// where single precision loses absolute accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl Grid {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(shape_err!(
                "grid dimensions must be nonzero, got {height}x{width}"
            ));
        }
        if values.len() != height * width {
            return Err(shape_err!(
                "grid {height}x{width} needs {} values, got {}",
                height * width,
                values.len()
            ));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self {
            height,
            width,
            values: vec![value; height * width],
        }
    }

    /// Builds a grid from nested rows. Panics on ragged input; meant for fixtures.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(height * width);
        for row in rows {
            assert_eq!(row.as_ref().len(), width, "ragged rows");
            values.extend_from_slice(row.as_ref());
        }
        Self::new(height, width, values).expect("valid grid rows")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.width..(row + 1) * self.width]
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `(row, col)` of the first maximum in row-major order.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        (best / self.width, best % self.width)
    }

    pub fn is_all_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            height: self.height,
            width: self.width,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn relu(&self) -> Self {
        self.map(|v| if v > 0.0 { v } else { 0.0 })
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }
}
