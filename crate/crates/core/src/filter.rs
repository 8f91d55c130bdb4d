//! Separable Gaussian smoothing, min-max normalization and align-corners
//! bilinear resampling.
//!
//! Borders use reflect-101 mirroring (`dcb|abcd|cba`), repeated as needed when
//! the kernel radius exceeds the map size.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{shape_err, Error, Result};
use crate::grid::Grid;
use crate::tensor::Tensor;

/// Normalized 1-D Gaussian taps of odd length `size`.
pub fn gaussian_kernel(sigma: f64, size: usize) -> Result<Vec<f64>> {
    if size == 0 || size.is_multiple_of(2) {
        return Err(Error::Config(alloc::format!(
            "kernel size must be odd and ≥ 1, got {size}"
        )));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::Config(alloc::format!(
            "gaussian sigma must be > 0, got {sigma}"
        )));
    }
    let radius = (size / 2) as f64;
    let mut taps: Vec<f64> = (0..size)
        .map(|i| {
            let x = i as f64 - radius;
            libm::exp(-(x * x) / (2.0 * sigma * sigma))
        })
        .collect();
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);
    Ok(taps)
}

/// Kernel size covering ±3σ.
pub fn kernel_size_for_sigma(sigma: f64) -> usize {
    2 * (libm::ceil(3.0 * sigma) as usize) + 1
}

/// Maps a possibly out-of-range index into `0..n` by reflect-101 mirroring.
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

/// Convolves a row-major plane with `taps` along rows, then along columns.
fn convolve_separable(values: &[f64], height: usize, width: usize, taps: &[f64]) -> Vec<f64> {
    let radius = (taps.len() / 2) as isize;
    let mut horizontal = vec![0.0; values.len()];
    for r in 0..height {
        let row = &values[r * width..(r + 1) * width];
        for c in 0..width {
            horizontal[r * width + c] = taps
                .iter()
                .enumerate()
                .map(|(t, &k)| k * row[reflect_index(c as isize + t as isize - radius, width)])
                .sum();
        }
    }
    let mut out = vec![0.0; values.len()];
    for r in 0..height {
        for c in 0..width {
            out[r * width + c] = taps
                .iter()
                .enumerate()
                .map(|(t, &k)| {
                    k * horizontal
                        [reflect_index(r as isize + t as isize - radius, height) * width + c]
                })
                .sum();
        }
    }
    out
}

/// Gaussian smoothing of a 2-D map. `sigma == 0` returns the map unchanged.
pub fn smooth(grid: &Grid, sigma: f64, kernel_size: usize) -> Result<Grid> {
    if sigma == 0.0 {
        return Ok(grid.clone());
    }
    let taps = gaussian_kernel(sigma, kernel_size)?;
    let out = convolve_separable(grid.values(), grid.height(), grid.width(), &taps);
    Grid::new(grid.height(), grid.width(), out)
}

/// Gaussian blur applied independently to each channel of a `C×H×W` tensor,
/// with a ±3σ kernel.
pub fn blur_image(image: &Tensor, sigma: f64) -> Result<Tensor> {
    let (c, h, w) = image.chw()?;
    if sigma == 0.0 {
        return Ok(image.clone());
    }
    let taps = gaussian_kernel(sigma, kernel_size_for_sigma(sigma))?;
    let mut data = Vec::with_capacity(image.len());
    for plane in image.data().chunks_exact(h * w).take(c) {
        let values: Vec<f64> = plane.iter().map(|&v| f64::from(v)).collect();
        data.extend(
            convolve_separable(&values, h, w, &taps)
                .into_iter()
                .map(|v| v as f32),
        );
    }
    Tensor::new(image.shape().to_vec(), data)
}

/// Min-max rescales into `[0, 1]`.
///
/// An all-zero map stays zero. Any other constant map becomes all ones, so the
/// result always peaks at exactly 1 unless it is identically zero.
pub fn min_max_normalize(grid: &Grid) -> Grid {
    if grid.is_all_zero() {
        return grid.clone();
    }
    let (lo, hi) = (grid.min(), grid.max());
    let span = hi - lo;
    if span <= 0.0 {
        return Grid::filled(grid.height(), grid.width(), 1.0);
    }
    grid.map(|v| ((v - lo) / span).clamp(0.0, 1.0))
}

/// Bilinear resampling with the align-corners convention: corner pixels of the
/// source and destination coincide, so source coordinate `y·(h−1)/(H−1)`.
pub fn resize_bilinear(grid: &Grid, out_height: usize, out_width: usize) -> Result<Grid> {
    if out_height == 0 || out_width == 0 {
        return Err(shape_err!(
            "resize target must be nonempty, got {out_height}x{out_width}"
        ));
    }
    let (h, w) = grid.dims();
    let ys = align_corners_coords(h, out_height);
    let xs = align_corners_coords(w, out_width);
    let mut out = Vec::with_capacity(out_height * out_width);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let top = grid.get(y0, x0) * (1.0 - fx) + grid.get(y0, x1) * fx;
            let bottom = grid.get(y1, x0) * (1.0 - fx) + grid.get(y1, x1) * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    Grid::new(out_height, out_width, out)
}

fn align_corners_coords(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    (0..dst)
        .map(|i| {
            if src == 1 || dst == 1 {
                return (0, 0, 0.0);
            }
            // integer-exact numerator keeps grid-aligned samples exact
            let num = i * (src - 1);
            let den = dst - 1;
            let i0 = num / den;
            let frac = (num % den) as f64 / den as f64;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, frac)
        })
        .collect()
}
