use crate::cam::{Method, RawSaliency};
use crate::error::{Error, Result};
use crate::filter;
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    /// Bilinear, align-corners convention.
    #[default]
    Bilinear,
}

/// Smoothing and upsampling parameters applied to a raw map.
#[derive(Debug, Clone, PartialEq)]
pub struct PostprocessConfig {
    /// Gaussian std in feature-map pixels; `0` disables smoothing.
    pub smoothing_sigma: f64,
    /// Odd tap count of the smoothing kernel.
    pub smoothing_kernel: usize,
    /// `(height, width)` of the output map, normally the input image size.
    pub target_size: (usize, usize),
    pub interpolation: Interpolation,
}

impl PostprocessConfig {
    pub const DEFAULT_SIGMA: f64 = 1.0;
    pub const DEFAULT_KERNEL: usize = 5;

    /// Default smoothing (σ = 1, 5 taps) with the given output size.
    pub fn new(target_height: usize, target_width: usize) -> Self {
        Self {
            smoothing_sigma: Self::DEFAULT_SIGMA,
            smoothing_kernel: Self::DEFAULT_KERNEL,
            target_size: (target_height, target_width),
            interpolation: Interpolation::Bilinear,
        }
    }

    pub fn with_smoothing(mut self, sigma: f64, kernel: usize) -> Self {
        self.smoothing_sigma = sigma;
        self.smoothing_kernel = kernel;
        self
    }

    /// Checks the config against a raw map of `raw_dims`.
    pub fn validate(&self, raw_dims: (usize, usize)) -> Result<()> {
        if !(self.smoothing_sigma.is_finite() && self.smoothing_sigma >= 0.0) {
            return Err(Error::Config(alloc::format!(
                "smoothing sigma must be finite and ≥ 0, got {}",
                self.smoothing_sigma
            )));
        }
        if self.smoothing_kernel == 0 || self.smoothing_kernel.is_multiple_of(2) {
            return Err(Error::Config(alloc::format!(
                "smoothing kernel must be odd and ≥ 1, got {}",
                self.smoothing_kernel
            )));
        }
        let (th, tw) = self.target_size;
        if th < raw_dims.0 || tw < raw_dims.1 {
            return Err(Error::Config(alloc::format!(
                "target size {th}x{tw} is smaller than the {}x{} map",
                raw_dims.0,
                raw_dims.1
            )));
        }
        Ok(())
    }
}

/// Final per-pixel relevance at input resolution, with values in `[0, 1]`
/// peaking at exactly 1 unless the map is identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    grid: Grid,
    source: Method,
}

impl SaliencyMap {
    /// Wraps an already normalized grid. Values are clamped into `[0, 1]`.
    pub fn from_normalized(grid: Grid, source: Method) -> Self {
        Self {
            grid: grid.map(|v| v.clamp(0.0, 1.0)),
            source,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn source(&self) -> Method {
        self.source
    }

    pub fn dims(&self) -> (usize, usize) {
        self.grid.dims()
    }

    pub fn into_grid(self) -> Grid {
        self.grid
    }
}

/// Smooths at feature resolution, min-max normalizes, then upsamples.
///
/// When the target grid does not sample the peak of the normalized map exactly,
/// the upsampled map is divided by its maximum so that it still peaks at 1.
pub fn postprocess(raw: &RawSaliency, cfg: &PostprocessConfig) -> Result<SaliencyMap> {
    cfg.validate(raw.grid().dims())?;
    let smoothed = filter::smooth(raw.grid(), cfg.smoothing_sigma, cfg.smoothing_kernel)?;
    let normalized = filter::min_max_normalize(&smoothed);
    let (th, tw) = cfg.target_size;
    let upsampled = match cfg.interpolation {
        Interpolation::Bilinear => filter::resize_bilinear(&normalized, th, tw)?,
    };
    let peak = upsampled.max();
    let out = if peak > 0.0 && peak < 1.0 {
        upsampled.map(|v| v / peak)
    } else {
        upsampled
    };
    Ok(SaliencyMap::from_normalized(out, raw.source()))
}
