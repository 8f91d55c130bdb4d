//! PNG output: heatmap overlays and insertion/deletion plots.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use font8x8::UnicodeFonts;
use guidecam_core::{Curve, SaliencyMap, Tensor};

use crate::bundle::Preprocessing;
use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const COLORMAP: &str = "viridis";

/// An 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Canvas {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl Canvas {
    pub fn new(width: usize, height: usize, fill: [u8; 3]) -> Self {
        Self {
            width,
            height,
            pixels: vec![fill; width * height],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: i64, y: i64, c: [u8; 3]) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            self.pixels[y as usize * self.width + x as usize] = c;
        }
    }

    fn fill_rect(&mut self, x: i64, y: i64, w: i64, h: i64, c: [u8; 3]) {
        for yy in y..y + h {
            for xx in x..x + w {
                self.set(xx, yy, c);
            }
        }
    }

    /// Line with a square pen of side `thickness`.
    fn line(&mut self, (x0, y0): (f64, f64), (x1, y1): (f64, f64), thickness: i64, c: [u8; 3]) {
        let n = (x1 - x0).abs().max((y1 - y0).abs()).ceil().max(1.0) as usize;
        let off = thickness / 2;
        for i in 0..=n {
            let t = i as f64 / n as f64;
            let x = (x0 + t * (x1 - x0)).round() as i64;
            let y = (y0 + t * (y1 - y0)).round() as i64;
            self.fill_rect(x - off, y - off, thickness, thickness, c);
        }
    }

    /// 8×8 bitmap text; characters without a glyph are skipped.
    fn text(&mut self, x: i64, y: i64, s: &str, c: [u8; 3]) {
        for (i, ch) in s.chars().enumerate() {
            let Some(glyph) = font8x8::BASIC_FONTS.get(ch) else {
                continue;
            };
            for (row, bits) in glyph.iter().enumerate() {
                for col in 0..8 {
                    if bits & (1 << col) != 0 {
                        self.set(x + 8 * i as i64 + col, y + row as i64, c);
                    }
                }
            }
        }
    }

    /// Writes an RGB PNG with optional `tEXt` entries.
    pub fn save_png(&self, path: &Path, text: &[(&str, String)]) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut enc =
            png::Encoder::new(BufWriter::new(file), self.width as u32, self.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let png_err = |e: png::EncodingError| Error::Format(format!("{}: {e}", path.display()));
        for (k, v) in text {
            enc.add_text_chunk((*k).to_owned(), v.clone())
                .map_err(png_err)?;
        }
        let mut w = enc.write_header().map_err(png_err)?;
        let flat: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        w.write_image_data(&flat).map_err(png_err)?;
        w.finish().map_err(png_err)
    }
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Blends the viridis-colored saliency over the denormalized image:
/// `out = (1 − alpha)·image + alpha·color`.
pub fn overlay(
    image: &Tensor,
    saliency: &SaliencyMap,
    pre: &Preprocessing,
    alpha: f64,
) -> Result<Canvas> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!(
            "overlay alpha {alpha} outside [0, 1]"
        )));
    }
    let (c, h, w) = image.chw().map_err(Error::from)?;
    if c != 3 || saliency.dims() != (h, w) {
        return Err(Error::Shape(format!(
            "overlay needs a 3×H×W image matching the {:?} saliency map, got {:?}",
            saliency.dims(),
            image.shape()
        )));
    }
    let data = image.data();
    let grid = saliency.grid();
    let mut canvas = Canvas::new(w, h, [0; 3]);
    for y in 0..h {
        for x in 0..w {
            let color = colorous::VIRIDIS.eval_continuous(grid.get(y, x).clamp(0.0, 1.0));
            let color = [color.r, color.g, color.b];
            let mut px = [0u8; 3];
            for ch in 0..3 {
                let v = f64::from(data[ch * h * w + y * w + x]) * pre.std[ch] + pre.mean[ch];
                let base = v.clamp(0.0, 1.0);
                px[ch] = to_u8((1.0 - alpha) * base + alpha * f64::from(color[ch]) / 255.0);
            }
            canvas.set(x as i64, y as i64, px);
        }
    }
    Ok(canvas)
}

pub fn overlay_metadata(method: &str, alpha: f64) -> Vec<(&'static str, String)> {
    vec![
        ("colormap", COLORMAP.to_owned()),
        ("alpha", format!("{alpha}")),
        ("method", method.to_owned()),
    ]
}

const PLOT_W: usize = 480;
const PLOT_H: usize = 320;
const MARGIN: f64 = 40.0;
const WHITE: [u8; 3] = [255, 255, 255];
const BLACK: [u8; 3] = [0, 0, 0];
const GRID: [u8; 3] = [220, 220, 220];
const INSERTION_COLOR: [u8; 3] = [31, 119, 180];
const DELETION_COLOR: [u8; 3] = [214, 39, 40];

/// Both curves on a unit square, AUCs in the legend.
pub fn curve_plot(insertion: &Curve, deletion: &Curve) -> Canvas {
    let mut c = Canvas::new(PLOT_W, PLOT_H, WHITE);
    let (x0, x1) = (MARGIN, PLOT_W as f64 - 16.0);
    let (y0, y1) = (PLOT_H as f64 - MARGIN, 16.0);
    let px = |f: f64| x0 + f.clamp(0.0, 1.0) * (x1 - x0);
    let py = |s: f64| y0 + s.clamp(0.0, 1.0) * (y1 - y0);

    for i in 1..=4 {
        let t = f64::from(i) / 4.0;
        c.line((px(t), py(0.0)), (px(t), py(1.0)), 1, GRID);
        c.line((px(0.0), py(t)), (px(1.0), py(t)), 1, GRID);
    }
    c.line((px(0.0), py(0.0)), (px(1.0), py(0.0)), 1, BLACK);
    c.line((px(0.0), py(0.0)), (px(0.0), py(1.0)), 1, BLACK);
    c.text(px(0.0) as i64 - 4, py(0.0) as i64 + 6, "0", BLACK);
    c.text(px(1.0) as i64 - 4, py(0.0) as i64 + 6, "1", BLACK);
    c.text(px(0.0) as i64 - 12, py(1.0) as i64 - 4, "1", BLACK);
    c.text(px(0.5) as i64 - 32, py(0.0) as i64 + 20, "fraction", BLACK);

    for (curve, color) in [(insertion, INSERTION_COLOR), (deletion, DELETION_COLOR)] {
        let pts: Vec<(f64, f64)> = curve
            .fractions
            .iter()
            .zip(&curve.scores)
            .map(|(&f, &s)| (px(f), py(s)))
            .collect();
        for pair in pts.windows(2) {
            c.line(pair[0], pair[1], 2, color);
        }
    }

    let lx = px(0.5) as i64;
    let ly = py(1.0) as i64 + 6;
    for (i, (label, curve, color)) in [
        ("insertion", insertion, INSERTION_COLOR),
        ("deletion", deletion, DELETION_COLOR),
    ]
    .into_iter()
    .enumerate()
    {
        let y = ly + 14 * i as i64;
        c.fill_rect(lx, y + 3, 16, 3, color);
        c.text(lx + 22, y, &format!("{label} AUC={:.3}", curve.auc), BLACK);
    }
    c
}
