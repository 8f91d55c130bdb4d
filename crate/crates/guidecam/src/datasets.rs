//! Ground-truth annotations and evaluation collections.
//!
//! Collection layout under a root directory:
//!
//! ```text
//! root/<stem>.bundle/      extraction bundle
//! root/<stem>.mask.png     8-bit indexed or grayscale PNG, value = class, 255 = ignore
//! root/<stem>.boxes.json   [{"class": int, "box": [x0, y0, x1, y1]}, ...]
//! ```
//!
//! A mask takes precedence over boxes when both exist.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use guidecam_core::{Annotation, BoundingBox, LabelMap};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::{self, bundle_stem};
use crate::error::{Error, Result};

pub const BUNDLE_SUFFIX: &str = ".bundle";
pub const MASK_SUFFIX: &str = ".mask.png";
pub const BOXES_SUFFIX: &str = ".boxes.json";

/// Number of classes in PASCAL VOC, background included.
pub const VOC_CLASSES: u32 = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnotationKind {
    SegMask,
    BBoxes,
}

/// Image size and label space an annotation is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnnotationSpec {
    pub height: usize,
    pub width: usize,
    pub num_classes: u32,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct BoxRecord {
    class: u32,
    #[serde(rename = "box")]
    coords: [u32; 4],
}

fn read_label_png(path: &Path) -> Result<LabelMap> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let ann_err = |e: png::DecodingError| Error::Annotation(format!("{}: {e}", path.display()));
    let mut reader = decoder.read_info().map_err(ann_err)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Annotation(format!("{}: image too large", path.display())))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(ann_err)?;
    let indexed = matches!(
        info.color_type,
        png::ColorType::Indexed | png::ColorType::Grayscale
    );
    if !indexed || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Annotation(format!(
            "{}: mask must be an 8-bit indexed or grayscale PNG, got {:?} at {:?}",
            path.display(),
            info.color_type,
            info.bit_depth
        )));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let mut labels = Vec::with_capacity(w * h);
    for row in buf.chunks(info.line_size).take(h) {
        labels.extend_from_slice(&row[..w]);
    }
    Ok(LabelMap::new(h, w, labels)?)
}

fn read_boxes(path: &Path) -> Result<Vec<BoundingBox>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let records: Vec<BoxRecord> = serde_json::from_str(&text)
        .map_err(|e| Error::Annotation(format!("{}: {e}", path.display())))?;
    Ok(records
        .into_iter()
        .map(|r| {
            let [x0, y0, x1, y1] = r.coords;
            BoundingBox {
                class: r.class,
                x0,
                y0,
                x1,
                y1,
            }
        })
        .collect())
}

/// Writes boxes in the sidecar JSON format.
pub fn write_boxes(path: &Path, boxes: &[BoundingBox]) -> Result<()> {
    let records: Vec<BoxRecord> = boxes
        .iter()
        .map(|b| BoxRecord {
            class: b.class,
            coords: [b.x0, b.y0, b.x1, b.y1],
        })
        .collect();
    let text = serde_json::to_string(&records).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Writes an 8-bit grayscale label PNG.
pub fn write_label_png(path: &Path, mask: &LabelMap) -> Result<()> {
    let (h, w) = mask.dims();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(std::io::BufWriter::new(file), w as u32, h as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    let enc_err = |e: png::EncodingError| Error::Format(format!("{}: {e}", path.display()));
    let mut writer = encoder.write_header().map_err(enc_err)?;
    writer.write_image_data(mask.labels()).map_err(enc_err)?;
    writer.finish().map_err(enc_err)
}

/// Loads and validates an annotation file.
pub fn load_annotation(
    path: &Path,
    kind: AnnotationKind,
    spec: &AnnotationSpec,
) -> Result<Annotation> {
    let annotation = match kind {
        AnnotationKind::SegMask => Annotation::SegMask(read_label_png(path)?),
        AnnotationKind::BBoxes => Annotation::BBoxes(read_boxes(path)?),
    };
    annotation
        .validate((spec.height, spec.width), spec.num_classes)
        .map_err(|e| match Error::from(e) {
            Error::Annotation(m) => Error::Annotation(format!("{}: {m}", path.display())),
            other => other,
        })?;
    Ok(annotation)
}

/// One image to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalItem {
    pub stem: String,
    pub bundle_path: PathBuf,
    pub annotation: Annotation,
    /// Annotation label of the explained class.
    pub target_class: u32,
}

/// Why a bundle was left out of a scan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScanWarning {
    pub stem: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanOptions {
    pub num_classes: u32,
    /// Keep a seeded random subset of this many items.
    pub subsample: Option<usize>,
    pub seed: u64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            num_classes: VOC_CLASSES,
            subsample: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Collection {
    /// Lexicographic by stem.
    pub items: Vec<EvalItem>,
    pub warnings: Vec<ScanWarning>,
}

fn scan_item(
    root: &Path,
    stem: &str,
    bundle_path: &Path,
    num_classes: u32,
) -> Result<Option<EvalItem>> {
    let manifest = bundle::read_manifest(bundle_path)?;
    let dims = manifest
        .tensors
        .get("image")
        .and_then(|t| match t.shape.as_slice() {
            [_, h, w] => Some((*h, *w)),
            _ => None,
        })
        .ok_or_else(|| Error::Shape("manifest image entry is not 3×H×W".into()))?;
    let target_class = match manifest.annotation_class {
        Some(c) => c,
        None => u32::try_from(manifest.class_index)
            .map_err(|_| Error::Shape(format!("bad class_index {}", manifest.class_index)))?,
    };
    let spec = AnnotationSpec {
        height: dims.0,
        width: dims.1,
        num_classes,
    };
    let mask = root.join(format!("{stem}{MASK_SUFFIX}"));
    let boxes = root.join(format!("{stem}{BOXES_SUFFIX}"));
    let annotation = if mask.is_file() {
        load_annotation(&mask, AnnotationKind::SegMask, &spec)?
    } else if boxes.is_file() {
        load_annotation(&boxes, AnnotationKind::BBoxes, &spec)?
    } else {
        return Ok(None);
    };
    if !annotation.contains_class(target_class) {
        return Err(Error::Annotation(format!(
            "annotation has no region of target class {target_class}"
        )));
    }
    Ok(Some(EvalItem {
        stem: stem.to_owned(),
        bundle_path: bundle_path.to_owned(),
        annotation,
        target_class,
    }))
}

/// Enumerates `root/*.bundle` with their annotations, in lexicographic order.
///
/// Bundles without an annotation, or whose annotation fails validation or
/// lacks the target class, are skipped and reported as warnings.
pub fn scan_collection(root: &Path, options: &ScanOptions) -> Result<Collection> {
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut bundles = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let path = entry.path();
        let is_bundle = path.is_dir()
            && path
                .file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(BUNDLE_SUFFIX));
        if is_bundle {
            bundles.push((bundle_stem(&path), path));
        }
    }
    bundles.sort();

    let mut collection = Collection::default();
    for (stem, path) in bundles {
        match scan_item(root, &stem, &path, options.num_classes) {
            Ok(Some(item)) => collection.items.push(item),
            Ok(None) => collection.warnings.push(ScanWarning {
                stem,
                message: "no mask or boxes annotation; skipped".into(),
            }),
            Err(e) => collection.warnings.push(ScanWarning {
                stem,
                message: format!("{e}; skipped"),
            }),
        }
    }

    if let Some(n) = options.subsample {
        collection.items = subsample(collection.items, n, options.seed);
    }
    Ok(collection)
}

/// Seeded subset of `n` items, kept in their original order.
pub fn subsample<T>(items: Vec<T>, n: usize, seed: u64) -> Vec<T> {
    if n >= items.len() {
        return items;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, items.len(), n).into_vec();
    picked.sort_unstable();
    let mut keep = vec![false; items.len()];
    for i in picked {
        keep[i] = true;
    }
    items
        .into_iter()
        .zip(keep)
        .filter_map(|(item, k)| k.then_some(item))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsample_is_seeded_and_ordered() {
        let items: Vec<u32> = (0..20).collect();
        let a = subsample(items.clone(), 5, 7);
        let b = subsample(items.clone(), 5, 7);
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(subsample(items.clone(), 50, 7), items);
    }
}
