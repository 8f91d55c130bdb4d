//! Extraction bundles: a directory holding `manifest.json` and one NPY file per
//! tensor (`image`, `features`, `gradients`, `class_scores`).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use guidecam_core::{FeatureStack, GradientStack, Tensor};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::npy;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

const IMAGE: &str = "image";
const FEATURES: &str = "features";
const GRADIENTS: &str = "gradients";
const CLASS_SCORES: &str = "class_scores";
const TENSOR_NAMES: [&str; 4] = [IMAGE, FEATURES, GRADIENTS, CLASS_SCORES];

/// Preprocessing applied to the network input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub resize: [u32; 2],
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl Default for Preprocessing {
    fn default() -> Self {
        Self {
            resize: [224, 224],
            mean: [0.485, 0.456, 0.406],
            std: [0.229, 0.224, 0.225],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub file: String,
    pub shape: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dtype: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub model_id: String,
    pub layer_name: String,
    pub class_index: i64,
    pub tensors: BTreeMap<String, TensorEntry>,
    pub preprocessing: Preprocessing,
    /// Annotation label standing for the explained class, when the model and
    /// the dataset use different label spaces.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation_class: Option<u32>,
    /// Any other manifest keys, carried through untouched.
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

/// Owned tensors and metadata, before validation.
#[derive(Debug, Clone)]
pub struct BundleParts {
    pub image: Tensor,
    pub features: Tensor,
    pub gradients: Tensor,
    pub class_scores: Tensor,
    pub class_index: usize,
    pub layer_name: String,
    pub model_id: String,
    pub preprocessing: Preprocessing,
    pub annotation_class: Option<u32>,
    pub extra: BTreeMap<String, Value>,
}

/// Validated per-image package of input, activations, gradients and logits.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionBundle {
    image: Tensor,
    features: FeatureStack,
    gradients: GradientStack,
    class_scores: Tensor,
    class_index: usize,
    layer_name: String,
    model_id: String,
    preprocessing: Preprocessing,
    annotation_class: Option<u32>,
    extra: BTreeMap<String, Value>,
}

fn check_finite(name: &str, t: &Tensor) -> Result<()> {
    match t.first_non_finite() {
        Some(index) => Err(Error::NonFiniteData {
            tensor: name.to_owned(),
            index,
        }),
        None => Ok(()),
    }
}

impl ExtractionBundle {
    /// Validates every bundle invariant.
    pub fn new(parts: BundleParts) -> Result<Self> {
        let BundleParts {
            image,
            features,
            gradients,
            class_scores,
            class_index,
            layer_name,
            model_id,
            preprocessing,
            annotation_class,
            extra,
        } = parts;

        let (c, ih, iw) = image
            .chw()
            .map_err(|_| Error::Shape(format!("image must be 3×H×W, got {:?}", image.shape())))?;
        if c != 3 {
            return Err(Error::Shape(format!("image must have 3 channels, got {c}")));
        }
        if features.shape().len() != 3 {
            return Err(Error::Shape(format!(
                "features must be K×h×w, got {:?}",
                features.shape()
            )));
        }
        if features.shape() != gradients.shape() {
            return Err(Error::Shape(format!(
                "features {:?} vs gradients {:?}",
                features.shape(),
                gradients.shape()
            )));
        }
        let features = FeatureStack::from_tensor(&features)?;
        let gradients = GradientStack::from_tensor(&gradients)?;
        if class_scores.shape().len() != 1 || class_scores.is_empty() {
            return Err(Error::Shape(format!(
                "class_scores must be a nonempty vector, got {:?}",
                class_scores.shape()
            )));
        }
        if class_index >= class_scores.len() {
            return Err(Error::Shape(format!(
                "class_index {class_index} outside {} class scores",
                class_scores.len()
            )));
        }
        if ih < features.height() || iw < features.width() {
            return Err(Error::Shape(format!(
                "image {ih}x{iw} smaller than feature maps {}x{}",
                features.height(),
                features.width()
            )));
        }
        check_finite(IMAGE, &image)?;
        check_finite(FEATURES, &features.to_tensor())?;
        check_finite(GRADIENTS, &gradients.to_tensor())?;
        check_finite(CLASS_SCORES, &class_scores)?;

        Ok(Self {
            image,
            features,
            gradients,
            class_scores,
            class_index,
            layer_name,
            model_id,
            preprocessing,
            annotation_class,
            extra,
        })
    }

    pub fn image(&self) -> &Tensor {
        &self.image
    }

    pub fn features(&self) -> &FeatureStack {
        &self.features
    }

    pub fn gradients(&self) -> &GradientStack {
        &self.gradients
    }

    pub fn class_scores(&self) -> &Tensor {
        &self.class_scores
    }

    pub fn class_index(&self) -> usize {
        self.class_index
    }

    pub fn layer_name(&self) -> &str {
        &self.layer_name
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn preprocessing(&self) -> &Preprocessing {
        &self.preprocessing
    }

    /// Annotation label for the explained class; defaults to `class_index`.
    pub fn annotation_class(&self) -> u32 {
        self.annotation_class.unwrap_or(self.class_index as u32)
    }

    pub fn extra(&self) -> &BTreeMap<String, Value> {
        &self.extra
    }

    /// `(height, width)` of the input image.
    pub fn image_dims(&self) -> (usize, usize) {
        (self.image.shape()[1], self.image.shape()[2])
    }

    pub fn into_parts(self) -> BundleParts {
        BundleParts {
            image: self.image,
            features: self.features.to_tensor(),
            gradients: self.gradients.to_tensor(),
            class_scores: self.class_scores,
            class_index: self.class_index,
            layer_name: self.layer_name,
            model_id: self.model_id,
            preprocessing: self.preprocessing,
            annotation_class: self.annotation_class,
            extra: self.extra,
        }
    }

    /// Tensor-by-tensor bit equality plus metadata equality.
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.image.bit_eq(&other.image)
            && self
                .features
                .to_tensor()
                .bit_eq(&other.features.to_tensor())
            && self
                .gradients
                .to_tensor()
                .bit_eq(&other.gradients.to_tensor())
            && self.class_scores.bit_eq(&other.class_scores)
            && self.class_index == other.class_index
            && self.layer_name == other.layer_name
            && self.model_id == other.model_id
            && self.preprocessing == other.preprocessing
            && self.annotation_class == other.annotation_class
            && self.extra == other.extra
    }

    fn manifest(&self) -> Manifest {
        let entry = |name: &str, shape: &[usize]| {
            (
                name.to_owned(),
                TensorEntry {
                    file: format!("{name}.npy"),
                    shape: shape.to_vec(),
                    dtype: None,
                },
            )
        };
        let feature_shape = [
            self.features.channels(),
            self.features.height(),
            self.features.width(),
        ];
        Manifest {
            version: MANIFEST_VERSION,
            model_id: self.model_id.clone(),
            layer_name: self.layer_name.clone(),
            class_index: self.class_index as i64,
            tensors: [
                entry(IMAGE, self.image.shape()),
                entry(FEATURES, &feature_shape),
                entry(GRADIENTS, &feature_shape),
                entry(CLASS_SCORES, self.class_scores.shape()),
            ]
            .into_iter()
            .collect(),
            preprocessing: self.preprocessing.clone(),
            annotation_class: self.annotation_class,
            extra: self.extra.clone(),
        }
    }
}

/// Reads and parses `manifest.json` only.
pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    if !path.is_file() {
        return Err(Error::MissingComponent(path.display().to_string()));
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported manifest version {}",
            path.display(),
            manifest.version
        )));
    }
    Ok(manifest)
}

fn load_tensor(dir: &Path, manifest: &Manifest, name: &str) -> Result<Tensor> {
    let entry = manifest
        .tensors
        .get(name)
        .ok_or_else(|| Error::MissingComponent(format!("manifest has no `{name}` tensor")))?;
    if let Some(dtype) = &entry.dtype {
        if dtype != "<f4" && dtype != "float32" {
            return Err(Error::Format(format!(
                "tensor `{name}` has dtype `{dtype}`, expected <f4"
            )));
        }
    }
    let path = dir.join(&entry.file);
    if !path.is_file() {
        return Err(Error::MissingComponent(path.display().to_string()));
    }
    let tensor = npy::load_npy(&path)?;
    if tensor.shape() != entry.shape.as_slice() {
        return Err(Error::Shape(format!(
            "tensor `{name}` has shape {:?}, manifest says {:?}",
            tensor.shape(),
            entry.shape
        )));
    }
    Ok(tensor)
}

/// Loads and fully validates a bundle directory.
pub fn load_bundle(dir: &Path) -> Result<ExtractionBundle> {
    let manifest = read_manifest(dir)?;
    let class_index = usize::try_from(manifest.class_index)
        .map_err(|_| Error::Shape(format!("negative class_index {}", manifest.class_index)))?;
    let [image, features, gradients, class_scores] =
        TENSOR_NAMES.map(|name| load_tensor(dir, &manifest, name));
    ExtractionBundle::new(BundleParts {
        image: image?,
        features: features?,
        gradients: gradients?,
        class_scores: class_scores?,
        class_index,
        layer_name: manifest.layer_name,
        model_id: manifest.model_id,
        preprocessing: manifest.preprocessing,
        annotation_class: manifest.annotation_class,
        extra: manifest.extra,
    })
}

/// Writes the bundle into `dir`, creating it if needed.
pub fn save_bundle(bundle: &ExtractionBundle, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    npy::save_npy(&dir.join("image.npy"), &bundle.image)?;
    npy::save_npy(&dir.join("features.npy"), &bundle.features.to_tensor())?;
    npy::save_npy(&dir.join("gradients.npy"), &bundle.gradients.to_tensor())?;
    npy::save_npy(&dir.join("class_scores.npy"), &bundle.class_scores)?;
    let manifest = serde_json::to_string_pretty(&bundle.manifest())
        .map_err(|e| Error::Format(format!("serializing manifest: {e}")))?;
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, manifest + "\n").map_err(|e| Error::io(&path, e))
}

/// Collection stem of a bundle directory: its name without `.bundle`.
pub fn bundle_stem(dir: &Path) -> String {
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.strip_suffix(".bundle")
        .map(str::to_owned)
        .unwrap_or(name)
}
