//! Forward-only scoring through an ONNX graph or a JSON lookup-table stub.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use guidecam_core::{ClassScore, Scorer, Tensor};
use serde::Deserialize;
use sha2::{Digest, Sha256};
use tract_onnx::prelude::{
    tvec, Datum, Framework, InferenceFact, InferenceModelExt, IntoRunnable, IntoTValue,
    TypedRunnableModel,
};

use crate::bundle::{ExtractionBundle, Preprocessing};
use crate::error::{Error, Result};

pub const INPUT_NAME: &str = "input";
pub const OUTPUT_NAME: &str = "logits";

/// Expected network input (`3×height×width`, already preprocessed) and output.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSpec {
    pub height: usize,
    pub width: usize,
    /// When set, the scorer must produce exactly this many logits.
    pub num_classes: Option<usize>,
    pub preprocessing: Option<Preprocessing>,
}

impl InputSpec {
    pub fn new(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            num_classes: None,
            preprocessing: None,
        }
    }

    pub fn with_classes(mut self, num_classes: usize) -> Self {
        self.num_classes = Some(num_classes);
        self
    }

    pub fn for_bundle(bundle: &ExtractionBundle) -> Self {
        let (height, width) = bundle.image_dims();
        Self {
            height,
            width,
            num_classes: Some(bundle.class_scores().len()),
            preprocessing: Some(bundle.preprocessing().clone()),
        }
    }

    fn check_image(&self, image: &Tensor) -> guidecam_core::Result<()> {
        if image.shape() != [3, self.height, self.width] {
            return Err(guidecam_core::Error::Shape(format!(
                "scorer expects a 3x{}x{} image, got {:?}",
                self.height,
                self.width,
                image.shape()
            )));
        }
        Ok(())
    }
}

/// Loads a scorer: `.json` files are stub tables, anything else an ONNX graph.
pub fn load_scorer(model_path: &Path, spec: &InputSpec) -> Result<Box<dyn Scorer + Send>> {
    let is_json = model_path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        Ok(Box::new(StubScorer::load(model_path, spec)?))
    } else {
        Ok(Box::new(OnnxScorer::load(model_path, spec)?))
    }
}

/// SHA-256 over the shape (each dimension as `u64` little-endian) followed by
/// the `f32` little-endian data, as lowercase hex.
pub fn image_hash(image: &Tensor) -> String {
    let mut hasher = Sha256::new();
    for &d in image.shape() {
        hasher.update((d as u64).to_le_bytes());
    }
    let mut bytes = Vec::with_capacity(image.len() * 4);
    for v in image.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    hasher.update(&bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub struct OnnxScorer {
    plan: Arc<TypedRunnableModel>,
    spec: InputSpec,
    num_classes: usize,
}

fn load_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::ModelLoad(format!("{}: {e}", path.display()))
}

impl OnnxScorer {
    pub fn load(path: &Path, spec: &InputSpec) -> Result<Self> {
        if !path.is_file() {
            return Err(load_err(path, "no such model file"));
        }
        let model = tract_onnx::onnx()
            .model_for_path(path)
            .map_err(|e| load_err(path, e))?;

        let inputs = model.input_outlets().map_err(|e| load_err(path, e))?;
        let outputs = model.output_outlets().map_err(|e| load_err(path, e))?;
        if inputs.len() != 1 || model.node(inputs[0].node).name != INPUT_NAME {
            return Err(load_err(
                path,
                format!("graph must have a single input named `{INPUT_NAME}`"),
            ));
        }
        let output_named = outputs.len() == 1
            && (model.node(outputs[0].node).name == OUTPUT_NAME
                || model.outlet_label(outputs[0]) == Some(OUTPUT_NAME));
        if !output_named {
            return Err(load_err(
                path,
                format!("graph must have a single output named `{OUTPUT_NAME}`"),
            ));
        }

        let expected = [1, 3, spec.height, spec.width];
        let declared = model
            .input_fact(0)
            .map_err(|e| load_err(path, e))?
            .shape
            .as_concrete_finite()
            .map_err(|e| load_err(path, e))?;
        if let Some(declared) = declared {
            if declared.as_slice() != expected {
                return Err(load_err(
                    path,
                    format!(
                        "graph input is {:?}, scorer spec requires {:?}",
                        declared.as_slice(),
                        expected
                    ),
                ));
            }
        }

        let typed = model
            .with_input_fact(0, InferenceFact::dt_shape(f32::datum_type(), expected))
            .and_then(|m| m.into_optimized())
            .map_err(|e| load_err(path, e))?;
        let out_shape = typed
            .output_fact(0)
            .map_err(|e| load_err(path, e))?
            .shape
            .as_concrete()
            .map(|s| s.to_vec())
            .ok_or_else(|| load_err(path, "output shape is not concrete"))?;
        let num_classes = match out_shape.as_slice() {
            [1, c] | [c] => *c,
            other => return Err(load_err(path, format!("unexpected logits shape {other:?}"))),
        };
        if let Some(c) = spec.num_classes {
            if c != num_classes {
                return Err(load_err(
                    path,
                    format!("graph emits {num_classes} logits, spec expects {c}"),
                ));
            }
        }
        let plan = typed.into_runnable().map_err(|e| load_err(path, e))?;
        Ok(Self {
            plan,
            spec: spec.clone(),
            num_classes,
        })
    }
}

impl Scorer for OnnxScorer {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn score(&mut self, image: &Tensor) -> guidecam_core::Result<ClassScore> {
        self.spec.check_image(image)?;
        let scorer_err =
            |e: tract_onnx::prelude::TractError| guidecam_core::Error::Scorer(e.to_string());
        let input = tract_onnx::prelude::Tensor::from_shape(
            &[1, 3, self.spec.height, self.spec.width],
            image.data(),
        )
        .map_err(scorer_err)?;
        let outputs = self
            .plan
            .run(tvec!(input.into_tvalue()))
            .map_err(scorer_err)?;
        let logits: Vec<f32> = outputs[0]
            .to_plain_array_view::<f32>()
            .map_err(scorer_err)?
            .iter()
            .copied()
            .collect();
        if logits.len() != self.num_classes {
            return Err(guidecam_core::Error::Scorer(format!(
                "graph returned {} logits, expected {}",
                logits.len(),
                self.num_classes
            )));
        }
        Ok(ClassScore::from_logits(logits))
    }
}

/// Deterministic stand-in for a model, driven by a JSON file.
///
/// The file is either a bare map from [`image_hash`] to logits, or
/// `{"table": {...}, "fallback": ...}` where the optional fallback answers
/// images missing from the table, either with fixed `{"logits": [...]}` or
/// with `{"channel_means": {"weights": [[r, g, b], ...], "bias": [...]}}`
/// (one row per class, applied to the per-channel spatial means).
#[derive(Debug, Clone)]
pub struct StubScorer {
    table: HashMap<String, Vec<f32>>,
    fallback: Option<Fallback>,
    num_classes: usize,
    spec: Option<InputSpec>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    Logits(Vec<f32>),
    ChannelMeans {
        weights: Vec<[f32; 3]>,
        bias: Vec<f32>,
    },
}

impl Fallback {
    fn num_classes(&self) -> Result<usize> {
        match self {
            Fallback::Logits(l) => Ok(l.len()),
            Fallback::ChannelMeans { weights, bias } => {
                if weights.len() != bias.len() {
                    return Err(Error::ModelLoad(format!(
                        "channel_means fallback has {} weight rows and {} biases",
                        weights.len(),
                        bias.len()
                    )));
                }
                Ok(bias.len())
            }
        }
    }

    fn logits(&self, image: &Tensor) -> Vec<f32> {
        match self {
            Fallback::Logits(l) => l.clone(),
            Fallback::ChannelMeans { weights, bias } => {
                let plane = image.len() / 3;
                let means: Vec<f64> = image
                    .data()
                    .chunks_exact(plane.max(1))
                    .map(|c| c.iter().map(|&v| f64::from(v)).sum::<f64>() / plane as f64)
                    .collect();
                weights
                    .iter()
                    .zip(bias)
                    .map(|(w, &b)| {
                        let dot: f64 = w
                            .iter()
                            .zip(&means)
                            .map(|(&wi, &m)| f64::from(wi) * m)
                            .sum();
                        (f64::from(b) + dot) as f32
                    })
                    .collect()
            }
        }
    }
}

#[derive(Deserialize)]
struct StubFile {
    table: HashMap<String, Vec<f32>>,
    #[serde(default)]
    fallback: Option<Fallback>,
}

impl StubScorer {
    pub fn new(table: HashMap<String, Vec<f32>>, fallback: Option<Fallback>) -> Result<Self> {
        let mut sizes = table.values().map(Vec::len);
        let num_classes = match (&fallback, sizes.next()) {
            (Some(f), _) => f.num_classes()?,
            (None, Some(n)) => n,
            (None, None) => return Err(Error::ModelLoad("stub scorer has no entries".into())),
        };
        if num_classes == 0 || table.values().any(|l| l.len() != num_classes) {
            return Err(Error::ModelLoad(format!(
                "stub logits must all have the same nonzero length ({num_classes})"
            )));
        }
        Ok(Self {
            table,
            fallback,
            num_classes,
            spec: None,
        })
    }

    pub fn load(path: &Path, spec: &InputSpec) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| load_err(path, e))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| load_err(path, e))?;
        let structured = value.get("table").is_some();
        let (table, fallback) = if structured {
            let f: StubFile = serde_json::from_value(value).map_err(|e| load_err(path, e))?;
            (f.table, f.fallback)
        } else {
            (
                serde_json::from_value(value).map_err(|e| load_err(path, e))?,
                None,
            )
        };
        let mut scorer = Self::new(table, fallback).map_err(|e| load_err(path, e))?;
        if let Some(c) = spec.num_classes {
            if c != scorer.num_classes {
                return Err(load_err(
                    path,
                    format!("stub has {} classes, spec expects {c}", scorer.num_classes),
                ));
            }
        }
        scorer.spec = Some(spec.clone());
        Ok(scorer)
    }

    pub fn with_spec(mut self, spec: InputSpec) -> Self {
        self.spec = Some(spec);
        self
    }
}

impl Scorer for StubScorer {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn score(&mut self, image: &Tensor) -> guidecam_core::Result<ClassScore> {
        if let Some(spec) = &self.spec {
            spec.check_image(image)?;
        }
        let logits = match self.table.get(&image_hash(image)) {
            Some(l) => l.clone(),
            None => match &self.fallback {
                Some(f) => f.logits(image),
                None => {
                    return Err(guidecam_core::Error::Scorer(format!(
                        "stub table has no entry for image {}",
                        image_hash(image)
                    )))
                }
            },
        };
        Ok(ClassScore::from_logits(logits))
    }
}
