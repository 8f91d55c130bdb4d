//! The `evaluate` run configuration: one JSON document holding every default.
//!
//! ```json
//! {
//!   "methods": ["gradcam", "guided"],
//!   "collection": "data/voc_val",
//!   "scorer": "models/vgg16.onnx",
//!   "output_dir": "out",
//!   "seed": 0,
//!   "subsample": null,
//!   "workers": 1,
//!   "postprocess": { "sigma": 1.0, "kernel": 5 },
//!   "metrics": {
//!     "tau": 0.5,
//!     "steps": 100,
//!     "insertion_baseline": { "kind": "blur", "sigma": 10.0 },
//!     "deletion_baseline": { "kind": "zero" }
//!   },
//!   "annotation": { "num_classes": 21 }
//! }
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::fs;
use std::path::{Path, PathBuf};

use guidecam_core::evaluate::EvalConfig;
use guidecam_core::{Baseline, Method, PostprocessConfig};
use serde::{Deserialize, Serialize};

use crate::datasets::{ScanOptions, VOC_CLASSES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Gradcam,
    Guided,
}

impl From<MethodName> for Method {
    fn from(m: MethodName) -> Self {
        match m {
            MethodName::Gradcam => Method::GradCam,
            MethodName::Guided => Method::GuidedCam,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BaselineSpec {
    Zero,
    Blur { sigma: f64 },
}

impl From<BaselineSpec> for Baseline {
    fn from(b: BaselineSpec) -> Self {
        match b {
            BaselineSpec::Zero => Baseline::Zero,
            BaselineSpec::Blur { sigma } => Baseline::Blur { sigma },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostprocessSection {
    pub sigma: f64,
    pub kernel: usize,
}

impl Default for PostprocessSection {
    fn default() -> Self {
        Self {
            sigma: PostprocessConfig::DEFAULT_SIGMA,
            kernel: PostprocessConfig::DEFAULT_KERNEL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub tau: f64,
    pub steps: usize,
    pub insertion_baseline: BaselineSpec,
    pub deletion_baseline: BaselineSpec,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            tau: 0.5,
            steps: 100,
            insertion_baseline: BaselineSpec::Blur {
                sigma: Baseline::DEFAULT_BLUR_SIGMA,
            },
            deletion_baseline: BaselineSpec::Zero,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnotationSection {
    pub num_classes: u32,
}

impl Default for AnnotationSection {
    fn default() -> Self {
        Self {
            num_classes: VOC_CLASSES,
        }
    }
}

fn default_methods() -> Vec<MethodName> {
    vec![MethodName::Gradcam, MethodName::Guided]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_methods")]
    pub methods: Vec<MethodName>,
    /// Directory holding `<stem>.bundle` directories and annotations.
    pub collection: PathBuf,
    /// ONNX model, or a `.json` lookup table.
    pub scorer: PathBuf,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub subsample: Option<usize>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub postprocess: PostprocessSection,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub annotation: AnnotationSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("run config: {e}")))
    }

    /// Reads, resolves relative paths and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve(&mut self, base: &Path) {
        for p in [&mut self.collection, &mut self.scorer, &mut self.output_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("no method selected".into()));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(Error::Config(format!("method {m:?} listed twice")));
            }
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.subsample == Some(0) {
            return Err(Error::Config("subsample must be at least 1".into()));
        }
        if self.annotation.num_classes == 0 || self.annotation.num_classes > 255 {
            return Err(Error::Config(format!(
                "annotation num_classes {} outside 1..=255",
                self.annotation.num_classes
            )));
        }
        self.eval_config().validate()?;
        Ok(())
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            smoothing_sigma: self.postprocess.sigma,
            smoothing_kernel: self.postprocess.kernel,
            tau: self.metrics.tau,
            steps: self.metrics.steps,
            insertion_baseline: self.metrics.insertion_baseline.into(),
            deletion_baseline: self.metrics.deletion_baseline.into(),
        }
    }

    pub fn scan_options(&self) -> ScanOptions {
        ScanOptions {
            num_classes: self.annotation.num_classes,
            subsample: self.subsample,
            seed: self.seed,
        }
    }

    /// Creates the output directory and checks it accepts files.
    pub fn prepare_output_dir(&self) -> Result<()> {
        let dir = &self.output_dir;
        fs::create_dir_all(dir)
            .map_err(|e| Error::Config(format!("output dir {}: {e}", dir.display())))?;
        let probe = dir.join(".guidecam-write-check");
        fs::write(&probe, b"")
            .and_then(|()| fs::remove_file(&probe))
            .map_err(|e| Error::Config(format!("output dir {} not writable: {e}", dir.display())))
    }
}
