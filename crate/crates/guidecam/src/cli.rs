//! Command line front end.
//!
//! Exit codes: 0 on success, 2 for usage, configuration and input errors,
//! 1 for failures while running.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use guidecam_core::evaluate::EvalConfig;
use guidecam_core::{
    insertion_deletion, postprocess, saliency, Curve, CurveMode, Method, SaliencyMap, Tensor,
};

use crate::bundle::{bundle_stem, load_bundle, ExtractionBundle};
use crate::config::{MethodName, RunConfig};
use crate::datasets::scan_collection;
use crate::error::{Error, Result};
use crate::evaluation::evaluate_collection;
use crate::inference::{load_scorer, InputSpec};
use crate::npy;
use crate::render::{curve_plot, overlay, overlay_metadata, DEFAULT_ALPHA};
use crate::report::{compare, comparison_csv, to_csv, to_json, ReportSettings};

#[derive(Debug, Parser)]
#[command(
    name = "guidecam",
    version,
    about = "Gradient-guided class activation maps and their evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Saliency map (NPY) and heatmap overlay (PNG) for one bundle.
    Explain {
        bundle: PathBuf,
        #[arg(long, value_enum, default_value = "guided")]
        method: MethodName,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Heatmap opacity in [0, 1].
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
    },
    /// Metric report over an annotated collection.
    Evaluate {
        /// Run configuration (JSON).
        config: PathBuf,
        /// Replaces the configured methods; repeatable.
        #[arg(long, value_enum)]
        method: Vec<MethodName>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        subsample: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Insertion and deletion curves (CSV and PNG) for one bundle.
    Curves {
        bundle: PathBuf,
        /// ONNX model, or a `.json` lookup table.
        #[arg(long)]
        scorer: PathBuf,
        #[arg(long, value_enum, default_value = "guided")]
        method: MethodName,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

/// Maps an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::MissingComponent(_)
        | Error::Shape(_)
        | Error::NonFiniteData { .. }
        | Error::Format(_)
        | Error::ModelLoad(_)
        | Error::Annotation(_)
        | Error::Config(_) => 2,
        Error::Io { .. } | Error::Scorer(_) | Error::Range(_) => 1,
    }
}

/// Output file name: `<stem>.<kind>.<ext>`, with a `.gradcam` infix for
/// GradCAM.
pub fn output_name(stem: &str, method: Method, kind: &str, ext: &str) -> String {
    match method {
        Method::GuidedCam => format!("{stem}.{kind}.{ext}"),
        other => format!("{stem}.{}.{kind}.{ext}", other.name()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn saliency_for(
    bundle: &ExtractionBundle,
    method: Method,
    cfg: &EvalConfig,
) -> Result<SaliencyMap> {
    let raw = saliency(bundle.features(), bundle.gradients(), method)?;
    let (h, w) = bundle.image_dims();
    Ok(postprocess(&raw, &cfg.postprocess_for(h, w))?)
}

fn saliency_tensor(map: &SaliencyMap) -> Result<Tensor> {
    let (h, w) = map.dims();
    let data = map.grid().values().iter().map(|&v| v as f32).collect();
    Ok(Tensor::new(vec![h, w], data)?)
}

/// Files written by `explain`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplainOutputs {
    pub saliency: PathBuf,
    pub overlay: PathBuf,
}

pub fn cmd_explain(
    bundle_path: &Path,
    method: Method,
    out: &Path,
    alpha: f64,
) -> Result<ExplainOutputs> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha {alpha} outside [0, 1]")));
    }
    let bundle = load_bundle(bundle_path)?;
    let map = saliency_for(&bundle, method, &EvalConfig::default())?;
    let canvas = overlay(bundle.image(), &map, bundle.preprocessing(), alpha)?;

    create_out_dir(out)?;
    let stem = bundle_stem(bundle_path);
    let outputs = ExplainOutputs {
        saliency: out.join(output_name(&stem, method, "saliency", "npy")),
        overlay: out.join(output_name(&stem, method, "overlay", "png")),
    };
    npy::save_npy(&outputs.saliency, &saliency_tensor(&map)?)?;
    canvas.save_png(&outputs.overlay, &overlay_metadata(method.name(), alpha))?;
    Ok(outputs)
}

/// Command line overrides for a run config.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvaluateOverrides {
    pub methods: Vec<MethodName>,
    pub tau: Option<f64>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    pub subsample: Option<usize>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

impl EvaluateOverrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if !self.methods.is_empty() {
            cfg.methods = self.methods.clone();
        }
        if let Some(t) = self.tau {
            cfg.metrics.tau = t;
        }
        if let Some(s) = self.steps {
            cfg.metrics.steps = s;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.subsample {
            cfg.subsample = Some(n);
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
    }
}

/// Files written by `evaluate`, and what the scan left out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvaluateOutputs {
    pub report_csv: PathBuf,
    pub report_json: PathBuf,
    pub comparison_csv: Option<PathBuf>,
    pub warnings: Vec<String>,
    pub failures: Vec<String>,
}

pub fn cmd_evaluate(config_path: &Path, overrides: &EvaluateOverrides) -> Result<EvaluateOutputs> {
    let mut cfg = RunConfig::load(config_path)?;
    overrides.apply(&mut cfg);
    cfg.validate()?;
    cfg.prepare_output_dir()?;
    run_config(&cfg)
}

/// Runs an already resolved and validated config.
pub fn run_config(cfg: &RunConfig) -> Result<EvaluateOutputs> {
    let collection =
        scan_collection(&cfg.collection, &cfg.scan_options()).map_err(|e| match e {
            Error::Io { path, source } => {
                Error::Config(format!("collection {}: {source}", path.display()))
            }
            other => other,
        })?;
    let eval_cfg = cfg.eval_config();
    let scorer_path = cfg.scorer.clone();
    let factory = move |spec: &InputSpec| load_scorer(&scorer_path, spec);

    let mut reports = Vec::with_capacity(cfg.methods.len());
    for &m in &cfg.methods {
        let settings = ReportSettings::new(&eval_cfg, cfg.seed, cfg.subsample);
        reports.push(evaluate_collection(
            &collection.items,
            m.into(),
            &eval_cfg,
            settings,
            cfg.workers,
            &factory,
        )?);
    }

    let report_csv = cfg.output_dir.join("report.csv");
    let report_json = cfg.output_dir.join("report.json");
    write_text(&report_csv, &to_csv(&reports)?)?;
    write_text(&report_json, &to_json(&reports)?)?;
    let comparison = match compare(&reports) {
        Some(cmp) => {
            let path = cfg.output_dir.join("comparison.csv");
            write_text(&path, &comparison_csv(&cmp)?)?;
            Some(path)
        }
        None => None,
    };
    Ok(EvaluateOutputs {
        report_csv,
        report_json,
        comparison_csv: comparison,
        warnings: collection
            .warnings
            .iter()
            .map(|w| format!("{}: {}", w.stem, w.message))
            .collect(),
        failures: reports
            .iter()
            .flat_map(|r| {
                r.failures
                    .iter()
                    .map(move |f| format!("{} [{}]: {}", f.item, r.method, f.error))
            })
            .collect(),
    })
}

/// Files and curves produced by `curves`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvesOutputs {
    pub csv: PathBuf,
    pub plot: PathBuf,
    pub insertion: Curve,
    pub deletion: Curve,
}

pub fn curves_csv(insertion: &Curve, deletion: &Curve) -> Result<String> {
    let csv_err = |e: csv::Error| Error::Format(format!("writing csv: {e}"));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["fraction", "insertion_score", "deletion_score"])
        .map_err(csv_err)?;
    for ((f, i), d) in insertion
        .fractions
        .iter()
        .zip(&insertion.scores)
        .zip(&deletion.scores)
    {
        w.write_record([f.to_string(), i.to_string(), d.to_string()])
            .map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Format(format!("writing csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

pub fn cmd_curves(
    bundle_path: &Path,
    scorer_path: &Path,
    method: Method,
    steps: usize,
    out: &Path,
) -> Result<CurvesOutputs> {
    let cfg = EvalConfig {
        steps,
        ..EvalConfig::default()
    };
    cfg.validate()?;
    let bundle = load_bundle(bundle_path)?;
    let mut scorer = load_scorer(scorer_path, &InputSpec::for_bundle(&bundle))?;
    let map = saliency_for(&bundle, method, &cfg)?;
    let class = bundle.class_index();
    let insertion = insertion_deletion(
        bundle.image(),
        &map,
        &mut scorer,
        class,
        CurveMode::Insertion,
        steps,
        &cfg.insertion_baseline,
    )?;
    let deletion = insertion_deletion(
        bundle.image(),
        &map,
        &mut scorer,
        class,
        CurveMode::Deletion,
        steps,
        &cfg.deletion_baseline,
    )?;

    create_out_dir(out)?;
    let stem = bundle_stem(bundle_path);
    let csv = out.join(output_name(&stem, method, "curves", "csv"));
    let plot = out.join(output_name(&stem, method, "curves", "png"));
    write_text(&csv, &curves_csv(&insertion, &deletion)?)?;
    curve_plot(&insertion, &deletion).save_png(&plot, &[("method", method.name().to_owned())])?;
    Ok(CurvesOutputs {
        csv,
        plot,
        insertion,
        deletion,
    })
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Explain {
            bundle,
            method,
            out,
            alpha,
        } => {
            let o = cmd_explain(&bundle, method.into(), &out, alpha)?;
            println!("{}\n{}", o.saliency.display(), o.overlay.display());
        }
        Command::Evaluate {
            config,
            method,
            tau,
            steps,
            seed,
            subsample,
            workers,
            out,
        } => {
            let overrides = EvaluateOverrides {
                methods: method,
                tau,
                steps,
                seed,
                subsample,
                workers,
                out,
            };
            let o = cmd_evaluate(&config, &overrides)?;
            for w in &o.warnings {
                eprintln!("warning: {w}");
            }
            for f in &o.failures {
                eprintln!("failed: {f}");
            }
            println!("{}\n{}", o.report_csv.display(), o.report_json.display());
            if let Some(c) = &o.comparison_csv {
                println!("{}", c.display());
            }
        }
        Command::Curves {
            bundle,
            scorer,
            method,
            steps,
            out,
        } => {
            let o = cmd_curves(&bundle, &scorer, method.into(), steps, &out)?;
            println!("{}\n{}", o.csv.display(), o.plot.display());
        }
    }
    Ok(())
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
