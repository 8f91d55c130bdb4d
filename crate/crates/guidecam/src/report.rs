//! Metric report schema and its CSV / JSON renderings.

use guidecam_core::evaluate::{aggregate, Aggregate, EvalConfig, ImageRecord};
use guidecam_core::{Baseline, Method};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the increase rows are summarized.
pub const INCREASE_CONVENTION: &str = "count_fraction";
/// How zones are cut out of the image.
pub const ZONE_MASKING: &str = "soft";

pub const METRIC_NAMES: [&str; 9] = [
    "drop_salience",
    "increase_salience",
    "drop_context",
    "increase_context",
    "pointing_hit",
    "dice",
    "iou",
    "insertion_auc",
    "deletion_auc",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub item: String,
    pub drop_salience: f64,
    pub increase_salience: f64,
    pub drop_context: f64,
    pub increase_context: f64,
    pub pointing_hit: Option<f64>,
    pub pointing_degenerate: bool,
    pub dice: Option<f64>,
    pub iou: Option<f64>,
    pub insertion_auc: f64,
    pub deletion_auc: f64,
}

impl ImageMetrics {
    pub fn new(item: impl Into<String>, r: &ImageRecord) -> Self {
        Self {
            item: item.into(),
            drop_salience: r.drop_salience,
            increase_salience: r.increase_salience,
            drop_context: r.drop_context,
            increase_context: r.increase_context,
            pointing_hit: r.pointing_hit.map(|h| if h { 1.0 } else { 0.0 }),
            pointing_degenerate: r.pointing_degenerate,
            dice: r.dice,
            iou: r.iou,
            insertion_auc: r.insertion_auc,
            deletion_auc: r.deletion_auc,
        }
    }

    fn record(&self) -> ImageRecord {
        ImageRecord {
            drop_salience: self.drop_salience,
            increase_salience: self.increase_salience,
            drop_context: self.drop_context,
            increase_context: self.increase_context,
            pointing_hit: self.pointing_hit.map(|h| h > 0.5),
            pointing_degenerate: self.pointing_degenerate,
            dice: self.dice,
            iou: self.iou,
            insertion_auc: self.insertion_auc,
            deletion_auc: self.deletion_auc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub count: usize,
    pub drop_salience: f64,
    pub increase_salience: f64,
    pub drop_context: f64,
    pub increase_context: f64,
    pub pointing_hit: Option<f64>,
    pub dice: Option<f64>,
    pub iou: Option<f64>,
    pub insertion_auc: f64,
    pub deletion_auc: f64,
}

impl From<Aggregate> for AggregateMetrics {
    fn from(a: Aggregate) -> Self {
        Self {
            count: a.count,
            drop_salience: a.drop_salience,
            increase_salience: a.increase_salience,
            drop_context: a.drop_context,
            increase_context: a.increase_context,
            pointing_hit: a.pointing_hit,
            dice: a.dice,
            iou: a.iou,
            insertion_auc: a.insertion_auc,
            deletion_auc: a.deletion_auc,
        }
    }
}

impl AggregateMetrics {
    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "drop_salience" => Some(self.drop_salience),
            "increase_salience" => Some(self.increase_salience),
            "drop_context" => Some(self.drop_context),
            "increase_context" => Some(self.increase_context),
            "pointing_hit" => self.pointing_hit,
            "dice" => self.dice,
            "iou" => self.iou,
            "insertion_auc" => Some(self.insertion_auc),
            "deletion_auc" => Some(self.deletion_auc),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemFailure {
    pub item: String,
    pub error: String,
}

/// Settings a report was produced with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSettings {
    pub tau: f64,
    pub steps: usize,
    pub smoothing_sigma: f64,
    pub smoothing_kernel: usize,
    pub insertion_baseline: String,
    pub deletion_baseline: String,
    pub seed: u64,
    pub subsample: Option<usize>,
    pub increase_convention: String,
    pub zone_masking: String,
}

fn describe_baseline(b: &Baseline) -> String {
    match b {
        Baseline::Zero => "zero".to_owned(),
        Baseline::Blur { sigma } => format!("blur(sigma={sigma})"),
    }
}

impl ReportSettings {
    pub fn new(cfg: &EvalConfig, seed: u64, subsample: Option<usize>) -> Self {
        Self {
            tau: cfg.tau,
            steps: cfg.steps,
            smoothing_sigma: cfg.smoothing_sigma,
            smoothing_kernel: cfg.smoothing_kernel,
            insertion_baseline: describe_baseline(&cfg.insertion_baseline),
            deletion_baseline: describe_baseline(&cfg.deletion_baseline),
            seed,
            subsample,
            increase_convention: INCREASE_CONVENTION.to_owned(),
            zone_masking: ZONE_MASKING.to_owned(),
        }
    }
}

/// Per-image and aggregate metrics for one method over a collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub method: String,
    pub settings: ReportSettings,
    pub item_count: usize,
    pub failure_count: usize,
    pub records: Vec<ImageMetrics>,
    pub aggregate: Option<AggregateMetrics>,
    pub failures: Vec<ItemFailure>,
}

impl MetricReport {
    /// Builds a report; the aggregate is the in-order mean of `records`.
    pub fn new(
        method: Method,
        settings: ReportSettings,
        records: Vec<ImageMetrics>,
        failures: Vec<ItemFailure>,
    ) -> Self {
        let plain: Vec<ImageRecord> = records.iter().map(ImageMetrics::record).collect();
        Self {
            method: method.name().to_owned(),
            settings,
            item_count: records.len() + failures.len(),
            failure_count: failures.len(),
            aggregate: aggregate(&plain).map(AggregateMetrics::from),
            records,
            failures,
        }
    }
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

const CSV_HEADER: [&str; 12] = [
    "method",
    "item",
    "drop_salience",
    "increase_salience",
    "drop_context",
    "increase_context",
    "pointing_hit",
    "dice",
    "iou",
    "insertion_auc",
    "deletion_auc",
    "pointing_degenerate",
];

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::Format(format!("writing csv: {e}"))
}

/// One row per image and one `aggregate` row per report.
pub fn to_csv(reports: &[MetricReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for report in reports {
        for r in &report.records {
            w.write_record([
                report.method.clone(),
                r.item.clone(),
                fmt(r.drop_salience),
                fmt(r.increase_salience),
                fmt(r.drop_context),
                fmt(r.increase_context),
                fmt_opt(r.pointing_hit),
                fmt_opt(r.dice),
                fmt_opt(r.iou),
                fmt(r.insertion_auc),
                fmt(r.deletion_auc),
                r.pointing_degenerate.to_string(),
            ])
            .map_err(csv_err)?;
        }
        if let Some(a) = &report.aggregate {
            w.write_record([
                report.method.clone(),
                "aggregate".to_owned(),
                fmt(a.drop_salience),
                fmt(a.increase_salience),
                fmt(a.drop_context),
                fmt(a.increase_context),
                fmt_opt(a.pointing_hit),
                fmt_opt(a.dice),
                fmt_opt(a.iou),
                fmt(a.insertion_auc),
                fmt(a.deletion_auc),
                String::new(),
            ])
            .map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(csv_err)?;
    String::from_utf8(bytes).map_err(csv_err)
}

/// Aggregate metrics side by side, with `delta = last − first` method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub methods: Vec<String>,
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub values: Vec<Option<f64>>,
    pub delta: Option<f64>,
}

/// `None` unless at least two reports are given.
pub fn compare(reports: &[MetricReport]) -> Option<Comparison> {
    if reports.len() < 2 {
        return None;
    }
    let rows = METRIC_NAMES
        .iter()
        .map(|&metric| {
            let values: Vec<Option<f64>> = reports
                .iter()
                .map(|r| r.aggregate.as_ref().and_then(|a| a.metric(metric)))
                .collect();
            let delta = match (values.first(), values.last()) {
                (Some(Some(a)), Some(Some(b))) => Some(b - a),
                _ => None,
            };
            ComparisonRow {
                metric: metric.to_owned(),
                values,
                delta,
            }
        })
        .collect();
    Some(Comparison {
        methods: reports.iter().map(|r| r.method.clone()).collect(),
        rows,
    })
}

pub fn comparison_csv(cmp: &Comparison) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["metric".to_owned()];
    header.extend(cmp.methods.iter().cloned());
    header.push("delta".to_owned());
    w.write_record(&header).map_err(csv_err)?;
    for row in &cmp.rows {
        let mut rec = vec![row.metric.clone()];
        rec.extend(row.values.iter().map(|v| fmt_opt(*v)));
        rec.push(fmt_opt(row.delta));
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(csv_err)?;
    String::from_utf8(bytes).map_err(csv_err)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub reports: Vec<MetricReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Comparison>,
}

pub fn to_json(reports: &[MetricReport]) -> Result<String> {
    let file = ReportFile {
        reports: reports.to_vec(),
        comparison: compare(reports),
    };
    serde_json::to_string_pretty(&file)
        .map(|s| s + "\n")
        .map_err(|e| Error::Format(format!("writing json: {e}")))
}
