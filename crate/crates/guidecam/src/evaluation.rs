//! Batch evaluation over a collection with one scorer per worker thread.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use guidecam_core::evaluate::{evaluate_image, EvalConfig, ImageInputs, ImageRecord};
use guidecam_core::{Method, Scorer};

use crate::bundle::load_bundle;
use crate::datasets::EvalItem;
use crate::error::Result;
use crate::inference::InputSpec;
use crate::report::{ImageMetrics, ItemFailure, MetricReport, ReportSettings};

/// Builds a fresh scorer for a worker.
pub type ScorerFactory<'a> = dyn Fn(&InputSpec) -> Result<Box<dyn Scorer + Send>> + Sync + 'a;

fn evaluate_item(
    item: &EvalItem,
    method: Method,
    cfg: &EvalConfig,
    factory: &ScorerFactory<'_>,
    cached: &mut Option<(InputSpec, Box<dyn Scorer + Send>)>,
) -> Result<ImageRecord> {
    let bundle = load_bundle(&item.bundle_path)?;
    let spec = InputSpec::for_bundle(&bundle);
    if cached.as_ref().is_none_or(|(s, _)| *s != spec) {
        *cached = Some((spec.clone(), factory(&spec)?));
    }
    let scorer = &mut cached.as_mut().expect("scorer just built").1;
    let inputs = ImageInputs {
        image: bundle.image(),
        features: bundle.features(),
        gradients: bundle.gradients(),
        class_index: bundle.class_index(),
        annotation: Some((&item.annotation, item.target_class)),
    };
    let (_, record) = evaluate_image(&inputs, method, cfg, scorer)?;
    Ok(record)
}

/// Evaluates every item with `method`.
///
/// Items are processed by `workers` threads in any order; results are reduced
/// in item order, so the report does not depend on scheduling. Failing items
/// are listed in the report and excluded from the aggregate.
pub fn evaluate_collection(
    items: &[EvalItem],
    method: Method,
    cfg: &EvalConfig,
    settings: ReportSettings,
    workers: usize,
    factory: &ScorerFactory<'_>,
) -> Result<MetricReport> {
    cfg.validate()?;
    let slots: Vec<Mutex<Option<Result<ImageRecord>>>> =
        items.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = workers.clamp(1, items.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| {
                let mut cached = None;
                loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(item) = items.get(i) else { break };
                    let result = evaluate_item(item, method, cfg, factory, &mut cached);
                    *slots[i].lock().expect("slot lock") = Some(result);
                }
            });
        }
    });

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (item, slot) in items.iter().zip(slots) {
        match slot
            .into_inner()
            .expect("slot lock")
            .expect("every item visited")
        {
            Ok(record) => records.push(ImageMetrics::new(&item.stem, &record)),
            Err(e) => failures.push(ItemFailure {
                item: item.stem.clone(),
                error: e.to_string(),
            }),
        }
    }
    Ok(MetricReport::new(method, settings, records, failures))
}
