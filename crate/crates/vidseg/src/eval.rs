//! Dataset-level evaluation drivers.
//!
//! Videos are processed by a worker pool and reduced in canonical
//! video-id order, so reports are byte-identical regardless of the
//! worker count. The ground-truth root's catalog is authoritative;
//! predictions carrying unknown class ids fail validation rather than
//! being dropped.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::data::category::CategoryTable;
use crate::data::io::{self, DatasetRoot};
use crate::data::video::{pan_to_sem, SemanticVideo};
use crate::error::{Error, Result};
use crate::metrics::panoptic::{
    score, stq_from_parts, stq_parts, vpq_aggregate, vpq_multi, PanopticStats, StqOptions,
    StqParts,
};
use crate::metrics::semantic::{
    confusion, miou, vc_stats, weighted_iou, ConfusionAccumulator, VcMode, VcStats,
};
use crate::report::{MetricReport, MetricValues, ReportConfig, StqValues, VpqValues};

/// Options for [`evaluate_vps`].
#[derive(Debug, Clone)]
pub struct VpsOptions {
    /// Window lengths; the headline VPQ is their mean.
    pub windows: Vec<usize>,
    /// Average per-video scores instead of pooling stats per class
    /// across the whole dataset.
    pub per_video_aggregation: bool,
    /// Whether stuff tracks take part in association quality.
    pub include_stuff_in_aq: bool,
    /// Worker threads; 0 picks the machine default.
    pub workers: usize,
}

impl Default for VpsOptions {
    fn default() -> Self {
        VpsOptions {
            windows: vec![1, 2, 4, 6],
            per_video_aggregation: false,
            include_stuff_in_aq: true,
            workers: 0,
        }
    }
}

/// How dataset-level video consistency is aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VcAggregation {
    /// Mean of per-video window means.
    PerVideoMean,
    /// Pooled pixel tallies over all windows of all videos; with n = 1
    /// this equals accuracy over non-void ground truth.
    Pooled,
}

/// Options for [`evaluate_vss`].
#[derive(Debug, Clone)]
pub struct VssOptions {
    /// Consistency window lengths.
    pub vc: Vec<usize>,
    pub vc_mode: VcMode,
    pub vc_aggregation: VcAggregation,
    pub workers: usize,
}

impl Default for VssOptions {
    fn default() -> Self {
        VssOptions {
            vc: vec![8, 16],
            vc_mode: VcMode::Strict,
            vc_aggregation: VcAggregation::PerVideoMean,
            workers: 0,
        }
    }
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::validation(format!("cannot build worker pool: {e}")))
}

/// Checks that both roots expose exactly the same video ids and returns
/// them in canonical order.
fn matched_video_ids(gt: &DatasetRoot, pred: &DatasetRoot) -> Result<Vec<String>> {
    let gt_ids = gt.video_ids()?;
    let pred_ids = pred.video_ids()?;
    if gt_ids != pred_ids {
        let missing = gt_ids
            .iter()
            .filter(|id| !pred_ids.contains(id))
            .cloned()
            .collect();
        let extra = pred_ids
            .iter()
            .filter(|id| !gt_ids.contains(id))
            .cloned()
            .collect();
        return Err(Error::VideoSetMismatch { missing, extra });
    }
    if gt_ids.is_empty() {
        return Err(Error::validation("dataset roots contain no videos"));
    }
    Ok(gt_ids)
}

struct VpsVideoResult {
    video_id: String,
    per_k: BTreeMap<usize, PanopticStats>,
    stq: StqParts,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Evaluates video panoptic segmentation metrics (VPQ per window, VPQ,
/// STQ) of a prediction root against a ground-truth root.
pub fn evaluate_vps(
    gt_root: &Path,
    pred_root: &Path,
    options: &VpsOptions,
) -> Result<MetricReport> {
    if options.windows.is_empty() {
        return Err(Error::Usage("no VPQ windows requested".into()));
    }
    let started = Instant::now();
    let gt = DatasetRoot::new(gt_root);
    let pred = DatasetRoot::new(pred_root);
    let ids = matched_video_ids(&gt, &pred)?;
    let categories = gt.load_categories()?;

    let stq_options = StqOptions {
        include_stuff_in_aq: options.include_stuff_in_aq,
    };
    let pool = build_pool(options.workers)?;
    let results: Vec<VpsVideoResult> = pool.install(|| {
        ids.par_iter()
            .map(|video_id| -> Result<VpsVideoResult> {
                let gt_video = io::load_video(&gt.video_dir(video_id), &categories)?;
                let pred_video = io::load_video(&pred.video_dir(video_id), &categories)?;
                let per_k = vpq_multi(&pred_video, &gt_video, &options.windows, &categories)?;
                let stq = stq_parts(&pred_video, &gt_video, &categories, stq_options)?;
                Ok(VpsVideoResult {
                    video_id: video_id.clone(),
                    per_k,
                    stq,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    // Canonical-order reduction.
    let mut per_video = BTreeMap::new();
    let mut merged_per_k: BTreeMap<usize, PanopticStats> = BTreeMap::new();
    let mut merged_stq = StqParts::default();
    let mut video_scores: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut video_aq = Vec::new();
    let mut video_sq = Vec::new();
    for result in &results {
        let mut per_k_scores = BTreeMap::new();
        for (&k, stats) in &result.per_k {
            let s = score(stats).mean;
            per_k_scores.insert(k, s);
            video_scores.entry(k).or_default().push(s);
            merged_per_k.entry(k).or_default().merge(stats);
        }
        let vpq = vpq_aggregate(&per_k_scores)?;
        let video_stq = stq_from_parts(&result.stq)?;
        video_aq.push(video_stq.aq);
        video_sq.push(video_stq.sq);
        merged_stq.merge(&result.stq);
        per_video.insert(
            result.video_id.clone(),
            MetricValues {
                vpq_percent: Some(VpqValues {
                    per_k: per_k_scores,
                    vpq,
                }),
                stq: Some(StqValues {
                    aq: video_stq.aq,
                    sq: video_stq.sq,
                    stq: video_stq.stq,
                }),
                ..MetricValues::default()
            },
        );
    }

    let aggregate = if options.per_video_aggregation {
        let per_k: BTreeMap<usize, f64> = video_scores
            .iter()
            .map(|(&k, scores)| (k, mean(scores)))
            .collect();
        let vpq = vpq_aggregate(&per_k)?;
        let aq = mean(&video_aq);
        let sq = mean(&video_sq);
        MetricValues {
            vpq_percent: Some(VpqValues { per_k, vpq }),
            stq: Some(StqValues {
                aq,
                sq,
                stq: (aq * sq).sqrt(),
            }),
            ..MetricValues::default()
        }
    } else {
        let per_k: BTreeMap<usize, f64> = merged_per_k
            .iter()
            .map(|(&k, stats)| (k, score(stats).mean))
            .collect();
        let vpq = vpq_aggregate(&per_k)?;
        let stq = stq_from_parts(&merged_stq)?;
        MetricValues {
            vpq_percent: Some(VpqValues { per_k, vpq }),
            stq: Some(StqValues {
                aq: stq.aq,
                sq: stq.sq,
                stq: stq.stq,
            }),
            ..MetricValues::default()
        }
    };

    Ok(MetricReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: ReportConfig {
            task: "vps".into(),
            windows: options.windows.clone(),
            vc: Vec::new(),
            per_video_aggregation: options.per_video_aggregation,
            vc_mode: String::new(),
            vc_aggregation: String::new(),
            include_stuff_in_aq: options.include_stuff_in_aq,
        },
        aggregate,
        per_video,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

struct VssVideoResult {
    video_id: String,
    confusion: ConfusionAccumulator,
    vc: BTreeMap<usize, VcStats>,
}

fn load_semantic_any(
    root: &DatasetRoot,
    video_id: &str,
    categories: &CategoryTable,
) -> Result<SemanticVideo> {
    let dir = root.video_dir(video_id);
    if io::is_panoptic_video_dir(&dir) {
        let video = io::load_video(&dir, categories)?;
        pan_to_sem(&video, categories)
    } else {
        io::load_semantic_video(&dir, categories)
    }
}

/// Evaluates video semantic segmentation metrics (mIoU, weighted IoU,
/// VC per window) of a prediction root against a ground-truth root.
/// Panoptic inputs on either side are converted by merging all
/// instances of a class into one mask.
pub fn evaluate_vss(
    gt_root: &Path,
    pred_root: &Path,
    options: &VssOptions,
) -> Result<MetricReport> {
    if options.vc.is_empty() {
        return Err(Error::Usage("no VC window lengths requested".into()));
    }
    let started = Instant::now();
    let gt = DatasetRoot::new(gt_root);
    let pred = DatasetRoot::new(pred_root);
    let ids = matched_video_ids(&gt, &pred)?;
    let categories = gt.load_categories()?;

    let pool = build_pool(options.workers)?;
    let results: Vec<VssVideoResult> = pool.install(|| {
        ids.par_iter()
            .map(|video_id| -> Result<VssVideoResult> {
                let gt_video = load_semantic_any(&gt, video_id, &categories)?;
                let pred_video = load_semantic_any(&pred, video_id, &categories)?;
                let acc = confusion(&pred_video, &gt_video)?;
                let mut vc = BTreeMap::new();
                for &n in &options.vc {
                    vc.insert(n, vc_stats(&pred_video, &gt_video, n, options.vc_mode)?);
                }
                Ok(VssVideoResult {
                    video_id: video_id.clone(),
                    confusion: acc,
                    vc,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut per_video = BTreeMap::new();
    let mut merged_confusion = ConfusionAccumulator::new();
    let mut merged_vc: BTreeMap<usize, VcStats> = BTreeMap::new();
    let mut video_vc_means: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for result in &results {
        merged_confusion.merge(&result.confusion);
        let mut vc_values = BTreeMap::new();
        for (&n, stats) in &result.vc {
            merged_vc.entry(n).or_default().merge(stats);
            let value = match options.vc_aggregation {
                VcAggregation::PerVideoMean => stats.window_mean(),
                VcAggregation::Pooled => stats.pooled(),
            };
            if let Some(value) = value {
                vc_values.insert(n, value);
                video_vc_means.entry(n).or_default().push(value);
            }
        }
        per_video.insert(
            result.video_id.clone(),
            MetricValues {
                miou: Some(miou(&result.confusion)?),
                weighted_iou: Some(weighted_iou(&result.confusion)?),
                vc: Some(vc_values),
                ..MetricValues::default()
            },
        );
    }

    let mut aggregate_vc = BTreeMap::new();
    for &n in &options.vc {
        let value = match options.vc_aggregation {
            VcAggregation::PerVideoMean => video_vc_means
                .get(&n)
                .filter(|values| !values.is_empty())
                .map(|values| mean(values)),
            VcAggregation::Pooled => merged_vc.get(&n).and_then(|stats| stats.pooled()),
        };
        let value = value.ok_or_else(|| {
            Error::validation(format!("no stable windows anywhere for VC{n}"))
        })?;
        aggregate_vc.insert(n, value);
    }

    let aggregate = MetricValues {
        miou: Some(miou(&merged_confusion)?),
        weighted_iou: Some(weighted_iou(&merged_confusion)?),
        vc: Some(aggregate_vc),
        ..MetricValues::default()
    };

    Ok(MetricReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: ReportConfig {
            task: "vss".into(),
            windows: Vec::new(),
            vc: options.vc.clone(),
            per_video_aggregation: false,
            vc_mode: match options.vc_mode {
                VcMode::Strict => "strict".into(),
                VcMode::SelfConsistent => "self".into(),
            },
            vc_aggregation: match options.vc_aggregation {
                VcAggregation::PerVideoMean => "per-video".into(),
                VcAggregation::Pooled => "pooled".into(),
            },
            include_stuff_in_aq: false,
        },
        aggregate,
        per_video,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}
