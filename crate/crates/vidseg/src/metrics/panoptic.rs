//! Panoptic metrics: per-frame PQ, windowed VPQ, and STQ.
//!
//! Matching uses the strict IoU > 0.5 rule, which guarantees a unique
//! matching without an assignment solve: a ground-truth tube can overlap
//! more than half of the union with at most one prediction tube. Stats
//! accumulate per class and merge fieldwise, so per-video and per-window
//! computations can run concurrently and reduce in any order.

use std::collections::{BTreeMap, BTreeSet};

use crate::data::category::CategoryTable;
use crate::data::raster::SegmentMap;
use crate::data::video::{Registry, VideoAnnotation};
use crate::error::{Error, Result};
use crate::matching::cooccur::{count_pairs, iou, CooccurrenceTable};
use crate::metrics::semantic::{miou, ConfusionAccumulator};

/// Per-class true positive, false positive, false negative counts plus
/// the IoU mass of the true positives.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClassStats {
    pub iou_sum: f64,
    pub tp: u64,
    pub fp: u64,
    pub fn_count: u64,
}

impl ClassStats {
    pub fn present(&self) -> bool {
        self.tp + self.fp + self.fn_count > 0
    }
}

/// Mergeable per-class accumulator behind every PQ-family score.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PanopticStats {
    classes: BTreeMap<u32, ClassStats>,
}

impl PanopticStats {
    pub fn new() -> Self {
        PanopticStats::default()
    }

    pub fn classes(&self) -> impl Iterator<Item = (u32, &ClassStats)> {
        self.classes.iter().map(|(&c, s)| (c, s))
    }

    pub fn get(&self, class_id: u32) -> ClassStats {
        self.classes.get(&class_id).copied().unwrap_or_default()
    }

    pub fn add_tp(&mut self, class_id: u32, iou: f64) {
        let entry = self.classes.entry(class_id).or_default();
        entry.tp += 1;
        entry.iou_sum += iou;
    }

    pub fn add_fp(&mut self, class_id: u32) {
        self.classes.entry(class_id).or_default().fp += 1;
    }

    pub fn add_fn(&mut self, class_id: u32) {
        self.classes.entry(class_id).or_default().fn_count += 1;
    }

    /// Fieldwise sum; associative and commutative.
    pub fn merge(&mut self, other: &PanopticStats) {
        for (&class_id, stats) in &other.classes {
            let entry = self.classes.entry(class_id).or_default();
            entry.iou_sum += stats.iou_sum;
            entry.tp += stats.tp;
            entry.fp += stats.fp;
            entry.fn_count += stats.fn_count;
        }
    }
}

/// PQ score in percent, per class and averaged over present classes.
#[derive(Debug, Clone, PartialEq)]
pub struct PqScore {
    pub per_class: BTreeMap<u32, f64>,
    pub mean: f64,
}

/// Scores accumulated stats: per class, 100 * iou_sum / (tp + fp/2 + fn/2).
/// Classes absent from both sides are excluded from the mean; with no
/// present class at all the mean is 100 (vacuously perfect).
pub fn score(stats: &PanopticStats) -> PqScore {
    let mut per_class = BTreeMap::new();
    for (class_id, s) in stats.classes() {
        if !s.present() {
            continue;
        }
        let denom = s.tp as f64 + 0.5 * s.fp as f64 + 0.5 * s.fn_count as f64;
        per_class.insert(class_id, 100.0 * s.iou_sum / denom);
    }
    let mean = if per_class.is_empty() {
        100.0
    } else {
        per_class.values().sum::<f64>() / per_class.len() as f64
    };
    PqScore { per_class, mean }
}

/// Arithmetic mean of per-window scores; the headline VPQ number.
pub fn vpq_aggregate(per_k: &BTreeMap<usize, f64>) -> Result<f64> {
    if per_k.is_empty() {
        return Err(Error::validation(
            "vpq aggregate needs at least one window score",
        ));
    }
    Ok(per_k.values().sum::<f64>() / per_k.len() as f64)
}

/// One frame of a video plus the registry interpreting its ids.
#[derive(Debug, Clone, Copy)]
pub struct AnnotatedFrame<'a> {
    pub map: &'a SegmentMap,
    pub registry: &'a Registry,
}

fn check_registered(map: &SegmentMap, registry: &Registry, frame_idx: usize) -> Result<()> {
    for id in map.present_ids() {
        if !registry.contains_key(&id) {
            return Err(Error::validation(format!(
                "frame {frame_idx} contains unregistered segment id {id}"
            )));
        }
    }
    Ok(())
}

fn check_classes_known(registry: &Registry, categories: &CategoryTable) -> Result<()> {
    for rec in registry.values() {
        if !categories.contains(rec.class_id) {
            return Err(Error::validation(format!(
                "segment registry references unknown class id {}",
                rec.class_id
            )));
        }
    }
    Ok(())
}

/// Track-keyed co-occurrence of one (gt, pred) frame pair. The a side is
/// ground truth.
fn frame_track_table(
    gt: AnnotatedFrame,
    pred: AnnotatedFrame,
    frame_idx: usize,
) -> Result<CooccurrenceTable> {
    check_registered(gt.map, gt.registry, frame_idx)?;
    check_registered(pred.map, pred.registry, frame_idx)?;
    let mut table = CooccurrenceTable::new();
    accumulate_tube(
        &mut table,
        gt.map,
        pred.map,
        |id| gt.registry[&id].track_id,
        |id| pred.registry[&id].track_id,
    )?;
    Ok(table)
}

/// Matches same-class tubes with IoU > 0.5 and classifies the rest.
/// Unmatched prediction tubes whose overlap with reference void exceeds
/// half their area are ignored rather than counted as false positives.
fn match_tubes(
    table: &CooccurrenceTable,
    gt_classes: &BTreeMap<u32, u32>,
    pred_classes: &BTreeMap<u32, u32>,
) -> Result<PanopticStats> {
    let mut stats = PanopticStats::new();
    let mut matched_gt: BTreeSet<u32> = BTreeSet::new();
    let mut matched_pred: BTreeSet<u32> = BTreeSet::new();

    for (&(g, p), &inter) in table.pairs() {
        if g == 0 || p == 0 || inter == 0 {
            continue;
        }
        let class = gt_classes[&g];
        if class != pred_classes[&p] {
            continue;
        }
        let overlap = iou(table, g, p)?;
        if overlap > 0.5 {
            let fresh = matched_gt.insert(g);
            debug_assert!(fresh, "IoU > 0.5 match is unique per tube");
            matched_pred.insert(p);
            stats.add_tp(class, overlap);
        }
    }

    for g in table.ids_a() {
        if !matched_gt.contains(&g) {
            stats.add_fn(gt_classes[&g]);
        }
    }
    for p in table.ids_b() {
        if matched_pred.contains(&p) {
            continue;
        }
        let area = table.area_b(p).unwrap_or(0);
        let void_overlap = table.pair(0, p);
        if void_overlap * 2 > area {
            continue;
        }
        stats.add_fp(pred_classes[&p]);
    }
    Ok(stats)
}

/// PQ stats of a single (prediction, ground-truth) frame pair. Segments
/// sharing a track within the frame count as one logical segment, which
/// keeps the k = 1 window of [`vpq_k`] definitionally identical to the
/// merge of per-frame stats.
pub fn frame_pq_stats(
    pred: AnnotatedFrame,
    gt: AnnotatedFrame,
    categories: &CategoryTable,
) -> Result<PanopticStats> {
    if !pred.map.same_shape(gt.map) {
        return Err(Error::validation("frame resolution mismatch"));
    }
    check_classes_known(&gt.registry, categories)?;
    check_classes_known(&pred.registry, categories)?;
    let table = frame_track_table(gt, pred, 0)?;
    let gt_classes = track_classes(gt.registry);
    let pred_classes = track_classes(pred.registry);
    match_tubes(&table, &gt_classes, &pred_classes)
}

fn track_classes(registry: &Registry) -> BTreeMap<u32, u32> {
    registry
        .values()
        .map(|rec| (rec.track_id, rec.class_id))
        .collect()
}

fn check_pair(pred: &VideoAnnotation, gt: &VideoAnnotation) -> Result<()> {
    if pred.frame_count() != gt.frame_count() {
        return Err(Error::validation(format!(
            "frame count mismatch: prediction has {}, ground truth has {}",
            pred.frame_count(),
            gt.frame_count()
        )));
    }
    if gt.frames.is_empty() {
        return Err(Error::validation("empty videos cannot be scored"));
    }
    if pred.width() != gt.width() || pred.height() != gt.height() {
        return Err(Error::validation("video resolution mismatch"));
    }
    Ok(())
}

/// Per-frame track-keyed tables for a video pair, the shared input of
/// every windowed computation.
fn per_frame_tables(pred: &VideoAnnotation, gt: &VideoAnnotation) -> Result<Vec<CooccurrenceTable>> {
    gt.frames
        .iter()
        .zip(&pred.frames)
        .enumerate()
        .map(|(idx, (gt_map, pred_map))| {
            frame_track_table(
                AnnotatedFrame {
                    map: gt_map,
                    registry: &gt.registry,
                },
                AnnotatedFrame {
                    map: pred_map,
                    registry: &pred.registry,
                },
                idx,
            )
        })
        .collect()
}

fn windowed_stats(
    tables: &[CooccurrenceTable],
    gt_classes: &BTreeMap<u32, u32>,
    pred_classes: &BTreeMap<u32, u32>,
    k: usize,
) -> Result<PanopticStats> {
    let frame_count = tables.len();
    let window = k.min(frame_count);
    let mut stats = PanopticStats::new();
    for start in 0..=(frame_count - window) {
        let mut table = CooccurrenceTable::new();
        for frame_table in &tables[start..start + window] {
            table.merge(frame_table);
        }
        stats.merge(&match_tubes(&table, gt_classes, pred_classes)?);
    }
    Ok(stats)
}

/// VPQ stats for one window length: tubes are built over every window of
/// min(k, T) consecutive frames at stride 1 and matched within class.
pub fn vpq_k(
    pred: &VideoAnnotation,
    gt: &VideoAnnotation,
    k: usize,
    categories: &CategoryTable,
) -> Result<PanopticStats> {
    let per_k = vpq_multi(pred, gt, &[k], categories)?;
    Ok(per_k.into_iter().next().expect("one window requested").1)
}

/// VPQ stats for several window lengths in one pass over the pixels.
pub fn vpq_multi(
    pred: &VideoAnnotation,
    gt: &VideoAnnotation,
    windows: &[usize],
    categories: &CategoryTable,
) -> Result<BTreeMap<usize, PanopticStats>> {
    if windows.is_empty() {
        return Err(Error::validation("no window lengths given"));
    }
    if let Some(&bad) = windows.iter().find(|&&k| k == 0) {
        return Err(Error::validation(format!(
            "window length must be at least 1, got {bad}"
        )));
    }
    check_pair(pred, gt)?;
    check_classes_known(&gt.registry, categories)?;
    check_classes_known(&pred.registry, categories)?;

    let tables = per_frame_tables(pred, gt)?;
    let gt_classes = track_classes(&gt.registry);
    let pred_classes = track_classes(&pred.registry);

    let mut out = BTreeMap::new();
    for &k in windows {
        if !out.contains_key(&k) {
            out.insert(k, windowed_stats(&tables, &gt_classes, &pred_classes, k)?);
        }
    }
    Ok(out)
}

/// Options for [`stq`]. Stuff tracks take part in association quality by
/// default; a flag excludes them for comparability with evaluators that
/// only associate things.
#[derive(Debug, Clone, Copy)]
pub struct StqOptions {
    pub include_stuff_in_aq: bool,
}

impl Default for StqOptions {
    fn default() -> Self {
        StqOptions {
            include_stuff_in_aq: true,
        }
    }
}

/// Segmentation and tracking quality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StqReport {
    pub aq: f64,
    pub sq: f64,
    pub stq: f64,
}

/// Mergeable pieces of STQ, so dataset-level scores pool every track and
/// every pixel rather than averaging per-video scores.
#[derive(Debug, Clone, Default)]
pub struct StqParts {
    /// Sum over ground-truth tracks of the per-track association score.
    pub aq_sum: f64,
    /// Number of ground-truth tracks considered.
    pub aq_tracks: u64,
    /// Whole-video semantic confusion.
    pub confusion: ConfusionAccumulator,
}

impl StqParts {
    pub fn merge(&mut self, other: &StqParts) {
        self.aq_sum += other.aq_sum;
        self.aq_tracks += other.aq_tracks;
        self.confusion.merge(&other.confusion);
    }
}

/// Computes the mergeable STQ pieces of one video pair.
///
/// Association quality credits each prediction tube p that touches a
/// ground-truth tube g with |p ∩ g| * IoU(p, g), normalized by |g|;
/// association ignores classes. Segmentation quality is the semantic
/// mean IoU of the class-merged videos.
pub fn stq_parts(
    pred: &VideoAnnotation,
    gt: &VideoAnnotation,
    categories: &CategoryTable,
    options: StqOptions,
) -> Result<StqParts> {
    check_pair(pred, gt)?;
    check_classes_known(&gt.registry, categories)?;
    check_classes_known(&pred.registry, categories)?;

    let tables = per_frame_tables(pred, gt)?;
    let mut table = CooccurrenceTable::new();
    for frame_table in &tables {
        table.merge(frame_table);
    }

    let gt_classes = track_classes(&gt.registry);
    let mut aq_sum = 0.0;
    let mut aq_tracks = 0u64;
    for g in table.ids_a() {
        if !options.include_stuff_in_aq
            && categories.is_thing(gt_classes[&g]) == Some(false)
        {
            continue;
        }
        let g_area = table.area_a(g).expect("id taken from table") as f64;
        let mut credit = 0.0;
        for (p, inter) in table.row(g) {
            if p == 0 || inter == 0 {
                continue;
            }
            credit += inter as f64 * iou(&table, g, p)?;
        }
        aq_sum += credit / g_area;
        aq_tracks += 1;
    }

    let gt_sem = pan_to_sem(gt, categories)?;
    let pred_sem = pan_to_sem(pred, categories)?;
    let conf = confusion(&pred_sem, &gt_sem)?;

    Ok(StqParts {
        aq_sum,
        aq_tracks,
        confusion: conf,
    })
}

/// Finishes STQ from accumulated parts: STQ = sqrt(AQ * SQ).
pub fn stq_from_parts(parts: &StqParts) -> Result<StqReport> {
    let aq = if parts.aq_tracks == 0 {
        0.0
    } else {
        parts.aq_sum / parts.aq_tracks as f64
    };
    let sq = miou(&parts.confusion)?;
    Ok(StqReport {
        aq,
        sq,
        stq: (aq * sq).sqrt(),
    })
}

/// STQ of a single video pair.
pub fn stq(
    pred: &VideoAnnotation,
    gt: &VideoAnnotation,
    categories: &CategoryTable,
    options: StqOptions,
) -> Result<StqReport> {
    stq_from_parts(&stq_parts(pred, gt, categories, options)?)
}
