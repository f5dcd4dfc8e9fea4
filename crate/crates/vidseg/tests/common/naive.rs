//! Independent naive reference implementation of the panoptic metrics.
//!
//! Every window and every tube is materialized as an explicit pixel
//! set; nothing is shared with the library's accumulator-based path.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use vidseg::data::category::CategoryTable;
use vidseg::data::video::VideoAnnotation;

pub type Pixel = (usize, u32, u32);

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NaiveClassStats {
    pub iou_sum: f64,
    pub tp: u64,
    pub fp: u64,
    pub fn_count: u64,
}

/// Pixel set of every track over the frame range, plus the set of
/// pixels the video leaves void.
fn tubes(
    video: &VideoAnnotation,
    start: usize,
    end: usize,
) -> (BTreeMap<u32, HashSet<Pixel>>, HashSet<Pixel>) {
    let mut by_track: BTreeMap<u32, HashSet<Pixel>> = BTreeMap::new();
    let mut void = HashSet::new();
    for f in start..end {
        let frame = &video.frames[f];
        for y in 0..frame.height() {
            for x in 0..frame.width() {
                let id = frame.get(x, y);
                if id == 0 {
                    void.insert((f, x, y));
                } else {
                    by_track
                        .entry(video.registry[&id].track_id)
                        .or_default()
                        .insert((f, x, y));
                }
            }
        }
    }
    (by_track, void)
}

fn tube_iou(gt: &HashSet<Pixel>, pred: &HashSet<Pixel>, gt_void: &HashSet<Pixel>) -> f64 {
    let inter = gt.intersection(pred).count();
    if inter == 0 {
        return 0.0;
    }
    let pred_adjusted = pred.iter().filter(|p| !gt_void.contains(p)).count();
    let union = gt.len() + pred_adjusted - inter;
    inter as f64 / union as f64
}

fn match_window(
    pred: &VideoAnnotation,
    gt: &VideoAnnotation,
    start: usize,
    end: usize,
    stats: &mut BTreeMap<u32, NaiveClassStats>,
) {
    let (gt_tubes, gt_void) = tubes(gt, start, end);
    let (pred_tubes, _) = tubes(pred, start, end);
    let gt_classes = gt.track_classes();
    let pred_classes = pred.track_classes();

    let mut matched_gt: BTreeSet<u32> = BTreeSet::new();
    let mut matched_pred: BTreeSet<u32> = BTreeSet::new();
    for (&g, g_pixels) in &gt_tubes {
        for (&p, p_pixels) in &pred_tubes {
            if gt_classes[&g] != pred_classes[&p] {
                continue;
            }
            let overlap = tube_iou(g_pixels, p_pixels, &gt_void);
            if overlap > 0.5 {
                assert!(matched_gt.insert(g), "matching above 0.5 must be unique");
                matched_pred.insert(p);
                let entry = stats.entry(gt_classes[&g]).or_default();
                entry.tp += 1;
                entry.iou_sum += overlap;
            }
        }
    }
    for (&g, _) in &gt_tubes {
        if !matched_gt.contains(&g) {
            stats.entry(gt_classes[&g]).or_default().fn_count += 1;
        }
    }
    for (&p, p_pixels) in &pred_tubes {
        if matched_pred.contains(&p) {
            continue;
        }
        let void_overlap = p_pixels.iter().filter(|px| gt_void.contains(px)).count();
        if void_overlap * 2 > p_pixels.len() {
            continue;
        }
        stats.entry(pred_classes[&p]).or_default().fp += 1;
    }
}

/// Windowed VPQ stats by explicit enumeration of windows and tubes.
pub fn naive_vpq_k(
    pred: &VideoAnnotation,
    gt: &VideoAnnotation,
    k: usize,
) -> BTreeMap<u32, NaiveClassStats> {
    let frame_count = gt.frame_count();
    let window = k.min(frame_count);
    let mut stats = BTreeMap::new();
    for start in 0..=(frame_count - window) {
        match_window(pred, gt, start, start + window, &mut stats);
    }
    stats
}

/// Per-class score and class mean, recomputed from scratch.
pub fn naive_score(stats: &BTreeMap<u32, NaiveClassStats>) -> f64 {
    let mut scores = Vec::new();
    for stat in stats.values() {
        if stat.tp + stat.fp + stat.fn_count == 0 {
            continue;
        }
        let denom = stat.tp as f64 + 0.5 * stat.fp as f64 + 0.5 * stat.fn_count as f64;
        scores.push(100.0 * stat.iou_sum / denom);
    }
    if scores.is_empty() {
        100.0
    } else {
        scores.iter().sum::<f64>() / scores.len() as f64
    }
}

/// Association and segmentation quality from explicit pixel sets.
pub fn naive_stq(
    pred: &VideoAnnotation,
    gt: &VideoAnnotation,
    categories: &CategoryTable,
    include_stuff_in_aq: bool,
) -> (f64, f64) {
    let frame_count = gt.frame_count();
    let (gt_tubes, gt_void) = tubes(gt, 0, frame_count);
    let (pred_tubes, _) = tubes(pred, 0, frame_count);
    let gt_classes = gt.track_classes();
    let pred_classes = pred.track_classes();

    // Association quality over ground-truth tracks, class-agnostic.
    let mut aq_sum = 0.0;
    let mut aq_tracks = 0u64;
    for (&g, g_pixels) in &gt_tubes {
        if !include_stuff_in_aq && categories.is_thing(gt_classes[&g]) == Some(false) {
            continue;
        }
        let mut credit = 0.0;
        for p_pixels in pred_tubes.values() {
            let inter = g_pixels.intersection(p_pixels).count();
            if inter == 0 {
                continue;
            }
            credit += inter as f64 * tube_iou(g_pixels, p_pixels, &gt_void);
        }
        aq_sum += credit / g_pixels.len() as f64;
        aq_tracks += 1;
    }
    let aq = if aq_tracks == 0 {
        0.0
    } else {
        aq_sum / aq_tracks as f64
    };

    // Segmentation quality: whole-video semantic IoU per class. The
    // prediction side only counts pixels on labeled ground truth.
    let mut gt_class_pixels: BTreeMap<u32, HashSet<Pixel>> = BTreeMap::new();
    for (&g, pixels) in &gt_tubes {
        gt_class_pixels
            .entry(gt_classes[&g])
            .or_default()
            .extend(pixels.iter().copied());
    }
    let mut pred_class_pixels: BTreeMap<u32, HashSet<Pixel>> = BTreeMap::new();
    for (&p, pixels) in &pred_tubes {
        pred_class_pixels
            .entry(pred_classes[&p])
            .or_default()
            .extend(pixels.iter().filter(|px| !gt_void.contains(px)).copied());
    }
    let mut classes: BTreeSet<u32> = gt_class_pixels.keys().copied().collect();
    for (&c, pixels) in &pred_class_pixels {
        if !pixels.is_empty() {
            classes.insert(c);
        }
    }
    let mut iou_total = 0.0;
    for &c in &classes {
        let empty = HashSet::new();
        let g = gt_class_pixels.get(&c).unwrap_or(&empty);
        let p = pred_class_pixels.get(&c).unwrap_or(&empty);
        let inter = g.intersection(p).count();
        let union = g.len() + p.len() - inter;
        if union > 0 {
            iou_total += inter as f64 / union as f64;
        }
    }
    let sq = if classes.is_empty() {
        0.0
    } else {
        iou_total / classes.len() as f64
    };

    (aq, sq)
}
