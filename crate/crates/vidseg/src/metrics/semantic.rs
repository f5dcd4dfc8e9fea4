//! Semantic metrics over class-id videos: mean IoU, ground-truth-weighted
//! IoU, and n-frame video consistency.

use std::collections::{BTreeMap, BTreeSet};

use crate::data::video::SemanticVideo;
use crate::error::{Error, Result};
use crate::matching::cooccur::cooccurrence;

/// Per-class-pair pixel counts. Pixels whose ground-truth label is void
/// are excluded entirely; prediction void is kept as a reserved column
/// (class 0) so missing prediction coverage still costs recall.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfusionAccumulator {
    counts: BTreeMap<(u32, u32), u64>,
}

impl ConfusionAccumulator {
    pub fn new() -> Self {
        ConfusionAccumulator::default()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn count(&self, gt_class: u32, pred_class: u32) -> u64 {
        self.counts.get(&(gt_class, pred_class)).copied().unwrap_or(0)
    }

    pub fn add(&mut self, gt_class: u32, pred_class: u32, count: u64) {
        debug_assert!(gt_class != 0, "ground-truth void is excluded");
        if count > 0 {
            *self.counts.entry((gt_class, pred_class)).or_insert(0) += count;
        }
    }

    /// Pointwise sum.
    pub fn merge(&mut self, other: &ConfusionAccumulator) {
        for (&(g, p), &count) in &other.counts {
            self.add(g, p, count);
        }
    }

    pub fn total_gt_pixels(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Ground-truth pixel count of one class.
    pub fn gt_area(&self, class_id: u32) -> u64 {
        self.counts
            .range((class_id, 0)..=(class_id, u32::MAX))
            .map(|(_, &c)| c)
            .sum()
    }

    /// Predicted pixel count of one class over labeled ground truth.
    pub fn pred_area(&self, class_id: u32) -> u64 {
        self.counts
            .iter()
            .filter(|(&(_, p), _)| p == class_id)
            .map(|(_, &c)| c)
            .sum()
    }

    /// Classes that occur on either side, excluding void.
    pub fn classes(&self) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        for &(g, p) in self.counts.keys() {
            out.insert(g);
            if p != 0 {
                out.insert(p);
            }
        }
        out
    }

    /// Per-class intersection over union.
    pub fn class_iou(&self, class_id: u32) -> f64 {
        let inter = self.count(class_id, class_id);
        let union = self.gt_area(class_id) + self.pred_area(class_id) - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }
}

/// Accumulates the class confusion of a video pair over all frames.
pub fn confusion(pred: &SemanticVideo, gt: &SemanticVideo) -> Result<ConfusionAccumulator> {
    if pred.frame_count() != gt.frame_count() {
        return Err(Error::validation(format!(
            "frame count mismatch: prediction has {}, ground truth has {}",
            pred.frame_count(),
            gt.frame_count()
        )));
    }
    let mut acc = ConfusionAccumulator::new();
    for (gt_frame, pred_frame) in gt.frames.iter().zip(&pred.frames) {
        let table = cooccurrence(gt_frame, pred_frame)?;
        for (&(g, p), &count) in table.pairs() {
            if g != 0 {
                acc.add(g, p, count);
            }
        }
    }
    Ok(acc)
}

/// Mean IoU over classes present on either side.
pub fn miou(acc: &ConfusionAccumulator) -> Result<f64> {
    if acc.is_empty() {
        return Err(Error::validation(
            "confusion accumulator holds no ground-truth pixels",
        ));
    }
    let classes = acc.classes();
    let sum: f64 = classes.iter().map(|&c| acc.class_iou(c)).sum();
    Ok(sum / classes.len() as f64)
}

/// IoU weighted by each class's share of the ground-truth pixels.
pub fn weighted_iou(acc: &ConfusionAccumulator) -> Result<f64> {
    let total = acc.total_gt_pixels();
    if total == 0 {
        return Err(Error::validation(
            "confusion accumulator holds no ground-truth pixels",
        ));
    }
    let mut out = 0.0;
    for &c in &acc.classes() {
        let weight = acc.gt_area(c) as f64 / total as f64;
        if weight > 0.0 {
            out += weight * acc.class_iou(c);
        }
    }
    Ok(out)
}

/// What counts as a consistent prediction inside a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VcMode {
    /// Prediction must equal the stable ground-truth label in every frame.
    Strict,
    /// Prediction must be constant and non-void, not necessarily correct.
    SelfConsistent,
}

/// Mergeable video-consistency tallies for one window length.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VcStats {
    /// Sum of per-window ratios (windows with no stable pixels skipped).
    pub ratio_sum: f64,
    /// Number of windows that had at least one stable pixel.
    pub window_count: u64,
    /// Total consistent pixels over all windows.
    pub matched: u64,
    /// Total stable ground-truth pixels over all windows.
    pub stable: u64,
}

impl VcStats {
    pub fn merge(&mut self, other: &VcStats) {
        self.ratio_sum += other.ratio_sum;
        self.window_count += other.window_count;
        self.matched += other.matched;
        self.stable += other.stable;
    }

    /// Mean of per-window ratios.
    pub fn window_mean(&self) -> Option<f64> {
        (self.window_count > 0).then(|| self.ratio_sum / self.window_count as f64)
    }

    /// Ratio of pooled pixel tallies. With n = 1 this is exactly the
    /// pixel accuracy over non-void ground truth.
    pub fn pooled(&self) -> Option<f64> {
        (self.stable > 0).then(|| self.matched as f64 / self.stable as f64)
    }
}

/// Video consistency tallies of one video pair for windows of
/// min(n, T) consecutive frames at stride 1.
///
/// A pixel is stable in a window when its ground-truth label is non-void
/// and identical across the window; it is consistent when the prediction
/// agrees with that label in every frame (strict mode) or carries any
/// constant non-void label (self-consistent mode).
pub fn vc_stats(
    pred: &SemanticVideo,
    gt: &SemanticVideo,
    n: usize,
    mode: VcMode,
) -> Result<VcStats> {
    if n == 0 {
        return Err(Error::validation("window length must be at least 1"));
    }
    let t = gt.frame_count();
    if t == 0 || pred.frame_count() != t {
        return Err(Error::validation(format!(
            "frame count mismatch: prediction has {}, ground truth has {}",
            pred.frame_count(),
            t
        )));
    }
    for (gt_frame, pred_frame) in gt.frames.iter().zip(&pred.frames) {
        if !gt_frame.same_shape(pred_frame) {
            return Err(Error::validation("frame resolution mismatch"));
        }
    }

    let window = n.min(t);
    let pixels = gt.frames[0].pixel_count();

    // Run lengths counted from each frame: gt_run[p] is how many
    // consecutive frames starting here keep the same non-void gt label,
    // ok_run[p] how many keep the prediction consistent. Walking frames
    // backwards makes each window test two lookups per pixel.
    let mut gt_run = vec![0u32; pixels];
    let mut ok_run = vec![0u32; pixels];
    let mut stats = VcStats::default();

    let mut window_ratios: Vec<f64> = Vec::with_capacity(t);
    for f in (0..t).rev() {
        let gt_now = gt.frames[f].ids();
        let pred_now = pred.frames[f].ids();
        let gt_next = (f + 1 < t).then(|| gt.frames[f + 1].ids());
        let pred_next = (f + 1 < t).then(|| pred.frames[f + 1].ids());

        for p in 0..pixels {
            let g = gt_now[p];
            gt_run[p] = if g == 0 {
                0
            } else if gt_next.map_or(false, |next| next[p] == g) {
                gt_run[p] + 1
            } else {
                1
            };

            let ok_now = match mode {
                VcMode::Strict => g != 0 && pred_now[p] == g,
                VcMode::SelfConsistent => pred_now[p] != 0,
            };
            let continues = match mode {
                VcMode::Strict => gt_next.map_or(false, |next| next[p] == g),
                VcMode::SelfConsistent => {
                    pred_next.map_or(false, |next| next[p] == pred_now[p])
                }
            };
            ok_run[p] = if !ok_now {
                0
            } else if continues {
                ok_run[p] + 1
            } else {
                1
            };
        }

        if f + window <= t {
            let mut stable = 0u64;
            let mut matched = 0u64;
            for p in 0..pixels {
                if gt_run[p] as usize >= window {
                    stable += 1;
                    if ok_run[p] as usize >= window {
                        matched += 1;
                    }
                }
            }
            if stable > 0 {
                window_ratios.push(matched as f64 / stable as f64);
                stats.matched += matched;
                stats.stable += stable;
            }
        }
    }

    // Windows were visited back to front; sum in forward order so the
    // result is independent of the traversal direction chosen here.
    stats.window_count = window_ratios.len() as u64;
    stats.ratio_sum = window_ratios.iter().rev().sum();
    Ok(stats)
}

/// Video consistency of one video pair: mean over its windows, strict
/// mode. Errors when no window has a stable pixel.
pub fn vc_n(pred: &SemanticVideo, gt: &SemanticVideo, n: usize) -> Result<f64> {
    let stats = vc_stats(pred, gt, n, VcMode::Strict)?;
    stats.window_mean().ok_or_else(|| {
        Error::validation("no window with stable ground-truth pixels")
    })
}
