//! Random valid video-pair generator for oracle comparisons. Predictions
//! derive from the ground-truth trajectories with geometric jitter, class
//! flips, identity swaps and dropped frames, so matched, missed and
//! spurious tubes all occur.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use vidseg::data::category::{Category, CategoryTable};
use vidseg::data::raster::SegmentMap;
use vidseg::data::video::{Registry, SegmentRecord, VideoAnnotation};

pub const MAX_TRACKS: usize = 3;

pub fn small_categories() -> CategoryTable {
    CategoryTable::new(vec![
        Category {
            class_id: 1,
            name: "thing_a".into(),
            is_thing: true,
        },
        Category {
            class_id: 2,
            name: "thing_b".into(),
            is_thing: true,
        },
        Category {
            class_id: 9,
            name: "stuff_a".into(),
            is_thing: false,
        },
    ])
    .unwrap()
}

#[derive(Debug, Clone, Copy)]
struct Placement {
    present: bool,
    x: i64,
    y: i64,
    w: i64,
    h: i64,
}

#[derive(Debug, Clone)]
struct Trajectory {
    class_id: u32,
    placements: Vec<Placement>,
}

fn render(
    video_id: &str,
    width: u32,
    height: u32,
    trajectories: &[Trajectory],
    track_of: impl Fn(usize, usize) -> u32,
    class_of: impl Fn(usize) -> u32,
) -> VideoAnnotation {
    let frame_count = trajectories[0].placements.len();
    let mut frames = Vec::with_capacity(frame_count);
    let mut registry = Registry::new();
    for f in 0..frame_count {
        let mut map = SegmentMap::filled(width, height, 0);
        for (t, trajectory) in trajectories.iter().enumerate() {
            let placement = trajectory.placements[f];
            if !placement.present {
                continue;
            }
            let seg_id = (f * MAX_TRACKS + t + 1) as u32;
            let mut painted = false;
            for y in placement.y.max(0)..(placement.y + placement.h).min(i64::from(height)) {
                for x in placement.x.max(0)..(placement.x + placement.w).min(i64::from(width)) {
                    map.set(x as u32, y as u32, seg_id);
                    painted = true;
                }
            }
            if painted {
                registry.insert(
                    seg_id,
                    SegmentRecord {
                        class_id: class_of(t),
                        track_id: track_of(f, t),
                    },
                );
            }
        }
        // Later tracks may fully occlude earlier ones; keep the registry
        // aligned with what actually survived in the raster.
        frames.push(map);
    }
    let mut video = VideoAnnotation::new(video_id, frames, registry);
    let present: std::collections::BTreeSet<u32> = video
        .frames
        .iter()
        .flat_map(|f| f.present_ids())
        .collect();
    video.registry.retain(|id, _| present.contains(id));
    video
}

/// One random (ground truth, prediction) pair sharing a catalog.
pub fn random_pair(rng: &mut ChaCha8Rng) -> (VideoAnnotation, VideoAnnotation, CategoryTable) {
    let categories = small_categories();
    let width = rng.gen_range(4..=16);
    let height = rng.gen_range(4..=16);
    let frame_count = rng.gen_range(1..=8);
    let track_count = rng.gen_range(1..=MAX_TRACKS);

    let mut stuff_used = false;
    let mut trajectories = Vec::new();
    for _ in 0..track_count {
        let class_id = if !stuff_used && rng.gen_bool(0.3) {
            stuff_used = true;
            9
        } else if rng.gen_bool(0.5) {
            1
        } else {
            2
        };
        let mut x = rng.gen_range(-2..i64::from(width) - 1);
        let mut y = rng.gen_range(-2..i64::from(height) - 1);
        let w = rng.gen_range(2..=i64::from(width).min(8));
        let h = rng.gen_range(2..=i64::from(height).min(8));
        let mut placements = Vec::with_capacity(frame_count);
        for _ in 0..frame_count {
            placements.push(Placement {
                present: rng.gen_bool(0.9),
                x,
                y,
                w,
                h,
            });
            x += rng.gen_range(-2..=2);
            y += rng.gen_range(-2..=2);
        }
        trajectories.push(Trajectory {
            class_id,
            placements,
        });
    }

    let gt_classes: Vec<u32> = trajectories.iter().map(|t| t.class_id).collect();
    let gt = render(
        "gt",
        width,
        height,
        &trajectories,
        |_, t| (t + 1) as u32,
        |t| gt_classes[t],
    );

    // Prediction: jittered geometry, occasional class flips among thing
    // classes, occasional identity swap between same-class tracks from a
    // random frame onward.
    let mut pred_trajectories = trajectories.clone();
    for trajectory in &mut pred_trajectories {
        for placement in &mut trajectory.placements {
            if rng.gen_bool(0.5) {
                placement.x += rng.gen_range(-1..=1);
                placement.y += rng.gen_range(-1..=1);
            }
            if rng.gen_bool(0.15) {
                placement.w = (placement.w + rng.gen_range(-1..=1)).max(1);
                placement.h = (placement.h + rng.gen_range(-1..=1)).max(1);
            }
            if rng.gen_bool(0.08) {
                placement.present = !placement.present;
            }
        }
    }
    let mut pred_classes = gt_classes.clone();
    for class in &mut pred_classes {
        if *class != 9 && rng.gen_bool(0.1) {
            *class = if *class == 1 { 2 } else { 1 };
        }
    }

    // Same-class identity swap from an interior frame.
    let mut swap: Option<(usize, usize, usize)> = None;
    if track_count >= 2 && frame_count >= 2 && rng.gen_bool(0.4) {
        let a = rng.gen_range(0..track_count);
        let b = rng.gen_range(0..track_count);
        if a != b && pred_classes[a] == pred_classes[b] {
            swap = Some((rng.gen_range(1..frame_count), a, b));
        }
    }
    let pred = render(
        "pred",
        width,
        height,
        &pred_trajectories,
        |f, t| {
            let t = match swap {
                Some((from, a, b)) if f >= from && t == a => b,
                Some((from, a, b)) if f >= from && t == b => a,
                _ => t,
            };
            (t + 1) as u32
        },
        |t| pred_classes[t],
    );

    gt.validate(&categories).expect("generated gt is valid");
    pred.validate(&categories).expect("generated pred is valid");
    (gt, pred, categories)
}
