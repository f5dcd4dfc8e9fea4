//! Algorithmic skeleton of a decoupled video segmentation pipeline:
//! online clip-based track association over per-frame segments with
//! embeddings, followed by offline stitching of overlapping refiner
//! windows into one consistently tracked video.
//!
//! The learned parts of such a pipeline are out of scope; this module
//! fixes the association contract they fulfil. Similarity is cosine on
//! unit embeddings, matching is class-gated and solved exactly, and all
//! tie-breaks happen on sorted ids, so results are independent of input
//! ordering.

use std::collections::BTreeMap;

use crate::data::io::QueriesFile;
use crate::data::raster::SegmentMap;
use crate::data::video::{Registry, SegmentRecord, VideoAnnotation};
use crate::error::{Error, Result};
use crate::matching::assignment::solve_assignment;
use crate::matching::cooccur::{accumulate_tube, iou, CooccurrenceTable};

/// Tunables of the online tracker and offline refiner.
#[derive(Debug, Clone, Copy)]
pub struct AssociationConfig {
    /// Frames consumed per online-tracker call.
    pub clip_len: usize,
    /// Frames per refiner window; consecutive windows overlap by one.
    pub window_len: usize,
    /// Minimum cosine similarity for re-identifying a track.
    pub similarity_threshold: f64,
    /// Frames a track may stay unseen before it expires.
    pub patience: usize,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        AssociationConfig {
            clip_len: 5,
            window_len: 21,
            similarity_threshold: 0.3,
            patience: 5,
        }
    }
}

/// One segment's query: its id in the frame raster, its class, and a
/// unit-length embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryInput {
    pub segment_id: u32,
    pub class_id: u32,
    pub embedding: Vec<f64>,
}

/// All queries of one frame; exactly one entry per nonzero segment id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameQueries {
    pub entries: Vec<QueryInput>,
}

fn check_embedding(embedding: &[f64], dim: usize, segment_id: u32) -> Result<()> {
    if embedding.len() != dim {
        return Err(Error::validation(format!(
            "segment {segment_id} has embedding dimension {}, expected {dim}",
            embedding.len()
        )));
    }
    let norm: f64 = embedding.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::validation(format!(
            "segment {segment_id} embedding has norm {norm}, expected unit length"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
struct ActiveTrack {
    class_id: u32,
    embedding: Vec<f64>,
    last_seen: usize,
}

/// Online tracker state carried across consecutive clips of one video.
#[derive(Debug, Clone)]
pub struct TrackState {
    config: AssociationConfig,
    active: BTreeMap<u32, ActiveTrack>,
    /// Class of every track ever issued, for building registries.
    issued: BTreeMap<u32, u32>,
    next_track_id: u32,
    cursor: usize,
    dim: Option<usize>,
}

impl TrackState {
    pub fn new(config: AssociationConfig) -> Self {
        TrackState {
            config,
            active: BTreeMap::new(),
            issued: BTreeMap::new(),
            next_track_id: 1,
            cursor: 0,
            dim: None,
        }
    }

    pub fn config(&self) -> &AssociationConfig {
        &self.config
    }

    /// Classes of all tracks issued so far.
    pub fn issued_tracks(&self) -> &BTreeMap<u32, u32> {
        &self.issued
    }

    fn fresh_track(&mut self, class_id: u32, embedding: Vec<f64>, frame: usize) -> u32 {
        let id = self.next_track_id;
        self.next_track_id += 1;
        self.issued.insert(id, class_id);
        self.active.insert(
            id,
            ActiveTrack {
                class_id,
                embedding,
                last_seen: frame,
            },
        );
        id
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Associates the frames of one clip against the running track state.
///
/// Frame by frame: tracks unseen for longer than the patience horizon
/// expire; same-class tracks and queries are matched by maximum total
/// cosine similarity; matches at or above the threshold keep the track
/// id, everything else gets a fresh one. Returns one segment-to-track
/// assignment per frame.
pub fn associate_clip(
    state: &mut TrackState,
    clip: &[(SegmentMap, FrameQueries)],
) -> Result<Vec<BTreeMap<u32, u32>>> {
    if clip.len() > state.config.clip_len {
        return Err(Error::validation(format!(
            "clip of {} frames exceeds the configured clip length {}",
            clip.len(),
            state.config.clip_len
        )));
    }

    let mut assignments = Vec::with_capacity(clip.len());
    for (map, queries) in clip {
        let frame = state.cursor;
        state.cursor += 1;

        // Validate coverage: exactly one query per nonzero segment id.
        let present = map.present_ids();
        let mut entries: Vec<&QueryInput> = queries.entries.iter().collect();
        entries.sort_by_key(|q| q.segment_id);
        for pair in entries.windows(2) {
            if pair[0].segment_id == pair[1].segment_id {
                return Err(Error::validation(format!(
                    "frame {frame} has duplicate query for segment {}",
                    pair[0].segment_id
                )));
            }
        }
        let query_ids: Vec<u32> = entries.iter().map(|q| q.segment_id).collect();
        let present_ids: Vec<u32> = present.iter().copied().collect();
        if query_ids != present_ids {
            return Err(Error::validation(format!(
                "frame {frame} queries {:?} do not cover its segments {:?}",
                query_ids, present_ids
            )));
        }
        for query in &entries {
            let dim = *state.dim.get_or_insert(query.embedding.len());
            check_embedding(&query.embedding, dim, query.segment_id)?;
        }

        let patience = state.config.patience;
        state
            .active
            .retain(|_, track| frame.saturating_sub(track.last_seen) <= patience);

        // Class-gated exact matching, one assignment problem per class.
        let mut by_class: BTreeMap<u32, Vec<&QueryInput>> = BTreeMap::new();
        for query in &entries {
            by_class.entry(query.class_id).or_default().push(query);
        }

        let mut assignment: BTreeMap<u32, u32> = BTreeMap::new();
        for (&class_id, class_queries) in &by_class {
            let track_ids: Vec<u32> = state
                .active
                .iter()
                .filter(|(_, t)| t.class_id == class_id)
                .map(|(&id, _)| id)
                .collect();

            let mut matched_queries = vec![false; class_queries.len()];
            if !track_ids.is_empty() {
                let weights: Vec<Vec<f64>> = track_ids
                    .iter()
                    .map(|id| {
                        let track = &state.active[id];
                        class_queries
                            .iter()
                            .map(|q| dot(&track.embedding, &q.embedding))
                            .collect()
                    })
                    .collect();
                let solved = solve_assignment(&weights, true)?;
                for (row, col) in solved.matches {
                    let similarity = weights[row][col];
                    if similarity >= state.config.similarity_threshold {
                        let track_id = track_ids[row];
                        let query = class_queries[col];
                        assignment.insert(query.segment_id, track_id);
                        matched_queries[col] = true;
                        let track = state.active.get_mut(&track_id).expect("active");
                        track.embedding = query.embedding.clone();
                        track.last_seen = frame;
                    }
                }
            }
            for (col, query) in class_queries.iter().enumerate() {
                if !matched_queries[col] {
                    let track_id =
                        state.fresh_track(class_id, query.embedding.clone(), frame);
                    assignment.insert(query.segment_id, track_id);
                }
            }
        }
        assignments.push(assignment);
    }
    Ok(assignments)
}

/// One refiner window: an annotated span of the video starting at
/// `start_frame` in global frame coordinates.
#[derive(Debug, Clone)]
pub struct Window {
    pub start_frame: usize,
    pub annotation: VideoAnnotation,
}

fn registry_for_tracks(tracks: &BTreeMap<u32, u32>) -> Registry {
    tracks
        .iter()
        .map(|(&track_id, &class_id)| (track_id, SegmentRecord { class_id, track_id }))
        .collect()
}

/// Stitches overlapping windows into one video with globally consistent
/// track ids.
///
/// Each window's tracks are aligned to the stitched prefix by a
/// maximum-weight assignment on mask IoU over the overlap frames, gated
/// by class; tracks without positive overlap get fresh ids. Overlap
/// frames keep the earlier window's rasters. The output encodes track
/// ids directly as segment ids.
pub fn stitch_windows(windows: &[Window]) -> Result<VideoAnnotation> {
    let first = windows
        .first()
        .ok_or_else(|| Error::validation("no windows to stitch"))?;
    if first.start_frame != 0 {
        return Err(Error::validation("first window must start at frame 0"));
    }

    // Normalize the first window to track-id rasters.
    let mut out_frames: Vec<SegmentMap> = first
        .annotation
        .frames
        .iter()
        .map(|f| f.remap(|id| first.annotation.registry[&id].track_id))
        .collect();
    let mut out_tracks: BTreeMap<u32, u32> = first.annotation.track_classes();
    let mut next_fresh = out_tracks.keys().max().copied().unwrap_or(0) + 1;

    for window in &windows[1..] {
        let ann = &window.annotation;
        let start = window.start_frame;
        let end = start + ann.frame_count();
        let prev_end = out_frames.len();
        if start >= prev_end {
            return Err(Error::validation(format!(
                "window starting at {start} does not overlap the stitched prefix ending at {prev_end}"
            )));
        }
        if end <= prev_end {
            return Err(Error::validation(format!(
                "window {start}..{end} adds no frames beyond {prev_end}"
            )));
        }
        if ann.width() != out_frames[0].width() || ann.height() != out_frames[0].height() {
            return Err(Error::validation("window resolution mismatch"));
        }

        let window_tracks = ann.track_classes();

        // Tube overlap across the shared frames; a side is the stitched
        // prefix (already track-keyed), b side the new window.
        let mut table = CooccurrenceTable::new();
        for global in start..prev_end {
            let local = global - start;
            accumulate_tube(
                &mut table,
                &out_frames[global],
                &ann.frames[local],
                |id| id,
                |id| ann.registry[&id].track_id,
            )?;
        }

        let prev_ids: Vec<u32> = table.ids_a().collect();
        let new_ids: Vec<u32> = table.ids_b().collect();
        let mut mapping: BTreeMap<u32, u32> = BTreeMap::new();
        if !prev_ids.is_empty() && !new_ids.is_empty() {
            let weights: Vec<Vec<f64>> = prev_ids
                .iter()
                .map(|&a| {
                    new_ids
                        .iter()
                        .map(|&b| {
                            if out_tracks[&a] == window_tracks[&b] {
                                iou(&table, a, b).unwrap_or(0.0)
                            } else {
                                -1.0
                            }
                        })
                        .collect()
                })
                .collect();
            let solved = solve_assignment(&weights, true)?;
            for (row, col) in solved.matches {
                if weights[row][col] > 0.0 {
                    mapping.insert(new_ids[col], prev_ids[row]);
                }
            }
        }

        for (&track, &class) in &window_tracks {
            if !mapping.contains_key(&track) {
                mapping.insert(track, next_fresh);
                out_tracks.insert(next_fresh, class);
                next_fresh += 1;
            }
        }

        // Overlap frames keep the earlier window's rasters; frames past
        // the prefix come from this window under the id mapping.
        for global in prev_end..end {
            let local = global - start;
            out_frames.push(
                ann.frames[local]
                    .remap(|id| mapping[&ann.registry[&id].track_id]),
            );
        }
    }

    Ok(VideoAnnotation::new(
        first.annotation.video_id.clone(),
        out_frames,
        registry_for_tracks(&out_tracks),
    ))
}

/// Joins a queries sidecar with a video's registry into per-frame query
/// inputs carrying classes.
pub fn frame_queries_from_file(
    video: &VideoAnnotation,
    file: &QueriesFile,
) -> Result<Vec<FrameQueries>> {
    let by_frame = crate::data::io::queries_by_frame(file, video.frame_count())?;
    let mut out = Vec::with_capacity(video.frame_count());
    for (frame_idx, lookup) in by_frame.iter().enumerate() {
        let mut entries = Vec::new();
        for segment_id in video.frames[frame_idx].present_ids() {
            let embedding = lookup.get(&segment_id).ok_or_else(|| {
                Error::validation(format!(
                    "frame {frame_idx} segment {segment_id} has no query embedding"
                ))
            })?;
            let record = video.registry.get(&segment_id).ok_or_else(|| {
                Error::validation(format!(
                    "frame {frame_idx} contains unregistered segment id {segment_id}"
                ))
            })?;
            entries.push(QueryInput {
                segment_id,
                class_id: record.class_id,
                embedding: embedding.clone(),
            });
        }
        out.push(FrameQueries { entries });
    }
    Ok(out)
}

/// Runs the full pipeline over one video: clip-based association inside
/// each refiner window, then window stitching. Input track ids are
/// ignored; only segment classes and embeddings drive the output.
pub fn run_tracking(
    video: &VideoAnnotation,
    queries: &[FrameQueries],
    config: &AssociationConfig,
) -> Result<VideoAnnotation> {
    if config.clip_len == 0 {
        return Err(Error::validation("clip length must be at least 1"));
    }
    if config.window_len < 2 {
        return Err(Error::validation("window length must be at least 2"));
    }
    let frame_count = video.frame_count();
    if frame_count == 0 {
        return Err(Error::validation("cannot track an empty video"));
    }
    if queries.len() != frame_count {
        return Err(Error::validation(format!(
            "{} query frames for {} video frames",
            queries.len(),
            frame_count
        )));
    }

    let mut windows = Vec::new();
    let mut start = 0usize;
    loop {
        let end = (start + config.window_len).min(frame_count);
        let mut state = TrackState::new(*config);
        let mut frames = Vec::with_capacity(end - start);
        let span: Vec<(SegmentMap, FrameQueries)> = (start..end)
            .map(|f| (video.frames[f].clone(), queries[f].clone()))
            .collect();
        for clip in span.chunks(config.clip_len) {
            let assignments = associate_clip(&mut state, clip)?;
            for (offset, assignment) in assignments.iter().enumerate() {
                let frame = &clip[offset].0;
                frames.push(frame.remap(|id| assignment[&id]));
            }
        }
        let registry = registry_for_tracks(state.issued_tracks());
        windows.push(Window {
            start_frame: start,
            annotation: VideoAnnotation::new(video.video_id.clone(), frames, registry),
        });
        if end >= frame_count {
            break;
        }
        start = end - 1;
    }

    let mut stitched = stitch_windows(&windows)?;
    stitched.video_id = video.video_id.clone();
    Ok(stitched)
}
