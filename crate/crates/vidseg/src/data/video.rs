use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::data::category::CategoryTable;
use crate::data::raster::SegmentMap;
use crate::error::{Error, Result};

/// Class and track of one registered segment id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub class_id: u32,
    pub track_id: u32,
}

/// Maps every segment id used by a video's rasters to its class and track.
pub type Registry = BTreeMap<u32, SegmentRecord>;

/// Ordered per-frame segment-id rasters plus the segment registry.
/// Serves as both ground truth and prediction.
///
/// Segment ids are raster-level handles; track identity lives only in the
/// registry, so track ids can be rewritten without touching rasters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoAnnotation {
    pub video_id: String,
    pub frames: Vec<SegmentMap>,
    pub registry: Registry,
}

impl VideoAnnotation {
    pub fn new(video_id: impl Into<String>, frames: Vec<SegmentMap>, registry: Registry) -> Self {
        VideoAnnotation {
            video_id: video_id.into(),
            frames,
            registry,
        }
    }

    pub fn width(&self) -> u32 {
        self.frames.first().map_or(0, |f| f.width())
    }

    pub fn height(&self) -> u32 {
        self.frames.first().map_or(0, |f| f.height())
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    /// Track id to class id, derived from the registry.
    pub fn track_classes(&self) -> BTreeMap<u32, u32> {
        self.registry
            .values()
            .map(|rec| (rec.track_id, rec.class_id))
            .collect()
    }

    /// Checks every type invariant against the catalog. Returns the first
    /// violation found; a value that passes is safe for every metric and
    /// pipeline operation in the crate.
    pub fn validate(&self, categories: &CategoryTable) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::validation(format!(
                "video '{}' has no frames",
                self.video_id
            )));
        }
        let (w, h) = (self.frames[0].width(), self.frames[0].height());
        for (idx, frame) in self.frames.iter().enumerate() {
            if frame.width() != w || frame.height() != h {
                return Err(Error::validation(format!(
                    "video '{}': frame {} is {}x{}, expected {}x{}",
                    self.video_id,
                    idx,
                    frame.width(),
                    frame.height(),
                    w,
                    h
                )));
            }
        }

        for (&seg_id, rec) in &self.registry {
            if seg_id == 0 {
                return Err(Error::validation(format!(
                    "video '{}': segment id 0 registered; void is reserved",
                    self.video_id
                )));
            }
            if rec.track_id == 0 {
                return Err(Error::validation(format!(
                    "video '{}': segment {} has track id 0; 0 is reserved",
                    self.video_id, seg_id
                )));
            }
            if !categories.contains(rec.class_id) {
                return Err(Error::validation(format!(
                    "video '{}': segment {} has unknown class id {}",
                    self.video_id, seg_id, rec.class_id
                )));
            }
        }

        // Class constancy: one class per track across the whole video.
        let mut track_class: BTreeMap<u32, u32> = BTreeMap::new();
        for rec in self.registry.values() {
            match track_class.insert(rec.track_id, rec.class_id) {
                Some(prev) if prev != rec.class_id => {
                    return Err(Error::validation(format!(
                        "video '{}': track {} maps to classes {} and {}",
                        self.video_id, rec.track_id, prev, rec.class_id
                    )));
                }
                _ => {}
            }
        }

        // Stuff classes carry exactly one track per video.
        let mut stuff_tracks: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
        for (&track, &class) in &track_class {
            if categories.is_thing(class) == Some(false) {
                stuff_tracks.entry(class).or_default().insert(track);
            }
        }
        for (class, tracks) in stuff_tracks {
            if tracks.len() > 1 {
                return Err(Error::validation(format!(
                    "video '{}': stuff class {} has {} tracks, expected 1",
                    self.video_id,
                    class,
                    tracks.len()
                )));
            }
        }

        for (idx, frame) in self.frames.iter().enumerate() {
            for id in frame.present_ids() {
                if !self.registry.contains_key(&id) {
                    return Err(Error::validation(format!(
                        "video '{}': frame {} contains unregistered segment id {}",
                        self.video_id, idx, id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Per-pixel class-id rasters, one per frame. Value 0 is void.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticVideo {
    pub video_id: String,
    pub frames: Vec<SegmentMap>,
}

impl SemanticVideo {
    pub fn new(video_id: impl Into<String>, frames: Vec<SegmentMap>) -> Self {
        SemanticVideo {
            video_id: video_id.into(),
            frames,
        }
    }

    pub fn width(&self) -> u32 {
        self.frames.first().map_or(0, |f| f.width())
    }

    pub fn height(&self) -> u32 {
        self.frames.first().map_or(0, |f| f.height())
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn validate(&self, categories: &CategoryTable) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::validation(format!(
                "semantic video '{}' has no frames",
                self.video_id
            )));
        }
        let (w, h) = (self.frames[0].width(), self.frames[0].height());
        for (idx, frame) in self.frames.iter().enumerate() {
            if frame.width() != w || frame.height() != h {
                return Err(Error::validation(format!(
                    "semantic video '{}': frame {} resolution mismatch",
                    self.video_id, idx
                )));
            }
            for class in frame.present_ids() {
                if !categories.contains(class) {
                    return Err(Error::validation(format!(
                        "semantic video '{}': frame {} contains unknown class id {}",
                        self.video_id, idx, class
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Merges all instances of each class into a single class mask per frame.
/// Pixel p gets class c iff p's segment id maps to class c; void stays void.
pub fn pan_to_sem(video: &VideoAnnotation, categories: &CategoryTable) -> Result<SemanticVideo> {
    for rec in video.registry.values() {
        if !categories.contains(rec.class_id) {
            return Err(Error::validation(format!(
                "video '{}': segment with unknown class id {}",
                video.video_id, rec.class_id
            )));
        }
    }
    let mut frames = Vec::with_capacity(video.frames.len());
    for (idx, frame) in video.frames.iter().enumerate() {
        // Per-frame lookup so an unregistered id is reported with context.
        let mut class_of = BTreeMap::new();
        for id in frame.present_ids() {
            match video.registry.get(&id) {
                Some(rec) => {
                    class_of.insert(id, rec.class_id);
                }
                None => {
                    return Err(Error::validation(format!(
                        "video '{}': frame {} contains unregistered segment id {}",
                        video.video_id, idx, id
                    )));
                }
            }
        }
        frames.push(frame.remap(|id| class_of[&id]));
    }
    Ok(SemanticVideo::new(video.video_id.clone(), frames))
}
