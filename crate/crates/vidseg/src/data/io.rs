//! On-disk dataset layout.
//!
//! ```text
//! root/
//!   categories.json                  class catalog
//!   manifest.json                    split counts + per-video shapes
//!   videos/<video_id>/frames/<%06d>.png   16-bit grayscale id rasters
//!   videos/<video_id>/segments.json  segment registry (panoptic only)
//!   videos/<video_id>/queries.json   per-segment embeddings (optional)
//! ```
//!
//! Predictions use the identical layout under a separate root. A video
//! directory without `segments.json` is treated as a semantic video whose
//! raster values are class ids.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::category::{Category, CategoryTable};
use crate::data::manifest::DatasetManifest;
use crate::data::raster::SegmentMap;
use crate::data::video::{Registry, SegmentRecord, SemanticVideo, VideoAnnotation};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct SegmentsFile {
    segments: Vec<SegmentEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SegmentEntry {
    id: u32,
    class_id: u32,
    track_id: u32,
}

/// Per-video embedding sidecar. `dim` is declared once and every
/// embedding must carry exactly that many components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueriesFile {
    pub dim: usize,
    pub frames: Vec<QueryFrame>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryFrame {
    pub index: usize,
    pub queries: Vec<QueryEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryEntry {
    pub segment_id: u32,
    pub embedding: Vec<f64>,
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_string(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir_all(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::parse(path, e))
}

fn to_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::parse(path, e))
}

pub fn load_category_table(path: &Path) -> Result<CategoryTable> {
    let text = read_to_string(path)?;
    let entries: Vec<Category> = parse_json(path, &text)?;
    CategoryTable::new(entries)
}

pub fn save_category_table(table: &CategoryTable, path: &Path) -> Result<()> {
    let text = to_json_pretty(path, &table.entries().to_vec())?;
    write_string(path, &text)
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = read_to_string(path)?;
    parse_json(path, &text)
}

pub fn save_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    let text = to_json_pretty(path, manifest)?;
    write_string(path, &text)
}

pub fn load_queries(path: &Path) -> Result<QueriesFile> {
    let text = read_to_string(path)?;
    let file: QueriesFile = parse_json(path, &text)?;
    for frame in &file.frames {
        for entry in &frame.queries {
            if entry.embedding.len() != file.dim {
                return Err(Error::validation(format!(
                    "{}: frame {} segment {} has embedding dimension {}, header declares {}",
                    path.display(),
                    frame.index,
                    entry.segment_id,
                    entry.embedding.len(),
                    file.dim
                )));
            }
        }
    }
    Ok(file)
}

pub fn save_queries(queries: &QueriesFile, path: &Path) -> Result<()> {
    let text = to_json_pretty(path, queries)?;
    write_string(path, &text)
}

/// Reads one 16-bit grayscale id raster.
pub fn read_id_raster(path: &Path) -> Result<SegmentMap> {
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::parse(path, other),
    })?;
    match img {
        image::DynamicImage::ImageLuma16(buf) => {
            let (w, h) = buf.dimensions();
            let ids = buf.into_raw().into_iter().map(u32::from).collect();
            SegmentMap::new(w, h, ids)
        }
        other => Err(Error::parse(
            path,
            format!(
                "expected 16-bit grayscale png, found color type {:?}",
                other.color()
            ),
        )),
    }
}

/// Writes one raster as 16-bit grayscale PNG, bit-exact on round trip.
pub fn write_id_raster(map: &SegmentMap, path: &Path) -> Result<()> {
    let mut data = Vec::with_capacity(map.pixel_count());
    for &id in map.ids() {
        if id > u32::from(u16::MAX) {
            return Err(Error::validation(format!(
                "id {} at {} exceeds the 16-bit raster range",
                id,
                path.display()
            )));
        }
        data.push(id as u16);
    }
    let buf: image::ImageBuffer<image::Luma<u16>, Vec<u16>> =
        image::ImageBuffer::from_raw(map.width(), map.height(), data)
            .expect("raster length matches dimensions");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::parse(path, other),
        })
}

fn frame_file_name(index: usize) -> String {
    format!("{index:06}.png")
}

fn load_frames(dir: &Path) -> Result<Vec<SegmentMap>> {
    let frames_dir = dir.join("frames");
    let mut names: Vec<String> = Vec::new();
    let entries = fs::read_dir(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(&frames_dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".png") {
            names.push(name);
        }
    }
    names.sort();
    if names.is_empty() {
        return Err(Error::validation(format!(
            "no frames found under {}",
            frames_dir.display()
        )));
    }
    let mut frames = Vec::with_capacity(names.len());
    for name in &names {
        frames.push(read_id_raster(&frames_dir.join(name))?);
    }
    for (idx, frame) in frames.iter().enumerate().skip(1) {
        if !frame.same_shape(&frames[0]) {
            return Err(Error::validation(format!(
                "{}: frame {} is {}x{}, expected {}x{}",
                frames_dir.display(),
                names[idx],
                frame.width(),
                frame.height(),
                frames[0].width(),
                frames[0].height()
            )));
        }
    }
    Ok(frames)
}

fn write_frames(frames: &[SegmentMap], dir: &Path) -> Result<()> {
    let frames_dir = dir.join("frames");
    create_dir_all(&frames_dir)?;
    for (idx, frame) in frames.iter().enumerate() {
        write_id_raster(frame, &frames_dir.join(frame_file_name(idx)))?;
    }
    Ok(())
}

fn video_id_from_dir(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

/// Loads one panoptic video directory: ordered frames plus registry.
pub fn load_video(dir: &Path, categories: &CategoryTable) -> Result<VideoAnnotation> {
    let segments_path = dir.join("segments.json");
    let text = read_to_string(&segments_path)?;
    let file: SegmentsFile = parse_json(&segments_path, &text)?;
    let mut registry = Registry::new();
    for entry in file.segments {
        let record = SegmentRecord {
            class_id: entry.class_id,
            track_id: entry.track_id,
        };
        if registry.insert(entry.id, record).is_some() {
            return Err(Error::validation(format!(
                "{}: duplicate segment id {}",
                segments_path.display(),
                entry.id
            )));
        }
    }
    let frames = load_frames(dir)?;
    let video = VideoAnnotation::new(video_id_from_dir(dir), frames, registry);
    video.validate(categories)?;
    Ok(video)
}

/// Writes a panoptic video directory. `load_video(write_video(v))` is
/// identical to `v`, raster bytes included.
pub fn write_video(video: &VideoAnnotation, dir: &Path) -> Result<()> {
    create_dir_all(dir)?;
    write_frames(&video.frames, dir)?;
    let file = SegmentsFile {
        segments: video
            .registry
            .iter()
            .map(|(&id, rec)| SegmentEntry {
                id,
                class_id: rec.class_id,
                track_id: rec.track_id,
            })
            .collect(),
    };
    let path = dir.join("segments.json");
    let text = to_json_pretty(&path, &file)?;
    write_string(&path, &text)
}

pub fn load_semantic_video(dir: &Path, categories: &CategoryTable) -> Result<SemanticVideo> {
    let frames = load_frames(dir)?;
    let video = SemanticVideo::new(video_id_from_dir(dir), frames);
    video.validate(categories)?;
    Ok(video)
}

pub fn write_semantic_video(video: &SemanticVideo, dir: &Path) -> Result<()> {
    create_dir_all(dir)?;
    write_frames(&video.frames, dir)
}

/// True when the directory carries a segment registry, i.e. holds a
/// panoptic rather than semantic video.
pub fn is_panoptic_video_dir(dir: &Path) -> bool {
    dir.join("segments.json").is_file()
}

/// A dataset root directory in the layout documented at module level.
#[derive(Debug, Clone)]
pub struct DatasetRoot {
    path: PathBuf,
}

impl DatasetRoot {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        DatasetRoot { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn categories_path(&self) -> PathBuf {
        self.path.join("categories.json")
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.path.join("manifest.json")
    }

    pub fn videos_dir(&self) -> PathBuf {
        self.path.join("videos")
    }

    pub fn video_dir(&self, video_id: &str) -> PathBuf {
        self.videos_dir().join(video_id)
    }

    pub fn queries_path(&self, video_id: &str) -> PathBuf {
        self.video_dir(video_id).join("queries.json")
    }

    pub fn has_categories(&self) -> bool {
        self.categories_path().is_file()
    }

    pub fn load_categories(&self) -> Result<CategoryTable> {
        load_category_table(&self.categories_path())
    }

    pub fn load_manifest(&self) -> Result<DatasetManifest> {
        load_manifest(&self.manifest_path())
    }

    /// Sorted list of video ids, taken from the directory listing.
    pub fn video_ids(&self) -> Result<Vec<String>> {
        let videos_dir = self.videos_dir();
        let entries = fs::read_dir(&videos_dir).map_err(|e| Error::io(&videos_dir, e))?;
        let mut ids = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(&videos_dir, e))?;
            if entry.path().is_dir() {
                ids.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        ids.sort();
        Ok(ids)
    }
}

/// Builds a per-frame lookup from segment id to embedding out of a
/// queries sidecar, validating frame coverage against `frame_count`.
pub fn queries_by_frame(
    queries: &QueriesFile,
    frame_count: usize,
) -> Result<Vec<BTreeMap<u32, Vec<f64>>>> {
    let mut by_frame: Vec<BTreeMap<u32, Vec<f64>>> = vec![BTreeMap::new(); frame_count];
    for frame in &queries.frames {
        if frame.index >= frame_count {
            return Err(Error::validation(format!(
                "queries reference frame {} but the video has {} frames",
                frame.index, frame_count
            )));
        }
        let slot = &mut by_frame[frame.index];
        for entry in &frame.queries {
            if slot
                .insert(entry.segment_id, entry.embedding.clone())
                .is_some()
            {
                return Err(Error::validation(format!(
                    "frame {} declares segment {} twice in queries",
                    frame.index, entry.segment_id
                )));
            }
        }
    }
    Ok(by_frame)
}
