//! Deterministic synthetic scene generation with corruption operators
//! whose metric effects are analytically predictable.
//!
//! Scenes are horizontal stuff stripes with rectangle or disk things
//! moving over them, painted in list order (later occludes earlier).
//! Closed-form shape areas keep expected metric values cheap to derive
//! by hand. Corruptions are applied while re-rendering from the config,
//! so pixels freed by erosion or drops revert to exactly what the
//! corrupted track occluded.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::category::{Category, CategoryTable};
use crate::data::io::{QueriesFile, QueryEntry, QueryFrame};
use crate::data::raster::SegmentMap;
use crate::data::video::{Registry, SegmentRecord, VideoAnnotation};
use crate::error::{Error, Result};

/// Name and revision of the deterministic generator. Fixtures produced
/// under one revision are byte-stable across releases of that revision.
pub const GENERATOR_VERSION: &str = "synth-chacha8-v1";

/// Thing geometry. Areas are closed-form: width * height for rectangles,
/// the lattice-point count of x^2 + y^2 <= r^2 for disks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Rect { width: u32, height: u32 },
    Disk { radius: u32 },
}

/// One moving thing. `start` positions the rectangle's top-left corner
/// or the disk's center at frame 0; each frame adds `velocity` and then
/// clamps so the shape stays fully inside the canvas.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneObject {
    pub class_id: u32,
    pub shape: Shape,
    pub start: (i64, i64),
    pub velocity: (i64, i64),
}

/// One full-width background stripe; stripes split the canvas height
/// evenly in list order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackgroundBand {
    pub class_id: u32,
}

fn default_embed_dim() -> usize {
    16
}

/// Deterministic scene description; equal configs render byte-identical
/// videos.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub width: u32,
    pub height: u32,
    pub frame_count: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_embed_dim")]
    pub embed_dim: usize,
    pub background: Vec<BackgroundBand>,
    #[serde(default)]
    pub objects: Vec<SceneObject>,
}

/// Ordered corruption operators, applied while re-rendering a scene.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    #[serde(default)]
    pub operators: Vec<CorruptionOp>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum CorruptionOp {
    /// Exchanges two same-class track identities from `frame` onward.
    /// Rasters are untouched; only registry track ids change.
    IdSwap { frame: usize, track_a: u32, track_b: u32 },
    /// Rewrites the class of every segment of a track.
    ClassFlip { track: u32, new_class: u32 },
    /// Morphological erosion of the track's own mask in every frame;
    /// freed pixels show whatever the track occluded.
    Erode { track: u32, radius: u32 },
    /// Removes the track's segments in frames `from..=to`.
    Drop { track: u32, from: usize, to: usize },
    /// Randomizes the boundary band of every thing mask within the
    /// given amplitude; fully determined by the seeds.
    BoundaryJitter { amplitude: u32, seed: u64 },
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable seed mixing for deriving per-video seeds from a dataset seed.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    splitmix64(seed ^ splitmix64(salt))
}

/// Track layout of a scene: background bands take tracks 1..=B in list
/// order, objects continue from B+1.
#[derive(Debug, Clone)]
struct TrackLayout {
    /// (track_id, class_id, is_thing) per track ordinal.
    tracks: Vec<(u32, u32, bool)>,
}

impl TrackLayout {
    fn of(config: &SceneConfig) -> Self {
        let mut tracks = Vec::new();
        for band in &config.background {
            tracks.push(((tracks.len() + 1) as u32, band.class_id, false));
        }
        for object in &config.objects {
            tracks.push(((tracks.len() + 1) as u32, object.class_id, true));
        }
        TrackLayout { tracks }
    }

    fn count(&self) -> usize {
        self.tracks.len()
    }

    fn class_of(&self, track_id: u32) -> Option<u32> {
        self.tracks
            .iter()
            .find(|&&(id, _, _)| id == track_id)
            .map(|&(_, class, _)| class)
    }

    fn contains(&self, track_id: u32) -> bool {
        self.class_of(track_id).is_some()
    }
}

fn validate_config(config: &SceneConfig) -> Result<TrackLayout> {
    if config.width == 0 || config.height == 0 {
        return Err(Error::validation("canvas must have nonzero size"));
    }
    if config.frame_count == 0 {
        return Err(Error::validation("scene needs at least one frame"));
    }
    if config.background.is_empty() {
        return Err(Error::validation("scene needs at least one background band"));
    }
    let mut band_classes = std::collections::BTreeSet::new();
    for band in &config.background {
        if band.class_id == 0 {
            return Err(Error::validation("class id 0 is reserved for void"));
        }
        if !band_classes.insert(band.class_id) {
            return Err(Error::validation(format!(
                "background class {} appears twice; stuff classes carry one track per video",
                band.class_id
            )));
        }
    }
    for (idx, object) in config.objects.iter().enumerate() {
        if object.class_id == 0 {
            return Err(Error::validation("class id 0 is reserved for void"));
        }
        if band_classes.contains(&object.class_id) {
            return Err(Error::validation(format!(
                "class {} is used both as background and object",
                object.class_id
            )));
        }
        let (w, h) = match object.shape {
            Shape::Rect { width, height } => (width, height),
            Shape::Disk { radius } => (2 * radius + 1, 2 * radius + 1),
        };
        if w == 0 || h == 0 {
            return Err(Error::validation(format!("object {idx} has a degenerate shape")));
        }
        if w > config.width || h > config.height {
            return Err(Error::validation(format!(
                "object {idx} ({w}x{h}) does not fit the {}x{} canvas",
                config.width, config.height
            )));
        }
    }
    let layout = TrackLayout::of(config);
    let max_segment_id = config.frame_count * layout.count();
    if max_segment_id > u16::MAX as usize {
        return Err(Error::validation(format!(
            "{} frames x {} tracks exceeds the 16-bit segment id space",
            config.frame_count,
            layout.count()
        )));
    }
    Ok(layout)
}

fn validate_spec(config: &SceneConfig, layout: &TrackLayout, spec: &CorruptionSpec) -> Result<()> {
    for op in &spec.operators {
        match *op {
            CorruptionOp::IdSwap { frame, track_a, track_b } => {
                if frame >= config.frame_count {
                    return Err(Error::validation(format!(
                        "id_swap frame {frame} out of range"
                    )));
                }
                for track in [track_a, track_b] {
                    if !layout.contains(track) {
                        return Err(Error::validation(format!("unknown track {track}")));
                    }
                }
                let ca = layout.class_of(track_a);
                let cb = layout.class_of(track_b);
                if ca != cb {
                    return Err(Error::validation(format!(
                        "id_swap between tracks of different classes ({:?} vs {:?}) would break class constancy",
                        ca, cb
                    )));
                }
            }
            CorruptionOp::ClassFlip { track, new_class } => {
                if !layout.contains(track) {
                    return Err(Error::validation(format!("unknown track {track}")));
                }
                if new_class == 0 {
                    return Err(Error::validation("class id 0 is reserved for void"));
                }
            }
            CorruptionOp::Erode { track, .. } => {
                if !layout.contains(track) {
                    return Err(Error::validation(format!("unknown track {track}")));
                }
            }
            CorruptionOp::Drop { track, from, to } => {
                if !layout.contains(track) {
                    return Err(Error::validation(format!("unknown track {track}")));
                }
                if from > to || to >= config.frame_count {
                    return Err(Error::validation(format!(
                        "drop range {from}..={to} out of range"
                    )));
                }
            }
            CorruptionOp::BoundaryJitter { .. } => {}
        }
    }
    Ok(())
}

fn clamp_position(pos: i64, extent: u32, canvas: u32) -> i64 {
    pos.clamp(0, i64::from(canvas) - i64::from(extent))
}

/// Full-canvas boolean mask of one object at one frame.
fn object_mask(config: &SceneConfig, object: &SceneObject, frame: usize) -> Vec<bool> {
    let npx = config.width as usize * config.height as usize;
    let mut mask = vec![false; npx];
    let f = frame as i64;
    match object.shape {
        Shape::Rect { width, height } => {
            let x0 = clamp_position(
                object.start.0 + f * object.velocity.0,
                width,
                config.width,
            );
            let y0 = clamp_position(
                object.start.1 + f * object.velocity.1,
                height,
                config.height,
            );
            for y in y0..y0 + i64::from(height) {
                for x in x0..x0 + i64::from(width) {
                    mask[y as usize * config.width as usize + x as usize] = true;
                }
            }
        }
        Shape::Disk { radius } => {
            let r = i64::from(radius);
            let side = 2 * r + 1;
            let cx = clamp_position(
                object.start.0 + f * object.velocity.0 - r,
                side as u32,
                config.width,
            ) + r;
            let cy = clamp_position(
                object.start.1 + f * object.velocity.1 - r,
                side as u32,
                config.height,
            ) + r;
            for y in (cy - r)..=(cy + r) {
                for x in (cx - r)..=(cx + r) {
                    if (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r {
                        mask[y as usize * config.width as usize + x as usize] = true;
                    }
                }
            }
        }
    }
    mask
}

fn ball_offsets(radius: u32) -> Vec<(i64, i64)> {
    let r = i64::from(radius);
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                out.push((dx, dy));
            }
        }
    }
    out
}

fn erode_mask(mask: &[bool], width: u32, height: u32, radius: u32) -> Vec<bool> {
    if radius == 0 {
        return mask.to_vec();
    }
    let offsets = ball_offsets(radius);
    let (w, h) = (width as i64, height as i64);
    let mut out = vec![false; mask.len()];
    for y in 0..h {
        for x in 0..w {
            let idx = (y * w + x) as usize;
            if !mask[idx] {
                continue;
            }
            out[idx] = offsets.iter().all(|&(dx, dy)| {
                let (nx, ny) = (x + dx, y + dy);
                nx >= 0 && nx < w && ny >= 0 && ny < h && mask[(ny * w + nx) as usize]
            });
        }
    }
    out
}

fn dilate_mask(mask: &[bool], width: u32, height: u32, radius: u32) -> Vec<bool> {
    if radius == 0 {
        return mask.to_vec();
    }
    let offsets = ball_offsets(radius);
    let (w, h) = (width as i64, height as i64);
    let mut out = vec![false; mask.len()];
    for y in 0..h {
        for x in 0..w {
            let hit = offsets.iter().any(|&(dx, dy)| {
                let (nx, ny) = (x + dx, y + dy);
                nx >= 0 && nx < w && ny >= 0 && ny < h && mask[(ny * w + nx) as usize]
            });
            if hit {
                out[(y * w + x) as usize] = true;
            }
        }
    }
    out
}

fn jitter_mask(
    mask: &[bool],
    config: &SceneConfig,
    track_id: u32,
    frame: usize,
    amplitude: u32,
    op_seed: u64,
) -> Vec<bool> {
    if amplitude == 0 {
        return mask.to_vec();
    }
    let core = erode_mask(mask, config.width, config.height, amplitude);
    let halo = dilate_mask(mask, config.width, config.height, amplitude);
    let base = splitmix64(config.seed ^ splitmix64(op_seed));
    let mut out = core.clone();
    for (idx, _) in halo.iter().enumerate().filter(|(_, &in_halo)| in_halo) {
        if core[idx] {
            continue;
        }
        let h = splitmix64(
            base ^ splitmix64((frame as u64) << 32 | u64::from(track_id)) ^ idx as u64,
        );
        if h & 1 == 0 {
            out[idx] = true;
        }
    }
    out
}

fn render(config: &SceneConfig, spec: &CorruptionSpec) -> Result<VideoAnnotation> {
    let layout = validate_config(config)?;
    validate_spec(config, &layout, spec)?;

    let width = config.width as usize;
    let height = config.height as usize;
    let bands = config.background.len();
    let track_count = layout.count() as u32;

    // Stripe base raster is frame-independent apart from segment ids.
    let mut band_of_row = vec![0usize; height];
    for (row, slot) in band_of_row.iter_mut().enumerate() {
        *slot = (row * bands) / height;
    }

    let mut frames = Vec::with_capacity(config.frame_count);
    let mut registry = Registry::new();
    // Post-render registry rewrites: per frame, track -> (class, track).
    let mut relabel: Vec<BTreeMap<u32, SegmentRecord>> = (0..config.frame_count)
        .map(|_| {
            layout
                .tracks
                .iter()
                .map(|&(track_id, class_id, _)| {
                    (track_id, SegmentRecord { class_id, track_id })
                })
                .collect()
        })
        .collect();

    for op in &spec.operators {
        match *op {
            CorruptionOp::IdSwap { frame, track_a, track_b } => {
                for frame_relabel in relabel.iter_mut().skip(frame) {
                    let a = frame_relabel[&track_a];
                    let b = frame_relabel[&track_b];
                    frame_relabel.insert(
                        track_a,
                        SegmentRecord {
                            class_id: a.class_id,
                            track_id: b.track_id,
                        },
                    );
                    frame_relabel.insert(
                        track_b,
                        SegmentRecord {
                            class_id: b.class_id,
                            track_id: a.track_id,
                        },
                    );
                }
            }
            CorruptionOp::ClassFlip { track, new_class } => {
                for frame_relabel in relabel.iter_mut() {
                    let entry = frame_relabel.get_mut(&track).expect("validated");
                    entry.class_id = new_class;
                }
            }
            _ => {}
        }
    }

    for frame_idx in 0..config.frame_count {
        let segment_id = |ordinal: usize| -> u32 {
            (frame_idx as u32) * track_count + ordinal as u32 + 1
        };

        let mut raster = vec![0u32; width * height];
        for y in 0..height {
            let ordinal = band_of_row[y];
            let id = segment_id(ordinal);
            for x in 0..width {
                raster[y * width + x] = id;
            }
        }

        for (obj_idx, object) in config.objects.iter().enumerate() {
            let ordinal = bands + obj_idx;
            let track_id = (ordinal + 1) as u32;
            let mut mask = object_mask(config, object, frame_idx);
            let mut dropped = false;
            for op in &spec.operators {
                match *op {
                    CorruptionOp::Erode { track, radius } if track == track_id => {
                        mask = erode_mask(&mask, config.width, config.height, radius);
                    }
                    CorruptionOp::Drop { track, from, to }
                        if track == track_id && (from..=to).contains(&frame_idx) =>
                    {
                        dropped = true;
                    }
                    CorruptionOp::BoundaryJitter { amplitude, seed } => {
                        mask = jitter_mask(&mask, config, track_id, frame_idx, amplitude, seed);
                    }
                    _ => {}
                }
            }
            if dropped {
                continue;
            }
            let id = segment_id(ordinal);
            for (pixel, &inside) in mask.iter().enumerate() {
                if inside {
                    raster[pixel] = id;
                }
            }
        }

        let map = SegmentMap::new(config.width, config.height, raster)?;
        for (ordinal, &(track_id, _, _)) in layout.tracks.iter().enumerate() {
            let id = segment_id(ordinal);
            if map.ids().contains(&id) {
                registry.insert(id, relabel[frame_idx][&track_id]);
            }
        }
        frames.push(map);
    }

    Ok(VideoAnnotation::new("scene", frames, registry))
}

/// Renders the configured scene. Same config, byte-identical output.
pub fn gen_scene(config: &SceneConfig) -> Result<VideoAnnotation> {
    render(config, &CorruptionSpec::default())
}

/// Re-renders the scene with the corruption operators applied in order.
/// An empty spec reproduces [`gen_scene`] byte for byte.
pub fn corrupt(config: &SceneConfig, spec: &CorruptionSpec) -> Result<VideoAnnotation> {
    render(config, spec)
}

/// Class catalog implied by a scene: background classes are stuff,
/// object classes (plus any class-flip targets) are things.
pub fn derive_categories(
    config: &SceneConfig,
    spec: Option<&CorruptionSpec>,
) -> Result<CategoryTable> {
    let mut entries: BTreeMap<u32, bool> = BTreeMap::new();
    for band in &config.background {
        entries.insert(band.class_id, false);
    }
    for object in &config.objects {
        entries.entry(object.class_id).or_insert(true);
    }
    if let Some(spec) = spec {
        for op in &spec.operators {
            if let CorruptionOp::ClassFlip { new_class, .. } = *op {
                entries.entry(new_class).or_insert(true);
            }
        }
    }
    CategoryTable::new(
        entries
            .into_iter()
            .map(|(class_id, is_thing)| Category {
                class_id,
                name: format!(
                    "{}_{class_id:03}",
                    if is_thing { "thing" } else { "stuff" }
                ),
                is_thing,
            })
            .collect(),
    )
}

/// One fixed unit embedding per track: an orthonormal basis vector while
/// tracks fit the dimension, seeded unit vectors beyond that.
pub fn track_embeddings(config: &SceneConfig) -> Result<BTreeMap<u32, Vec<f64>>> {
    let layout = validate_config(config)?;
    let dim = config.embed_dim.max(1);
    let mut out = BTreeMap::new();
    for (ordinal, &(track_id, _, _)) in layout.tracks.iter().enumerate() {
        let embedding = if layout.count() <= dim {
            let mut v = vec![0.0; dim];
            v[ordinal] = 1.0;
            v
        } else {
            let mut rng =
                ChaCha8Rng::seed_from_u64(splitmix64(config.seed ^ u64::from(track_id)));
            let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in &mut v {
                *x /= norm;
            }
            v
        };
        out.insert(track_id, embedding);
    }
    Ok(out)
}

/// Writes a complete dataset root for a list of (video id, scene,
/// corruption) triples: catalog, manifest, id rasters, registries, and
/// per-video embedding sidecars. Thing/stuff roles must agree across
/// scenes.
pub fn write_dataset_root(
    out: &std::path::Path,
    videos: &[(String, SceneConfig, CorruptionSpec)],
) -> Result<()> {
    use crate::data::io;
    use crate::data::manifest::{DatasetManifest, SplitCounts, VideoMeta};

    if videos.is_empty() {
        return Err(Error::validation("dataset needs at least one video"));
    }
    let mut merged: BTreeMap<u32, bool> = BTreeMap::new();
    for (_, scene, spec) in videos {
        let table = derive_categories(scene, Some(spec))?;
        for category in table.entries() {
            match merged.insert(category.class_id, category.is_thing) {
                Some(prev) if prev != category.is_thing => {
                    return Err(Error::validation(format!(
                        "class {} is thing in one scene and stuff in another",
                        category.class_id
                    )));
                }
                _ => {}
            }
        }
    }
    let categories = CategoryTable::new(
        merged
            .into_iter()
            .map(|(class_id, is_thing)| Category {
                class_id,
                name: format!(
                    "{}_{class_id:03}",
                    if is_thing { "thing" } else { "stuff" }
                ),
                is_thing,
            })
            .collect(),
    )?;

    let root = io::DatasetRoot::new(out);
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    io::save_category_table(&categories, &root.categories_path())?;

    let mut metas = Vec::new();
    for (video_id, scene, spec) in videos {
        let mut video = corrupt(scene, spec)?;
        video.video_id = video_id.clone();
        video.validate(&categories)?;
        io::write_video(&video, &root.video_dir(video_id))?;
        let queries = queries_file(scene, &video)?;
        io::save_queries(&queries, &root.queries_path(video_id))?;
        metas.push(VideoMeta {
            id: video_id.clone(),
            frames: scene.frame_count as u64,
            width: scene.width,
            height: scene.height,
        });
    }
    let manifest = DatasetManifest {
        splits: SplitCounts {
            train: 0,
            val: metas.len() as u64,
            test: 0,
        },
        videos: metas,
    };
    io::save_manifest(&manifest, &root.manifest_path())
}

/// Embedding sidecar for a rendered scene: every segment of every frame
/// carries its track's fixed embedding.
pub fn queries_file(config: &SceneConfig, video: &VideoAnnotation) -> Result<QueriesFile> {
    let embeddings = track_embeddings(config)?;
    let mut frames = Vec::with_capacity(video.frames.len());
    for (index, frame) in video.frames.iter().enumerate() {
        let mut queries = Vec::new();
        for segment_id in frame.present_ids() {
            let track_id = video.registry[&segment_id].track_id;
            let embedding = embeddings
                .get(&track_id)
                .ok_or_else(|| {
                    Error::validation(format!("no embedding for track {track_id}"))
                })?
                .clone();
            queries.push(QueryEntry {
                segment_id,
                embedding,
            });
        }
        frames.push(QueryFrame { index, queries });
    }
    Ok(QueriesFile {
        dim: config.embed_dim.max(1),
        frames,
    })
}
