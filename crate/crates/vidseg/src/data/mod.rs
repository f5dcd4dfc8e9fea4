//! Data model for video segmentation ground truth and predictions:
//! class catalog, id rasters, annotated videos, manifests, and the
//! on-disk dataset layout.

pub mod category;
pub mod io;
pub mod manifest;
pub mod raster;
pub mod video;

pub use category::{Category, CategoryTable};
pub use io::{DatasetRoot, QueriesFile, QueryEntry, QueryFrame};
pub use manifest::{validate_manifest, DatasetManifest, ManifestReport, SplitCounts, VideoMeta};
pub use raster::SegmentMap;
pub use video::{pan_to_sem, Registry, SegmentRecord, SemanticVideo, VideoAnnotation};
