use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// Video counts per dataset split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: u64,
    pub val: u64,
    pub test: u64,
}

impl SplitCounts {
    pub fn total(&self) -> u64 {
        self.train + self.val + self.test
    }
}

/// Shape metadata of one video.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub id: String,
    pub frames: u64,
    pub width: u32,
    pub height: u32,
}

/// Dataset-level manifest: split counts plus per-video shape records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub splits: SplitCounts,
    pub videos: Vec<VideoMeta>,
}

/// Outcome of manifest validation. Violations are data, not failures;
/// an empty report means the manifest is consistent.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ManifestReport {
    pub violations: Vec<String>,
}

impl ManifestReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every consistency rule and reports all violations found.
pub fn validate_manifest(manifest: &DatasetManifest) -> ManifestReport {
    let mut violations = Vec::new();

    let total = manifest.videos.len() as u64;
    if manifest.splits.total() != total {
        violations.push(format!(
            "split sum {} (train {} + val {} + test {}) does not equal total video count {}",
            manifest.splits.total(),
            manifest.splits.train,
            manifest.splits.val,
            manifest.splits.test,
            total
        ));
    }

    let mut seen = BTreeSet::new();
    for video in &manifest.videos {
        if !seen.insert(video.id.as_str()) {
            violations.push(format!("duplicate video id '{}'", video.id));
        }
        if video.frames == 0 {
            violations.push(format!("video '{}' declares zero frames", video.id));
        }
        if video.width == 0 || video.height == 0 {
            violations.push(format!(
                "video '{}' declares degenerate resolution {}x{}",
                video.id, video.width, video.height
            ));
        }
    }

    ManifestReport { violations }
}
