use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// A single-frame raster of ids in row-major order. Id 0 is void.
///
/// The same carrier is used for segment-id rasters (panoptic frames) and
/// class-id rasters (semantic frames); only the interpretation of the
/// values differs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentMap {
    width: u32,
    height: u32,
    ids: Vec<u32>,
}

impl SegmentMap {
    pub fn new(width: u32, height: u32, ids: Vec<u32>) -> Result<Self> {
        let expected = width as usize * height as usize;
        if ids.len() != expected {
            return Err(Error::validation(format!(
                "raster length {} does not match {}x{} = {}",
                ids.len(),
                width,
                height,
                expected
            )));
        }
        Ok(SegmentMap { width, height, ids })
    }

    /// A raster with every pixel set to `id`.
    pub fn filled(width: u32, height: u32, id: u32) -> Self {
        SegmentMap {
            width,
            height,
            ids: vec![id; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn pixel_count(&self) -> usize {
        self.ids.len()
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u32 {
        self.ids[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, id: u32) {
        self.ids[y as usize * self.width as usize + x as usize] = id;
    }

    pub fn same_shape(&self, other: &SegmentMap) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Distinct nonzero ids present in the raster.
    pub fn present_ids(&self) -> BTreeSet<u32> {
        let max = self.ids.iter().copied().max().unwrap_or(0);
        if max < (1 << 20) {
            let mut seen = vec![false; max as usize + 1];
            for &id in &self.ids {
                seen[id as usize] = true;
            }
            (1..=max).filter(|&id| seen[id as usize]).collect()
        } else {
            self.ids.iter().copied().filter(|&id| id != 0).collect()
        }
    }

    /// Pixel count per nonzero id.
    pub fn areas(&self) -> std::collections::BTreeMap<u32, u64> {
        let mut areas = std::collections::BTreeMap::new();
        for &id in &self.ids {
            if id != 0 {
                *areas.entry(id).or_insert(0u64) += 1;
            }
        }
        areas
    }

    /// Replaces every nonzero id with `map(id)`; void stays void. The
    /// mapping is evaluated once per distinct id, not per pixel.
    pub fn remap(&self, map: impl Fn(u32) -> u32) -> SegmentMap {
        let max = self.ids.iter().copied().max().unwrap_or(0);
        let ids = if max < (1 << 20) {
            let mut lut = vec![u32::MAX; max as usize + 1];
            if !lut.is_empty() {
                lut[0] = 0;
            }
            self.ids
                .iter()
                .map(|&id| {
                    let slot = lut[id as usize];
                    if slot != u32::MAX {
                        slot
                    } else {
                        let value = map(id);
                        lut[id as usize] = value;
                        value
                    }
                })
                .collect()
        } else {
            self.ids
                .iter()
                .map(|&id| if id == 0 { 0 } else { map(id) })
                .collect()
        };
        SegmentMap {
            width: self.width,
            height: self.height,
            ids,
        }
    }
}
