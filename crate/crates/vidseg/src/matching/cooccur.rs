//! Sparse co-occurrence counting between two id rasters.
//!
//! The table is the substrate for every IoU in the crate: per-frame
//! segment matching, windowed tube matching, and track association all
//! reduce to pair counts accumulated here. Counts are 64-bit so tube
//! accumulation over long high-resolution videos cannot overflow.

use std::collections::{BTreeMap, HashMap};

use crate::data::raster::SegmentMap;
use crate::error::{Error, Result};

/// Pixel counts for every (id_a, id_b) pair of two aligned rasters,
/// including the void row and column. Merging two tables is pointwise
/// sum, associative and commutative with the empty table as identity.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CooccurrenceTable {
    pairs: BTreeMap<(u32, u32), u64>,
    areas_a: BTreeMap<u32, u64>,
    areas_b: BTreeMap<u32, u64>,
    total_pixels: u64,
}

impl CooccurrenceTable {
    pub fn new() -> Self {
        CooccurrenceTable::default()
    }

    pub fn is_empty(&self) -> bool {
        self.total_pixels == 0
    }

    pub fn total_pixels(&self) -> u64 {
        self.total_pixels
    }

    pub fn pair(&self, x: u32, y: u32) -> u64 {
        self.pairs.get(&(x, y)).copied().unwrap_or(0)
    }

    pub fn area_a(&self, x: u32) -> Option<u64> {
        self.areas_a.get(&x).copied()
    }

    pub fn area_b(&self, y: u32) -> Option<u64> {
        self.areas_b.get(&y).copied()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&(u32, u32), &u64)> {
        self.pairs.iter()
    }

    /// Nonzero ids on the a side.
    pub fn ids_a(&self) -> impl Iterator<Item = u32> + '_ {
        self.areas_a.keys().copied().filter(|&id| id != 0)
    }

    /// Nonzero ids on the b side.
    pub fn ids_b(&self) -> impl Iterator<Item = u32> + '_ {
        self.areas_b.keys().copied().filter(|&id| id != 0)
    }

    /// Pairs (b_id, count) overlapping the given a-side id, void included.
    pub fn row(&self, x: u32) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.pairs
            .range((x, 0)..=(x, u32::MAX))
            .map(|(&(_, y), &count)| (y, count))
    }

    pub(crate) fn add_pair(&mut self, x: u32, y: u32, count: u64) {
        if count == 0 {
            return;
        }
        *self.pairs.entry((x, y)).or_insert(0) += count;
        *self.areas_a.entry(x).or_insert(0) += count;
        *self.areas_b.entry(y).or_insert(0) += count;
        self.total_pixels += count;
    }

    /// Pointwise sum.
    pub fn merge(&mut self, other: &CooccurrenceTable) {
        for (&(x, y), &count) in &other.pairs {
            self.add_pair(x, y, count);
        }
    }
}

/// Dense per-raster counting pass. Ids are remapped to small indices so
/// the inner loop is two table lookups and one increment per pixel.
/// Exposed crate-wide so metric engines can derive several keyed tables
/// from one pass over the pixels.
pub(crate) fn count_pairs(a: &SegmentMap, b: &SegmentMap) -> Vec<((u32, u32), u64)> {
    const DENSE_LIMIT: u32 = 1 << 20;

    let max_a = a.ids().iter().copied().max().unwrap_or(0);
    let max_b = b.ids().iter().copied().max().unwrap_or(0);

    if max_a < DENSE_LIMIT && max_b < DENSE_LIMIT {
        let mut index_a = vec![u32::MAX; max_a as usize + 1];
        let mut index_b = vec![u32::MAX; max_b as usize + 1];
        let mut ids_a: Vec<u32> = Vec::new();
        let mut ids_b: Vec<u32> = Vec::new();
        for &id in a.ids() {
            let slot = &mut index_a[id as usize];
            if *slot == u32::MAX {
                *slot = ids_a.len() as u32;
                ids_a.push(id);
            }
        }
        for &id in b.ids() {
            let slot = &mut index_b[id as usize];
            if *slot == u32::MAX {
                *slot = ids_b.len() as u32;
                ids_b.push(id);
            }
        }
        let nb = ids_b.len();
        let mut counts = vec![0u64; ids_a.len() * nb];
        for (&ia, &ib) in a.ids().iter().zip(b.ids()) {
            let row = index_a[ia as usize] as usize;
            let col = index_b[ib as usize] as usize;
            counts[row * nb + col] += 1;
        }
        let mut out = Vec::new();
        for (row, &ida) in ids_a.iter().enumerate() {
            for (col, &idb) in ids_b.iter().enumerate() {
                let count = counts[row * nb + col];
                if count > 0 {
                    out.push(((ida, idb), count));
                }
            }
        }
        out
    } else {
        let mut counts: HashMap<(u32, u32), u64> = HashMap::new();
        for (&ia, &ib) in a.ids().iter().zip(b.ids()) {
            *counts.entry((ia, ib)).or_insert(0) += 1;
        }
        counts.into_iter().collect()
    }
}

fn check_shapes(a: &SegmentMap, b: &SegmentMap) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::validation(format!(
            "resolution mismatch: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// Counts, in a single pass, how many pixels carry id x in `a` and id y
/// in `b` for every pair (x, y), void included.
pub fn cooccurrence(a: &SegmentMap, b: &SegmentMap) -> Result<CooccurrenceTable> {
    check_shapes(a, b)?;
    let mut table = CooccurrenceTable::new();
    for ((x, y), count) in count_pairs(a, b) {
        table.add_pair(x, y, count);
    }
    Ok(table)
}

/// Accumulates one frame pair into `table` under tube keys: every
/// nonzero id is replaced by its key (typically the track id) before
/// counting, so successive frames of a window build up tube overlaps.
/// Void maps to void; keys must never map a nonzero id to 0.
pub fn accumulate_tube(
    table: &mut CooccurrenceTable,
    a: &SegmentMap,
    b: &SegmentMap,
    key_a: impl Fn(u32) -> u32,
    key_b: impl Fn(u32) -> u32,
) -> Result<()> {
    check_shapes(a, b)?;
    for ((x, y), count) in count_pairs(a, b) {
        let kx = if x == 0 { 0 } else { key_a(x) };
        let ky = if y == 0 { 0 } else { key_b(y) };
        debug_assert!(x == 0 || kx != 0, "tube key mapped nonzero id {x} to void");
        debug_assert!(y == 0 || ky != 0, "tube key mapped nonzero id {y} to void");
        table.add_pair(kx, ky, count);
    }
    Ok(())
}

/// Intersection over union of a-side id `x` against b-side id `y`.
///
/// The a side is the reference (ground-truth) side: pixels that are void
/// in `a` are excluded from the union, so a b-segment loses the part of
/// its area that overlaps reference void. Returns 0 when the pair does
/// not overlap.
pub fn iou(table: &CooccurrenceTable, x: u32, y: u32) -> Result<f64> {
    if x == 0 || y == 0 {
        return Err(Error::validation("iou is undefined for the void id"));
    }
    let area_x = table
        .area_a(x)
        .ok_or_else(|| Error::validation(format!("id {x} unknown on side a")))?;
    let area_y = table
        .area_b(y)
        .ok_or_else(|| Error::validation(format!("id {y} unknown on side b")))?;
    let inter = table.pair(x, y);
    if inter == 0 {
        return Ok(0.0);
    }
    let void_overlap = table.pair(0, y);
    let union = area_x + (area_y - void_overlap) - inter;
    Ok(inter as f64 / union as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(w: u32, h: u32, ids: Vec<u32>) -> SegmentMap {
        SegmentMap::new(w, h, ids).unwrap()
    }

    /// Naive per-pixel double loop used as the counting oracle.
    fn naive_table(a: &SegmentMap, b: &SegmentMap) -> CooccurrenceTable {
        let mut table = CooccurrenceTable::new();
        for y in 0..a.height() {
            for x in 0..a.width() {
                table.add_pair(a.get(x, y), b.get(x, y), 1);
            }
        }
        table
    }

    #[test]
    fn identical_maps_are_diagonal() {
        let m = map(4, 4, {
            let mut v = vec![1; 12];
            v.extend([2, 2, 2, 2]);
            v
        });
        let table = cooccurrence(&m, &m).unwrap();
        assert_eq!(table.pair(1, 1), 12);
        assert_eq!(table.pair(2, 2), 4);
        assert_eq!(table.pair(1, 2), 0);
        assert_eq!(table.total_pixels(), 16);
    }

    #[test]
    fn half_split_counts() {
        // a is all id 1; b is left half 1, right half 2 on a 4x2 canvas.
        let a = map(4, 2, vec![1; 8]);
        let b = map(4, 2, vec![1, 1, 2, 2, 1, 1, 2, 2]);
        let table = cooccurrence(&a, &b).unwrap();
        assert_eq!(table.pair(1, 1), 4);
        assert_eq!(table.pair(1, 2), 4);
        assert_eq!(table.area_a(1), Some(8));
    }

    #[test]
    fn matches_naive_oracle_on_random_maps() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let a = map(16, 16, (0..256).map(|_| rng.gen_range(0..5)).collect());
            let b = map(16, 16, (0..256).map(|_| rng.gen_range(0..5)).collect());
            assert_eq!(cooccurrence(&a, &b).unwrap(), naive_table(&a, &b));
        }
    }

    #[test]
    fn conservation_holds() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let a = map(16, 16, (0..256).map(|_| rng.gen_range(0..6)).collect());
        let b = map(16, 16, (0..256).map(|_| rng.gen_range(0..6)).collect());
        let table = cooccurrence(&a, &b).unwrap();
        for x in 0..6u32 {
            if let Some(area) = table.area_a(x) {
                let row_sum: u64 = (0..6).map(|y| table.pair(x, y)).sum();
                assert_eq!(row_sum, area);
            }
        }
        let pair_sum: u64 = table.pairs().map(|(_, &c)| c).sum();
        assert_eq!(pair_sum, table.total_pixels());
        assert_eq!(table.total_pixels(), 256);
    }

    #[test]
    fn tube_accumulation_doubles_on_repeat() {
        let a = map(4, 2, vec![1, 1, 2, 2, 1, 1, 2, 2]);
        let b = map(4, 2, vec![1, 1, 1, 2, 1, 1, 1, 2]);
        let single = cooccurrence(&a, &b).unwrap();
        let mut doubled = CooccurrenceTable::new();
        accumulate_tube(&mut doubled, &a, &b, |id| id, |id| id).unwrap();
        accumulate_tube(&mut doubled, &a, &b, |id| id, |id| id).unwrap();
        for (&(x, y), &count) in single.pairs() {
            assert_eq!(doubled.pair(x, y), 2 * count);
        }
    }

    #[test]
    fn tube_keys_merge_ids() {
        let a = map(2, 2, vec![1, 1, 2, 2]);
        let b = map(2, 2, vec![3, 3, 4, 4]);
        let mut table = CooccurrenceTable::new();
        // Both a-side ids belong to one track.
        accumulate_tube(&mut table, &a, &b, |_| 9, |id| id).unwrap();
        assert_eq!(table.area_a(9), Some(4));
        assert_eq!(table.pair(9, 3), 2);
        assert_eq!(table.pair(9, 4), 2);
    }

    #[test]
    fn tube_equals_flattened_frames() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let frames_a: Vec<SegmentMap> = (0..3)
            .map(|_| map(8, 4, (0..32).map(|_| rng.gen_range(0..4)).collect()))
            .collect();
        let frames_b: Vec<SegmentMap> = (0..3)
            .map(|_| map(8, 4, (0..32).map(|_| rng.gen_range(0..4)).collect()))
            .collect();

        let mut accumulated = CooccurrenceTable::new();
        for (a, b) in frames_a.iter().zip(&frames_b) {
            accumulate_tube(&mut accumulated, a, b, |id| id, |id| id).unwrap();
        }

        // Flattening oracle: stack the frames into one tall raster.
        let tall = |frames: &[SegmentMap]| {
            let ids: Vec<u32> = frames.iter().flat_map(|f| f.ids().to_vec()).collect();
            map(8, 12, ids)
        };
        let flat = cooccurrence(&tall(&frames_a), &tall(&frames_b)).unwrap();
        assert_eq!(accumulated, flat);
    }

    #[test]
    fn merge_is_order_independent() {
        let a = map(2, 2, vec![1, 0, 2, 2]);
        let b = map(2, 2, vec![1, 1, 0, 2]);
        let t1 = cooccurrence(&a, &b).unwrap();
        let t2 = cooccurrence(&b, &a).unwrap();
        let mut left = t1.clone();
        left.merge(&t2);
        let mut right = t2.clone();
        right.merge(&t1);
        assert_eq!(left, right);
        let mut with_empty = CooccurrenceTable::new();
        with_empty.merge(&t1);
        assert_eq!(with_empty, t1);
    }

    #[test]
    fn iou_identity_and_arithmetic() {
        let a = map(4, 3, vec![1; 12]);
        let table = cooccurrence(&a, &a).unwrap();
        assert_eq!(iou(&table, 1, 1).unwrap(), 1.0);

        // Overlap 6, areas 8 and 8, no void anywhere: 6 / 10 = 0.6.
        let gt = map(4, 4, {
            let mut v = vec![1; 8];
            v.extend(vec![2; 8]);
            v
        });
        let pr = map(
            4,
            4,
            vec![1, 1, 1, 1, 1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0],
        );
        let table = cooccurrence(&gt, &pr).unwrap();
        assert_eq!(table.pair(1, 1), 6);
        assert!((iou(&table, 1, 1).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn iou_excludes_reference_void_from_union() {
        // Prediction area 8, but 2 of its pixels sit on reference void:
        // union = 8 + (8 - 2) - 6 = 8.
        let gt = map(4, 4, {
            let mut v = vec![1; 8];
            v.extend(vec![0; 8]);
            v
        });
        let pr = map(
            4,
            4,
            vec![0, 0, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0],
        );
        let table = cooccurrence(&gt, &pr).unwrap();
        assert_eq!(table.pair(1, 1), 6);
        assert_eq!(table.pair(0, 1), 2);
        assert!((iou(&table, 1, 1).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn iou_matches_set_oracle_without_void() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let a = map(8, 8, (0..64).map(|_| rng.gen_range(1..4)).collect());
            let b = map(8, 8, (0..64).map(|_| rng.gen_range(1..4)).collect());
            let table = cooccurrence(&a, &b).unwrap();
            for x in 1..4u32 {
                for y in 1..4u32 {
                    let set_a: Vec<usize> = (0..64)
                        .filter(|&i| a.ids()[i] == x)
                        .collect();
                    let set_b: Vec<usize> = (0..64)
                        .filter(|&i| b.ids()[i] == y)
                        .collect();
                    if set_a.is_empty() || set_b.is_empty() {
                        continue;
                    }
                    let inter = set_a.iter().filter(|i| set_b.contains(i)).count();
                    let union = set_a.len() + set_b.len() - inter;
                    let expected = inter as f64 / union as f64;
                    assert!((iou(&table, x, y).unwrap() - expected).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn iou_symmetry_on_void_free_maps() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(22);
        let a = map(8, 8, (0..64).map(|_| rng.gen_range(1..4)).collect());
        let b = map(8, 8, (0..64).map(|_| rng.gen_range(1..4)).collect());
        let ab = cooccurrence(&a, &b).unwrap();
        let ba = cooccurrence(&b, &a).unwrap();
        for x in 1..4u32 {
            for y in 1..4u32 {
                assert_eq!(iou(&ab, x, y).unwrap(), iou(&ba, y, x).unwrap());
            }
        }
    }

    #[test]
    fn iou_errors() {
        let a = map(2, 2, vec![1, 1, 1, 1]);
        let table = cooccurrence(&a, &a).unwrap();
        assert!(iou(&table, 0, 1).is_err());
        assert!(iou(&table, 1, 9).is_err());
        let b = map(2, 3, vec![1; 6]);
        assert!(cooccurrence(&a, &b).is_err());
    }
}
