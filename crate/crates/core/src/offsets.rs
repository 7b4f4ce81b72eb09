//! The sorted lattice-offset list that emulates a circle growing from the
//! origin.
//!
//! Only one octant is stored: the triangle 0 <= x <= y <= n-1, counting-sorted
//! by integer distance key to the origin. The full set of (2n-1)^2 offsets
//! with coordinates in (-n, n) is recovered by symmetry on the fly. Build it
//! once per (n, metric) and share it across runs.

use crate::metric::Metric;

/// A lattice offset together with its integer distance key to the origin.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Offset {
    pub dx: i32,
    pub dy: i32,
    pub key: u64,
}

/// Offsets sorted by nondecreasing distance to the origin.
///
/// Triangle points at equal distance are ordered by (x, y); the symmetric
/// images of one triangle point are emitted in the fixed sequence
/// (x,y), (y,x), (-x,y), (-y,x), (x,-y), (y,-x), (-x,-y), (-y,-x),
/// skipping duplicates (first occurrence wins), so the expanded stream is
/// fully deterministic.
#[derive(Clone, Debug)]
pub struct SortedOffsets {
    n: u32,
    metric: Metric,
    triangle: Vec<(u32, u32)>,
    keys: Vec<u64>,
}

impl SortedOffsets {
    /// Counting-sorts the triangle by integer distance key. Bucket count is
    /// the metric's key bound (2n^2 for Euclidean), so the build is O(n^2)
    /// time and space.
    pub fn build(n: u32, metric: Metric) -> SortedOffsets {
        assert!(n >= 1);
        let tri_len = (n as usize) * (n as usize + 1) / 2;
        let bound = metric.int_key_bound(n) as usize;

        let mut counts = vec![0u32; bound + 1];
        for x in 0..n {
            for y in x..n {
                counts[metric.int_key(x as i64, y as i64) as usize] += 1;
            }
        }
        let mut starts = counts;
        let mut acc = 0u32;
        for slot in starts.iter_mut() {
            let c = *slot;
            *slot = acc;
            acc += c;
        }

        let mut triangle = vec![(0u32, 0u32); tri_len];
        let mut keys = vec![0u64; tri_len];
        for x in 0..n {
            for y in x..n {
                let key = metric.int_key(x as i64, y as i64);
                let at = &mut starts[key as usize];
                triangle[*at as usize] = (x, y);
                keys[*at as usize] = key;
                *at += 1;
            }
        }
        SortedOffsets { n, metric, triangle, keys }
    }

    #[inline]
    pub fn n(&self) -> u32 {
        self.n
    }

    #[inline]
    pub fn metric(&self) -> Metric {
        self.metric
    }

    /// Number of offsets in the expanded stream: (2n-1)^2.
    #[inline]
    pub fn expanded_len(&self) -> usize {
        let side = 2 * self.n as usize - 1;
        side * side
    }

    /// The expanded offset stream in nondecreasing distance order.
    pub fn expanded(&self) -> ExpandedIter<'_> {
        ExpandedIter { offsets: self, tri_idx: 0, images: [(0, 0); 8], image_count: 0, image_idx: 0 }
    }

    /// Consecutive runs of triangle points at equal distance, in stream
    /// order. The circle-growing matcher processes one run at a time.
    pub fn distance_classes(&self) -> ClassIter<'_> {
        ClassIter { offsets: self, start: 0 }
    }

    /// Appends all symmetric images of the triangle points in
    /// `range` to `out`.
    pub fn expand_class_into(&self, range: std::ops::Range<usize>, out: &mut Vec<(i32, i32)>) {
        let mut images = [(0i32, 0i32); 8];
        for &(x, y) in &self.triangle[range] {
            let count = symmetric_images(x as i32, y as i32, &mut images);
            out.extend_from_slice(&images[..count]);
        }
    }
}

/// Writes the distinct symmetric images of triangle point (x, y) into `out`
/// in the documented fixed order; returns how many there are.
#[inline]
fn symmetric_images(x: i32, y: i32, out: &mut [(i32, i32); 8]) -> usize {
    if x == 0 && y == 0 {
        out[0] = (0, 0);
        1
    } else if x == 0 {
        out[..4].copy_from_slice(&[(0, y), (y, 0), (-y, 0), (0, -y)]);
        4
    } else if x == y {
        out[..4].copy_from_slice(&[(x, x), (-x, x), (x, -x), (-x, -x)]);
        4
    } else {
        out.copy_from_slice(&[
            (x, y),
            (y, x),
            (-x, y),
            (-y, x),
            (x, -y),
            (y, -x),
            (-x, -y),
            (-y, -x),
        ]);
        8
    }
}

/// Streams the (2n-1)^2 expanded offsets in nondecreasing distance order.
pub struct ExpandedIter<'a> {
    offsets: &'a SortedOffsets,
    tri_idx: usize,
    images: [(i32, i32); 8],
    image_count: usize,
    image_idx: usize,
}

impl<'a> Iterator for ExpandedIter<'a> {
    type Item = Offset;

    fn next(&mut self) -> Option<Offset> {
        if self.image_idx == self.image_count {
            if self.tri_idx == self.offsets.triangle.len() {
                return None;
            }
            let (x, y) = self.offsets.triangle[self.tri_idx];
            self.image_count = symmetric_images(x as i32, y as i32, &mut self.images);
            self.image_idx = 0;
            self.tri_idx += 1;
        }
        let (dx, dy) = self.images[self.image_idx];
        self.image_idx += 1;
        Some(Offset { dx, dy, key: self.offsets.keys[self.tri_idx - 1] })
    }
}

/// One run of triangle points sharing a distance key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistanceClass {
    pub key: u64,
    pub triangle_range: std::ops::Range<usize>,
}

pub struct ClassIter<'a> {
    offsets: &'a SortedOffsets,
    start: usize,
}

impl<'a> Iterator for ClassIter<'a> {
    type Item = DistanceClass;

    fn next(&mut self) -> Option<DistanceClass> {
        let keys = &self.offsets.keys;
        if self.start == keys.len() {
            return None;
        }
        let key = keys[self.start];
        let mut end = self.start + 1;
        while end < keys.len() && keys[end] == key {
            end += 1;
        }
        let range = self.start..end;
        self.start = end;
        Some(DistanceClass { key, triangle_range: range })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn check_stream(n: u32, metric: Metric) {
        let offsets = SortedOffsets::build(n, metric);
        let expanded: Vec<Offset> = offsets.expanded().collect();
        let side = 2 * n as i64 - 1;
        assert_eq!(expanded.len(), (side * side) as usize);
        assert_eq!(expanded.len(), offsets.expanded_len());

        // no duplicates, all in range, keys correct and nondecreasing
        let mut seen = HashSet::new();
        let mut prev_key = 0u64;
        for o in &expanded {
            assert!(o.dx.abs() < n as i32 && o.dy.abs() < n as i32);
            assert!(seen.insert((o.dx, o.dy)), "duplicate offset {:?}", (o.dx, o.dy));
            assert_eq!(o.key, metric.int_key(o.dx as i64, o.dy as i64));
            assert!(o.key >= prev_key, "distance decreased at {:?}", (o.dx, o.dy));
            prev_key = o.key;
        }
    }

    #[test]
    fn n1_is_single_origin() {
        let offsets = SortedOffsets::build(1, Metric::Euclidean);
        let expanded: Vec<Offset> = offsets.expanded().collect();
        assert_eq!(expanded.len(), 1);
        assert_eq!((expanded[0].dx, expanded[0].dy), (0, 0));
    }

    #[test]
    fn n2_matches_hand_enumeration() {
        let offsets = SortedOffsets::build(2, Metric::Euclidean);
        let expanded: Vec<Offset> = offsets.expanded().collect();
        assert_eq!(expanded.len(), 9);
        assert_eq!((expanded[0].dx, expanded[0].dy), (0, 0));
        for o in &expanded[1..5] {
            assert_eq!(o.key, 1);
        }
        for o in &expanded[5..] {
            assert_eq!(o.key, 2);
        }
    }

    #[test]
    fn streams_are_exact_for_all_metrics() {
        for metric in [Metric::Euclidean, Metric::Manhattan, Metric::Chebyshev] {
            for n in [1, 2, 3, 5, 10, 64] {
                check_stream(n, metric);
            }
        }
    }

    #[test]
    fn stream_distances_match_full_sort() {
        // multiset of keys equals a direct enumeration of all offsets
        let n = 24;
        for metric in [Metric::Euclidean, Metric::Manhattan, Metric::Chebyshev] {
            let offsets = SortedOffsets::build(n, metric);
            let mut stream_keys: Vec<u64> = offsets.expanded().map(|o| o.key).collect();
            let mut direct: Vec<u64> = Vec::new();
            for dx in -(n as i64 - 1)..n as i64 {
                for dy in -(n as i64 - 1)..n as i64 {
                    direct.push(metric.int_key(dx, dy));
                }
            }
            direct.sort_unstable();
            assert!(stream_keys.windows(2).all(|w| w[0] <= w[1]));
            stream_keys.sort_unstable();
            assert_eq!(stream_keys, direct);
        }
    }

    #[test]
    fn classes_cover_triangle_in_order() {
        let offsets = SortedOffsets::build(9, Metric::Manhattan);
        let mut covered = 0usize;
        let mut prev_key: Option<u64> = None;
        let mut expanded_total = 0usize;
        for class in offsets.distance_classes() {
            assert_eq!(class.triangle_range.start, covered);
            covered = class.triangle_range.end;
            if let Some(p) = prev_key {
                assert!(class.key > p);
            }
            prev_key = Some(class.key);
            let mut scratch = Vec::new();
            offsets.expand_class_into(class.triangle_range.clone(), &mut scratch);
            for &(dx, dy) in &scratch {
                assert_eq!(Metric::Manhattan.int_key(dx as i64, dy as i64), class.key);
            }
            expanded_total += scratch.len();
        }
        assert_eq!(covered, offsets.triangle.len());
        assert_eq!(expanded_total, offsets.expanded_len());
    }

    #[test]
    fn determinism_across_builds() {
        let a = SortedOffsets::build(33, Metric::Euclidean);
        let b = SortedOffsets::build(33, Metric::Euclidean);
        assert_eq!(a.triangle, b.triangle);
        assert!(a.expanded().zip(b.expanded()).all(|(x, y)| x == y));
    }
}
