//! Stack-based mutual-nearest-neighbor matcher.
//!
//! Alternating pixel/center points are pushed onto a chain where each entry
//! is the nearest opposite-color point of the one below it, so gap distances
//! strictly decrease upward. When the top's nearest neighbor is the entry
//! below it, the two are mutual nearest neighbors among the available
//! points; matching such a pair early never changes the final greedy
//! matching, so the output still equals the reference oracle while spending
//! O(1) nearest-neighbor queries per push and pop.
//!
//! Centers are queried through the same [`NnBackend`] trait the pair heap
//! uses; pixels live in a bucket grid searched ring by ring, exact under all
//! three metrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assignment::Assignment;
use crate::distsort::{LinearScan, NnBackend};
use crate::instance::Instance;
use crate::metric::{DistKey, Metric};
use crate::state::MatchState;

/// Exact dynamic nearest-available-pixel structure: a uniform bucket grid
/// over the pixels with ring-by-ring search around the query point.
pub struct PixelGrid {
    n: u32,
    metric: Metric,
    cell: u32,
    side: u32,
    buckets: Vec<Vec<u32>>,
    pos: Vec<u32>,
    remaining: usize,
    queries: u64,
}

impl PixelGrid {
    /// Builds the grid over the given available pixels. `cell` is the bucket
    /// side length in pixels; pick roughly the expected cluster radius.
    pub fn new(n: u32, metric: Metric, pixels: &[u32], cell: u32) -> PixelGrid {
        let cell = cell.clamp(1, n);
        let side = n.div_ceil(cell);
        let mut grid = PixelGrid {
            n,
            metric,
            cell,
            side,
            buckets: vec![Vec::new(); (side as usize) * (side as usize)],
            pos: vec![u32::MAX; (n as usize) * (n as usize)],
            remaining: pixels.len(),
            queries: 0,
        };
        for &p in pixels {
            let b = grid.bucket_of(p);
            grid.pos[p as usize] = grid.buckets[b].len() as u32;
            grid.buckets[b].push(p);
        }
        grid
    }

    #[inline]
    fn bucket_of(&self, pixel: u32) -> usize {
        let (x, y) = (pixel % self.n, pixel / self.n);
        ((y / self.cell) * self.side + x / self.cell) as usize
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.remaining
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.remaining == 0
    }

    #[inline]
    pub fn queries(&self) -> u64 {
        self.queries
    }

    pub fn remove(&mut self, pixel: u32) {
        let at = self.pos[pixel as usize];
        assert!(at != u32::MAX, "pixel {pixel} not in the grid");
        self.pos[pixel as usize] = u32::MAX;
        let b = self.bucket_of(pixel);
        let bucket = &mut self.buckets[b];
        bucket.swap_remove(at as usize);
        if let Some(&moved) = bucket.get(at as usize) {
            self.pos[moved as usize] = at;
        }
        self.remaining -= 1;
    }

    /// The available pixel minimizing `(metric key, pixel index)` from an
    /// arbitrary in-grid query point.
    pub fn nearest(&mut self, qx: f64, qy: f64) -> Option<u32> {
        self.queries += 1;
        if self.remaining == 0 {
            return None;
        }
        let cell = self.cell as i64;
        let qcx = ((qx as i64) / cell).clamp(0, self.side as i64 - 1);
        let qcy = ((qy as i64) / cell).clamp(0, self.side as i64 - 1);
        let max_ring = {
            let horiz = qcx.max(self.side as i64 - 1 - qcx);
            let vert = qcy.max(self.side as i64 - 1 - qcy);
            horiz.max(vert)
        };

        let mut best: Option<(f64, u32)> = None;
        for ring in 0..=max_ring {
            if let Some((best_key, _)) = best {
                // every pixel in this ring or beyond must first escape the
                // box of cells within Chebyshev ring-1; the straight-line
                // escape distance lower-bounds all three metrics
                let bx0 = (qcx - (ring - 1)) * cell;
                let bx1 = (qcx + ring) * cell - 1;
                let by0 = (qcy - (ring - 1)) * cell;
                let by1 = (qcy + ring) * cell - 1;
                let escape = (qx - (bx0 - 1) as f64)
                    .min((bx1 + 1) as f64 - qx)
                    .min(qy - (by0 - 1) as f64)
                    .min((by1 + 1) as f64 - qy);
                if self.metric.key(escape, 0.0) > best_key {
                    break;
                }
            }
            self.scan_ring(qcx, qcy, ring, qx, qy, &mut best);
        }
        best.map(|(_, p)| p)
    }

    fn scan_ring(&self, qcx: i64, qcy: i64, ring: i64, qx: f64, qy: f64, best: &mut Option<(f64, u32)>) {
        if ring == 0 {
            self.scan_cell(qcx, qcy, qx, qy, best);
            return;
        }
        for cx in (qcx - ring)..=(qcx + ring) {
            self.scan_cell(cx, qcy - ring, qx, qy, best);
            self.scan_cell(cx, qcy + ring, qx, qy, best);
        }
        for cy in (qcy - ring + 1)..(qcy + ring) {
            self.scan_cell(qcx - ring, cy, qx, qy, best);
            self.scan_cell(qcx + ring, cy, qx, qy, best);
        }
    }

    #[inline]
    fn scan_cell(&self, cx: i64, cy: i64, qx: f64, qy: f64, best: &mut Option<(f64, u32)>) {
        if cx < 0 || cy < 0 || cx >= self.side as i64 || cy >= self.side as i64 {
            return;
        }
        let bucket = &self.buckets[(cy * self.side as i64 + cx) as usize];
        if bucket.is_empty() {
            return;
        }
        if let Some((best_key, _)) = *best {
            // clamp the query into the cell's pixel box for a lower bound;
            // skip only on a strict excess so equal keys can still improve
            // the pixel-index tie-break
            let cell = self.cell as i64;
            let x0 = (cx * cell) as f64;
            let x1 = ((cx + 1) * cell - 1).min(self.n as i64 - 1) as f64;
            let y0 = (cy * cell) as f64;
            let y1 = ((cy + 1) * cell - 1).min(self.n as i64 - 1) as f64;
            let lb = self.metric.key(qx - qx.clamp(x0, x1), qy - qy.clamp(y0, y1));
            if lb > best_key {
                return;
            }
        }
        for &p in bucket {
            let (px, py) = (p % self.n, p / self.n);
            let key = self.metric.key(qx - px as f64, qy - py as f64);
            if best.map_or(true, |(bk, bp)| key < bk || (key == bk && p < bp)) {
                *best = Some((key, p));
            }
        }
    }
}

/// How the chain restarts when the stack is empty.
#[derive(Clone, Copy, Debug)]
pub enum StartRule {
    /// Push the lowest-id available center (the default).
    LowestCenter,
    /// Push a seeded-random available center. The final assignment does not
    /// depend on the choice; only the matching order does.
    SeededCenter(u64),
}

#[derive(Clone, Copy, Debug)]
pub struct NnChainOptions {
    pub start: StartRule,
}

impl Default for NnChainOptions {
    fn default() -> Self {
        NnChainOptions { start: StartRule::LowestCenter }
    }
}

/// Counters reported by a chain run.
#[derive(Clone, Copy, Debug, Default)]
pub struct ChainStats {
    /// Nearest-neighbor queries over both structures.
    pub nn_queries: u64,
    /// Removals over both structures.
    pub removals: u64,
    pub pushes: u64,
    pub matches: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Point {
    Pixel(u32),
    Center(u32),
}

pub fn nn_chain_match(
    instance: &Instance,
    state: &mut MatchState,
    options: NnChainOptions,
) -> ChainStats {
    nn_chain_match_observed(instance, state, options, |_, _, _| {})
}

/// Chain matcher with a hook called before each match is applied, used by
/// tests to check mutual-nearest-neighbor facts against brute force.
pub fn nn_chain_match_observed(
    instance: &Instance,
    state: &mut MatchState,
    options: NnChainOptions,
    mut on_match: impl FnMut(&MatchState, u32, u32),
) -> ChainStats {
    let grid = instance.grid();
    let sites = state.available_site_ids();
    // bucket side near the expected cluster radius keeps ring searches local
    let cell = ((grid.pixel_count() as f64 / instance.k() as f64).sqrt().ceil() as u32).max(1);
    let mut pixels = PixelGrid::new(grid.n(), instance.metric(), &sites, cell);
    let mut centers = LinearScan::new(instance, state.available_center_ids());

    let mut stats = ChainStats::default();
    let mut stack: Vec<Point> = Vec::new();
    let mut on_stack_pixel = vec![false; grid.pixel_count()];
    let mut on_stack_center = vec![false; instance.k()];
    let mut rng = match options.start {
        StartRule::LowestCenter => None,
        StartRule::SeededCenter(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
    };

    while !state.is_complete() {
        if stack.is_empty() {
            let c = match rng.as_mut() {
                None => state.first_available_center().expect("centers remain while sites do"),
                Some(rng) => {
                    let ids = state.available_center_ids();
                    ids[rng.gen_range(0..ids.len())]
                }
            };
            stack.push(Point::Center(c));
            on_stack_center[c as usize] = true;
            stats.pushes += 1;
        }

        // query the top's nearest opposite-color point fresh each round;
        // entries below the top still point at the entry above them, so only
        // the top can have gone out of date
        let top = *stack.last().unwrap();
        stats.nn_queries += 1;
        let (q, gap) = match top {
            Point::Center(c) => {
                let [cx, cy] = instance.center(c);
                let p = pixels.nearest(cx, cy).expect("available pixel exists");
                (Point::Pixel(p), instance.dist_key(c, p))
            }
            Point::Pixel(p) => {
                let c = centers.nearest(p).expect("available center exists");
                (Point::Center(c), instance.dist_key(c, p))
            }
        };

        if stack.len() >= 2 && stack[stack.len() - 2] == q {
            // mutual nearest neighbors: match them
            let (center, pixel) = match (top, q) {
                (Point::Center(c), Point::Pixel(p)) | (Point::Pixel(p), Point::Center(c)) => (c, p),
                _ => unreachable!("stack colors alternate"),
            };
            stack.truncate(stack.len() - 2);
            on_stack_center[center as usize] = false;
            on_stack_pixel[pixel as usize] = false;
            on_match(state, center, pixel);
            state.match_pair(center, pixel);
            stats.matches += 1;
            pixels.remove(pixel);
            stats.removals += 1;
            if !state.is_center_available(center) {
                centers.delete(center);
                stats.removals += 1;
            }
        } else {
            let already = match q {
                Point::Pixel(p) => on_stack_pixel[p as usize],
                Point::Center(c) => on_stack_center[c as usize],
            };
            assert!(
                !already,
                "nearest point {q:?} is on the stack but not second-from-top"
            );
            if stack.len() >= 2 {
                let prev_gap = gap_key(instance, stack[stack.len() - 2], top);
                debug_assert!(
                    gap < prev_gap,
                    "chain gaps must strictly decrease: {gap:?} !< {prev_gap:?}"
                );
            }
            match q {
                Point::Pixel(p) => on_stack_pixel[p as usize] = true,
                Point::Center(c) => on_stack_center[c as usize] = true,
            }
            stack.push(q);
            stats.pushes += 1;
        }
    }
    debug_assert_eq!(stats.nn_queries, pixels.queries() + centers.queries());
    stats
}

fn gap_key(instance: &Instance, a: Point, b: Point) -> DistKey {
    match (a, b) {
        (Point::Center(c), Point::Pixel(p)) | (Point::Pixel(p), Point::Center(c)) => {
            instance.dist_key(c, p)
        }
        _ => unreachable!("adjacent stack entries alternate colors"),
    }
}

/// Full chain run from an empty matching.
pub fn nn_chain_assignment(instance: &Instance) -> Assignment {
    let mut state = MatchState::new(instance);
    nn_chain_match(instance, &mut state, NnChainOptions::default());
    state.into_assignment(instance).expect("chain completes the matching")
}
