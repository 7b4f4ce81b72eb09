//! Distance-sorting endgame matchers: pair sort and pair heap.
//!
//! Both continue an arbitrary partial matching (typically the state left by
//! circle growing at its cutoff) and finish it in exact greedy order. Pair
//! sort materializes every available pair; the pair heap keeps one candidate
//! pair per available site, keyed by its closest available center, and
//! repairs entries either eagerly (when a center fills) or lazily (when a
//! stale pair surfaces).

use crate::error::{Error, Result};
use crate::instance::{CenterKind, Instance};
use crate::metric::{DistKey, Metric};
use crate::state::MatchState;

/// How the pair heap reacts when a center becomes unavailable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdatePolicy {
    Eager,
    Lazy,
}

/// Nearest-neighbor backend used to find the closest available center.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackendKind {
    Linear,
    Presort,
}

/// Dynamic nearest-neighbor structure over the available centers.
///
/// `nearest` returns the available center minimizing `(distance, id)` for
/// the query site; deleted centers are never returned. A slot for a
/// polylog-time structure exists behind this trait, but the provided
/// backends are a linear scan and the presorted per-site arrays.
pub trait NnBackend {
    fn nearest(&mut self, site: u32) -> Option<u32>;
    fn delete(&mut self, center: u32);
    fn queries(&self) -> u64;
}

/// O(k) queries, O(1) deletions, no setup cost.
pub struct LinearScan<'a> {
    instance: &'a Instance,
    ids: Vec<u32>,
    pos: Vec<u32>,
    queries: u64,
}

impl<'a> LinearScan<'a> {
    pub fn new(instance: &'a Instance, available: Vec<u32>) -> Self {
        let mut pos = vec![u32::MAX; instance.k()];
        for (i, &c) in available.iter().enumerate() {
            pos[c as usize] = i as u32;
        }
        LinearScan { instance, ids: available, pos, queries: 0 }
    }
}

impl NnBackend for LinearScan<'_> {
    fn nearest(&mut self, site: u32) -> Option<u32> {
        self.queries += 1;
        let mut best: Option<(f64, u32)> = None;
        for &c in &self.ids {
            let key = self.instance.key(c, site);
            if best.map_or(true, |(bk, bc)| key < bk || (key == bk && c < bc)) {
                best = Some((key, c));
            }
        }
        best.map(|(_, c)| c)
    }

    fn delete(&mut self, center: u32) {
        let at = self.pos[center as usize];
        if at == u32::MAX {
            return;
        }
        self.pos[center as usize] = u32::MAX;
        self.ids.swap_remove(at as usize);
        if let Some(&moved) = self.ids.get(at as usize) {
            self.pos[moved as usize] = at;
        }
    }

    fn queries(&self) -> u64 {
        self.queries
    }
}

/// Per-site arrays of centers sorted by distance, scanned with a persistent
/// cursor past deletion marks. Repeated queries for one site traverse its
/// array at most once overall.
pub struct Presort {
    slot_of_site: Vec<u32>,
    arrays: Vec<Vec<u32>>,
    cursors: Vec<u32>,
    deleted: Vec<bool>,
    queries: u64,
    advances: u64,
}

impl Presort {
    /// Builds arrays for exactly the available sites over the available
    /// centers, so memory stays at O(m k) after a circle-growing phase.
    pub fn new(instance: &Instance, sites: &[u32], centers: &[u32]) -> Self {
        let mut slot_of_site = vec![u32::MAX; instance.grid().pixel_count()];
        let mut arrays = Vec::with_capacity(sites.len());
        for (slot, &s) in sites.iter().enumerate() {
            slot_of_site[s as usize] = slot as u32;
            let mut arr = centers.to_vec();
            arr.sort_unstable_by(|&a, &b| {
                instance
                    .key(a, s)
                    .total_cmp(&instance.key(b, s))
                    .then_with(|| a.cmp(&b))
            });
            arrays.push(arr);
        }
        Presort {
            slot_of_site,
            arrays,
            cursors: vec![0; sites.len()],
            deleted: vec![false; instance.k()],
            queries: 0,
            advances: 0,
        }
    }

    /// Total cursor advances over all sites; at most m * k by construction.
    pub fn advances(&self) -> u64 {
        self.advances
    }
}

impl NnBackend for Presort {
    fn nearest(&mut self, site: u32) -> Option<u32> {
        self.queries += 1;
        let slot = self.slot_of_site[site as usize] as usize;
        let arr = &self.arrays[slot];
        let mut cur = self.cursors[slot] as usize;
        while cur < arr.len() && self.deleted[arr[cur] as usize] {
            cur += 1;
            self.advances += 1;
        }
        self.cursors[slot] = cur as u32;
        arr.get(cur).copied()
    }

    fn delete(&mut self, center: u32) {
        self.deleted[center as usize] = true;
    }

    fn queries(&self) -> u64 {
        self.queries
    }
}

/// Counters reported by the pair-sort endgame.
#[derive(Clone, Copy, Debug, Default)]
pub struct PairSortStats {
    pub pairs_enumerated: u64,
}

/// Sorts every available pair by key and matches them in order.
///
/// Integer Euclidean instances are counting-sorted on the squared distance;
/// everything else uses a comparison sort on the full key. Refuses with
/// [`Error::PairBudgetExceeded`] when m * k pairs would blow `pair_budget`.
pub fn pair_sort(
    instance: &Instance,
    state: &mut MatchState,
    pair_budget: u64,
) -> Result<PairSortStats> {
    if state.is_complete() {
        return Ok(PairSortStats::default());
    }
    let sites = state.available_site_ids();
    let centers = state.available_center_ids();
    let needed = sites.len() as u64 * centers.len() as u64;
    if needed > pair_budget {
        return Err(Error::PairBudgetExceeded { needed, budget: pair_budget });
    }

    let counting = instance.kind() == CenterKind::Int && instance.metric() == Metric::Euclidean;
    if counting {
        match_counting_sorted(instance, state, &sites, &centers);
    } else {
        match_comparison_sorted(instance, state, &sites, &centers);
    }
    debug_assert!(state.is_complete());
    Ok(PairSortStats { pairs_enumerated: needed })
}

/// Stable counting sort on the integer squared distance. Pairs are emitted
/// center-major and site-minor, so equal-distance buckets already sit in
/// tie-break order.
fn match_counting_sorted(
    instance: &Instance,
    state: &mut MatchState,
    sites: &[u32],
    centers: &[u32],
) {
    let bound = instance.metric().int_key_bound(instance.n()) as usize;
    let mut counts = vec![0u32; bound + 1];
    for &c in centers {
        for &s in sites {
            counts[instance.int_key(c, s) as usize] += 1;
        }
    }
    let mut starts = counts;
    let mut acc = 0u32;
    for slot in starts.iter_mut() {
        let v = *slot;
        *slot = acc;
        acc += v;
    }
    let mut sorted = vec![(0u32, 0u32); sites.len() * centers.len()];
    for &c in centers {
        for &s in sites {
            let at = &mut starts[instance.int_key(c, s) as usize];
            sorted[*at as usize] = (c, s);
            *at += 1;
        }
    }
    run_pair_list(state, sorted.iter().copied());
}

fn match_comparison_sorted(
    instance: &Instance,
    state: &mut MatchState,
    sites: &[u32],
    centers: &[u32],
) {
    let mut pairs: Vec<(f64, u32, u32)> = Vec::with_capacity(sites.len() * centers.len());
    for &c in centers {
        for &s in sites {
            pairs.push((instance.key(c, s), c, s));
        }
    }
    pairs.sort_unstable_by(|a, b| {
        a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)).then_with(|| a.2.cmp(&b.2))
    });
    run_pair_list(state, pairs.iter().map(|&(_, c, s)| (c, s)));
}

fn run_pair_list(state: &mut MatchState, pairs: impl Iterator<Item = (u32, u32)>) {
    for (c, s) in pairs {
        if state.is_complete() {
            break;
        }
        if state.is_center_available(c) && state.is_site_available(s) {
            state.match_pair(c, s);
        }
    }
}

/// Counters reported by the pair-heap endgame.
#[derive(Clone, Copy, Debug, Default)]
pub struct PairHeapStats {
    /// Count of heap entries whose named center became unavailable while
    /// named: tallied per entry at rebuild time (eager) or per stale pop
    /// (lazy). A lazy re-query jumps directly to the current closest center,
    /// skipping intermediate fills, so lazy alpha never exceeds eager alpha
    /// for the same instance.
    pub alpha: u64,
    pub nn_queries: u64,
    /// Total presort cursor advances, when that backend was used.
    pub presort_advances: Option<u64>,
    /// Available sites when the endgame took over.
    pub m_at_handoff: u64,
}

/// Finishes a partial matching with the pair-heap algorithm.
pub fn pair_heap(
    instance: &Instance,
    state: &mut MatchState,
    policy: UpdatePolicy,
    backend: BackendKind,
) -> PairHeapStats {
    match backend {
        BackendKind::Linear => {
            let nn = LinearScan::new(instance, state.available_center_ids());
            run_pair_heap(instance, state, policy, nn, |_| None)
        }
        BackendKind::Presort => {
            let sites = state.available_site_ids();
            let centers = state.available_center_ids();
            let nn = Presort::new(instance, &sites, &centers);
            run_pair_heap(instance, state, policy, nn, |nn: &Presort| Some(nn.advances()))
        }
    }
}

fn run_pair_heap<B: NnBackend>(
    instance: &Instance,
    state: &mut MatchState,
    policy: UpdatePolicy,
    mut nn: B,
    finish: impl Fn(&B) -> Option<u64>,
) -> PairHeapStats {
    let sites = state.available_site_ids();
    let mut stats = PairHeapStats { m_at_handoff: sites.len() as u64, ..Default::default() };
    let mut heap = PairHeap::with_capacity(sites.len());
    for s in sites {
        let c = nn.nearest(s).expect("an available center exists while sites remain");
        heap.push_unordered(Entry { key: instance.key(c, s), center: c, site: s });
    }
    heap.heapify();

    #[cfg(debug_assertions)]
    let mut last_matched: Option<DistKey> = None;
    while let Some(entry) = heap.pop() {
        if state.is_center_available(entry.center) {
            #[cfg(debug_assertions)]
            {
                let key = DistKey::new(entry.key, entry.center, entry.site);
                debug_assert!(last_matched.map_or(true, |prev| prev < key));
                last_matched = Some(key);
            }
            state.match_pair(entry.center, entry.site);
            if !state.is_center_available(entry.center) {
                nn.delete(entry.center);
                if policy == UpdatePolicy::Eager {
                    // re-point every entry naming the filled center, then
                    // restore heap order in place
                    let mut repointed = 0u64;
                    for e in heap.entries_mut() {
                        if e.center == entry.center {
                            repointed += 1;
                            let c = nn.nearest(e.site).expect("matching is incomplete");
                            e.center = c;
                            e.key = instance.key(c, e.site);
                        }
                    }
                    stats.alpha += repointed;
                    if repointed > 0 {
                        heap.heapify();
                    }
                }
            }
        } else {
            assert!(
                policy == UpdatePolicy::Lazy,
                "eager updates must never pop a stale entry"
            );
            stats.alpha += 1;
            let c = nn.nearest(entry.site).expect("matching is incomplete");
            heap.push(Entry { key: instance.key(c, entry.site), center: c, site: entry.site });
        }
    }
    assert!(state.is_complete(), "pair heap drained before completing the matching");
    stats.nn_queries = nn.queries();
    stats.presort_advances = finish(&nn);
    stats
}

#[derive(Clone, Copy, Debug)]
struct Entry {
    key: f64,
    center: u32,
    site: u32,
}

impl Entry {
    #[inline]
    fn less(&self, other: &Entry) -> bool {
        DistKey::new(self.key, self.center, self.site)
            < DistKey::new(other.key, other.center, other.site)
    }
}

/// Binary min-heap over pair entries, with in-place bulk heapify for the
/// eager rebuild.
struct PairHeap {
    data: Vec<Entry>,
}

impl PairHeap {
    fn with_capacity(cap: usize) -> Self {
        PairHeap { data: Vec::with_capacity(cap) }
    }

    fn push_unordered(&mut self, e: Entry) {
        self.data.push(e);
    }

    fn entries_mut(&mut self) -> &mut [Entry] {
        &mut self.data
    }

    fn heapify(&mut self) {
        for i in (0..self.data.len() / 2).rev() {
            self.sift_down(i);
        }
    }

    fn push(&mut self, e: Entry) {
        self.data.push(e);
        let mut i = self.data.len() - 1;
        while i > 0 {
            let parent = (i - 1) / 2;
            if self.data[i].less(&self.data[parent]) {
                self.data.swap(i, parent);
                i = parent;
            } else {
                break;
            }
        }
    }

    fn pop(&mut self) -> Option<Entry> {
        if self.data.is_empty() {
            return None;
        }
        let top = self.data.swap_remove(0);
        if !self.data.is_empty() {
            self.sift_down(0);
        }
        Some(top)
    }

    fn sift_down(&mut self, mut i: usize) {
        let len = self.data.len();
        loop {
            let left = 2 * i + 1;
            if left >= len {
                break;
            }
            let right = left + 1;
            let mut smallest = left;
            if right < len && self.data[right].less(&self.data[left]) {
                smallest = right;
            }
            if self.data[smallest].less(&self.data[i]) {
                self.data.swap(i, smallest);
                i = smallest;
            } else {
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::CenterKind;
    use crate::oracle::greedy_oracle;
    use crate::state::StopRule;

    fn fresh_state(inst: &Instance) -> MatchState {
        MatchState::new(inst)
    }

    #[test]
    fn pair_sort_on_complete_state_is_a_no_op() {
        let inst = Instance::with_int_centers(1, Metric::Euclidean, &[(0, 0)]).unwrap();
        let mut state = fresh_state(&inst);
        state.match_pair(0, 0);
        let stats = pair_sort(&inst, &mut state, u64::MAX).unwrap();
        assert_eq!(stats.pairs_enumerated, 0);
    }

    #[test]
    fn pair_sort_budget_guard() {
        let inst = Instance::random(8, 3, Metric::Euclidean, CenterKind::Int, 0).unwrap();
        let mut state = fresh_state(&inst);
        match pair_sort(&inst, &mut state, 10) {
            Err(Error::PairBudgetExceeded { needed, budget }) => {
                assert_eq!(needed, 64 * 3);
                assert_eq!(budget, 10);
            }
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn pair_sort_equals_oracle_from_empty_state() {
        for seed in 0..40u64 {
            let n = 2 + (seed % 7) as u32;
            let k = 1 + (seed as usize) % 4;
            let kind = if seed % 2 == 0 { CenterKind::Int } else { CenterKind::Real };
            let metric = match seed % 3 {
                0 => Metric::Euclidean,
                1 => Metric::Manhattan,
                _ => Metric::Chebyshev,
            };
            let inst = Instance::random(n, k, metric, kind, seed).unwrap();
            let mut state = fresh_state(&inst);
            pair_sort(&inst, &mut state, u64::MAX).unwrap();
            let a = state.into_assignment(&inst).unwrap();
            assert_eq!(a, greedy_oracle(&inst), "seed {seed}");
        }
    }

    #[test]
    fn all_heap_variants_equal_oracle() {
        for seed in 0..30u64 {
            let n = 2 + (seed % 7) as u32;
            let k = 1 + (seed as usize) % 4;
            let kind = if seed % 2 == 0 { CenterKind::Int } else { CenterKind::Real };
            let inst = Instance::random(n, k, Metric::Euclidean, kind, seed).unwrap();
            let oracle = greedy_oracle(&inst);
            for policy in [UpdatePolicy::Eager, UpdatePolicy::Lazy] {
                for backend in [BackendKind::Linear, BackendKind::Presort] {
                    let mut state = fresh_state(&inst);
                    pair_heap(&inst, &mut state, policy, backend);
                    let a = state.into_assignment(&inst).unwrap();
                    assert_eq!(a, oracle, "seed {seed} {policy:?} {backend:?}");
                }
            }
        }
    }

    #[test]
    fn single_center_heap_matches_in_distance_order() {
        let inst = Instance::with_int_centers(4, Metric::Euclidean, &[(1, 2)]).unwrap();
        let mut state = fresh_state(&inst);
        let stats = pair_heap(&inst, &mut state, UpdatePolicy::Lazy, BackendKind::Linear);
        assert!(state.is_complete());
        assert_eq!(stats.alpha, 0, "the only center never fills before the last site");
        assert_eq!(state.into_assignment(&inst).unwrap().region_sizes(), &[16]);
    }

    #[test]
    fn lazy_alpha_is_bounded_by_eager_alpha() {
        // eager re-points an entry through every intermediate center; lazy
        // re-queries only on pop and jumps straight to the current closest
        for seed in 0..20u64 {
            let inst = Instance::random(12, 5, Metric::Euclidean, CenterKind::Real, seed).unwrap();
            let mut eager_state = fresh_state(&inst);
            let eager = pair_heap(&inst, &mut eager_state, UpdatePolicy::Eager, BackendKind::Linear);
            let mut lazy_state = fresh_state(&inst);
            let lazy = pair_heap(&inst, &mut lazy_state, UpdatePolicy::Lazy, BackendKind::Linear);
            assert!(lazy.alpha <= eager.alpha, "seed {seed}");
            assert_eq!(eager_state.assignment(), lazy_state.assignment());
        }
    }

    #[test]
    fn presort_traversal_is_amortized_linear() {
        let inst = Instance::random(16, 9, Metric::Euclidean, CenterKind::Real, 3).unwrap();
        let mut state = fresh_state(&inst);
        let stats = pair_heap(&inst, &mut state, UpdatePolicy::Lazy, BackendKind::Presort);
        let advances = stats.presort_advances.unwrap();
        assert!(
            advances <= 256 * 9,
            "presort advanced {advances} times, more than m*k"
        );
    }

    #[test]
    fn heap_continues_partial_circle_state() {
        use crate::circle::match_integer_centers;
        use crate::offsets::SortedOffsets;
        let inst = Instance::random(24, 6, Metric::Euclidean, CenterKind::Int, 9).unwrap();
        let offsets = SortedOffsets::build(inst.n(), inst.metric());
        let mut state = match_integer_centers(&inst, &offsets, StopRule::at_cutoff(0.5)).unwrap();
        assert!(!state.is_complete(), "cutoff 0.5 should stop early here");
        pair_heap(&inst, &mut state, UpdatePolicy::Lazy, BackendKind::Linear);
        let a = state.into_assignment(&inst).unwrap();
        let full = match_integer_centers(&inst, &offsets, StopRule::never())
            .unwrap()
            .into_assignment(&inst)
            .unwrap();
        assert_eq!(a, full);
    }
}
