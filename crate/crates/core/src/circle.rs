//! Circle-growing matchers: the practical algorithms that grow a circle from
//! every center simultaneously by translating the sorted offset list.
//!
//! Both variants emit matches in exact `(distance, center id, pixel index)`
//! order, so a completed run reproduces the greedy reference output
//! bit-for-bit. For the integer variant this requires care with ties: a run
//! of offsets at the same distance is processed as one block, centers in the
//! outer loop and offsets sorted by row-major delta in the inner loop, which
//! enumerates the block's pairs in ascending key order. (Processing offset by
//! offset would interleave centers' pixels in stream order instead and can
//! disagree with the tie-break when a quota runs out mid-block.)

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::instance::{CenterKind, Instance};
use crate::metric::DistKey;
use crate::offsets::{ExpandedIter, Offset, SortedOffsets};
use crate::state::{MatchState, StopRule};

fn check_offsets(instance: &Instance, offsets: &SortedOffsets) {
    assert_eq!(offsets.n(), instance.n(), "offset list built for a different grid side");
    assert_eq!(offsets.metric(), instance.metric(), "offset list built for a different metric");
}

/// Grows circles from integer centers by translating the offset stream.
///
/// Stops when the matching completes or `stop` fires (checked once per
/// center sweep); the returned state is a valid greedy prefix either way.
pub fn match_integer_centers(
    instance: &Instance,
    offsets: &SortedOffsets,
    stop: StopRule,
) -> Result<MatchState> {
    if instance.kind() != CenterKind::Int {
        return Err(Error::KindMismatch { expected: "integer" });
    }
    check_offsets(instance, offsets);

    let grid = instance.grid();
    let n = grid.n() as i64;
    let mut state = MatchState::new(instance);
    let mut block: Vec<(i32, i32)> = Vec::new();
    let mut expanded_seen = 0usize;
    #[cfg(debug_assertions)]
    let mut last_matched: Option<DistKey> = None;

    'classes: for class in offsets.distance_classes() {
        if state.is_complete() {
            break;
        }
        block.clear();
        offsets.expand_class_into(class.triangle_range, &mut block);
        // ascending row-major delta == ascending site index for any fixed center
        block.sort_unstable_by_key(|&(dx, dy)| dy as i64 * n + dx as i64);

        let mut cursor = state.first_available_center();
        while let Some(c) = cursor {
            if stop.should_stop(&state) {
                state.set_offset_cursor(expanded_seen);
                return Ok(state);
            }
            let (cx, cy) = instance.center_int(c);
            for &(dx, dy) in &block {
                let (sx, sy) = (cx + dx as i64, cy + dy as i64);
                if !grid.contains(sx, sy) {
                    continue;
                }
                state.count_pairs(1);
                let pixel = grid.index(sx as u32, sy as u32);
                if state.is_site_available(pixel) {
                    #[cfg(debug_assertions)]
                    {
                        let key = instance.dist_key(c, pixel);
                        debug_assert!(last_matched.map_or(true, |prev| prev < key));
                        last_matched = Some(key);
                    }
                    state.match_pair(c, pixel);
                    if !state.is_center_available(c) {
                        break;
                    }
                }
            }
            if state.is_complete() {
                expanded_seen += block.len();
                state.set_offset_cursor(expanded_seen);
                break 'classes;
            }
            cursor = state.next_available_center(c);
        }
        expanded_seen += block.len();
        state.set_offset_cursor(expanded_seen);
    }
    Ok(state)
}

/// Buffered lookahead over the expanded offset stream. The real-center
/// matcher peeks past the current chunk for the annulus extension without
/// consuming those offsets.
struct Lookahead<'a> {
    iter: ExpandedIter<'a>,
    buf: VecDeque<Offset>,
}

impl<'a> Lookahead<'a> {
    fn new(iter: ExpandedIter<'a>) -> Self {
        Lookahead { iter, buf: VecDeque::new() }
    }

    fn peek(&mut self, idx: usize) -> Option<Offset> {
        while self.buf.len() <= idx {
            self.buf.push_back(self.iter.next()?);
        }
        Some(self.buf[idx])
    }

    fn advance(&mut self, count: usize) {
        debug_assert!(count <= self.buf.len());
        self.buf.drain(..count);
    }
}

/// Grows circles from real centers.
///
/// Each center is anchored to its nearest lattice point; offsets are
/// processed in chunks of n, extended by the annulus of later offsets whose
/// pairs could still undercut the chunk's maximum pair distance (origin
/// distance within 2 delta of the chunk end, pair key at most the chunk
/// maximum). The collected pairs are sorted by full key and matched in
/// order. Works for integer centers too (delta = 0), though the integer
/// variant is faster there.
pub fn match_real_centers(
    instance: &Instance,
    offsets: &SortedOffsets,
    stop: StopRule,
) -> MatchState {
    check_offsets(instance, offsets);

    let grid = instance.grid();
    let metric = instance.metric();
    let chunk_size = grid.n() as usize;
    let mut state = MatchState::new(instance);

    let anchors: Vec<(i64, i64)> = (0..instance.k() as u32).map(|c| instance.center_anchor(c)).collect();
    let delta = (0..instance.k())
        .map(|c| {
            let [cx, cy] = instance.center(c as u32);
            let (ax, ay) = anchors[c];
            metric.dist(cx - ax as f64, cy - ay as f64)
        })
        .fold(0.0f64, f64::max);

    let mut lookahead = Lookahead::new(offsets.expanded());
    let mut pairs: Vec<(f64, u32, u32)> = Vec::new();
    let mut consumed = 0usize;
    #[cfg(debug_assertions)]
    let mut last_matched: Option<DistKey> = None;

    while !state.is_complete() {
        if stop.should_stop(&state) {
            break;
        }

        // collect candidate pairs generated by the next chunk
        pairs.clear();
        let mut chunk_len = 0usize;
        let mut candidates = 0u64;
        while chunk_len < chunk_size {
            let Some(offset) = lookahead.peek(chunk_len) else { break };
            chunk_len += 1;
            generate_pairs(instance, &state, &anchors, offset, &mut pairs, None, &mut candidates);
        }
        assert!(chunk_len > 0, "offset stream exhausted with unmatched pixels");
        let max_key = pairs.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);

        // pairs from offsets just past the chunk can undercut max_key, but
        // only within the 2-delta annulus
        if !pairs.is_empty() {
            let chunk_end = lookahead.peek(chunk_len - 1).expect("chunk is non-empty");
            let origin_limit = metric.key_to_dist(chunk_end.key as f64) + 2.0 * delta;
            let mut ahead = chunk_len;
            while let Some(offset) = lookahead.peek(ahead) {
                if metric.key_to_dist(offset.key as f64) > origin_limit {
                    break;
                }
                generate_pairs(instance, &state, &anchors, offset, &mut pairs, Some(max_key), &mut candidates);
                ahead += 1;
            }
        }
        state.count_pairs(candidates);

        pairs.sort_unstable_by(|a, b| {
            a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)).then_with(|| a.2.cmp(&b.2))
        });
        for &(_key, c, s) in &pairs {
            if state.is_center_available(c) && state.is_site_available(s) {
                #[cfg(debug_assertions)]
                {
                    let key = DistKey::new(_key, c, s);
                    debug_assert!(last_matched.map_or(true, |prev| prev < key));
                    last_matched = Some(key);
                }
                state.match_pair(c, s);
            }
        }

        // chunk invariant: a processed chunk generates no further available pairs
        #[cfg(debug_assertions)]
        for i in 0..chunk_len {
            let offset = lookahead.peek(i).unwrap();
            let mut cursor = state.first_available_center();
            while let Some(c) = cursor {
                let (ax, ay) = anchors[c as usize];
                let (sx, sy) = (ax + offset.dx as i64, ay + offset.dy as i64);
                if grid.contains(sx, sy) {
                    let pixel = grid.index(sx as u32, sy as u32);
                    debug_assert!(
                        !state.is_site_available(pixel),
                        "chunk offset ({}, {}) still generates available pair",
                        offset.dx,
                        offset.dy
                    );
                }
                cursor = state.next_available_center(c);
            }
        }

        lookahead.advance(chunk_len);
        consumed += chunk_len;
        state.set_offset_cursor(consumed);
    }
    state
}

/// Adds the available pairs generated by one offset. With `limit` set, only
/// pairs with key <= limit qualify (the annulus filter). `candidates` counts
/// every in-grid pair examined, available or not.
#[inline]
fn generate_pairs(
    instance: &Instance,
    state: &MatchState,
    anchors: &[(i64, i64)],
    offset: Offset,
    pairs: &mut Vec<(f64, u32, u32)>,
    limit: Option<f64>,
    candidates: &mut u64,
) {
    let grid = instance.grid();
    let mut cursor = state.first_available_center();
    while let Some(c) = cursor {
        let (ax, ay) = anchors[c as usize];
        let (sx, sy) = (ax + offset.dx as i64, ay + offset.dy as i64);
        if grid.contains(sx, sy) {
            *candidates += 1;
            let pixel = grid.index(sx as u32, sy as u32);
            if state.is_site_available(pixel) {
                let key = instance.key(c, pixel);
                if limit.map_or(true, |d| key <= d) {
                    pairs.push((key, c, pixel));
                }
            }
        }
        cursor = state.next_available_center(c);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::{verify_quotas, verify_stability};
    use crate::instance::{CenterKind, Instance};
    use crate::metric::Metric;
    use crate::oracle::greedy_oracle;
    use crate::state::RatioKind;

    fn offsets_for(inst: &Instance) -> SortedOffsets {
        SortedOffsets::build(inst.n(), inst.metric())
    }

    #[test]
    fn single_pixel_instance() {
        let inst = Instance::with_int_centers(1, Metric::Euclidean, &[(0, 0)]).unwrap();
        let offsets = offsets_for(&inst);
        let state = match_integer_centers(&inst, &offsets, StopRule::never()).unwrap();
        assert!(state.is_complete());
        assert!(state.pairs_generated() >= 1);
        let a = state.into_assignment(&inst).unwrap();
        assert_eq!(a.map(), &[0]);
    }

    #[test]
    fn two_by_two_matches_oracle() {
        let inst = Instance::with_int_centers(2, Metric::Euclidean, &[(0, 0), (1, 1)]).unwrap();
        let offsets = offsets_for(&inst);
        let a = match_integer_centers(&inst, &offsets, StopRule::never())
            .unwrap()
            .into_assignment(&inst)
            .unwrap();
        assert_eq!(a, greedy_oracle(&inst));
    }

    #[test]
    fn integer_variant_rejects_real_centers() {
        let inst = Instance::with_real_centers(2, Metric::Euclidean, &[(0.5, 0.5)]).unwrap();
        let offsets = offsets_for(&inst);
        assert!(matches!(
            match_integer_centers(&inst, &offsets, StopRule::never()),
            Err(Error::KindMismatch { .. })
        ));
    }

    #[test]
    fn integer_matcher_equals_oracle_on_random_instances() {
        for seed in 0..60u64 {
            let n = 2 + (seed % 7) as u32;
            let k = 1 + (seed as usize * 7) % 4;
            let metric = match seed % 3 {
                0 => Metric::Euclidean,
                1 => Metric::Manhattan,
                _ => Metric::Chebyshev,
            };
            let inst = Instance::random(n, k, metric, CenterKind::Int, seed).unwrap();
            let offsets = offsets_for(&inst);
            let a = match_integer_centers(&inst, &offsets, StopRule::never())
                .unwrap()
                .into_assignment(&inst)
                .unwrap();
            assert_eq!(a, greedy_oracle(&inst), "seed {seed} n {n} k {k} {metric}");
            assert!(state_bound(&inst, &offsets));
        }
    }

    fn state_bound(inst: &Instance, offsets: &SortedOffsets) -> bool {
        let state = match_integer_centers(inst, offsets, StopRule::never()).unwrap();
        state.pairs_generated() <= offsets.expanded_len() as u64 * inst.k() as u64
    }

    #[test]
    fn real_matcher_equals_oracle_on_random_instances() {
        for seed in 0..60u64 {
            let n = 2 + (seed % 7) as u32;
            let k = 1 + (seed as usize * 5) % 4;
            let metric = match seed % 3 {
                0 => Metric::Euclidean,
                1 => Metric::Manhattan,
                _ => Metric::Chebyshev,
            };
            let inst = Instance::random(n, k, metric, CenterKind::Real, seed).unwrap();
            let offsets = offsets_for(&inst);
            let a = match_real_centers(&inst, &offsets, StopRule::never())
                .into_assignment(&inst)
                .unwrap();
            assert_eq!(a, greedy_oracle(&inst), "seed {seed} n {n} k {k} {metric}");
        }
    }

    #[test]
    fn real_variant_with_integral_coordinates_matches_integer_variant() {
        for seed in 0..20u64 {
            let int_inst = Instance::random(8, 3, Metric::Euclidean, CenterKind::Int, seed).unwrap();
            let real_centers: Vec<(f64, f64)> =
                int_inst.centers().iter().map(|&[x, y]| (x, y)).collect();
            let real_inst =
                Instance::with_real_centers(8, Metric::Euclidean, &real_centers).unwrap();
            let offsets = offsets_for(&int_inst);
            let a = match_integer_centers(&int_inst, &offsets, StopRule::never())
                .unwrap()
                .into_assignment(&int_inst)
                .unwrap();
            let b = match_real_centers(&real_inst, &offsets, StopRule::never())
                .into_assignment(&real_inst)
                .unwrap();
            assert_eq!(a.map(), b.map(), "seed {seed}");
        }
    }

    #[test]
    fn mid_size_run_is_stable_and_quota_exact() {
        let inst = Instance::random(48, 11, Metric::Euclidean, CenterKind::Int, 5).unwrap();
        let offsets = offsets_for(&inst);
        let a = match_integer_centers(&inst, &offsets, StopRule::never())
            .unwrap()
            .into_assignment(&inst)
            .unwrap();
        assert!(verify_stability(&a, &inst).unwrap().is_stable());
        assert!(verify_quotas(&a, &inst).unwrap());
    }

    #[test]
    fn infinite_cutoff_generates_nothing() {
        let inst = Instance::random(8, 3, Metric::Euclidean, CenterKind::Int, 1).unwrap();
        let offsets = offsets_for(&inst);
        let stop = StopRule::at_cutoff(f64::INFINITY);
        let state = match_integer_centers(&inst, &offsets, stop).unwrap();
        assert_eq!(state.pairs_generated(), 0);
        assert_eq!(state.m(), 64);
        let state = match_real_centers(
            &Instance::random(8, 3, Metric::Euclidean, CenterKind::Real, 1).unwrap(),
            &offsets,
            stop,
        );
        assert_eq!(state.pairs_generated(), 0);
    }

    #[test]
    fn partial_state_invariants_hold_at_cutoff() {
        for kind in [CenterKind::Int, CenterKind::Real] {
            let inst = Instance::random(32, 7, Metric::Euclidean, kind, 3).unwrap();
            let offsets = offsets_for(&inst);
            let stop = StopRule { cutoff: 0.5, ratio: RatioKind::AvailablePairs };
            let state = match kind {
                CenterKind::Int => match_integer_centers(&inst, &offsets, stop).unwrap(),
                CenterKind::Real => match_real_centers(&inst, &offsets, stop),
            };
            let matched = state.assignment().iter().filter(|&&c| c != crate::state::UNASSIGNED).count();
            assert_eq!(matched + state.m(), inst.grid().pixel_count());
            let quota_sum: u64 = (0..inst.k() as u32).map(|c| state.remaining_quota(c) as u64).sum();
            assert_eq!(quota_sum, state.m() as u64);
        }
    }
}
