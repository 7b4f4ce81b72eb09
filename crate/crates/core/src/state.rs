//! Partial-matching state shared by all matchers.

use crate::assignment::Assignment;
use crate::error::Result;
use crate::instance::Instance;

pub const UNASSIGNED: u32 = u32::MAX;

/// A matching in progress: the partial pixel-to-center map, remaining
/// quotas, and the counters the benchmark harness reports.
///
/// Available centers are kept in a doubly linked list threaded over the
/// center ids, so matchers can iterate them in ascending id (the tie-break
/// order) with O(1) removal when a quota empties.
#[derive(Clone, Debug)]
pub struct MatchState {
    assignment: Vec<u32>,
    remaining: Vec<u32>,
    available_sites: usize,
    available_centers: usize,
    pairs_generated: u64,
    offset_cursor: usize,
    next: Vec<u32>,
    prev: Vec<u32>,
}

impl MatchState {
    pub fn new(instance: &Instance) -> MatchState {
        let pixels = instance.grid().pixel_count();
        let k = instance.k();
        let sentinel = k as u32;
        let mut next = vec![0u32; k + 1];
        let mut prev = vec![0u32; k + 1];
        for c in 0..=k {
            next[c] = if c == k { 0 } else { c as u32 + 1 };
            prev[c] = if c == 0 { sentinel } else { c as u32 - 1 };
        }
        next[k] = 0;
        prev[0] = sentinel;
        MatchState {
            assignment: vec![UNASSIGNED; pixels],
            remaining: instance.quotas(),
            available_sites: pixels,
            available_centers: k,
            pairs_generated: 0,
            offset_cursor: 0,
            next,
            prev,
        }
    }

    /// Number of available (unmatched) sites.
    #[inline]
    pub fn m(&self) -> usize {
        self.available_sites
    }

    #[inline]
    pub fn available_centers(&self) -> usize {
        self.available_centers
    }

    #[inline]
    pub fn is_complete(&self) -> bool {
        self.available_sites == 0
    }

    #[inline]
    pub fn is_site_available(&self, pixel: u32) -> bool {
        self.assignment[pixel as usize] == UNASSIGNED
    }

    #[inline]
    pub fn is_center_available(&self, center: u32) -> bool {
        self.remaining[center as usize] > 0
    }

    #[inline]
    pub fn remaining_quota(&self, center: u32) -> u32 {
        self.remaining[center as usize]
    }

    #[inline]
    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    #[inline]
    pub fn pairs_generated(&self) -> u64 {
        self.pairs_generated
    }

    #[inline]
    pub fn count_pairs(&mut self, count: u64) {
        self.pairs_generated += count;
    }

    #[inline]
    pub fn offset_cursor(&self) -> usize {
        self.offset_cursor
    }

    #[inline]
    pub fn set_offset_cursor(&mut self, cursor: usize) {
        self.offset_cursor = cursor;
    }

    /// First available center id, or None when all quotas are exhausted.
    #[inline]
    pub fn first_available_center(&self) -> Option<u32> {
        let head = self.next[self.remaining.len()];
        (head as usize != self.remaining.len()).then_some(head)
    }

    /// Next available center after `center` in ascending id. `center` itself
    /// may have just become unavailable; its link is still valid.
    #[inline]
    pub fn next_available_center(&self, center: u32) -> Option<u32> {
        let n = self.next[center as usize];
        (n as usize != self.remaining.len()).then_some(n)
    }

    /// Available center ids in ascending order. Snapshot semantics are not
    /// needed by callers: they either do not mutate, or only fill the center
    /// they are currently visiting.
    pub fn available_center_ids(&self) -> Vec<u32> {
        let mut ids = Vec::with_capacity(self.available_centers);
        let mut c = self.first_available_center();
        while let Some(id) = c {
            ids.push(id);
            c = self.next_available_center(id);
        }
        ids
    }

    /// Available site indices in ascending (row-major) order.
    pub fn available_site_ids(&self) -> Vec<u32> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c == UNASSIGNED)
            .map(|(p, _)| p as u32)
            .collect()
    }

    /// Matches a pixel to a center, maintaining quotas and the availability
    /// list.
    #[inline]
    pub fn match_pair(&mut self, center: u32, pixel: u32) {
        debug_assert!(self.is_site_available(pixel), "pixel {pixel} already matched");
        debug_assert!(self.is_center_available(center), "center {center} has no quota");
        self.assignment[pixel as usize] = center;
        self.available_sites -= 1;
        let quota = &mut self.remaining[center as usize];
        *quota -= 1;
        if *quota == 0 {
            self.available_centers -= 1;
            let (p, n) = (self.prev[center as usize], self.next[center as usize]);
            self.next[p as usize] = n;
            self.prev[n as usize] = p;
        }
    }

    pub fn into_assignment(self, instance: &Instance) -> Result<Assignment> {
        if !self.is_complete() {
            return Err(crate::error::Error::IncompleteAssignment {
                unassigned: self.available_sites,
            });
        }
        Assignment::from_map(instance.n(), instance.k(), self.assignment)
    }
}

/// Which quantity the hybrid cutoff compares against the pairs already
/// generated. The default multiplies available sites by available centers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RatioKind {
    AvailablePairs,
    AvailableSites,
}

/// Stop rule for the circle-growing phase: fire when
/// `numerator / pairs_generated <= cutoff`. A cutoff of 0 never fires before
/// completion; an infinite cutoff fires immediately.
#[derive(Clone, Copy, Debug)]
pub struct StopRule {
    pub cutoff: f64,
    pub ratio: RatioKind,
}

impl StopRule {
    pub fn never() -> StopRule {
        StopRule { cutoff: 0.0, ratio: RatioKind::AvailablePairs }
    }

    pub fn at_cutoff(cutoff: f64) -> StopRule {
        StopRule { cutoff, ratio: RatioKind::AvailablePairs }
    }

    #[inline]
    pub fn should_stop(&self, state: &MatchState) -> bool {
        if state.is_complete() {
            return true;
        }
        let numerator = match self.ratio {
            RatioKind::AvailablePairs => state.m() as f64 * state.available_centers() as f64,
            RatioKind::AvailableSites => state.m() as f64,
        };
        // pairs_generated == 0 gives an infinite ratio, so only an infinite
        // cutoff can fire before the first candidate
        numerator / state.pairs_generated() as f64 <= self.cutoff
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Instance;
    use crate::metric::Metric;

    #[test]
    fn availability_list_tracks_quota() {
        let inst = Instance::with_int_centers(2, Metric::Euclidean, &[(0, 0), (1, 1), (0, 1)]).unwrap();
        let mut st = MatchState::new(&inst);
        // quotas: 4 pixels over 3 centers = [2, 1, 1]
        assert_eq!(st.available_center_ids(), vec![0, 1, 2]);
        st.match_pair(1, 0);
        assert_eq!(st.available_center_ids(), vec![0, 2]);
        assert_eq!(st.next_available_center(1), Some(2));
        st.match_pair(0, 1);
        assert_eq!(st.available_center_ids(), vec![0, 2]);
        st.match_pair(0, 2);
        assert_eq!(st.available_center_ids(), vec![2]);
        st.match_pair(2, 3);
        assert!(st.is_complete());
        assert_eq!(st.available_center_ids(), Vec::<u32>::new());
        let a = st.into_assignment(&inst).unwrap();
        assert_eq!(a.region_sizes(), &[2, 1, 1]);
    }

    #[test]
    fn stop_rule_extremes() {
        let inst = Instance::with_int_centers(4, Metric::Euclidean, &[(0, 0), (3, 3)]).unwrap();
        let mut st = MatchState::new(&inst);
        assert!(!StopRule::at_cutoff(0.0).should_stop(&st));
        assert!(StopRule::at_cutoff(f64::INFINITY).should_stop(&st));
        st.count_pairs(1000);
        // 16 sites * 2 centers / 1000 pairs = 0.032
        assert!(StopRule::at_cutoff(0.15).should_stop(&st));
        assert!(!StopRule::at_cutoff(0.001).should_stop(&st));
        let sites_rule = StopRule { cutoff: 0.015, ratio: RatioKind::AvailableSites };
        assert!(!sites_rule.should_stop(&st));
        st.count_pairs(1000);
        assert!(sites_rule.should_stop(&st));
    }

    #[test]
    fn incomplete_state_refuses_to_finalize() {
        let inst = Instance::with_int_centers(2, Metric::Euclidean, &[(0, 0)]).unwrap();
        let st = MatchState::new(&inst);
        assert!(st.into_assignment(&inst).is_err());
    }
}
