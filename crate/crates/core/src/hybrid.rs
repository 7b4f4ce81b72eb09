//! Hybrid pipeline: circle growing until the cutoff fires, then an endgame
//! matcher finishes the job.
//!
//! The cutoff compares the available work against the pairs the
//! circle-growing phase has already considered; once the ratio drops to the
//! cutoff the remaining pairs are handed to a distance-sorting matcher or
//! the chain matcher. Every configuration produces the same final
//! assignment; only the time profile changes.

use std::time::{Duration, Instant};

use crate::assignment::Assignment;
use crate::circle::{match_integer_centers, match_real_centers};
use crate::distsort::{pair_heap, pair_sort, BackendKind, UpdatePolicy};
use crate::error::Result;
use crate::instance::{CenterKind, Instance};
use crate::nn_chain::{nn_chain_match, NnChainOptions};
use crate::offsets::SortedOffsets;
use crate::state::{RatioKind, StopRule};

/// Default ceiling on the m * k pairs the pair-sort endgame may materialize
/// (about 1 GiB of pair records).
pub const DEFAULT_PAIR_BUDGET: u64 = 1 << 26;

/// What finishes the matching after the circle-growing phase stops.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Endgame {
    PairSort,
    PairHeap { policy: UpdatePolicy, backend: BackendKind },
    NnChain,
}

#[derive(Clone, Copy, Debug)]
pub struct HybridConfig {
    /// Switch threshold; 0 keeps circle growing to completion, infinity
    /// skips it entirely.
    pub cutoff: f64,
    /// Numerator of the switch ratio (available pairs by default).
    pub ratio: RatioKind,
    pub endgame: Endgame,
    pub pair_budget: u64,
}

impl HybridConfig {
    pub fn pure_circle_growing() -> HybridConfig {
        HybridConfig {
            cutoff: 0.0,
            ratio: RatioKind::AvailablePairs,
            endgame: Endgame::PairHeap { policy: UpdatePolicy::Lazy, backend: BackendKind::Linear },
            pair_budget: DEFAULT_PAIR_BUDGET,
        }
    }

    pub fn with_endgame(cutoff: f64, endgame: Endgame) -> HybridConfig {
        HybridConfig {
            cutoff,
            ratio: RatioKind::AvailablePairs,
            endgame,
            pair_budget: DEFAULT_PAIR_BUDGET,
        }
    }
}

impl Default for HybridConfig {
    fn default() -> Self {
        HybridConfig::with_endgame(
            0.15,
            Endgame::PairHeap { policy: UpdatePolicy::Lazy, backend: BackendKind::Linear },
        )
    }
}

/// Per-run counters and timings. Wall time excludes building the offset
/// list, which is amortized across runs.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunStats {
    pub wall: Duration,
    pub circle_growing: Duration,
    pub endgame: Duration,
    /// In-grid candidates the circle-growing phase examined.
    pub pairs_generated: u64,
    /// Available sites / centers when the endgame took over (0 when circle
    /// growing completed the matching on its own).
    pub handoff_sites: u64,
    pub handoff_centers: u64,
    pub alpha: Option<u64>,
    pub nn_queries: Option<u64>,
    pub presort_advances: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct HybridRun {
    pub assignment: Assignment,
    pub stats: RunStats,
}

/// Runs circle growing under the configured stop rule and finishes with the
/// endgame when the matching is still incomplete.
pub fn run_hybrid(
    instance: &Instance,
    offsets: &SortedOffsets,
    config: &HybridConfig,
) -> Result<HybridRun> {
    let stop = StopRule { cutoff: config.cutoff, ratio: config.ratio };
    let start = Instant::now();

    let mut state = match instance.kind() {
        CenterKind::Int => match_integer_centers(instance, offsets, stop)?,
        CenterKind::Real => match_real_centers(instance, offsets, stop),
    };
    let cg_time = start.elapsed();

    let mut stats = RunStats {
        circle_growing: cg_time,
        pairs_generated: state.pairs_generated(),
        handoff_sites: state.m() as u64,
        handoff_centers: state.available_centers() as u64,
        ..Default::default()
    };

    if !state.is_complete() {
        let endgame_start = Instant::now();
        match config.endgame {
            Endgame::PairSort => {
                pair_sort(instance, &mut state, config.pair_budget)?;
            }
            Endgame::PairHeap { policy, backend } => {
                let heap_stats = pair_heap(instance, &mut state, policy, backend);
                stats.alpha = Some(heap_stats.alpha);
                stats.nn_queries = Some(heap_stats.nn_queries);
                stats.presort_advances = heap_stats.presort_advances;
            }
            Endgame::NnChain => {
                let chain_stats = nn_chain_match(instance, &mut state, NnChainOptions::default());
                stats.nn_queries = Some(chain_stats.nn_queries);
            }
        }
        stats.endgame = endgame_start.elapsed();
    }
    stats.wall = start.elapsed();

    let assignment = state.into_assignment(instance)?;
    Ok(HybridRun { assignment, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Metric;
    use crate::oracle::greedy_oracle;

    fn all_endgames() -> Vec<Endgame> {
        let mut v = vec![Endgame::PairSort, Endgame::NnChain];
        for policy in [UpdatePolicy::Eager, UpdatePolicy::Lazy] {
            for backend in [BackendKind::Linear, BackendKind::Presort] {
                v.push(Endgame::PairHeap { policy, backend });
            }
        }
        v
    }

    #[test]
    fn assignment_is_independent_of_cutoff_and_endgame() {
        for seed in 0..8u64 {
            let kind = if seed % 2 == 0 { CenterKind::Int } else { CenterKind::Real };
            let inst = Instance::random(16, 5, Metric::Euclidean, kind, seed).unwrap();
            let offsets = SortedOffsets::build(inst.n(), inst.metric());
            let reference = greedy_oracle(&inst);
            for endgame in all_endgames() {
                for cutoff in [0.0, 0.15, 1.0, f64::INFINITY] {
                    let config = HybridConfig::with_endgame(cutoff, endgame);
                    let run = run_hybrid(&inst, &offsets, &config).unwrap();
                    assert_eq!(
                        run.assignment, reference,
                        "seed {seed} cutoff {cutoff} endgame {endgame:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn cutoff_zero_reports_no_handoff() {
        let inst = Instance::random(16, 4, Metric::Euclidean, CenterKind::Int, 1).unwrap();
        let offsets = SortedOffsets::build(inst.n(), inst.metric());
        let run = run_hybrid(&inst, &offsets, &HybridConfig::pure_circle_growing()).unwrap();
        assert_eq!(run.stats.handoff_sites, 0);
        assert_eq!(run.stats.alpha, None);
    }

    #[test]
    fn infinite_cutoff_is_a_pure_endgame_run() {
        let inst = Instance::random(12, 3, Metric::Euclidean, CenterKind::Int, 2).unwrap();
        let offsets = SortedOffsets::build(inst.n(), inst.metric());
        let config = HybridConfig::with_endgame(f64::INFINITY, Endgame::PairSort);
        let run = run_hybrid(&inst, &offsets, &config).unwrap();
        assert_eq!(run.stats.pairs_generated, 0);
        assert_eq!(run.stats.handoff_sites, 144);
        assert_eq!(run.assignment, greedy_oracle(&inst));
    }
}
