//! Stable k-means: Lloyd iterations whose assignment step is a stable grid
//! matching, so every cluster keeps its quota-exact size.
//!
//! The update step moves each center to a weighted centroid of its region,
//! with weights `max(d(q, c), eps)^p`. Exponent 0 recovers the plain
//! centroid; positive exponents pull centers toward outlying pixels,
//! negative ones anchor them near their current position. Regions may come
//! out disconnected; the per-region component counts are reported, not
//! enforced.

use crate::assignment::Assignment;
use crate::error::Result;
use crate::hybrid::{run_hybrid, HybridConfig};
use crate::instance::{GridSpec, Instance};
use crate::metric::Metric;
use crate::offsets::SortedOffsets;

/// Centroid weight rule: `w_q = max(d(q, c), eps)^p`. The floor keeps
/// negative exponents finite when a pixel coincides with its center.
#[derive(Clone, Copy, Debug)]
pub struct CentroidWeighting {
    pub p: f64,
    pub eps: f64,
}

impl CentroidWeighting {
    pub fn exponent(p: f64) -> CentroidWeighting {
        CentroidWeighting { p, eps: 1e-6 }
    }
}

impl Default for CentroidWeighting {
    fn default() -> Self {
        CentroidWeighting::exponent(0.0)
    }
}

/// Weighted centroid of a region. The result lies in the convex hull of the
/// region's pixels, hence inside the grid.
pub fn weighted_centroid(
    grid: GridSpec,
    metric: Metric,
    region: &[u32],
    center: [f64; 2],
    weighting: CentroidWeighting,
) -> [f64; 2] {
    assert!(!region.is_empty(), "centroid of an empty region");
    let mut sum_w = 0.0;
    let mut sum_x = 0.0;
    let mut sum_y = 0.0;
    for &pixel in region {
        let (px, py) = grid.coords(pixel);
        let (px, py) = (px as f64, py as f64);
        let d = metric.dist(center[0] - px, center[1] - py);
        let w = d.max(weighting.eps).powf(weighting.p);
        sum_w += w;
        sum_x += w * px;
        sum_y += w * py;
    }
    let max = (grid.n() - 1) as f64;
    [(sum_x / sum_w).clamp(0.0, max), (sum_y / sum_w).clamp(0.0, max)]
}

/// Number of 4-connected components in each center's region.
pub fn connectivity_report(assignment: &Assignment) -> Vec<u32> {
    let n = assignment.n() as usize;
    let mut components = vec![0u32; assignment.k()];
    let mut seen = vec![false; n * n];
    let mut queue: Vec<usize> = Vec::new();
    for start in 0..n * n {
        if seen[start] {
            continue;
        }
        let center = assignment.center_of(start as u32);
        components[center as usize] += 1;
        seen[start] = true;
        queue.push(start);
        while let Some(p) = queue.pop() {
            let (x, y) = (p % n, p / n);
            let mut visit = |q: usize| {
                if !seen[q] && assignment.center_of(q as u32) == center {
                    seen[q] = true;
                    queue.push(q);
                }
            };
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < n {
                visit(p + 1);
            }
            if y > 0 {
                visit(p - n);
            }
            if y + 1 < n {
                visit(p + n);
            }
        }
    }
    components
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KMeansStatus {
    /// The assignment repeated between consecutive iterations.
    Converged,
    /// The iteration limit was reached first.
    MaxIters,
    /// The multiset of center positions matched an earlier iteration
    /// (two or more rounds back), so the run is cycling.
    Oscillating,
}

/// One Lloyd round: the centers that produced the matching, how far the
/// update step moved them, and the per-region component counts.
#[derive(Clone, Debug)]
pub struct KMeansIteration {
    pub centers: Vec<[f64; 2]>,
    pub max_displacement: f64,
    pub components: Vec<u32>,
}

#[derive(Clone, Debug)]
pub struct KMeansRun {
    pub status: KMeansStatus,
    pub iterations: Vec<KMeansIteration>,
    pub assignment: Assignment,
    pub connectivity: Vec<u32>,
}

#[derive(Clone, Copy, Debug)]
pub struct KMeansOptions {
    pub weighting: CentroidWeighting,
    pub max_iters: usize,
    /// Matching pipeline for the assignment step. Any configuration yields
    /// the same assignments; the default hybrid is just fast.
    pub pipeline: HybridConfig,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions {
            weighting: CentroidWeighting::default(),
            max_iters: 200,
            pipeline: HybridConfig::default(),
        }
    }
}

const OSCILLATION_TOLERANCE: f64 = 1e-9;

pub fn stable_kmeans(instance: &Instance, options: &KMeansOptions) -> Result<KMeansRun> {
    stable_kmeans_observed(instance, options, |_, _, _| {})
}

/// Stable k-means with a per-iteration hook `(round, assignment, centers)`,
/// used by tests to verify every round and by the CLI to dump frames.
pub fn stable_kmeans_observed(
    instance: &Instance,
    options: &KMeansOptions,
    mut on_iteration: impl FnMut(usize, &Assignment, &[[f64; 2]]),
) -> Result<KMeansRun> {
    let grid = instance.grid();
    let metric = instance.metric();
    let offsets = SortedOffsets::build(grid.n(), metric);

    let mut centers: Vec<[f64; 2]> = instance.centers().to_vec();
    let mut history: Vec<Vec<[f64; 2]>> = vec![sorted_positions(&centers)];
    let mut prev_map: Option<Vec<u32>> = None;
    let mut iterations: Vec<KMeansIteration> = Vec::new();
    let mut status = KMeansStatus::MaxIters;
    let mut last_assignment: Option<Assignment> = None;

    for round in 0..options.max_iters {
        let round_instance = instance_at(instance, &centers)?;
        let run = run_hybrid(&round_instance, &offsets, &options.pipeline)?;
        let assignment = run.assignment;
        on_iteration(round, &assignment, &centers);

        if prev_map.as_deref() == Some(assignment.map()) {
            iterations.push(KMeansIteration {
                centers: centers.clone(),
                max_displacement: 0.0,
                components: connectivity_report(&assignment),
            });
            last_assignment = Some(assignment);
            status = KMeansStatus::Converged;
            break;
        }

        // update step
        let mut regions: Vec<Vec<u32>> = vec![Vec::new(); instance.k()];
        for (p, &c) in assignment.map().iter().enumerate() {
            regions[c as usize].push(p as u32);
        }
        let new_centers: Vec<[f64; 2]> = centers
            .iter()
            .enumerate()
            .map(|(c, &pos)| weighted_centroid(grid, metric, &regions[c], pos, options.weighting))
            .collect();
        let max_displacement = centers
            .iter()
            .zip(&new_centers)
            .map(|(a, b)| metric.dist(a[0] - b[0], a[1] - b[1]))
            .fold(0.0f64, f64::max);

        iterations.push(KMeansIteration {
            centers: centers.clone(),
            max_displacement,
            components: connectivity_report(&assignment),
        });
        prev_map = Some(assignment.map().to_vec());
        last_assignment = Some(assignment);

        // oscillation: the new multiset matches some iteration at least two
        // rounds back; a match with the immediate predecessor is a fixpoint
        // in the making and is left to the assignment test above
        let new_sorted = sorted_positions(&new_centers);
        if history[..history.len().saturating_sub(1)]
            .iter()
            .any(|old| positions_match(old, &new_sorted, OSCILLATION_TOLERANCE))
        {
            status = KMeansStatus::Oscillating;
            break;
        }
        history.push(new_sorted);
        centers = new_centers;
    }

    let assignment = last_assignment.expect("max_iters is at least 1");
    let connectivity = connectivity_report(&assignment);
    Ok(KMeansRun { status, iterations, assignment, connectivity })
}

fn instance_at(base: &Instance, centers: &[[f64; 2]]) -> Result<Instance> {
    let pairs: Vec<(f64, f64)> = centers.iter().map(|&[x, y]| (x, y)).collect();
    Instance::with_real_centers(base.n(), base.metric(), &pairs)
}

fn sorted_positions(centers: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut v = centers.to_vec();
    v.sort_unstable_by(|a, b| a[0].total_cmp(&b[0]).then_with(|| a[1].total_cmp(&b[1])));
    v
}

fn positions_match(a: &[[f64; 2]], b: &[[f64; 2]], tol: f64) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x[0] - y[0]).abs() <= tol && (x[1] - y[1]).abs() <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::{verify_quotas, verify_stability};
    use crate::instance::CenterKind;

    #[test]
    fn centroid_identities() {
        let grid = GridSpec::new(8).unwrap();
        let m = Metric::Euclidean;

        // p = 0: plain mean
        let region = [grid.index(0, 0), grid.index(2, 0)];
        let c = weighted_centroid(grid, m, &region, [0.0, 0.0], CentroidWeighting::exponent(0.0));
        assert_eq!(c, [1.0, 0.0]);

        // p = 1 pulls toward the far pixel; weights eps and 4
        let region = [grid.index(0, 0), grid.index(4, 0)];
        let c = weighted_centroid(grid, m, &region, [0.0, 0.0], CentroidWeighting::exponent(1.0));
        let expected = (1e-6f64.powf(1.0) * 0.0 + 4.0 * 4.0) / (1e-6 + 4.0);
        assert!((c[0] - expected).abs() <= 1e-9 && c[1].abs() <= 1e-9);

        // p = -1 pulls toward the near pixel; weights 1 and 1/3
        let region = [grid.index(1, 0), grid.index(3, 0)];
        let c = weighted_centroid(grid, m, &region, [0.0, 0.0], CentroidWeighting::exponent(-1.0));
        assert!((c[0] - 1.5).abs() <= 1e-9 && c[1].abs() <= 1e-9);
    }

    #[test]
    fn centroid_stays_in_region_bounding_box() {
        let grid = GridSpec::new(16).unwrap();
        for p in [-2.0, -0.8, 0.0, 0.4, 2.0] {
            let region: Vec<u32> = (0..16u32).map(|i| grid.index(3 + i % 4, 5 + i / 4)).collect();
            let c = weighted_centroid(
                grid,
                Metric::Euclidean,
                &region,
                [3.7, 6.2],
                CentroidWeighting::exponent(p),
            );
            assert!(c[0] >= 3.0 && c[0] <= 6.0 && c[1] >= 5.0 && c[1] <= 8.0, "p {p}: {c:?}");
        }
    }

    #[test]
    fn connectivity_of_whole_grid_is_one() {
        let a = Assignment::from_map(4, 1, vec![0; 16]).unwrap();
        assert_eq!(connectivity_report(&a), vec![1]);
    }

    #[test]
    fn checkerboard_components() {
        let n = 4u32;
        let map: Vec<u32> = (0..16).map(|i| ((i % 4) + (i / 4)) as u32 % 2).collect();
        let a = Assignment::from_map(n, 2, map).unwrap();
        assert_eq!(connectivity_report(&a), vec![8, 8]);
    }

    #[test]
    fn single_center_converges_fast() {
        for p in [-1.0, 0.0, 1.0] {
            let inst = Instance::random(8, 1, Metric::Euclidean, CenterKind::Real, 3).unwrap();
            let options = KMeansOptions {
                weighting: CentroidWeighting::exponent(p),
                ..KMeansOptions::default()
            };
            let run = stable_kmeans(&inst, &options).unwrap();
            assert_eq!(run.status, KMeansStatus::Converged, "p {p}");
            assert!(run.iterations.len() <= 2, "p {p}: took {}", run.iterations.len());
        }
    }

    #[test]
    fn every_round_is_stable_and_quota_exact() {
        let inst = Instance::random(24, 6, Metric::Euclidean, CenterKind::Real, 17).unwrap();
        let options = KMeansOptions::default();
        let mut rounds = 0usize;
        let run = stable_kmeans_observed(&inst, &options, |_, assignment, centers| {
            rounds += 1;
            let pairs: Vec<(f64, f64)> = centers.iter().map(|&[x, y]| (x, y)).collect();
            let round_inst = Instance::with_real_centers(24, Metric::Euclidean, &pairs).unwrap();
            assert!(verify_stability(assignment, &round_inst).unwrap().is_stable());
            assert!(verify_quotas(assignment, &round_inst).unwrap());
        })
        .unwrap();
        assert_eq!(rounds, run.iterations.len());
        assert!(matches!(run.status, KMeansStatus::Converged | KMeansStatus::MaxIters));
    }

    #[test]
    fn trajectory_is_deterministic() {
        let inst = Instance::random(16, 4, Metric::Manhattan, CenterKind::Real, 8).unwrap();
        let options = KMeansOptions::default();
        let a = stable_kmeans(&inst, &options).unwrap();
        let b = stable_kmeans(&inst, &options).unwrap();
        assert_eq!(a.status, b.status);
        assert_eq!(a.assignment, b.assignment);
        for (x, y) in a.iterations.iter().zip(&b.iterations) {
            assert_eq!(x.centers, y.centers);
        }
    }
}
