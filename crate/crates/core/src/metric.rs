//! Distance metrics and the total order on center-pixel pairs.
//!
//! Every algorithm in the crate agrees on one comparison rule: pairs are
//! ordered by `(distance, center id, pixel row-major index)`. The distance
//! component is the squared distance for the Euclidean metric and the plain
//! distance for Manhattan and Chebyshev, so integer-center instances always
//! compare exact integer values (at most `2n^2`, far below the 2^53 limit of
//! f64, so storing them in f64 loses nothing).

use std::cmp::Ordering;
use std::fmt;

/// Distance metric for ranking center-pixel pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Metric {
    Euclidean,
    Manhattan,
    Chebyshev,
}

impl Metric {
    /// Comparison-key distance for a coordinate delta. Squared for
    /// Euclidean, plain for the other two.
    #[inline]
    pub fn key(self, dx: f64, dy: f64) -> f64 {
        match self {
            Metric::Euclidean => dx * dx + dy * dy,
            Metric::Manhattan => dx.abs() + dy.abs(),
            Metric::Chebyshev => dx.abs().max(dy.abs()),
        }
    }

    /// Actual metric distance (takes the square root for Euclidean).
    #[inline]
    pub fn dist(self, dx: f64, dy: f64) -> f64 {
        match self {
            Metric::Euclidean => (dx * dx + dy * dy).sqrt(),
            Metric::Manhattan => dx.abs() + dy.abs(),
            Metric::Chebyshev => dx.abs().max(dy.abs()),
        }
    }

    /// Integer comparison key for an integer delta.
    #[inline]
    pub fn int_key(self, dx: i64, dy: i64) -> u64 {
        let (ax, ay) = (dx.unsigned_abs(), dy.unsigned_abs());
        match self {
            Metric::Euclidean => ax * ax + ay * ay,
            Metric::Manhattan => ax + ay,
            Metric::Chebyshev => ax.max(ay),
        }
    }

    /// Upper bound (inclusive) of `int_key` over deltas with |dx|,|dy| < n.
    /// Used to size counting-sort bucket arrays.
    pub fn int_key_bound(self, n: u32) -> u64 {
        let n = n as u64;
        match self {
            Metric::Euclidean => 2 * n * n,
            Metric::Manhattan => 2 * n,
            Metric::Chebyshev => n,
        }
    }

    /// Converts a comparison key back to an actual distance.
    #[inline]
    pub fn key_to_dist(self, key: f64) -> f64 {
        match self {
            Metric::Euclidean => key.sqrt(),
            _ => key,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Metric::Euclidean => "l2",
            Metric::Manhattan => "l1",
            Metric::Chebyshev => "linf",
        }
    }

    pub fn from_token(s: &str) -> Option<Metric> {
        match s {
            "l2" => Some(Metric::Euclidean),
            "l1" => Some(Metric::Manhattan),
            "linf" => Some(Metric::Chebyshev),
            _ => None,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Total-order key for a center-pixel pair.
///
/// No two distinct pairs compare equal: ties in distance fall through to the
/// center id and then the pixel index. Distances are finite by construction,
/// so `total_cmp` never sees a NaN.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistKey {
    pub dist: f64,
    pub center: u32,
    pub pixel: u32,
}

impl DistKey {
    #[inline]
    pub fn new(dist: f64, center: u32, pixel: u32) -> Self {
        DistKey { dist, center, pixel }
    }
}

impl Eq for DistKey {}

impl PartialOrd for DistKey {
    #[inline]
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DistKey {
    #[inline]
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then_with(|| self.center.cmp(&other.center))
            .then_with(|| self.pixel.cmp(&other.pixel))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_examples() {
        // l2 uses squared distance, l1/linf the distance itself
        assert_eq!(Metric::Euclidean.key(3.0, 4.0), 25.0);
        assert_eq!(Metric::Manhattan.key(3.0, 4.0), 7.0);
        assert_eq!(Metric::Chebyshev.key(3.0, 4.0), 4.0);
        assert_eq!(Metric::Euclidean.int_key(-3, 4), 25);
        assert_eq!(Metric::Manhattan.int_key(-3, -4), 7);
        assert_eq!(Metric::Chebyshev.int_key(3, -4), 4);
    }

    #[test]
    fn int_and_float_keys_agree() {
        for metric in [Metric::Euclidean, Metric::Manhattan, Metric::Chebyshev] {
            for dx in -12i64..=12 {
                for dy in -12i64..=12 {
                    assert_eq!(metric.int_key(dx, dy) as f64, metric.key(dx as f64, dy as f64));
                }
            }
        }
    }

    #[test]
    fn dist_key_total_order() {
        let a = DistKey::new(1.0, 0, 5);
        let b = DistKey::new(1.0, 0, 6);
        let c = DistKey::new(1.0, 1, 0);
        let d = DistKey::new(0.5, 9, 9);
        assert!(a < b && b < c && d < a);
        assert_eq!(a.cmp(&a), Ordering::Equal);
    }
}
