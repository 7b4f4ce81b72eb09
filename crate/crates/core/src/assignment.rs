//! Completed matchings and the stability / quota verifiers.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::instance::Instance;

/// A complete pixel-to-center matching.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    n: u32,
    k: usize,
    map: Vec<u32>,
    region_sizes: Vec<u32>,
}

impl Assignment {
    /// Builds an assignment from a dense pixel-to-center map, checking that
    /// every pixel is mapped to a valid center.
    pub fn from_map(n: u32, k: usize, map: Vec<u32>) -> Result<Assignment> {
        if map.len() != (n as usize) * (n as usize) {
            return Err(Error::InvalidInstance(format!(
                "assignment has {} entries, grid has {}",
                map.len(),
                (n as usize) * (n as usize)
            )));
        }
        let mut region_sizes = vec![0u32; k];
        let mut unassigned = 0usize;
        for &c in &map {
            match region_sizes.get_mut(c as usize) {
                Some(size) => *size += 1,
                None => unassigned += 1,
            }
        }
        if unassigned > 0 {
            return Err(Error::IncompleteAssignment { unassigned });
        }
        Ok(Assignment { n, k, map, region_sizes })
    }

    #[inline]
    pub fn n(&self) -> u32 {
        self.n
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    /// Center assigned to a pixel (row-major index).
    #[inline]
    pub fn center_of(&self, pixel: u32) -> u32 {
        self.map[pixel as usize]
    }

    #[inline]
    pub fn map(&self) -> &[u32] {
        &self.map
    }

    #[inline]
    pub fn region_sizes(&self) -> &[u32] {
        &self.region_sizes
    }

    /// Pixels of one region, in row-major order.
    pub fn region(&self, center: u32) -> Vec<u32> {
        self.map
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c == center)
            .map(|(p, _)| p as u32)
            .collect()
    }

    /// Writes the dump format: `n k` header, then n^2 center ids, row-major,
    /// one per line.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{} {}", self.n, self.k)?;
        for &c in &self.map {
            writeln!(w, "{c}")?;
        }
        Ok(())
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Assignment> {
        let mut lines = reader.lines().enumerate();
        let (n, k) = {
            let (idx, line) = lines
                .next()
                .ok_or_else(|| Error::Parse { line: 1, msg: "empty input".into() })?;
            let line = line.map_err(Error::Io)?;
            let mut it = line.split_whitespace();
            let n: u32 = parse_field(it.next(), idx, "n")?;
            let k: usize = parse_field(it.next(), idx, "k")?;
            (n, k)
        };
        let total = (n as usize) * (n as usize);
        let mut map = Vec::with_capacity(total);
        for _ in 0..total {
            let (idx, line) = lines.next().ok_or_else(|| Error::Parse {
                line: total + 1,
                msg: format!("expected {total} assignment lines"),
            })?;
            let line = line.map_err(Error::Io)?;
            map.push(parse_field(line.split_whitespace().next(), idx, "center id")?);
        }
        Assignment::from_map(n, k, map)
    }

    pub fn from_path(path: &Path) -> Result<Assignment> {
        let file = std::fs::File::open(path)?;
        Assignment::from_reader(std::io::BufReader::new(file))
    }
}

fn parse_field<T: std::str::FromStr>(tok: Option<&str>, line_idx: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::Parse {
        line: line_idx + 1,
        msg: format!("missing field `{what}`"),
    })?;
    tok.parse().map_err(|_| Error::Parse {
        line: line_idx + 1,
        msg: format!("cannot parse `{tok}` as {what}"),
    })
}

/// A pixel-center pair that violates stability: the pixel strictly prefers
/// this center over its match, and the center strictly prefers the pixel over
/// at least one pixel in its region.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockingPair {
    pub pixel: u32,
    pub center: u32,
}

/// Result of a stability check. The assignment is stable iff `blocking` is
/// empty.
#[derive(Clone, Debug, Default)]
pub struct StabilityReport {
    pub blocking: Vec<BlockingPair>,
}

impl StabilityReport {
    pub fn is_stable(&self) -> bool {
        self.blocking.is_empty()
    }
}

/// Lists all blocking pairs of a complete assignment in O(n^2 k), by
/// precomputing each center's worst (maximum) assigned key.
pub fn verify_stability(assignment: &Assignment, instance: &Instance) -> Result<StabilityReport> {
    check_shape(assignment, instance)?;
    let pixels = instance.grid().pixel_count();

    // worst key currently assigned to each center
    let mut worst = vec![f64::NEG_INFINITY; instance.k()];
    let mut worst_tie = vec![0u32; instance.k()];
    for p in 0..pixels as u32 {
        let c = assignment.center_of(p);
        let key = instance.key(c, p);
        let slot = c as usize;
        if key > worst[slot] || (key == worst[slot] && p > worst_tie[slot]) {
            worst[slot] = key;
            worst_tie[slot] = p;
        }
    }

    let mut report = StabilityReport::default();
    for p in 0..pixels as u32 {
        let own = assignment.center_of(p);
        let own_key = instance.key(own, p);
        for c in 0..instance.k() as u32 {
            if c == own {
                continue;
            }
            let key = instance.key(c, p);
            // pixel prefers c over its match?
            let prefers = key < own_key || (key == own_key && c < own);
            if !prefers {
                continue;
            }
            // c prefers p over its current worst?
            let slot = c as usize;
            let wanted = key < worst[slot] || (key == worst[slot] && p < worst_tie[slot]);
            if wanted {
                report.blocking.push(BlockingPair { pixel: p, center: c });
            }
        }
    }
    Ok(report)
}

/// True iff the region sizes exactly match the computed quotas.
pub fn verify_quotas(assignment: &Assignment, instance: &Instance) -> Result<bool> {
    check_shape(assignment, instance)?;
    Ok(assignment.region_sizes() == instance.quotas().as_slice())
}

fn check_shape(assignment: &Assignment, instance: &Instance) -> Result<()> {
    if assignment.n() != instance.n() || assignment.k() != instance.k() {
        return Err(Error::InvalidInstance(format!(
            "assignment is for n={} k={}, instance has n={} k={}",
            assignment.n(),
            assignment.k(),
            instance.n(),
            instance.k()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Instance;
    use crate::metric::Metric;

    #[test]
    fn quota_check_detects_imbalance() {
        let inst = Instance::with_int_centers(2, Metric::Euclidean, &[(0, 0), (1, 1)]).unwrap();
        let all_zero = Assignment::from_map(2, 2, vec![0, 0, 0, 0]).unwrap();
        assert!(!verify_quotas(&all_zero, &inst).unwrap());
        let balanced = Assignment::from_map(2, 2, vec![0, 0, 1, 1]).unwrap();
        assert!(verify_quotas(&balanced, &inst).unwrap());
    }

    #[test]
    fn single_center_is_always_stable() {
        let inst = Instance::with_int_centers(3, Metric::Manhattan, &[(1, 1)]).unwrap();
        let a = Assignment::from_map(3, 1, vec![0; 9]).unwrap();
        assert!(verify_stability(&a, &inst).unwrap().is_stable());
    }

    #[test]
    fn incomplete_map_is_rejected() {
        match Assignment::from_map(2, 2, vec![0, 0, 7, 1]) {
            Err(Error::IncompleteAssignment { unassigned }) => assert_eq!(unassigned, 1),
            other => panic!("expected incomplete error, got {other:?}"),
        }
    }

    #[test]
    fn dump_roundtrip() {
        let a = Assignment::from_map(2, 2, vec![0, 1, 1, 0]).unwrap();
        let mut buf = Vec::new();
        a.write_to(&mut buf).unwrap();
        assert_eq!(Assignment::from_reader(buf.as_slice()).unwrap(), a);
    }
}
