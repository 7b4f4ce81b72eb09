//! Problem instances: the square grid, the centers, and per-center quotas.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metric::{DistKey, Metric};

/// The n x n pixel grid. Pixels are lattice points (x, y) with
/// 0 <= x, y < n, indexed row-major as `y * n + x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridSpec {
    n: u32,
}

impl GridSpec {
    pub fn new(n: u32) -> Result<GridSpec> {
        if n == 0 {
            return Err(Error::InvalidInstance("grid side must be at least 1".into()));
        }
        if n > 65_535 {
            return Err(Error::InvalidInstance(format!(
                "grid side {n} too large: pixel indices must fit in u32"
            )));
        }
        Ok(GridSpec { n })
    }

    #[inline]
    pub fn n(&self) -> u32 {
        self.n
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        (self.n as usize) * (self.n as usize)
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32) -> u32 {
        debug_assert!(x < self.n && y < self.n);
        y * self.n + x
    }

    #[inline]
    pub fn coords(&self, pixel: u32) -> (u32, u32) {
        (pixel % self.n, pixel / self.n)
    }

    #[inline]
    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < self.n as i64 && y < self.n as i64
    }
}

/// Whether the centers sit on lattice points or at arbitrary real
/// coordinates. Integer centers unlock the translate-the-offset-list fast
/// path and exact integer sort keys.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CenterKind {
    Int,
    Real,
}

impl CenterKind {
    pub fn token(self) -> &'static str {
        match self {
            CenterKind::Int => "int",
            CenterKind::Real => "real",
        }
    }

    pub fn from_token(s: &str) -> Option<CenterKind> {
        match s {
            "int" => Some(CenterKind::Int),
            "real" => Some(CenterKind::Real),
            _ => None,
        }
    }
}

impl fmt::Display for CenterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// A full problem instance: grid, metric, and k centers.
///
/// Center ids are the indices into the position array. Positions are stored
/// as f64 pairs for both kinds; integer positions are integer-valued f64, so
/// all distance keys computed from them are exact.
#[derive(Clone, Debug)]
pub struct Instance {
    grid: GridSpec,
    metric: Metric,
    kind: CenterKind,
    centers: Vec<[f64; 2]>,
}

impl Instance {
    pub fn with_int_centers(
        n: u32,
        metric: Metric,
        centers: &[(u32, u32)],
    ) -> Result<Instance> {
        let grid = GridSpec::new(n)?;
        check_center_count(&grid, centers.len())?;
        for (i, &(x, y)) in centers.iter().enumerate() {
            if x >= n || y >= n {
                return Err(Error::InvalidInstance(format!(
                    "center {i} at ({x}, {y}) lies outside the {n}x{n} grid"
                )));
            }
        }
        Ok(Instance {
            grid,
            metric,
            kind: CenterKind::Int,
            centers: centers.iter().map(|&(x, y)| [x as f64, y as f64]).collect(),
        })
    }

    pub fn with_real_centers(
        n: u32,
        metric: Metric,
        centers: &[(f64, f64)],
    ) -> Result<Instance> {
        let grid = GridSpec::new(n)?;
        check_center_count(&grid, centers.len())?;
        for (i, &(x, y)) in centers.iter().enumerate() {
            let in_range = |v: f64| v.is_finite() && v >= 0.0 && v < n as f64;
            if !in_range(x) || !in_range(y) {
                return Err(Error::InvalidInstance(format!(
                    "center {i} at ({x}, {y}) lies outside [0, {n})^2"
                )));
            }
        }
        Ok(Instance {
            grid,
            metric,
            kind: CenterKind::Real,
            centers: centers.iter().map(|&(x, y)| [x, y]).collect(),
        })
    }

    /// Samples k centers uniformly at random: over the pixels for integer
    /// kind, over [0, n)^2 for real kind. Duplicates are permitted.
    pub fn random(n: u32, k: usize, metric: Metric, kind: CenterKind, seed: u64) -> Result<Instance> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match kind {
            CenterKind::Int => {
                let centers: Vec<(u32, u32)> = (0..k)
                    .map(|_| (rng.gen_range(0..n), rng.gen_range(0..n)))
                    .collect();
                Instance::with_int_centers(n, metric, &centers)
            }
            CenterKind::Real => {
                let centers: Vec<(f64, f64)> = (0..k)
                    .map(|_| (rng.gen_range(0.0..n as f64), rng.gen_range(0.0..n as f64)))
                    .collect();
                Instance::with_real_centers(n, metric, &centers)
            }
        }
    }

    #[inline]
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    #[inline]
    pub fn n(&self) -> u32 {
        self.grid.n()
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.centers.len()
    }

    #[inline]
    pub fn metric(&self) -> Metric {
        self.metric
    }

    #[inline]
    pub fn kind(&self) -> CenterKind {
        self.kind
    }

    #[inline]
    pub fn centers(&self) -> &[[f64; 2]] {
        &self.centers
    }

    #[inline]
    pub fn center(&self, id: u32) -> [f64; 2] {
        self.centers[id as usize]
    }

    /// Integer coordinates of a center. Only meaningful for integer kind.
    #[inline]
    pub fn center_int(&self, id: u32) -> (i64, i64) {
        debug_assert_eq!(self.kind, CenterKind::Int);
        let [x, y] = self.centers[id as usize];
        (x as i64, y as i64)
    }

    /// Nearest grid lattice point to a center (the anchor used by the
    /// real-center circle growing). Clamped to [0, n-1] per coordinate so
    /// every pixel stays reachable from the anchor by an offset with
    /// magnitude below n.
    #[inline]
    pub fn center_anchor(&self, id: u32) -> (i64, i64) {
        let [x, y] = self.centers[id as usize];
        let max = self.n() as i64 - 1;
        ((x.round() as i64).clamp(0, max), (y.round() as i64).clamp(0, max))
    }

    /// Comparison-key distance between a center and a pixel.
    #[inline]
    pub fn key(&self, center: u32, pixel: u32) -> f64 {
        let [cx, cy] = self.centers[center as usize];
        let (px, py) = self.grid.coords(pixel);
        self.metric.key(cx - px as f64, cy - py as f64)
    }

    /// Full total-order key for the (center, pixel) pair.
    #[inline]
    pub fn dist_key(&self, center: u32, pixel: u32) -> DistKey {
        DistKey::new(self.key(center, pixel), center, pixel)
    }

    /// Integer comparison key; requires integer centers.
    #[inline]
    pub fn int_key(&self, center: u32, pixel: u32) -> u64 {
        debug_assert_eq!(self.kind, CenterKind::Int);
        let (cx, cy) = self.center_int(center);
        let (px, py) = self.grid.coords(pixel);
        self.metric.int_key(cx - px as i64, cy - py as i64)
    }

    /// Actual metric distance between a center and a pixel.
    #[inline]
    pub fn dist(&self, center: u32, pixel: u32) -> f64 {
        let [cx, cy] = self.centers[center as usize];
        let (px, py) = self.grid.coords(pixel);
        self.metric.dist(cx - px as f64, cy - py as f64)
    }

    /// Per-center quotas for this instance.
    pub fn quotas(&self) -> Vec<u32> {
        compute_quotas(self.n(), self.k()).expect("validated at construction")
    }

    /// Reads the instance file format: line 1 `n k metric center_kind`,
    /// then k lines `x y`.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Instance> {
        let mut lines = reader.lines().enumerate();
        let (n, k, metric, kind) = {
            let (idx, line) = lines
                .next()
                .ok_or_else(|| parse_err(1, "empty input"))?;
            let line = line.map_err(Error::Io)?;
            let mut it = line.split_whitespace();
            let n: u32 = next_field(&mut it, idx, "n")?;
            let k: usize = next_field(&mut it, idx, "k")?;
            let metric_tok: String = next_field(&mut it, idx, "metric")?;
            let kind_tok: String = next_field(&mut it, idx, "center kind")?;
            let metric = Metric::from_token(&metric_tok)
                .ok_or_else(|| parse_err(idx + 1, &format!("unknown metric `{metric_tok}` (expected l2, l1, or linf)")))?;
            let kind = CenterKind::from_token(&kind_tok)
                .ok_or_else(|| parse_err(idx + 1, &format!("unknown center kind `{kind_tok}` (expected int or real)")))?;
            (n, k, metric, kind)
        };

        let mut int_centers = Vec::new();
        let mut real_centers = Vec::new();
        for _ in 0..k {
            let (idx, line) = lines
                .next()
                .ok_or_else(|| parse_err(k + 1, &format!("expected {k} center lines")))?;
            let line = line.map_err(Error::Io)?;
            let mut it = line.split_whitespace();
            match kind {
                CenterKind::Int => {
                    let x: u32 = next_field(&mut it, idx, "x")?;
                    let y: u32 = next_field(&mut it, idx, "y")?;
                    int_centers.push((x, y));
                }
                CenterKind::Real => {
                    let x: f64 = next_field(&mut it, idx, "x")?;
                    let y: f64 = next_field(&mut it, idx, "y")?;
                    real_centers.push((x, y));
                }
            }
        }
        match kind {
            CenterKind::Int => Instance::with_int_centers(n, metric, &int_centers),
            CenterKind::Real => Instance::with_real_centers(n, metric, &real_centers),
        }
    }

    pub fn from_path(path: &Path) -> Result<Instance> {
        let file = std::fs::File::open(path)?;
        Instance::from_reader(std::io::BufReader::new(file))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{} {} {} {}", self.n(), self.k(), self.metric, self.kind)?;
        for &[x, y] in &self.centers {
            match self.kind {
                CenterKind::Int => writeln!(w, "{} {}", x as u64, y as u64)?,
                CenterKind::Real => writeln!(w, "{x} {y}")?,
            }
        }
        Ok(())
    }
}

fn check_center_count(grid: &GridSpec, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidInstance("need at least one center".into()));
    }
    if k > grid.pixel_count() {
        return Err(Error::InvalidInstance(format!(
            "{k} centers exceed the {} pixels of the grid",
            grid.pixel_count()
        )));
    }
    Ok(())
}

fn parse_err(line: usize, msg: &str) -> Error {
    Error::Parse { line, msg: msg.to_string() }
}

fn next_field<'a, T: std::str::FromStr, I: Iterator<Item = &'a str>>(
    it: &mut I,
    line_idx: usize,
    what: &str,
) -> Result<T> {
    let tok = it
        .next()
        .ok_or_else(|| parse_err(line_idx + 1, &format!("missing field `{what}`")))?;
    tok.parse()
        .map_err(|_| parse_err(line_idx + 1, &format!("cannot parse `{tok}` as {what}")))
}

/// Splits the n^2 pixels into k quotas: the first `n^2 mod k` centers get
/// the ceiling, the rest the floor.
pub fn compute_quotas(n: u32, k: usize) -> Result<Vec<u32>> {
    let total = (n as u64) * (n as u64);
    if k == 0 || k as u64 > total {
        return Err(Error::InvalidInstance(format!(
            "center count {k} must be between 1 and n^2 = {total}"
        )));
    }
    let base = total / k as u64;
    let extra = (total % k as u64) as usize;
    Ok((0..k)
        .map(|i| if i < extra { (base + 1) as u32 } else { base as u32 })
        .collect())
}
