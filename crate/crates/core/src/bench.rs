//! Benchmark harness: seeded sweeps over instance sizes and matcher
//! configurations, reported as CSV.
//!
//! A sweep is described by a small line-oriented spec file:
//!
//! ```text
//! # grid sides and center rule
//! n = 500 1000
//! k = x10            # 10 centers per unit of n; or absolute: k = 5000
//! metric = l2        # l2 | l1 | linf          (default l2)
//! centers = int      # int | real              (default int)
//! algos = all        # or a list: cg ps ph_ll  (default all)
//! cutoffs = 0 0.15   # ignored by cg           (default 0.15)
//! seeds = 10         # runs seeds 0..9         (default 10)
//! ratio = pairs      # pairs | sites           (default pairs)
//! ```
//!
//! Every run gets one CSV row; per-configuration averages over the seeds are
//! appended after the runs. All columns except the timing ones are
//! deterministic for fixed seeds.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::distsort::{BackendKind, UpdatePolicy};
use crate::error::{Error, Result};
use crate::hybrid::{run_hybrid, Endgame, HybridConfig, RunStats, DEFAULT_PAIR_BUDGET};
use crate::instance::{CenterKind, Instance};
use crate::metric::Metric;
use crate::offsets::SortedOffsets;
use crate::state::RatioKind;

/// The algorithm labels used in reports: circle growing alone, pair sort,
/// the four pair-heap variants (eager/lazy x presort/linear), and the
/// nearest-neighbor chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AlgoLabel {
    Cg,
    Ps,
    PhEp,
    PhEl,
    PhLp,
    PhLl,
    Nnc,
}

impl AlgoLabel {
    pub const ALL: [AlgoLabel; 7] = [
        AlgoLabel::Cg,
        AlgoLabel::Ps,
        AlgoLabel::PhEp,
        AlgoLabel::PhEl,
        AlgoLabel::PhLp,
        AlgoLabel::PhLl,
        AlgoLabel::Nnc,
    ];

    pub fn token(self) -> &'static str {
        match self {
            AlgoLabel::Cg => "cg",
            AlgoLabel::Ps => "ps",
            AlgoLabel::PhEp => "ph_ep",
            AlgoLabel::PhEl => "ph_el",
            AlgoLabel::PhLp => "ph_lp",
            AlgoLabel::PhLl => "ph_ll",
            AlgoLabel::Nnc => "nnc",
        }
    }

    pub fn from_token(s: &str) -> Option<AlgoLabel> {
        Self::ALL.iter().copied().find(|a| a.token() == s)
    }

    /// Endgame this label switches to; None for pure circle growing.
    pub fn endgame(self) -> Option<Endgame> {
        match self {
            AlgoLabel::Cg => None,
            AlgoLabel::Ps => Some(Endgame::PairSort),
            AlgoLabel::PhEp => Some(Endgame::PairHeap {
                policy: UpdatePolicy::Eager,
                backend: BackendKind::Presort,
            }),
            AlgoLabel::PhEl => Some(Endgame::PairHeap {
                policy: UpdatePolicy::Eager,
                backend: BackendKind::Linear,
            }),
            AlgoLabel::PhLp => Some(Endgame::PairHeap {
                policy: UpdatePolicy::Lazy,
                backend: BackendKind::Presort,
            }),
            AlgoLabel::PhLl => Some(Endgame::PairHeap {
                policy: UpdatePolicy::Lazy,
                backend: BackendKind::Linear,
            }),
            AlgoLabel::Nnc => Some(Endgame::NnChain),
        }
    }

    /// Hybrid configuration for this label at a cutoff.
    pub fn config(self, cutoff: f64, ratio: RatioKind) -> HybridConfig {
        match self.endgame() {
            None => HybridConfig { ratio, ..HybridConfig::pure_circle_growing() },
            Some(endgame) => HybridConfig {
                cutoff,
                ratio,
                endgame,
                pair_budget: DEFAULT_PAIR_BUDGET,
            },
        }
    }
}

/// How the center count is derived from n.
#[derive(Clone, Debug, PartialEq)]
pub enum KRule {
    Absolute(Vec<usize>),
    TimesN(u32),
}

impl KRule {
    pub fn values(&self, n: u32) -> Vec<usize> {
        match self {
            KRule::Absolute(ks) => ks.clone(),
            KRule::TimesN(mult) => vec![(*mult as usize) * n as usize],
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub n_values: Vec<u32>,
    pub k_rule: KRule,
    pub metric: Metric,
    pub kind: CenterKind,
    pub algos: Vec<AlgoLabel>,
    pub cutoffs: Vec<f64>,
    pub seeds: u64,
    pub ratio: RatioKind,
}

/// Parses the sweep spec format; errors carry 1-based line numbers.
pub fn parse_sweep(text: &str) -> Result<SweepSpec> {
    let mut n_values: Option<Vec<u32>> = None;
    let mut k_rule: Option<KRule> = None;
    let mut metric = Metric::Euclidean;
    let mut kind = CenterKind::Int;
    let mut algos: Vec<AlgoLabel> = AlgoLabel::ALL.to_vec();
    let mut cutoffs = vec![0.15];
    let mut seeds = 10u64;
    let mut ratio = RatioKind::AvailablePairs;

    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: idx + 1, msg };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        let tokens: Vec<&str> = value.split_whitespace().collect();
        if tokens.is_empty() {
            return Err(err(format!("no value for `{key}`")));
        }
        match key {
            "n" => {
                let mut ns = Vec::new();
                for t in &tokens {
                    ns.push(t.parse().map_err(|_| err(format!("bad n value `{t}`")))?);
                }
                n_values = Some(ns);
            }
            "k" => {
                if let Some(mult) = tokens[0].strip_prefix('x') {
                    if tokens.len() != 1 {
                        return Err(err("k = xM takes a single multiplier".into()));
                    }
                    let mult = mult.parse().map_err(|_| err(format!("bad multiplier `{}`", tokens[0])))?;
                    k_rule = Some(KRule::TimesN(mult));
                } else {
                    let mut ks = Vec::new();
                    for t in &tokens {
                        ks.push(t.parse().map_err(|_| err(format!("bad k value `{t}`")))?);
                    }
                    k_rule = Some(KRule::Absolute(ks));
                }
            }
            "metric" => {
                metric = Metric::from_token(tokens[0])
                    .ok_or_else(|| err(format!("unknown metric `{}`", tokens[0])))?;
            }
            "centers" => {
                kind = CenterKind::from_token(tokens[0])
                    .ok_or_else(|| err(format!("unknown center kind `{}`", tokens[0])))?;
            }
            "algos" => {
                if tokens == ["all"] {
                    algos = AlgoLabel::ALL.to_vec();
                } else {
                    let mut list = Vec::new();
                    for t in &tokens {
                        list.push(
                            AlgoLabel::from_token(t)
                                .ok_or_else(|| err(format!("unknown algorithm `{t}`")))?,
                        );
                    }
                    algos = list;
                }
            }
            "cutoffs" => {
                let mut list = Vec::new();
                for t in &tokens {
                    let v = if *t == "inf" {
                        f64::INFINITY
                    } else {
                        t.parse().map_err(|_| err(format!("bad cutoff `{t}`")))?
                    };
                    if v < 0.0 {
                        return Err(err(format!("cutoff `{t}` is negative")));
                    }
                    list.push(v);
                }
                cutoffs = list;
            }
            "seeds" => {
                seeds = tokens[0].parse().map_err(|_| err(format!("bad seed count `{}`", tokens[0])))?;
            }
            "ratio" => {
                ratio = match tokens[0] {
                    "pairs" => RatioKind::AvailablePairs,
                    "sites" => RatioKind::AvailableSites,
                    other => return Err(err(format!("unknown ratio `{other}`"))),
                };
            }
            other => return Err(err(format!("unknown key `{other}`"))),
        }
    }

    let n_values = n_values.ok_or_else(|| Error::Parse { line: text.lines().count() + 1, msg: "missing `n = ...`".into() })?;
    let k_rule = k_rule.ok_or_else(|| Error::Parse { line: text.lines().count() + 1, msg: "missing `k = ...`".into() })?;
    Ok(SweepSpec { n_values, k_rule, metric, kind, algos, cutoffs, seeds, ratio })
}

/// One CSV row: a single run, or the per-configuration average over its
/// seeds (`seed` is None for averages).
#[derive(Clone, Debug)]
pub struct BenchRow {
    pub n: u32,
    pub k: usize,
    pub metric: Metric,
    pub kind: CenterKind,
    pub algo: AlgoLabel,
    pub cutoff: f64,
    pub seed: Option<u64>,
    pub wall_s: f64,
    pub cg_s: f64,
    pub endgame_s: f64,
    pub pairs_generated: f64,
    pub handoff_sites: f64,
    pub alpha: Option<f64>,
    pub nn_queries: Option<f64>,
}

pub const CSV_HEADER: &str =
    "n,k,metric,centers,algo,cutoff,seed,wall_s,cg_s,endgame_s,pairs_generated,handoff_m,alpha,nn_queries";

fn fmt_count(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{}", v as u64)
    } else {
        format!("{v:.2}")
    }
}

fn fmt_cutoff(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        let s = format!("{v}");
        s
    }
}

impl BenchRow {
    pub fn csv_line(&self) -> String {
        let seed = self.seed.map_or_else(|| "avg".to_string(), |s| s.to_string());
        self.csv_line_tagged(&seed)
    }

    /// CSV line with an explicit seed-column tag (the `match` subcommand
    /// reports file-loaded instances with `-`).
    pub fn csv_line_tagged(&self, seed_tag: &str) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.6},{:.6},{:.6},{},{},{},{}",
            self.n,
            self.k,
            self.metric,
            self.kind,
            self.algo.token(),
            fmt_cutoff(self.cutoff),
            seed_tag,
            self.wall_s,
            self.cg_s,
            self.endgame_s,
            fmt_count(self.pairs_generated),
            fmt_count(self.handoff_sites),
            self.alpha.map_or_else(String::new, fmt_count),
            self.nn_queries.map_or_else(String::new, fmt_count),
        )
    }

    fn from_stats(desc: &RunDesc, stats: &RunStats) -> BenchRow {
        BenchRow {
            n: desc.n,
            k: desc.k,
            metric: desc.metric,
            kind: desc.kind,
            algo: desc.algo,
            cutoff: desc.cutoff,
            seed: Some(desc.seed),
            wall_s: stats.wall.as_secs_f64(),
            cg_s: stats.circle_growing.as_secs_f64(),
            endgame_s: stats.endgame.as_secs_f64(),
            pairs_generated: stats.pairs_generated as f64,
            handoff_sites: stats.handoff_sites as f64,
            alpha: stats.alpha.map(|v| v as f64),
            nn_queries: stats.nn_queries.map(|v| v as f64),
        }
    }
}

pub fn rows_to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_line());
        out.push('\n');
    }
    out
}

#[derive(Clone, Copy, Debug)]
struct RunDesc {
    n: u32,
    k: usize,
    metric: Metric,
    kind: CenterKind,
    algo: AlgoLabel,
    cutoff: f64,
    seed: u64,
    ratio: RatioKind,
}

fn expand_runs(spec: &SweepSpec) -> Vec<RunDesc> {
    let mut runs = Vec::new();
    for &n in &spec.n_values {
        for k in spec.k_rule.values(n) {
            for &algo in &spec.algos {
                // circle growing alone has no cutoff; collapse the list
                let cutoffs: Vec<f64> = if algo == AlgoLabel::Cg { vec![0.0] } else { spec.cutoffs.clone() };
                for cutoff in cutoffs {
                    for seed in 0..spec.seeds {
                        runs.push(RunDesc {
                            n,
                            k,
                            metric: spec.metric,
                            kind: spec.kind,
                            algo,
                            cutoff,
                            seed,
                            ratio: spec.ratio,
                        });
                    }
                }
            }
        }
    }
    runs
}

fn execute(desc: &RunDesc, offsets: &SortedOffsets) -> Result<BenchRow> {
    let instance = Instance::random(desc.n, desc.k, desc.metric, desc.kind, desc.seed)?;
    let config = desc.algo.config(desc.cutoff, desc.ratio);
    let run = run_hybrid(&instance, offsets, &config)?;
    Ok(BenchRow::from_stats(desc, &run.stats))
}

/// Runs the sweep and returns one row per run plus one average row per
/// configuration, in spec order. `jobs` > 1 spreads runs over a worker
/// pool; rows still come back in spec order, but timings then contend for
/// cores, so keep jobs at 1 when absolute times matter.
pub fn run_sweep(spec: &SweepSpec, jobs: usize) -> Result<Vec<BenchRow>> {
    let runs = expand_runs(spec);

    // the offset list is built once per grid side and shared by all runs
    let mut offsets: HashMap<u32, SortedOffsets> = HashMap::new();
    for desc in &runs {
        offsets
            .entry(desc.n)
            .or_insert_with(|| SortedOffsets::build(desc.n, desc.metric));
    }

    let mut rows: Vec<Option<BenchRow>> = vec![None; runs.len()];
    if jobs <= 1 {
        for (slot, desc) in rows.iter_mut().zip(&runs) {
            *slot = Some(execute(desc, &offsets[&desc.n])?);
        }
    } else {
        let next = AtomicUsize::new(0);
        let results: Vec<Mutex<Option<Result<BenchRow>>>> =
            runs.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..jobs {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= runs.len() {
                        break;
                    }
                    let outcome = execute(&runs[i], &offsets[&runs[i].n]);
                    *results[i].lock().unwrap() = Some(outcome);
                });
            }
        });
        for (slot, cell) in rows.iter_mut().zip(results) {
            *slot = Some(cell.into_inner().unwrap().expect("worker stored a result")?);
        }
    }
    let mut rows: Vec<BenchRow> = rows.into_iter().map(|r| r.expect("all runs executed")).collect();

    let averages = average_rows(&rows);
    rows.extend(averages);
    Ok(rows)
}

/// Collapses the seed dimension: one average row per configuration, in
/// first-appearance order.
fn average_rows(rows: &[BenchRow]) -> Vec<BenchRow> {
    let mut order: Vec<(u32, usize, AlgoLabel, u64)> = Vec::new();
    let mut groups: HashMap<(u32, usize, AlgoLabel, u64), Vec<&BenchRow>> = HashMap::new();
    for row in rows {
        let key = (row.n, row.k, row.algo, row.cutoff.to_bits());
        if !groups.contains_key(&key) {
            order.push(key);
        }
        groups.entry(key).or_default().push(row);
    }
    order
        .into_iter()
        .map(|key| {
            let members = &groups[&key];
            let count = members.len() as f64;
            let mean = |f: fn(&BenchRow) -> f64| members.iter().map(|r| f(r)).sum::<f64>() / count;
            let mean_opt = |f: fn(&BenchRow) -> Option<f64>| {
                let vals: Vec<f64> = members.iter().filter_map(|r| f(r)).collect();
                (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
            };
            let first = members[0];
            BenchRow {
                seed: None,
                wall_s: mean(|r| r.wall_s),
                cg_s: mean(|r| r.cg_s),
                endgame_s: mean(|r| r.endgame_s),
                pairs_generated: mean(|r| r.pairs_generated),
                handoff_sites: mean(|r| r.handoff_sites),
                alpha: mean_opt(|r| r.alpha),
                nn_queries: mean_opt(|r| r.nn_queries),
                ..first.clone()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_minimal_spec() {
        let spec = parse_sweep("n = 100\nk = 1000\n").unwrap();
        assert_eq!(spec.n_values, vec![100]);
        assert_eq!(spec.k_rule, KRule::Absolute(vec![1000]));
        assert_eq!(spec.algos.len(), 7);
        assert_eq!(spec.seeds, 10);
    }

    #[test]
    fn parse_times_n_and_lists() {
        let text = "n = 500 1000\nk = x10\nmetric = l1\ncenters = real\nalgos = cg ph_ll\ncutoffs = 0 0.15 inf\nseeds = 3\nratio = sites\n";
        let spec = parse_sweep(text).unwrap();
        assert_eq!(spec.k_rule.values(500), vec![5000]);
        assert_eq!(spec.metric, Metric::Manhattan);
        assert_eq!(spec.kind, CenterKind::Real);
        assert_eq!(spec.algos, vec![AlgoLabel::Cg, AlgoLabel::PhLl]);
        assert!(spec.cutoffs[2].is_infinite());
        assert_eq!(spec.ratio, RatioKind::AvailableSites);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match parse_sweep("n = 10\nwhat = 3\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse_sweep("n = 10\nk = x2 x3\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(parse_sweep("k = 5\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn row_counts_match_the_configuration_grid() {
        let spec = parse_sweep("n = 8\nk = 3\nseeds = 10\ncutoffs = 0.15\n").unwrap();
        let rows = run_sweep(&spec, 1).unwrap();
        // 7 algorithms x 10 seeds + 7 averages
        assert_eq!(rows.len(), 77);
        assert_eq!(rows.iter().filter(|r| r.seed.is_none()).count(), 7);
    }

    #[test]
    fn csv_rows_are_deterministic_apart_from_timing() {
        let spec = parse_sweep("n = 8\nk = 2\nseeds = 2\nalgos = ph_ll nnc\n").unwrap();
        let a = run_sweep(&spec, 1).unwrap();
        let b = run_sweep(&spec, 1).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(strip_timing(&x.csv_line()), strip_timing(&y.csv_line()));
        }
    }

    #[test]
    fn parallel_sweep_matches_sequential_order() {
        let spec = parse_sweep("n = 8\nk = 2\nseeds = 3\nalgos = ps ph_el\n").unwrap();
        let seq = run_sweep(&spec, 1).unwrap();
        let par = run_sweep(&spec, 4).unwrap();
        assert_eq!(seq.len(), par.len());
        for (x, y) in seq.iter().zip(&par) {
            assert_eq!(strip_timing(&x.csv_line()), strip_timing(&y.csv_line()));
        }
    }

    fn strip_timing(line: &str) -> String {
        let cols: Vec<&str> = line.split(',').collect();
        let mut kept = cols.clone();
        kept[7] = "-";
        kept[8] = "-";
        kept[9] = "-";
        kept.join(",")
    }
}
