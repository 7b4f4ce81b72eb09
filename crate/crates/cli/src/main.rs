//! Command-line front end: run matchers, k-means, benchmark sweeps, and
//! verification over instance files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use gridmatch::bench::{self, AlgoLabel, BenchRow};
use gridmatch::hybrid::run_hybrid;
use gridmatch::kmeans::{
    stable_kmeans_observed, CentroidWeighting, KMeansOptions, KMeansStatus,
};
use gridmatch::render::write_ppm;
use gridmatch::{
    verify_quotas, verify_stability, Assignment, CenterKind, Instance, Metric, RatioKind,
    SortedOffsets,
};

#[derive(Parser)]
#[command(name = "gridmatch", version, about = "Stable matching of grid pixels to capacity-limited centers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Match an instance file and report or render the result
    Match(MatchArgs),
    /// Run stable k-means on random centers
    Kmeans(KmeansArgs),
    /// Run a benchmark sweep from a spec file
    Bench(BenchArgs),
    /// Check an assignment dump for stability and quota exactness
    Verify(VerifyArgs),
    /// Write a random instance file
    Gen(GenArgs),
}

#[derive(Args)]
struct MatchArgs {
    /// Instance file: `n k metric kind` header plus one center per line
    #[arg(long)]
    instance: PathBuf,
    /// Algorithm: cg, ps, ph_ep, ph_el, ph_lp, ph_ll, or nnc
    #[arg(long, default_value = "ph_ll")]
    algo: String,
    /// Switch threshold; `inf` skips circle growing entirely
    #[arg(long, default_value = "0.15")]
    cutoff: String,
    /// Cutoff numerator: `pairs` (available sites x centers) or `sites`
    #[arg(long, default_value = "pairs")]
    ratio: String,
    /// Write the region map as a binary PPM
    #[arg(long)]
    out_ppm: Option<PathBuf>,
    /// Append a CSV row (header included when the file is new)
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the assignment dump (`n k` header plus one center id per pixel)
    #[arg(long)]
    out_assignment: Option<PathBuf>,
}

#[derive(Args)]
struct KmeansArgs {
    #[arg(long)]
    n: u32,
    #[arg(long)]
    k: usize,
    /// Centroid weight exponent
    #[arg(long, default_value_t = 0.0)]
    p: f64,
    /// l2, l1, or linf
    #[arg(long, default_value = "l2")]
    metric: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    /// Per-iteration CSV: iteration, max displacement, component histogram
    #[arg(long)]
    report: Option<PathBuf>,
    /// Render the final assignment
    #[arg(long)]
    out_ppm: Option<PathBuf>,
    /// Directory for per-iteration PPM frames
    #[arg(long)]
    frames: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Sweep spec file (see the bench module docs for the format)
    #[arg(long)]
    spec: PathBuf,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; more than 1 perturbs timings
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    assignment: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: u32,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value = "l2")]
    metric: String,
    #[arg(long, default_value = "int")]
    kind: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Match(args) => run_match(args),
        Command::Kmeans(args) => run_kmeans(args),
        Command::Bench(args) => run_bench(args),
        Command::Verify(args) => run_verify(args),
        Command::Gen(args) => run_gen(args),
    }
}

fn parse_metric(s: &str) -> Result<Metric> {
    Metric::from_token(s).with_context(|| format!("unknown metric `{s}` (expected l2, l1, or linf)"))
}

fn parse_kind(s: &str) -> Result<CenterKind> {
    CenterKind::from_token(s).with_context(|| format!("unknown center kind `{s}` (expected int or real)"))
}

fn parse_algo(s: &str) -> Result<AlgoLabel> {
    AlgoLabel::from_token(s).with_context(|| {
        format!("unknown algorithm `{s}` (expected cg, ps, ph_ep, ph_el, ph_lp, ph_ll, or nnc)")
    })
}

fn parse_cutoff(s: &str) -> Result<f64> {
    let v = if s == "inf" {
        f64::INFINITY
    } else {
        s.parse::<f64>().with_context(|| format!("bad cutoff `{s}`"))?
    };
    if v < 0.0 {
        bail!("cutoff must be nonnegative");
    }
    Ok(v)
}

fn parse_ratio(s: &str) -> Result<RatioKind> {
    match s {
        "pairs" => Ok(RatioKind::AvailablePairs),
        "sites" => Ok(RatioKind::AvailableSites),
        other => bail!("unknown ratio `{other}` (expected pairs or sites)"),
    }
}

fn run_match(args: MatchArgs) -> Result<()> {
    let instance = Instance::from_path(&args.instance)
        .with_context(|| format!("reading {}", args.instance.display()))?;
    let algo = parse_algo(&args.algo)?;
    let cutoff = parse_cutoff(&args.cutoff)?;
    let ratio = parse_ratio(&args.ratio)?;

    let offsets = SortedOffsets::build(instance.n(), instance.metric());
    let config = algo.config(cutoff, ratio);
    let run = run_hybrid(&instance, &offsets, &config)?;

    println!(
        "matched n={} k={} {} {} with {} in {:.3}s (circle growing {:.3}s, endgame {:.3}s)",
        instance.n(),
        instance.k(),
        instance.metric(),
        instance.kind(),
        algo.token(),
        run.stats.wall.as_secs_f64(),
        run.stats.circle_growing.as_secs_f64(),
        run.stats.endgame.as_secs_f64(),
    );
    println!(
        "pairs_generated={} handoff_m={}{}{}",
        run.stats.pairs_generated,
        run.stats.handoff_sites,
        run.stats.alpha.map_or(String::new(), |a| format!(" alpha={a}")),
        run.stats.nn_queries.map_or(String::new(), |q| format!(" nn_queries={q}")),
    );

    if let Some(path) = &args.out_ppm {
        write_ppm(path, &run.assignment, instance.centers())?;
        println!("wrote {}", path.display());
    }
    if let Some(path) = &args.out_assignment {
        let mut out = Vec::new();
        run.assignment.write_to(&mut out)?;
        fs::write(path, out)?;
        println!("wrote {}", path.display());
    }
    if let Some(path) = &args.report {
        let row = BenchRow {
            n: instance.n(),
            k: instance.k(),
            metric: instance.metric(),
            kind: instance.kind(),
            algo,
            cutoff,
            seed: None,
            wall_s: run.stats.wall.as_secs_f64(),
            cg_s: run.stats.circle_growing.as_secs_f64(),
            endgame_s: run.stats.endgame.as_secs_f64(),
            pairs_generated: run.stats.pairs_generated as f64,
            handoff_sites: run.stats.handoff_sites as f64,
            alpha: run.stats.alpha.map(|v| v as f64),
            nn_queries: run.stats.nn_queries.map(|v| v as f64),
        };
        append_csv_row(path, &row.csv_line_tagged("-"))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn append_csv_row(path: &Path, line: &str) -> Result<()> {
    let mut text = if path.exists() {
        fs::read_to_string(path)?
    } else {
        format!("{}\n", bench::CSV_HEADER)
    };
    text.push_str(line);
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn run_kmeans(args: KmeansArgs) -> Result<()> {
    let metric = parse_metric(&args.metric)?;
    let instance = Instance::random(args.n, args.k, metric, CenterKind::Real, args.seed)?;
    let options = KMeansOptions {
        weighting: CentroidWeighting::exponent(args.p),
        max_iters: args.max_iters,
        ..KMeansOptions::default()
    };

    if let Some(dir) = &args.frames {
        fs::create_dir_all(dir)?;
    }
    let frames = args.frames.clone();
    let run = stable_kmeans_observed(&instance, &options, |round, assignment, centers| {
        if let Some(dir) = &frames {
            let path = dir.join(format!("iter_{round:04}.ppm"));
            if let Err(e) = write_ppm(&path, assignment, centers) {
                eprintln!("frame {round}: {e}");
            }
        }
    })?;

    let status = match run.status {
        KMeansStatus::Converged => "converged",
        KMeansStatus::MaxIters => "max_iters",
        KMeansStatus::Oscillating => "oscillating",
    };
    let disconnected = run.connectivity.iter().filter(|&&c| c > 1).count();
    println!(
        "stable k-means n={} k={} p={} {}: {} after {} iterations, {} disconnected regions",
        args.n,
        args.k,
        args.p,
        metric,
        status,
        run.iterations.len(),
        disconnected,
    );

    if let Some(path) = &args.report {
        let mut csv = String::from("iteration,max_displacement,components_histogram\n");
        for (i, iter) in run.iterations.iter().enumerate() {
            csv.push_str(&format!(
                "{},{:.9},{}\n",
                i,
                iter.max_displacement,
                histogram(&iter.components)
            ));
        }
        fs::write(path, csv)?;
        println!("wrote {}", path.display());
    }
    if let Some(path) = &args.out_ppm {
        let final_centers: Vec<[f64; 2]> = run
            .iterations
            .last()
            .map(|it| it.centers.clone())
            .unwrap_or_else(|| instance.centers().to_vec());
        write_ppm(path, &run.assignment, &final_centers)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Renders component counts as `components:regions` pairs, e.g. `1:47;2:3`.
fn histogram(components: &[u32]) -> String {
    let mut counts: std::collections::BTreeMap<u32, u32> = std::collections::BTreeMap::new();
    for &c in components {
        *counts.entry(c).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|(c, regions)| format!("{c}:{regions}"))
        .collect::<Vec<_>>()
        .join(";")
}

fn run_bench(args: BenchArgs) -> Result<()> {
    let text = fs::read_to_string(&args.spec)
        .with_context(|| format!("reading {}", args.spec.display()))?;
    let spec = bench::parse_sweep(&text)?;
    let jobs = args.jobs.max(1);
    let rows = bench::run_sweep(&spec, jobs)?;
    fs::write(&args.out, bench::rows_to_csv(&rows))?;
    println!("wrote {} rows to {}", rows.len(), args.out.display());
    Ok(())
}

fn run_verify(args: VerifyArgs) -> Result<()> {
    let instance = Instance::from_path(&args.instance)
        .with_context(|| format!("reading {}", args.instance.display()))?;
    let assignment = Assignment::from_path(&args.assignment)
        .with_context(|| format!("reading {}", args.assignment.display()))?;

    let quotas_ok = verify_quotas(&assignment, &instance)?;
    let report = verify_stability(&assignment, &instance)?;
    println!(
        "quotas: {}  stability: {} ({} blocking pairs)",
        if quotas_ok { "exact" } else { "VIOLATED" },
        if report.is_stable() { "stable" } else { "UNSTABLE" },
        report.blocking.len(),
    );
    for pair in report.blocking.iter().take(10) {
        let (x, y) = instance.grid().coords(pair.pixel);
        println!("  blocking: pixel ({x}, {y}) and center {}", pair.center);
    }
    if report.blocking.len() > 10 {
        println!("  ... and {} more", report.blocking.len() - 10);
    }
    if !quotas_ok || !report.is_stable() {
        std::process::exit(1);
    }
    Ok(())
}

fn run_gen(args: GenArgs) -> Result<()> {
    let metric = parse_metric(&args.metric)?;
    let kind = parse_kind(&args.kind)?;
    let instance = Instance::random(args.n, args.k, metric, kind, args.seed)?;
    let mut out = Vec::new();
    instance.write_to(&mut out)?;
    fs::write(&args.out, out)?;
    println!("wrote {}", args.out.display());
    Ok(())
}
