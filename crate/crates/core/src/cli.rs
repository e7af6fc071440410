//! The `zdtree` command line: point generation, k-NN runs, benchmarks and
//! the self-check suite.
//!
//! Exit status is 0 on success, 1 when `verify` finds a failure, and 2 on a
//! usage or input error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::bench::{self, ScaleAxis, ScaleConfig, DEFAULT_BATCH_SIZES};
use crate::datagen::{Distribution, PointCloud};
use crate::error::{Error, Result};
use crate::io::{read_point_file, write_neighbor_rows, write_point_file};
use crate::knn::Variant;
use crate::morton::{default_bits, Quantizer};
use crate::tree::{ZdTree, DEFAULT_LEAF_CUTOFF};
use crate::verify::{run_verify, Fault, VerifyConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "zdtree", version, about = "k-nearest-neighbor search on zd-trees")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,

    /// Worker threads (default: all available cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    pub workers: Option<u32>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic point cloud to a point file.
    Generate(GenerateArgs),
    /// k-NN graph of a point file, as CSV.
    KnnGraph(KnnGraphArgs),
    /// k nearest base points of every point in a second file, as CSV.
    Query(QueryArgs),
    /// Per-point cost of batch insert and delete across batch sizes.
    UpdateBench(UpdateBenchArgs),
    /// Build and k-NN graph times along one axis: n, k or threads.
    ScaleBench(ScaleBenchArgs),
    /// Check searches and updates against brute force.
    Verify(VerifyArgs),
}

/// Options that fix how points map onto the tree's grid.
#[derive(Debug, Clone, Args)]
pub struct TreeArgs {
    /// Maximum points per leaf.
    #[arg(long, default_value_t = DEFAULT_LEAF_CUTOFF, value_parser = parse_positive)]
    pub leaf_cutoff: usize,
    /// Grid bits per axis (default 31 in 2D, 20 in 3D).
    #[arg(long)]
    pub bits_per_dim: Option<u32>,
    /// Seed for the grid shift and for generated data.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Lower corner of the universe box, on every axis.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub box_lo: f64,
    /// Upper corner of the universe box, on every axis.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub box_hi: f64,
}

impl TreeArgs {
    fn quantizer(&self, dim: usize) -> Result<Quantizer> {
        Quantizer::new(
            dim,
            &vec![self.box_lo; dim],
            &vec![self.box_hi; dim],
            self.bits_per_dim.unwrap_or_else(|| default_bits(dim)),
            self.seed,
        )
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// One of 2d-cube, 3d-cube, 3d-sphere, 3d-plummer, 2d-kuzmin.
    #[arg(long)]
    pub dist: Distribution,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KnnGraphArgs {
    /// Point file.
    pub input: PathBuf,
    #[arg(long, default_value_t = 1, value_parser = parse_positive)]
    pub k: usize,
    #[arg(long, default_value_t = Variant::Leaf)]
    pub variant: Variant,
    #[command(flatten)]
    pub tree: TreeArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Point file the tree is built on.
    pub base: PathBuf,
    /// Point file of queries.
    pub queries: PathBuf,
    #[arg(long, default_value_t = 1, value_parser = parse_positive)]
    pub k: usize,
    #[arg(long, default_value_t = Variant::Bit)]
    pub variant: Variant,
    /// Process queries in Morton order.
    #[arg(long)]
    pub presort: bool,
    #[command(flatten)]
    pub tree: TreeArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct UpdateBenchArgs {
    #[arg(long, default_value_t = 1_000_000)]
    pub n_base: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Comma-separated batch sizes.
    #[arg(long, value_delimiter = ',', value_parser = parse_positive)]
    pub batch_sizes: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_LEAF_CUTOFF, value_parser = parse_positive)]
    pub leaf_cutoff: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScaleBenchArgs {
    #[arg(long)]
    pub axis: ScaleAxis,
    /// Comma-separated values for the swept axis.
    #[arg(long, value_delimiter = ',', required = true, value_parser = parse_positive)]
    pub values: Vec<usize>,
    #[arg(long, default_value_t = Distribution::Cube3)]
    pub dist: Distribution,
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    #[arg(long, default_value_t = 1, value_parser = parse_positive)]
    pub k: usize,
    #[arg(long, default_value_t = Variant::Leaf)]
    pub variant: Variant,
    #[arg(long, default_value_t = DEFAULT_LEAF_CUTOFF, value_parser = parse_positive)]
    pub leaf_cutoff: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Points per distribution in the oracle comparison.
    #[arg(long, default_value_t = 2_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub fuzz_rounds: usize,
    /// Break the setup on purpose; the run must then fail.
    #[arg(long)]
    pub inject_fault: Option<Fault>,
}

fn parse_positive(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn out_err(path: Option<&Path>) -> impl Fn(io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.map_or_else(|| PathBuf::from("<stdout>"), Path::to_path_buf),
        source: e,
    }
}

/// What a successful command run concluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    VerifyFailed,
}

/// Parses `args` (program name first), runs the command, and returns the
/// process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cfg) {
        Ok(Outcome::Done) => EXIT_OK,
        Ok(Outcome::VerifyFailed) => EXIT_VERIFY_FAILED,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

/// Runs a parsed command on a pool of the requested size.
pub fn run(cfg: RunConfig) -> Result<Outcome> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        builder = builder.num_threads(w as usize);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| {
        let workers = rayon::current_num_threads();
        match cfg.command {
            Command::Generate(a) => generate(a).map(|_| Outcome::Done),
            Command::KnnGraph(a) => knn_graph(a, workers).map(|_| Outcome::Done),
            Command::Query(a) => query(a, workers).map(|_| Outcome::Done),
            Command::UpdateBench(a) => update_bench(a, workers).map(|_| Outcome::Done),
            Command::ScaleBench(a) => scale_bench(a, workers).map(|_| Outcome::Done),
            Command::Verify(a) => verify(a, workers),
        }
    })
}

fn generate(a: GenerateArgs) -> Result<()> {
    if a.n > u32::MAX as usize {
        return Err(Error::Config(format!("n = {} exceeds the id range", a.n)));
    }
    let cloud = a.dist.generate(a.n, a.seed);
    match &a.out {
        Some(p) => write_point_file(p, &cloud),
        None => {
            let mut w = output(None)?;
            crate::io::write_points(&mut w, &cloud)
                .and_then(|_| w.flush())
                .map_err(out_err(None))
        }
    }
}

fn build_tree(cloud: &PointCloud, tree: &TreeArgs) -> Result<(ZdTree, f64)> {
    let q = tree.quantizer(cloud.dim)?;
    let t = Instant::now();
    let built = ZdTree::from_raw(&cloud.points, q, tree.leaf_cutoff)?;
    Ok((built, t.elapsed().as_secs_f64()))
}

fn knn_graph(a: KnnGraphArgs, workers: usize) -> Result<()> {
    let cloud = read_point_file(&a.input)?;
    let (tree, build_s) = build_tree(&cloud, &a.tree)?;
    let t = Instant::now();
    let (rows, stats) = tree.knn_graph_with_stats(a.k, a.variant)?;
    let query_s = t.elapsed().as_secs_f64();
    let path = a.out.as_deref();
    let mut w = output(path)?;
    write_neighbor_rows(&mut w, &rows)
        .and_then(|_| {
            writeln!(
                w,
                "# n={} k={} variant={} build_s={build_s:.6} query_s={query_s:.6} visits_mean={:.3} visits_max={} workers={workers}",
                cloud.len(),
                a.k,
                a.variant,
                stats.mean,
                stats.max
            )
        })
        .and_then(|_| w.flush())
        .map_err(out_err(path))
}

fn query(a: QueryArgs, workers: usize) -> Result<()> {
    let base = read_point_file(&a.base)?;
    let queries = read_point_file(&a.queries)?;
    if base.dim != queries.dim {
        return Err(Error::DimensionMismatch {
            expected: base.dim,
            got: queries.dim,
        });
    }
    let (tree, build_s) = build_tree(&base, &a.tree)?;
    let mut qs = Vec::with_capacity(queries.len());
    let mut skipped = 0;
    for p in &queries.points {
        match tree.quantizer().quantize(p) {
            Ok(q) => qs.push(q),
            Err(e) => {
                eprintln!("query {}: skipped: {e}", p.id);
                skipped += 1;
            }
        }
    }
    let t = Instant::now();
    let (rows, stats) = tree.query_batch_with_stats(&qs, a.k, a.variant, a.presort)?;
    let query_s = t.elapsed().as_secs_f64();
    let path = a.out.as_deref();
    let mut w = output(path)?;
    write_neighbor_rows(&mut w, &rows)
        .and_then(|_| {
            writeln!(
                w,
                "# queries={} skipped={skipped} k={} variant={} presort={} build_s={build_s:.6} query_s={query_s:.6} visits_mean={:.3} visits_max={} workers={workers}",
                qs.len(),
                a.k,
                a.variant,
                a.presort,
                stats.mean,
                stats.max
            )
        })
        .and_then(|_| w.flush())
        .map_err(out_err(path))
}

fn update_bench(a: UpdateBenchArgs, workers: usize) -> Result<()> {
    let sizes = if a.batch_sizes.is_empty() {
        DEFAULT_BATCH_SIZES.to_vec()
    } else {
        a.batch_sizes.clone()
    };
    let curve = bench::update_cost_probe(a.n_base, a.dim, &sizes, a.seed, a.leaf_cutoff)?;
    let ins: Vec<(usize, f64)> = curve.iter().map(|c| (c.batch_size, c.insert_s_per_pt)).collect();
    let trend = bench::nonincreasing_from(&ins, 1_000, 0.2);
    let close = curve
        .iter()
        .all(|c| c.delete_s_per_pt <= 3.0 * c.insert_s_per_pt && c.insert_s_per_pt <= 3.0 * c.delete_s_per_pt);
    let path = a.out.as_deref();
    let mut w = output(path)?;
    (|| -> io::Result<()> {
        writeln!(w, "batch_size,insert_s_per_pt,delete_s_per_pt")?;
        for c in &curve {
            writeln!(w, "{},{:.6e},{:.6e}", c.batch_size, c.insert_s_per_pt, c.delete_s_per_pt)?;
        }
        writeln!(
            w,
            "# n_base={} dim={} nonincreasing_from_1000={trend} delete_within_3x={close} workers={workers}",
            a.n_base, a.dim
        )?;
        w.flush()
    })()
    .map_err(out_err(path))
}

fn scale_bench(a: ScaleBenchArgs, workers: usize) -> Result<()> {
    let cfg = ScaleConfig {
        distribution: a.dist,
        n: a.n,
        k: a.k,
        variant: a.variant,
        leaf_cutoff: a.leaf_cutoff,
        seed: a.seed,
    };
    let rows = bench::scale_bench(a.axis, &a.values, &cfg)?;
    let path = a.out.as_deref();
    let mut w = output(path)?;
    (|| -> io::Result<()> {
        writeln!(w, "axis,value,build_s,query_s,total_s,metric")?;
        for r in &rows {
            writeln!(
                w,
                "{},{},{:.6},{:.6},{:.6},{:.6e}",
                r.axis, r.value, r.build_s, r.query_s, r.total_s, r.metric
            )?;
        }
        writeln!(w, "# dist={} n={} k={} variant={} workers={workers}", a.dist, a.n, a.k, a.variant)?;
        w.flush()
    })()
    .map_err(out_err(path))
}

fn verify(a: VerifyArgs, workers: usize) -> Result<Outcome> {
    let cfg = VerifyConfig {
        n: a.n,
        seed: a.seed,
        fuzz_rounds: a.fuzz_rounds,
        fault: a.inject_fault,
        ..VerifyConfig::default()
    };
    let report = run_verify(&cfg)?;
    println!("{report}");
    println!("# workers={workers}");
    Ok(if report.passed() {
        Outcome::Done
    } else {
        Outcome::VerifyFailed
    })
}
