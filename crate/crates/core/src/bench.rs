//! Timing harness behind the benchmark commands.
//!
//! Every timed cell runs once to warm up, then [`TIMED_RUNS`] more times;
//! the median wall-clock time is reported.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::datagen::{gen_uniform_cube, Distribution};
use crate::error::{Error, Result};
use crate::knn::Variant;
use crate::morton::{QuantizedPoint, Quantizer};
use crate::tree::ZdTree;

pub const TIMED_RUNS: usize = 3;

/// Batch sizes swept by default, 1 through 10^6.
pub const DEFAULT_BATCH_SIZES: [usize; 7] = [1, 10, 100, 1_000, 10_000, 100_000, 1_000_000];

/// Small batches are repeated until at least this many points are timed.
const MIN_TIMED_POINTS: usize = 10_000;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Median seconds of `f` over [`TIMED_RUNS`] runs after a warm-up, with
/// the result of the last run.
pub fn median_time<T>(mut f: impl FnMut() -> T) -> (f64, T) {
    let mut last = f();
    let mut times = Vec::with_capacity(TIMED_RUNS);
    for _ in 0..TIMED_RUNS {
        let t = Instant::now();
        last = f();
        times.push(t.elapsed().as_secs_f64());
    }
    (median(times), last)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateCost {
    pub batch_size: usize,
    pub insert_s_per_pt: f64,
    pub delete_s_per_pt: f64,
}

/// Per-point cost of batch insertion and deletion on a tree of `n_base`
/// uniform points, for each batch size.
///
/// A batch size below [`MIN_TIMED_POINTS`] is timed as a run of several
/// consecutive batches of that size. Each run inserts points not seen
/// before and deletes them again, so every run starts from the same tree.
pub fn update_cost_probe(
    n_base: usize,
    dim: usize,
    batch_sizes: &[usize],
    seed: u64,
    leaf_cutoff: usize,
) -> Result<Vec<UpdateCost>> {
    if batch_sizes.contains(&0) {
        return Err(Error::Config("batch sizes must be positive".into()));
    }
    let per_run = batch_sizes
        .iter()
        .map(|&b| b * (MIN_TIMED_POINTS / b).max(1))
        .max()
        .unwrap_or(0);
    let extra = per_run * (TIMED_RUNS + 1);
    let cloud = gen_uniform_cube(n_base + extra, dim, seed)?;
    let q = Quantizer::unit_cube(dim, seed)?;
    let all = cloud.quantize(&q)?;
    let (base, spare) = all.split_at(n_base);
    let mut tree = ZdTree::build(base.to_vec(), q, leaf_cutoff)?;

    let mut out = Vec::with_capacity(batch_sizes.len());
    for &b in batch_sizes {
        let reps = (MIN_TIMED_POINTS / b).max(1);
        let (mut ins, mut del) = (Vec::new(), Vec::new());
        for run in 0..=TIMED_RUNS {
            let batches: Vec<&[QuantizedPoint]> = spare[run * per_run..][..b * reps].chunks(b).collect();
            let owned: Vec<Vec<QuantizedPoint>> = batches.iter().map(|c| c.to_vec()).collect();
            let t = Instant::now();
            for batch in owned {
                tree.batch_insert(batch)?;
            }
            let ti = t.elapsed().as_secs_f64();
            let owned: Vec<Vec<QuantizedPoint>> = batches.iter().map(|c| c.to_vec()).collect();
            let t = Instant::now();
            for batch in owned {
                tree.batch_delete(batch)?;
            }
            let td = t.elapsed().as_secs_f64();
            if run > 0 {
                ins.push(ti);
                del.push(td);
            }
        }
        let pts = (b * reps) as f64;
        out.push(UpdateCost {
            batch_size: b,
            insert_s_per_pt: median(ins) / pts,
            delete_s_per_pt: median(del) / pts,
        });
    }
    Ok(out)
}

/// Whether `values` (paired with increasing sizes) never rises by more than
/// `tolerance` from one size to the next, considering sizes from `from` on.
pub fn nonincreasing_from(points: &[(usize, f64)], from: usize, tolerance: f64) -> bool {
    let tail: Vec<f64> = points.iter().filter(|(s, _)| *s >= from).map(|(_, v)| *v).collect();
    tail.windows(2).all(|w| w[1] <= w[0] * (1.0 + tolerance))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleAxis {
    N,
    K,
    Threads,
}

impl fmt::Display for ScaleAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScaleAxis::N => "n",
            ScaleAxis::K => "k",
            ScaleAxis::Threads => "threads",
        })
    }
}

impl FromStr for ScaleAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n" => Ok(ScaleAxis::N),
            "k" => Ok(ScaleAxis::K),
            "threads" => Ok(ScaleAxis::Threads),
            _ => Err(Error::Config(format!("unknown axis `{s}` (expected n, k or threads)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScaleConfig {
    pub distribution: Distribution,
    pub n: usize,
    pub k: usize,
    pub variant: Variant,
    pub leaf_cutoff: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleRow {
    pub axis: ScaleAxis,
    pub value: usize,
    pub build_s: f64,
    pub query_s: f64,
    pub total_s: f64,
    /// Seconds per point on the n axis, per neighbor on the k axis, and
    /// threads times seconds on the threads axis.
    pub metric: f64,
}

/// Median build and k-NN graph times for one configuration.
pub fn time_build_and_graph(cfg: &ScaleConfig) -> Result<(f64, f64)> {
    let cloud = cfg.distribution.generate(cfg.n, cfg.seed);
    let q = Quantizer::unit_cube(cloud.dim, cfg.seed)?;
    let pts = cloud.quantize(&q)?;
    let (build_s, tree) = median_time(|| ZdTree::build(pts.clone(), q.clone(), cfg.leaf_cutoff));
    let tree = tree?;
    let (query_s, graph) = median_time(|| tree.knn_graph(cfg.k, cfg.variant));
    graph?;
    Ok((build_s, query_s))
}

/// Sweeps one axis with the rest of `cfg` fixed.
pub fn scale_bench(axis: ScaleAxis, values: &[usize], cfg: &ScaleConfig) -> Result<Vec<ScaleRow>> {
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let mut c = cfg.clone();
        let (build_s, query_s) = match axis {
            ScaleAxis::N => {
                c.n = value;
                time_build_and_graph(&c)?
            }
            ScaleAxis::K => {
                c.k = value;
                time_build_and_graph(&c)?
            }
            ScaleAxis::Threads => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(value)
                    .build()
                    .map_err(|e| Error::Config(e.to_string()))?;
                pool.install(|| time_build_and_graph(&c))?
            }
        };
        let total_s = build_s + query_s;
        let metric = match axis {
            ScaleAxis::N => total_s / c.n.max(1) as f64,
            ScaleAxis::K => query_s / (c.n.max(1) * c.k) as f64,
            ScaleAxis::Threads => value as f64 * total_s,
        };
        rows.push(ScaleRow {
            axis,
            value,
            build_s,
            query_s,
            total_s,
            metric,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_runs() {
        let mut calls = 0;
        let (t, last) = median_time(|| {
            calls += 1;
            calls
        });
        assert_eq!(calls, 1 + TIMED_RUNS);
        assert_eq!(last, calls);
        assert!(t >= 0.0);
    }

    #[test]
    fn probe_has_one_row_per_size() {
        let rows = update_cost_probe(5_000, 2, &[1, 100, 3_000], 1, 16).unwrap();
        assert_eq!(rows.iter().map(|r| r.batch_size).collect::<Vec<_>>(), vec![1, 100, 3_000]);
        assert!(rows.iter().all(|r| r.insert_s_per_pt > 0.0 && r.delete_s_per_pt > 0.0));
        assert!(update_cost_probe(10, 2, &[0], 1, 16).is_err());
    }

    #[test]
    fn trend_check() {
        let c = [(1, 9.0), (1_000, 5.0), (10_000, 5.5), (100_000, 4.0)];
        assert!(nonincreasing_from(&c, 1_000, 0.2));
        assert!(!nonincreasing_from(&c, 1_000, 0.05));
        assert!(!nonincreasing_from(&[(1_000, 1.0), (10_000, 1.3)], 1_000, 0.2));
    }

    #[test]
    fn scale_rows() {
        let cfg = ScaleConfig {
            distribution: Distribution::Cube3,
            n: 2_000,
            k: 1,
            variant: Variant::Leaf,
            leaf_cutoff: 16,
            seed: 3,
        };
        let rows = scale_bench(ScaleAxis::Threads, &[1, 2], &cfg).unwrap();
        assert_eq!(rows.len(), 2);
        assert!((rows[1].metric - 2.0 * rows[1].total_s).abs() < 1e-12);
        let rows = scale_bench(ScaleAxis::K, &[1, 4], &cfg).unwrap();
        assert!((rows[1].metric - rows[1].query_s / 8_000.0).abs() < 1e-15);
    }
}
