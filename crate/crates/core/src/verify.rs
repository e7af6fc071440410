//! Self-check suite: tree searches against the brute-force oracle, update
//! equivalences, invariant fuzzing and key-order contracts.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datagen::{gen_uniform_cube, Distribution};
use crate::error::{Error, Result};
use crate::knn::{Query, Variant};
use crate::morton::{box_sqdist, morton_compare, GridBox, QuantizedPoint, Quantizer};
use crate::oracle::{oracle_graph, oracle_knn};
use crate::tree::{ZdTree, DEFAULT_LEAF_CUTOFF};

/// A deliberately broken setup, to show the suite catches it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Trees are built from input that is not in Morton order.
    UnsortedBuild,
}

impl FromStr for Fault {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unsorted-build" => Ok(Fault::UnsortedBuild),
            _ => Err(Error::Config(format!("unknown fault `{s}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub n: usize,
    pub ks: Vec<usize>,
    pub seed: u64,
    pub leaf_cutoff: usize,
    pub equivalence_trials: usize,
    pub equivalence_n: usize,
    pub inverse_trials: usize,
    pub inverse_queries: usize,
    pub fuzz_rounds: usize,
    pub fuzz_n: usize,
    pub morton_trials: usize,
    pub fault: Option<Fault>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            n: 2_000,
            ks: vec![1, 5, 100],
            seed: 0,
            leaf_cutoff: DEFAULT_LEAF_CUTOFF,
            equivalence_trials: 10,
            equivalence_n: 10_000,
            inverse_trials: 5,
            inverse_queries: 100,
            fuzz_rounds: 20,
            fuzz_n: 10_000,
            morton_trials: 100_000,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyResult {
    pub name: String,
    pub checks: u64,
    pub failures: u64,
    /// Description of the first failing check.
    pub first_failure: Option<String>,
}

impl PropertyResult {
    pub fn new(name: impl Into<String>) -> Self {
        PropertyResult {
            name: name.into(),
            checks: 0,
            failures: 0,
            first_failure: None,
        }
    }

    pub fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(what());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.checks > 0
    }
}

impl fmt::Display for PropertyResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{status} {} checks={} failures={}", self.name, self.checks, self.failures)?;
        if let Some(why) = &self.first_failure {
            write!(f, " first: {why}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub properties: Vec<PropertyResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(PropertyResult::passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.properties {
            writeln!(f, "{p}")?;
        }
        write!(f, "{}", if self.passed() { "verify: PASS" } else { "verify: FAIL" })
    }
}

fn build(points: &[QuantizedPoint], q: &Quantizer, cutoff: usize, fault: Option<Fault>) -> Result<ZdTree> {
    match fault {
        None => ZdTree::build(points.to_vec(), q.clone(), cutoff),
        Some(Fault::UnsortedBuild) => {
            let mut v = points.to_vec();
            crate::sort::sort_by_morton(&mut v, q.key_bits());
            if v.len() > 1 {
                let last = v.len() - 1;
                v.swap(0, last);
            }
            ZdTree::build_sorted(&v, q.clone(), cutoff)
        }
    }
}

/// Every variant's k-NN graph against the oracle for one distribution.
/// Also records whether each built tree validates.
#[allow(clippy::too_many_arguments)]
pub fn oracle_equivalence(
    dist: Distribution,
    n: usize,
    ks: &[usize],
    seed: u64,
    cutoff: usize,
    fault: Option<Fault>,
    knn: &mut PropertyResult,
    valid: &mut PropertyResult,
) -> Result<()> {
    let cloud = dist.generate(n, seed);
    let q = Quantizer::unit_cube(cloud.dim, seed)?;
    let pts = cloud.quantize(&q)?;
    let tree = build(&pts, &q, cutoff, fault)?;
    valid.check(tree.validate().is_ok(), || format!("{dist}: {:?}", tree.validate()));
    for &k in ks {
        let expected = oracle_graph(&pts, k);
        for variant in Variant::ALL {
            let got = tree.knn_graph(k, variant)?;
            if got.len() != expected.len() {
                knn.check(false, || format!("{dist} k={k} {variant}: {} rows", got.len()));
                continue;
            }
            for (g, e) in got.iter().zip(&expected) {
                knn.check(g == e, || format!("{dist} k={k} {variant} query {}", e.query));
            }
        }
    }
    Ok(())
}

/// Leaf contents of batch insertion equal a fresh build of the union.
pub fn build_equivalence(
    trials: usize,
    n: usize,
    seed: u64,
    cutoff: usize,
    out: &mut PropertyResult,
) -> Result<()> {
    for t in 0..trials {
        let dim = 2 + t % 2;
        let cloud = gen_uniform_cube(n, dim, seed.wrapping_add(t as u64))?;
        let q = Quantizer::unit_cube(dim, seed ^ t as u64)?;
        let mut pts = cloud.quantize(&q)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31).wrapping_add(t as u64));
        pts.shuffle(&mut rng);
        let cut = rng.random_range(0..=n);
        let mut tree = ZdTree::build(pts[..cut].to_vec(), q.clone(), cutoff)?;
        tree.batch_insert(pts[cut..].to_vec())?;
        let fresh = ZdTree::build(pts, q, cutoff)?;
        out.check(tree.leaf_contents() == fresh.leaf_contents(), || {
            format!("trial {t}: split at {cut} of {n}")
        });
    }
    Ok(())
}

/// Inserting then deleting a batch leaves every query answer unchanged.
pub fn update_inverse(
    trials: usize,
    queries: usize,
    n: usize,
    seed: u64,
    cutoff: usize,
    out: &mut PropertyResult,
) -> Result<()> {
    for t in 0..trials {
        let dim = 2 + t % 2;
        let s = seed.wrapping_add(1_000 + t as u64);
        let cloud = gen_uniform_cube(2 * n + queries, dim, s)?;
        let q = Quantizer::unit_cube(dim, s)?;
        let pts = cloud.quantize(&q)?;
        let (base, rest) = pts.split_at(n);
        let (extra, probes) = rest.split_at(n);
        let mut tree = ZdTree::build(base.to_vec(), q, cutoff)?;
        let k = [1, 5, 20][t % 3];
        let before: Vec<_> = probes
            .iter()
            .map(|p| tree.knn_root(&Query::external(p), k))
            .collect::<Result<_>>()?;
        let m = ChaCha8Rng::seed_from_u64(s).random_range(1..=n);
        tree.batch_insert(extra[..m].to_vec())?;
        tree.batch_delete(extra[..m].to_vec())?;
        for (p, b) in probes.iter().zip(&before) {
            for variant in Variant::ALL {
                let q = Query::external(p);
                let after = match variant {
                    Variant::Root => tree.knn_root(&q, k)?,
                    _ => tree.knn_bit(&q, k)?,
                };
                out.check(&after == b, || format!("trial {t}: query {} {variant}", p.id));
            }
        }
    }
    Ok(())
}

/// Random mixed batches; the tree must validate after every round.
pub fn fuzz_invariants(rounds: usize, n: usize, seed: u64, cutoff: usize, out: &mut PropertyResult) -> Result<()> {
    let dim = 3;
    let cloud = gen_uniform_cube(2 * n, dim, seed.wrapping_add(7))?;
    let q = Quantizer::unit_cube(dim, seed)?;
    let all = cloud.quantize(&q)?;
    let mut stored: Vec<QuantizedPoint> = all[..n].to_vec();
    let mut spare: Vec<QuantizedPoint> = all[n..].to_vec();
    let mut tree = ZdTree::build(stored.clone(), q, cutoff)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(8));
    for round in 0..rounds {
        // Batch sizes span single points to a fifth of the tree.
        let size = 1usize << rng.random_range(0..=(n / 5).max(1).ilog2());
        if rng.random::<bool>() && !spare.is_empty() {
            let m = size.min(spare.len());
            let i = rng.random_range(0..=spare.len() - m);
            let batch: Vec<_> = spare.drain(i..i + m).collect();
            stored.extend_from_slice(&batch);
            tree.batch_insert(batch)?;
        } else {
            let m = size.min(stored.len());
            stored.shuffle(&mut rng);
            let batch: Vec<_> = stored.drain(..m).collect();
            spare.extend_from_slice(&batch);
            tree.batch_delete(batch)?;
        }
        let v = tree.validate();
        out.check(v.is_ok() && tree.len() == stored.len(), || format!("round {round}: {v:?}"));
    }
    Ok(())
}

fn random_grid(rng: &mut ChaCha8Rng, dim: usize, bits: u32) -> [u32; 3] {
    let mut g = [0u32; 3];
    for v in g.iter_mut().take(dim) {
        *v = rng.random_range(0..(1u64 << bits)) as u32;
    }
    g
}

/// Key-order contracts on random triples: the rectangle range property,
/// strict total order, and box distance against a direct computation.
pub fn morton_contracts(trials: usize, seed: u64, out: &mut PropertyResult) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..trials {
        let dim = 2 + t % 2;
        // Few bits make collisions and shared prefixes common.
        let bits = if t % 4 < 2 { 4 } else { 62 / dim as u32 };
        let g: Vec<[u32; 3]> = (0..3).map(|_| random_grid(&mut rng, dim, bits)).collect();
        let p: Vec<QuantizedPoint> = g
            .iter()
            .enumerate()
            .map(|(i, g)| QuantizedPoint::new(i as u32, *g, dim))
            .collect();

        let mut lo = [0u32; 3];
        let mut hi = [0u32; 3];
        for a in 0..dim {
            lo[a] = g[0][a].min(g[1][a]);
            hi[a] = g[0][a].max(g[1][a]);
        }
        let mut c = [0u32; 3];
        for a in 0..dim {
            c[a] = rng.random_range(lo[a]..=hi[a]);
        }
        let (kl, kh) = (
            QuantizedPoint::new(0, lo, dim).key,
            QuantizedPoint::new(0, hi, dim).key,
        );
        let kc = QuantizedPoint::new(0, c, dim).key;
        out.check(kl <= kc && kc <= kh, || format!("range: {lo:?} {c:?} {hi:?}"));

        let (a, b, z) = (&p[0], &p[1], &p[2]);
        let ab = morton_compare(a, b);
        let antisym = ab == morton_compare(b, a).reverse() && ab != Ordering::Equal;
        let trans = !(ab.is_le() && morton_compare(b, z).is_le()) || morton_compare(a, z).is_le();
        out.check(antisym && trans, || format!("order: {:?}", [a.grid, b.grid, z.grid]));

        let bx = GridBox::new(lo, hi, dim);
        let direct: u64 = (0..dim)
            .map(|ax| {
                let v = g[2][ax] as i64;
                let d = (lo[ax] as i64 - v).max(v - hi[ax] as i64).max(0) as u64;
                d * d
            })
            .sum();
        let d = box_sqdist(z, &bx);
        out.check(d == direct && (d == 0) == bx.contains(&z.grid), || {
            format!("box distance: {:?} to {bx:?}", z.grid)
        });
    }
}

/// Runs the full suite.
pub fn run_verify(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let mut knn = PropertyResult::new("oracle-equivalence");
    let mut valid = PropertyResult::new("built-trees-validate");
    for dist in Distribution::ALL {
        oracle_equivalence(dist, cfg.n, &cfg.ks, cfg.seed, cfg.leaf_cutoff, cfg.fault, &mut knn, &mut valid)?;
    }
    let mut equiv = PropertyResult::new("build-equivalence");
    build_equivalence(cfg.equivalence_trials, cfg.equivalence_n, cfg.seed, cfg.leaf_cutoff, &mut equiv)?;
    let mut inverse = PropertyResult::new("update-inverse");
    update_inverse(
        cfg.inverse_trials,
        cfg.inverse_queries,
        cfg.equivalence_n,
        cfg.seed,
        cfg.leaf_cutoff,
        &mut inverse,
    )?;
    let mut fuzz = PropertyResult::new("fuzz-invariants");
    fuzz_invariants(cfg.fuzz_rounds, cfg.fuzz_n, cfg.seed, cfg.leaf_cutoff, &mut fuzz)?;
    let mut morton = PropertyResult::new("morton-contracts");
    morton_contracts(cfg.morton_trials, cfg.seed, &mut morton);
    Ok(VerifyReport {
        properties: vec![valid, knn, equiv, inverse, fuzz, morton],
    })
}

/// Query answers of an arbitrary tree against the oracle, for spot checks.
pub fn spot_check(tree: &ZdTree, probes: &[QuantizedPoint], k: usize) -> Result<bool> {
    let pts: Vec<QuantizedPoint> = tree.points().copied().collect();
    for p in probes {
        let got = tree.knn_bit(&Query::external(p), k)?;
        if got != oracle_knn(&pts, p, k, None) {
            return Ok(false);
        }
    }
    Ok(true)
}
