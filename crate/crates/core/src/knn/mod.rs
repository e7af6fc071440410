//! k-nearest-neighbor queries over a [`ZdTree`](crate::ZdTree).
//!
//! Three strategies share one candidate set and one pruning rule:
//!
//! - **root**: downward search from the root ([`ZdTree::knn_root`]);
//! - **leaf**: upward search from the leaf that already holds an in-set
//!   point, searching each sibling on the way up ([`ZdTree::search_up`]);
//! - **bit**: descend by the query's Morton bits to its leaf, then search up
//!   ([`ZdTree::knn_bit`]).
//!
//! All three return the exact best `k` under (squared distance, id).
//!
//! [`ZdTree::knn_root`]: crate::ZdTree::knn_root
//! [`ZdTree::search_up`]: crate::ZdTree::search_up
//! [`ZdTree::knn_bit`]: crate::ZdTree::knn_bit

mod graph;
mod neighbors;
mod search;

use std::fmt;
use std::str::FromStr;

pub use neighbors::{Neighbor, NeighborSet, INFINITE_RADIUS, LINEAR_MAX_K};

use crate::morton::{MortonKey, PointId, QuantizedPoint};

/// A query position on the tree's grid.
#[derive(Debug, Clone, Copy)]
pub struct Query {
    pub id: PointId,
    pub grid: [u32; 3],
    pub key: MortonKey,
    /// Stored id that must not be reported (the query itself).
    pub exclude: Option<PointId>,
}

impl Query {
    /// Query for a stored point; the point never reports itself.
    pub fn in_set(p: &QuantizedPoint) -> Self {
        Query {
            id: p.id,
            grid: p.grid,
            key: p.key,
            exclude: Some(p.id),
        }
    }

    /// Query for a position that is not part of the tree.
    pub fn external(p: &QuantizedPoint) -> Self {
        Query {
            exclude: None,
            ..Self::in_set(p)
        }
    }
}

/// Neighbors of one query ascending by (squared distance, id).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnnResult {
    pub query: PointId,
    pub neighbors: Vec<Neighbor>,
}

impl KnnResult {
    pub fn new(query: PointId, set: NeighborSet) -> Self {
        KnnResult {
            query,
            neighbors: set.into_sorted(),
        }
    }

    pub fn ids(&self) -> Vec<PointId> {
        self.neighbors.iter().map(|n| n.id).collect()
    }
}

/// Search strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Root,
    Leaf,
    Bit,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Root, Variant::Leaf, Variant::Bit];
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Root => "root",
            Variant::Leaf => "leaf",
            Variant::Bit => "bit",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "root" => Ok(Variant::Root),
            "leaf" => Ok(Variant::Leaf),
            "bit" => Ok(Variant::Bit),
            _ => Err(format!("unknown variant `{s}` (expected root, leaf or bit)")),
        }
    }
}

/// Receives one tick per node on which the prune test runs.
pub trait VisitCounter {
    fn visit(&mut self);
}

/// Counter that compiles away.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoVisits;

impl VisitCounter for NoVisits {
    #[inline(always)]
    fn visit(&mut self) {}
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Visits(pub u64);

impl VisitCounter for Visits {
    #[inline(always)]
    fn visit(&mut self) {
        self.0 += 1;
    }
}

/// Mean and maximum nodes visited per query.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VisitStats {
    pub queries: usize,
    pub mean: f64,
    pub max: u64,
}

impl VisitStats {
    pub fn from_counts(counts: impl Iterator<Item = u64>) -> Self {
        let (mut n, mut sum, mut max) = (0usize, 0u64, 0u64);
        for c in counts {
            n += 1;
            sum += c;
            max = max.max(c);
        }
        VisitStats {
            queries: n,
            mean: if n == 0 { 0.0 } else { sum as f64 / n as f64 },
            max,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::morton::{GridBox, Quantizer};
    use crate::oracle::oracle_knn;
    use crate::tree::ZdTree;
    use proptest::prelude::*;

    fn grid_tree(points: &[[u32; 3]], dim: usize, bits: u32, cutoff: usize) -> ZdTree {
        let q = Quantizer::unshifted(dim, &vec![0.0; dim], &vec![1.0; dim], bits).unwrap();
        let pts = points
            .iter()
            .enumerate()
            .map(|(i, g)| QuantizedPoint::new(i as u32, *g, dim))
            .collect();
        ZdTree::build(pts, q, cutoff).unwrap()
    }

    fn stored(t: &ZdTree, id: PointId) -> QuantizedPoint {
        *t.points().find(|p| p.id == id).unwrap()
    }

    #[test]
    fn single_point_excludes_itself() {
        let t = grid_tree(&[[4, 4, 0]], 2, 8, 16);
        let q = Query::in_set(&stored(&t, 0));
        assert!(t.knn_root(&q, 1).unwrap().neighbors.is_empty());
        assert!(t.knn_bit(&q, 1).unwrap().neighbors.is_empty());
    }

    #[test]
    fn two_points_name_each_other() {
        let t = grid_tree(&[[1, 1, 0], [9, 3, 0]], 2, 8, 16);
        let q = Query::in_set(&stored(&t, 0));
        let r = t.search_up(t.root(), &q, 1).unwrap();
        assert_eq!(r.ids(), vec![1]);
        assert_eq!(r.neighbors[0].sqdist, 64 + 4);
        assert_eq!(t.knn_bit(&q, 1).unwrap().ids(), vec![1]);
        let g = t.knn_graph(1, Variant::Leaf).unwrap();
        assert_eq!(g[0].ids(), vec![1]);
        assert_eq!(g[1].ids(), vec![0]);
    }

    #[test]
    fn collinear_points() {
        let t = grid_tree(&[[0, 0, 0], [10, 0, 0], [100, 0, 0]], 2, 8, 1);
        let q = Query::in_set(&stored(&t, 1));
        let r = t.knn_root(&q, 1).unwrap();
        assert_eq!(r.ids(), vec![0]);
        assert_eq!(r.neighbors[0].sqdist, 100);
    }

    #[test]
    fn two_by_two_grid_ties_resolve_by_id() {
        let t = grid_tree(&[[0, 0, 0], [0, 1, 0], [1, 0, 0], [1, 1, 0]], 2, 1, 1);
        let q = Query::in_set(&stored(&t, 0));
        let leaf = t.locate_leaf(&q);
        assert_eq!(t.node(leaf).points()[0].id, 0);
        let mut v = Visits::default();
        let r = t.search_up_with(leaf, &q, 1, &mut v).unwrap();
        assert_eq!(r.ids(), vec![1]);
        assert!(v.0 <= t.node_count() as u64);

        let corner = Query::in_set(&stored(&t, 3));
        let leaf = t.locate_leaf(&corner);
        assert_eq!(t.node(leaf).points()[0].grid, [1, 1, 0]);
    }

    #[test]
    fn duplicates_stop_at_the_leaf() {
        // Five copies of one position, one far point; k = 3 exact duplicates.
        let mut pts = vec![[7, 7, 7]; 5];
        pts.push([200, 3, 90]);
        let t = grid_tree(&pts, 3, 8, 6);
        assert!(!t.node(t.root()).is_leaf());
        let q = Query::in_set(&stored(&t, 0));
        let mut v = Visits::default();
        let r = t.search_up_with(t.locate_leaf(&q), &q, 3, &mut v).unwrap();
        assert_eq!(r.ids(), vec![1, 2, 3]);
        assert!(r.neighbors.iter().all(|n| n.sqdist == 0));
        assert_eq!(v.0, 1);
    }

    #[test]
    fn single_leaf_counts_one_visit() {
        let t = grid_tree(&[[1, 2, 0], [5, 5, 0], [9, 1, 0]], 2, 8, 16);
        for variant in Variant::ALL {
            let (_, stats) = t.knn_graph_with_stats(1, variant).unwrap();
            assert_eq!(stats.max, 1, "{variant}");
        }
    }

    #[test]
    fn search_up_rejects_foreign_start() {
        let t = grid_tree(&[[0, 0, 0], [0, 1, 0], [1, 0, 0], [1, 1, 0]], 2, 1, 1);
        let q = Query::in_set(&stored(&t, 0));
        let far_leaf = t.locate_leaf(&Query::in_set(&stored(&t, 3)));
        assert!(matches!(t.search_up(far_leaf, &q, 1), Err(Error::QueryOutsideNode)));
        assert!(matches!(t.knn_root(&q, 0), Err(Error::ZeroK)));
    }

    #[test]
    fn external_query_lands_in_an_empty_cut() {
        // Two clusters far apart leave the middle of the grid as an empty cut.
        let mut pts = Vec::new();
        for i in 0..8 {
            pts.push([i, i % 3, 0]);
            pts.push([240 + i, 250 - i % 3, 0]);
        }
        let t = grid_tree(&pts, 2, 8, 4);
        let probe = QuantizedPoint::new(999, [100, 130, 0], 2);
        let q = Query::external(&probe);
        let start = t.locate_leaf(&q);
        assert!(t.node(start).bbox.contains(&probe.grid));
        let all: Vec<QuantizedPoint> = t.points().copied().collect();
        let expected = oracle_knn(&all, &probe, 3, None);
        assert_eq!(t.knn_bit(&q, 3).unwrap().neighbors, expected.neighbors);
        assert_eq!(t.knn_root(&q, 3).unwrap().neighbors, expected.neighbors);
    }

    #[test]
    fn child_order_matches_doubled_center_distance() {
        let t = crate::tree::tests::uniform_tree(3_000, 3, 4, 21);
        let mut rng_grid = 12345u64;
        for _ in 0..2_000 {
            rng_grid = rng_grid.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let g = [
                (rng_grid >> 12) as u32 % (1 << 20),
                (rng_grid >> 32) as u32 % (1 << 20),
                (rng_grid >> 44) as u32 % (1 << 20),
            ];
            let mut node = t.root();
            while let Some((l, r)) = t.node(node).children() {
                let dist2 = |b: &GridBox| -> u128 {
                    (0..3)
                        .map(|a| {
                            let c = b.lo[a] as i128 + b.hi[a] as i128;
                            let d = 2 * g[a] as i128 - c;
                            (d * d) as u128
                        })
                        .sum()
                };
                let (dl, dr) = (dist2(&t.node(l).bbox), dist2(&t.node(r).bbox));
                assert_ne!(dl, dr);
                let crate::tree::NodeKind::Internal { split_bit, .. } = t.node(node).kind else {
                    unreachable!()
                };
                let axis = crate::morton::bit_axis(split_bit, 3);
                assert_eq!(dl < dr, g[axis] < t.node(r).bbox.lo[axis]);
                node = if dl < dr { l } else { r };
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn prune_soundness_and_variant_agreement(
            pts in prop::collection::vec(prop::array::uniform3(0u32..64), 1..120),
            k in 1usize..12,
            cutoff in 1usize..6,
        ) {
            let pts: Vec<[u32; 3]> = pts.into_iter().map(|g| [g[0], g[1], 0]).collect();
            let t = grid_tree(&pts, 2, 6, cutoff);
            let all: Vec<QuantizedPoint> = t.points().copied().collect();
            for p in &all {
                let q = Query::in_set(p);
                let expected = oracle_knn(&all, p, k, Some(p.id));
                prop_assert_eq!(&t.knn_root(&q, k).unwrap().neighbors, &expected.neighbors);
                prop_assert_eq!(&t.knn_bit(&q, k).unwrap().neighbors, &expected.neighbors);
                let leaf = t.locate_leaf(&q);
                prop_assert_eq!(&t.search_up(leaf, &q, k).unwrap().neighbors, &expected.neighbors);
            }
        }
    }
}
