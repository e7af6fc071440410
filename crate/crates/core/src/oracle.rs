//! Brute-force k-nearest-neighbor reference.
//!
//! A full linear scan in quantized grid space. It shares only plain data
//! types with the tree and never touches tree or candidate-set code.

use rayon::prelude::*;

use crate::knn::{KnnResult, Neighbor};
use crate::morton::{PointId, QuantizedPoint};

fn sqdist(a: &QuantizedPoint, b: &QuantizedPoint) -> u64 {
    a.grid
        .iter()
        .zip(&b.grid)
        .map(|(&x, &y)| {
            let d = (x as i64 - y as i64).unsigned_abs();
            d * d
        })
        .sum()
}

/// Best `k` points of `points` for `query` under (squared distance, id),
/// skipping the point whose id equals `exclude`.
pub fn oracle_knn(points: &[QuantizedPoint], query: &QuantizedPoint, k: usize, exclude: Option<PointId>) -> KnnResult {
    let mut all: Vec<(u64, PointId)> = points
        .iter()
        .filter(|p| Some(p.id) != exclude)
        .map(|p| (sqdist(p, query), p.id))
        .collect();
    if k < all.len() {
        all.select_nth_unstable(k);
        all.truncate(k);
        all.shrink_to_fit();
    }
    all.sort_unstable();
    KnnResult {
        query: query.id,
        neighbors: all.into_iter().map(|(sqdist, id)| Neighbor { id, sqdist }).collect(),
    }
}

/// Reference neighbor graph: every point against every other, sorted by id.
pub fn oracle_graph(points: &[QuantizedPoint], k: usize) -> Vec<KnnResult> {
    let mut rows: Vec<KnnResult> = points
        .par_iter()
        .map(|p| oracle_knn(points, p, k, Some(p.id)))
        .collect();
    rows.sort_unstable_by_key(|r| r.query);
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts() -> Vec<QuantizedPoint> {
        [[0, 0, 0], [3, 4, 0], [6, 8, 0], [3, 4, 0], [1, 0, 0]]
            .iter()
            .enumerate()
            .map(|(i, g)| QuantizedPoint::new(i as u32, *g, 2))
            .collect()
    }

    #[test]
    fn two_points() {
        let p = &pts()[..2];
        let r = oracle_knn(p, &p[0], 1, Some(0));
        assert_eq!(r.ids(), vec![1]);
        assert_eq!(r.neighbors[0].sqdist, 25);
    }

    #[test]
    fn k_beyond_n_returns_everything_sorted() {
        let p = pts();
        let r = oracle_knn(&p, &p[0], 10, Some(0));
        assert_eq!(r.ids(), vec![4, 1, 3, 2]);
    }

    #[test]
    fn independent_of_input_order() {
        let p = pts();
        let mut rev = p.clone();
        rev.reverse();
        for k in 1..5 {
            assert_eq!(oracle_knn(&p, &p[2], k, Some(2)), oracle_knn(&rev, &p[2], k, Some(2)));
        }
    }
}
