use std::collections::BinaryHeap;

use crate::morton::PointId;

/// Above this `k` the candidate set switches from a sorted vector to a heap.
pub const LINEAR_MAX_K: usize = 40;

/// Radius of a set holding fewer than `k` candidates.
pub const INFINITE_RADIUS: u64 = u64::MAX;

/// One neighbor of a query: id and squared grid distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Neighbor {
    pub id: PointId,
    pub sqdist: u64,
}

#[derive(Debug, Clone)]
enum Store {
    /// Ascending by (sqdist, id).
    Linear(Vec<(u64, PointId)>),
    Heap(BinaryHeap<(u64, PointId)>),
}

/// The best `k` candidates seen so far, ordered by (squared distance, id).
#[derive(Debug, Clone)]
pub struct NeighborSet {
    k: usize,
    radius: u64,
    store: Store,
}

impl NeighborSet {
    pub fn new(k: usize) -> Self {
        Self::with_linear_max(k, LINEAR_MAX_K)
    }

    /// Uses the sorted-vector store for `k <= linear_max`, a heap otherwise.
    pub fn with_linear_max(k: usize, linear_max: usize) -> Self {
        let store = if k <= linear_max {
            Store::Linear(Vec::with_capacity(k + 1))
        } else {
            Store::Heap(BinaryHeap::with_capacity(k + 1))
        };
        NeighborSet {
            k,
            radius: INFINITE_RADIUS,
            store,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Squared distance of the current k-th candidate, or
    /// [`INFINITE_RADIUS`] while fewer than `k` are held.
    #[inline]
    pub fn radius(&self) -> u64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        match &self.store {
            Store::Linear(v) => v.len(),
            Store::Heap(h) => h.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Offers a candidate; returns true if it was kept.
    #[inline]
    pub fn insert(&mut self, id: PointId, sqdist: u64) -> bool {
        if self.k == 0 {
            return false;
        }
        let cand = (sqdist, id);
        match &mut self.store {
            Store::Linear(v) => {
                if v.len() == self.k && cand >= v[self.k - 1] {
                    return false;
                }
                let mut pos = v.len();
                while pos > 0 && v[pos - 1] > cand {
                    pos -= 1;
                }
                v.insert(pos, cand);
                v.truncate(self.k);
                if v.len() == self.k {
                    self.radius = v[self.k - 1].0;
                }
            }
            Store::Heap(h) => {
                if h.len() < self.k {
                    h.push(cand);
                } else {
                    let mut top = h.peek_mut().expect("k > 0");
                    if cand >= *top {
                        return false;
                    }
                    *top = cand;
                }
                if h.len() == self.k {
                    self.radius = h.peek().expect("k > 0").0;
                }
            }
        }
        true
    }

    /// Candidates ascending by (squared distance, id).
    pub fn into_sorted(self) -> Vec<Neighbor> {
        let mut v = match self.store {
            Store::Linear(v) => v,
            Store::Heap(h) => h.into_sorted_vec(),
        };
        v.sort_unstable();
        v.into_iter().map(|(sqdist, id)| Neighbor { id, sqdist }).collect()
    }
}
