use super::{KnnResult, NeighborSet, NoVisits, Query, VisitCounter};
use crate::error::{Error, Result};
use crate::morton::{bit_axis, grid_sqdist};
use crate::tree::{NodeId, NodeKind, ZdTree};

impl ZdTree {
    /// Refines `set` with the points under `node` that can still beat its
    /// radius. Subtrees whose box lies farther than the radius are pruned;
    /// of two children, the one whose center is nearer the query goes first.
    pub fn search_down<V: VisitCounter>(&self, node: NodeId, q: &Query, set: &mut NeighborSet, visits: &mut V) {
        visits.visit();
        let n = self.node(node);
        if n.bbox.sqdist(&q.grid) > set.radius() {
            return;
        }
        match n.kind {
            NodeKind::Leaf { ref points } => {
                for p in points {
                    if Some(p.id) == q.exclude {
                        continue;
                    }
                    let d = grid_sqdist(&p.grid, &q.grid);
                    if d <= set.radius() {
                        set.insert(p.id, d);
                    }
                }
            }
            NodeKind::Internal {
                split_bit,
                left,
                right,
                ..
            } => {
                // Sibling cells are congruent and differ only along the split
                // axis, so the nearer center is the one on the query's side
                // of the plane at the right child's lower face.
                let axis = bit_axis(split_bit, self.dim());
                let (first, second) = if q.grid[axis] < self.node(right).bbox.lo[axis] {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search_down(first, q, set, visits);
                self.search_down(second, q, set, visits);
            }
        }
    }

    /// k nearest neighbors by downward search from the root.
    pub fn knn_root(&self, q: &Query, k: usize) -> Result<KnnResult> {
        self.knn_root_with(q, k, &mut NoVisits)
    }

    pub fn knn_root_with<V: VisitCounter>(&self, q: &Query, k: usize, visits: &mut V) -> Result<KnnResult> {
        if k == 0 {
            return Err(Error::ZeroK);
        }
        let mut set = NeighborSet::new(k);
        self.search_down(self.root(), q, &mut set, visits);
        Ok(KnnResult::new(q.id, set))
    }

    /// k nearest neighbors by upward search starting at `start`, which must
    /// contain the query position (normally the query's leaf).
    pub fn search_up(&self, start: NodeId, q: &Query, k: usize) -> Result<KnnResult> {
        self.search_up_with(start, q, k, &mut NoVisits)
    }

    pub fn search_up_with<V: VisitCounter>(
        &self,
        start: NodeId,
        q: &Query,
        k: usize,
        visits: &mut V,
    ) -> Result<KnnResult> {
        if k == 0 {
            return Err(Error::ZeroK);
        }
        if !self.node(start).bbox.contains(&q.grid) {
            return Err(Error::QueryOutsideNode);
        }
        let mut set = NeighborSet::new(k);
        self.search_up_unchecked(start, q, &mut set, visits);
        Ok(KnnResult::new(q.id, set))
    }

    pub(crate) fn search_up_unchecked<V: VisitCounter>(
        &self,
        start: NodeId,
        q: &Query,
        set: &mut NeighborSet,
        visits: &mut V,
    ) {
        self.search_down(start, q, set, visits);
        let mut current = start;
        while let Some(parent) = self.node(current).parent {
            // Stop once the candidate ball fits inside the current box.
            if self.node(current).bbox.interior_sqdist_unchecked(&q.grid) >= set.radius() {
                break;
            }
            let (left, right) = self.node(parent).children().expect("parent is internal");
            let sibling = if left == current { right } else { left };
            self.search_down(sibling, q, set, visits);
            current = parent;
        }
    }

    /// Descends by the query's key bits to the deepest node whose box holds
    /// the query: its leaf, or the internal node at which the query falls
    /// into an empty cut.
    pub fn locate_leaf(&self, q: &Query) -> NodeId {
        let mut current = self.root();
        while let NodeKind::Internal {
            split_bit,
            left,
            right,
            ..
        } = self.node(current).kind
        {
            let next = if q.key.bit(split_bit) { right } else { left };
            if !self.node(next).bbox.contains(&q.grid) {
                break;
            }
            current = next;
        }
        current
    }

    /// k nearest neighbors by locating the query's leaf, then searching up.
    pub fn knn_bit(&self, q: &Query, k: usize) -> Result<KnnResult> {
        self.knn_bit_with(q, k, &mut NoVisits)
    }

    pub fn knn_bit_with<V: VisitCounter>(&self, q: &Query, k: usize, visits: &mut V) -> Result<KnnResult> {
        if k == 0 {
            return Err(Error::ZeroK);
        }
        let start = self.locate_leaf(q);
        if !self.node(start).bbox.contains(&q.grid) {
            return Err(Error::QueryOutsideNode);
        }
        let mut set = NeighborSet::new(k);
        self.search_up_unchecked(start, q, &mut set, visits);
        Ok(KnnResult::new(q.id, set))
    }
}
