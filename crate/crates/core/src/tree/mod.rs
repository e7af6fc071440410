//! The zd-tree: a kd-tree whose splits follow the bits of the Morton key.
//!
//! A node at `level` L is responsible for the Morton-aligned cell whose key
//! bits at or above L are fixed. An internal node splits on the highest key
//! bit below L where its points disagree; bits in between are empty cuts and
//! consume no node. Its children sit at `level = split_bit`, so a child's box
//! is the aligned cell on one side of the split plane, contained in the
//! parent's box.
//!
//! Nodes live in a pool owned by the tree and refer to each other by index.

mod build;
mod validate;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::morton::{GridBox, MortonKey, PointId, QuantizedPoint, Quantizer, RawPoint};
use crate::sort::sort_by_morton;

pub(crate) use build::{build_fragment, split_index, Fragment};
pub use validate::TreeViolation;

/// Index of a node in the tree's pool.
pub type NodeId = u32;

/// Default maximum leaf occupancy.
pub const DEFAULT_LEAF_CUTOFF: usize = 16;

/// Subtrees smaller than this are built, updated and searched sequentially.
pub(crate) const PAR_GRAIN: usize = 1000;

#[derive(Debug, Clone)]
pub enum NodeKind {
    Internal {
        split_bit: u32,
        left: NodeId,
        right: NodeId,
        /// Key bits shared by every point below this node; bits at and below
        /// `split_bit` are zero.
        prefix: MortonKey,
    },
    Leaf {
        /// Points in Morton order.
        points: Vec<QuantizedPoint>,
    },
}

#[derive(Debug, Clone)]
pub struct ZdNode {
    pub bbox: GridBox,
    pub parent: Option<NodeId>,
    pub level: u32,
    /// Number of points stored in this subtree.
    pub size: usize,
    pub kind: NodeKind,
}

impl ZdNode {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf { .. })
    }

    /// The points of a leaf; empty for internal nodes.
    pub fn points(&self) -> &[QuantizedPoint] {
        match &self.kind {
            NodeKind::Leaf { points } => points,
            NodeKind::Internal { .. } => &[],
        }
    }

    pub fn children(&self) -> Option<(NodeId, NodeId)> {
        match self.kind {
            NodeKind::Internal { left, right, .. } => Some((left, right)),
            NodeKind::Leaf { .. } => None,
        }
    }

    pub(crate) fn vacant() -> Self {
        ZdNode {
            bbox: GridBox::new([0; 3], [0; 3], 2),
            parent: None,
            level: 0,
            size: 0,
            kind: NodeKind::Leaf { points: Vec::new() },
        }
    }
}

/// Presence bitmap over point ids.
#[derive(Debug, Clone, Default)]
pub(crate) struct IdSet {
    words: Vec<u64>,
    count: usize,
}

impl IdSet {
    pub fn contains(&self, id: PointId) -> bool {
        let w = id as usize / 64;
        w < self.words.len() && (self.words[w] >> (id % 64)) & 1 == 1
    }

    /// Returns false if `id` was already present.
    pub fn insert(&mut self, id: PointId) -> bool {
        let w = id as usize / 64;
        if w >= self.words.len() {
            self.words.resize(w + 1, 0);
        }
        let bit = 1u64 << (id % 64);
        let fresh = self.words[w] & bit == 0;
        self.words[w] |= bit;
        self.count += fresh as usize;
        fresh
    }

    pub fn remove(&mut self, id: PointId) -> bool {
        let w = id as usize / 64;
        if w >= self.words.len() {
            return false;
        }
        let bit = 1u64 << (id % 64);
        let had = self.words[w] & bit != 0;
        self.words[w] &= !bit;
        self.count -= had as usize;
        had
    }

    pub fn len(&self) -> usize {
        self.count
    }
}

/// A zd-tree over quantized points.
#[derive(Debug, Clone)]
pub struct ZdTree {
    pub(crate) nodes: Vec<ZdNode>,
    pub(crate) free: Vec<NodeId>,
    pub(crate) root: NodeId,
    pub(crate) quantizer: Quantizer,
    pub(crate) leaf_cutoff: usize,
    pub(crate) ids: IdSet,
}

impl ZdTree {
    /// Builds a tree from points already sorted by [`crate::morton_compare`].
    ///
    /// Sortedness is the caller's contract and is not checked; an unsorted
    /// input produces a tree that fails [`ZdTree::validate`].
    pub fn build_sorted(
        points: &[QuantizedPoint],
        quantizer: Quantizer,
        leaf_cutoff: usize,
    ) -> Result<Self> {
        if leaf_cutoff == 0 {
            return Err(Error::ZeroLeafCutoff);
        }
        let mut ids = IdSet::default();
        for p in points {
            if !ids.insert(p.id) {
                return Err(Error::DuplicateId(p.id));
            }
        }
        let Fragment { nodes } = build_fragment(points, quantizer.key_bits(), leaf_cutoff, quantizer.dim());
        Ok(ZdTree {
            nodes,
            free: Vec::new(),
            root: 0,
            quantizer,
            leaf_cutoff,
            ids,
        })
    }

    /// Sorts `points` by Morton order and builds the tree.
    pub fn build(
        mut points: Vec<QuantizedPoint>,
        quantizer: Quantizer,
        leaf_cutoff: usize,
    ) -> Result<Self> {
        sort_by_morton(&mut points, quantizer.key_bits());
        Self::build_sorted(&points, quantizer, leaf_cutoff)
    }

    /// Quantizes, sorts and builds in one step.
    pub fn from_raw(points: &[RawPoint], quantizer: Quantizer, leaf_cutoff: usize) -> Result<Self> {
        let q = quantizer.quantize_all(points)?;
        Self::build(q, quantizer, leaf_cutoff)
    }

    pub fn quantizer(&self) -> &Quantizer {
        &self.quantizer
    }

    pub fn dim(&self) -> usize {
        self.quantizer.dim()
    }

    pub fn leaf_cutoff(&self) -> usize {
        self.leaf_cutoff
    }

    pub fn len(&self) -> usize {
        self.nodes[self.root as usize].size
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    #[inline]
    pub fn node(&self, id: NodeId) -> &ZdNode {
        &self.nodes[id as usize]
    }

    /// Whether a point with this id is stored.
    pub fn contains_id(&self, id: PointId) -> bool {
        self.ids.contains(id)
    }

    /// Number of live nodes.
    pub fn node_count(&self) -> usize {
        self.nodes.len() - self.free.len()
    }

    /// Longest root-to-leaf path, in edges.
    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(self.root, 0usize)];
        while let Some((id, d)) = stack.pop() {
            match self.node(id).kind {
                NodeKind::Internal { left, right, .. } => {
                    stack.push((left, d + 1));
                    stack.push((right, d + 1));
                }
                NodeKind::Leaf { .. } => best = best.max(d),
            }
        }
        best
    }

    /// Leaves of the subtree at `id` in left-to-right (Morton) order.
    pub fn leaves_under(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(id) = stack.pop() {
            match self.node(id).kind {
                NodeKind::Internal { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
                NodeKind::Leaf { .. } => out.push(id),
            }
        }
        out
    }

    /// All leaves in Morton order.
    pub fn leaves(&self) -> Vec<NodeId> {
        self.leaves_under(self.root)
    }

    /// Stored points in Morton order.
    pub fn points(&self) -> impl Iterator<Item = &QuantizedPoint> + '_ {
        self.leaves()
            .into_iter()
            .flat_map(move |l| self.node(l).points().iter())
    }

    /// Points of the subtree at `id`, in Morton order.
    pub(crate) fn collect_points(&self, id: NodeId) -> Vec<QuantizedPoint> {
        let mut out = Vec::with_capacity(self.node(id).size);
        for leaf in self.leaves_under(id) {
            out.extend_from_slice(self.node(leaf).points());
        }
        out
    }

    /// Flattened leaf contents: one id list per leaf, in traversal order.
    pub fn leaf_contents(&self) -> Vec<Vec<PointId>> {
        self.leaves()
            .par_iter()
            .map(|&l| self.node(l).points().iter().map(|p| p.id).collect())
            .collect()
    }

    /// Checks every structural invariant; returns the first violation found.
    pub fn validate(&self) -> Result<(), TreeViolation> {
        validate::validate(self)
    }
}
