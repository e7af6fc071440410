use std::fmt;

use super::{NodeId, NodeKind, ZdTree};
use crate::morton::{morton_decode, morton_key, GridBox, MortonKey, PointId};

/// The first invariant violation found by [`ZdTree::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeViolation {
    /// A child's parent link does not name the node holding it.
    ParentLink { node: NodeId },
    /// Root is not at the top level or does not span the universe.
    Root,
    /// Split bit, child level or prefix is inconsistent.
    SplitBit { node: NodeId },
    /// A node's box is not the aligned cell implied by its level and prefix.
    BoxShape { node: NodeId },
    /// Internal node with fewer points than the leaf cutoff, or an empty child.
    Underfull { node: NodeId },
    /// A stored point's key does not match its grid coordinates.
    KeyMismatch { id: PointId },
    /// A point lies outside the box of the leaf holding it.
    BoxMembership { node: NodeId, id: PointId },
    /// A leaf over the cutoff whose points do not all share one position.
    LeafOverflow { node: NodeId },
    /// Leaf traversal is not strictly increasing in Morton order.
    MortonOrder { id: PointId },
    /// A node's size field disagrees with its contents.
    SizeMismatch { node: NodeId },
    /// The id index disagrees with the stored points.
    IdIndex { id: Option<PointId> },
    /// Live pool slots are not all reachable from the root.
    PoolAccounting { reachable: usize, live: usize },
}

impl fmt::Display for TreeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::error::Error for TreeViolation {}

fn cell_of(prefix: MortonKey, level: u32, dim: usize) -> GridBox {
    GridBox::cell(&morton_decode(prefix, dim), level, dim)
}

pub(super) fn validate(t: &ZdTree) -> Result<(), TreeViolation> {
    let dim = t.dim();
    let root = t.node(t.root);
    if root.parent.is_some() || root.level != t.quantizer.key_bits() || root.bbox != t.quantizer.universe() {
        return Err(TreeViolation::Root);
    }

    // Structure: links, levels, prefixes and cell boxes.
    let mut order = Vec::new();
    let mut stack = vec![t.root];
    while let Some(id) = stack.pop() {
        order.push(id);
        let n = t.node(id);
        let NodeKind::Internal {
            split_bit,
            left,
            right,
            prefix,
        } = n.kind
        else {
            continue;
        };
        if split_bit >= n.level || prefix.0 & !(u64::MAX << (split_bit + 1)) != 0 {
            return Err(TreeViolation::SplitBit { node: id });
        }
        if n.bbox != cell_of(prefix, n.level, dim) {
            return Err(TreeViolation::BoxShape { node: id });
        }
        for (child, side) in [(left, 0u64), (right, 1u64)] {
            let c = t.node(child);
            if c.parent != Some(id) {
                return Err(TreeViolation::ParentLink { node: child });
            }
            if c.level != split_bit {
                return Err(TreeViolation::SplitBit { node: child });
            }
            let child_prefix = MortonKey(prefix.0 | (side << split_bit));
            if c.bbox != cell_of(child_prefix, split_bit, dim) || !n.bbox.encloses(&c.bbox) {
                return Err(TreeViolation::BoxShape { node: child });
            }
            if let NodeKind::Internal { prefix: cp, .. } = c.kind {
                if cp.0 >> split_bit != child_prefix.0 >> split_bit {
                    return Err(TreeViolation::SplitBit { node: child });
                }
            }
        }
        stack.push(right);
        stack.push(left);
    }
    if order.len() != t.node_count() {
        return Err(TreeViolation::PoolAccounting {
            reachable: order.len(),
            live: t.node_count(),
        });
    }

    // Points: membership, keys, leaf occupancy and global Morton order.
    let mut prev: Option<(MortonKey, PointId)> = None;
    for &id in &order {
        let n = t.node(id);
        let NodeKind::Leaf { points } = &n.kind else {
            continue;
        };
        for p in points {
            if morton_key(&p.grid, dim) != p.key {
                return Err(TreeViolation::KeyMismatch { id: p.id });
            }
            if !n.bbox.contains(&p.grid) {
                return Err(TreeViolation::BoxMembership { node: id, id: p.id });
            }
            if prev.is_some_and(|q| q >= (p.key, p.id)) {
                return Err(TreeViolation::MortonOrder { id: p.id });
            }
            prev = Some((p.key, p.id));
        }
        if points.len() >= t.leaf_cutoff && points.iter().any(|p| p.key != points[0].key) {
            return Err(TreeViolation::LeafOverflow { node: id });
        }
    }

    // Sizes, bottom-up over the preorder list.
    for &id in order.iter().rev() {
        let n = t.node(id);
        let expected = match n.kind {
            NodeKind::Leaf { ref points } => points.len(),
            NodeKind::Internal { left, right, .. } => {
                let (l, r) = (t.node(left).size, t.node(right).size);
                if l == 0 || r == 0 || n.size < t.leaf_cutoff {
                    return Err(TreeViolation::Underfull { node: id });
                }
                l + r
            }
        };
        if n.size != expected {
            return Err(TreeViolation::SizeMismatch { node: id });
        }
    }

    if t.ids.len() != t.len() {
        return Err(TreeViolation::IdIndex { id: None });
    }
    if let Some(p) = t.points().find(|p| !t.ids.contains(p.id)) {
        return Err(TreeViolation::IdIndex { id: Some(p.id) });
    }
    Ok(())
}
