use std::mem::MaybeUninit;

use super::{NodeId, NodeKind, ZdNode, PAR_GRAIN};
use crate::morton::{GridBox, MortonKey, QuantizedPoint};

/// A detached subtree in preorder; node 0 is the root and links are local.
#[derive(Debug)]
pub(crate) struct Fragment {
    pub nodes: Vec<ZdNode>,
}

/// A subtree whose upper part was built in parallel and is not yet laid out.
enum Plan {
    /// Built sequentially, in preorder with local links.
    Seq(Vec<ZdNode>),
    Split {
        node: ZdNode,
        left: Box<Plan>,
        right: Box<Plan>,
        len: usize,
    },
}

impl Plan {
    fn len(&self) -> usize {
        match self {
            Plan::Seq(v) => v.len(),
            Plan::Split { len, .. } => *len,
        }
    }
}

/// Highest key bit below `level` on which the sorted run disagrees.
#[inline]
pub(crate) fn split_bit(points: &[QuantizedPoint]) -> Option<u32> {
    let x = points.first()?.key.0 ^ points.last()?.key.0;
    (x != 0).then(|| 63 - x.leading_zeros())
}

/// First index whose key has `bit` set. `points` must be sorted and agree on
/// all higher bits.
#[inline]
pub(crate) fn split_index(points: &[QuantizedPoint], bit: u32) -> usize {
    points.partition_point(|p| !p.key.bit(bit))
}

fn node_box(points: &[QuantizedPoint], level: u32, dim: usize) -> GridBox {
    let anchor = points.first().map_or([0; 3], |p| p.grid);
    GridBox::cell(&anchor, level, dim)
}

fn leaf(points: &[QuantizedPoint], level: u32, dim: usize, parent: Option<NodeId>) -> ZdNode {
    ZdNode {
        bbox: node_box(points, level, dim),
        parent,
        level,
        size: points.len(),
        kind: NodeKind::Leaf {
            points: {
                let mut v = Vec::with_capacity(points.len() + 4);
                v.extend_from_slice(points);
                v
            },
        },
    }
}

fn internal(
    points: &[QuantizedPoint],
    level: u32,
    split: u32,
    dim: usize,
    parent: Option<NodeId>,
    children: (NodeId, NodeId),
) -> ZdNode {
    let prefix = MortonKey(points[0].key.0 & (u64::MAX << (split + 1)));
    ZdNode {
        bbox: node_box(points, level, dim),
        parent,
        level,
        size: points.len(),
        kind: NodeKind::Internal {
            split_bit: split,
            left: children.0,
            right: children.1,
            prefix,
        },
    }
}

/// Where a run is cut, if it is not a leaf: a run smaller than `cutoff`, or
/// whose keys are all equal, is one. The cut is at the highest disagreeing
/// bit, which skips any empty cuts in between.
fn cut(points: &[QuantizedPoint], cutoff: usize) -> Option<(u32, usize)> {
    if points.len() < cutoff {
        return None;
    }
    let split = split_bit(points)?;
    let at = split_index(points, split);
    // 0 or len only happen with unsorted input; validation reports it.
    (at > 0 && at < points.len()).then_some((split, at))
}

fn plan(points: &[QuantizedPoint], level: u32, cutoff: usize, dim: usize) -> Plan {
    if points.len() <= PAR_GRAIN {
        let mut out = Vec::new();
        build_seq(points, level, cutoff, dim, None, &mut out);
        return Plan::Seq(out);
    }
    let Some((split, at)) = cut(points, cutoff) else {
        return Plan::Seq(vec![leaf(points, level, dim, None)]);
    };
    let (l, r) = rayon::join(
        || plan(&points[..at], split, cutoff, dim),
        || plan(&points[at..], split, cutoff, dim),
    );
    Plan::Split {
        len: 1 + l.len() + r.len(),
        node: internal(points, level, split, dim, None, (0, 0)),
        left: Box::new(l),
        right: Box::new(r),
    }
}

/// Builds the subtree for a Morton-sorted run whose node sits at `level`.
///
/// Subtrees below the parallel grain are built into small vectors first,
/// then every node is moved to its final preorder slot.
pub(crate) fn build_fragment(points: &[QuantizedPoint], level: u32, cutoff: usize, dim: usize) -> Fragment {
    let plan = plan(points, level, cutoff, dim);
    let total = plan.len();
    let mut nodes: Vec<ZdNode> = Vec::with_capacity(total);
    lay_out(plan, &mut nodes.spare_capacity_mut()[..total], 0, None);
    // SAFETY: `lay_out` writes all `total` slots: each plan's length is the
    // number of nodes it holds.
    unsafe { nodes.set_len(total) };
    Fragment { nodes }
}

fn build_seq(
    points: &[QuantizedPoint],
    level: u32,
    cutoff: usize,
    dim: usize,
    parent: Option<NodeId>,
    out: &mut Vec<ZdNode>,
) -> NodeId {
    let id = out.len() as NodeId;
    let Some((split, at)) = cut(points, cutoff) else {
        out.push(leaf(points, level, dim, parent));
        return id;
    };
    out.push(internal(points, level, split, dim, parent, (0, 0)));
    let l = build_seq(&points[..at], split, cutoff, dim, Some(id), out);
    let r = build_seq(&points[at..], split, cutoff, dim, Some(id), out);
    if let NodeKind::Internal { left, right, .. } = &mut out[id as usize].kind {
        *left = l;
        *right = r;
    }
    id
}

/// Moves `plan` into `out`, whose first slot is node `base`.
fn lay_out(plan: Plan, out: &mut [MaybeUninit<ZdNode>], base: NodeId, parent: Option<NodeId>) {
    match plan {
        Plan::Seq(nodes) => {
            for (i, mut n) in nodes.into_iter().enumerate() {
                n.parent = if i == 0 { parent } else { n.parent.map(|p| p + base) };
                if let NodeKind::Internal { left, right, .. } = &mut n.kind {
                    *left += base;
                    *right += base;
                }
                out[i].write(n);
            }
        }
        Plan::Split {
            mut node,
            left,
            right,
            ..
        } => {
            let llen = left.len();
            node.parent = parent;
            if let NodeKind::Internal { left: l, right: r, .. } = &mut node.kind {
                *l = base + 1;
                *r = base + 1 + llen as NodeId;
            }
            out[0].write(node);
            let (lo, hi) = out[1..].split_at_mut(llen);
            rayon::join(
                || lay_out(*left, lo, base + 1, Some(base)),
                || lay_out(*right, hi, base + 1 + llen as NodeId, Some(base)),
            );
        }
    }
}
