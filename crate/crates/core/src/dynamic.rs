//! Batch insertion and deletion.
//!
//! An update descends the tree once, forking over disjoint subtrees. Leaf
//! contents and subtree sizes change in place on the way; changes to the
//! shape of the tree are recorded as edits and applied to the node pool
//! afterwards, in order. Splits depend only on key bits, so after either
//! operation the tree is exactly the one a fresh build of the resulting
//! point set would give.

use crate::error::{Error, Result};
use crate::morton::{morton_decode, morton_key, GridBox, MortonKey, PointId, QuantizedPoint, MAX_KEY_BITS};
use crate::sort::sort_by_morton;
use crate::tree::{build_fragment, split_index, Fragment, NodeId, NodeKind, ZdNode, ZdTree, PAR_GRAIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateOp {
    Insert,
    Delete,
}

/// A Morton-sorted batch of points.
///
/// Ids must be unique within an insert batch; this is checked when the
/// batch is applied. A delete batch may name an id more than once, and
/// only the entry at the stored position can match.
#[derive(Debug, Clone)]
pub struct UpdateBatch {
    points: Vec<QuantizedPoint>,
    op: UpdateOp,
}

impl UpdateBatch {
    pub fn new(mut points: Vec<QuantizedPoint>, op: UpdateOp) -> Self {
        sort_by_morton(&mut points, MAX_KEY_BITS);
        UpdateBatch { points, op }
    }

    pub fn insert(points: Vec<QuantizedPoint>) -> Self {
        Self::new(points, UpdateOp::Insert)
    }

    pub fn delete(points: Vec<QuantizedPoint>) -> Self {
        Self::new(points, UpdateOp::Delete)
    }

    pub fn op(&self) -> UpdateOp {
        self.op
    }

    pub fn points(&self) -> &[QuantizedPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Outcome of an applied batch.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UpdateSummary {
    /// Points actually inserted or removed.
    pub applied: usize,
    /// Delete requests with no stored point of that id at that position,
    /// ascending.
    pub not_found: Vec<PointId>,
}

#[derive(Debug)]
enum Edit {
    /// A leaf is replaced by a subtree whose root takes its slot.
    Replace { node: NodeId, fragment: Fragment },
    /// A new node is inserted above `node`, splitting at `split`; `other`
    /// holds the points on the far side.
    Graft {
        node: NodeId,
        split: u32,
        other: Fragment,
        size: usize,
    },
    /// An internal node becomes a leaf holding what is left below it.
    Collapse { node: NodeId },
    /// One child emptied out; the other takes the node's place.
    Splice { node: NodeId, keep_right: bool },
}

#[derive(Default)]
struct DeleteAcc {
    edits: Vec<Edit>,
    removed: Vec<PointId>,
    not_found: Vec<PointId>,
}

impl DeleteAcc {
    fn append(&mut self, other: &mut DeleteAcc) {
        self.edits.append(&mut other.edits);
        self.removed.append(&mut other.removed);
        self.not_found.append(&mut other.not_found);
    }
}

/// Mutable access to the node pool from forked tasks.
#[derive(Clone, Copy)]
struct Pool(*mut ZdNode);

// SAFETY: the update recursion hands each child id to exactly one task, and
// a task touches only the node it was handed (and reads children after the
// tasks that owned them have joined), so no node is ever aliased.
unsafe impl Send for Pool {}
unsafe impl Sync for Pool {}

impl Pool {
    /// # Safety
    /// `id` must be a live slot that no other task is accessing.
    #[allow(clippy::mut_from_ref)]
    unsafe fn node<'a>(self, id: NodeId) -> &'a mut ZdNode {
        &mut *self.0.add(id as usize)
    }
}

#[derive(Clone, Copy)]
struct Ctx {
    pool: Pool,
    cutoff: usize,
    dim: usize,
}

fn merge(a: &[QuantizedPoint], b: &[QuantizedPoint]) -> Vec<QuantizedPoint> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Merges sorted `b` into sorted `a`, back to front.
fn merge_into(a: &mut Vec<QuantizedPoint>, b: &[QuantizedPoint]) {
    let (mut i, mut j) = (a.len(), b.len());
    a.resize(i + j, b[0]);
    for k in (0..a.len()).rev() {
        if j == 0 {
            break;
        }
        if i > 0 && a[i - 1] > b[j - 1] {
            a[k] = a[i - 1];
            i -= 1;
        } else {
            a[k] = b[j - 1];
            j -= 1;
        }
    }
}

/// Removes from `points` every entry matched in `batch`; both sorted by
/// (key, id). Matched ids go to `removed`, unmatched requests to `missing`.
fn remove_matches(
    points: &mut Vec<QuantizedPoint>,
    batch: &[QuantizedPoint],
    removed: &mut Vec<PointId>,
    missing: &mut Vec<PointId>,
) {
    let mut j = 0;
    let mut keep = 0;
    for i in 0..points.len() {
        let p = points[i];
        while j < batch.len() && batch[j] < p {
            missing.push(batch[j].id);
            j += 1;
        }
        if j < batch.len() && batch[j] == p {
            removed.push(p.id);
            j += 1;
        } else {
            points[keep] = p;
            keep += 1;
        }
    }
    missing.extend(batch[j..].iter().map(|p| p.id));
    points.truncate(keep);
}

fn insert_rec(ctx: Ctx, node: NodeId, batch: &[QuantizedPoint], out: &mut Vec<Edit>) {
    if batch.is_empty() {
        return;
    }
    // SAFETY: `node` was handed to this call alone.
    let n = unsafe { ctx.pool.node(node) };
    let (s, left, right, prefix) = match &mut n.kind {
        NodeKind::Leaf { points } => {
            let total = points.len() + batch.len();
            let lo = points.first().map_or(batch[0].key, |p| p.key.min(batch[0].key));
            let hi = points.last().map_or(batch[batch.len() - 1].key, |p| p.key.max(batch[batch.len() - 1].key));
            if total < ctx.cutoff || lo == hi {
                merge_into(points, batch);
                n.size = total;
            } else {
                let merged = merge(points, batch);
                out.push(Edit::Replace {
                    node,
                    fragment: build_fragment(&merged, n.level, ctx.cutoff, ctx.dim),
                });
            }
            return;
        }
        NodeKind::Internal {
            split_bit,
            left,
            right,
            prefix,
        } => (*split_bit, *left, *right, *prefix),
    };

    // Batch points that disagree with the prefix above the split force new
    // nodes above this one, highest disagreement first.
    let mut b = batch;
    loop {
        let (first, last) = (b[0].key.0 ^ prefix.0, b[b.len() - 1].key.0 ^ prefix.0);
        let above = (first | last) >> (s + 1);
        if above == 0 {
            break;
        }
        let h = 63 - above.leading_zeros() + s + 1;
        let i = split_index(b, h);
        let (same, other) = if prefix.bit(h) { (&b[i..], &b[..i]) } else { (&b[..i], &b[i..]) };
        out.push(Edit::Graft {
            node,
            split: h,
            other: build_fragment(other, h, ctx.cutoff, ctx.dim),
            size: n.size + b.len(),
        });
        b = same;
        if b.is_empty() {
            return;
        }
    }

    n.size += b.len();
    let i = split_index(b, s);
    if b.len() > PAR_GRAIN {
        let (mut l, mut r) = (Vec::new(), Vec::new());
        rayon::join(
            || insert_rec(ctx, left, &b[..i], &mut l),
            || insert_rec(ctx, right, &b[i..], &mut r),
        );
        out.append(&mut l);
        out.append(&mut r);
    } else {
        insert_rec(ctx, left, &b[..i], out);
        insert_rec(ctx, right, &b[i..], out);
    }
}

/// Returns the number of points removed under `node`.
fn delete_rec(ctx: Ctx, node: NodeId, batch: &[QuantizedPoint], acc: &mut DeleteAcc) -> usize {
    if batch.is_empty() {
        return 0;
    }
    // SAFETY: `node` was handed to this call alone.
    let n = unsafe { ctx.pool.node(node) };
    let (s, left, right, prefix) = match &mut n.kind {
        NodeKind::Leaf { points } => {
            let before = points.len();
            remove_matches(points, batch, &mut acc.removed, &mut acc.not_found);
            n.size = points.len();
            return before - n.size;
        }
        NodeKind::Internal {
            split_bit,
            left,
            right,
            prefix,
        } => (*split_bit, *left, *right, *prefix),
    };

    let top = prefix.0 >> (s + 1);
    let lo = batch.partition_point(|p| p.key.0 >> (s + 1) < top);
    let hi = batch.partition_point(|p| p.key.0 >> (s + 1) <= top);
    acc.not_found.extend(batch[..lo].iter().chain(&batch[hi..]).map(|p| p.id));
    let b = &batch[lo..hi];
    if b.is_empty() {
        return 0;
    }

    let i = split_index(b, s);
    let mark = acc.edits.len();
    let mid = if b.len() > PAR_GRAIN {
        let (mut la, mut ra) = (DeleteAcc::default(), DeleteAcc::default());
        rayon::join(
            || delete_rec(ctx, left, &b[..i], &mut la),
            || delete_rec(ctx, right, &b[i..], &mut ra),
        );
        acc.append(&mut la);
        let mid = acc.edits.len();
        acc.append(&mut ra);
        mid
    } else {
        delete_rec(ctx, left, &b[..i], acc);
        let mid = acc.edits.len();
        delete_rec(ctx, right, &b[i..], acc);
        mid
    };

    // SAFETY: both child calls have returned; nothing else holds them.
    let (kept_left, kept_right) = unsafe { (ctx.pool.node(left).size, ctx.pool.node(right).size) };
    let removed = n.size - kept_left - kept_right;
    n.size = kept_left + kept_right;
    if removed == 0 {
        return 0;
    }
    if n.size < ctx.cutoff {
        acc.edits.truncate(mark);
        acc.edits.push(Edit::Collapse { node });
    } else if kept_left == 0 {
        acc.edits.drain(mark..mid);
        acc.edits.push(Edit::Splice { node, keep_right: true });
    } else if kept_right == 0 {
        acc.edits.truncate(mid);
        acc.edits.push(Edit::Splice { node, keep_right: false });
    }
    removed
}

impl ZdTree {
    /// Applies an update batch.
    ///
    /// Inserts are all-or-nothing: a point off the tree's grid, an id
    /// already stored, or an id repeated in the batch rejects the whole
    /// batch before anything changes. Deletes remove every point found at
    /// its stated position and list the rest.
    pub fn apply(&mut self, batch: &UpdateBatch) -> Result<UpdateSummary> {
        match batch.op {
            UpdateOp::Insert => self.insert_sorted(&batch.points),
            UpdateOp::Delete => Ok(self.delete_sorted(&batch.points)),
        }
    }

    /// Inserts `points`, which need not be sorted.
    pub fn batch_insert(&mut self, points: Vec<QuantizedPoint>) -> Result<UpdateSummary> {
        self.apply(&UpdateBatch::insert(points))
    }

    /// Deletes `points`, matched by id and position.
    pub fn batch_delete(&mut self, points: Vec<QuantizedPoint>) -> Result<UpdateSummary> {
        self.apply(&UpdateBatch::delete(points))
    }

    fn ctx(&mut self) -> Ctx {
        Ctx {
            pool: Pool(self.nodes.as_mut_ptr()),
            cutoff: self.leaf_cutoff,
            dim: self.dim(),
        }
    }

    fn insert_sorted(&mut self, batch: &[QuantizedPoint]) -> Result<UpdateSummary> {
        let dim = self.dim();
        let universe = self.quantizer.universe();
        for p in batch {
            let on_grid = universe.contains(&p.grid) && p.grid[dim..].iter().all(|&g| g == 0);
            if !on_grid || morton_key(&p.grid, dim) != p.key {
                return Err(Error::OutsideUniverse(p.id));
            }
            if self.ids.contains(p.id) {
                return Err(Error::IdPresent(p.id));
            }
        }
        for (i, p) in batch.iter().enumerate() {
            if !self.ids.insert(p.id) {
                for q in &batch[..i] {
                    self.ids.remove(q.id);
                }
                return Err(Error::DuplicateId(p.id));
            }
        }
        if batch.is_empty() {
            return Ok(UpdateSummary::default());
        }
        let mut edits = Vec::new();
        insert_rec(self.ctx(), self.root, batch, &mut edits);
        self.apply_edits(edits);
        Ok(UpdateSummary {
            applied: batch.len(),
            not_found: Vec::new(),
        })
    }

    fn delete_sorted(&mut self, batch: &[QuantizedPoint]) -> UpdateSummary {
        let mut acc = DeleteAcc::default();
        delete_rec(self.ctx(), self.root, batch, &mut acc);
        self.apply_edits(acc.edits);
        for &id in &acc.removed {
            self.ids.remove(id);
        }
        acc.not_found.sort_unstable();
        UpdateSummary {
            applied: acc.removed.len(),
            not_found: acc.not_found,
        }
    }

    fn alloc_node(&mut self) -> NodeId {
        match self.free.pop() {
            Some(id) => id,
            None => {
                self.nodes.push(ZdNode::vacant());
                (self.nodes.len() - 1) as NodeId
            }
        }
    }

    fn free_subtree(&mut self, id: NodeId) {
        let mut stack = vec![id];
        while let Some(id) = stack.pop() {
            let n = std::mem::replace(&mut self.nodes[id as usize], ZdNode::vacant());
            if let Some((l, r)) = n.children() {
                stack.push(l);
                stack.push(r);
            }
            self.free.push(id);
        }
    }

    /// Copies a fragment into the pool; its root goes to `slot` if given.
    fn place_fragment(&mut self, fragment: Fragment, slot: Option<NodeId>, parent: Option<NodeId>) -> NodeId {
        let slots: Vec<NodeId> = (0..fragment.nodes.len())
            .map(|i| match slot {
                Some(s) if i == 0 => s,
                _ => self.alloc_node(),
            })
            .collect();
        for (i, mut n) in fragment.nodes.into_iter().enumerate() {
            n.parent = if i == 0 {
                parent
            } else {
                n.parent.map(|p| slots[p as usize])
            };
            if let NodeKind::Internal { left, right, .. } = &mut n.kind {
                *left = slots[*left as usize];
                *right = slots[*right as usize];
            }
            self.nodes[slots[i] as usize] = n;
        }
        slots[0]
    }

    fn replace_child(&mut self, parent: Option<NodeId>, old: NodeId, new: NodeId) {
        match parent {
            None => self.root = new,
            Some(g) => {
                if let NodeKind::Internal { left, right, .. } = &mut self.nodes[g as usize].kind {
                    if *left == old {
                        *left = new;
                    } else {
                        *right = new;
                    }
                }
            }
        }
    }

    fn set_parent(&mut self, children: Option<(NodeId, NodeId)>, parent: NodeId) {
        if let Some((l, r)) = children {
            self.nodes[l as usize].parent = Some(parent);
            self.nodes[r as usize].parent = Some(parent);
        }
    }

    fn apply_edits(&mut self, edits: Vec<Edit>) {
        let dim = self.dim();
        for edit in edits {
            match edit {
                Edit::Replace { node, fragment } => {
                    let parent = self.node(node).parent;
                    self.place_fragment(fragment, Some(node), parent);
                }
                Edit::Graft {
                    node,
                    split,
                    other,
                    size,
                } => {
                    let x = self.alloc_node();
                    let o = self.place_fragment(other, None, Some(x));
                    let n = &mut self.nodes[node as usize];
                    let NodeKind::Internal { prefix, .. } = n.kind else {
                        unreachable!("grafts sit above internal nodes")
                    };
                    let (bbox, level, parent) = (n.bbox, n.level, n.parent);
                    n.parent = Some(x);
                    n.level = split;
                    n.bbox = GridBox::cell(&morton_decode(prefix, dim), split, dim);
                    let (left, right) = if prefix.bit(split) { (o, node) } else { (node, o) };
                    self.nodes[x as usize] = ZdNode {
                        bbox,
                        parent,
                        level,
                        size,
                        kind: NodeKind::Internal {
                            split_bit: split,
                            left,
                            right,
                            prefix: MortonKey(prefix.0 & (u64::MAX << (split + 1))),
                        },
                    };
                    self.replace_child(parent, node, x);
                }
                Edit::Collapse { node } => {
                    let points = self.collect_points(node);
                    if let Some((l, r)) = self.node(node).children() {
                        self.free_subtree(l);
                        self.free_subtree(r);
                    }
                    let n = &mut self.nodes[node as usize];
                    n.size = points.len();
                    n.kind = NodeKind::Leaf { points };
                }
                Edit::Splice { node, keep_right } => {
                    let (l, r) = self.node(node).children().expect("splice of an internal node");
                    let (keep, drop) = if keep_right { (r, l) } else { (l, r) };
                    self.free_subtree(drop);
                    let k = std::mem::replace(&mut self.nodes[keep as usize], ZdNode::vacant());
                    self.free.push(keep);
                    self.set_parent(k.children(), node);
                    let n = &mut self.nodes[node as usize];
                    n.size = k.size;
                    n.kind = k.kind;
                }
            }
        }
    }
}
