//! Random binary tree forests.
//!
//! Every tree draws its own subset of `max_bits` bit positions. Each internal
//! node tests one bit of that subset, chosen independently per node and never
//! repeated along a root-to-leaf path. Descriptors with the bit set go right,
//! the others left. All leaves sit at depth `max_depth`, and only branches
//! that hold descriptors are materialized.
//!
//! A query follows the same rule in every tree. When the branch it needs does
//! not exist it takes the sibling, so each tree yields exactly one non-empty
//! leaf. The candidate set is the union of those leaves.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::index::sort_dedup_from;
use crate::rng::{sample_distinct, stream_rng, validate_weights, PoolSampler};
use crate::snapshot::{corrupt, Reader, SnapshotError, Writer, RBT_MAGIC};
use crate::{AnnIndex, BinaryDescriptor, DescriptorId, Error, LabeledDataset, Result};

/// Modelled size of an internal node (bit position plus two child links).
pub const NODE_BYTES: usize = 24;
/// Modelled size of a leaf header.
pub const LEAF_BYTES: usize = 16;
/// Modelled size of one stored descriptor id.
pub const ID_BYTES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RbtParams {
    /// Trees in the forest.
    pub num_trees: usize,
    /// Depth of every leaf.
    pub max_depth: usize,
    /// Size of each tree's bit subset.
    pub max_bits: usize,
    /// Neighbours returned when the caller does not say.
    pub n_default: usize,
    pub rng_seed: u64,
}

impl Default for RbtParams {
    fn default() -> Self {
        Self {
            num_trees: 6,
            max_depth: 40,
            max_bits: 256,
            n_default: 10,
            rng_seed: 0,
        }
    }
}

impl RbtParams {
    pub fn new(num_trees: usize, max_depth: usize, max_bits: usize) -> Self {
        Self {
            num_trees,
            max_depth,
            max_bits,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.num_trees == 0 {
            return Err(Error::InvalidParams("num_trees must be at least 1".into()));
        }
        if self.max_bits == 0 || self.max_bits > dim {
            return Err(Error::InvalidParams(format!(
                "max_bits must be in 1..={dim}, got {}",
                self.max_bits
            )));
        }
        if self.max_depth > self.max_bits {
            return Err(Error::InvalidParams(format!(
                "max_depth {} exceeds max_bits {}",
                self.max_depth, self.max_bits
            )));
        }
        if self.n_default == 0 {
            return Err(Error::InvalidParams("n_default must be at least 1".into()));
        }
        if self.max_bits > u32::MAX as usize || self.num_trees > u32::MAX as usize {
            return Err(Error::InvalidParams("parameters exceed u32 range".into()));
        }
        Ok(())
    }
}

/// Index of a node inside its tree's arena.
pub type NodeIndex = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RbtNode {
    Internal {
        bit_pos: u32,
        left: Option<NodeIndex>,
        right: Option<NodeIndex>,
    },
    /// `start..start + len` indexes the tree's id array.
    Leaf { start: u32, len: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RbtTree {
    bit_subset: Vec<u32>,
    /// Preorder arena; the root is node 0.
    nodes: Vec<RbtNode>,
    /// Leaf contents concatenated in leaf preorder.
    ids: Vec<DescriptorId>,
}

impl RbtTree {
    pub fn bit_subset(&self) -> &[u32] {
        &self.bit_subset
    }

    pub fn nodes(&self) -> &[RbtNode] {
        &self.nodes
    }

    pub fn root(&self) -> &RbtNode {
        &self.nodes[0]
    }

    pub fn node(&self, index: NodeIndex) -> &RbtNode {
        &self.nodes[index as usize]
    }

    pub fn leaf_ids(&self, start: u32, len: u32) -> &[DescriptorId] {
        &self.ids[start as usize..(start + len) as usize]
    }

    pub fn internal_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, RbtNode::Internal { .. }))
            .count()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.len() - self.internal_count()
    }

    pub fn stored_ids(&self) -> usize {
        self.ids.len()
    }

    /// Leaves with their depth, in preorder.
    pub fn leaves(&self) -> Vec<(usize, &[DescriptorId])> {
        let mut out = Vec::new();
        let mut stack = vec![(0u32, 0usize)];
        while let Some((idx, depth)) = stack.pop() {
            match *self.node(idx) {
                RbtNode::Leaf { start, len } => out.push((depth, self.leaf_ids(start, len))),
                RbtNode::Internal { left, right, .. } => {
                    // right first so left pops first
                    stack.extend(right.map(|r| (r, depth + 1)));
                    stack.extend(left.map(|l| (l, depth + 1)));
                }
            }
        }
        out
    }

    /// The leaf a query lands in.
    pub fn route(&self, q: &BinaryDescriptor) -> &[DescriptorId] {
        let mut idx = 0u32;
        loop {
            match *self.node(idx) {
                RbtNode::Leaf { start, len } => return self.leaf_ids(start, len),
                RbtNode::Internal {
                    bit_pos,
                    left,
                    right,
                } => {
                    let next = if q.bit(bit_pos as usize) {
                        right.or(left)
                    } else {
                        left.or(right)
                    };
                    idx = next.expect("internal nodes have a child");
                }
            }
        }
    }

    fn memory_bytes(&self) -> usize {
        let internal = self.internal_count();
        internal * NODE_BYTES
            + (self.nodes.len() - internal) * LEAF_BYTES
            + self.ids.len() * ID_BYTES
    }

    /// Checks the structural invariants: equal leaf depth, no empty branches,
    /// distinct bits along paths drawn from the subset, and that the leaves
    /// partition `0..num_ids`.
    pub fn check(
        &self,
        dim: usize,
        max_depth: usize,
        num_ids: usize,
    ) -> core::result::Result<(), SnapshotError> {
        let mut in_subset = vec![false; dim];
        for &b in &self.bit_subset {
            let slot = in_subset
                .get_mut(b as usize)
                .ok_or_else(|| corrupt(format!("subset bit {b} out of range")))?;
            if *slot {
                return Err(corrupt(format!("duplicate subset bit {b}")));
            }
            *slot = true;
        }
        let mut seen = vec![false; num_ids];
        let mut counted = 0usize;
        let mut visited = vec![false; self.nodes.len()];
        let mut path: Vec<u32> = Vec::with_capacity(max_depth);
        self.check_node(
            0,
            0,
            max_depth,
            &in_subset,
            &mut path,
            &mut seen,
            &mut counted,
            &mut visited,
        )?;
        if counted != num_ids {
            return Err(corrupt(format!(
                "leaves hold {counted} ids, expected {num_ids}"
            )));
        }
        if visited.iter().any(|v| !v) {
            return Err(corrupt("unreachable nodes"));
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn check_node(
        &self,
        idx: NodeIndex,
        depth: usize,
        max_depth: usize,
        in_subset: &[bool],
        path: &mut Vec<u32>,
        seen: &mut [bool],
        counted: &mut usize,
        visited: &mut [bool],
    ) -> core::result::Result<usize, SnapshotError> {
        let slot = visited
            .get_mut(idx as usize)
            .ok_or_else(|| corrupt(format!("node {idx} out of range")))?;
        if *slot {
            return Err(corrupt(format!("node {idx} reached twice")));
        }
        *slot = true;
        match self.nodes[idx as usize] {
            RbtNode::Leaf { start, len } => {
                if depth != max_depth {
                    return Err(corrupt(format!(
                        "leaf at depth {depth}, expected {max_depth}"
                    )));
                }
                let ids = self
                    .ids
                    .get(start as usize..start as usize + len as usize)
                    .ok_or_else(|| corrupt("leaf range out of bounds"))?;
                if ids.is_empty() {
                    return Err(corrupt("empty leaf"));
                }
                for id in ids {
                    let s = seen
                        .get_mut(id.index())
                        .ok_or_else(|| corrupt(format!("id {id} out of range")))?;
                    if *s {
                        return Err(corrupt(format!("id {id} stored twice")));
                    }
                    *s = true;
                }
                *counted += ids.len();
                Ok(ids.len())
            }
            RbtNode::Internal {
                bit_pos,
                left,
                right,
            } => {
                if depth >= max_depth {
                    return Err(corrupt(format!("internal node at depth {depth}")));
                }
                if !in_subset.get(bit_pos as usize).copied().unwrap_or(false) {
                    return Err(corrupt(format!(
                        "node bit {bit_pos} not in the tree's subset"
                    )));
                }
                if path.contains(&bit_pos) {
                    return Err(corrupt(format!("bit {bit_pos} repeated on a path")));
                }
                if left.is_none() && right.is_none() {
                    return Err(corrupt("internal node without children"));
                }
                path.push(bit_pos);
                let mut total = 0;
                for child in [left, right].into_iter().flatten() {
                    total += self.check_node(
                        child,
                        depth + 1,
                        max_depth,
                        in_subset,
                        path,
                        seen,
                        counted,
                        visited,
                    )?;
                }
                path.pop();
                Ok(total)
            }
        }
    }
}

/// A forest of random binary trees over a borrowed dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct RbtForest<'a> {
    dataset: &'a LabeledDataset,
    params: RbtParams,
    trees: Vec<RbtTree>,
}

impl<'a> RbtForest<'a> {
    /// Builds `params.num_trees` trees over `dataset`.
    ///
    /// With `bit_weights`, both the per-tree bit subsets and the per-node bit
    /// choices are drawn proportionally to the weights instead of uniformly.
    pub fn build(
        dataset: &'a LabeledDataset,
        params: RbtParams,
        bit_weights: Option<&[f64]>,
    ) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        params.validate(dataset.dim())?;
        if let Some(w) = bit_weights {
            validate_weights(w, dataset.dim())?;
            let positive = w.iter().filter(|&&x| x > 0.0).count();
            if positive < params.max_bits {
                return Err(Error::InvalidWeights(format!(
                    "{positive} bits have positive weight but max_bits is {}",
                    params.max_bits
                )));
            }
        }
        let trees = (0..params.num_trees)
            .map(|t| build_tree(dataset, &params, bit_weights, t as u64))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dataset,
            params,
            trees,
        })
    }

    /// Assembles a forest from existing trees, checking every invariant.
    pub fn from_trees(
        dataset: &'a LabeledDataset,
        params: RbtParams,
        trees: Vec<RbtTree>,
    ) -> Result<Self> {
        params.validate(dataset.dim())?;
        if trees.len() != params.num_trees {
            return Err(Error::InvalidParams(format!(
                "{} trees given, num_trees is {}",
                trees.len(),
                params.num_trees
            )));
        }
        for tree in &trees {
            if tree.bit_subset.len() != params.max_bits {
                return Err(corrupt("bit subset length differs from max_bits").into());
            }
            tree.check(dataset.dim(), params.max_depth, dataset.len())?;
        }
        Ok(Self {
            dataset,
            params,
            trees,
        })
    }

    pub fn params(&self) -> &RbtParams {
        &self.params
    }

    pub fn trees(&self) -> &[RbtTree] {
        &self.trees
    }

    pub fn into_trees(self) -> Vec<RbtTree> {
        self.trees
    }

    /// Top `params.n_default` neighbours.
    pub fn query_default(&self, q: &BinaryDescriptor) -> Result<Vec<crate::Neighbour>> {
        self.query(q, self.params.n_default)
    }

    /// Serializes the forest (not the dataset).
    ///
    /// Layout, all integers little-endian:
    /// `"RBTF" | version u32 | dim u32 | num_ids u64 | num_trees u32 |
    /// max_depth u32 | max_bits u32 | n_default u32 | rng_seed u64`, then per
    /// tree `max_bits` subset positions as `u32` followed by the preorder
    /// node stream. A leaf is `0u8 | count u32 | count × id u32`; an internal
    /// node is `1u8 | bit_pos u32 | children u8` (bit 0 = left present,
    /// bit 1 = right present) followed by the left then the right subtree.
    pub fn to_snapshot(&self) -> Vec<u8> {
        let mut w = Writer::with_header(RBT_MAGIC);
        let p = &self.params;
        w.u32(self.dataset.dim() as u32);
        w.u64(self.dataset.len() as u64);
        w.u32(p.num_trees as u32);
        w.u32(p.max_depth as u32);
        w.u32(p.max_bits as u32);
        w.u32(p.n_default as u32);
        w.u64(p.rng_seed);
        for tree in &self.trees {
            for &b in &tree.bit_subset {
                w.u32(b);
            }
            // Arena order is preorder, so a linear pass emits the stream.
            for node in &tree.nodes {
                match *node {
                    RbtNode::Leaf { start, len } => {
                        w.u8(0);
                        w.u32(len);
                        for id in tree.leaf_ids(start, len) {
                            w.u32(id.0);
                        }
                    }
                    RbtNode::Internal {
                        bit_pos,
                        left,
                        right,
                    } => {
                        w.u8(1);
                        w.u32(bit_pos);
                        w.u8(u8::from(left.is_some()) | (u8::from(right.is_some()) << 1));
                    }
                }
            }
        }
        w.finish()
    }

    /// Restores a forest written by [`to_snapshot`](Self::to_snapshot) over
    /// the dataset it was built from.
    pub fn from_snapshot(dataset: &'a LabeledDataset, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::with_header(bytes, RBT_MAGIC)?;
        let dim = r.u32()? as usize;
        let num_ids = r.u64()?;
        if dim != dataset.dim() {
            return Err(Error::DimMismatch {
                expected: dataset.dim(),
                actual: dim,
            });
        }
        if num_ids != dataset.len() as u64 {
            return Err(Error::DatasetMismatch {
                expected: num_ids as usize,
                actual: dataset.len(),
            });
        }
        let params = RbtParams {
            num_trees: r.u32()? as usize,
            max_depth: r.u32()? as usize,
            max_bits: r.u32()? as usize,
            n_default: r.u32()? as usize,
            rng_seed: r.u64()?,
        };
        params.validate(dim).map_err(|e| corrupt(format!("{e}")))?;
        let mut trees = Vec::with_capacity(params.num_trees.min(r.remaining()));
        for _ in 0..params.num_trees {
            let mut bit_subset = Vec::with_capacity(params.max_bits);
            for _ in 0..params.max_bits {
                bit_subset.push(r.u32()?);
            }
            let mut tree = RbtTree {
                bit_subset,
                nodes: Vec::new(),
                ids: Vec::new(),
            };
            read_node(&mut r, &mut tree, 0, params.max_depth)?;
            trees.push(tree);
        }
        r.finish()?;
        Self::from_trees(dataset, params, trees)
    }
}

fn read_node(
    r: &mut Reader<'_>,
    tree: &mut RbtTree,
    depth: usize,
    max_depth: usize,
) -> Result<NodeIndex, SnapshotError> {
    let idx = tree.nodes.len() as NodeIndex;
    match r.u8()? {
        0 => {
            let len = r.u32()?;
            if len as usize > r.remaining() / 4 {
                return Err(SnapshotError::Truncated(r.remaining()));
            }
            let start = tree.ids.len() as u32;
            for _ in 0..len {
                tree.ids.push(DescriptorId(r.u32()?));
            }
            tree.nodes.push(RbtNode::Leaf { start, len });
        }
        1 => {
            if depth >= max_depth {
                return Err(corrupt(format!(
                    "internal node below max_depth {max_depth}"
                )));
            }
            let bit_pos = r.u32()?;
            let children = r.u8()?;
            if children == 0 || children > 3 {
                return Err(corrupt(format!("bad child flags {children}")));
            }
            tree.nodes.push(RbtNode::Internal {
                bit_pos,
                left: None,
                right: None,
            });
            let left = if children & 1 != 0 {
                Some(read_node(r, tree, depth + 1, max_depth)?)
            } else {
                None
            };
            let right = if children & 2 != 0 {
                Some(read_node(r, tree, depth + 1, max_depth)?)
            } else {
                None
            };
            tree.nodes[idx as usize] = RbtNode::Internal {
                bit_pos,
                left,
                right,
            };
        }
        tag => return Err(corrupt(format!("unknown node tag {tag}"))),
    }
    Ok(idx)
}

struct TreeBuilder<'d, R> {
    descriptors: &'d [BinaryDescriptor],
    subset: Vec<u32>,
    sampler: PoolSampler,
    /// Subset slots already tested on the current path.
    used: Vec<bool>,
    max_depth: usize,
    rng: R,
    nodes: Vec<RbtNode>,
    scratch: Vec<DescriptorId>,
}

fn build_tree(
    dataset: &LabeledDataset,
    params: &RbtParams,
    weights: Option<&[f64]>,
    index: u64,
) -> Result<RbtTree> {
    let mut rng = stream_rng(params.rng_seed, index);
    let subset = sample_distinct(&mut rng, dataset.dim(), params.max_bits, weights)?;
    let pool_weights = weights.map(|w| subset.iter().map(|&b| w[b as usize]).collect());
    let mut builder = TreeBuilder {
        descriptors: dataset.descriptors(),
        sampler: PoolSampler::new(subset.len(), pool_weights),
        used: vec![false; subset.len()],
        subset,
        max_depth: params.max_depth,
        rng,
        nodes: Vec::new(),
        scratch: Vec::new(),
    };
    let mut ids: Vec<DescriptorId> = dataset.ids().collect();
    builder.node(&mut ids, 0, 0)?;
    Ok(RbtTree {
        bit_subset: builder.subset,
        nodes: builder.nodes,
        ids,
    })
}

impl<R: Rng> TreeBuilder<'_, R> {
    /// Builds the subtree holding `ids`, which occupy `offset..offset + len`
    /// of the final id array. Returns the new node's index.
    fn node(&mut self, ids: &mut [DescriptorId], offset: usize, depth: usize) -> Result<NodeIndex> {
        let idx = self.nodes.len() as NodeIndex;
        if depth == self.max_depth {
            self.nodes.push(RbtNode::Leaf {
                start: offset as u32,
                len: ids.len() as u32,
            });
            return Ok(idx);
        }
        let used = &self.used;
        let slot = self
            .sampler
            .draw(&mut self.rng, |j| used[j])
            .ok_or_else(|| {
                Error::InvalidWeights("ran out of positive-weight bits along a path".into())
            })?;
        let bit_pos = self.subset[slot];
        let split = self.partition(ids, bit_pos as usize);
        self.nodes.push(RbtNode::Internal {
            bit_pos,
            left: None,
            right: None,
        });
        self.used[slot] = true;
        let (lo, hi) = ids.split_at_mut(split);
        let left = if lo.is_empty() {
            None
        } else {
            Some(self.node(lo, offset, depth + 1)?)
        };
        let right = if hi.is_empty() {
            None
        } else {
            Some(self.node(hi, offset + split, depth + 1)?)
        };
        self.used[slot] = false;
        self.nodes[idx as usize] = RbtNode::Internal {
            bit_pos,
            left,
            right,
        };
        Ok(idx)
    }

    /// Stable partition: clear-bit ids first. Returns the split point.
    fn partition(&mut self, ids: &mut [DescriptorId], bit: usize) -> usize {
        self.scratch.clear();
        let mut write = 0;
        for i in 0..ids.len() {
            let id = ids[i];
            if self.descriptors[id.index()].bit(bit) {
                self.scratch.push(id);
            } else {
                ids[write] = id;
                write += 1;
            }
        }
        ids[write..].copy_from_slice(&self.scratch);
        write
    }
}

impl AnnIndex for RbtForest<'_> {
    fn dataset(&self) -> &LabeledDataset {
        self.dataset
    }

    fn candidates(&self, q: &BinaryDescriptor, out: &mut Vec<DescriptorId>) -> Result<()> {
        self.dataset.check_query(q)?;
        let start = out.len();
        for tree in &self.trees {
            out.extend_from_slice(tree.route(q));
        }
        if self.trees.len() > 1 {
            sort_dedup_from(out, start);
        }
        Ok(())
    }

    /// Modelled bytes: internal nodes × [`NODE_BYTES`] + leaves ×
    /// [`LEAF_BYTES`] + stored ids × [`ID_BYTES`], summed over trees.
    fn memory_bytes(&self) -> usize {
        self.trees.iter().map(RbtTree::memory_bytes).sum()
    }
}
