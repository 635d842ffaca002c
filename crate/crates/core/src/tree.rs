//! Finite tree-structured probability spaces.
//!
//! A [`TreeSpace`] is a rooted tree of measurable sets. The root is the whole
//! space with mass 1, every internal node is split into at least two disjoint
//! children whose masses add up to the parent's mass, and leaves are the atoms
//! on which [`SimpleFunction`](crate::SimpleFunction)s are constant.
//!
//! Nodes are stored in preorder, so every subtree occupies a contiguous id
//! range and the leaves below any node form a contiguous range of leaf slots.
//! Most evaluation loops in the crate rely on both facts.

use std::fmt;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = usize;

/// Absolute tolerance for mass bookkeeping (all masses are at most 1).
pub const MASS_TOL: f64 = 1e-12;

/// Interval `(lo/denom, hi/denom]` with exact integer endpoints.
///
/// Intervals starting at 0 are closed on the left, matching the prefix sets
/// `[0, r]` of the sharpness construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: u64,
    pub hi: u64,
    pub denom: u64,
}

impl Interval {
    pub fn new(lo: u64, hi: u64, denom: u64) -> Result<Self> {
        if denom == 0 || lo >= hi {
            return Err(Error::InvalidTree(format!(
                "bad interval endpoints ({lo}, {hi}) / {denom}"
            )));
        }
        Ok(Self { lo, hi, denom })
    }

    pub fn start(&self) -> f64 {
        self.lo as f64 / self.denom as f64
    }

    pub fn end(&self) -> f64 {
        self.hi as f64 / self.denom as f64
    }

    /// Length computed from the integer width, so it matches the node mass exactly.
    pub fn length(&self) -> f64 {
        (self.hi - self.lo) as f64 / self.denom as f64
    }

    pub fn is_prefix(&self) -> bool {
        self.lo == 0
    }

    /// Whether `self` and `other` describe the same point of the real line at `self.hi`
    /// and `other.lo` (used to check tiling).
    fn ends_where_starts(&self, other: &Interval) -> bool {
        self.hi as u128 * other.denom as u128 == other.lo as u128 * self.denom as u128
    }

    fn same_start(&self, other: &Interval) -> bool {
        self.lo as u128 * other.denom as u128 == other.lo as u128 * self.denom as u128
    }

    fn same_end(&self, other: &Interval) -> bool {
        self.hi as u128 * other.denom as u128 == other.hi as u128 * self.denom as u128
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lo == 0 {
            write!(f, "[0,{}/{}]", self.hi, self.denom)
        } else {
            write!(f, "({}/{},{}/{}]", self.lo, self.denom, self.hi, self.denom)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub mass: f64,
    pub depth: usize,
    pub interval: Option<Interval>,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// A finite rooted probability tree. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeSpace {
    nodes: Vec<TreeNode>,
    levels: Vec<Vec<NodeId>>,
    leaves: Vec<NodeId>,
    leaf_slot: Vec<Option<usize>>,
    leaf_span: Vec<Range<usize>>,
    subtree_end: Vec<NodeId>,
}

impl TreeSpace {
    /// Assembles a tree from a parent table given in preorder and audits it.
    pub fn from_parts(
        parents: Vec<Option<NodeId>>,
        masses: Vec<f64>,
        intervals: Vec<Option<Interval>>,
    ) -> Result<Self> {
        let n = parents.len();
        if n == 0 {
            return Err(Error::InvalidTree("tree has no nodes".into()));
        }
        if masses.len() != n || intervals.len() != n {
            return Err(Error::InvalidTree("parent, mass and interval tables differ in length".into()));
        }
        if parents[0].is_some() {
            return Err(Error::InvalidTree("node 0 must be the root".into()));
        }

        let mut children = vec![Vec::new(); n];
        let mut depth = vec![0usize; n];
        for (id, parent) in parents.iter().enumerate().skip(1) {
            match *parent {
                Some(p) if p < id => {
                    children[p].push(id);
                    depth[id] = depth[p] + 1;
                }
                _ => {
                    return Err(Error::InvalidTree(format!(
                        "node {id} must have a parent with a smaller id"
                    )))
                }
            }
        }

        // Ids must coincide with a preorder walk.
        let mut stack = vec![0usize];
        let mut expected = 0usize;
        while let Some(id) = stack.pop() {
            if id != expected {
                return Err(Error::InvalidTree(format!("node ids are not in preorder at {id}")));
            }
            expected += 1;
            stack.extend(children[id].iter().rev());
        }

        let max_depth = depth.iter().copied().max().unwrap_or(0);
        let mut levels = vec![Vec::new(); max_depth + 1];
        for (id, &d) in depth.iter().enumerate() {
            levels[d].push(id);
        }

        let mut leaves = Vec::new();
        let mut leaf_slot = vec![None; n];
        for id in 0..n {
            if children[id].is_empty() {
                leaf_slot[id] = Some(leaves.len());
                leaves.push(id);
            }
        }

        let mut subtree_end = vec![0usize; n];
        let mut leaf_span = vec![0..0; n];
        for id in (0..n).rev() {
            match (children[id].first(), children[id].last()) {
                (Some(&first), Some(&last)) => {
                    subtree_end[id] = subtree_end[last];
                    leaf_span[id] = leaf_span[first].start..leaf_span[last].end;
                }
                _ => {
                    let slot = leaf_slot[id].expect("leaf has a slot");
                    subtree_end[id] = id + 1;
                    leaf_span[id] = slot..slot + 1;
                }
            }
        }

        let nodes = (0..n)
            .map(|id| TreeNode {
                id,
                parent: parents[id],
                children: std::mem::take(&mut children[id]),
                mass: masses[id],
                depth: depth[id],
                interval: intervals[id],
            })
            .collect();

        let tree = Self { nodes, levels, leaves, leaf_slot, leaf_span, subtree_end };
        tree.audit()?;
        Ok(tree)
    }

    /// Full binary tree of the given depth; depth-`k` nodes have mass `2^-k`.
    pub fn build_uniform_dyadic(depth: usize) -> Self {
        fn grow(b: &mut PartsBuilder, parent: Option<NodeId>, level: usize, depth: usize) {
            let id = b.push(parent, 0.5f64.powi(level as i32), None);
            if level < depth {
                grow(b, Some(id), level + 1, depth);
                grow(b, Some(id), level + 1, depth);
            }
        }
        let mut b = PartsBuilder::default();
        grow(&mut b, None, 0, depth);
        b.finish().expect("dyadic tree satisfies every invariant")
    }

    /// The prefix tree on `[0, 1]`: level `n` holds `[0, (N-n)/N]` together with the
    /// unit cells `(k/N, (k+1)/N]`, `k >= N-n`. The prefix `[0, 1/N]` is a leaf at
    /// depth `N-1`.
    pub fn build_sharpness_tree(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("sharpness tree needs N >= 2, got {n}")));
        }
        let denom = n as u64;
        let nf = n as f64;
        let total = 2 * n - 1;
        let mut parents = Vec::with_capacity(total);
        let mut masses = Vec::with_capacity(total);
        let mut intervals = Vec::with_capacity(total);

        // Prefix chain [0, (N-j)/N] occupies ids 0..N.
        for j in 0..n {
            parents.push(if j == 0 { None } else { Some(j - 1) });
            let hi = (n - j) as u64;
            masses.push(hi as f64 / nf);
            intervals.push(Some(Interval::new(0, hi, denom)?));
        }
        // The right cell split off prefix j is visited after the whole prefix chain
        // below it, i.e. in order j = N-2, N-3, ..., 0.
        for j in (0..n - 1).rev() {
            parents.push(Some(j));
            let hi = (n - j) as u64;
            masses.push(1.0 / nf);
            intervals.push(Some(Interval::new(hi - 1, hi, denom)?));
        }
        Self::from_parts(parents, masses, intervals)
    }

    /// Random tree, deterministic in `seed`. The root always splits; deeper nodes split
    /// with probability 0.7 until `max_depth`.
    pub fn build_random_tree(seed: u64, max_depth: usize, max_branch: usize) -> Result<Self> {
        if max_depth < 1 || max_branch < 2 {
            return Err(Error::Domain(format!(
                "random tree needs max_depth >= 1 and max_branch >= 2, got {max_depth}, {max_branch}"
            )));
        }
        fn grow(
            b: &mut PartsBuilder,
            rng: &mut ChaCha8Rng,
            parent: Option<NodeId>,
            mass: f64,
            level: usize,
            max_depth: usize,
            max_branch: usize,
        ) {
            let id = b.push(parent, mass, None);
            let split = level < max_depth && (level == 0 || rng.gen_bool(0.7));
            if !split {
                return;
            }
            let k = rng.gen_range(2..=max_branch);
            let shares: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = shares.iter().sum();
            let mut child_masses: Vec<f64> = shares[..k - 1].iter().map(|w| mass * w / total).collect();
            let used: f64 = child_masses.iter().sum();
            child_masses.push(mass - used);
            for m in child_masses {
                grow(b, rng, Some(id), m, level + 1, max_depth, max_branch);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = PartsBuilder::default();
        grow(&mut b, &mut rng, None, 1.0, 0, max_depth, max_branch);
        b.finish()
    }

    /// Checks every structural invariant of a probability tree.
    pub fn audit(&self) -> Result<()> {
        let root = &self.nodes[0];
        if (root.mass - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidTree(format!("root mass {} differs from 1", root.mass)));
        }
        let with_intervals = self.nodes.iter().filter(|q| q.interval.is_some()).count();
        if with_intervals != 0 && with_intervals != self.nodes.len() {
            return Err(Error::InvalidTree("intervals must be given on all nodes or none".into()));
        }
        for node in &self.nodes {
            if !(node.mass.is_finite() && node.mass > 0.0) {
                return Err(Error::InvalidTree(format!("node {} has mass {}", node.id, node.mass)));
            }
            if let Some(iv) = node.interval {
                if iv.lo >= iv.hi || (iv.length() - node.mass).abs() > MASS_TOL {
                    return Err(Error::InvalidTree(format!(
                        "node {} interval {iv} does not carry its mass {}",
                        node.id, node.mass
                    )));
                }
            }
            if node.is_leaf() {
                continue;
            }
            if node.children.len() < 2 {
                return Err(Error::InvalidTree(format!("node {} has a single child", node.id)));
            }
            let sum: f64 = node.children.iter().map(|&c| self.nodes[c].mass).sum();
            if (sum - node.mass).abs() > MASS_TOL {
                return Err(Error::InvalidTree(format!(
                    "children of node {} carry {sum}, parent carries {}",
                    node.id, node.mass
                )));
            }
            if let Some(iv) = node.interval {
                let mut cells: Vec<Interval> =
                    node.children.iter().filter_map(|&c| self.nodes[c].interval).collect();
                cells.sort_by(|a, b| {
                    (a.lo as u128 * b.denom as u128).cmp(&(b.lo as u128 * a.denom as u128))
                });
                let tiles = cells.first().is_some_and(|c| c.same_start(&iv))
                    && cells.last().is_some_and(|c| c.same_end(&iv))
                    && cells.windows(2).all(|w| w[0].ends_where_starts(&w[1]));
                if !tiles {
                    return Err(Error::InvalidTree(format!(
                        "children of node {} do not tile {iv}",
                        node.id
                    )));
                }
            }
        }
        // Every level, together with the leaves above it, must carry the full mass.
        let mut carried = 0.0;
        for level in &self.levels {
            let here: f64 = level.iter().map(|&id| self.nodes[id].mass).sum();
            if (here + carried - 1.0).abs() > MASS_TOL {
                return Err(Error::InvalidTree(format!("level mass {} differs from 1", here + carried)));
            }
            carried += level.iter().filter(|&&id| self.nodes[id].is_leaf()).map(|&id| self.nodes[id].mass).sum::<f64>();
        }
        Ok(())
    }

    /// Chain from `leaf` up to the root, inclusive.
    pub fn ancestors(&self, leaf: NodeId) -> Result<Vec<NodeId>> {
        let node = self.node(leaf)?;
        if !node.is_leaf() {
            return Err(Error::NotALeaf(leaf));
        }
        let mut chain = vec![leaf];
        let mut cur = node.parent;
        while let Some(id) = cur {
            chain.push(id);
            cur = self.nodes[id].parent;
        }
        Ok(chain)
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn node(&self, id: NodeId) -> Result<&TreeNode> {
        self.nodes.get(id).ok_or(Error::UnknownNode(id))
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn mass(&self, id: NodeId) -> f64 {
        self.nodes[id].mass
    }

    /// `levels()[m]` lists the nodes of depth `m`.
    pub fn levels(&self) -> &[Vec<NodeId>] {
        &self.levels
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    /// Leaf node ids in left-to-right order. Leaf slot `i` refers to `leaves()[i]`.
    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn leaf_slot(&self, id: NodeId) -> Option<usize> {
        self.leaf_slot.get(id).copied().flatten()
    }

    /// Leaf slots below `id`.
    pub fn leaf_span(&self, id: NodeId) -> Range<usize> {
        self.leaf_span[id].clone()
    }

    /// Node ids of the subtree rooted at `id` (including `id`).
    pub fn subtree(&self, id: NodeId) -> Range<NodeId> {
        id..self.subtree_end[id]
    }

    pub fn leaf_masses(&self) -> Vec<f64> {
        self.leaves.iter().map(|&id| self.nodes[id].mass).collect()
    }

    pub fn has_intervals(&self) -> bool {
        self.nodes[0].interval.is_some()
    }

    pub fn to_doc(&self) -> TreeDoc {
        TreeDoc {
            nodes: self
                .nodes
                .iter()
                .map(|q| NodeDoc { id: q.id, parent: q.parent, mass: q.mass, interval: q.interval })
                .collect(),
        }
    }

    pub fn from_doc(doc: &TreeDoc) -> Result<Self> {
        for (i, node) in doc.nodes.iter().enumerate() {
            if node.id != i {
                return Err(Error::InvalidTree(format!("document lists node {} at position {i}", node.id)));
            }
        }
        Self::from_parts(
            doc.nodes.iter().map(|q| q.parent).collect(),
            doc.nodes.iter().map(|q| q.mass).collect(),
            doc.nodes.iter().map(|q| q.interval).collect(),
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("tree document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TreeDoc =
            serde_json::from_str(text).map_err(|e| Error::InvalidTree(format!("bad tree JSON: {e}")))?;
        Self::from_doc(&doc)
    }
}

/// Serialized form of a tree: one record per node, in preorder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDoc {
    pub nodes: Vec<NodeDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub mass: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<Interval>,
}

#[derive(Default)]
struct PartsBuilder {
    parents: Vec<Option<NodeId>>,
    masses: Vec<f64>,
    intervals: Vec<Option<Interval>>,
}

impl PartsBuilder {
    fn push(&mut self, parent: Option<NodeId>, mass: f64, interval: Option<Interval>) -> NodeId {
        self.parents.push(parent);
        self.masses.push(mass);
        self.intervals.push(interval);
        self.parents.len() - 1
    }

    fn finish(self) -> Result<TreeSpace> {
        TreeSpace::from_parts(self.parents, self.masses, self.intervals)
    }
}
