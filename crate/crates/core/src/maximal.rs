//! Averages over tree nodes, the fractional maximal operator and its
//! linearization through the sets `E(Q)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tree::{NodeId, TreeSpace};

/// Relative slack under which two candidate values count as the same maximum
/// when picking the shallowest maximizer.
pub const TIE_REL_TOL: f64 = 1e-12;

/// A function constant on the leaves of a tree: one value per leaf slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleFunction<'t> {
    tree: &'t TreeSpace,
    values: Vec<f64>,
}

impl<'t> SimpleFunction<'t> {
    pub fn new(tree: &'t TreeSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != tree.leaf_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} leaves",
                values.len(),
                tree.leaf_count()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch(format!("value at leaf slot {bad} is not finite")));
        }
        Ok(Self { tree, values })
    }

    pub fn constant(tree: &'t TreeSpace, c: f64) -> Self {
        Self { tree, values: vec![c; tree.leaf_count()] }
    }

    /// `χ_Q`: 1 on the leaves below `node`, 0 elsewhere.
    pub fn indicator(tree: &'t TreeSpace, node: NodeId) -> Result<Self> {
        tree.node(node)?;
        let mut values = vec![0.0; tree.leaf_count()];
        for slot in tree.leaf_span(node) {
            values[slot] = 1.0;
        }
        Ok(Self { tree, values })
    }

    pub fn tree(&self) -> &'t TreeSpace {
        self.tree
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { tree: self.tree, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// Leafwise product.
    pub fn mul(&self, other: &SimpleFunction<'_>) -> Result<Self> {
        self.check_same_tree(other)?;
        Ok(Self {
            tree: self.tree,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        })
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    pub fn is_positive(&self) -> bool {
        self.values.iter().all(|&v| v > 0.0)
    }

    /// `∫ f dμ` over the whole space.
    pub fn integral(&self) -> f64 {
        self.values.iter().zip(self.tree.leaves()).map(|(v, &id)| v * self.tree.mass(id)).sum()
    }

    /// `∫_Q f dμ` for every node `Q`, indexed by node id.
    pub fn node_integrals(&self) -> Vec<f64> {
        let leaf_mass: Vec<f64> =
            self.values.iter().zip(self.tree.leaves()).map(|(v, &id)| v * self.tree.mass(id)).collect();
        subtree_sums(self.tree, &leaf_mass)
    }

    pub(crate) fn check_same_tree(&self, other: &SimpleFunction<'_>) -> Result<()> {
        if std::ptr::eq(self.tree, other.tree) || self.tree == other.tree {
            Ok(())
        } else {
            Err(Error::ShapeMismatch("functions live on different trees".into()))
        }
    }
}

/// Sums a per-leaf quantity over every subtree (indexed by node id).
pub fn subtree_sums(tree: &TreeSpace, per_leaf: &[f64]) -> Vec<f64> {
    let n = tree.node_count();
    let mut sums = vec![0.0; n];
    for id in (0..n).rev() {
        let node = &tree.nodes()[id];
        sums[id] = if node.is_leaf() {
            per_leaf[tree.leaf_slot(id).expect("leaf slot")]
        } else {
            node.children.iter().map(|&c| sums[c]).sum()
        };
    }
    sums
}

/// `⟨f⟩_Q`.
pub fn average(f: &SimpleFunction<'_>, q: NodeId) -> Result<f64> {
    let tree = f.tree();
    let node = tree.node(q)?;
    let total: f64 = tree
        .leaf_span(q)
        .map(|slot| f.values[slot] * tree.mass(tree.leaves()[slot]))
        .sum();
    Ok(total / node.mass)
}

/// `⟨f⟩_{Q,σ} = ∫_Q f σ dμ / σ(Q)`.
pub fn weighted_average(f: &SimpleFunction<'_>, q: NodeId, sigma: &SimpleFunction<'_>) -> Result<f64> {
    f.check_same_tree(sigma)?;
    let tree = f.tree();
    tree.node(q)?;
    let (mut num, mut den) = (0.0, 0.0);
    for slot in tree.leaf_span(q) {
        let m = tree.mass(tree.leaves()[slot]);
        num += f.values[slot] * sigma.values[slot] * m;
        den += sigma.values[slot] * m;
    }
    if den <= 0.0 {
        return Err(Error::InvalidWeight(format!("σ(Q) = {den} on node {q}")));
    }
    Ok(num / den)
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::InvalidExponents(format!("α = {alpha} must lie in [0, 1)")))
    }
}

/// `μ(Q)^α ⟨|f|⟩_Q` for every node.
pub fn node_values(f: &SimpleFunction<'_>, alpha: f64) -> Vec<f64> {
    let tree = f.tree();
    let abs = f.map(f64::abs);
    abs.node_integrals()
        .iter()
        .zip(tree.nodes())
        .map(|(&int, q)| q.mass.powf(alpha) * int / q.mass)
        .collect()
}

/// Per-leaf maximum of `node_value` over the ancestors, computed in one
/// root-to-leaf sweep.
pub(crate) fn running_max_to_leaves(tree: &TreeSpace, node_value: &[f64]) -> Vec<f64> {
    let mut running = vec![0.0f64; tree.node_count()];
    for q in tree.nodes() {
        running[q.id] = match q.parent {
            Some(p) => running[p].max(node_value[q.id]),
            None => node_value[q.id],
        };
    }
    tree.leaves().iter().map(|&id| running[id]).collect()
}

/// `M^α_T f`: per leaf, the largest `μ(Q)^α ⟨|f|⟩_Q` over the nodes containing it.
pub fn frac_maximal<'t>(f: &SimpleFunction<'t>, alpha: f64) -> Result<SimpleFunction<'t>> {
    check_alpha(alpha)?;
    let values = running_max_to_leaves(f.tree(), &node_values(f, alpha));
    Ok(SimpleFunction { tree: f.tree(), values })
}

/// Same operator evaluated by scanning each leaf's ancestor chain directly.
/// Quadratic in the depth; kept as an independent reference.
pub fn frac_maximal_by_scan<'t>(f: &SimpleFunction<'t>, alpha: f64) -> Result<SimpleFunction<'t>> {
    check_alpha(alpha)?;
    let tree = f.tree();
    let mut values = Vec::with_capacity(tree.leaf_count());
    for &leaf in tree.leaves() {
        let mut best = 0.0f64;
        for q in tree.ancestors(leaf)? {
            let mut total = 0.0;
            for slot in tree.leaf_span(q) {
                total += f.values[slot].abs() * tree.mass(tree.leaves()[slot]);
            }
            best = best.max(tree.mass(q).powf(alpha) * total / tree.mass(q));
        }
        values.push(best);
    }
    Ok(SimpleFunction { tree, values })
}

/// The decomposition `M^α_T f = Σ_Q μ(Q)^α ⟨f⟩_Q χ_{E(Q)}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Linearization {
    /// Chosen maximizing node `Q̃(ω)` for each leaf slot.
    pub assignment: Vec<NodeId>,
    /// `E(Q)` as leaf slots, indexed by node id.
    pub e_sets: Vec<Vec<usize>>,
    /// `μ(Q)^α ⟨f⟩_Q`, indexed by node id.
    pub node_values: Vec<f64>,
}

impl Linearization {
    /// Leafwise `Σ_Q μ(Q)^α ⟨f⟩_Q χ_{E(Q)}`.
    pub fn reconstruct(&self) -> Vec<f64> {
        self.assignment.iter().map(|&q| self.node_values[q]).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("linearization serializes")
    }
}

/// Assigns each leaf to the shallowest node attaining its maximal-function value.
pub fn linearize(f: &SimpleFunction<'_>, alpha: f64) -> Result<Linearization> {
    check_alpha(alpha)?;
    if !f.is_nonnegative() {
        return Err(Error::Domain("linearize expects a nonnegative function".into()));
    }
    let tree = f.tree();
    let node_values = node_values(f, alpha);
    let mut best: Vec<NodeId> = vec![0; tree.node_count()];
    for q in tree.nodes() {
        best[q.id] = match q.parent {
            None => q.id,
            Some(p) => {
                let incumbent = node_values[best[p]];
                // Within one level the containing node is unique, so replacing only on a
                // strict improvement already yields the minimal depth.
                if node_values[q.id] > incumbent * (1.0 + TIE_REL_TOL) {
                    q.id
                } else {
                    best[p]
                }
            }
        };
    }
    let assignment: Vec<NodeId> = tree.leaves().iter().map(|&id| best[id]).collect();
    let mut e_sets = vec![Vec::new(); tree.node_count()];
    for (slot, &q) in assignment.iter().enumerate() {
        e_sets[q].push(slot);
    }
    Ok(Linearization { assignment, e_sets, node_values })
}
