//! Causal partition trees: growth on the in-sample heterogeneity criterion,
//! weakest-link pruning, penalty selection on a validation sample and the
//! full fitting pipeline.

mod fit;
mod grow;
mod prune;

use alloc::boxed::Box;
use alloc::vec::Vec;

#[allow(unused_imports)] // float methods are inherent once std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::matrix::RowMajor;
use crate::transform::RegimeKind;

pub use fit::{fit_ctiv, CausalTree, FitConfig, PathPoint, PropensitySource};
pub use grow::{grow, NodeFit};
pub use prune::{prune_path, select_alpha, PathEntry, PruningPath, Selection};

/// Binary tree node carrying a payload (training fit or final estimate).
///
/// Ids follow full-binary-tree numbering: the root is 1 and the children of
/// node `i` are `2i` and `2i + 1`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Node<T> {
    /// Full-binary-tree number.
    pub id: u64,
    /// Per-node payload.
    pub payload: T,
    /// Children, absent for leaves.
    pub split: Option<Box<Split<T>>>,
}

/// Internal-node routing rule: `x[feature] <= threshold` goes left.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Split<T> {
    /// Covariate column.
    pub feature: usize,
    /// Cut point.
    pub threshold: f64,
    /// Units with `x[feature] <= threshold`.
    pub left: Node<T>,
    /// Units with `x[feature] > threshold`.
    pub right: Node<T>,
}

impl<T> Node<T> {
    /// A childless node.
    pub fn leaf(id: u64, payload: T) -> Self {
        Self {
            id,
            payload,
            split: None,
        }
    }

    /// True when the node has no children.
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }

    /// Leaves in left-to-right order.
    pub fn leaves(&self) -> Vec<&Node<T>> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a Node<T>>) {
        match &self.split {
            None => out.push(self),
            Some(s) => {
                s.left.collect_leaves(out);
                s.right.collect_leaves(out);
            }
        }
    }

    /// Number of leaves.
    pub fn n_leaves(&self) -> usize {
        match &self.split {
            None => 1,
            Some(s) => s.left.n_leaves() + s.right.n_leaves(),
        }
    }

    /// Every node in pre-order.
    pub fn nodes(&self) -> Vec<&Node<T>> {
        let mut out = Vec::new();
        let mut stack = alloc::vec![self];
        while let Some(node) = stack.pop() {
            out.push(node);
            if let Some(s) = &node.split {
                stack.push(&s.right);
                stack.push(&s.left);
            }
        }
        out
    }

    /// Depth of the deepest leaf (a lone root has depth 0).
    pub fn depth(&self) -> usize {
        match &self.split {
            None => 0,
            Some(s) => 1 + s.left.depth().max(s.right.depth()),
        }
    }

    /// The leaf reached by `x`. The caller guarantees `x` is long enough.
    pub fn route(&self, x: &[f64]) -> &Node<T> {
        let mut node = self;
        while let Some(s) = &node.split {
            node = if x[s.feature] <= s.threshold {
                &s.left
            } else {
                &s.right
            };
        }
        node
    }

    /// Largest feature index used by any split, plus one.
    pub fn required_features(&self) -> usize {
        self.nodes()
            .iter()
            .filter_map(|n| n.split.as_ref().map(|s| s.feature + 1))
            .max()
            .unwrap_or(0)
    }

    /// Same shape with a transformed payload.
    pub fn map<U>(&self, f: &mut impl FnMut(&Node<T>) -> U) -> Node<U> {
        Node {
            id: self.id,
            payload: f(self),
            split: self.split.as_ref().map(|s| {
                Box::new(Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left: s.left.map(f),
                    right: s.right.map(f),
                })
            }),
        }
    }

    /// Whether `other` can be obtained from `self` by collapsing internal
    /// nodes into leaves (same ids, features and thresholds).
    pub fn contains_pruned<U>(&self, other: &Node<U>) -> bool {
        if self.id != other.id {
            return false;
        }
        match (&self.split, &other.split) {
            (_, None) => true,
            (None, Some(_)) => false,
            (Some(a), Some(b)) => {
                a.feature == b.feature
                    && a.threshold.to_bits() == b.threshold.to_bits()
                    && a.left.contains_pruned(&b.left)
                    && a.right.contains_pruned(&b.right)
            }
        }
    }

    /// Same split structure, ignoring payloads.
    pub fn same_shape<U>(&self, other: &Node<U>) -> bool {
        self.contains_pruned(other) && other.contains_pruned(self)
    }
}

/// Constraints for growing a tree.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GrowthConfig {
    /// Maximum number of split levels.
    pub max_depth: usize,
    /// Minimum leaf size as a share of the units the tree is grown on.
    pub min_leaf_fraction: f64,
    /// Minimum units per indicator arm in every leaf.
    pub min_arm_count: usize,
    /// Indicator and propensity model.
    pub regime: RegimeKind,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        Self {
            max_depth: 2,
            min_leaf_fraction: 0.1,
            min_arm_count: 10,
            regime: RegimeKind::IvRandomized,
        }
    }
}

impl GrowthConfig {
    /// Checks the parameter ranges.
    pub fn validate(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(Error::Input("max_depth must be at least 1".into()));
        }
        if !(self.min_leaf_fraction > 0.0 && self.min_leaf_fraction <= 0.5) {
            return Err(Error::Input(
                "min_leaf_fraction must lie in (0, 0.5]".into(),
            ));
        }
        if self.min_arm_count < 1 {
            return Err(Error::Input("min_arm_count must be at least 1".into()));
        }
        Ok(())
    }

    /// Minimum leaf size for a sample of `n` units.
    pub fn min_leaf(&self, n: usize) -> usize {
        ((self.min_leaf_fraction * n as f64).ceil() as usize).max(1)
    }
}

/// Units a tree is grown or validated on: covariates, outcomes, the regime's
/// indicator and its propensity.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    /// Covariates.
    pub x: RowMajor<'a>,
    /// Outcomes.
    pub y: &'a [f64],
    /// Indicator (`W` or `Z`).
    pub d: &'a [u8],
    /// Propensity of `d = 1`.
    pub e: &'a [f64],
}

impl Sample<'_> {
    /// Number of units.
    pub fn len(&self) -> usize {
        self.y.len()
    }

    /// True without units.
    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Owned counterpart of [`Sample`], gathered from a subset of rows.
#[derive(Debug, Clone, Default)]
pub struct OwnedSample {
    x: Vec<f64>,
    k: usize,
    y: Vec<f64>,
    d: Vec<u8>,
    e: Vec<f64>,
}

impl OwnedSample {
    /// Copies rows `idx` of the given columns.
    pub fn gather(x: RowMajor<'_>, y: &[f64], d: &[u8], e: &[f64], idx: &[usize]) -> Self {
        let mut xs = Vec::with_capacity(idx.len() * x.cols());
        for &i in idx {
            xs.extend_from_slice(x.row(i));
        }
        Self {
            x: xs,
            k: x.cols(),
            y: idx.iter().map(|&i| y[i]).collect(),
            d: idx.iter().map(|&i| d[i]).collect(),
            e: idx.iter().map(|&i| e[i]).collect(),
        }
    }

    /// Borrowed view.
    pub fn view(&self) -> Sample<'_> {
        Sample {
            x: RowMajor::new(&self.x, self.k),
            y: &self.y,
            d: &self.d,
            e: &self.e,
        }
    }
}
