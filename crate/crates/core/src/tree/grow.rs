use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use super::{GrowthConfig, Node, Sample, Split};
use crate::error::{Error, Result};
use crate::transform::{ArmSums, Unit};

/// Training-sample summary stored in every grown node.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NodeFit {
    /// Units reaching the node.
    pub n: usize,
    /// Weighted effect estimate of the node.
    pub tau: f64,
}

impl NodeFit {
    /// Contribution `n · τ̂²` to the heterogeneity criterion.
    pub fn gain(&self) -> f64 {
        self.n as f64 * self.tau * self.tau
    }
}

#[inline]
fn unit(sample: &Sample<'_>, i: usize) -> Unit {
    Unit {
        y: sample.y[i],
        d: sample.d[i],
        e: sample.e[i],
    }
}

fn sums_of(sample: &Sample<'_>, idx: &[usize]) -> ArmSums {
    let mut s = ArmSums::default();
    for &i in idx {
        s.push(unit(sample, i));
    }
    s
}

/// Greedily grows a tree maximizing `Σ_leaves n_leaf · τ̂_leaf²`.
///
/// A node is split on the `(feature, threshold)` pair with the largest
/// children gain among candidates that keep `min_leaf` units and
/// `min_arm_count` units per arm on both sides; it stays a leaf at
/// `max_depth`, without admissible candidates, or when no candidate strictly
/// beats the node's own `n · τ̂²`. Ties go to the lowest feature, then the
/// lowest threshold.
pub fn grow(sample: &Sample<'_>, cfg: &GrowthConfig) -> Result<Node<NodeFit>> {
    cfg.validate()?;
    if sample.is_empty() {
        return Err(Error::Growth("no units to grow on".into()));
    }
    let idx: Vec<usize> = (0..sample.len()).collect();
    let root = sums_of(sample, &idx);
    if root.n1() < cfg.min_arm_count || root.n0() < cfg.min_arm_count {
        return Err(Error::Growth(format!(
            "root has {} / {} units per arm, need {}",
            root.n1(),
            root.n0(),
            cfg.min_arm_count
        )));
    }
    let min_leaf = cfg.min_leaf(sample.len());
    Ok(grow_node(sample, cfg, min_leaf, idx, 1, 0))
}

fn grow_node(
    sample: &Sample<'_>,
    cfg: &GrowthConfig,
    min_leaf: usize,
    idx: Vec<usize>,
    id: u64,
    depth: usize,
) -> Node<NodeFit> {
    let total = sums_of(sample, &idx);
    let fit = NodeFit {
        n: idx.len(),
        tau: total.estimate().unwrap_or(f64::NAN),
    };
    if depth >= cfg.max_depth {
        return Node::leaf(id, fit);
    }
    let Some(best) = best_split(sample, cfg, min_leaf, &idx, &total) else {
        return Node::leaf(id, fit);
    };
    if !(best.gain > fit.gain()) {
        return Node::leaf(id, fit);
    }
    let (left, right): (Vec<usize>, Vec<usize>) = idx
        .iter()
        .partition(|&&i| sample.x.get(i, best.feature) <= best.threshold);
    Node {
        id,
        payload: fit,
        split: Some(Box::new(Split {
            feature: best.feature,
            threshold: best.threshold,
            left: grow_node(sample, cfg, min_leaf, left, 2 * id, depth + 1),
            right: grow_node(sample, cfg, min_leaf, right, 2 * id + 1, depth + 1),
        })),
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Midpoint strictly below `hi`, so every unit at `lo` routes left and every
/// unit at `hi` routes right.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m >= lo && m < hi {
        m
    } else {
        lo
    }
}

fn best_split(
    sample: &Sample<'_>,
    cfg: &GrowthConfig,
    min_leaf: usize,
    idx: &[usize],
    total: &ArmSums,
) -> Option<Candidate> {
    let n = idx.len();
    if n < 2 * min_leaf {
        return None;
    }
    let arms_ok = |s: &ArmSums| s.n1() >= cfg.min_arm_count && s.n0() >= cfg.min_arm_count;
    let mut best: Option<Candidate> = None;
    let mut order = idx.to_vec();
    for feature in 0..sample.x.cols() {
        let value = |i: usize| sample.x.get(i, feature);
        order.sort_by(|&a, &b| value(a).total_cmp(&value(b)).then(a.cmp(&b)));
        let mut left = ArmSums::default();
        for pos in 0..n - 1 {
            left.push(unit(sample, order[pos]));
            let (here, next) = (value(order[pos]), value(order[pos + 1]));
            let n_left = pos + 1;
            if n - n_left < min_leaf {
                break;
            }
            if here == next || n_left < min_leaf || !arms_ok(&left) {
                continue;
            }
            let right = total.minus(&left);
            if !arms_ok(&right) {
                continue;
            }
            let (Some(tl), Some(tr)) = (left.estimate(), right.estimate()) else {
                continue;
            };
            let gain = n_left as f64 * tl * tl + (n - n_left) as f64 * tr * tr;
            if best.is_none_or(|b| gain > b.gain) {
                best = Some(Candidate {
                    feature,
                    threshold: midpoint(here, next),
                    gain,
                });
            }
        }
    }
    best
}
