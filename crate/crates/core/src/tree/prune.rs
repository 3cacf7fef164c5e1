use alloc::vec::Vec;

#[allow(unused_imports)] // float methods are inherent once std is linked
use num_traits::Float;

use super::grow::NodeFit;
use super::{Node, Sample};
use crate::error::{Error, Result};
use crate::transform::transformed_outcome;

/// One member of the cost-complexity sequence: the subtree that maximizes
/// `(1/N) Σ n_leaf τ̂_leaf² − α·κ` for every `α` from `alpha` up to the next
/// entry's `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEntry {
    /// Smallest penalty at which this subtree is optimal.
    pub alpha: f64,
    /// The subtree.
    pub tree: Node<NodeFit>,
    /// Its leaf count `κ`.
    pub n_leaves: usize,
}

/// Nested subtrees from the full tree down to the root, with strictly
/// increasing critical penalties and strictly decreasing leaf counts.
#[derive(Debug, Clone, PartialEq)]
pub struct PruningPath {
    /// Entries ordered by increasing `alpha`.
    pub entries: Vec<PathEntry>,
}

impl PruningPath {
    /// The entry optimal at penalty `alpha` (the last with `entry.alpha <= alpha`).
    pub fn subtree_at(&self, alpha: f64) -> &PathEntry {
        self.entries
            .iter()
            .rev()
            .find(|e| e.alpha <= alpha)
            .unwrap_or(&self.entries[0])
    }
}

struct Weakest {
    subtree_gain: f64,
    leaves: usize,
}

/// Subtree gain and leaf count; records the weakest-link value of every
/// internal node in `links`.
fn scan(node: &Node<NodeFit>, total: f64, links: &mut Vec<(u64, f64)>) -> Weakest {
    match &node.split {
        None => Weakest {
            subtree_gain: node.payload.gain() / total,
            leaves: 1,
        },
        Some(s) => {
            let l = scan(&s.left, total, links);
            let r = scan(&s.right, total, links);
            let subtree_gain = l.subtree_gain + r.subtree_gain;
            let leaves = l.leaves + r.leaves;
            let own = node.payload.gain() / total;
            links.push((node.id, (subtree_gain - own) / (leaves - 1) as f64));
            Weakest {
                subtree_gain,
                leaves,
            }
        }
    }
}

fn collapse(node: &Node<NodeFit>, targets: &[u64]) -> Node<NodeFit> {
    match &node.split {
        None => node.clone(),
        Some(_) if targets.contains(&node.id) => Node::leaf(node.id, node.payload),
        Some(s) => {
            let mut out = node.clone();
            let split = out.split.as_mut().expect("internal node");
            split.left = collapse(&s.left, targets);
            split.right = collapse(&s.right, targets);
            out
        }
    }
}

/// Weakest-link pruning sequence on the criterion
/// `(1/N) Σ n_leaf τ̂_leaf² − α·κ`, with `N` the root's unit count.
///
/// Each step collapses every internal node whose per-leaf gain
/// `(G(subtree) − G(node)) / (κ(subtree) − 1)` is minimal; that minimum is the
/// critical penalty of the resulting subtree.
pub fn prune_path(tree: &Node<NodeFit>) -> PruningPath {
    let total = tree.payload.n.max(1) as f64;
    let mut entries = alloc::vec![PathEntry {
        alpha: 0.0,
        tree: tree.clone(),
        n_leaves: tree.n_leaves()
    }];
    loop {
        let current = &entries.last().expect("path is never empty").tree;
        if current.is_leaf() {
            break;
        }
        let mut links = Vec::new();
        scan(current, total, &mut links);
        let min = links.iter().map(|l| l.1).fold(f64::INFINITY, f64::min);
        let targets: Vec<u64> = links.iter().filter(|l| l.1 <= min).map(|l| l.0).collect();
        let pruned = collapse(current, &targets);
        let n_leaves = pruned.n_leaves();
        let last = entries.last_mut().expect("path is never empty");
        if min <= last.alpha {
            // keep thresholds strictly increasing
            last.tree = pruned;
            last.n_leaves = n_leaves;
        } else {
            entries.push(PathEntry {
                alpha: min,
                tree: pruned,
                n_leaves,
            });
        }
    }
    PruningPath { entries }
}

/// Outcome of choosing a penalty on validation data.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Index into the path.
    pub index: usize,
    /// Representative penalty inside the chosen entry's interval.
    pub alpha: f64,
    /// Validation score `−(1/N) Σ (Y* − τ̂(x))²` of every path entry.
    pub q_oos: Vec<f64>,
}

/// Scores every path entry with the transformed-outcome loss on `validation`
/// and keeps the best, breaking ties toward fewer leaves.
///
/// The returned penalty is the geometric midpoint of the chosen entry's
/// interval `[α_k, α_{k+1})`; `α_{k+1}/2` when `α_k = 0` and `2·α_k` for the
/// last entry.
pub fn select_alpha(path: &PruningPath, validation: &Sample<'_>) -> Result<Selection> {
    if validation.is_empty() {
        return Err(Error::Input("validation sample is empty".into()));
    }
    let y_star: Vec<f64> = (0..validation.len())
        .map(|i| transformed_outcome(validation.y[i], validation.d[i], validation.e[i]))
        .collect::<Result<_>>()?;
    let mut q_oos = Vec::with_capacity(path.entries.len());
    for entry in &path.entries {
        let mut sse = 0.0;
        for (i, ys) in y_star.iter().enumerate() {
            let tau = entry.tree.route(validation.x.row(i)).payload.tau;
            if !tau.is_finite() {
                return Err(Error::Estimation(
                    "validation unit reached a leaf without an estimate".into(),
                ));
            }
            sse += (ys - tau) * (ys - tau);
        }
        q_oos.push(-sse / validation.len() as f64);
    }
    let mut index = 0;
    for k in 1..q_oos.len() {
        if q_oos[k] >= q_oos[index] {
            index = k;
        }
    }
    let lo = path.entries[index].alpha;
    let alpha = match path.entries.get(index + 1) {
        Some(next) if lo > 0.0 => (lo * next.alpha).sqrt(),
        Some(next) => next.alpha / 2.0,
        None => 2.0 * lo,
    };
    Ok(Selection {
        index,
        alpha,
        q_oos,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::Split;
    use alloc::boxed::Box;
    use alloc::vec;

    fn fit(n: usize, tau: f64) -> NodeFit {
        NodeFit { n, tau }
    }

    fn internal(
        id: u64,
        nf: NodeFit,
        feature: usize,
        threshold: f64,
        l: Node<NodeFit>,
        r: Node<NodeFit>,
    ) -> Node<NodeFit> {
        Node {
            id,
            payload: nf,
            split: Some(Box::new(Split {
                feature,
                threshold,
                left: l,
                right: r,
            })),
        }
    }

    /// Root splits on a real modifier (big gain); its left child splits on
    /// noise (tiny gain), its right child is a leaf.
    fn depth_two() -> Node<NodeFit> {
        let noisy = internal(
            2,
            fit(100, 0.5),
            1,
            0.0,
            Node::leaf(4, fit(50, 0.55)),
            Node::leaf(5, fit(50, 0.45)),
        );
        internal(
            1,
            fit(200, 1.0),
            0,
            0.0,
            noisy,
            Node::leaf(3, fit(100, 1.5)),
        )
    }

    fn criterion(tree: &Node<NodeFit>, alpha: f64) -> f64 {
        let total = tree.payload.n as f64;
        tree.leaves()
            .iter()
            .map(|l| l.payload.gain() / total)
            .sum::<f64>()
            - alpha * tree.n_leaves() as f64
    }

    #[test]
    fn root_only_path() {
        let path = prune_path(&Node::leaf(1, fit(10, 0.3)));
        assert_eq!(path.entries.len(), 1);
        assert_eq!((path.entries[0].alpha, path.entries[0].n_leaves), (0.0, 1));
    }

    #[test]
    fn noise_split_collapses_first() {
        let tree = depth_two();
        let path = prune_path(&tree);
        let leaves: Vec<usize> = path.entries.iter().map(|e| e.n_leaves).collect();
        assert_eq!(leaves, vec![3, 2, 1]);
        // the noise split (node 2) goes before the real split (node 1)
        assert!(path.entries[1].tree.split.as_ref().unwrap().left.is_leaf());
        assert!(path.entries[1].alpha < path.entries[2].alpha);

        // oracle: evaluate the criterion for all four prunings over an α grid
        let l = |t: &Node<NodeFit>| t.clone();
        let only_root = Node::leaf(1, fit(200, 1.0));
        let root_split = internal(
            1,
            fit(200, 1.0),
            0,
            0.0,
            Node::leaf(2, fit(100, 0.5)),
            Node::leaf(3, fit(100, 1.5)),
        );
        let candidates = [l(&tree), root_split, only_root];
        for step in 0..2000 {
            let alpha = step as f64 * 1e-4;
            let best = candidates
                .iter()
                .max_by(|a, b| {
                    criterion(a, alpha)
                        .total_cmp(&criterion(b, alpha))
                        .then(b.n_leaves().cmp(&a.n_leaves()))
                })
                .unwrap();
            let chosen = &path.subtree_at(alpha).tree;
            assert!(
                (criterion(best, alpha) - criterion(chosen, alpha)).abs() < 1e-12,
                "alpha {alpha}: path picked {} leaves, oracle {}",
                chosen.n_leaves(),
                best.n_leaves()
            );
        }
    }

    #[test]
    fn nested_and_strictly_ordered() {
        let path = prune_path(&depth_two());
        for pair in path.entries.windows(2) {
            assert!(pair[0].alpha < pair[1].alpha);
            assert!(pair[0].n_leaves > pair[1].n_leaves);
            assert!(pair[0].tree.contains_pruned(&pair[1].tree));
        }
        assert!(path.entries.last().unwrap().tree.is_leaf());
    }

    #[test]
    fn selection_ties_go_to_smaller_tree() {
        // identical leaf estimates: every entry scores the same
        let flat = internal(
            1,
            fit(40, 1.0),
            0,
            0.0,
            Node::leaf(2, fit(20, 1.0)),
            Node::leaf(3, fit(20, 1.0)),
        );
        let path = PruningPath {
            entries: vec![
                PathEntry {
                    alpha: 0.0,
                    tree: flat,
                    n_leaves: 2,
                },
                PathEntry {
                    alpha: 0.5,
                    tree: Node::leaf(1, fit(40, 1.0)),
                    n_leaves: 1,
                },
            ],
        };
        let x = [-1.0, 1.0];
        let v = Sample {
            x: crate::RowMajor::new(&x, 1),
            y: &[1.0, 2.0],
            d: &[1, 0],
            e: &[0.5, 0.5],
        };
        let sel = select_alpha(&path, &v).unwrap();
        assert_eq!(sel.index, 1);
        assert_eq!(sel.alpha, 1.0);
        assert_eq!(sel.q_oos[0], sel.q_oos[1]);

        let root_only = PathEntry {
            alpha: 0.0,
            ..path.entries[1].clone()
        };
        let single = PruningPath {
            entries: vec![root_only],
        };
        let sel = select_alpha(&single, &v).unwrap();
        assert_eq!((sel.index, sel.alpha), (0, 0.0));
    }
}
