use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::grow::{grow, NodeFit};
use super::prune::{prune_path, select_alpha};
use super::{GrowthConfig, Node, OwnedSample};
use crate::dataset::{trim_mask, Dataset, SplitIndices};
use crate::effects::{estimate_leaf, overall_cace, LeafData, LeafEstimate};
use crate::error::{Error, Result};
use crate::matrix::RowMajor;
use crate::propensity::{estimate_constant_p, fit_logistic, LogisticOptions, PropensityModel};
use crate::transform::RegimeKind;

/// Everything [`fit_ctiv`] needs besides the data and the split.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitConfig {
    /// Tree growth constraints and regime.
    pub growth: GrowthConfig,
    /// Lower edge of the kept propensity band.
    pub trim_lo: f64,
    /// Upper edge of the kept propensity band.
    pub trim_hi: f64,
    /// Logistic propensity settings.
    pub logistic: LogisticOptions,
    /// Fixed pruning penalty; when set, validation-based selection is skipped.
    pub alpha: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            growth: GrowthConfig::default(),
            trim_lo: 0.1,
            trim_hi: 0.9,
            logistic: LogisticOptions::default(),
            alpha: None,
        }
    }
}

/// How the splitting indicator's propensity was obtained.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum PropensitySource {
    /// Randomized assignment: the sample share of `z = 1`.
    Constant {
        /// Estimated share.
        p: f64,
    },
    /// Logistic regression on the covariates.
    Logistic(PropensityModel),
}

impl PropensitySource {
    /// Propensity of every row of `x`.
    pub fn predict_all(&self, x: RowMajor<'_>) -> Result<Vec<f64>> {
        match self {
            PropensitySource::Constant { p } => Ok(alloc::vec![*p; x.rows()]),
            PropensitySource::Logistic(m) => m.predict_all(x),
        }
    }
}

/// One pruning-path member as scored during selection.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PathPoint {
    /// Critical penalty of the subtree.
    pub alpha: f64,
    /// Its leaf count.
    pub n_leaves: usize,
    /// Validation score; NaN when the penalty was fixed by the caller.
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub q_oos: f64,
}

/// A fitted tree with estimates on every node plus fit metadata.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CausalTree {
    /// Root of the final tree; internal nodes carry estimates too.
    pub root: Node<LeafEstimate>,
    /// Regime the tree was fitted under.
    pub regime: RegimeKind,
    /// Covariate labels, in column order.
    pub feature_names: Vec<String>,
    /// Selected (or fixed) pruning penalty.
    pub alpha: f64,
    /// Units in the estimation sample (train ∪ validation after trimming).
    pub n_omega: usize,
    /// Units dropped by propensity trimming.
    pub n_trimmed: usize,
    /// Propensity model of the splitting indicator.
    pub propensity: PropensitySource,
    /// Pruning path of the training tree with validation scores.
    pub path: Vec<PathPoint>,
    /// Configuration used.
    pub config: FitConfig,
}

impl CausalTree {
    /// Number of covariates the tree expects.
    pub fn k(&self) -> usize {
        self.feature_names.len()
    }

    /// Estimate of the leaf `x` falls into (`x[j] <= threshold` goes left).
    pub fn predict_leaf(&self, x: &[f64]) -> Result<&LeafEstimate> {
        if x.len() != self.k() {
            return Err(Error::Dimension {
                expected: self.k(),
                got: x.len(),
            });
        }
        Ok(&self.root.route(x).payload)
    }

    /// Leaf estimates, left to right.
    pub fn leaves(&self) -> Vec<&LeafEstimate> {
        self.root.leaves().into_iter().map(|n| &n.payload).collect()
    }

    /// Predicted effect at `x` under the tree's regime; `None` when the
    /// leaf's effect is undefined.
    pub fn effect(&self, x: &[f64]) -> Result<Option<f64>> {
        Ok(self.predict_leaf(x)?.effect(self.regime))
    }

    /// Complier-weighted average of the leaf complier effects.
    pub fn overall_cace(&self) -> Result<f64> {
        let leaves: Vec<LeafEstimate> = self.leaves().into_iter().cloned().collect();
        overall_cace(&leaves)
    }
}

fn indicator(ds: &Dataset, regime: RegimeKind) -> Result<&[u8]> {
    if regime.uses_instrument() {
        ds.z()
            .ok_or_else(|| Error::Schema(format!("regime {regime} needs an assignment column")))
    } else {
        Ok(ds.w())
    }
}

fn fit_propensity(ds: &Dataset, d: &[u8], cfg: &FitConfig) -> Result<PropensitySource> {
    match cfg.growth.regime {
        RegimeKind::IvRandomized => Ok(PropensitySource::Constant {
            p: estimate_constant_p(d)?,
        }),
        RegimeKind::Ct | RegimeKind::IvUnconfounded => Ok(PropensitySource::Logistic(
            fit_logistic(ds.covariates(), d, cfg.logistic)?,
        )),
    }
}

/// Fits a causal tree (plain or instrumental-variable, by `cfg.growth.regime`).
///
/// 1. propensity of the splitting indicator on all units;
/// 2. drop units outside `[trim_lo, trim_hi]`;
/// 3. grow on the kept training units and build the pruning path;
/// 4. pick the penalty on the kept validation units (unless fixed);
/// 5. regrow on train ∪ validation, prune at that penalty and estimate every
///    node there.
///
/// Test indices are never read.
pub fn fit_ctiv(ds: &Dataset, cfg: &FitConfig, split: &SplitIndices) -> Result<CausalTree> {
    cfg.growth.validate()?;
    let regime = cfg.growth.regime;
    let d = indicator(ds, regime)?;
    let n = ds.n();
    if split
        .train
        .iter()
        .chain(&split.validation)
        .chain(&split.test)
        .any(|&i| i >= n)
    {
        return Err(Error::Split(format!(
            "split index out of range for {n} units"
        )));
    }
    let propensity = fit_propensity(ds, d, cfg)?;
    let e = propensity.predict_all(ds.covariates())?;
    let kept = trim_mask(&e, cfg.trim_lo, cfg.trim_hi)?;
    let mut keep = alloc::vec![false; n];
    kept.iter().for_each(|&i| keep[i] = true);
    let train: Vec<usize> = split.train.iter().copied().filter(|&i| keep[i]).collect();
    let validation: Vec<usize> = split
        .validation
        .iter()
        .copied()
        .filter(|&i| keep[i])
        .collect();
    if train.is_empty() {
        return Err(Error::EmptyAfterTrim {
            lo: cfg.trim_lo,
            hi: cfg.trim_hi,
        });
    }

    let x = ds.covariates();
    // Leaf estimates ignore a common shift of the outcome, but the
    // transformed-outcome loss does not: centering on the training mean keeps
    // its variance, and so the noise in penalty selection, down.
    let y_bar = train.iter().map(|&i| ds.y()[i]).sum::<f64>() / train.len() as f64;
    let centered: Vec<f64> = ds.y().iter().map(|v| v - y_bar).collect();
    let y = centered.as_slice();
    let train_sample = OwnedSample::gather(x, y, d, &e, &train);
    let train_tree = grow(&train_sample.view(), &cfg.growth)?;
    let path = prune_path(&train_tree);

    let (alpha, q_oos) = match cfg.alpha {
        Some(a) if a >= 0.0 && a.is_finite() => (a, alloc::vec![f64::NAN; path.entries.len()]),
        Some(a) => {
            return Err(Error::Input(format!(
                "pruning penalty must be finite and nonnegative, got {a}"
            )))
        }
        None if validation.is_empty() => {
            return Err(Error::Input(
                "no validation units: supply a validation share or a fixed penalty".into(),
            ))
        }
        None => {
            let va = OwnedSample::gather(x, y, d, &e, &validation);
            let sel = select_alpha(&path, &va.view())?;
            (sel.alpha, sel.q_oos)
        }
    };
    let points = path
        .entries
        .iter()
        .zip(&q_oos)
        .map(|(p, &q)| PathPoint {
            alpha: p.alpha,
            n_leaves: p.n_leaves,
            q_oos: q,
        })
        .collect();

    let mut omega: Vec<usize> = train.iter().chain(&validation).copied().collect();
    omega.sort_unstable();
    let omega_sample = OwnedSample::gather(x, y, d, &e, &omega);
    let full = grow(&omega_sample.view(), &cfg.growth)?;
    let final_shape = prune_path(&full).subtree_at(alpha).tree.clone();
    let root = estimate_nodes(&final_shape, ds, &e, &omega, regime)?;

    Ok(CausalTree {
        root,
        regime,
        feature_names: ds.feature_names().to_vec(),
        alpha,
        n_omega: omega.len(),
        n_trimmed: n - kept.len(),
        propensity,
        path: points,
        config: cfg.clone(),
    })
}

/// Re-estimates every node of `shape` on the units `idx` of `ds`.
fn estimate_nodes(
    shape: &Node<NodeFit>,
    ds: &Dataset,
    e: &[f64],
    idx: &[usize],
    regime: RegimeKind,
) -> Result<Node<LeafEstimate>> {
    let x = ds.covariates();
    let y: Vec<f64> = idx.iter().map(|&i| ds.y()[i]).collect();
    let w: Vec<u8> = idx.iter().map(|&i| ds.w()[i]).collect();
    let z: Option<Vec<u8>> = ds.z().map(|z| idx.iter().map(|&i| z[i]).collect());
    let es: Vec<f64> = idx.iter().map(|&i| e[i]).collect();
    let mut xs = Vec::with_capacity(idx.len() * x.cols());
    idx.iter().for_each(|&i| xs.extend_from_slice(x.row(i)));
    let members: Vec<usize> = (0..idx.len()).collect();
    node_estimates(
        shape,
        &members,
        &NodeInputs {
            x: &xs,
            k: x.cols(),
            y: &y,
            w: &w,
            z: z.as_deref(),
            e: &es,
        },
        regime,
    )
}

struct NodeInputs<'a> {
    x: &'a [f64],
    k: usize,
    y: &'a [f64],
    w: &'a [u8],
    z: Option<&'a [u8]>,
    e: &'a [f64],
}

fn node_estimates(
    node: &Node<NodeFit>,
    members: &[usize],
    data: &NodeInputs<'_>,
    regime: RegimeKind,
) -> Result<Node<LeafEstimate>> {
    let mut xs = Vec::with_capacity(members.len() * data.k);
    members
        .iter()
        .for_each(|&i| xs.extend_from_slice(&data.x[i * data.k..(i + 1) * data.k]));
    let y: Vec<f64> = members.iter().map(|&i| data.y[i]).collect();
    let w: Vec<u8> = members.iter().map(|&i| data.w[i]).collect();
    let z: Option<Vec<u8>> = data.z.map(|z| members.iter().map(|&i| z[i]).collect());
    let e: Vec<f64> = members.iter().map(|&i| data.e[i]).collect();
    let leaf = LeafData {
        y: &y,
        w: &w,
        z: z.as_deref(),
        e: &e,
        x: RowMajor::new(&xs, data.k),
    };
    let payload = estimate_leaf(node.id, regime, &leaf)?;
    let split = match &node.split {
        None => None,
        Some(s) => {
            let (left, right): (Vec<usize>, Vec<usize>) = members
                .iter()
                .partition(|&&i| data.x[i * data.k + s.feature] <= s.threshold);
            Some(alloc::boxed::Box::new(super::Split {
                feature: s.feature,
                threshold: s.threshold,
                left: node_estimates(&s.left, &left, data, regime)?,
                right: node_estimates(&s.right, &right, data, regime)?,
            }))
        }
    };
    Ok(Node {
        id: node.id,
        payload,
        split,
    })
}
