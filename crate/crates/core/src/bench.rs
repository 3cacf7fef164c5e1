//! Head-to-head comparison of the plain causal tree and the instrumental
//! variable tree on synthetic designs: test-set MSE against the true effect
//! and the relative gap between the two.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::dataset::{holdout_split, Fractions};
use crate::error::{Error, Result};
use crate::matrix::RowMajor;
use crate::stats::{mean, sample_sd};
use crate::synth::{generate, Design, DesignSpec};
use crate::transform::RegimeKind;
use crate::tree::{fit_ctiv, CausalTree, FitConfig, GrowthConfig};

/// Estimation/test layout of a cell: the estimation half is split evenly
/// into training and validation.
pub const CELL_FRACTIONS: Fractions = Fractions {
    train: 0.25,
    validation: 0.25,
    test: 0.5,
};

/// Test-set error of one tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseEval {
    /// Mean squared error over units whose leaf has a defined effect.
    pub mse: f64,
    /// Units skipped because their leaf effect is undefined.
    pub excluded: usize,
}

/// `(1/N) Σ (true_cate − effect of the unit's leaf)²`; leaf ATE for the plain
/// tree, leaf CACE for instrument regimes.
pub fn evaluate_mse(tree: &CausalTree, x: RowMajor<'_>, true_cate: &[f64]) -> Result<MseEval> {
    if x.rows() != true_cate.len() {
        return Err(Error::Input(alloc::format!(
            "{} rows but {} true effects",
            x.rows(),
            true_cate.len()
        )));
    }
    let mut sse = 0.0;
    let mut used = 0usize;
    let mut excluded = 0usize;
    for (row, truth) in x.iter_rows().zip(true_cate) {
        match tree.effect(row)? {
            Some(tau) => {
                sse += (truth - tau) * (truth - tau);
                used += 1;
            }
            None => excluded += 1,
        }
    }
    if used == 0 {
        return Err(Error::Estimation(
            "no test unit reached a leaf with a defined effect".into(),
        ));
    }
    Ok(MseEval {
        mse: sse / used as f64,
        excluded,
    })
}

/// `(mse_ct − mse_ctiv) / mse_ct · 100`.
pub fn relative_gap(mse_ct: f64, mse_ctiv: f64) -> Result<f64> {
    if !(mse_ct > 0.0) {
        return Err(Error::UndefinedGap);
    }
    Ok((mse_ct - mse_ctiv) / mse_ct * 100.0)
}

/// SplitMix64 finalizer; cells derive their split seed as `splitmix(cell_seed(..))`.
pub fn splitmix(mut state: u64) -> u64 {
    state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream seed for one `(design, n, seed)` cell.
pub fn cell_seed(design: Design, n: usize, seed: u64) -> u64 {
    let tag = design as u64 + 1;
    splitmix(splitmix(splitmix(seed) ^ tag) ^ n as u64)
}

/// Outcome of one benchmark cell.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BenchResult {
    /// Design or scenario.
    pub design: Design,
    /// Estimation sample size (the cell draws `2n` units).
    pub n: usize,
    /// User-facing seed of the cell.
    pub seed: u64,
    /// Plain causal tree test MSE.
    pub mse_ct: f64,
    /// Instrumental-variable tree test MSE.
    pub mse_ctiv: f64,
    /// Relative gap in percent.
    pub relative_gap_pct: f64,
    /// Leaves of the instrumental-variable tree with a weak first stage.
    pub weak_leaves: usize,
    /// Leaves of the instrumental-variable tree.
    pub ctiv_leaves: usize,
    /// Leaves of the plain tree.
    pub ct_leaves: usize,
    /// Test units skipped by either tree for an undefined leaf effect.
    pub excluded: usize,
}

/// Growth settings of the benchmark: depth 2, leaves of at least a tenth of
/// the training sample, 10 units per arm.
pub fn bench_growth() -> GrowthConfig {
    GrowthConfig {
        max_depth: 2,
        min_leaf_fraction: 0.1,
        min_arm_count: 10,
        regime: RegimeKind::Ct,
    }
}

/// Fitted trees of one cell, for callers that need more than the summary.
#[derive(Debug, Clone)]
pub struct CellFit {
    /// Plain causal tree.
    pub ct: CausalTree,
    /// Instrumental-variable tree.
    pub ctiv: CausalTree,
    /// Scores.
    pub result: BenchResult,
}

/// Generates `2n` units, fits both trees on the same estimation half and
/// scores them on the same test half.
pub fn run_cell_with_trees(
    design: Design,
    n: usize,
    seed: u64,
    growth: &GrowthConfig,
) -> Result<CellFit> {
    let stream = cell_seed(design, n, seed);
    let sample = generate(&DesignSpec::new(design, 2 * n, stream))?;
    let split = holdout_split(2 * n, CELL_FRACTIONS, splitmix(stream))?;
    let ds = &sample.dataset;

    let fit = |regime: RegimeKind| {
        let cfg = FitConfig {
            growth: GrowthConfig { regime, ..*growth },
            ..FitConfig::default()
        };
        fit_ctiv(ds, &cfg, &split)
    };
    let ct = fit(RegimeKind::Ct)?;
    let ctiv = fit(RegimeKind::IvRandomized)?;

    let k = ds.k();
    let mut x_test = Vec::with_capacity(split.test.len() * k);
    split
        .test
        .iter()
        .for_each(|&i| x_test.extend_from_slice(ds.row(i)));
    let truth: Vec<f64> = split.test.iter().map(|&i| sample.true_cate[i]).collect();
    let x_test = RowMajor::new(&x_test, k);
    let a = evaluate_mse(&ct, x_test, &truth)?;
    let b = evaluate_mse(&ctiv, x_test, &truth)?;
    let result = BenchResult {
        design,
        n,
        seed,
        mse_ct: a.mse,
        mse_ctiv: b.mse,
        relative_gap_pct: relative_gap(a.mse, b.mse)?,
        weak_leaves: ctiv.leaves().iter().filter(|l| l.weak_instrument()).count(),
        ctiv_leaves: ctiv.root.n_leaves(),
        ct_leaves: ct.root.n_leaves(),
        excluded: a.excluded + b.excluded,
    };
    Ok(CellFit { ct, ctiv, result })
}

/// [`run_cell_with_trees`] keeping only the scores.
pub fn run_cell(design: Design, n: usize, seed: u64, growth: &GrowthConfig) -> Result<BenchResult> {
    run_cell_with_trees(design, n, seed, growth).map(|c| c.result)
}

/// Aggregate of one `(design, n)` cell over seeds.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CellSummary {
    /// Design or scenario.
    pub design: Design,
    /// Estimation sample size.
    pub n: usize,
    /// Seeds aggregated.
    pub runs: usize,
    /// Mean plain-tree MSE.
    pub mse_ct_mean: f64,
    /// Its standard deviation across seeds.
    pub mse_ct_sd: f64,
    /// Mean instrumental-variable tree MSE.
    pub mse_ctiv_mean: f64,
    /// Its standard deviation across seeds.
    pub mse_ctiv_sd: f64,
    /// Mean of the per-seed relative gaps.
    pub gap_mean: f64,
    /// Standard deviation of the per-seed gaps.
    pub gap_sd: f64,
    /// Relative gap of the mean MSEs.
    pub gap_of_means: f64,
    /// Total weak leaves.
    pub weak_leaves: usize,
}

/// Groups results by `(design, n)`; within a group results are ordered by
/// seed first, so the output does not depend on input order.
pub fn summarize(results: &[BenchResult]) -> Vec<CellSummary> {
    let mut groups: BTreeMap<(Design, usize), Vec<&BenchResult>> = BTreeMap::new();
    for r in results {
        groups.entry((r.design, r.n)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((design, n), mut rs)| {
            rs.sort_by_key(|r| r.seed);
            let col = |f: fn(&BenchResult) -> f64| rs.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let (ct, iv, gap) = (
                col(|r| r.mse_ct),
                col(|r| r.mse_ctiv),
                col(|r| r.relative_gap_pct),
            );
            let (mct, miv) = (mean(&ct), mean(&iv));
            CellSummary {
                design,
                n,
                runs: rs.len(),
                mse_ct_mean: mct,
                mse_ct_sd: sample_sd(&ct),
                mse_ctiv_mean: miv,
                mse_ctiv_sd: sample_sd(&iv),
                gap_mean: mean(&gap),
                gap_sd: sample_sd(&gap),
                gap_of_means: relative_gap(mct, miv).unwrap_or(f64::NAN),
                weak_leaves: rs.iter().map(|r| r.weak_leaves).sum(),
            }
        })
        .collect()
}
