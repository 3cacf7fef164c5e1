//! Leaf-level and overall causal estimands: intention to treat, compliance
//! shares, complier average causal effects (ratio and two-stage least
//! squares), Neyman variances and the first-stage F statistic.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // float methods are inherent once std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::matrix::RowMajor;
use crate::transform::{ArmSums, RegimeKind, Unit};

/// First-stage F below this marks a leaf's instrument as weak.
pub const WEAK_INSTRUMENT_F: f64 = 10.0;

/// Everything reported for one tree node.
///
/// Undefined quantities (an empty arm, no compliers, a failed regression) are
/// stored as NaN.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LeafEstimate {
    /// Full-binary-tree node number (root = 1).
    pub leaf_id: u64,
    /// Units in the node.
    pub n: usize,
    /// Units with the splitting indicator equal to 1 (`Z` for IV regimes, `W` otherwise).
    pub n1: usize,
    /// Units with the splitting indicator equal to 0.
    pub n0: usize,
    /// Weighted effect of the splitting indicator: the ITT under IV regimes,
    /// the leaf ATE under the plain causal tree.
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub itt_hat: f64,
    /// Estimated complier share.
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub pi_c_hat: f64,
    /// Estimated always-taker share.
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub pi_at_hat: f64,
    /// Estimated never-taker share.
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub pi_nt_hat: f64,
    /// `itt_hat / pi_c_hat`.
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub cace_hat: f64,
    /// Two-stage least squares standard error of the complier effect.
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub cace_se: f64,
    /// Two-stage least squares complier effect.
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub tsls_cace: f64,
    /// Neyman variance of the arm-mean difference.
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub neyman_var: f64,
    /// First-stage F statistic for the instrument.
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub first_stage_f: f64,
    /// Whether `pi_c_hat > 0`.
    pub compliers_ok: bool,
    /// Whether the two-stage fit conditioned on covariates.
    pub covariate_adjusted: bool,
}

impl LeafEstimate {
    /// Effect used for prediction: the leaf ATE for the plain causal tree,
    /// the complier effect for IV regimes. `None` when undefined.
    pub fn effect(&self, regime: RegimeKind) -> Option<f64> {
        let v = if regime.uses_instrument() {
            self.cace_hat
        } else {
            self.itt_hat
        };
        v.is_finite().then_some(v)
    }

    /// First-stage F below [`WEAK_INSTRUMENT_F`] (or undefined).
    pub fn weak_instrument(&self) -> bool {
        !(self.first_stage_f >= WEAK_INSTRUMENT_F)
    }

    /// Estimated complier count `round(pi_c_hat · n)`; zero without compliers.
    pub fn complier_count(&self) -> u64 {
        if self.compliers_ok {
            (self.pi_c_hat * self.n as f64).round() as u64
        } else {
            0
        }
    }
}

/// Estimated compliance-type distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplianceShares {
    /// Mean of `w` among `z = 0`.
    pub always_takers: f64,
    /// One minus the mean of `w` among `z = 1`.
    pub never_takers: f64,
    /// Mean of `w` among `z = 1` minus mean of `w` among `z = 0`.
    pub compliers: f64,
}

/// Compliance shares from `(z, w)` pairs.
pub fn compliance_shares<I>(units: I) -> Result<ComplianceShares>
where
    I: IntoIterator<Item = (u8, u8)>,
{
    let (mut n1, mut n0, mut w1, mut w0) = (0usize, 0usize, 0usize, 0usize);
    for (z, w) in units {
        if z == 1 {
            n1 += 1;
            w1 += usize::from(w);
        } else {
            n0 += 1;
            w0 += usize::from(w);
        }
    }
    if n1 == 0 || n0 == 0 {
        return Err(Error::EmptyArm(
            "compliance shares need both assignment arms",
        ));
    }
    let m1 = w1 as f64 / n1 as f64;
    let m0 = w0 as f64 / n0 as f64;
    Ok(ComplianceShares {
        always_takers: m0,
        never_takers: 1.0 - m1,
        compliers: m1 - m0,
    })
}

/// Complier average causal effect `itt / pi_c`.
pub fn cace_ratio(itt_hat: f64, pi_c_hat: f64) -> Result<f64> {
    if !(pi_c_hat > 0.0) {
        return Err(Error::NoCompliers(pi_c_hat));
    }
    Ok(itt_hat / pi_c_hat)
}

/// Two-stage least squares fit of `y` on `w` instrumented by `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TslsFit {
    /// Second-stage coefficient on `w`.
    pub gamma_hat: f64,
    /// First-stage coefficient on `z`.
    pub pi1_hat: f64,
    /// Homoskedastic IV standard error of `gamma_hat`.
    pub se_gamma: f64,
    /// Squared t-statistic of `pi1_hat`.
    pub first_stage_f: f64,
    /// Whether covariates entered both stages.
    pub covariate_adjusted: bool,
}

/// Two-stage least squares with intercepts in both stages; with `covariates`
/// the columns enter both stages additively.
pub fn tsls_leaf(
    y: &[f64],
    w: &[u8],
    z: &[u8],
    covariates: Option<RowMajor<'_>>,
) -> Result<TslsFit> {
    let n = y.len();
    if w.len() != n || z.len() != n || covariates.is_some_and(|x| x.rows() != n) {
        return Err(Error::Input("tsls inputs differ in length".into()));
    }
    if !z.contains(&1) || !z.contains(&0) {
        return Err(Error::EmptyArm("tsls needs both assignment arms"));
    }
    let k = covariates.map_or(0, |x| x.cols());
    let p = 2 + k;
    if n <= p {
        return Err(Error::Estimation(format!("{n} units for {p} parameters")));
    }
    let fill = |indicator: &[u8]| {
        DMatrix::from_fn(n, p, |i, j| match j {
            0 => 1.0,
            1 => f64::from(indicator[i]),
            _ => covariates.map_or(0.0, |x| x.get(i, j - 2)),
        })
    };
    let instruments = fill(z);
    let regressors = fill(w);
    let yv = DVector::from_column_slice(y);
    let wv = DVector::from_iterator(n, w.iter().map(|&v| f64::from(v)));

    let qtq = instruments.transpose() * &instruments;
    let qtq_inv = checked_inverse(&qtq)?;

    // first stage: w on [1, z, x]
    let pi = &qtq_inv * (instruments.transpose() * &wv);
    let pi1_hat = pi[1];
    if pi1_hat.abs() < 1e-12 {
        return Err(Error::Identification);
    }
    let first_resid = &wv - &instruments * &pi;
    let rss = first_resid.norm_squared();
    // an exact first stage leaves only rounding noise in the residuals
    let first_stage_f = if rss > 1e-24 * n as f64 {
        pi1_hat * pi1_hat / (rss / (n - p) as f64 * qtq_inv[(1, 1)])
    } else {
        f64::INFINITY
    };

    // just-identified IV: β = (QᵀR)⁻¹ Qᵀy
    let qtr = instruments.transpose() * &regressors;
    let qtr_inv = qtr.try_inverse().ok_or(Error::Identification)?;
    let beta = &qtr_inv * (instruments.transpose() * &yv);
    let resid = &yv - &regressors * &beta;
    let sigma2 = resid.norm_squared() / (n - p) as f64;
    let cov = (&qtr_inv * &qtq * qtr_inv.transpose()) * sigma2;
    Ok(TslsFit {
        gamma_hat: beta[1],
        pi1_hat,
        se_gamma: cov[(1, 1)].max(0.0).sqrt(),
        first_stage_f,
        covariate_adjusted: k > 0,
    })
}

/// Inverse of a symmetric positive semi-definite cross-product matrix,
/// rejecting (numerically) rank-deficient designs.
fn checked_inverse(gram: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = gram.nrows();
    let scale: Vec<f64> = (0..p).map(|i| gram[(i, i)]).collect();
    if scale.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::Estimation(
            "rank-deficient design: zero column".into(),
        ));
    }
    let normalized = DMatrix::from_fn(p, p, |i, j| gram[(i, j)] / (scale[i] * scale[j]).sqrt());
    let chol = normalized
        .cholesky()
        .ok_or_else(|| Error::Estimation("rank-deficient design".into()))?;
    if (0..p).any(|i| chol.l_dirty()[(i, i)].powi(2) < 1e-10) {
        return Err(Error::Estimation("rank-deficient design".into()));
    }
    let inv = chol.inverse();
    Ok(DMatrix::from_fn(p, p, |i, j| {
        inv[(i, j)] / (scale[i] * scale[j]).sqrt()
    }))
}

fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

/// `s_t²/N_t + s_c²/N_c` with unbiased sample variances.
pub fn neyman_variance(treated_y: &[f64], control_y: &[f64]) -> Result<f64> {
    if treated_y.len() < 2 || control_y.len() < 2 {
        return Err(Error::VarianceUndefined);
    }
    Ok(sample_variance(treated_y) / treated_y.len() as f64
        + sample_variance(control_y) / control_y.len() as f64)
}

/// Difference of arm means over `(y, w)` test units and its Neyman variance.
pub fn test_leaf_ate(units: &[(f64, u8)]) -> Result<(f64, f64)> {
    let treated: Vec<f64> = units.iter().filter(|u| u.1 == 1).map(|u| u.0).collect();
    let control: Vec<f64> = units.iter().filter(|u| u.1 == 0).map(|u| u.0).collect();
    if treated.is_empty() || control.is_empty() {
        return Err(Error::EmptyArm("test leaf needs treated and control units"));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let variance = neyman_variance(&treated, &control)?;
    Ok((mean(&treated) - mean(&control), variance))
}

/// Complier-weighted average of leaf complier effects; leaves without
/// compliers are skipped.
pub fn overall_cace(leaves: &[LeafEstimate]) -> Result<f64> {
    let mut total = 0u64;
    let mut acc = 0.0;
    for leaf in leaves
        .iter()
        .filter(|l| l.compliers_ok && l.cace_hat.is_finite())
    {
        let count = leaf.complier_count();
        total += count;
        acc += leaf.cace_hat * count as f64;
    }
    if total == 0 {
        return Err(Error::Aggregation("no compliers across leaves".into()));
    }
    Ok(acc / total as f64)
}

/// Units of one node on the estimation sample.
#[derive(Debug, Clone, Copy)]
pub struct LeafData<'a> {
    /// Outcomes.
    pub y: &'a [f64],
    /// Receipt.
    pub w: &'a [u8],
    /// Assignment, when present.
    pub z: Option<&'a [u8]>,
    /// Propensity of the regime's splitting indicator.
    pub e: &'a [f64],
    /// Covariates, used for the adjusted two-stage fit.
    pub x: RowMajor<'a>,
}

/// Fills a [`LeafEstimate`] for one node.
///
/// Failures of individual estimators leave the corresponding fields NaN
/// rather than aborting: one degenerate leaf must not sink the tree.
pub fn estimate_leaf(
    leaf_id: u64,
    regime: RegimeKind,
    data: &LeafData<'_>,
) -> Result<LeafEstimate> {
    let indicator = if regime.uses_instrument() {
        data.z
            .ok_or_else(|| Error::Schema(format!("regime {regime} needs an assignment column")))?
    } else {
        data.w
    };
    let n = data.y.len();
    let mut sums = ArmSums::default();
    for ((&y, &d), &e) in data.y.iter().zip(indicator).zip(data.e) {
        sums.push(Unit { y, d, e });
    }
    let itt_hat = sums.estimate().unwrap_or(f64::NAN);

    let treated: Vec<f64> = (0..n)
        .filter(|&i| indicator[i] == 1)
        .map(|i| data.y[i])
        .collect();
    let control: Vec<f64> = (0..n)
        .filter(|&i| indicator[i] == 0)
        .map(|i| data.y[i])
        .collect();
    let neyman_var = neyman_variance(&treated, &control).unwrap_or(f64::NAN);

    let mut est = LeafEstimate {
        leaf_id,
        n,
        n1: sums.n1(),
        n0: sums.n0(),
        itt_hat,
        pi_c_hat: f64::NAN,
        pi_at_hat: f64::NAN,
        pi_nt_hat: f64::NAN,
        cace_hat: f64::NAN,
        cace_se: f64::NAN,
        tsls_cace: f64::NAN,
        neyman_var,
        first_stage_f: f64::NAN,
        compliers_ok: false,
        covariate_adjusted: false,
    };
    let Some(z) = data.z.filter(|_| regime.uses_instrument()) else {
        return Ok(est);
    };

    if let Ok(shares) = compliance_shares(z.iter().copied().zip(data.w.iter().copied())) {
        est.pi_c_hat = shares.compliers;
        est.pi_at_hat = shares.always_takers;
        est.pi_nt_hat = shares.never_takers;
        est.compliers_ok = shares.compliers > 0.0;
        if let Ok(c) = cace_ratio(itt_hat, shares.compliers) {
            est.cace_hat = c;
        }
    }

    let adjusted = match regime {
        RegimeKind::IvUnconfounded => tsls_leaf(data.y, data.w, z, Some(data.x)).ok(),
        _ => None,
    };
    if let Some(fit) = adjusted.or_else(|| tsls_leaf(data.y, data.w, z, None).ok()) {
        est.tsls_cace = fit.gamma_hat;
        est.cace_se = fit.se_gamma;
        est.first_stage_f = fit.first_stage_f;
        est.covariate_adjusted = fit.covariate_adjusted;
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;

    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn shares_by_counting() {
        let s = compliance_shares([(1, 1), (1, 1), (1, 0), (0, 0), (0, 0), (0, 1)]).unwrap();
        assert_abs_diff_eq!(s.always_takers, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.never_takers, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.compliers, 1.0 / 3.0, epsilon = 1e-15);

        let one_sided = compliance_shares([(1, 1), (1, 0), (0, 0), (0, 0)]).unwrap();
        assert_eq!(one_sided.always_takers, 0.0);

        let full = compliance_shares([(1, 1), (1, 1), (0, 0)]).unwrap();
        assert_eq!(
            (full.compliers, full.always_takers, full.never_takers),
            (1.0, 0.0, 0.0)
        );
        assert!(compliance_shares([(1, 1), (1, 0)]).is_err());
    }

    #[test]
    fn cace_ratio_examples() {
        // node 15 of the case-study table: ITT 0.55 with ~90% compliers → 0.61
        let c = cace_ratio(0.55, 0.902).unwrap();
        assert_abs_diff_eq!(c, 0.6097, epsilon = 1e-4);
        assert_eq!(cace_ratio(0.2, 1.0).unwrap(), 0.2);
        assert_eq!(cace_ratio(0.0, 0.5).unwrap(), 0.0);
        assert_eq!(cace_ratio(0.3, 0.0), Err(Error::NoCompliers(0.0)));
        assert_eq!(cace_ratio(0.3, -0.1), Err(Error::NoCompliers(-0.1)));
    }

    #[test]
    fn tsls_full_compliance() {
        let y = [2.0, 4.0, 1.0, 1.0];
        let zw = [1, 1, 0, 0];
        let fit = tsls_leaf(&y, &zw, &zw, None).unwrap();
        assert_abs_diff_eq!(fit.gamma_hat, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.pi1_hat, 1.0, epsilon = 1e-12);
        assert_eq!(fit.first_stage_f, f64::INFINITY);
        assert!(!fit.covariate_adjusted);
    }

    #[test]
    fn tsls_errors() {
        let y = [1.0, 2.0, 3.0, 4.0, 5.0];
        // w independent of z: π̂₁ = 0
        assert_eq!(
            tsls_leaf(&y[..4], &[1, 0, 1, 0], &[1, 1, 0, 0], None).map(|_| ()),
            Err(Error::Identification)
        );
        // constant covariate collides with the intercept
        let x = [1.0; 5];
        assert!(matches!(
            tsls_leaf(
                &y,
                &[1, 1, 0, 0, 1],
                &[1, 1, 0, 0, 0],
                Some(RowMajor::new(&x, 1))
            ),
            Err(Error::Estimation(_))
        ));
        assert!(matches!(
            tsls_leaf(&y, &[1; 5], &[1; 5], None),
            Err(Error::EmptyArm(_))
        ));
    }

    #[test]
    fn tsls_standard_error_matches_textbook_formula() {
        // no covariates: Var(γ̂) = σ² Σ(z−z̄)² / (Σ(z−z̄)(w−w̄))²
        let y = [3.1, 0.2, 2.2, 1.9, -0.4, 1.1, 0.7, 2.5];
        let w = [1, 0, 1, 1, 0, 0, 1, 1];
        let z = [1, 0, 1, 0, 0, 1, 1, 0];
        let fit = tsls_leaf(&y, &w, &z, None).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let zf: Vec<f64> = z.iter().map(|&v| f64::from(v)).collect();
        let wf: Vec<f64> = w.iter().map(|&v| f64::from(v)).collect();
        let (zb, wb, yb) = (mean(&zf), mean(&wf), mean(&y));
        let szw: f64 = (0..8).map(|i| (zf[i] - zb) * (wf[i] - wb)).sum();
        let szy: f64 = (0..8).map(|i| (zf[i] - zb) * (y[i] - yb)).sum();
        let szz: f64 = (0..8).map(|i| (zf[i] - zb).powi(2)).sum();
        let gamma = szy / szw;
        let alpha = yb - gamma * wb;
        let sigma2: f64 = (0..8)
            .map(|i| (y[i] - alpha - gamma * wf[i]).powi(2))
            .sum::<f64>()
            / 6.0;
        assert_abs_diff_eq!(fit.gamma_hat, gamma, epsilon = 1e-12);
        assert_abs_diff_eq!(
            fit.se_gamma,
            (sigma2 * szz / (szw * szw)).sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn neyman_examples() {
        // s_t² = 1 with N_t = 4, s_c² = 2 with N_c = 8
        let treated = [
            -0.5 * 3.0f64.sqrt(),
            0.5 * 3.0f64.sqrt(),
            -0.5 * 3.0f64.sqrt(),
            0.5 * 3.0f64.sqrt(),
        ];
        let control =
            [-1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0].map(|v: f64| v * (14.0f64 / 8.0).sqrt());
        assert_abs_diff_eq!(
            neyman_variance(&treated, &control).unwrap(),
            0.5,
            epsilon = 1e-12
        );
        assert_eq!(neyman_variance(&[3.0, 3.0], &[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            neyman_variance(&[0.0, 2.0], &[0.0, 0.0, 0.0, 4.0]).unwrap(),
            2.0,
            epsilon = 1e-15
        );
        assert_eq!(
            neyman_variance(&[1.0], &[1.0, 2.0]),
            Err(Error::VarianceUndefined)
        );
    }

    #[test]
    fn test_leaf_ate_examples() {
        assert_eq!(
            test_leaf_ate(&[(3.0, 1), (1.0, 1), (1.0, 0), (1.0, 0)]).unwrap(),
            (1.0, 1.0)
        );
        let (tau, var) = test_leaf_ate(&[(3.0, 1), (1.0, 1), (3.0, 0), (1.0, 0)]).unwrap();
        assert_eq!((tau, var), (0.0, 2.0));
        assert!(matches!(
            test_leaf_ate(&[(3.0, 1), (1.0, 1)]),
            Err(Error::EmptyArm(_))
        ));
    }

    fn leaf(cace: f64, n: usize, pi_c: f64) -> LeafEstimate {
        LeafEstimate {
            leaf_id: 1,
            n,
            n1: n / 2,
            n0: n - n / 2,
            itt_hat: cace * pi_c,
            pi_c_hat: pi_c,
            pi_at_hat: 0.0,
            pi_nt_hat: 1.0 - pi_c,
            cace_hat: cace,
            cace_se: 0.1,
            tsls_cace: cace,
            neyman_var: 0.01,
            first_stage_f: 50.0,
            compliers_ok: pi_c > 0.0,
            covariate_adjusted: false,
        }
    }

    #[test]
    fn overall_cace_examples() {
        let leaves = [leaf(0.2, 30, 1.0), leaf(0.4, 10, 1.0)];
        assert_abs_diff_eq!(overall_cace(&leaves).unwrap(), 0.25, epsilon = 1e-15);
        assert_eq!(overall_cace(&[leaf(0.7, 40, 0.5)]).unwrap(), 0.7);
        assert!(matches!(
            overall_cace(&[leaf(0.7, 40, 0.0)]),
            Err(Error::Aggregation(_))
        ));
        // leaves without compliers are skipped
        let leaves = [leaf(0.2, 30, 1.0), leaf(f64::NAN, 30, -0.1)];
        assert_abs_diff_eq!(overall_cace(&leaves).unwrap(), 0.2, epsilon = 1e-15);
    }

    #[test]
    fn overall_cace_case_study_shape() {
        // nine leaves with the published ITT/CACE pairs, ~90% compliers and
        // equal sizes: the aggregate is positive and near the reported 0.17
        let itt = [0.003, -0.14, 0.072, 0.12, 0.19, 0.16, 0.23, 0.44, 0.55];
        let cace = [0.003, -0.15, 0.083, 0.14, 0.21, 0.18, 0.30, 0.47, 0.61];
        let sizes = [230, 80, 70, 90, 80, 70, 40, 50, 50];
        let leaves: Vec<LeafEstimate> = (0..9)
            .map(|j| leaf(cace[j], sizes[j], (itt[j] / cace[j]).clamp(0.7, 1.0)))
            .collect();
        let overall = overall_cace(&leaves).unwrap();
        assert!(overall > 0.0 && (overall - 0.17).abs() < 0.05, "{overall}");
    }

    #[test]
    fn estimate_leaf_full_compliance_collapses() {
        let y = [2.0, 4.0, 1.0, 1.0, 3.0, 0.5];
        let zw = [1, 1, 0, 0, 1, 0];
        let e = [0.5; 6];
        let x = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let data = LeafData {
            y: &y,
            w: &zw,
            z: Some(&zw),
            e: &e,
            x: RowMajor::new(&x, 1),
        };
        let iv = estimate_leaf(1, RegimeKind::IvRandomized, &data).unwrap();
        let ct = estimate_leaf(1, RegimeKind::Ct, &data).unwrap();
        assert_eq!(iv.pi_c_hat, 1.0);
        assert!(iv.compliers_ok);
        assert_abs_diff_eq!(iv.cace_hat, ct.itt_hat, epsilon = 1e-12);
        assert_abs_diff_eq!(iv.tsls_cace, iv.cace_hat, epsilon = 1e-12);
        assert_eq!(iv.first_stage_f, f64::INFINITY);
        assert!(!iv.weak_instrument());
    }

    #[test]
    fn estimate_leaf_flags_missing_compliers() {
        let y = [2.0, 4.0, 1.0, 1.0];
        let w = [0, 0, 1, 1];
        let z = [1, 1, 0, 0];
        let e = [0.5; 4];
        let x = [0.0; 4];
        let data = LeafData {
            y: &y,
            w: &w,
            z: Some(&z),
            e: &e,
            x: RowMajor::new(&x, 1),
        };
        let est = estimate_leaf(2, RegimeKind::IvRandomized, &data).unwrap();
        assert!(!est.compliers_ok);
        assert!(est.cace_hat.is_nan());
        assert_eq!(est.effect(RegimeKind::IvRandomized), None);
        assert_eq!(est.leaf_id, 2);
        assert_eq!(est.n, est.n1 + est.n0);
    }

    fn zw_leaf() -> impl Strategy<Value = Vec<(u8, u8, f64)>> {
        proptest::collection::vec((0u8..2, 0u8..2, -3.0f64..3.0), 4..80)
            .prop_filter("both arms", |v| {
                v.iter().any(|t| t.0 == 1) && v.iter().any(|t| t.0 == 0)
            })
    }

    proptest! {
        #[test]
        fn shares_sum_to_one(units in zw_leaf()) {
            let s = compliance_shares(units.iter().map(|u| (u.0, u.1))).unwrap();
            prop_assert!((s.always_takers + s.never_takers + s.compliers - 1.0).abs() < 1e-12);
        }

        #[test]
        fn aggregate_within_leaf_range(cs in proptest::collection::vec((-2.0f64..2.0, 5usize..500, 0.05f64..1.0), 1..10)) {
            let leaves: Vec<LeafEstimate> = cs.iter().map(|&(c, n, p)| leaf(c, n, p)).collect();
            if let Ok(all) = overall_cace(&leaves) {
                let lo = cs.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
                let hi = cs.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(all >= lo - 1e-12 && all <= hi + 1e-12);
            }
        }

        #[test]
        fn cace_exceeds_positive_itt_with_partial_compliance(itt in 0.001f64..3.0, pi in 0.01f64..0.99) {
            prop_assert!(cace_ratio(itt, pi).unwrap() > itt);
        }
    }
}
