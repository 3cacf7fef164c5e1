//! Assignment propensities: ridge-penalized logistic regression and the
//! constant share used when the instrument is randomized.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // float methods are inherent once std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::matrix::RowMajor;

/// Lower/upper clamp applied to predicted probabilities.
pub const PROBABILITY_CLAMP: f64 = 1e-12;

/// Fitted logistic model `P(label = 1 | x) = σ(intercept + coefficients · x)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PropensityModel {
    /// Unpenalized intercept.
    pub intercept: f64,
    /// One coefficient per covariate.
    pub coefficients: Vec<f64>,
    /// Ridge weight applied to the coefficients.
    pub ridge_lambda: f64,
    /// Whether the gradient max-norm fell below the tolerance.
    pub converged: bool,
    /// Newton steps taken.
    pub iterations: usize,
}

/// Optimizer settings for [`fit_logistic`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LogisticOptions {
    /// Ridge penalty on the coefficients (not the intercept).
    pub ridge_lambda: f64,
    /// Convergence threshold on the gradient max-norm.
    pub tol: f64,
    /// Newton step budget.
    pub max_iter: usize,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self {
            ridge_lambda: 1e-6,
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

impl PropensityModel {
    /// Probability for covariate vector `x`, clamped to `[1e-12, 1 - 1e-12]`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.coefficients.len() {
            return Err(Error::Dimension {
                expected: self.coefficients.len(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite covariate".into()));
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let eta = self.intercept + dot(&self.coefficients, x);
        logistic(eta).clamp(PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP)
    }

    /// Probabilities for every row of `x`.
    pub fn predict_all(&self, x: RowMajor<'_>) -> Result<Vec<f64>> {
        if x.cols() != self.coefficients.len() {
            return Err(Error::Dimension {
                expected: self.coefficients.len(),
                got: x.cols(),
            });
        }
        Ok(x.iter_rows().map(|r| self.predict_unchecked(r)).collect())
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Standard logistic function.
#[inline]
pub fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^t) without overflow.
#[inline]
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// Ridge-penalized Bernoulli log-likelihood at `params = [intercept, β…]`.
pub fn penalized_log_likelihood(
    x: RowMajor<'_>,
    labels: &[u8],
    ridge_lambda: f64,
    params: &[f64],
) -> f64 {
    let (b0, beta) = params.split_first().expect("params include the intercept");
    let ll: f64 = x
        .iter_rows()
        .zip(labels)
        .map(|(row, &l)| {
            let eta = b0 + dot(beta, row);
            f64::from(l) * eta - softplus(eta)
        })
        .sum();
    ll - 0.5 * ridge_lambda * beta.iter().map(|b| b * b).sum::<f64>()
}

/// Analytic gradient of [`penalized_log_likelihood`].
pub fn penalized_gradient(
    x: RowMajor<'_>,
    labels: &[u8],
    ridge_lambda: f64,
    params: &[f64],
) -> Vec<f64> {
    let (b0, beta) = params.split_first().expect("params include the intercept");
    let mut g = vec![0.0; params.len()];
    for (row, &l) in x.iter_rows().zip(labels) {
        let r = f64::from(l) - logistic(b0 + dot(beta, row));
        g[0] += r;
        for (gj, xj) in g[1..].iter_mut().zip(row) {
            *gj += r * xj;
        }
    }
    for (gj, bj) in g[1..].iter_mut().zip(beta) {
        *gj -= ridge_lambda * bj;
    }
    g
}

/// Fits `P(label = 1 | x)` by damped Newton ascent on the ridge-penalized
/// log-likelihood. The intercept is never penalized.
///
/// Perfectly separable data with `ridge_lambda = 0` has no finite optimum; the
/// returned model then reports `converged = false`.
pub fn fit_logistic(
    x: RowMajor<'_>,
    labels: &[u8],
    opts: LogisticOptions,
) -> Result<PropensityModel> {
    let n = x.rows();
    let k = x.cols();
    if n == 0 || labels.len() != n {
        return Err(Error::Input(format!(
            "{} labels for {n} rows",
            labels.len()
        )));
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite covariate".into()));
    }
    if let Some(i) = labels.iter().position(|&l| l > 1) {
        return Err(Error::Validation {
            row: i + 1,
            message: "label must be 0 or 1".into(),
        });
    }
    if !(opts.ridge_lambda >= 0.0) {
        return Err(Error::Input("ridge_lambda must be nonnegative".into()));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    if opts.ridge_lambda == 0.0 && (positives == 0 || positives == n) {
        return Err(Error::Separation);
    }

    let p = k + 1;
    let mut params = vec![0.0; p];
    let mut objective = penalized_log_likelihood(x, labels, opts.ridge_lambda, &params);
    let mut iterations = 0;
    let mut converged = false;
    let mut hessian = DMatrix::<f64>::zeros(p, p);

    loop {
        let grad = penalized_gradient(x, labels, opts.ridge_lambda, &params);
        if grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) < opts.tol {
            converged = true;
            break;
        }
        if iterations == opts.max_iter {
            break;
        }

        // Negative Hessian: X̃ᵀ diag(p(1-p)) X̃ + λ I (intercept excluded).
        hessian.fill(0.0);
        for row in x.iter_rows() {
            let mu = logistic(params[0] + dot(&params[1..], row));
            let v = mu * (1.0 - mu);
            hessian[(0, 0)] += v;
            for a in 0..k {
                let va = v * row[a];
                hessian[(a + 1, 0)] += va;
                for b in 0..=a {
                    hessian[(a + 1, b + 1)] += va * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                hessian[(b, a)] = hessian[(a, b)];
            }
        }
        for a in 1..p {
            hessian[(a, a)] += opts.ridge_lambda;
        }
        let step = newton_step(&hessian, &grad)?;

        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = params
                .iter()
                .zip(step.iter())
                .map(|(b, s)| b + scale * s)
                .collect();
            let value = penalized_log_likelihood(x, labels, opts.ridge_lambda, &trial);
            if value >= objective {
                params = trial;
                objective = value;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        iterations += 1;
        if !accepted {
            // no ascent possible in floating point; the gradient test decides
            let grad = penalized_gradient(x, labels, opts.ridge_lambda, &params);
            converged = grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) < opts.tol;
            break;
        }
    }

    Ok(PropensityModel {
        intercept: params[0],
        coefficients: params[1..].to_vec(),
        ridge_lambda: opts.ridge_lambda,
        converged,
        iterations,
    })
}

fn newton_step(hessian: &DMatrix<f64>, grad: &[f64]) -> Result<DVector<f64>> {
    let g = DVector::from_column_slice(grad);
    if let Some(chol) = hessian.clone().cholesky() {
        return Ok(chol.solve(&g));
    }
    // Singular curvature (e.g. an all-zero column without ridge): jitter the
    // diagonal until it factors.
    let scale = (0..hessian.nrows()).fold(1.0f64, |m, i| m.max(hessian[(i, i)].abs()));
    let mut jitter = 1e-10 * scale;
    for _ in 0..12 {
        let mut h = hessian.clone();
        for i in 0..h.nrows() {
            h[(i, i)] += jitter;
        }
        if let Some(chol) = h.cholesky() {
            return Ok(chol.solve(&g));
        }
        jitter *= 10.0;
    }
    Err(Error::Estimation(
        "logistic Hessian is not positive definite".into(),
    ))
}

/// Share of units with `z = 1`.
pub fn estimate_constant_p(z: &[u8]) -> Result<f64> {
    if z.is_empty() {
        return Err(Error::Input("cannot estimate a share from no units".into()));
    }
    Ok(z.iter().map(|&v| f64::from(v)).sum::<f64>() / z.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(intercept: f64, coefficients: Vec<f64>) -> PropensityModel {
        PropensityModel {
            intercept,
            coefficients,
            ridge_lambda: 0.0,
            converged: true,
            iterations: 0,
        }
    }

    #[test]
    fn predict_closed_forms() {
        assert_eq!(
            model(0.0, vec![0.0, 0.0]).predict(&[3.0, -1.0]).unwrap(),
            0.5
        );
        assert_abs_diff_eq!(
            model(3.0f64.ln(), vec![0.0]).predict(&[9.0]).unwrap(),
            0.75,
            epsilon = 1e-15
        );
        let expected = 1.0 / (1.0 + 2.0f64.exp());
        assert_abs_diff_eq!(
            model(0.0, vec![1.0]).predict(&[-2.0]).unwrap(),
            expected,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(expected, 0.1192, epsilon = 1e-4);
        assert_eq!(
            model(0.0, vec![1.0]).predict(&[1.0, 2.0]),
            Err(Error::Dimension {
                expected: 1,
                got: 2
            })
        );
        assert_eq!(
            model(0.0, vec![1.0]).predict(&[1e6]).unwrap(),
            1.0 - PROBABILITY_CLAMP
        );
    }

    #[test]
    fn balanced_labels_zero_covariates() {
        let x = vec![0.0; 8];
        let fit = fit_logistic(
            RowMajor::new(&x, 2),
            &[1, 0, 1, 0],
            LogisticOptions::default(),
        )
        .unwrap();
        assert!(fit.converged);
        assert_abs_diff_eq!(fit.intercept, 0.0, epsilon = 1e-12);
        assert!(fit.coefficients.iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn separation_handled_by_ridge() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 - 9.5).collect();
        let labels: Vec<u8> = (0..20).map(|i| u8::from(i >= 10)).collect();
        let opts = LogisticOptions {
            ridge_lambda: 0.1,
            ..Default::default()
        };
        let fit = fit_logistic(RowMajor::new(&x, 1), &labels, opts).unwrap();
        assert!(fit.converged);
        assert!(fit.coefficients[0].is_finite() && fit.coefficients[0] > 0.0);
    }

    #[test]
    fn single_class_without_ridge_is_an_error() {
        let x = vec![1.0, 2.0, 3.0];
        let opts = LogisticOptions {
            ridge_lambda: 0.0,
            ..Default::default()
        };
        assert_eq!(
            fit_logistic(RowMajor::new(&x, 1), &[1, 1, 1], opts),
            Err(Error::Separation)
        );
        let bad = vec![1.0, f64::INFINITY, 3.0];
        assert!(matches!(
            fit_logistic(
                RowMajor::new(&bad, 1),
                &[1, 0, 1],
                LogisticOptions::default()
            ),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn constant_share() {
        assert_eq!(estimate_constant_p(&[1, 1, 0, 0]).unwrap(), 0.5);
        assert_eq!(estimate_constant_p(&[1, 1, 1]).unwrap(), 1.0);
        assert_eq!(estimate_constant_p(&[1, 0, 0, 0]).unwrap(), 0.25);
        assert!(estimate_constant_p(&[]).is_err());
    }

    #[test]
    fn optimum_beats_origin_and_zeroes_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (n, k) = (300, 3);
        let x: Vec<f64> = (0..n * k).map(|_| rng.random_range(-2.0..2.0)).collect();
        let labels: Vec<u8> = x
            .chunks(k)
            .map(|r| u8::from(rng.random::<f64>() < logistic(0.3 + r[0] - 0.5 * r[2])))
            .collect();
        let xm = RowMajor::new(&x, k);
        let fit = fit_logistic(xm, &labels, LogisticOptions::default()).unwrap();
        assert!(fit.converged && fit.iterations < 20);
        let mut params = vec![fit.intercept];
        params.extend(&fit.coefficients);
        let at_opt = penalized_log_likelihood(xm, &labels, 1e-6, &params);
        assert!(at_opt >= penalized_log_likelihood(xm, &labels, 1e-6, &[0.0; 4]));
        assert!(penalized_gradient(xm, &labels, 1e-6, &params)
            .iter()
            .all(|g| g.abs() < 1e-8));
    }

    #[test]
    fn predict_monotone_in_coefficient_sign() {
        let m = model(0.2, vec![1.5, -0.7]);
        let lo = m.predict(&[0.0, 0.0]).unwrap();
        assert!(m.predict(&[0.5, 0.0]).unwrap() > lo);
        assert!(m.predict(&[0.0, 0.5]).unwrap() < lo);
    }
}
