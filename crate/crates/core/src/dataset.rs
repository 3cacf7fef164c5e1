//! Unit-level data model, holdout splitting and propensity trimming.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)] // float methods are inherent once std is linked
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::RowMajor;

/// `N` units with covariates `X` (`N × K`), receipt `W`, optional
/// assignment/instrument `Z` and observed outcome `Y`.
///
/// Immutable once built; every constructor checks the invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    covariates: Vec<f64>,
    k: usize,
    y: Vec<f64>,
    w: Vec<u8>,
    z: Option<Vec<u8>>,
    feature_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from row-major covariates and aligned columns.
    ///
    /// Binary columns must only hold 0 or 1; every value must be finite.
    /// Errors name the offending 1-based row.
    pub fn new(
        covariates: Vec<f64>,
        feature_names: Vec<String>,
        y: Vec<f64>,
        w: Vec<u8>,
        z: Option<Vec<u8>>,
    ) -> Result<Self> {
        let k = feature_names.len();
        if k == 0 {
            return Err(Error::Schema(
                "at least one feature column is required".into(),
            ));
        }
        let n = y.len();
        if n == 0 {
            return Err(Error::Input("dataset has no rows".into()));
        }
        if covariates.len() != n * k {
            return Err(Error::Input(format!(
                "covariate buffer holds {} values, expected {n} x {k}",
                covariates.len()
            )));
        }
        if w.len() != n || z.as_ref().is_some_and(|z| z.len() != n) {
            return Err(Error::Input("columns differ in length".into()));
        }
        for (i, &v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::MissingValue {
                    row: i + 1,
                    column: "y".into(),
                });
            }
        }
        for (idx, &v) in covariates.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::MissingValue {
                    row: idx / k + 1,
                    column: feature_names[idx % k].clone(),
                });
            }
        }
        check_binary("w", &w)?;
        if let Some(z) = &z {
            check_binary("z", z)?;
        }
        Ok(Self {
            covariates,
            k,
            y,
            w,
            z,
            feature_names,
        })
    }

    /// Number of units.
    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Number of covariates.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Covariate matrix view.
    pub fn covariates(&self) -> RowMajor<'_> {
        RowMajor::new(&self.covariates, self.k)
    }

    /// Covariates of unit `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.k..(i + 1) * self.k]
    }

    /// Observed outcomes.
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Treatment receipt.
    pub fn w(&self) -> &[u8] {
        &self.w
    }

    /// Assignment / instrument, when present.
    pub fn z(&self) -> Option<&[u8]> {
        self.z.as_deref()
    }

    /// Feature labels, one per covariate column.
    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Rows `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut covariates = Vec::with_capacity(indices.len() * self.k);
        for &i in indices {
            covariates.extend_from_slice(self.row(i));
        }
        Dataset {
            covariates,
            k: self.k,
            y: indices.iter().map(|&i| self.y[i]).collect(),
            w: indices.iter().map(|&i| self.w[i]).collect(),
            z: self
                .z
                .as_ref()
                .map(|z| indices.iter().map(|&i| z[i]).collect()),
            feature_names: self.feature_names.clone(),
        }
    }
}

fn check_binary(name: &str, values: &[u8]) -> Result<()> {
    match values.iter().position(|&v| v > 1) {
        Some(i) => Err(Error::Validation {
            row: i + 1,
            message: format!("{name} must be 0 or 1, found {}", values[i]),
        }),
        None => Ok(()),
    }
}

/// Converts a real-valued column to a binary one, naming the first bad row.
pub fn binary_column(name: &str, values: &[f64]) -> Result<Vec<u8>> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v == 0.0 {
                Ok(0)
            } else if v == 1.0 {
                Ok(1)
            } else {
                Err(Error::Validation {
                    row: i + 1,
                    message: format!("{name} must be 0 or 1, found {v}"),
                })
            }
        })
        .collect()
}

/// Train / validation / test shares of a holdout split.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Fractions {
    /// Share of units used to grow trees.
    pub train: f64,
    /// Share used to choose the pruning penalty.
    pub validation: f64,
    /// Share held out for evaluation.
    pub test: f64,
}

impl Fractions {
    /// Validates and packs the three shares.
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self> {
        let all = [train, validation, test];
        if all.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::Split(
                "fractions must be finite and nonnegative".into(),
            ));
        }
        if train <= 0.0 {
            return Err(Error::Split("train fraction must be positive".into()));
        }
        let sum: f64 = all.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Split(format!("fractions sum to {sum}, expected 1")));
        }
        Ok(Self {
            train,
            validation,
            test,
        })
    }
}

/// Disjoint index sets into a [`Dataset`], each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitIndices {
    /// Training units.
    pub train: Vec<usize>,
    /// Validation units.
    pub validation: Vec<usize>,
    /// Test units.
    pub test: Vec<usize>,
}

/// Seeded holdout split of `n` units.
///
/// Validation and test receive `⌊fraction · n⌋` units each and the remainder
/// goes to train. Units are assigned by a seeded uniform shuffle.
pub fn holdout_split(n: usize, fractions: Fractions, seed: u64) -> Result<SplitIndices> {
    let n_va = (fractions.validation * n as f64).floor() as usize;
    let n_te = (fractions.test * n as f64).floor() as usize;
    let n_tr = n.saturating_sub(n_va + n_te);
    let starved = |frac: f64, size: usize| frac > 0.0 && size == 0;
    if starved(fractions.train, n_tr)
        || starved(fractions.validation, n_va)
        || starved(fractions.test, n_te)
    {
        return Err(Error::Split(format!(
            "{n} units cannot give every nonzero fraction at least one unit"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = order[..n_tr].to_vec();
    let mut validation = order[n_tr..n_tr + n_va].to_vec();
    let mut test = order[n_tr + n_va..].to_vec();
    train.sort_unstable();
    validation.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices {
        train,
        validation,
        test,
    })
}

/// Indices of units whose propensity lies in the closed band `[lo, hi]`.
pub fn trim_mask(e_hat: &[f64], lo: f64, hi: f64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
        return Err(Error::Input(format!("invalid trimming band [{lo}, {hi}]")));
    }
    let kept: Vec<usize> = e_hat
        .iter()
        .enumerate()
        .filter(|(_, &e)| e >= lo && e <= hi)
        .map(|(i, _)| i)
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyAfterTrim { lo, hi });
    }
    Ok(kept)
}

/// Drops units with propensity outside `[lo, hi]`, preserving order.
///
/// Returns the trimmed dataset and the original row index of every kept unit.
pub fn trim_by_propensity(
    ds: &Dataset,
    e_hat: &[f64],
    lo: f64,
    hi: f64,
) -> Result<(Dataset, Vec<usize>)> {
    if e_hat.len() != ds.n() {
        return Err(Error::Input(format!(
            "{} propensities for {} units",
            e_hat.len(),
            ds.n()
        )));
    }
    let kept = trim_mask(e_hat, lo, hi)?;
    Ok((ds.subset(&kept), kept))
}

/// Default feature labels `x1..xK`.
pub fn default_feature_names(k: usize) -> Vec<String> {
    (1..=k).map(|j| format!("x{j}")).collect()
}

impl core::fmt::Display for Fractions {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}/{}/{}", self.train, self.validation, self.test)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn tiny(e_len: usize) -> Dataset {
        Dataset::new(
            (0..e_len).map(|i| i as f64).collect(),
            default_feature_names(1),
            (0..e_len).map(|i| i as f64 * 0.5).collect(),
            (0..e_len).map(|i| (i % 2) as u8).collect(),
            Some((0..e_len).map(|i| ((i + 1) % 2) as u8).collect()),
        )
        .unwrap()
    }

    #[test]
    fn rejects_non_binary_receipt_with_row() {
        let err = Dataset::new(
            vec![0.0, 1.0, 2.0, 3.0],
            default_feature_names(1),
            vec![1.0; 4],
            vec![0, 1, 2, 0],
            None,
        )
        .unwrap_err();
        assert_eq!(
            err,
            Error::Validation {
                row: 3,
                message: "w must be 0 or 1, found 2".into()
            }
        );
        assert!(matches!(
            binary_column("z", &[0.0, 1.0, 0.5]),
            Err(Error::Validation { row: 3, .. })
        ));
    }

    #[test]
    fn rejects_non_finite_covariate() {
        let err = Dataset::new(
            vec![0.0, f64::NAN],
            default_feature_names(1),
            vec![1.0; 2],
            vec![0, 1],
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::MissingValue { row: 2, .. }));
    }

    #[test]
    fn split_sizes_follow_floor_rule() {
        let f = Fractions::new(0.25, 0.25, 0.5).unwrap();
        let s = holdout_split(100, f, 7).unwrap();
        assert_eq!(
            (s.train.len(), s.validation.len(), s.test.len()),
            (25, 25, 50)
        );
        assert_eq!(s, holdout_split(100, f, 7).unwrap());
        assert_ne!(s, holdout_split(100, f, 8).unwrap());
        // remainder goes to train
        let s = holdout_split(103, f, 1).unwrap();
        assert_eq!(
            (s.train.len(), s.validation.len(), s.test.len()),
            (27, 25, 51)
        );
    }

    #[test]
    fn split_too_small() {
        let f = Fractions::new(0.25, 0.25, 0.5).unwrap();
        assert!(matches!(holdout_split(3, f, 7), Err(Error::Split(_))));
        assert!(Fractions::new(0.0, 0.5, 0.5).is_err());
        assert!(Fractions::new(0.5, 0.6, 0.0).is_err());
    }

    #[test]
    fn trimming_examples() {
        let ds = tiny(4);
        let (t, kept) = trim_by_propensity(&ds, &[0.05, 0.5, 0.95, 0.3], 0.1, 0.9).unwrap();
        assert_eq!(kept, vec![1, 3]);
        assert_eq!(t.y(), &[0.5, 1.5]);
        let (t, kept) = trim_by_propensity(&ds, &[0.5; 4], 0.1, 0.9).unwrap();
        assert_eq!((kept.len(), t), (4, ds.clone()));
        assert!(matches!(
            trim_by_propensity(&ds, &[0.05; 4], 0.1, 0.9),
            Err(Error::EmptyAfterTrim { .. })
        ));
        // closed band keeps the boundary
        let (_, kept) = trim_by_propensity(&ds, &[0.1, 0.9, 0.09, 0.91], 0.1, 0.9).unwrap();
        assert_eq!(kept, vec![0, 1]);
    }

    proptest! {
        #[test]
        fn split_partitions_disjointly(n in 4usize..400, seed in any::<u64>(), a in 0.05f64..0.6, b in 0.0f64..0.3) {
            let f = Fractions::new(a, b, 1.0 - a - b).unwrap();
            if let Ok(s) = holdout_split(n, f, seed) {
                let mut all: Vec<usize> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
                all.sort_unstable();
                all.dedup();
                prop_assert_eq!(all.len(), n);
                prop_assert_eq!(s.validation.len(), (b * n as f64).floor() as usize);
                prop_assert_eq!(s.test.len(), ((1.0 - a - b) * n as f64).floor() as usize);
            }
        }

        #[test]
        fn trimming_is_idempotent(e in proptest::collection::vec(0.0f64..1.0, 1..60)) {
            let ds = tiny(e.len());
            if let Ok((once, kept)) = trim_by_propensity(&ds, &e, 0.1, 0.9) {
                let e2: Vec<f64> = kept.iter().map(|&i| e[i]).collect();
                let (twice, kept2) = trim_by_propensity(&once, &e2, 0.1, 0.9).unwrap();
                prop_assert_eq!(twice, once);
                prop_assert_eq!(kept2, (0..kept.len()).collect::<Vec<_>>());
            }
        }
    }
}
