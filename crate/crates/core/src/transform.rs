//! Transformed outcomes and the inverse-propensity weighted difference
//! estimator used both to score splits and to estimate leaf effects.

use crate::error::{Error, Result};

/// Which indicator the tree splits on and how its propensity is modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum RegimeKind {
    /// Plain causal tree on the receipt `W`, propensity from a logistic fit.
    Ct,
    /// Randomized instrument `Z` with a constant assignment share `p̂`.
    IvRandomized,
    /// Instrument `Z` unconfounded given `X`, propensity from a logistic fit.
    IvUnconfounded,
}

impl RegimeKind {
    /// True for both instrumental-variable regimes.
    pub fn uses_instrument(self) -> bool {
        !matches!(self, RegimeKind::Ct)
    }

    /// Command-line spelling.
    pub fn as_str(self) -> &'static str {
        match self {
            RegimeKind::Ct => "ct",
            RegimeKind::IvRandomized => "iv-randomized",
            RegimeKind::IvUnconfounded => "iv-unconfounded",
        }
    }
}

impl core::str::FromStr for RegimeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ct" => Ok(RegimeKind::Ct),
            "iv-randomized" => Ok(RegimeKind::IvRandomized),
            "iv-unconfounded" => Ok(RegimeKind::IvUnconfounded),
            other => Err(Error::Input(alloc::format!("unknown regime `{other}`"))),
        }
    }
}

impl core::fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `y · (d − e) / ((1 − e) · e)`: `y/e` for `d = 1`, `−y/(1−e)` for `d = 0`.
pub fn transformed_outcome(y: f64, d: u8, e: f64) -> Result<f64> {
    if !(e > 0.0 && e < 1.0) {
        return Err(Error::Domain(e));
    }
    if d > 1 {
        return Err(Error::Input(alloc::format!(
            "indicator must be 0 or 1, found {d}"
        )));
    }
    Ok(if d == 1 { y / e } else { -y / (1.0 - e) })
}

/// One unit as seen by the weighted estimator: outcome, indicator and the
/// probability that the indicator is 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unit {
    /// Observed outcome.
    pub y: f64,
    /// Indicator (`W` or `Z`).
    pub d: u8,
    /// Propensity of `d = 1`.
    pub e: f64,
}

/// Running weighted sums for both arms of a leaf.
///
/// Supports `push`/`pop` so split search can sweep sorted units in one pass.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ArmSums {
    weight1: f64,
    weighted_y1: f64,
    weight0: f64,
    weighted_y0: f64,
    n1: usize,
    n0: usize,
}

impl ArmSums {
    /// Adds a unit.
    #[inline]
    pub fn push(&mut self, u: Unit) {
        if u.d == 1 {
            let w = 1.0 / u.e;
            self.weight1 += w;
            self.weighted_y1 += u.y * w;
            self.n1 += 1;
        } else {
            let w = 1.0 / (1.0 - u.e);
            self.weight0 += w;
            self.weighted_y0 += u.y * w;
            self.n0 += 1;
        }
    }

    /// Difference `self − other` of two accumulations.
    #[inline]
    pub fn minus(&self, other: &ArmSums) -> ArmSums {
        ArmSums {
            weight1: self.weight1 - other.weight1,
            weighted_y1: self.weighted_y1 - other.weighted_y1,
            weight0: self.weight0 - other.weight0,
            weighted_y0: self.weighted_y0 - other.weighted_y0,
            n1: self.n1 - other.n1,
            n0: self.n0 - other.n0,
        }
    }

    /// Units with `d = 1`.
    pub fn n1(&self) -> usize {
        self.n1
    }

    /// Units with `d = 0`.
    pub fn n0(&self) -> usize {
        self.n0
    }

    /// All units.
    pub fn n(&self) -> usize {
        self.n1 + self.n0
    }

    /// Weighted treated mean minus weighted control mean, or `None` when an
    /// arm is empty.
    #[inline]
    pub fn estimate(&self) -> Option<f64> {
        (self.n1 > 0 && self.n0 > 0)
            .then(|| self.weighted_y1 / self.weight1 - self.weighted_y0 / self.weight0)
    }
}

/// Inverse-propensity weighted difference of arm means within a leaf:
///
/// `Σ y·d/e ÷ Σ d/e − Σ y·(1−d)/(1−e) ÷ Σ (1−d)/(1−e)`.
///
/// With a constant propensity the weights cancel and this is the plain
/// difference of arm means.
pub fn leaf_weighted_itt<I>(units: I) -> Result<f64>
where
    I: IntoIterator<Item = Unit>,
{
    let mut sums = ArmSums::default();
    for u in units {
        if !(u.e > 0.0 && u.e < 1.0) {
            return Err(Error::Domain(u.e));
        }
        sums.push(u);
    }
    sums.estimate()
        .ok_or(Error::EmptyArm("leaf needs units in both arms"))
}
