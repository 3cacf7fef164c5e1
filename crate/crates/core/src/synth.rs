//! Simulation designs with an endogenous binary receipt `W`, a randomized
//! instrument `Z` and an unobserved nuisance `η` shared by receipt and outcome.
//!
//! Every design draws, per unit and in this order: the covariates
//! `X_k ~ N(0, 0.1)` (variance 0.1), `Z ~ Bern(0.5)`, `η ~ N(0, 1)`, an
//! auxiliary `U ~ N(0, 1)` and the outcome error `ε`. Receipt is
//! `W = 1{2t·Z + η + c·U > t}`, which gives `P(W = 1) = 1/2` and closed-form
//! correlations with `Z` and `η`; `t` and `c` are solved from the targets.
//! The outcome is `Y = 1 + f(X) + W + W·g(X) + η + ε`, so the unit-level
//! effect of receipt is `1 + g(X)`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)] // float methods are inherent once std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, StandardNormal};

use crate::dataset::{default_feature_names, Dataset};
use crate::error::{Error, Result};
use crate::stats::{normal_pdf, normal_quantile, pearson};

/// Covariate variance.
pub const COVARIATE_VARIANCE: f64 = 0.1;
/// Default target `Cor(W, Z)` for the main designs.
pub const DEFAULT_COR_WZ: f64 = 0.65;
/// Default target `Cor(W, η)`.
pub const DEFAULT_COR_WETA: f64 = 0.50;
/// `Cor(W, Z)` of the weak-instrument scenario.
pub const WEAK_COR_WZ: f64 = 0.50;
/// Direct effect of `Z` on `Y` where `X10 >= 0` in the exclusion-violation scenario.
pub const DIRECT_EFFECT: f64 = 1.0;
/// Largest tolerated gap between realized and target correlations.
pub const CALIBRATION_TOLERANCE: f64 = 0.05;
/// Smallest sample on which calibration is enforced; smaller samples are too
/// noisy for the tolerance to be meaningful.
pub const CALIBRATION_MIN_N: usize = 5000;

/// A simulation design: the five main designs plus two robustness scenarios
/// built on design 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Design {
    /// One covariate; `f = g = X1`; normal errors.
    D1,
    /// Ten covariates; `f = ΣX`, `g = X9 + X10`; normal errors.
    D2,
    /// As design 2 with centered exponential(10) errors.
    D3,
    /// As design 2 with centered uniform(0, 1) errors.
    D4,
    /// As design 2 with `g = X9 · X10`.
    D5,
    /// Design 2 with a weaker instrument, `Cor(W, Z) ≈ 0.5`.
    WeakInstrument,
    /// Design 2 plus a direct `Z` effect on `Y` where `X10 >= 0`.
    ExclusionViolation,
}

/// Outcome error distribution (all centered at zero).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ErrorDist {
    /// Standard normal.
    Normal,
    /// Exponential with the given rate, minus its mean.
    Exponential {
        /// Rate parameter.
        rate: f64,
    },
    /// Uniform on `(0, 1)` minus 1/2.
    Uniform,
}

impl ErrorDist {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            ErrorDist::Normal => StandardNormal.sample(rng),
            ErrorDist::Exponential { rate } => {
                Exp::new(rate).expect("positive rate").sample(rng) - 1.0 / rate
            }
            ErrorDist::Uniform => rng.random::<f64>() - 0.5,
        }
    }
}

impl Design {
    /// The five main designs.
    pub const MAIN: [Design; 5] = [Design::D1, Design::D2, Design::D3, Design::D4, Design::D5];
    /// The two robustness scenarios.
    pub const ROBUSTNESS: [Design; 2] = [Design::WeakInstrument, Design::ExclusionViolation];

    /// Short label: `1`–`5`, `s1`, `s2`.
    pub fn label(self) -> &'static str {
        match self {
            Design::D1 => "1",
            Design::D2 => "2",
            Design::D3 => "3",
            Design::D4 => "4",
            Design::D5 => "5",
            Design::WeakInstrument => "s1",
            Design::ExclusionViolation => "s2",
        }
    }

    /// Main design by number.
    pub fn main(id: u8) -> Result<Design> {
        match id {
            1..=5 => Ok(Design::MAIN[usize::from(id - 1)]),
            _ => Err(Error::Input(format!("design must be 1-5, got {id}"))),
        }
    }

    /// Robustness scenario by number.
    pub fn scenario(id: u8) -> Result<Design> {
        match id {
            1 | 2 => Ok(Design::ROBUSTNESS[usize::from(id - 1)]),
            _ => Err(Error::Input(format!("scenario must be 1 or 2, got {id}"))),
        }
    }

    /// Number of covariates.
    pub fn k(self) -> usize {
        if self == Design::D1 {
            1
        } else {
            10
        }
    }

    /// Outcome error distribution.
    pub fn error_dist(self) -> ErrorDist {
        match self {
            Design::D3 => ErrorDist::Exponential { rate: 10.0 },
            Design::D4 => ErrorDist::Uniform,
            _ => ErrorDist::Normal,
        }
    }

    /// Default target `Cor(W, Z)`.
    pub fn target_cor_wz(self) -> f64 {
        if self == Design::WeakInstrument {
            WEAK_COR_WZ
        } else {
            DEFAULT_COR_WZ
        }
    }

    fn f(self, x: &[f64]) -> f64 {
        match self {
            Design::D1 => x[0],
            _ => x.iter().sum(),
        }
    }

    fn g(self, x: &[f64]) -> f64 {
        match self {
            Design::D1 => x[0],
            Design::D5 => x[8] * x[9],
            _ => x[8] + x[9],
        }
    }

    /// Unit-level effect of receipt, `1 + g(x)`.
    pub fn cate(self, x: &[f64]) -> f64 {
        1.0 + self.g(x)
    }

    /// Outcome for given covariates, receipt, assignment and disturbances.
    pub fn outcome(self, x: &[f64], w: u8, z: u8, eta: f64, eps: f64) -> f64 {
        let w = f64::from(w);
        let direct = match self {
            Design::ExclusionViolation if x[9] >= 0.0 => DIRECT_EFFECT * f64::from(z),
            _ => 0.0,
        };
        1.0 + self.f(x) + w + w * self.g(x) + eta + eps + direct
    }
}

impl core::fmt::Display for Design {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.label())
    }
}

impl core::str::FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let all = Design::MAIN.iter().chain(&Design::ROBUSTNESS);
        all.copied()
            .find(|d| d.label() == s)
            .ok_or_else(|| Error::Input(format!("unknown design `{s}` (expected 1-5, s1 or s2)")))
    }
}

/// Everything needed to draw one synthetic sample.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DesignSpec {
    /// Design or scenario.
    pub design: Design,
    /// Units to draw.
    pub n: usize,
    /// Covariate count.
    pub k: usize,
    /// Outcome error distribution.
    pub error_dist: ErrorDist,
    /// Target `Cor(W, Z)`.
    pub target_cor_wz: f64,
    /// Target `Cor(W, η)`.
    pub target_cor_weta: f64,
    /// RNG seed.
    pub seed: u64,
}

impl DesignSpec {
    /// The design's defaults for `n` units.
    pub fn new(design: Design, n: usize, seed: u64) -> Self {
        Self {
            design,
            n,
            k: design.k(),
            error_dist: design.error_dist(),
            target_cor_wz: design.target_cor_wz(),
            target_cor_weta: DEFAULT_COR_WETA,
            seed,
        }
    }

    /// Checks ranges.
    pub fn validate(&self) -> Result<()> {
        if self.n < 100 {
            return Err(Error::Input(format!(
                "need at least 100 units, got {}",
                self.n
            )));
        }
        if self.k != self.design.k() {
            return Err(Error::Input(format!(
                "design {} has {} covariates, not {}",
                self.design,
                self.design.k(),
                self.k
            )));
        }
        for (name, v) in [
            ("Cor(W,Z)", self.target_cor_wz),
            ("Cor(W,eta)", self.target_cor_weta),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Input(format!(
                    "target {name} must lie in (0, 1), got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Constants of the receipt rule `W = 1{2t·Z + η + c·U > t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Calibration {
    /// Threshold `t`.
    pub threshold: f64,
    /// Weight `c` of the auxiliary noise.
    pub noise: f64,
}

/// Solves the receipt rule for population correlations `cor_wz` and `cor_weta`.
///
/// With `s = √(1 + c²)` and `a = t/s`: `Cor(W, Z) = 2Φ(a) − 1` and
/// `Cor(W, η) = 2φ(a)/s`. Fails when the pair needs `s < 1`.
pub fn calibrate(cor_wz: f64, cor_weta: f64) -> Result<Calibration> {
    if !(cor_wz > 0.0 && cor_wz < 1.0 && cor_weta > 0.0 && cor_weta < 1.0) {
        return Err(Error::Calibration(format!(
            "targets ({cor_wz}, {cor_weta}) must lie in (0, 1)"
        )));
    }
    let a = normal_quantile((1.0 + cor_wz) / 2.0);
    let s = 2.0 * normal_pdf(a) / cor_weta;
    if s < 1.0 {
        return Err(Error::Calibration(format!(
            "Cor(W,Z) = {cor_wz} and Cor(W,eta) = {cor_weta} cannot both be reached"
        )));
    }
    Ok(Calibration {
        threshold: a * s,
        noise: (s * s - 1.0).sqrt(),
    })
}

/// A generated sample with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    /// Generation settings.
    pub spec: DesignSpec,
    /// Covariates, outcome, receipt and assignment.
    pub dataset: Dataset,
    /// Per-unit effect of receipt, `1 + g(X)`.
    pub true_cate: Vec<f64>,
    /// The unobserved nuisance.
    pub eta: Vec<f64>,
    /// Sample `Cor(W, Z)`.
    pub realized_cor_wz: f64,
    /// Sample `Cor(W, η)`.
    pub realized_cor_weta: f64,
}

/// Draws a sample.
///
/// From [`CALIBRATION_MIN_N`] units on, a realized correlation more than
/// [`CALIBRATION_TOLERANCE`] away from its target is an error.
pub fn generate(spec: &DesignSpec) -> Result<SyntheticSample> {
    spec.validate()?;
    let cal = calibrate(spec.target_cor_wz, spec.target_cor_weta)?;
    let design = spec.design;
    let (n, k) = (spec.n, spec.k);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let covariate = Normal::new(0.0, COVARIATE_VARIANCE.sqrt()).expect("valid normal");

    let mut x = Vec::with_capacity(n * k);
    let mut y = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    let mut eta = Vec::with_capacity(n);
    let mut true_cate = Vec::with_capacity(n);
    for _ in 0..n {
        let start = x.len();
        x.extend((0..k).map(|_| covariate.sample(&mut rng)));
        let zi = u8::from(rng.random_bool(0.5));
        let e: f64 = StandardNormal.sample(&mut rng);
        let u: f64 = StandardNormal.sample(&mut rng);
        let eps = spec.error_dist.sample(&mut rng);
        let latent = 2.0 * cal.threshold * f64::from(zi) + e + cal.noise * u;
        let wi = u8::from(latent > cal.threshold);
        let row = &x[start..];
        y.push(design.outcome(row, wi, zi, e, eps));
        true_cate.push(design.cate(row));
        w.push(wi);
        z.push(zi);
        eta.push(e);
    }

    let wf: Vec<f64> = w.iter().map(|&v| f64::from(v)).collect();
    let zf: Vec<f64> = z.iter().map(|&v| f64::from(v)).collect();
    let realized_cor_wz = pearson(&wf, &zf);
    let realized_cor_weta = pearson(&wf, &eta);
    if n >= CALIBRATION_MIN_N {
        for (name, got, want) in [
            ("Cor(W,Z)", realized_cor_wz, spec.target_cor_wz),
            ("Cor(W,eta)", realized_cor_weta, spec.target_cor_weta),
        ] {
            if !((got - want).abs() <= CALIBRATION_TOLERANCE) {
                return Err(Error::Calibration(format!(
                    "realized {name} = {got:.4}, target {want}"
                )));
            }
        }
    }

    let names: Vec<String> = default_feature_names(k);
    let dataset = Dataset::new(x, names, y, w, Some(z))?;
    Ok(SyntheticSample {
        spec: spec.clone(),
        dataset,
        true_cate,
        eta,
        realized_cor_wz,
        realized_cor_weta,
    })
}

/// Draws robustness scenario 1 (weak instrument) or 2 (exclusion violation).
pub fn generate_robustness(scenario: u8, n: usize, seed: u64) -> Result<SyntheticSample> {
    generate(&DesignSpec::new(Design::scenario(scenario)?, n, seed))
}
