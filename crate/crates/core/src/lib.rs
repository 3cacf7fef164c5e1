//! Causal trees for heterogeneous treatment effects under irregular
//! assignment mechanisms.
//!
//! The crate grows partition trees on inverse-propensity weighted effect
//! estimates, either on the treatment receipt `W` (plain causal tree) or on an
//! instrument `Z` (causal tree with instrumental variable), prunes them by
//! weakest-link cost complexity, selects the penalty on a validation sample
//! with the transformed-outcome loss and finally reports complier average
//! causal effects per leaf.
//!
//! Everything here is pure computation on in-memory data and works without
//! `std`; file formats, exports and the command line live in the `ctiv` crate.

#![no_std]
// negated float comparisons are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(not(test), warn(missing_docs))]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bench;
pub mod dataset;
pub mod effects;
mod error;
mod matrix;
pub mod propensity;
#[cfg(feature = "serde")]
mod serde_float;
pub mod stats;
pub mod synth;
pub mod transform;
pub mod tree;

pub use dataset::{holdout_split, trim_by_propensity, Dataset, Fractions, SplitIndices};
pub use effects::{LeafEstimate, TslsFit};
pub use error::{Error, Result};
pub use matrix::RowMajor;
pub use propensity::{fit_logistic, LogisticOptions, PropensityModel};
pub use transform::{leaf_weighted_itt, transformed_outcome, RegimeKind};
pub use tree::{fit_ctiv, CausalTree, FitConfig, GrowthConfig, Node, PruningPath};
