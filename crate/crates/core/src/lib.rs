//! Dynamic pricing with limited commitment.
//!
//! A seller sells one unit per period to a buyer whose values are
//! persistent across periods. The crate computes monopoly prices, the
//! constrained mechanism-design bound on seller revenue, seller-optimal
//! equilibria under the boundary-type off-path belief rule, and a harness
//! that checks them against each other.

pub mod assumptions;
pub mod dist;
pub mod equilibrium;
pub mod error;
pub mod harness;
pub mod instances;
pub mod mechanism;
pub mod model;
pub mod pricing;

pub use dist::{
    ar1_range, kernel_from_ar1, kernel_from_ar1_on, make_uniform, posterior, truncate, Ar1Spec, Condition, GridKind, KernelPair,
    MarkovKernel, Side, TypeGrid,
};
pub use error::{Error, Result};
pub use model::{DiscreteGame, MultiPeriodGame, TwoPeriodGame};
