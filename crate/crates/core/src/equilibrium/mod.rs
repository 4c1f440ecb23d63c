//! Perfect Bayesian equilibria with boundary-type off-path beliefs: an
//! off-path rejection is attributed to the lowest type in the support, an
//! off-path acceptance to the highest.

mod continuous;
mod discrete;
mod multi;
mod verify;

use serde::Serialize;

pub use continuous::{continuation_fixed_points, solve_pbe_star, FixedPoint};
pub use discrete::{enumerate_discrete, BeliefFilter};
pub use multi::{solve_multi_period, HistoryPrice, MultiOutcome, MAX_HORIZON};
pub use verify::{verify_equilibrium, VerifyReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Refinement {
    PbeStar,
    Unrestricted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BeliefRule {
    Bayes,
    /// Off-path: point mass on the lowest first-period type.
    LowestType,
    /// Off-path: point mass on the highest first-period type.
    HighestType,
    /// Off-path belief chosen freely (unrestricted filtering).
    Chosen,
}

/// Seller belief about the second-period type after one first-period
/// outcome.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Belief {
    pub history: &'static str,
    pub on_path: bool,
    pub rule: BeliefRule,
    pub mean: f64,
    pub weights: Vec<f64>,
}

impl Belief {
    pub(crate) fn new(
        history: &'static str,
        on_path: bool,
        rule: BeliefRule,
        points: &[f64],
        weights: Vec<f64>,
    ) -> Self {
        let mean = points.iter().zip(&weights).map(|(y, w)| y * w).sum();
        Self {
            history,
            on_path,
            rule,
            mean,
            weights,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquilibriumOutcome {
    pub p1: f64,
    /// Lowest accepting first-period type.
    pub k: f64,
    pub k_index: usize,
    pub p_accept: f64,
    pub p_reject: f64,
    pub revenue: f64,
    /// First-period decision of each type.
    pub accepts: Vec<bool>,
    pub buyer_value: Vec<f64>,
    pub beliefs: Vec<Belief>,
    pub refinement: Refinement,
    /// Candidate first-period prices at which no continuation exists.
    pub no_fixed_point: Vec<f64>,
}

impl EquilibriumOutcome {
    pub fn accept_belief(&self) -> &Belief {
        &self.beliefs[0]
    }

    pub fn reject_belief(&self) -> &Belief {
        &self.beliefs[1]
    }
}
