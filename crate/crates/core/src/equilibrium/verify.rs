//! Independent re-check of a candidate two-period profile.

use serde::Serialize;

use super::{BeliefRule, EquilibriumOutcome, Refinement};
use crate::model::TwoPeriodGame;
use crate::pricing::{accept_tol, partial_expectation_of};

const VERIFY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub max_violation: f64,
    /// Largest payoff a buyer type gains by switching its first-period action.
    pub buyer: f64,
    /// Largest revenue the seller gains by re-pricing after either outcome.
    pub seller: f64,
    /// Largest weight difference between the stated and recomputed beliefs.
    pub belief: f64,
    pub revenue: f64,
    pub passes: bool,
    pub messages: Vec<String>,
}

fn revenue_at(points: &[f64], belief: &[f64], p: f64) -> f64 {
    let tol = accept_tol(p);
    p * points
        .iter()
        .zip(belief)
        .filter(|(y, _)| **y >= p - tol)
        .map(|(_, w)| w)
        .sum::<f64>()
}

fn best_revenue(points: &[f64], belief: &[f64]) -> f64 {
    points
        .iter()
        .map(|&p| revenue_at(points, belief, p))
        .fold(0.0, f64::max)
}

/// Re-derives buyer best responses, posteriors, off-path beliefs and seller
/// best responses for `candidate` on `game`, reporting the worst violation.
pub fn verify_equilibrium(candidate: &EquilibriumOutcome, game: &TwoPeriodGame) -> VerifyReport {
    let prior = game.prior();
    let x = prior.points();
    let w = prior.weights();
    let y = game.theta2();
    let d = game.delta;
    let pair = &game.kernels;
    let mut messages = Vec::new();
    let n = x.len();

    if candidate.accepts.len() != n {
        return VerifyReport {
            max_violation: f64::INFINITY,
            buyer: f64::INFINITY,
            seller: f64::INFINITY,
            belief: f64::INFINITY,
            revenue: f64::INFINITY,
            passes: false,
            messages: vec![format!(
                "{} first-period decisions for {n} types",
                candidate.accepts.len()
            )],
        };
    }

    let (p1, pa, pr) = (candidate.p1, candidate.p_accept, candidate.p_reject);
    let mut buyer: f64 = 0.0;
    for i in 0..n {
        let ua = x[i] - p1 + d * partial_expectation_of(y, pair.accept.row(i), pa);
        let ur = d * partial_expectation_of(y, pair.reject.row(i), pr);
        let gain = if candidate.accepts[i] { ur - ua } else { ua - ur };
        if gain > VERIFY_TOL * (1.0 + p1.abs()) {
            messages.push(format!("type {} prefers to switch (gain {gain:.3e})", x[i]));
        }
        buyer = buyer.max(gain);
    }

    let mix = |accept: bool| -> Option<Vec<f64>> {
        let rows = if accept { &pair.accept } else { &pair.reject };
        let mut out = vec![0.0; y.len()];
        let mut mass = 0.0;
        for i in (0..n).filter(|&i| candidate.accepts[i] == accept) {
            mass += w[i];
            for (o, r) in out.iter_mut().zip(rows.row(i)) {
                *o += w[i] * r;
            }
        }
        (mass > 1e-12).then(|| out.iter().map(|o| o / mass).collect())
    };

    let mut seller: f64 = 0.0;
    let mut belief: f64 = 0.0;
    for (slot, accept, price) in [(0, true, pa), (1, false, pr)] {
        let label = if accept { "acceptance" } else { "rejection" };
        let stated = candidate.beliefs.get(slot);
        let (b, on_path) = match mix(accept) {
            Some(b) => (b, true),
            None => {
                let b = match candidate.refinement {
                    Refinement::PbeStar => {
                        let i = if accept {
                            prior.support_max_index()
                        } else {
                            prior.support_min_index()
                        };
                        let rows = if accept { &pair.accept } else { &pair.reject };
                        rows.row(i).to_vec()
                    }
                    Refinement::Unrestricted => match stated {
                        Some(s) => s.weights.clone(),
                        None => {
                            messages.push(format!("no stated off-path {label} belief"));
                            belief = f64::INFINITY;
                            continue;
                        }
                    },
                };
                (b, false)
            }
        };
        if let Some(s) = stated {
            if s.on_path != on_path {
                messages.push(format!("{label} history marked on_path = {}", s.on_path));
                belief = f64::INFINITY;
            }
            let expected = match (on_path, candidate.refinement, accept) {
                (true, _, _) => BeliefRule::Bayes,
                (false, Refinement::PbeStar, true) => BeliefRule::HighestType,
                (false, Refinement::PbeStar, false) => BeliefRule::LowestType,
                (false, Refinement::Unrestricted, _) => s.rule,
            };
            if s.rule != expected {
                messages.push(format!("{label} belief rule {:?}, expected {expected:?}", s.rule));
                belief = f64::INFINITY;
            }
            let diff = s
                .weights
                .iter()
                .zip(&b)
                .map(|(u, v)| (u - v).abs())
                .fold(0.0, f64::max);
            if s.weights.len() != b.len() {
                belief = f64::INFINITY;
            }
            belief = belief.max(diff);
        }
        let gain = best_revenue(y, &b) - revenue_at(y, &b, price);
        if gain > VERIFY_TOL * (1.0 + price.abs()) {
            messages.push(format!("price {price} after {label} leaves {gain:.3e} on the table"));
        }
        seller = seller.max(gain);
    }

    let surv = |row: &[f64], p: f64| revenue_at(y, row, p);
    let recomputed: f64 = (0..n)
        .map(|i| {
            if candidate.accepts[i] {
                w[i] * (p1 + d * surv(pair.accept.row(i), pa))
            } else {
                w[i] * d * surv(pair.reject.row(i), pr)
            }
        })
        .sum();
    let revenue = (recomputed - candidate.revenue).abs();
    if revenue > VERIFY_TOL * (1.0 + recomputed.abs()) {
        messages.push(format!(
            "stated revenue {} differs from {recomputed}",
            candidate.revenue
        ));
    }

    let max_violation = buyer.max(seller).max(belief).max(revenue).max(0.0);
    let passes = buyer <= VERIFY_TOL * (1.0 + p1.abs())
        && seller <= VERIFY_TOL * (1.0 + pa.abs().max(pr.abs()))
        && belief <= VERIFY_TOL
        && revenue <= VERIFY_TOL * (1.0 + recomputed.abs());
    VerifyReport {
        max_violation,
        buyer: buyer.max(0.0),
        seller,
        belief,
        revenue,
        passes,
        messages,
    }
}
