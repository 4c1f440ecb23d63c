//! Two-period equilibrium on grids: scan every cutoff, keep the
//! continuation fixed points, and let the seller pick the best first-period
//! price.

use rayon::prelude::*;
use serde::Serialize;

use super::{Belief, BeliefRule, EquilibriumOutcome, Refinement};
use crate::dist::{MarkovKernel, PosteriorTable};
use crate::error::{Error, Result};
use crate::model::TwoPeriodGame;
use crate::pricing::{
    accept_tol, is_tie, monopoly_ties, partial_expectations_at_points, price_at,
};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FixedPoint {
    pub k: f64,
    pub k_index: usize,
    pub p_accept: f64,
    pub p_reject: f64,
    /// Seller value at the queried first-period price.
    pub value: f64,
}

/// Posterior after one first-period outcome for every cutoff.
struct Side {
    beliefs: Vec<Vec<f64>>,
    on_path: Vec<bool>,
    revenue: Vec<f64>,
    ties: Vec<Vec<usize>>,
}

impl Side {
    fn build(
        kernel: &MarkovKernel,
        prior: &[f64],
        accept: bool,
        boundary_row: usize,
    ) -> Self {
        let table = PosteriorTable::new(kernel, prior);
        let n = prior.len();
        let y = kernel.to_grid().points();
        let mut beliefs = Vec::with_capacity(n + 1);
        let mut on_path = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let b = if accept { table.at_least(k) } else { table.below(k) };
            on_path.push(b.is_some());
            beliefs.push(b.unwrap_or_else(|| kernel.row(boundary_row).to_vec()));
        }
        let (revenue, ties) = beliefs.iter().map(|b| monopoly_ties(y, b)).unzip();
        Self {
            beliefs,
            on_path,
            revenue,
            ties,
        }
    }
}

pub(crate) struct Continuation<'a> {
    game: &'a TwoPeriodGame,
    acc: Side,
    rej: Side,
    mass_ge: Vec<f64>,
    pe0: Vec<Vec<f64>>,
    pe1: Vec<Vec<f64>>,
}

/// A cutoff, a pair of tied monopoly prices, and the first-period prices
/// `[lo, hi]` at which that cutoff is a buyer best response.
#[derive(Clone, Copy, Debug)]
struct Interval {
    k: usize,
    a: usize,
    r: usize,
    lo: f64,
    hi: f64,
}

impl<'a> Continuation<'a> {
    pub(crate) fn new(game: &'a TwoPeriodGame) -> Self {
        let prior = game.prior();
        let w = prior.weights();
        let pair = &game.kernels;
        let acc = Side::build(&pair.accept, w, true, prior.support_max_index());
        let rej = Side::build(&pair.reject, w, false, prior.support_min_index());
        let n = w.len();
        let mut mass_ge = vec![0.0; n + 1];
        for i in (0..n).rev() {
            mass_ge[i] = mass_ge[i + 1] + w[i];
        }
        let y = pair.to_points();
        let pe = |k: &MarkovKernel| {
            k.rows()
                .iter()
                .map(|r| partial_expectations_at_points(y, r))
                .collect::<Vec<_>>()
        };
        Self {
            game,
            acc,
            rej,
            mass_ge,
            pe0: pe(&pair.reject),
            pe1: pe(&pair.accept),
        }
    }

    fn n(&self) -> usize {
        self.mass_ge.len() - 1
    }

    fn reservation(&self, a: usize, r: usize) -> Vec<f64> {
        let x = self.game.prior().points();
        let d = self.game.delta;
        (0..self.n())
            .map(|i| x[i] - d * (self.pe0[i][r] - self.pe1[i][a]))
            .collect()
    }

    fn intervals(&self) -> Vec<Interval> {
        let n = self.n();
        (0..=n)
            .into_par_iter()
            .flat_map_iter(|k| {
                let mut out = Vec::new();
                for &a in &self.acc.ties[k] {
                    for &r in &self.rej.ties[k] {
                        let c = self.reservation(a, r);
                        let lo = c[..k].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        let hi = c[k..].iter().copied().fold(f64::INFINITY, f64::min);
                        let scale = if hi.is_finite() { hi } else { lo };
                        if lo <= hi + 2.0 * accept_tol(scale) {
                            out.push(Interval { k, a, r, lo, hi });
                        }
                    }
                }
                out
            })
            .collect()
    }

    #[inline]
    fn contains(iv: &Interval, p1: f64) -> bool {
        let tol = accept_tol(p1);
        iv.hi >= p1 - tol && iv.lo <= p1 + tol
    }

    fn value(&self, iv: &Interval, p1: f64) -> f64 {
        let m = self.mass_ge[iv.k];
        let d = self.game.delta;
        (p1 + d * self.acc.revenue[iv.k]) * m + d * self.rej.revenue[iv.k] * (1.0 - m).max(0.0)
    }

    fn fixed_point(&self, iv: &Interval, p1: f64) -> FixedPoint {
        let y = self.game.theta2();
        FixedPoint {
            k: price_at(self.game.prior().points(), iv.k),
            k_index: iv.k,
            p_accept: price_at(y, iv.a),
            p_reject: price_at(y, iv.r),
            value: self.value(iv, p1),
        }
    }

    fn outcome(&self, iv: &Interval, p1: f64, no_fixed_point: Vec<f64>) -> EquilibriumOutcome {
        let prior = self.game.prior();
        let x = prior.points();
        let y = self.game.theta2();
        let d = self.game.delta;
        let accepts: Vec<bool> = (0..x.len()).map(|i| i >= iv.k).collect();
        let buyer_value = (0..x.len())
            .map(|i| {
                if accepts[i] {
                    x[i] - p1 + d * self.pe1[i][iv.a]
                } else {
                    d * self.pe0[i][iv.r]
                }
            })
            .collect();
        let acc_rule = if self.acc.on_path[iv.k] {
            BeliefRule::Bayes
        } else {
            BeliefRule::HighestType
        };
        let rej_rule = if self.rej.on_path[iv.k] {
            BeliefRule::Bayes
        } else {
            BeliefRule::LowestType
        };
        EquilibriumOutcome {
            p1,
            k: price_at(x, iv.k),
            k_index: iv.k,
            p_accept: price_at(y, iv.a),
            p_reject: price_at(y, iv.r),
            revenue: self.value(iv, p1),
            accepts,
            buyer_value,
            beliefs: vec![
                Belief::new(
                    "accept",
                    self.acc.on_path[iv.k],
                    acc_rule,
                    y,
                    self.acc.beliefs[iv.k].clone(),
                ),
                Belief::new(
                    "reject",
                    self.rej.on_path[iv.k],
                    rej_rule,
                    y,
                    self.rej.beliefs[iv.k].clone(),
                ),
            ],
            refinement: Refinement::PbeStar,
            no_fixed_point,
        }
    }
}

/// Every `(k, p_A, p_R)` on the grid that is a continuation equilibrium after
/// first-period price `p1`.
pub fn continuation_fixed_points(game: &TwoPeriodGame, p1: f64) -> Vec<FixedPoint> {
    let cont = Continuation::new(game);
    let mut out: Vec<FixedPoint> = cont
        .intervals()
        .iter()
        .filter(|iv| Continuation::contains(iv, p1))
        .map(|iv| cont.fixed_point(iv, p1))
        .collect();
    out.sort_by(|a, b| {
        (a.k_index, a.p_accept, a.p_reject)
            .partial_cmp(&(b.k_index, b.p_accept, b.p_reject))
            .unwrap()
    });
    out
}

/// Seller-optimal equilibrium: for each candidate first-period price the
/// seller-best continuation, then the best price.
pub fn solve_pbe_star(game: &TwoPeriodGame) -> Result<EquilibriumOutcome> {
    let cont = Continuation::new(game);
    let intervals = cont.intervals();
    let mut candidates = game.p1_grid.clone();
    if game.indifference_prices {
        for iv in &intervals {
            if iv.hi.is_finite() {
                candidates.push(iv.hi);
            }
            if iv.lo.is_finite() {
                candidates.push(iv.lo);
            }
        }
        candidates.sort_by(f64::total_cmp);
        candidates.dedup();
    }
    // Best continuation per candidate price.
    let best: Vec<Option<(f64, usize)>> = candidates
        .par_iter()
        .map(|&p1| {
            let mut b: Option<(f64, usize)> = None;
            for (q, iv) in intervals.iter().enumerate() {
                if !Continuation::contains(iv, p1) {
                    continue;
                }
                let v = cont.value(iv, p1);
                match b {
                    Some((bv, _)) if v <= bv || is_tie(v, bv) => {}
                    _ => b = Some((v, q)),
                }
            }
            b
        })
        .collect();
    let mut missing = Vec::new();
    for (p1, b) in candidates.iter().zip(&best) {
        if b.is_none() && game.p1_grid.contains(p1) {
            missing.push(*p1);
        }
    }
    let mut choice: Option<(f64, f64, usize)> = None;
    for (p1, b) in candidates.iter().zip(&best) {
        if let Some((v, q)) = *b {
            match choice {
                Some((cv, _, _)) if v <= cv || is_tie(v, cv) => {}
                _ => choice = Some((v, *p1, q)),
            }
        }
    }
    let (_, p1, q) = choice.ok_or(Error::NoFixedPoint)?;
    Ok(cont.outcome(&intervals[q], p1, missing))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{kernel_from_ar1, make_uniform, Ar1Spec, MarkovKernel, TypeGrid};
    use crate::mechanism::benchmark_two_period;

    fn ex1(n: usize) -> TwoPeriodGame {
        let u = make_uniform(1.0, 2.0, n).unwrap();
        TwoPeriodGame::baseline(MarkovKernel::independent(u.clone(), &u).unwrap(), 1.0, n).unwrap()
    }

    fn perfect(n: usize) -> TwoPeriodGame {
        let u = make_uniform(1.0, 2.0, n).unwrap();
        let k = kernel_from_ar1(&Ar1Spec { alpha: 1.0, noise: TypeGrid::point_mass(0.0) }, &u, n)
            .unwrap();
        TwoPeriodGame::baseline(k, 1.0, n).unwrap()
    }

    #[test]
    fn example_one_fixed_point_at_p1_one() {
        let g = ex1(41);
        let fps = continuation_fixed_points(&g, 1.0);
        assert!(fps
            .iter()
            .any(|f| f.k_index == 0 && f.p_accept == 1.0 && f.p_reject == 1.0));
    }

    #[test]
    fn example_one_revenue_is_bounded() {
        let g = ex1(101);
        let out = solve_pbe_star(&g).unwrap();
        let b = benchmark_two_period(&g).total;
        assert!(out.revenue <= b + 2.0 * g.price_step());
        // Both posteriors are the prior; grid ties let the seller pick any
        // of its monopoly prices after either outcome.
        let ties = crate::pricing::monopoly_prices(g.prior());
        assert!(ties.contains(&out.p_accept) && ties.contains(&out.p_reject));
    }

    #[test]
    fn perfect_correlation_attains_benchmark() {
        let g = perfect(101);
        let out = solve_pbe_star(&g).unwrap();
        assert!((out.revenue - 2.0).abs() <= 2.0 * g.price_step(), "{}", out.revenue);
        let fps = continuation_fixed_points(&g, 1.0);
        assert!(fps.iter().any(|f| f.k_index == 0 && f.p_reject == 1.0));
        assert!(fps.iter().all(|f| f.p_accept >= f.p_reject));
    }

    #[test]
    fn small_discount_prices_like_a_monopolist() {
        let mut g = ex1(101);
        g.delta = 0.01;
        let out = solve_pbe_star(&g).unwrap();
        assert!((out.p1 - 1.0).abs() <= g.price_step() + 1e-12, "{}", out.p1);
    }
}
