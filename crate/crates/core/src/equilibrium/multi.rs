//! Backward induction over public purchase histories for the game where the
//! seller may, at any history, commit to all remaining prices.

use rayon::prelude::*;
use serde::Serialize;

use crate::assumptions::check_log_concave;
use crate::dist::PosteriorTable;
use crate::error::{Error, Result};
use crate::model::MultiPeriodGame;
use crate::pricing::{monopoly_ties, price_at};

pub const MAX_HORIZON: usize = 6;

/// Upper bound on the estimated number of multiply-adds.
const WORK_BUDGET: u64 = 2_000_000_000;

const GAP_TOL: f64 = 1e-9;
const SLOPE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistoryPrice {
    /// Purchase record so far, `A` for a purchase and `R` for none.
    pub history: String,
    /// 1-based period.
    pub period: usize,
    pub price: f64,
    /// Monopoly price of the period's marginal.
    pub p_star: f64,
    pub committed: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub nodes: usize,
    /// Largest advantage of period-by-period pricing over committing, across
    /// every explored history.
    pub max_gap: f64,
    pub monotonicity_checks: usize,
    pub monotonicity_violations: usize,
    /// Smallest and largest of `dU / dtheta` and of `delta * dU / dtheta`
    /// over all continuation values.
    pub min_slope: f64,
    pub max_scaled_slope: f64,
    pub slope_violations: usize,
    /// Histories where reservation prices were not monotone in the type.
    pub multiple_crossings: usize,
}

impl Diagnostics {
    fn new() -> Self {
        Self {
            max_gap: f64::NEG_INFINITY,
            min_slope: f64::INFINITY,
            max_scaled_slope: f64::NEG_INFINITY,
            ..Default::default()
        }
    }

    fn merge(mut self, o: Diagnostics) -> Self {
        self.nodes += o.nodes;
        self.max_gap = self.max_gap.max(o.max_gap);
        self.monotonicity_checks += o.monotonicity_checks;
        self.monotonicity_violations += o.monotonicity_violations;
        self.min_slope = self.min_slope.min(o.min_slope);
        self.max_scaled_slope = self.max_scaled_slope.max(o.max_scaled_slope);
        self.slope_violations += o.slope_violations;
        self.multiple_crossings += o.multiple_crossings;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MultiOutcome {
    pub horizon: usize,
    pub commit_option: bool,
    pub revenue: f64,
    /// Committing at the start to every period's marginal monopoly price.
    pub commit_revenue: f64,
    /// Best revenue from pricing the first period alone.
    pub offer_revenue: f64,
    /// `offer_revenue - commit_revenue`.
    pub root_gap: f64,
    pub committed: bool,
    pub p_star: Vec<f64>,
    /// Prices on every history of the chosen strategy.
    pub path: Vec<HistoryPrice>,
    pub path_gap: f64,
    pub diagnostics: Diagnostics,
}

enum Plan {
    Commit,
    Offer {
        price: f64,
        accept: Box<Node>,
        reject: Box<Node>,
    },
}

struct Node {
    revenue: f64,
    /// Buyer value at each grid point of the current period.
    value: Vec<f64>,
    /// Monopoly prices of the marginals implied by the current belief.
    commit_prices: Vec<f64>,
    plan: Plan,
}

struct Solver<'a> {
    game: &'a MultiPeriodGame,
    commit_option: bool,
}

fn support(b: &[f64]) -> (usize, usize) {
    let lo = b.iter().position(|&w| w > 0.0).unwrap_or(0);
    let hi = b.iter().rposition(|&w| w > 0.0).unwrap_or(0);
    (lo, hi)
}

impl Solver<'_> {
    fn points(&self, t: usize) -> &[f64] {
        self.game.marginal(t).points()
    }

    fn last(&self) -> usize {
        self.game.horizon() - 1
    }

    /// `E[f(theta_{t+1}) | theta_t]` at every grid point of period `t`.
    fn expect_next(&self, t: usize, f: &[f64]) -> Vec<f64> {
        self.game.transitions[t]
            .rows()
            .iter()
            .map(|r| r.iter().zip(f).map(|(w, v)| w * v).sum())
            .collect()
    }

    fn commit(&self, t: usize, belief: &[f64]) -> Node {
        let d = self.game.delta;
        let mut marg = belief.to_vec();
        let mut prices = Vec::new();
        let mut revenue = 0.0;
        let mut disc = 1.0;
        for s in t..=self.last() {
            if s > t {
                marg = self.game.transitions[s - 1].push_forward(&marg);
            }
            let (best, ties) = monopoly_ties(self.points(s), &marg);
            prices.push(price_at(self.points(s), ties[0]));
            revenue += disc * best.max(0.0);
            disc *= d;
        }
        let surplus = |s: usize| -> Vec<f64> {
            let p = prices[s - t];
            self.points(s).iter().map(|x| (x - p).max(0.0)).collect()
        };
        let mut value = surplus(self.last());
        for s in (t..self.last()).rev() {
            let next = self.expect_next(s, &value);
            value = surplus(s)
                .iter()
                .zip(&next)
                .map(|(a, b)| a + d * b)
                .collect();
        }
        Node {
            revenue,
            value,
            commit_prices: prices,
            plan: Plan::Commit,
        }
    }

    fn slopes(&self, t: usize, u: &[f64], diag: &mut Diagnostics) {
        let x = self.points(t);
        let d = self.game.delta;
        for i in 1..x.len() {
            let s = (u[i] - u[i - 1]) / (x[i] - x[i - 1]);
            diag.min_slope = diag.min_slope.min(s);
            diag.max_scaled_slope = diag.max_scaled_slope.max(d * s);
            if s < -SLOPE_TOL || d * s > 1.0 + SLOPE_TOL {
                diag.slope_violations += 1;
            }
        }
    }

    /// One threshold `k` at a node: children, the supporting price, and the
    /// seller's value.
    fn offer(
        &self,
        t: usize,
        belief: &[f64],
        table: &PosteriorTable,
        k: usize,
    ) -> Result<(f64, Node, Diagnostics)> {
        let (lo, hi) = support(belief);
        let kernel = &self.game.transitions[t];
        let mut diag = Diagnostics::new();
        let acc = table
            .at_least(k)
            .unwrap_or_else(|| kernel.row(hi).to_vec());
        let rej = table.below(k).unwrap_or_else(|| kernel.row(lo).to_vec());
        let (a, da, _) = self.solve(t + 1, &acc)?;
        let (r, dr, _) = self.solve(t + 1, &rej)?;
        diag = diag.merge(da).merge(dr);
        for (pa, pr) in a.commit_prices.iter().zip(&r.commit_prices) {
            diag.monotonicity_checks += 1;
            if *pa < *pr {
                diag.monotonicity_violations += 1;
            }
        }
        let ua = self.expect_next(t, &a.value);
        let ur = self.expect_next(t, &r.value);
        self.slopes(t, &ua, &mut diag);
        self.slopes(t, &ur, &mut diag);

        let x = self.points(t);
        let d = self.game.delta;
        let c: Vec<f64> = (0..x.len()).map(|i| x[i] + d * (ua[i] - ur[i])).collect();
        if c[lo..=hi].windows(2).any(|w| w[1] < w[0] - GAP_TOL) {
            diag.multiple_crossings += 1;
        }
        let upper = c[k.min(hi + 1)..=hi]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let lower = c[lo..k].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let price = if k <= hi {
            if upper < lower - GAP_TOL * (1.0 + upper.abs()) {
                return Ok((f64::NEG_INFINITY, self.commit(t, belief), diag));
            }
            upper
        } else {
            lower + self.game.marginal(t).step().max(GAP_TOL)
        };
        let m_ge = table.mass_at_least(k);
        let m_lt = table.mass_below(k);
        let g = price * m_ge + d * (m_ge * a.revenue + m_lt * r.revenue);
        let value = (0..x.len())
            .map(|i| (x[i] - price + d * ua[i]).max(d * ur[i]))
            .collect();
        // Commit prices of the parent are filled in by the caller.
        let node = Node {
            revenue: g,
            value,
            commit_prices: Vec::new(),
            plan: Plan::Offer {
                price,
                accept: Box::new(a),
                reject: Box::new(r),
            },
        };
        Ok((g, node, diag))
    }

    /// Chosen play at a node, its diagnostics, and the best value from
    /// pricing the current period alone.
    fn solve(&self, t: usize, belief: &[f64]) -> Result<(Node, Diagnostics, f64)> {
        let committed = self.commit(t, belief);
        let mut diag = Diagnostics::new();
        diag.nodes = 1;
        if t == self.last() {
            return Ok((committed, diag, f64::NEG_INFINITY));
        }
        let (lo, hi) = support(belief);
        let table = PosteriorTable::new(&self.game.transitions[t], belief);
        let results: Vec<Result<(f64, Node, Diagnostics)>> = if t == 0 {
            (lo..=hi + 1)
                .into_par_iter()
                .map(|k| self.offer(t, belief, &table, k))
                .collect()
        } else {
            (lo..=hi + 1)
                .map(|k| self.offer(t, belief, &table, k))
                .collect()
        };
        let mut best: Option<(f64, Node)> = None;
        for res in results {
            let (g, node, d) = res?;
            diag = diag.merge(d);
            match &best {
                Some((bg, _)) if g <= *bg + GAP_TOL * bg.abs().max(1.0) => {}
                _ => best = Some((g, node)),
            }
        }
        let (g, mut node) = best.ok_or(Error::NoFixedPoint)?;
        diag.max_gap = diag.max_gap.max(g - committed.revenue);
        let use_offer = !self.commit_option
            || g > committed.revenue + GAP_TOL * committed.revenue.abs().max(1.0);
        if use_offer {
            node.commit_prices = committed.commit_prices;
            Ok((node, diag, g))
        } else {
            Ok((committed, diag, g))
        }
    }

    fn path(&self, node: &Node, t: usize, history: String, p_star: &[f64], out: &mut Vec<HistoryPrice>) {
        match &node.plan {
            Plan::Commit => {
                // Committed prices apply on every continuation history.
                let mut frontier = vec![history];
                for s in t..=self.last() {
                    let mut next = Vec::with_capacity(frontier.len() * 2);
                    for h in frontier {
                        out.push(HistoryPrice {
                            history: h.clone(),
                            period: s + 1,
                            price: node.commit_prices[s - t],
                            p_star: p_star[s],
                            committed: true,
                        });
                        next.push(format!("{h}A"));
                        next.push(format!("{h}R"));
                    }
                    frontier = next;
                }
            }
            Plan::Offer { price, accept, reject, .. } => {
                out.push(HistoryPrice {
                    history: history.clone(),
                    period: t + 1,
                    price: *price,
                    p_star: p_star[t],
                    committed: false,
                });
                self.path(accept, t + 1, format!("{history}A"), p_star, out);
                self.path(reject, t + 1, format!("{history}R"), p_star, out);
            }
        }
    }
}

fn check_preconditions(game: &MultiPeriodGame) -> Result<()> {
    let horizon = game.horizon();
    if horizon < 2 {
        return Err(Error::validation("horizon", "need at least two periods"));
    }
    if horizon > MAX_HORIZON {
        return Err(Error::HorizonLimit {
            horizon,
            limit: MAX_HORIZON,
        });
    }
    let upper = 1.0 / (2.0 * game.delta);
    for (t, k) in game.transitions.iter().enumerate() {
        match k.slope() {
            Some(a) if a > 0.0 && a < upper => {}
            Some(a) => {
                return Err(Error::AssumptionViolated(format!(
                    "slope {a} in transition {} is outside (0, {upper})",
                    t + 1
                )))
            }
            None => {
                return Err(Error::AssumptionViolated(format!(
                    "transition {} is not an AR(1) kernel",
                    t + 1
                )))
            }
        }
    }
    if !game.prior.is_density() || !check_log_concave(&game.prior)?.holds {
        return Err(Error::AssumptionViolated(
            "first-period prior is not a log-concave density".into(),
        ));
    }
    Ok(())
}

fn estimated_work(game: &MultiPeriodGame) -> u64 {
    let mut nodes: u64 = 1;
    let mut work: u64 = 0;
    for t in 0..game.horizon() - 1 {
        let n = game.marginal(t).len() as u64;
        let m = game.marginal(t + 1).len() as u64;
        work = work.saturating_add(nodes.saturating_mul((n + 1) * n * m));
        nodes = nodes.saturating_mul(2 * (n + 1));
    }
    work
}

/// Seller-optimal play by backward induction. With `commit_option` the
/// seller may commit to all remaining prices at any history, and does so
/// unless pricing one period at a time is strictly better.
pub fn solve_multi_period(game: &MultiPeriodGame, commit_option: bool) -> Result<MultiOutcome> {
    check_preconditions(game)?;
    let needed = estimated_work(game);
    if needed > WORK_BUDGET {
        return Err(Error::BudgetExceeded {
            needed,
            budget: WORK_BUDGET,
        });
    }
    let solver = Solver {
        game,
        commit_option,
    };
    let prior = game.prior.weights();
    let (root, diagnostics, offer_revenue) = solver.solve(0, prior)?;
    let committed = solver.commit(0, prior);
    let p_star: Vec<f64> = committed.commit_prices.clone();
    let mut path = Vec::new();
    solver.path(&root, 0, String::new(), &p_star, &mut path);
    let path_gap = path
        .iter()
        .map(|h| (h.price - h.p_star).abs())
        .fold(0.0, f64::max);
    Ok(MultiOutcome {
        horizon: game.horizon(),
        commit_option,
        revenue: root.revenue,
        commit_revenue: committed.revenue,
        offer_revenue,
        root_gap: offer_revenue - committed.revenue,
        committed: matches!(root.plan, Plan::Commit),
        p_star,
        path,
        path_gap,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{Ar1Spec, TypeGrid};
    use crate::equilibrium::solve_pbe_star;
    use crate::model::TwoPeriodGame;
    use crate::dist::KernelPair;

    fn chain(alpha: f64, horizon: usize, n: usize) -> MultiPeriodGame {
        let prior = TypeGrid::truncated_gaussian(1.5, 0.3, 1.0, 2.0, n).unwrap();
        let noise = TypeGrid::truncated_gaussian(1.0, 0.25, 0.5, 1.5, n).unwrap();
        let spec = Ar1Spec { alpha, noise };
        MultiPeriodGame::from_ar1(prior, &vec![spec; horizon - 1], 1.0, n).unwrap()
    }

    #[test]
    fn three_periods_match_commitment() {
        let g = chain(0.3, 3, 21);
        let out = solve_multi_period(&g, true).unwrap();
        let step = g.price_step();
        assert!((out.revenue - out.commit_revenue).abs() <= 2.0 * step, "{out:?}");
        assert!(out.path_gap <= step + 1e-12, "{}", out.path_gap);
        assert_eq!(out.diagnostics.monotonicity_violations, 0);
        assert_eq!(out.path.len(), 1 + 2 + 4);
    }

    #[test]
    fn two_periods_agree_with_two_period_solver() {
        let g = chain(0.3, 2, 21);
        let multi = solve_multi_period(&g, false).unwrap();
        let two = TwoPeriodGame::new(KernelPair::baseline(g.transitions[0].clone()), 1.0, 201)
            .unwrap();
        let pbe = solve_pbe_star(&two).unwrap();
        let tol = 2.0 * two.price_step();
        assert!((multi.revenue - pbe.revenue).abs() <= tol, "{} vs {}", multi.revenue, pbe.revenue);
    }

    #[test]
    fn preconditions() {
        assert!(matches!(
            solve_multi_period(&chain(0.6, 3, 11), true),
            Err(Error::AssumptionViolated(_))
        ));
        assert!(matches!(
            solve_multi_period(&chain(0.3, MAX_HORIZON + 1, 5), true),
            Err(Error::HorizonLimit { .. })
        ));
        let mut g = chain(0.3, 2, 5);
        g.transitions.clear();
        assert!(matches!(solve_multi_period(&g, true), Err(Error::Validation { .. })));
    }
}
