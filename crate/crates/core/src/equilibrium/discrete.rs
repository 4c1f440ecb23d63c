//! Exhaustive search over pure profiles of a finite-type game.

use rayon::prelude::*;

use super::{Belief, BeliefRule, EquilibriumOutcome, Refinement};
use crate::error::{Error, Result};
use crate::model::{DiscreteGame, MAX_DISCRETE_PRICES, MAX_DISCRETE_TYPES};
use crate::pricing::accept_tol;

/// Which off-path beliefs the seller may hold.
pub type BeliefFilter = Refinement;

const REVENUE_TOL: f64 = 1e-9;

/// Mixture weights tried for two-type off-path beliefs in unrestricted mode.
const MIX_STEPS: usize = 9;

struct Tables {
    x: Vec<f64>,
    w: Vec<f64>,
    acc: Vec<Vec<f64>>,
    rej: Vec<Vec<f64>>,
    pts: Vec<f64>,
    prices: Vec<f64>,
    delta: f64,
    pe_acc: Vec<Vec<f64>>,
    pe_rej: Vec<Vec<f64>>,
    sv_acc: Vec<Vec<f64>>,
    sv_rej: Vec<Vec<f64>>,
    /// Off-path beliefs the filter allows, with the prices each supports.
    off_acc: Vec<(Vec<f64>, Vec<bool>)>,
    off_rej: Vec<(Vec<f64>, Vec<bool>)>,
    filter: BeliefFilter,
}

fn sells(v: f64, p: f64) -> bool {
    v >= p - accept_tol(p)
}

impl Tables {
    fn new(game: &DiscreteGame, filter: BeliefFilter) -> Result<Self> {
        let g = game.to_two_period()?;
        let prior = g.prior();
        let pts = g.theta2().to_vec();
        let prices = game.prices.clone();
        let acc: Vec<Vec<f64>> = g.kernels.accept.rows().to_vec();
        let rej: Vec<Vec<f64>> = g.kernels.reject.rows().to_vec();
        let stats = |rows: &[Vec<f64>]| {
            let pe: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| {
                    prices
                        .iter()
                        .map(|&p| pts.iter().zip(r).map(|(v, m)| m * (v - p).max(0.0)).sum())
                        .collect()
                })
                .collect();
            let sv: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| {
                    prices
                        .iter()
                        .map(|&p| {
                            pts.iter()
                                .zip(r)
                                .filter(|(v, _)| sells(**v, p))
                                .map(|(_, m)| m)
                                .sum()
                        })
                        .collect()
                })
                .collect();
            (pe, sv)
        };
        let (pe_acc, sv_acc) = stats(&acc);
        let (pe_rej, sv_rej) = stats(&rej);
        let mut t = Self {
            x: prior.points().to_vec(),
            w: prior.weights().to_vec(),
            acc,
            rej,
            pts,
            prices,
            delta: game.delta,
            pe_acc,
            pe_rej,
            sv_acc,
            sv_rej,
            off_acc: Vec::new(),
            off_rej: Vec::new(),
            filter,
        };
        let n = t.x.len();
        let family = |rows: &[Vec<f64>], boundary: usize| -> Vec<Vec<f64>> {
            match filter {
                Refinement::PbeStar => vec![rows[boundary].clone()],
                Refinement::Unrestricted => {
                    let mut out: Vec<Vec<f64>> = rows.to_vec();
                    for i in 0..n {
                        for j in i + 1..n {
                            for s in 1..=MIX_STEPS {
                                let l = s as f64 / (MIX_STEPS + 1) as f64;
                                out.push(
                                    rows[i]
                                        .iter()
                                        .zip(&rows[j])
                                        .map(|(a, b)| l * a + (1.0 - l) * b)
                                        .collect(),
                                );
                            }
                        }
                    }
                    out
                }
            }
        };
        t.off_acc = family(&t.acc, n - 1)
            .into_iter()
            .map(|b| {
                let opt = t.optimal_set(&b);
                (b, opt)
            })
            .collect();
        t.off_rej = family(&t.rej, 0)
            .into_iter()
            .map(|b| {
                let opt = t.optimal_set(&b);
                (b, opt)
            })
            .collect();
        Ok(t)
    }

    fn optimal_set(&self, belief: &[f64]) -> Vec<bool> {
        let rev: Vec<f64> = self
            .prices
            .iter()
            .map(|&p| {
                p * self
                    .pts
                    .iter()
                    .zip(belief)
                    .filter(|(v, _)| sells(**v, p))
                    .map(|(_, m)| m)
                    .sum::<f64>()
            })
            .collect();
        let best = rev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tol = 1e-12 * best.abs().max(1.0);
        rev.iter().map(|&r| r >= best - tol).collect()
    }

    fn mixture(&self, rows: &[Vec<f64>], members: impl Iterator<Item = usize>) -> Option<Vec<f64>> {
        let mut out = vec![0.0; self.pts.len()];
        let mut mass = 0.0;
        for i in members {
            mass += self.w[i];
            for (o, r) in out.iter_mut().zip(&rows[i]) {
                *o += self.w[i] * r;
            }
        }
        if mass < 1e-12 {
            return None;
        }
        out.iter_mut().for_each(|o| *o /= mass);
        Some(out)
    }

    /// Belief after one outcome that supports price index `q`, or `None`
    /// when no admissible belief does.
    fn supporting_belief(&self, accept: bool, s: &[bool], q: usize) -> Option<(Vec<f64>, bool, BeliefRule)> {
        let (rows, off) = if accept {
            (&self.acc, &self.off_acc)
        } else {
            (&self.rej, &self.off_rej)
        };
        let members = (0..s.len()).filter(|&i| s[i] == accept);
        match self.mixture(rows, members) {
            Some(b) => self.optimal_set(&b)[q].then_some((b, true, BeliefRule::Bayes)),
            None => {
                let rule = match self.filter {
                    Refinement::PbeStar if accept => BeliefRule::HighestType,
                    Refinement::PbeStar => BeliefRule::LowestType,
                    Refinement::Unrestricted => BeliefRule::Chosen,
                };
                off.iter()
                    .find(|(_, opt)| opt[q])
                    .map(|(b, _)| (b.clone(), false, rule))
            }
        }
    }

    fn payoff(&self, p1: usize, a: usize, r: usize, s: &[bool]) -> f64 {
        let d = self.delta;
        let p = &self.prices;
        (0..s.len())
            .map(|i| {
                let w = self.w[i];
                if s[i] {
                    w * (p[p1] + d * p[a] * self.sv_acc[i][a])
                } else {
                    w * d * p[r] * self.sv_rej[i][r]
                }
            })
            .sum()
    }

    fn buyer_values(&self, p1: usize, a: usize, r: usize) -> (Vec<f64>, Vec<f64>) {
        let d = self.delta;
        let ua = (0..self.x.len())
            .map(|i| self.x[i] - self.prices[p1] + d * self.pe_acc[i][a])
            .collect();
        let ur = (0..self.x.len()).map(|i| d * self.pe_rej[i][r]).collect();
        (ua, ur)
    }

    /// Every continuation equilibrium after first-period price index `p1`.
    fn continuations(&self, p1: usize) -> Vec<Continuation> {
        let m = self.prices.len();
        let tol = accept_tol(self.prices[p1]);
        let mut out = Vec::new();
        for a in 0..m {
            for r in 0..m {
                let (ua, ur) = self.buyer_values(p1, a, r);
                let forced: Vec<Option<bool>> = ua
                    .iter()
                    .zip(&ur)
                    .map(|(ua, ur)| {
                        if (ua - ur).abs() <= tol {
                            None
                        } else {
                            Some(ua > ur)
                        }
                    })
                    .collect();
                let free: Vec<usize> = (0..forced.len()).filter(|&i| forced[i].is_none()).collect();
                for mask in 0u32..(1u32 << free.len()) {
                    let mut s: Vec<bool> = forced.iter().map(|f| f.unwrap_or(false)).collect();
                    for (b, &i) in free.iter().enumerate() {
                        s[i] = mask >> b & 1 == 1;
                    }
                    let Some(ab) = self.supporting_belief(true, &s, a) else { continue };
                    let Some(rb) = self.supporting_belief(false, &s, r) else { continue };
                    let buyer_value = s
                        .iter()
                        .enumerate()
                        .map(|(i, &acc)| if acc { ua[i] } else { ur[i] })
                        .collect();
                    out.push(Continuation {
                        a,
                        r,
                        payoff: self.payoff(p1, a, r, &s),
                        accepts: s,
                        buyer_value,
                        acc_belief: ab,
                        rej_belief: rb,
                    });
                }
            }
        }
        out
    }
}

struct Continuation {
    a: usize,
    r: usize,
    accepts: Vec<bool>,
    payoff: f64,
    buyer_value: Vec<f64>,
    acc_belief: (Vec<f64>, bool, BeliefRule),
    rej_belief: (Vec<f64>, bool, BeliefRule),
}

/// All pure-strategy equilibria that survive `filter`, best revenue first.
///
/// A first-period deviation is deterred when some continuation after it pays
/// the seller no more than the candidate; deviations admitting no pure
/// continuation are listed in `no_fixed_point` rather than ruled out.
pub fn enumerate_discrete(game: &DiscreteGame, filter: BeliefFilter) -> Result<Vec<EquilibriumOutcome>> {
    if game.theta1.len() > MAX_DISCRETE_TYPES || game.theta2.len() > MAX_DISCRETE_TYPES {
        return Err(Error::SizeLimitExceeded(format!(
            "at most {MAX_DISCRETE_TYPES} types per period"
        )));
    }
    if game.prices.len() > MAX_DISCRETE_PRICES {
        return Err(Error::SizeLimitExceeded(format!(
            "at most {MAX_DISCRETE_PRICES} prices"
        )));
    }
    let t = Tables::new(game, filter)?;
    let conts: Vec<Vec<Continuation>> = (0..t.prices.len())
        .into_par_iter()
        .map(|p1| t.continuations(p1))
        .collect();
    let worst: Vec<Option<f64>> = conts
        .iter()
        .map(|c| c.iter().map(|c| c.payoff).reduce(f64::min))
        .collect();
    let missing: Vec<f64> = worst
        .iter()
        .zip(&t.prices)
        .filter(|(w, _)| w.is_none())
        .map(|(_, p)| *p)
        .collect();
    let mut out = Vec::new();
    for (p1, cs) in conts.iter().enumerate() {
        for c in cs {
            let deterred = worst
                .iter()
                .all(|w| w.map_or(true, |w| w <= c.payoff + REVENUE_TOL * c.payoff.abs().max(1.0)));
            if deterred {
                out.push(t.outcome(p1, c, missing.clone()));
            }
        }
    }
    out.sort_by(|a, b| {
        b.revenue
            .total_cmp(&a.revenue)
            .then(a.p1.total_cmp(&b.p1))
            .then(a.p_accept.total_cmp(&b.p_accept))
            .then(a.p_reject.total_cmp(&b.p_reject))
    });
    Ok(out)
}

impl Tables {
    fn outcome(&self, p1: usize, c: &Continuation, missing: Vec<f64>) -> EquilibriumOutcome {
        let n = self.x.len();
        let k_index = c.accepts.iter().position(|&a| a).unwrap_or(n);
        let k = if k_index < n {
            self.x[k_index]
        } else {
            crate::pricing::price_at(&self.x, n)
        };
        let belief = |h, b: &(Vec<f64>, bool, BeliefRule)| {
            Belief::new(h, b.1, b.2, &self.pts, b.0.clone())
        };
        EquilibriumOutcome {
            p1: self.prices[p1],
            k,
            k_index,
            p_accept: self.prices[c.a],
            p_reject: self.prices[c.r],
            revenue: c.payoff,
            accepts: c.accepts.clone(),
            buyer_value: c.buyer_value.clone(),
            beliefs: vec![belief("accept", &c.acc_belief), belief("reject", &c.rej_belief)],
            refinement: self.filter,
            no_fixed_point: missing,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::solve_pbe_star;
    use crate::instances::{ex2_game, ex3_game, ex4_game};
    use crate::model::TwoPeriodGame;
    use crate::dist::{make_uniform, MarkovKernel};

    fn has(out: &[EquilibriumOutcome], p: (f64, f64, f64)) -> Option<&EquilibriumOutcome> {
        out.iter()
            .find(|o| (o.p1, o.p_accept, o.p_reject) == p)
    }

    #[test]
    fn negative_correlation_beats_benchmark() {
        let out = enumerate_discrete(&ex3_game(), Refinement::PbeStar).unwrap();
        let best = &out[0];
        assert!(best.revenue >= 2.5 - 1e-12, "{}", best.revenue);
        assert!(out.iter().any(|o| (o.p1, o.p_accept, o.p_reject) == (2.0, 1.0, 2.0)
            && o.accepts == [false, true]
            && (o.revenue - 2.5).abs() < 1e-12));
    }

    #[test]
    fn substitutes_beat_benchmark() {
        let out = enumerate_discrete(&ex4_game(), Refinement::PbeStar).unwrap();
        assert!(out[0].revenue >= 1.25 - 1e-12);
        let e = has(&out, (1.0, 0.5, 1.0)).unwrap();
        assert!((e.revenue - 1.25).abs() < 1e-12);
    }

    #[test]
    fn boundary_beliefs_remove_commitment_profile() {
        let g = ex2_game();
        let free = enumerate_discrete(&g, Refinement::Unrestricted).unwrap();
        let e = has(&free, (1.5, 1.0, 2.0)).expect("survives without the belief rule");
        assert!(!e.reject_belief().on_path);
        let star = enumerate_discrete(&g, Refinement::PbeStar).unwrap();
        assert!(has(&star, (1.5, 1.0, 2.0)).is_none());
    }

    #[test]
    fn four_point_grid_matches_continuous_solver() {
        let u = make_uniform(1.0, 2.0, 4).unwrap();
        let g = TwoPeriodGame::baseline(MarkovKernel::independent(u.clone(), &u).unwrap(), 1.0, 4)
            .unwrap();
        let d = DiscreteGame::from_two_period(&g, u.points().to_vec()).unwrap();
        let best = enumerate_discrete(&d, Refinement::PbeStar).unwrap()[0].revenue;
        let cont = solve_pbe_star(&d.to_two_period().unwrap()).unwrap();
        assert!((best - cont.revenue).abs() <= 1e-9, "{best} vs {}", cont.revenue);
    }

    #[test]
    fn size_limits() {
        let n = MAX_DISCRETE_TYPES + 1;
        let pts: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let pmf = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 / n as f64 } else { 0.0 }).collect()).collect();
        let g = DiscreteGame::new(pts.clone(), pts.clone(), pmf, pts, 1.0).unwrap();
        assert!(matches!(
            enumerate_discrete(&g, Refinement::PbeStar),
            Err(Error::SizeLimitExceeded(_))
        ));
    }
}
