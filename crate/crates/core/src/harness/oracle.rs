//! Brute-force reference answers built from grids and kernel rows alone.
//! Nothing here calls the pricing, mechanism or equilibrium modules, so the
//! answers can be compared against those solvers.

use std::collections::BTreeMap;

use serde::Serialize;

use super::scenario::{ModelKind, Scenario};
use crate::dist::MarkovKernel;
use crate::error::{Error, Result};
use crate::model::TwoPeriodGame;

/// Largest number of candidate evaluations a query may use.
pub const MAX_EVALUATIONS: u64 = 10_000_000;

const TIE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum OracleQuery {
    /// Monopoly price of the period-`t` marginal (1-based).
    Monopoly(usize),
    /// Lowest accepting first-period type at `(p1, p_A, p_R)`.
    Threshold(f64, f64, f64),
    /// Best value of the relaxed program over `p_A >= p_R`.
    Relaxation,
    /// Best revenue when the seller commits to all three prices.
    Commitment,
    /// Seller-optimal continuation fixed point.
    Equilibrium,
}

impl std::str::FromStr for OracleQuery {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::validation("query", format!("cannot parse `{s}`"));
        let (head, args) = s.split_once(':').unwrap_or((s, ""));
        let nums = || -> Result<Vec<f64>> {
            args.split(',')
                .map(|a| a.trim().parse::<f64>().map_err(|_| bad()))
                .collect()
        };
        match head {
            "monopoly" if args.is_empty() => Ok(OracleQuery::Monopoly(1)),
            "monopoly" => args.parse().map(OracleQuery::Monopoly).map_err(|_| bad()),
            "threshold" => match nums()?[..] {
                [p1, a, r] => Ok(OracleQuery::Threshold(p1, a, r)),
                _ => Err(bad()),
            },
            "relaxation" => Ok(OracleQuery::Relaxation),
            "commitment" => Ok(OracleQuery::Commitment),
            "equilibrium" => Ok(OracleQuery::Equilibrium),
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleAnswer {
    pub query: String,
    pub value: f64,
    /// Maximizer or other supporting numbers, by name.
    pub detail: BTreeMap<String, f64>,
    pub evaluations: u64,
}

fn budget(needed: u64) -> Result<()> {
    if needed > MAX_EVALUATIONS {
        Err(Error::BudgetExceeded {
            needed,
            budget: MAX_EVALUATIONS,
        })
    } else {
        Ok(())
    }
}

fn better(v: f64, best: f64) -> bool {
    if !best.is_finite() {
        return v > best;
    }
    v > best && (v - best).abs() > TIE * best.abs().max(1.0)
}

/// Best revenue and every maximizing index, ascending, by scanning every
/// support point; index `points.len()` is the no-sale price.
fn monopoly_scan(points: &[f64], w: &[f64]) -> (f64, Vec<usize>) {
    let n = points.len();
    let revs: Vec<f64> = (0..n)
        .map(|j| points[j] * (j..n).map(|l| w[l]).sum::<f64>())
        .collect();
    let best = revs.iter().copied().fold(0.0_f64, f64::max);
    let mut ties: Vec<usize> = (0..n)
        .filter(|&j| (revs[j] - best).abs() <= TIE * best.abs().max(1.0))
        .collect();
    if best <= 0.0 {
        ties.push(n);
    }
    (best, ties)
}

fn price(points: &[f64], j: usize) -> f64 {
    if j < points.len() {
        points[j]
    } else {
        let n = points.len();
        let step = if n > 1 { points[n - 1] - points[n - 2] } else { 1.0 };
        points[n - 1] + step
    }
}

fn rent(points: &[f64], row: &[f64], p: f64) -> f64 {
    points.iter().zip(row).map(|(y, w)| w * (y - p).max(0.0)).sum()
}

fn sales(points: &[f64], row: &[f64], j: usize) -> f64 {
    (j..points.len()).map(|l| row[l]).sum()
}

fn marginal(k: &MarkovKernel, w: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; k.n_to()];
    for (row, wi) in k.rows().iter().zip(w) {
        for (o, r) in out.iter_mut().zip(row) {
            *o += wi * r;
        }
    }
    out
}

/// Finite-difference impulse response, or the known AR(1) slope.
fn impulse(k: &MarkovKernel) -> Vec<Vec<f64>> {
    let n = k.n_from();
    let m = k.n_to();
    if let Some(a) = k.slope() {
        return vec![vec![a; m]; n];
    }
    let x = k.from_grid().points();
    let y = k.to_grid().points();
    let density = k.to_grid().is_density();
    let cdf_pdf = |row: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let mut c = vec![0.0; m];
        let mut f = vec![0.0; m];
        if density && m > 1 {
            for j in 1..m {
                c[j] = c[j - 1] + 0.5 * (row[j - 1] + row[j]) * (y[j] - y[j - 1]);
            }
            let z = c[m - 1];
            if z > 0.0 {
                for j in 0..m {
                    c[j] /= z;
                    f[j] = row[j] / z;
                }
            }
        } else {
            let mut acc = 0.0;
            for j in 0..m {
                acc += row[j];
                c[j] = acc;
                let width = match (m, j) {
                    (1, _) => 1.0,
                    (_, 0) => y[1] - y[0],
                    _ if j == m - 1 => y[m - 1] - y[m - 2],
                    _ => 0.5 * (y[j + 1] - y[j - 1]),
                };
                f[j] = row[j] / width;
            }
        }
        (c, f)
    };
    let tables: Vec<_> = k.rows().iter().map(|r| cdf_pdf(r)).collect();
    (0..n)
        .map(|i| {
            if n < 2 {
                return vec![0.0; m];
            }
            let (lo, hi) = match i {
                0 => (0, 1),
                _ if i == n - 1 => (n - 2, n - 1),
                _ => (i - 1, i + 1),
            };
            let fmax = tables[i].1.iter().copied().fold(0.0, f64::max);
            (0..m)
                .map(|j| {
                    let f = tables[i].1[j];
                    if f <= 0.0 || f <= 1e-12 * fmax {
                        0.0
                    } else {
                        -(tables[hi].0[j] - tables[lo].0[j]) / (x[hi] - x[lo]) / f
                    }
                })
                .collect()
        })
        .collect()
}

fn two_period(s: &Scenario) -> Result<TwoPeriodGame> {
    s.two_period_game()
}

fn monopoly(s: &Scenario, t: usize) -> Result<OracleAnswer> {
    let grid: (Vec<f64>, Vec<f64>) = if s.model == ModelKind::MultiPeriod {
        let g = s.multi_period_game()?;
        if t == 0 || t > g.horizon() {
            return Err(Error::validation("query", format!("period {t} out of range")));
        }
        let mut w = g.prior.weights().to_vec();
        for k in &g.transitions[..t - 1] {
            w = marginal(k, &w);
        }
        let pts = if t == 1 {
            g.prior.points().to_vec()
        } else {
            g.transitions[t - 2].to_grid().points().to_vec()
        };
        (pts, w)
    } else {
        let g = two_period(s)?;
        match t {
            1 => (g.prior().points().to_vec(), g.prior().weights().to_vec()),
            2 => (
                g.theta2().to_vec(),
                marginal(&g.kernels.reject, g.prior().weights()),
            ),
            _ => return Err(Error::validation("query", format!("period {t} out of range"))),
        }
    };
    let n = grid.0.len() as u64;
    budget(n * n)?;
    let (best, ties) = monopoly_scan(&grid.0, &grid.1);
    let p = price(&grid.0, ties[0]);
    Ok(OracleAnswer {
        query: format!("monopoly:{t}"),
        value: p,
        detail: BTreeMap::from([("revenue".into(), best), ("ties".into(), ties.len() as f64)]),
        evaluations: grid.0.len() as u64,
    })
}

/// `c_i = theta_1 - delta * (E[(theta_2 - p_R)_+ | i, reject] - E[(theta_2 - p_A)_+ | i, accept])`
fn reservations(g: &TwoPeriodGame, pa: f64, pr: f64) -> Vec<f64> {
    let y = g.theta2();
    let x = g.prior().points();
    (0..x.len())
        .map(|i| {
            x[i] - g.delta
                * (rent(y, g.kernels.reject.row(i), pr) - rent(y, g.kernels.accept.row(i), pa))
        })
        .collect()
}

fn tol(p1: f64) -> f64 {
    TIE * (1.0 + p1.abs())
}

fn threshold(s: &Scenario, p1: f64, pa: f64, pr: f64) -> Result<OracleAnswer> {
    let g = two_period(s)?;
    let x = g.prior().points();
    let c = reservations(&g, pa, pr);
    let accepting: Vec<usize> = (0..x.len()).filter(|&i| c[i] >= p1 - tol(p1)).collect();
    let k = accepting.first().map_or(price(x, x.len()), |&i| x[i]);
    Ok(OracleAnswer {
        query: format!("threshold:{p1},{pa},{pr}"),
        value: k,
        detail: BTreeMap::from([("accepting".into(), accepting.len() as f64)]),
        evaluations: x.len() as u64,
    })
}

fn relaxation(s: &Scenario) -> Result<OracleAnswer> {
    let g = two_period(s)?;
    let prior = g.prior();
    let (x, w) = (prior.points(), prior.weights());
    let y = g.theta2();
    let (n, m) = (x.len(), y.len());
    let triples = (n as u64 + 1) * (m as u64 + 1) * (m as u64 + 2) / 2;
    budget(triples)?;
    let hazard = prior.inverse_hazard()?;
    let phi: Vec<f64> = x.iter().zip(&hazard).map(|(x, h)| x - h).collect();
    // sum_{j >= a} r_ij psi_ij for each type and cutoff price.
    let tail = |k: &MarkovKernel| -> Vec<Vec<f64>> {
        let imp = impulse(k);
        (0..n)
            .map(|i| {
                let mut t = vec![0.0; m + 1];
                for j in (0..m).rev() {
                    t[j] = t[j + 1] + k.row(i)[j] * (y[j] - hazard[i] * imp[i][j]);
                }
                t
            })
            .collect()
    };
    let t1 = tail(&g.kernels.accept);
    let t0 = tail(&g.kernels.reject);
    let low = (0..n).find(|&i| w[i] > 0.0).unwrap_or(0);
    let d = g.delta;
    let mut best = (f64::NEG_INFINITY, 0, 0, 0);
    for k in 0..=n {
        let first: f64 = (k..n).map(|i| w[i] * phi[i]).sum();
        for r in 0..=m {
            let low_rent = if r < m { rent(y, g.kernels.reject.row(low), y[r]) } else { 0.0 };
            let rej: f64 = (0..k).map(|i| w[i] * t0[i][r]).sum();
            for a in r..=m {
                let acc: f64 = (k..n).map(|i| w[i] * t1[i][a]).sum();
                let v = first + d * (acc + rej - low_rent);
                if better(v, best.0) {
                    best = (v, k, a, r);
                }
            }
        }
    }
    Ok(OracleAnswer {
        query: "relaxation".into(),
        value: best.0,
        detail: BTreeMap::from([
            ("k".into(), price(x, best.1)),
            ("p_accept".into(), price(y, best.2)),
            ("p_reject".into(), price(y, best.3)),
        ]),
        evaluations: triples,
    })
}

fn commitment(s: &Scenario) -> Result<OracleAnswer> {
    let g = two_period(s)?;
    let prior = g.prior();
    let (x, w) = (prior.points(), prior.weights());
    let y = g.theta2();
    let (n, m) = (x.len(), y.len());
    let evals = (m as u64 + 1).pow(2) * (n as u64 + 1);
    budget(evals)?;
    let d = g.delta;
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0, 0.0);
    for a in 0..=m {
        for r in 0..=m {
            let (pa, pr) = (price(y, a), price(y, r));
            let c = reservations(&g, pa, pr);
            let acc: Vec<f64> = (0..n).map(|i| d * pa * sales(y, g.kernels.accept.row(i), a)).collect();
            let rej: Vec<f64> = (0..n).map(|i| d * pr * sales(y, g.kernels.reject.row(i), r)).collect();
            // Every reservation value, plus a price nobody accepts.
            let top = c.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0;
            for p1 in c.iter().copied().chain([top]) {
                let v: f64 = (0..n)
                    .map(|i| {
                        if c[i] >= p1 - tol(p1) {
                            w[i] * (p1 + acc[i])
                        } else {
                            w[i] * rej[i]
                        }
                    })
                    .sum();
                if better(v, best.0) {
                    best = (v, p1, pa, pr);
                }
            }
        }
    }
    Ok(OracleAnswer {
        query: "commitment".into(),
        value: best.0,
        detail: BTreeMap::from([
            ("p1".into(), best.1),
            ("p_accept".into(), best.2),
            ("p_reject".into(), best.3),
        ]),
        evaluations: evals,
    })
}

fn equilibrium(s: &Scenario) -> Result<OracleAnswer> {
    let g = two_period(s)?;
    let prior = g.prior();
    let (x, w) = (prior.points(), prior.weights());
    let y = g.theta2();
    let n = x.len();
    let d = g.delta;
    let lo = (0..n).find(|&i| w[i] > 0.0).unwrap_or(0);
    let hi = (0..n).rev().find(|&i| w[i] > 0.0).unwrap_or(n - 1);
    let mix = |k: &MarkovKernel, range: std::ops::Range<usize>, fallback: usize| -> Vec<f64> {
        let mass: f64 = range.clone().map(|i| w[i]).sum();
        if mass > 0.0 {
            let mut out = vec![0.0; y.len()];
            for i in range {
                for (o, r) in out.iter_mut().zip(k.row(i)) {
                    *o += w[i] * r;
                }
            }
            out.iter().map(|v| v / mass).collect()
        } else {
            k.row(fallback).to_vec()
        }
    };
    // (k, a, r, revenue after acceptance, after rejection, reservations)
    let mut cands = Vec::new();
    for k in 0..=n {
        let (ra, ta) = monopoly_scan(y, &mix(&g.kernels.accept, k..n, hi));
        let (rr, tr) = monopoly_scan(y, &mix(&g.kernels.reject, 0..k, lo));
        for &a in &ta {
            for &r in &tr {
                let c = reservations(&g, price(y, a), price(y, r));
                cands.push((k, a, r, ra, rr, c));
            }
        }
    }
    let mut prices = g.p1_grid.clone();
    if g.indifference_prices {
        for c in &cands {
            prices.extend(c.5.iter().copied());
        }
    }
    prices.sort_by(f64::total_cmp);
    prices.dedup();
    let evals = prices.len() as u64 * cands.len() as u64;
    budget(evals)?;
    let mut best = (f64::NEG_INFINITY, 0.0, 0, 0, 0);
    for &p1 in &prices {
        for (k, a, r, ra, rr, c) in &cands {
            let t = tol(p1);
            let ok = (0..n).all(|i| if i >= *k { c[i] >= p1 - t } else { c[i] <= p1 + t });
            if !ok {
                continue;
            }
            let m: f64 = (*k..n).map(|i| w[i]).sum();
            let v = (p1 + d * ra) * m + d * rr * (1.0 - m).max(0.0);
            if better(v, best.0) {
                best = (v, p1, *k, *a, *r);
            }
        }
    }
    if !best.0.is_finite() {
        return Err(Error::NoFixedPoint);
    }
    Ok(OracleAnswer {
        query: "equilibrium".into(),
        value: best.0,
        detail: BTreeMap::from([
            ("p1".into(), best.1),
            ("k".into(), price(x, best.2)),
            ("p_accept".into(), price(y, best.3)),
            ("p_reject".into(), price(y, best.4)),
        ]),
        evaluations: evals,
    })
}

/// Answers `query` on `scenario` by direct enumeration.
pub fn oracle_bruteforce(scenario: &Scenario, query: &OracleQuery) -> Result<OracleAnswer> {
    match query {
        OracleQuery::Monopoly(t) => monopoly(scenario, *t),
        OracleQuery::Threshold(p1, a, r) => threshold(scenario, *p1, *a, *r),
        OracleQuery::Relaxation => relaxation(scenario),
        OracleQuery::Commitment => commitment(scenario),
        OracleQuery::Equilibrium => equilibrium(scenario),
    }
}

#[cfg(test)]
fn uniform_scenario(lo: f64, hi: f64, n: usize) -> Scenario {
    let text = format!(
        r#"{{"model": "two_period", "delta": 1,
            "prior": {{"kind": "uniform", "lo": {lo}, "hi": {hi}}},
            "transition": {{"kind": "independent", "dist": {{"kind": "uniform", "lo": {lo}, "hi": {hi}}}}},
            "grids": {{"n_theta": {n}, "n_price": {n}}}}}"#
    );
    super::parse_scenario(&text).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{bundled, parse_scenario};

    fn ex1_small() -> Scenario {
        parse_scenario(bundled("example1_small").unwrap()).unwrap()
    }

    #[test]
    fn monopoly_of_unit_uniform() {
        let a = oracle_bruteforce(&uniform_scenario(0.0, 1.0, 101), &OracleQuery::Monopoly(1)).unwrap();
        assert!((a.value - 0.5).abs() < 1e-12, "{a:?}");
    }

    #[test]
    fn threshold_on_example_one() {
        let q: OracleQuery = "threshold:1.9,1,2".parse().unwrap();
        let a = oracle_bruteforce(&ex1_small(), &q).unwrap();
        assert!((a.value - 1.4).abs() <= 0.025 + 1e-12, "{a:?}");
    }

    #[test]
    fn query_parsing() {
        assert_eq!("monopoly:2".parse::<OracleQuery>().unwrap(), OracleQuery::Monopoly(2));
        assert!("threshold:1,2".parse::<OracleQuery>().is_err());
        assert!("nonsense".parse::<OracleQuery>().is_err());
    }

    #[test]
    fn budget_is_enforced() {
        let s = ex1_small().with_grid(401).unwrap();
        assert!(matches!(
            oracle_bruteforce(&s, &OracleQuery::Relaxation),
            Err(Error::BudgetExceeded { .. })
        ));
    }
}
