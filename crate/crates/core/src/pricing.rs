//! Monopoly pricing and the buyer's first-period acceptance rule.

use serde::Serialize;

use crate::dist::{KernelPair, TypeGrid};
use crate::error::{Error, Result};

/// Relative tolerance for revenue ties.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonopolyResult {
    pub price: f64,
    pub revenue: f64,
    pub unique: bool,
}

#[inline]
pub(crate) fn is_tie(a: f64, best: f64) -> bool {
    if !best.is_finite() {
        return a == best;
    }
    (a - best).abs() <= TIE_TOL * best.abs().max(1.0)
}

/// Price for candidate index `j`; `j == points.len()` stands for a price
/// above every point (no sale).
#[inline]
pub(crate) fn price_at(points: &[f64], j: usize) -> f64 {
    if j < points.len() {
        points[j]
    } else {
        let n = points.len();
        let step = if n > 1 { points[n - 1] - points[n - 2] } else { 1.0 };
        points[n - 1] + step
    }
}

/// Best revenue and every tied maximizer (ascending indices) for a mass
/// vector on `points`.
pub(crate) fn monopoly_ties(points: &[f64], weights: &[f64]) -> (f64, Vec<usize>) {
    let n = points.len();
    let mut rev = vec![0.0; n + 1];
    let mut surv = 0.0;
    for j in (0..n).rev() {
        surv += weights[j];
        rev[j] = points[j] * surv;
    }
    let best = rev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // The no-sale option only enters when nothing sells at a positive price.
    let ties: Vec<usize> = (0..=n)
        .filter(|&j| is_tie(rev[j], best))
        .filter(|&j| j < n || best <= 0.0)
        .collect();
    (best, ties)
}

pub fn monopoly_price(grid: &TypeGrid) -> MonopolyResult {
    let (revenue, ties) = monopoly_ties(grid.points(), grid.weights());
    MonopolyResult {
        price: price_at(grid.points(), ties[0]),
        revenue,
        unique: ties.len() == 1,
    }
}

/// Every revenue-maximizing price, ascending.
pub fn monopoly_prices(grid: &TypeGrid) -> Vec<f64> {
    let (_, ties) = monopoly_ties(grid.points(), grid.weights());
    ties.into_iter().map(|j| price_at(grid.points(), j)).collect()
}

/// `E[(theta - p)_+]` for a mass vector.
pub(crate) fn partial_expectation_of(points: &[f64], weights: &[f64], p: f64) -> f64 {
    points
        .iter()
        .zip(weights)
        .map(|(&y, &w)| w * (y - p).max(0.0))
        .sum()
}

/// `E[(theta - points[j])_+]` for every `j`, plus a trailing 0 for the
/// no-sale price.
pub(crate) fn partial_expectations_at_points(points: &[f64], weights: &[f64]) -> Vec<f64> {
    let n = points.len();
    let mut out = vec![0.0; n + 1];
    let (mut s0, mut s1) = (0.0, 0.0);
    for j in (0..n).rev() {
        s0 += weights[j];
        s1 += weights[j] * points[j];
        out[j] = (s1 - points[j] * s0).max(0.0);
    }
    out
}

/// `h(theta_1) = E[(theta_2 - p_R)_+ | theta_1, reject] - E[(theta_2 - p_A)_+ | theta_1, accept]`
/// at every first-period grid point.
pub fn h_function(kernels: &KernelPair, p_accept: f64, p_reject: f64) -> Vec<f64> {
    let y = kernels.to_points();
    (0..kernels.reject.n_from())
        .map(|i| {
            partial_expectation_of(y, kernels.reject.row(i), p_reject)
                - partial_expectation_of(y, kernels.accept.row(i), p_accept)
        })
        .collect()
}

#[inline]
pub(crate) fn accept_tol(p1: f64) -> f64 {
    TIE_TOL * (1.0 + p1.abs())
}

/// The buyer accepts iff `theta_1 - p_1 >= delta * h(theta_1)`; indifference
/// counts as acceptance.
pub fn buyer_accepts(
    theta1: f64,
    p1: f64,
    p_accept: f64,
    p_reject: f64,
    delta: f64,
    kernels: &KernelPair,
) -> Result<bool> {
    let i = kernels.prior().index_of(theta1)?;
    let y = kernels.to_points();
    let h = partial_expectation_of(y, kernels.reject.row(i), p_reject)
        - partial_expectation_of(y, kernels.accept.row(i), p_accept);
    Ok(theta1 - delta * h >= p1 - accept_tol(p1))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdResult {
    pub k: f64,
    /// Index of the lowest accepting grid point; equals the grid size when
    /// every type rejects.
    pub k_index: usize,
    pub all_accept: bool,
    pub all_reject: bool,
    pub crossing_gap: f64,
}

/// Cutoff `k` such that exactly the types `theta_1 >= k` accept, given the
/// per-type reservation prices `c_i = theta_1 - delta * h(theta_1)`.
pub(crate) fn threshold_from_reservations(
    points: &[f64],
    c: &[f64],
    p1: f64,
    delta: f64,
) -> Result<ThresholdResult> {
    let tol = accept_tol(p1);
    let accepts: Vec<bool> = c.iter().map(|&ci| ci >= p1 - tol).collect();
    let changes = accepts.windows(2).filter(|w| w[0] != w[1]).count();
    let first = accepts.iter().position(|&a| a).unwrap_or(points.len());
    if changes > 1 || (changes == 1 && !accepts[points.len() - 1]) {
        return Err(Error::MultipleCrossings { changes });
    }
    let n = points.len();
    let k = price_at(points, first);
    let crossing_gap = if first < n {
        let gap = (c[first] - p1).abs();
        if delta > 0.0 {
            gap / delta
        } else {
            gap
        }
    } else {
        f64::INFINITY
    };
    Ok(ThresholdResult {
        k,
        k_index: first,
        all_accept: first == 0,
        all_reject: first == n,
        crossing_gap,
    })
}

pub fn threshold_from_prices(
    p1: f64,
    p_accept: f64,
    p_reject: f64,
    delta: f64,
    prior: &TypeGrid,
    kernels: &KernelPair,
) -> Result<ThresholdResult> {
    crate::dist::check_same_points(
        prior.points(),
        kernels.prior().points(),
        "prior vs kernel from-grid",
    )?;
    let h = h_function(kernels, p_accept, p_reject);
    let c: Vec<f64> = prior
        .points()
        .iter()
        .zip(&h)
        .map(|(x, h)| x - delta * h)
        .collect();
    threshold_from_reservations(prior.points(), &c, p1, delta)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Benchmark {
    pub prices: Vec<f64>,
    pub revenues: Vec<f64>,
    pub total: f64,
}

/// Posting each period's monopoly price in advance.
pub fn static_posting_benchmark(marginals: &[&TypeGrid], delta: f64) -> Benchmark {
    let mut prices = Vec::with_capacity(marginals.len());
    let mut revenues = Vec::with_capacity(marginals.len());
    let mut total = 0.0;
    let mut disc = 1.0;
    for m in marginals {
        let r = monopoly_price(m);
        total += disc * r.revenue;
        disc *= delta;
        prices.push(r.price);
        revenues.push(r.revenue);
    }
    Benchmark {
        prices,
        revenues,
        total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{kernel_from_ar1, make_uniform, Ar1Spec, MarkovKernel};
    use proptest::prelude::*;

    fn ex1(n: usize) -> KernelPair {
        let u = make_uniform(1.0, 2.0, n).unwrap();
        KernelPair::baseline(MarkovKernel::independent(u.clone(), &u).unwrap())
    }

    #[test]
    fn monopoly_cases() {
        let r = monopoly_price(&make_uniform(1.0, 2.0, 401).unwrap());
        assert_eq!(r.price, 1.0);
        assert!((r.revenue - 1.0).abs() < 1e-12);
        let r = monopoly_price(&TypeGrid::point_mass(3.0));
        assert_eq!((r.price, r.revenue, r.unique), (3.0, 3.0, true));
        let r = monopoly_price(&make_uniform(0.0, 1.0, 401).unwrap());
        assert!((r.price - 0.5).abs() < 0.005 && (r.revenue - 0.25).abs() < 0.005);
        let b = TypeGrid::discrete(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(monopoly_prices(&b), vec![1.0, 2.0]);
        let r = monopoly_price(&b);
        assert_eq!((r.revenue, r.unique), (1.0, false));
    }

    #[test]
    fn negative_values_do_not_sell() {
        let g = TypeGrid::discrete(vec![-1.0, -0.5], vec![0.5, 0.5]).unwrap();
        let r = monopoly_price(&g);
        assert_eq!(r.revenue, 0.0);
        assert!(r.price > -0.5);
    }

    #[test]
    fn h_function_cases() {
        let k = ex1(401);
        assert!(h_function(&k, 1.5, 1.5).iter().all(|h| h.abs() < 1e-15));
        for h in h_function(&k, 1.0, 2.0) {
            assert!((h + 0.5).abs() < 1e-9);
        }
        let u = make_uniform(1.0, 2.0, 21).unwrap();
        let perfect = kernel_from_ar1(
            &Ar1Spec { alpha: 1.0, noise: TypeGrid::point_mass(0.0) },
            &u,
            21,
        )
        .unwrap();
        let pair = KernelPair::baseline(perfect);
        for (x, h) in u.points().iter().zip(h_function(&pair, 2.0, 1.0)) {
            let expect = (x - 1.0).max(0.0) - (x - 2.0).max(0.0);
            assert!((h - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn buyer_and_threshold_cases() {
        let k = ex1(401);
        let prior = k.prior().clone();
        assert!(buyer_accepts(1.2, 1.5, 1.0, 2.0, 1.0, &k).unwrap());
        assert!(buyer_accepts(1.0, 1.5, 1.0, 2.0, 1.0, &k).unwrap());
        assert!(!buyer_accepts(1.0, 3.0, 1.0, 2.0, 1.0, &k).unwrap());
        assert!(matches!(
            buyer_accepts(0.9, 1.5, 1.0, 2.0, 1.0, &k),
            Err(Error::NotOnGrid(_))
        ));

        let t = threshold_from_prices(1.5, 1.0, 2.0, 1.0, &prior, &k).unwrap();
        assert!(t.all_accept && t.k == 1.0);

        let t = threshold_from_prices(1.9, 1.0, 2.0, 1.0, &prior, &k).unwrap();
        assert!((t.k - 1.4).abs() <= prior.step() + 1e-12);
        // Brute-force scan of the buyer's decision.
        let first = prior
            .points()
            .iter()
            .position(|&x| buyer_accepts(x, 1.9, 1.0, 2.0, 1.0, &k).unwrap())
            .unwrap();
        assert_eq!(first, t.k_index);

        let t = threshold_from_prices(1.37, 1.6, 1.6, 1.0, &prior, &k).unwrap();
        assert!((t.k - 1.37).abs() <= prior.step());

        let t = threshold_from_prices(2.6, 1.0, 2.0, 1.0, &prior, &k).unwrap();
        assert!(t.all_reject);
    }

    #[test]
    fn benchmark_cases() {
        let u = make_uniform(1.0, 2.0, 401).unwrap();
        let b = static_posting_benchmark(&[&u, &u], 1.0);
        assert_eq!(b.prices, vec![1.0, 1.0]);
        assert!((b.total - 2.0).abs() < 1e-12);
        let b = static_posting_benchmark(&[&u, &u], 0.0);
        assert!((b.total - 1.0).abs() < 1e-12);
    }

    fn random_ar1(alpha: f64, sigma: f64, n: usize) -> KernelPair {
        let prior = make_uniform(1.0, 2.0, n).unwrap();
        let noise = TypeGrid::truncated_gaussian(0.0, sigma, -5.0 * sigma, 5.0 * sigma, 61).unwrap();
        KernelPair::baseline(kernel_from_ar1(&Ar1Spec { alpha, noise }, &prior, 81).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn h_slope_is_below_one_over_delta(
            alpha in 0.05f64..0.95, sigma in 0.1f64..0.5, delta in 0.5f64..1.0,
            pa in 0.0f64..3.0, pr in 0.0f64..3.0,
        ) {
            let k = random_ar1(alpha, sigma, 21);
            let x = k.prior().points().to_vec();
            let h = h_function(&k, pa, pr);
            for i in 0..x.len() {
                for j in i + 1..x.len() {
                    prop_assert!(h[j] - h[i] < (x[j] - x[i]) / delta);
                }
            }
        }

        #[test]
        fn threshold_matches_pointwise_decisions(
            alpha in 0.05f64..0.95, sigma in 0.1f64..0.5, p1 in 0.5f64..3.0,
            pa in 0.0f64..3.0, pr in 0.0f64..3.0,
        ) {
            let k = random_ar1(alpha, sigma, 21);
            let prior = k.prior().clone();
            let t = threshold_from_prices(p1, pa, pr, 1.0, &prior, &k).unwrap();
            for (i, &x) in prior.points().iter().enumerate() {
                let a = buyer_accepts(x, p1, pa, pr, 1.0, &k).unwrap();
                prop_assert_eq!(a, i >= t.k_index);
            }
        }

        #[test]
        fn monopoly_revenue_is_global_max(w in prop::collection::vec(0.0f64..1.0, 2..30)) {
            prop_assume!(w.iter().sum::<f64>() > 0.0);
            let pts: Vec<f64> = (0..w.len()).map(|i| 0.5 + 0.1 * i as f64).collect();
            let g = TypeGrid::discrete(pts.clone(), w).unwrap();
            let r = monopoly_price(&g);
            for &q in &pts {
                prop_assert!(q * g.mass_at_least(q) <= r.revenue + 1e-12);
            }
        }

        #[test]
        fn lr_dominance_raises_monopoly_price(
            w in prop::collection::vec(0.01f64..1.0, 12),
            tilt in 0.0f64..2.0,
        ) {
            let pts: Vec<f64> = (0..12).map(|i| 1.0 + 0.1 * i as f64).collect();
            let up: Vec<f64> = w.iter().zip(&pts).map(|(w, x)| w * (tilt * x).exp()).collect();
            let a = TypeGrid::discrete(pts.clone(), w).unwrap();
            let b = TypeGrid::discrete(pts, up).unwrap();
            prop_assert!(crate::assumptions::lr_dominates(b.weights(), a.weights(), false));
            prop_assert!(monopoly_price(&b).price >= monopoly_price(&a).price);
        }
    }
}
