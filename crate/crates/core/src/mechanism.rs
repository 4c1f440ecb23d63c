//! Virtual values and the constrained mechanism-design relaxation that
//! bounds seller revenue, plus the unconstrained commitment benchmark.

use rayon::prelude::*;
use serde::Serialize;

use crate::assumptions::{
    check_lipschitz, check_lipschitz_pair, check_mlrp, check_mlrp_pair, check_regularity,
    check_regularity_pair, check_complement, AssumptionReport,
};
use crate::dist::{approx_ge, check_same_points, KernelPair, MarkovKernel, TypeGrid};
use crate::error::{Error, Result};
use crate::model::{MultiPeriodGame, TwoPeriodGame};
use crate::pricing::{
    accept_tol, is_tie, partial_expectations_at_points, price_at, static_posting_benchmark,
    Benchmark,
};

/// Tolerance for declaring that the diagonal attains the relaxed optimum.
pub const COLLAPSE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize)]
pub struct VirtualValueTable {
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
    /// `(1 - F_1) / f_1` at each first-period point.
    pub hazard: Vec<f64>,
    pub phi: Vec<f64>,
    pub psi: Vec<Vec<f64>>,
    /// `None` where the conditional density vanishes.
    pub impulse: Vec<Vec<Option<f64>>>,
}

/// Conditional cdf and density of each kernel row at the to-grid points.
fn row_cdfs(kernel: &MarkovKernel) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let y = kernel.to_grid().points();
    let m = y.len();
    let density = kernel.to_grid().is_density();
    let mut cdfs = Vec::with_capacity(kernel.n_from());
    let mut dens = Vec::with_capacity(kernel.n_from());
    for row in kernel.rows() {
        let mut c = vec![0.0; m];
        let mut f = vec![0.0; m];
        if density && m > 1 {
            for j in 1..m {
                c[j] = c[j - 1] + 0.5 * (row[j - 1] + row[j]) * (y[j] - y[j - 1]);
            }
            let z = c[m - 1];
            if z > 0.0 {
                c.iter_mut().for_each(|v| *v /= z);
                for j in 0..m {
                    f[j] = row[j] / z;
                }
            }
        } else {
            let mut acc = 0.0;
            for j in 0..m {
                acc += row[j];
                c[j] = acc;
                let width = if m == 1 {
                    1.0
                } else if j == 0 {
                    y[1] - y[0]
                } else if j == m - 1 {
                    y[m - 1] - y[m - 2]
                } else {
                    0.5 * (y[j + 1] - y[j - 1])
                };
                f[j] = row[j] / width;
            }
        }
        cdfs.push(c);
        dens.push(f);
    }
    (cdfs, dens)
}

/// `-(dF_2/dtheta_1) / f_2` by central differences across from-points.
pub fn impulse_response(kernel: &MarkovKernel) -> Vec<Vec<Option<f64>>> {
    let x = kernel.from_grid().points();
    let n = x.len();
    let m = kernel.n_to();
    if n < 2 {
        return vec![vec![None; m]; n];
    }
    let (cdfs, dens) = row_cdfs(kernel);
    (0..n)
        .map(|i| {
            let (lo, hi) = if i == 0 {
                (0, 1)
            } else if i == n - 1 {
                (n - 2, n - 1)
            } else {
                (i - 1, i + 1)
            };
            let fmax = dens[i].iter().copied().fold(0.0, f64::max);
            (0..m)
                .map(|j| {
                    let f = dens[i][j];
                    if f <= 1e-12 * fmax || f <= 0.0 {
                        return None;
                    }
                    let dfdx = (cdfs[hi][j] - cdfs[lo][j]) / (x[hi] - x[lo]);
                    Some(-dfdx / f)
                })
                .collect()
        })
        .collect()
}

/// First- and second-period virtual values. A kernel with a known constant
/// impulse response (AR(1) slope) uses it directly; otherwise finite
/// differences are used.
pub fn virtual_values(prior: &TypeGrid, kernel: &MarkovKernel) -> Result<VirtualValueTable> {
    check_same_points(prior.points(), kernel.from_grid().points(), "prior vs kernel")?;
    let hazard = prior.inverse_hazard()?;
    let theta1 = prior.points().to_vec();
    let theta2 = kernel.to_grid().points().to_vec();
    let phi = theta1.iter().zip(&hazard).map(|(x, h)| x - h).collect();
    let impulse = match kernel.slope() {
        Some(a) => vec![vec![Some(a); theta2.len()]; theta1.len()],
        None => impulse_response(kernel),
    };
    let psi = impulse
        .iter()
        .zip(&hazard)
        .map(|(row, h)| {
            row.iter()
                .zip(&theta2)
                .map(|(imp, y)| y - h * imp.unwrap_or(0.0))
                .collect()
        })
        .collect();
    Ok(VirtualValueTable {
        theta1,
        theta2,
        hazard,
        phi,
        psi,
        impulse,
    })
}

/// Smallest second-period type with nonnegative virtual value, per
/// first-period point; must be nonincreasing.
pub fn boundary_curve(table: &VirtualValueTable) -> Result<Vec<f64>> {
    let y = &table.theta2;
    let d: Vec<f64> = table
        .psi
        .iter()
        .map(|row| match row.iter().position(|&v| v >= 0.0) {
            Some(j) => y[j],
            None => y[y.len() - 1],
        })
        .collect();
    for i in 1..d.len() {
        if d[i] > d[i - 1] {
            return Err(Error::NonMonotoneBoundary(table.theta1[i]));
        }
    }
    Ok(d)
}

/// Boundary that applies to rejectors (`theta_1 < k`) and acceptors.
pub fn effective_boundary(d0: &[f64], d1: &[f64], k_index: usize) -> Vec<f64> {
    (0..d0.len())
        .map(|i| if i < k_index { d0[i] } else { d1[i] })
        .collect()
}

/// Suffix/prefix tables over the first-period grid for one second-period
/// kernel, so that any `(k, p_A, p_R)` evaluates in O(1).
struct PeriodTables {
    /// `accept[k][a] = sum_{i >= k} w_i sum_{j >= a} r1_ij psi1_ij`
    accept: Vec<Vec<f64>>,
    /// `reject[k][r] = sum_{i < k} w_i sum_{j >= r} r0_ij psi0_ij`
    reject: Vec<Vec<f64>>,
    /// `E[(theta_2 - y_r)_+ | lowest type, reject]`
    low_rent: Vec<f64>,
    prices: Vec<f64>,
    /// Weight on this period's terms.
    discount: f64,
}

fn weighted_suffix(kernel: &MarkovKernel, psi: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = kernel.n_to();
    kernel
        .rows()
        .iter()
        .zip(psi)
        .map(|(row, p)| {
            let mut s = vec![0.0; m + 1];
            for j in (0..m).rev() {
                s[j] = s[j + 1] + row[j] * p[j];
            }
            s
        })
        .collect()
}

impl PeriodTables {
    fn new(
        prior: &TypeGrid,
        accept_kernel: &MarkovKernel,
        psi1: &[Vec<f64>],
        reject_kernel: &MarkovKernel,
        psi0: &[Vec<f64>],
        discount: f64,
    ) -> Self {
        let w = prior.weights();
        let n = w.len();
        let m = reject_kernel.n_to();
        let s1 = weighted_suffix(accept_kernel, psi1);
        let s0 = weighted_suffix(reject_kernel, psi0);
        let mut accept = vec![vec![0.0; m + 1]; n + 1];
        for i in (0..n).rev() {
            for a in 0..=m {
                accept[i][a] = accept[i + 1][a] + w[i] * s1[i][a];
            }
        }
        let mut reject = vec![vec![0.0; m + 1]; n + 1];
        for i in 0..n {
            for r in 0..=m {
                reject[i + 1][r] = reject[i][r] + w[i] * s0[i][r];
            }
        }
        let low = prior.support_min_index();
        let low_rent =
            partial_expectations_at_points(reject_kernel.to_grid().points(), reject_kernel.row(low));
        let prices = reject_kernel.to_grid().points().to_vec();
        Self {
            accept,
            reject,
            low_rent,
            prices,
            discount,
        }
    }

    fn m(&self) -> usize {
        self.prices.len()
    }

    #[inline]
    fn value(&self, k: usize, a: usize, r: usize) -> f64 {
        self.discount * (self.accept[k][a] + self.reject[k][r] - self.low_rent[r])
    }

    /// Best `(value, a, r)` with `a >= r`, and the best diagonal `(value, p)`,
    /// lowest indices on ties.
    fn best_at(&self, k: usize) -> ((f64, usize, usize), (f64, usize)) {
        let m = self.m();
        // Suffix argmax of accept[k][a] over a >= r, lowest index on ties.
        let mut best_a = vec![(f64::NEG_INFINITY, m); m + 1];
        let mut cur = (f64::NEG_INFINITY, m);
        for a in (0..=m).rev() {
            let v = self.accept[k][a];
            if v > cur.0 || is_tie(v, cur.0) {
                cur = (v.max(cur.0), a);
            }
            best_a[a] = cur;
        }
        let mut best = (f64::NEG_INFINITY, m, m);
        let mut diag = (f64::NEG_INFINITY, m);
        for r in 0..=m {
            let base = self.reject[k][r] - self.low_rent[r];
            let v = self.discount * (best_a[r].0 + base);
            if v > best.0 && !is_tie(v, best.0) {
                best = (v, best_a[r].1, r);
            }
            let dv = self.value(k, r, r);
            if dv > diag.0 && !is_tie(dv, diag.0) {
                diag = (dv, r);
            }
        }
        (best, diag)
    }

    /// Best strictly off-diagonal value (`a > r`) at `k`.
    fn best_off_diagonal(&self, k: usize) -> f64 {
        let m = self.m();
        let mut suffix = f64::NEG_INFINITY;
        let mut best = f64::NEG_INFINITY;
        for r in (0..m).rev() {
            suffix = suffix.max(self.accept[k][r + 1]);
            let v = self.discount * (suffix + self.reject[k][r] - self.low_rent[r]);
            best = best.max(v);
        }
        best
    }
}

/// Relaxed problem on a fixed instance: first-period virtual surplus plus one
/// table per later period.
pub struct Relaxation {
    theta1: Vec<f64>,
    /// `phi_sum[k] = sum_{i >= k} w_i phi_i`
    phi_sum: Vec<f64>,
    periods: Vec<PeriodTables>,
    boundaries: Option<(Vec<f64>, Vec<f64>)>,
    reports: Vec<AssumptionReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RelaxedSolution {
    pub k: f64,
    pub k_index: usize,
    /// Per later period.
    pub p_accept: Vec<f64>,
    pub p_reject: Vec<f64>,
    pub value: f64,
    /// Best value with `p_A = p_R` in every period.
    pub diagonal_value: f64,
    pub collapse: bool,
    pub boundary_curve: Option<Vec<f64>>,
    pub certified: bool,
    pub warnings: Vec<String>,
    pub assumptions: Vec<AssumptionReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClaimCertificate {
    pub k: f64,
    pub k_index: usize,
    pub p2: f64,
    pub diagonal_value: f64,
    pub off_diagonal_value: f64,
    pub gap: f64,
}

impl Relaxation {
    pub fn two_period(game: &TwoPeriodGame) -> Result<Self> {
        let prior = game.prior();
        let pair = &game.kernels;
        let t0 = virtual_values(prior, &pair.reject)?;
        let t1 = if pair.is_baseline() {
            t0.clone()
        } else {
            virtual_values(prior, &pair.accept)?
        };
        let tables = PeriodTables::new(prior, &pair.accept, &t1.psi, &pair.reject, &t0.psi, game.delta);
        let boundaries = match (boundary_curve(&t0), boundary_curve(&t1)) {
            (Ok(d0), Ok(d1)) => Some((d0, d1)),
            _ => None,
        };
        let reports = if pair.is_baseline() {
            vec![
                check_mlrp(&pair.reject, true),
                check_lipschitz(&pair.reject, game.delta),
                check_regularity(prior, &pair.reject)?,
            ]
        } else {
            vec![
                check_mlrp_pair(pair, true),
                check_lipschitz_pair(pair, game.delta),
                check_regularity_pair(prior, pair)?,
                check_complement(&pair.reject, &pair.accept)?,
            ]
        };
        Ok(Self::assemble(prior, &t0.phi, vec![tables], boundaries, reports))
    }

    /// Per-period separable relaxation; needs constant impulse responses.
    pub fn multi_period(game: &MultiPeriodGame) -> Result<Self> {
        let prior = &game.prior;
        let hazard = prior.inverse_hazard()?;
        let phi: Vec<f64> = prior.points().iter().zip(&hazard).map(|(x, h)| x - h).collect();
        let mut composed: Option<MarkovKernel> = None;
        let mut periods = Vec::new();
        let mut disc = 1.0;
        for step in &game.transitions {
            let k = match &composed {
                None => step.clone(),
                Some(c) => c.compose(step)?,
            };
            let coeff = k.slope().ok_or_else(|| {
                Error::Unsupported("multi-period relaxation needs AR(1) transitions".into())
            })?;
            disc *= game.delta;
            let psi: Vec<Vec<f64>> = hazard
                .iter()
                .map(|h| k.to_grid().points().iter().map(|y| y - h * coeff).collect())
                .collect();
            periods.push(PeriodTables::new(prior, &k, &psi, &k, &psi, disc));
            composed = Some(k);
        }
        Ok(Self::assemble(prior, &phi, periods, None, Vec::new()))
    }

    fn assemble(
        prior: &TypeGrid,
        phi: &[f64],
        periods: Vec<PeriodTables>,
        boundaries: Option<(Vec<f64>, Vec<f64>)>,
        reports: Vec<AssumptionReport>,
    ) -> Self {
        let w = prior.weights();
        let n = w.len();
        let mut phi_sum = vec![0.0; n + 1];
        for i in (0..n).rev() {
            phi_sum[i] = phi_sum[i + 1] + w[i] * phi[i];
        }
        Self {
            theta1: prior.points().to_vec(),
            phi_sum,
            periods,
            boundaries,
            reports,
        }
    }

    fn price_index(&self, t: usize, p: f64) -> usize {
        self.periods[t]
            .prices
            .partition_point(|&y| !approx_ge(y, p))
    }

    /// Objective at `(k, p_A, p_R)` (same second-period prices in every later
    /// period for multi-period instances).
    pub fn value(&self, k: f64, p_accept: f64, p_reject: f64) -> Result<f64> {
        if p_accept < p_reject {
            return Err(Error::ConstraintViolated { p_accept, p_reject });
        }
        let ki = self.theta1.partition_point(|&x| !approx_ge(x, k));
        let mut v = self.phi_sum[ki];
        for (t, p) in self.periods.iter().enumerate() {
            v += p.value(ki, self.price_index(t, p_accept), self.price_index(t, p_reject));
        }
        Ok(v)
    }

    pub fn assumptions(&self) -> &[AssumptionReport] {
        &self.reports
    }

    pub fn solve(&self) -> RelaxedSolution {
        let n = self.theta1.len();
        let per_k: Vec<_> = (0..=n)
            .into_par_iter()
            .map(|k| {
                let mut best = self.phi_sum[k];
                let mut diag = self.phi_sum[k];
                let mut choice = Vec::with_capacity(self.periods.len());
                let mut diag_choice = Vec::with_capacity(self.periods.len());
                for p in &self.periods {
                    let (b, d) = p.best_at(k);
                    best += b.0;
                    diag += d.0;
                    choice.push((b.1, b.2));
                    diag_choice.push(d.1);
                }
                (best, choice, diag, diag_choice)
            })
            .collect();
        let pick = |vals: &mut dyn Iterator<Item = f64>| {
            let mut best = (f64::NEG_INFINITY, 0);
            for (k, v) in vals.enumerate() {
                if v > best.0 && !is_tie(v, best.0) {
                    best = (v, k);
                }
            }
            best
        };
        let (best_v, best_k) = pick(&mut per_k.iter().map(|r| r.0));
        let (diag_v, diag_k) = pick(&mut per_k.iter().map(|r| r.2));
        let collapse = diag_v >= best_v - COLLAPSE_TOL * best_v.abs().max(1.0);
        let (k_index, p_accept, p_reject, value) = if collapse {
            let ps: Vec<f64> = per_k[diag_k]
                .3
                .iter()
                .zip(&self.periods)
                .map(|(&j, t)| price_at(&t.prices, j))
                .collect();
            (diag_k, ps.clone(), ps, diag_v)
        } else {
            let (pa, pr) = per_k[best_k]
                .1
                .iter()
                .zip(&self.periods)
                .map(|(&(a, r), t)| (price_at(&t.prices, a), price_at(&t.prices, r)))
                .unzip();
            (best_k, pa, pr, best_v)
        };
        let mut warnings = Vec::new();
        for r in &self.reports {
            if !r.holds {
                warnings.push(format!(
                    "{} fails ({} violations); the revenue bound is not certified",
                    serde_json::to_value(r.name).unwrap().as_str().unwrap_or("assumption"),
                    r.violations
                ));
            }
        }
        let boundary_curve = match &self.boundaries {
            Some((d0, d1)) => Some(effective_boundary(d0, d1, k_index)),
            None if self.periods.len() == 1 => {
                warnings.push("boundary curve is not monotone".into());
                None
            }
            None => None,
        };
        RelaxedSolution {
            k: price_at(&self.theta1, k_index),
            k_index,
            p_accept,
            p_reject,
            value: best_v.max(value),
            diagonal_value: diag_v,
            collapse,
            boundary_curve,
            certified: self.reports.iter().all(|r| r.holds),
            warnings,
            assumptions: self.reports.clone(),
        }
    }

    /// Best diagonal and best strictly off-diagonal subproblem values at a
    /// fixed cutoff.
    pub fn claim1_certify(&self, k: f64) -> ClaimCertificate {
        let ki = self.theta1.partition_point(|&x| !approx_ge(x, k));
        let (mut diag, mut off, mut p2) = (0.0, 0.0, f64::NAN);
        for (t, p) in self.periods.iter().enumerate() {
            let (_, d) = p.best_at(ki);
            diag += d.0;
            off += p.best_off_diagonal(ki);
            if t == 0 {
                p2 = price_at(&p.prices, d.1);
            }
        }
        ClaimCertificate {
            k: price_at(&self.theta1, ki),
            k_index: ki,
            p2,
            diagonal_value: diag,
            off_diagonal_value: off,
            gap: off - diag,
        }
    }
}

pub fn relaxed_value(game: &TwoPeriodGame, k: f64, p_accept: f64, p_reject: f64) -> Result<f64> {
    Relaxation::two_period(game)?.value(k, p_accept, p_reject)
}

pub fn solve_relaxed(game: &TwoPeriodGame) -> Result<RelaxedSolution> {
    Ok(Relaxation::two_period(game)?.solve())
}

pub fn claim1_certify(game: &TwoPeriodGame, k: f64) -> Result<ClaimCertificate> {
    Ok(Relaxation::two_period(game)?.claim1_certify(k))
}

/// Second-period data per first-period type for commitment evaluation.
struct CommitTables {
    /// `pe[i][j] = E[(theta_2 - y_j)_+ | i]`, rejection and acceptance.
    pe0: Vec<Vec<f64>>,
    pe1: Vec<Vec<f64>>,
    /// `rev[i][j] = y_j P(theta_2 >= y_j | i)`.
    rev0: Vec<Vec<f64>>,
    rev1: Vec<Vec<f64>>,
    prices: Vec<f64>,
}

fn revenue_rows(kernel: &MarkovKernel) -> Vec<Vec<f64>> {
    let y = kernel.to_grid().points();
    let m = y.len();
    kernel
        .rows()
        .iter()
        .map(|row| {
            let mut out = vec![0.0; m + 1];
            let mut s = 0.0;
            for j in (0..m).rev() {
                s += row[j];
                out[j] = y[j] * s;
            }
            out
        })
        .collect()
}

impl CommitTables {
    fn new(pair: &KernelPair) -> Self {
        let y = pair.to_points();
        let pe = |k: &MarkovKernel| {
            k.rows()
                .iter()
                .map(|r| partial_expectations_at_points(y, r))
                .collect::<Vec<_>>()
        };
        Self {
            pe0: pe(&pair.reject),
            pe1: pe(&pair.accept),
            rev0: revenue_rows(&pair.reject),
            rev1: revenue_rows(&pair.accept),
            prices: y.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CommitmentResult {
    pub p1: f64,
    pub p_accept: f64,
    pub p_reject: f64,
    pub revenue: f64,
    pub k: f64,
}

/// Best `p_1` for fixed second-period price indices `(a, r)`.
fn best_p1(
    game: &TwoPeriodGame,
    t: &CommitTables,
    a: usize,
    r: usize,
) -> (f64, f64, f64) {
    let prior = game.prior();
    let x = prior.points();
    let w = prior.weights();
    let d = game.delta;
    let n = x.len();
    let c: Vec<f64> = (0..n).map(|i| x[i] - d * (t.pe0[i][r] - t.pe1[i][a])).collect();
    let acc: Vec<f64> = (0..n).map(|i| w[i] * d * t.rev1[i][a]).collect();
    let rej: Vec<f64> = (0..n).map(|i| w[i] * d * t.rev0[i][r]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    if c.windows(2).any(|p| p[1] < p[0]) {
        order.sort_by(|&i, &j| c[i].total_cmp(&c[j]).then(i.cmp(&j)));
    }
    // Accepting set at p1 = c[order[q]] is every type with c >= that value.
    let total_rej: f64 = rej.iter().sum();
    let mut best = (total_rej, c[order[n - 1]] + 1.0, f64::INFINITY);
    let (mut mass, mut a_sum, mut r_sum) = (0.0, 0.0, total_rej);
    let mut q = n;
    while q > 0 {
        let p1 = c[order[q - 1]];
        while q > 0 && c[order[q - 1]] >= p1 - accept_tol(p1) {
            let i = order[q - 1];
            mass += w[i];
            a_sum += acc[i];
            r_sum -= rej[i];
            q -= 1;
        }
        let v = p1 * mass + a_sum + r_sum;
        if v > best.0 && !is_tie(v, best.0) || (is_tie(v, best.0) && p1 < best.1) {
            best = (v, p1, p1);
        }
    }
    let k = (0..n)
        .filter(|&i| c[i] >= best.1 - accept_tol(best.1))
        .map(|i| x[i])
        .fold(f64::INFINITY, f64::min);
    (best.0, best.1, k)
}

/// Seller-optimal `(p_1, p_A, p_R)` without any ordering constraint on the
/// second-period prices; `posted` restricts to `p_A = p_R`.
fn commitment_search(game: &TwoPeriodGame, posted: bool) -> CommitmentResult {
    let t = CommitTables::new(&game.kernels);
    let m = t.prices.len();
    let pairs: Vec<(usize, usize)> = if posted {
        (0..m).map(|j| (j, j)).collect()
    } else {
        (0..m).flat_map(|a| (0..m).map(move |r| (a, r))).collect()
    };
    let results: Vec<(f64, f64, f64, usize, usize)> = pairs
        .par_iter()
        .map(|&(a, r)| {
            let (v, p1, k) = best_p1(game, &t, a, r);
            (v, p1, k, a, r)
        })
        .collect();
    let mut best = results[0];
    for &cand in &results[1..] {
        let better = if is_tie(cand.0, best.0) {
            let da = (t.prices[cand.3] - t.prices[cand.4]).abs();
            let db = (t.prices[best.3] - t.prices[best.4]).abs();
            if da != db {
                da < db
            } else {
                (cand.1, t.prices[cand.3], t.prices[cand.4])
                    < (best.1, t.prices[best.3], t.prices[best.4])
            }
        } else {
            cand.0 > best.0
        };
        if better {
            best = cand;
        }
    }
    CommitmentResult {
        p1: best.1,
        p_accept: t.prices[best.3],
        p_reject: t.prices[best.4],
        revenue: best.0,
        k: best.2,
    }
}

pub fn commitment_optimum(game: &TwoPeriodGame) -> CommitmentResult {
    commitment_search(game, false)
}

/// Best revenue from posting `p_1` and a single `p_2` in advance.
pub fn posted_price_optimum(game: &TwoPeriodGame) -> CommitmentResult {
    commitment_search(game, true)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CommitmentEvaluation {
    pub revenue: f64,
    pub accepts: Vec<bool>,
    pub buys_after_accept: Vec<f64>,
}

/// Seller revenue from committing to `(p1, p_A, p_R)`, with the buyer
/// accepting whenever `theta_1 - p_1 >= delta * h(theta_1)`.
pub fn evaluate_commitment(
    game: &TwoPeriodGame,
    p1: f64,
    p_accept: f64,
    p_reject: f64,
) -> CommitmentEvaluation {
    let prior = game.prior();
    let pair = &game.kernels;
    let y = pair.to_points();
    let h = crate::pricing::h_function(pair, p_accept, p_reject);
    let d = game.delta;
    let surv = |row: &[f64], p: f64| -> f64 {
        row.iter()
            .zip(y)
            .filter(|(_, &v)| approx_ge(v, p))
            .map(|(w, _)| w)
            .sum()
    };
    let mut revenue = 0.0;
    let mut accepts = Vec::with_capacity(prior.len());
    let mut buys = Vec::with_capacity(prior.len());
    for (i, (&x, &w)) in prior.points().iter().zip(prior.weights()).enumerate() {
        let a = x - d * h[i] >= p1 - accept_tol(p1);
        accepts.push(a);
        if a {
            let s = surv(pair.accept.row(i), p_accept);
            buys.push(s);
            revenue += w * (p1 + d * p_accept * s);
        } else {
            buys.push(0.0);
            revenue += w * d * p_reject * surv(pair.reject.row(i), p_reject);
        }
    }
    CommitmentEvaluation {
        revenue,
        accepts,
        buys_after_accept: buys,
    }
}

/// Revenue bound for a two-period game: per-period monopoly revenues in the
/// baseline model, the best posted price pair when the kernels differ.
pub fn benchmark_two_period(game: &TwoPeriodGame) -> Benchmark {
    if game.kernels.is_baseline() {
        static_posting_benchmark(&[game.prior(), game.kernels.reject.marginal()], game.delta)
    } else {
        let r = posted_price_optimum(game);
        Benchmark {
            prices: vec![r.p1, r.p_accept],
            revenues: vec![],
            total: r.revenue,
        }
    }
}

pub fn benchmark_multi_period(game: &MultiPeriodGame) -> Benchmark {
    let marginals: Vec<&TypeGrid> = (0..game.horizon()).map(|t| game.marginal(t)).collect();
    static_posting_benchmark(&marginals, game.delta)
}

/// Buyer's interim payoff under posted prices `(p1, p2)`.
pub fn posted_buyer_value(game: &TwoPeriodGame, p1: f64, p2: f64) -> Vec<f64> {
    let y = game.theta2();
    let k = &game.kernels.reject;
    game.prior()
        .points()
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - p1).max(0.0) + game.delta * crate::pricing::partial_expectation_of(y, k.row(i), p2))
        .collect()
}

/// Envelope derivative `1{theta_1 >= p1} + delta E[I 1{theta_2 >= p2} | theta_1]`.
pub fn posted_value_derivative(
    game: &TwoPeriodGame,
    impulse: &[Vec<Option<f64>>],
    p1: f64,
    p2: f64,
) -> Vec<f64> {
    let y = game.theta2();
    let k = &game.kernels.reject;
    // On a density grid the node at p2 stands for a cell straddling the
    // price, so only half of it lies above.
    let at_price = if k.to_grid().is_density() { 0.5 } else { 1.0 };
    game.prior()
        .points()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let first = if approx_ge(x, p1) { 1.0 } else { 0.0 };
            let second: f64 = k
                .row(i)
                .iter()
                .zip(y)
                .zip(&impulse[i])
                .filter(|((_, &v), _)| approx_ge(v, p2))
                .map(|((w, &v), imp)| {
                    let share = if approx_ge(p2, v) { at_price } else { 1.0 };
                    share * w * imp.unwrap_or(0.0)
                })
                .sum();
            first + game.delta * second
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{kernel_from_ar1, make_uniform, Ar1Spec};

    fn ex1(n: usize) -> TwoPeriodGame {
        let u = make_uniform(1.0, 2.0, n).unwrap();
        TwoPeriodGame::baseline(MarkovKernel::independent(u.clone(), &u).unwrap(), 1.0, n).unwrap()
    }

    fn gauss(sigma: f64, n: usize) -> TypeGrid {
        TypeGrid::truncated_gaussian(0.0, sigma, -5.0 * sigma, 5.0 * sigma, n).unwrap()
    }

    #[test]
    fn impulse_of_ar1_and_independent() {
        let prior = make_uniform(1.0, 2.0, 41).unwrap();
        let k = kernel_from_ar1(&Ar1Spec { alpha: 0.5, noise: gauss(0.3, 201) }, &prior, 201).unwrap();
        let imp = impulse_response(&k);
        let i = 20;
        let row = k.row(i);
        let peak = row.iter().copied().fold(0.0, f64::max);
        for (j, v) in imp[i].iter().enumerate() {
            if row[j] > 0.1 * peak {
                let v = v.unwrap();
                assert!((v - 0.5).abs() < 0.02, "{j}: {v}");
            }
        }
        let indep = MarkovKernel::independent(prior, &make_uniform(0.0, 1.0, 11).unwrap()).unwrap();
        for row in impulse_response(&indep) {
            for v in row {
                assert!(v.unwrap().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn virtual_values_uniform_prior() {
        let g = ex1(41);
        let t = virtual_values(g.prior(), &g.kernels.reject).unwrap();
        for (x, phi) in t.theta1.iter().zip(&t.phi) {
            assert!((phi - (2.0 * x - 2.0)).abs() < 1e-12);
        }
        let prior = make_uniform(1.0, 2.0, 21).unwrap();
        let k = kernel_from_ar1(&Ar1Spec { alpha: 0.7, noise: gauss(0.2, 41) }, &prior, 41).unwrap();
        let t = virtual_values(&prior, &k).unwrap();
        for i in 0..t.theta1.len() {
            for j in 0..t.theta2.len() {
                let expect = t.theta2[j] - 0.7 * (2.0 - t.theta1[i]);
                assert!((t.psi[i][j] - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn boundary_curve_cases() {
        let g = ex1(21);
        let t = virtual_values(g.prior(), &g.kernels.reject).unwrap();
        assert!(boundary_curve(&t).unwrap().iter().all(|&d| d == 1.0));

        let prior = make_uniform(1.0, 2.0, 21).unwrap();
        let noise = make_uniform(-1.0, 0.0, 101).unwrap();
        let k = kernel_from_ar1(&Ar1Spec { alpha: 0.5, noise }, &prior, 301).unwrap();
        let t = virtual_values(&prior, &k).unwrap();
        let d = boundary_curve(&t).unwrap();
        let step = k.to_grid().step();
        for (x, dv) in prior.points().iter().zip(&d) {
            let exact = 0.5 * (2.0 - x);
            assert!(*dv >= exact - 1e-12 && *dv < exact + step + 1e-12, "{x}: {dv}");
        }
    }

    #[test]
    fn relaxed_value_example_one() {
        let g = ex1(401);
        let v = relaxed_value(&g, 1.0, 1.0, 1.0).unwrap();
        // E[2t - 2] + E[t] - E[(t - 1)_+] by direct summation.
        let u = g.prior();
        let direct = u.expect(|x| 2.0 * x - 2.0) + u.mean() - u.partial_expectation(1.0);
        assert!((v - direct).abs() < 1e-12);
        assert!((v - 2.0).abs() < 1e-9);
        let none = Relaxation::two_period(&g).unwrap();
        assert!(none.value(2.0, 1.0, 2.0).is_err());
        let y = g.theta2();
        let idle = none.value(3.0, y[y.len() - 1] + 1.0, y[y.len() - 1] + 1.0).unwrap();
        assert_eq!(idle, 0.0);
    }

    #[test]
    fn solve_relaxed_example_one() {
        let g = ex1(101);
        let s = solve_relaxed(&g).unwrap();
        assert!((s.value - 2.0).abs() < 1e-9);
        assert!(s.collapse);
        assert_eq!(s.p_accept, s.p_reject);
        // Independent kernel fails strict MLRP, so the bound is flagged.
        assert!(!s.certified);
        let c = claim1_certify(&g, 1.0).unwrap();
        assert!(c.gap <= 1e-9);
        assert_eq!(c.p2, 1.0);
    }

    #[test]
    fn relaxed_with_zero_discount() {
        let mut g = ex1(101);
        g.delta = 0.0;
        let s = solve_relaxed(&g).unwrap();
        let mono = crate::pricing::monopoly_price(g.prior());
        assert_eq!(s.k, mono.price);
        assert!((s.value - mono.revenue).abs() < 1e-12);
    }

    #[test]
    fn commitment_example_one() {
        let g = ex1(401);
        let e = evaluate_commitment(&g, 1.5, 1.0, 2.0);
        assert!((e.revenue - 2.5).abs() < 1e-9);
        assert!(e.accepts.iter().all(|&a| a));
        let best = commitment_optimum(&ex1(41));
        assert!(best.revenue >= 2.5 - 1e-9);
        assert!(best.p_accept < best.p_reject);
    }

    #[test]
    fn perfect_correlation_commitment_is_static() {
        let u = make_uniform(1.0, 2.0, 41).unwrap();
        let k = kernel_from_ar1(&Ar1Spec { alpha: 1.0, noise: TypeGrid::point_mass(0.0) }, &u, 41)
            .unwrap();
        let g = TwoPeriodGame::baseline(k, 1.0, 41).unwrap();
        let c = commitment_optimum(&g);
        assert_eq!(c.p_accept, c.p_reject);
        assert_eq!(c.p_accept, 1.0);
        assert!((c.revenue - 2.0).abs() < 1e-9);
        let s = solve_relaxed(&g).unwrap();
        assert_eq!(s.p_accept, vec![1.0]);
    }

    #[test]
    fn posted_optimum_matches_benchmark_in_baseline() {
        let g = ex1(41);
        let p = posted_price_optimum(&g);
        let b = benchmark_two_period(&g);
        assert!((p.revenue - b.total).abs() < 1e-9);
    }
}
