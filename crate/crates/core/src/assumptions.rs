//! Checks of the distributional assumptions on a discretized instance.

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::dist::{check_same_points, KernelPair, MarkovKernel, TypeGrid};
use crate::error::{Error, Result};
use crate::mechanism::{virtual_values, VirtualValueTable};

/// Relative slack required for strict inequalities.
pub const STRICT_TOL: f64 = 1e-10;

const MAX_WITNESSES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum AssumptionName {
    #[serde(rename = "A1-MLRP")]
    Mlrp,
    #[serde(rename = "A2-Lipschitz")]
    Lipschitz,
    #[serde(rename = "A3-Regularity")]
    Regularity,
    #[serde(rename = "A1'-MLRPx")]
    MlrpX,
    #[serde(rename = "A2'-Lipschitzx")]
    LipschitzX,
    #[serde(rename = "A3'-Regularityx")]
    RegularityX,
    #[serde(rename = "A5-Complement")]
    Complement,
    #[serde(rename = "A4-LogConcaveAR1")]
    LogConcaveAr1,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub index: Vec<usize>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub name: AssumptionName,
    pub holds: bool,
    #[serde(serialize_with = "finite_or_null")]
    pub margin: f64,
    /// First few violations; `violations` counts all of them.
    pub witnesses: Vec<Witness>,
    pub violations: usize,
}

fn finite_or_null<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

#[derive(Default)]
struct Collector {
    margin: f64,
    witnesses: Vec<Witness>,
    violations: usize,
}

impl Collector {
    fn new() -> Self {
        Self {
            margin: f64::INFINITY,
            ..Default::default()
        }
    }

    fn slack(&mut self, s: f64) {
        self.margin = self.margin.min(s);
    }

    fn violate(&mut self, index: Vec<usize>, value: f64) {
        self.violations += 1;
        if self.witnesses.len() < MAX_WITNESSES {
            self.witnesses.push(Witness { index, value });
        }
    }

    fn merge(mut self, other: Collector) -> Self {
        self.margin = self.margin.min(other.margin);
        self.violations += other.violations;
        for w in other.witnesses {
            if self.witnesses.len() < MAX_WITNESSES {
                self.witnesses.push(w);
            }
        }
        self
    }

    fn report(self, name: AssumptionName) -> AssumptionReport {
        AssumptionReport {
            name,
            holds: self.violations == 0,
            margin: self.margin,
            witnesses: self.witnesses,
            violations: self.violations,
        }
    }
}

impl AssumptionReport {
    fn combine(name: AssumptionName, parts: &[AssumptionReport]) -> Self {
        let mut c = Collector::new();
        for p in parts {
            c = c.merge(Collector {
                margin: p.margin,
                witnesses: p.witnesses.clone(),
                violations: p.violations,
            });
        }
        c.report(name)
    }
}

/// Cross-product comparison of `upper[j'] * lower[j]` against
/// `upper[j] * lower[j']` for `j < j'`. Returns the relative slack, or `None`
/// when both products vanish.
#[inline]
fn cross_slack(a: f64, b: f64) -> Option<f64> {
    let scale = a.max(b);
    (scale > 0.0).then(|| (a - b) / scale)
}

fn mlrp_collect(kernel: &MarkovKernel, strict: bool) -> Collector {
    let rows = kernel.rows();
    let n = rows.len();
    let m = kernel.n_to();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut c = Collector::new();
            let lo = &rows[i];
            for ip in i + 1..n {
                let hi = &rows[ip];
                for j in 0..m.saturating_sub(1) {
                    let a = hi[j + 1] * lo[j];
                    let b = hi[j] * lo[j + 1];
                    let Some(s) = cross_slack(a, b) else { continue };
                    let all_positive = hi[j + 1] > 0.0 && lo[j] > 0.0 && hi[j] > 0.0 && lo[j + 1] > 0.0;
                    if strict && all_positive {
                        c.slack(s);
                        if s <= STRICT_TOL {
                            c.violate(vec![i, ip, j], a - b);
                        }
                    } else {
                        if all_positive {
                            c.slack(s);
                        }
                        if s < -STRICT_TOL {
                            c.violate(vec![i, ip, j], a - b);
                        }
                    }
                }
            }
            c
        })
        .reduce(Collector::new, Collector::merge)
}

/// Likelihood-ratio monotonicity of the kernel rows in the from-point.
pub fn check_mlrp(kernel: &MarkovKernel, strict: bool) -> AssumptionReport {
    mlrp_collect(kernel, strict).report(AssumptionName::Mlrp)
}

/// `upper` likelihood-ratio dominates `lower` (weights on a common grid).
pub fn lr_dominates(upper: &[f64], lower: &[f64], strict: bool) -> bool {
    let m = upper.len().min(lower.len());
    for j in 0..m {
        for jp in j + 1..m {
            let a = upper[jp] * lower[j];
            let b = upper[j] * lower[jp];
            let Some(s) = cross_slack(a, b) else { continue };
            let all_positive = upper[jp] > 0.0 && lower[j] > 0.0 && upper[j] > 0.0 && lower[jp] > 0.0;
            if strict && all_positive && jp == j + 1 {
                if s <= STRICT_TOL {
                    return false;
                }
            } else if s < -STRICT_TOL {
                return false;
            }
        }
    }
    true
}

fn lipschitz_collect(kernel: &MarkovKernel, delta: f64) -> Collector {
    let x = kernel.from_grid().points();
    let means = kernel.conditional_means();
    let mut c = Collector::new();
    for i in 0..x.len() {
        for ip in i + 1..x.len() {
            let allowed = (x[ip] - x[i]) / delta;
            let slack = allowed - (means[ip] - means[i]);
            c.slack(slack);
            if slack <= STRICT_TOL * allowed.max(1.0) {
                c.violate(vec![i, ip], slack);
            }
        }
    }
    c
}

/// Conditional means move by strictly less than `1/delta` times the change
/// in the current type.
pub fn check_lipschitz(kernel: &MarkovKernel, delta: f64) -> AssumptionReport {
    lipschitz_collect(kernel, delta).report(AssumptionName::Lipschitz)
}

fn regularity_collect(table: &VirtualValueTable) -> Collector {
    let mut c = Collector::new();
    let (n, m) = (table.theta1.len(), table.theta2.len());
    let valid = |i: usize, j: usize| table.impulse[i][j].is_some();
    for i in 0..n {
        for j in 0..m {
            if !valid(i, j) {
                continue;
            }
            let v = table.psi[i][j];
            let tol = STRICT_TOL * (1.0 + v.abs());
            if i + 1 < n && valid(i + 1, j) {
                let d = table.psi[i + 1][j] - v;
                c.slack(d);
                if d < -tol {
                    c.violate(vec![i, j, 0], d);
                }
            }
            if j + 1 < m && valid(i, j + 1) {
                let d = table.psi[i][j + 1] - v;
                c.slack(d);
                if d < -tol {
                    c.violate(vec![i, j, 1], d);
                }
            }
        }
    }
    c
}

/// The second-period virtual value is nondecreasing in both types.
pub fn check_regularity(prior: &TypeGrid, kernel: &MarkovKernel) -> Result<AssumptionReport> {
    if !prior.is_density() {
        return Err(Error::DiscreteUnsupported);
    }
    let kernel = kernel.with_prior(prior)?;
    let table = virtual_values(prior, &kernel)?;
    Ok(regularity_collect(&table).report(AssumptionName::Regularity))
}

/// Acceptance kernel likelihood-ratio dominates the rejection kernel row by
/// row.
pub fn check_complement(kernel0: &MarkovKernel, kernel1: &MarkovKernel) -> Result<AssumptionReport> {
    check_same_points(
        kernel0.from_grid().points(),
        kernel1.from_grid().points(),
        "complement kernels from-grid",
    )?;
    check_same_points(
        kernel0.to_grid().points(),
        kernel1.to_grid().points(),
        "complement kernels to-grid",
    )?;
    let mut c = Collector::new();
    let m = kernel0.n_to();
    for i in 0..kernel0.n_from() {
        let (r0, r1) = (kernel0.row(i), kernel1.row(i));
        for j in 0..m.saturating_sub(1) {
            let a = r1[j + 1] * r0[j];
            let b = r1[j] * r0[j + 1];
            let Some(s) = cross_slack(a, b) else { continue };
            c.slack(s);
            if s < -STRICT_TOL {
                c.violate(vec![i, j], a - b);
            }
        }
    }
    Ok(c.report(AssumptionName::Complement))
}

/// Discrete log-concavity of the masses, with contiguous support.
pub fn check_log_concave(grid: &TypeGrid) -> Result<AssumptionReport> {
    if !grid.is_density() {
        return Err(Error::DiscreteUnsupported);
    }
    let w = grid.weights();
    let mut c = Collector::new();
    for i in 1..w.len().saturating_sub(1) {
        let lhs = w[i] * w[i];
        let rhs = w[i - 1] * w[i + 1];
        let Some(s) = cross_slack(lhs, rhs) else { continue };
        c.slack(s);
        if s < -STRICT_TOL {
            c.violate(vec![i], lhs - rhs);
        }
    }
    let first = grid.support_min_index();
    let last = grid.support_max_index();
    for (i, &m) in w.iter().enumerate().take(last).skip(first + 1) {
        if m == 0.0 && w[i - 1] == 0.0 {
            c.violate(vec![i], 0.0);
        }
    }
    Ok(c.report(AssumptionName::LogConcaveAr1))
}

/// Strict MLRP for both kernels of a pair.
pub fn check_mlrp_pair(pair: &KernelPair, strict: bool) -> AssumptionReport {
    let parts = [
        check_mlrp(&pair.reject, strict),
        check_mlrp(&pair.accept, strict),
    ];
    AssumptionReport::combine(AssumptionName::MlrpX, &parts)
}

/// Lipschitz condition for the no-purchase kernel.
pub fn check_lipschitz_pair(pair: &KernelPair, delta: f64) -> AssumptionReport {
    lipschitz_collect(&pair.reject, delta).report(AssumptionName::LipschitzX)
}

/// Regularity for both kernels plus monotonicity in the first allocation.
pub fn check_regularity_pair(prior: &TypeGrid, pair: &KernelPair) -> Result<AssumptionReport> {
    if !prior.is_density() {
        return Err(Error::DiscreteUnsupported);
    }
    let t0 = virtual_values(prior, &pair.reject.with_prior(prior)?)?;
    let t1 = virtual_values(prior, &pair.accept.with_prior(prior)?)?;
    let mut c = regularity_collect(&t0).merge(regularity_collect(&t1));
    for i in 0..t0.theta1.len() {
        for j in 0..t0.theta2.len() {
            if t0.impulse[i][j].is_none() || t1.impulse[i][j].is_none() {
                continue;
            }
            let d = t1.psi[i][j] - t0.psi[i][j];
            c.slack(d);
            if d < -STRICT_TOL * (1.0 + t0.psi[i][j].abs()) {
                c.violate(vec![i, j, 2], d);
            }
        }
    }
    Ok(c.report(AssumptionName::RegularityX))
}

/// Log-concavity of the prior and every innovation, plus the slope window
/// `0 < alpha < 1 / (2 delta)`.
pub fn check_ar1_chain(
    prior: &TypeGrid,
    alphas: &[f64],
    noises: &[&TypeGrid],
    delta: f64,
) -> Result<AssumptionReport> {
    let mut parts = vec![check_log_concave(prior)?];
    for n in noises {
        parts.push(check_log_concave(n)?);
    }
    let mut c = Collector::new();
    for (t, &a) in alphas.iter().enumerate() {
        let upper = 1.0 / (2.0 * delta);
        let slack = a.min(upper - a);
        c.slack(slack);
        if slack <= 0.0 {
            c.violate(vec![t], a);
        }
    }
    parts.push(c.report(AssumptionName::LogConcaveAr1));
    Ok(AssumptionReport::combine(AssumptionName::LogConcaveAr1, &parts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{kernel_from_ar1, make_uniform, Ar1Spec, GridKind, MarkovKernel};
    use proptest::prelude::*;

    fn gauss_noise(sigma: f64, n: usize) -> TypeGrid {
        TypeGrid::truncated_gaussian(0.0, sigma, -5.0 * sigma, 5.0 * sigma, n).unwrap()
    }

    fn ar1(alpha: f64, noise: TypeGrid, prior: &TypeGrid, n_to: usize) -> MarkovKernel {
        kernel_from_ar1(&Ar1Spec { alpha, noise }, prior, n_to).unwrap()
    }

    #[test]
    fn mlrp_sign_of_slope() {
        let prior = make_uniform(1.0, 2.0, 41).unwrap();
        let k = ar1(0.5, gauss_noise(0.3, 81), &prior, 81);
        assert!(check_mlrp(&k, true).holds);
        let k = ar1(-0.5, gauss_noise(0.3, 81), &prior, 81);
        let r = check_mlrp(&k, false);
        assert!(!r.holds);
        assert!(!r.witnesses.is_empty());
    }

    #[test]
    fn mlrp_independent_kernel_is_weak_only() {
        let prior = make_uniform(1.0, 2.0, 11).unwrap();
        let k = MarkovKernel::independent(prior, &make_uniform(0.0, 1.0, 11).unwrap()).unwrap();
        assert!(check_mlrp(&k, false).holds);
        assert!(!check_mlrp(&k, true).holds);
    }

    #[test]
    fn lipschitz_cases() {
        let prior = make_uniform(1.0, 2.0, 41).unwrap();
        let noise = gauss_noise(0.3, 61);
        assert!(check_lipschitz(&ar1(0.5, noise.clone(), &prior, 81), 1.0).holds);
        assert!(!check_lipschitz(&ar1(1.2, noise, &prior, 81), 1.0).holds);
        let perfect = ar1(1.0, TypeGrid::point_mass(0.0), &prior, 41);
        assert!(!check_lipschitz(&perfect, 1.0).holds);
    }

    #[test]
    fn regularity_cases() {
        let prior = make_uniform(1.0, 2.0, 41).unwrap();
        let k = ar1(0.5, gauss_noise(0.3, 61), &prior, 81);
        assert!(check_regularity(&prior, &k).unwrap().holds);

        let indep = MarkovKernel::independent(prior.clone(), &make_uniform(0.0, 1.0, 21).unwrap())
            .unwrap();
        assert!(check_regularity(&prior, &indep).unwrap().holds);

        // Two well-separated bumps: the inverse hazard rises between them.
        let bimodal = TypeGrid::from_density(0.0, 4.0, 81, |x| {
            (-((x - 1.0) / 0.25).powi(2)).exp() + (-((x - 3.0) / 0.25).powi(2)).exp() + 1e-3
        })
        .unwrap();
        let ih = bimodal.inverse_hazard().unwrap();
        assert!(ih.windows(2).any(|w| w[1] > w[0]));
        let k = ar1(0.5, gauss_noise(0.3, 61), &bimodal, 121);
        let r = check_regularity(&bimodal, &k).unwrap();
        assert!(!r.holds);

        let discrete = TypeGrid::discrete(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        let k = MarkovKernel::independent(discrete.clone(), &discrete).unwrap();
        assert!(matches!(
            check_regularity(&discrete, &k),
            Err(Error::DiscreteUnsupported)
        ));
    }

    #[test]
    fn complement_cases() {
        let prior = make_uniform(1.0, 2.0, 21).unwrap();
        let shifted = |mu: f64| {
            let noise = TypeGrid::truncated_gaussian(mu, 0.3, -1.5, 2.0, 71).unwrap();
            ar1(0.5, noise, &prior, 61)
        };
        let k0 = shifted(0.0);
        assert!(check_complement(&k0, &k0).unwrap().holds);
        assert!(check_complement(&k0, &shifted(0.3)).unwrap().holds);
        assert!(!check_complement(&k0, &shifted(-0.3)).unwrap().holds);

        let other = ar1(0.5, gauss_noise(0.3, 71), &prior, 31);
        assert!(matches!(
            check_complement(&k0, &other),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn log_concave_cases() {
        assert!(check_log_concave(&make_uniform(0.0, 1.0, 11).unwrap()).unwrap().holds);
        let g = gauss_noise(0.5, 201);
        // Independent check straight from the sampled masses.
        let w = g.weights();
        for i in 1..w.len() - 1 {
            assert!(w[i] * w[i] >= w[i - 1] * w[i + 1] * (1.0 - 1e-12));
        }
        assert!(check_log_concave(&g).unwrap().holds);
        let gap = TypeGrid::new(
            vec![0.0, 1.0, 2.0, 3.0, 4.0],
            vec![0.5, 0.0, 0.0, 0.0, 0.5],
            GridKind::DiscretizedDensity,
        )
        .unwrap();
        assert!(!check_log_concave(&gap).unwrap().holds);
        let gap1 = TypeGrid::new(
            vec![0.0, 1.0, 2.0],
            vec![0.5, 0.0, 0.5],
            GridKind::DiscretizedDensity,
        )
        .unwrap();
        assert!(!check_log_concave(&gap1).unwrap().holds);
    }

    #[test]
    fn report_serializes_capped_witnesses() {
        let prior = make_uniform(1.0, 2.0, 21).unwrap();
        let k = ar1(-0.5, gauss_noise(0.3, 41), &prior, 41);
        let r = check_mlrp(&k, false);
        assert!(r.violations > MAX_WITNESSES);
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["name"], "A1-MLRP");
        assert_eq!(v["holds"], false);
        assert_eq!(v["witnesses"].as_array().unwrap().len(), MAX_WITNESSES);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn positive_slope_gaussian_ar1_is_mlrp(step in 1usize..10, sigma in 0.1f64..0.8) {
            let alpha = step as f64 / 10.0;
            let prior = make_uniform(1.0, 2.0, 21).unwrap();
            let k = ar1(alpha, gauss_noise(sigma, 61), &prior, 61);
            prop_assert!(check_mlrp(&k, false).holds);
        }

        #[test]
        fn truncation_keeps_log_concavity(mu in -1.0f64..1.0, sigma in 0.2f64..2.0, u in 0.0f64..1.0) {
            let g = TypeGrid::truncated_gaussian(mu, sigma, -2.0, 2.0, 81).unwrap();
            prop_assume!(check_log_concave(&g).unwrap().holds);
            let k = g.points()[(u * 79.0) as usize];
            prop_assume!(g.mass_at_least(k) > 1e-9);
            let t = crate::dist::truncate(&g, k, crate::dist::Side::Geq).unwrap();
            prop_assert!(check_log_concave(&t).unwrap().holds);
        }

        #[test]
        fn mlrp_implies_ordered_cdfs(alpha in 0.05f64..1.0, sigma in 0.1f64..0.6) {
            let prior = make_uniform(1.0, 2.0, 15).unwrap();
            let k = ar1(alpha, gauss_noise(sigma, 41), &prior, 51);
            prop_assume!(check_mlrp(&k, false).holds);
            let cdfs: Vec<Vec<f64>> = k.rows().iter().map(|r| {
                r.iter().scan(0.0, |acc, w| { *acc += w; Some(*acc) }).collect()
            }).collect();
            for i in 1..cdfs.len() {
                for (hi, lo) in cdfs[i].iter().zip(&cdfs[i - 1]) {
                    prop_assert!(*hi <= *lo + 1e-12);
                }
            }
        }

        #[test]
        fn threshold_posteriors_are_lr_ordered(alpha in 0.1f64..1.0, sigma in 0.1f64..0.6, u in 0.05f64..0.95) {
            let prior = make_uniform(1.0, 2.0, 21).unwrap();
            let k = ar1(alpha, gauss_noise(sigma, 41), &prior, 51);
            prop_assume!(check_mlrp(&k, true).holds);
            let cut = prior.points()[1 + (u * 18.0) as usize];
            let up = crate::dist::posterior(&k, &prior, crate::dist::Condition::AtLeast(cut)).unwrap();
            let down = crate::dist::posterior(&k, &prior, crate::dist::Condition::Below(cut)).unwrap();
            prop_assert!(lr_dominates(up.weights(), down.weights(), true));
        }
    }
}
