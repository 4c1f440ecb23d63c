//! Type distributions on finite grids.
//!
//! A [`TypeGrid`] is a list of support points with probability masses. Grids
//! built from a continuous density store the density sampled at equally spaced
//! points (normalized to unit mass); every expectation is a finite sum over the
//! points, while the continuous cdf and hazard rate are recovered by
//! trapezoidal integration of the sampled density. On a uniform density this
//! makes `(1 - F) / f` exact at every grid point.
//!
//! A [`MarkovKernel`] maps each point of a `from` grid to a conditional mass
//! vector over a common `to` grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on total mass.
pub const MASS_TOL: f64 = 1e-12;

/// Relative tolerance used when comparing prices and grid points.
pub(crate) const POINT_TOL: f64 = 1e-12;

#[inline]
pub(crate) fn approx_ge(x: f64, k: f64) -> bool {
    x >= k - POINT_TOL * (1.0 + k.abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    Discrete,
    DiscretizedDensity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeGrid {
    points: Vec<f64>,
    weights: Vec<f64>,
    kind: GridKind,
}

impl TypeGrid {
    /// Builds a grid, renormalizing `weights` to unit mass.
    pub fn new(points: Vec<f64>, weights: Vec<f64>, kind: GridKind) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidGrid("no support points".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidGrid(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidGrid("non-finite support point".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(
                "support points must be strictly ascending".into(),
            ));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidGrid("weights must be finite and >= 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidGrid("weights sum to zero".into()));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        let kind = if points.len() < 2 {
            GridKind::Discrete
        } else {
            kind
        };
        Ok(Self {
            points,
            weights,
            kind,
        })
    }

    pub fn point_mass(value: f64) -> Self {
        Self {
            points: vec![value],
            weights: vec![1.0],
            kind: GridKind::Discrete,
        }
    }

    pub fn discrete(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Self::new(points, weights, GridKind::Discrete)
    }

    /// Samples `pdf` at `n` equally spaced points on `[lo, hi]`.
    pub fn from_density(lo: f64, hi: f64, n: usize, pdf: impl Fn(f64) -> f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidBounds { lo, hi });
        }
        if n < 2 {
            return Err(Error::InvalidGrid("need at least two grid points".into()));
        }
        let points = linspace(lo, hi, n);
        let weights = points.iter().map(|&x| pdf(x).max(0.0)).collect();
        Self::new(points, weights, GridKind::DiscretizedDensity)
    }

    /// Gaussian `N(mu, sigma^2)` truncated to `[lo, hi]`.
    pub fn truncated_gaussian(mu: f64, sigma: f64, lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidGrid(format!("sigma must be positive, got {sigma}")));
        }
        Self::from_density(lo, hi, n, |x| {
            let z = (x - mu) / sigma;
            (-0.5 * z * z).exp()
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn is_density(&self) -> bool {
        self.kind == GridKind::DiscretizedDensity
    }

    pub fn lo(&self) -> f64 {
        self.points[0]
    }

    pub fn hi(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Largest gap between adjacent points (0 for a single point).
    pub fn step(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.expect(|x| x)
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Index of the smallest point carrying positive mass.
    pub fn support_min_index(&self) -> usize {
        self.weights.iter().position(|&w| w > 0.0).unwrap_or(0)
    }

    /// Index of the largest point carrying positive mass.
    pub fn support_max_index(&self) -> usize {
        self.weights
            .iter()
            .rposition(|&w| w > 0.0)
            .unwrap_or(self.len() - 1)
    }

    /// `P(theta >= x_i)` for every grid index, summed from the top.
    pub fn survival(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        let mut acc = 0.0;
        for i in (0..self.len()).rev() {
            acc += self.weights[i];
            out[i] = acc;
        }
        out
    }

    pub fn mass_at_least(&self, x: f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .filter(|(&p, _)| approx_ge(p, x))
            .map(|(_, &w)| w)
            .sum()
    }

    /// `E[(theta - p)_+]`.
    pub fn partial_expectation(&self, p: f64) -> f64 {
        self.expect(|x| (x - p).max(0.0))
    }

    /// Index of a support point equal to `x` (relative tolerance 1e-9).
    pub fn index_of(&self, x: f64) -> Result<usize> {
        let tol = 1e-9 * (1.0 + x.abs());
        let i = self.first_index_at_least(x - tol);
        if i < self.len() && (self.points[i] - x).abs() <= tol {
            Ok(i)
        } else {
            Err(Error::NotOnGrid(x))
        }
    }

    /// Smallest index whose point is `>= x`, or `len()` when none is.
    pub fn first_index_at_least(&self, x: f64) -> usize {
        self.points.partition_point(|&p| !approx_ge(p, x))
    }

    /// Cumulative trapezoid integral of the sampled density at each knot,
    /// together with the total.
    fn trapezoid_knots(&self) -> (Vec<f64>, f64) {
        let n = self.len();
        let mut knots = vec![0.0; n];
        for i in 1..n {
            let dx = self.points[i] - self.points[i - 1];
            knots[i] = knots[i - 1] + 0.5 * (self.weights[i - 1] + self.weights[i]) * dx;
        }
        let total = knots[n - 1];
        (knots, total)
    }

    /// Distribution function. For discrete grids this is `P(theta <= x)`; for
    /// discretized densities it is the integral of the piecewise-linear
    /// density through the sampled points.
    pub fn cdf(&self, x: f64) -> f64 {
        match self.kind {
            GridKind::Discrete => self
                .points
                .iter()
                .zip(&self.weights)
                .filter(|(&p, _)| p <= x)
                .map(|(_, &w)| w)
                .sum(),
            GridKind::DiscretizedDensity => {
                if x <= self.lo() {
                    return 0.0;
                }
                if x >= self.hi() {
                    return 1.0;
                }
                let (knots, total) = self.trapezoid_knots();
                if total <= 0.0 {
                    return self.mass_below(x);
                }
                let i = self.points.partition_point(|&p| p <= x) - 1;
                let dx = self.points[i + 1] - self.points[i];
                let t = (x - self.points[i]) / dx;
                let f0 = self.weights[i];
                let fx = f0 + (self.weights[i + 1] - f0) * t;
                (knots[i] + 0.5 * (f0 + fx) * (x - self.points[i])) / total
            }
        }
    }

    fn mass_below(&self, x: f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .filter(|(&p, _)| p < x)
            .map(|(_, &w)| w)
            .sum()
    }

    /// Inverse hazard rate `(1 - F(x_i)) / f(x_i)` at every grid point, in
    /// value units.
    pub fn inverse_hazard(&self) -> Result<Vec<f64>> {
        if !self.is_density() {
            return Err(Error::DiscreteUnsupported);
        }
        let (knots, total) = self.trapezoid_knots();
        self.points
            .iter()
            .zip(&self.weights)
            .zip(&knots)
            .map(|((&x, &w), &c)| {
                if w <= 0.0 {
                    Err(Error::ZeroDensity(x))
                } else {
                    Ok(((total - c) / w).max(0.0))
                }
            })
            .collect()
    }
}

/// `n` equally spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

/// Uniform distribution on `[lo, hi]` discretized with `n` equal masses.
pub fn make_uniform(lo: f64, hi: f64, n: usize) -> Result<TypeGrid> {
    if !(lo < hi) {
        return Err(Error::InvalidBounds { lo, hi });
    }
    TypeGrid::from_density(lo, hi, n, |_| 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    /// `{theta >= k}`; the cutoff itself belongs here.
    Geq,
    Lt,
}

pub fn truncate(grid: &TypeGrid, k: f64, side: Side) -> Result<TypeGrid> {
    let keep: Vec<usize> = (0..grid.len())
        .filter(|&i| approx_ge(grid.points[i], k) == (side == Side::Geq))
        .collect();
    let mass: f64 = keep.iter().map(|&i| grid.weights[i]).sum();
    if mass < MASS_TOL {
        return Err(Error::EmptyTruncation { k });
    }
    if keep.len() == grid.len() {
        return Ok(grid.clone());
    }
    TypeGrid::new(
        keep.iter().map(|&i| grid.points[i]).collect(),
        keep.iter().map(|&i| grid.weights[i]).collect(),
        grid.kind,
    )
}

/// One transition `theta' = alpha * theta + eps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ar1Spec {
    pub alpha: f64,
    pub noise: TypeGrid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovKernel {
    from: TypeGrid,
    to: TypeGrid,
    rows: Vec<Vec<f64>>,
    x1_tag: Option<u8>,
    /// Known constant impulse response (the AR(1) slope), if any.
    slope: Option<f64>,
}

impl MarkovKernel {
    /// `from` carries the prior; the `to` grid's weights become the implied
    /// marginal. Rows are renormalized.
    pub fn new(
        from: TypeGrid,
        to_points: Vec<f64>,
        to_kind: GridKind,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if rows.len() != from.len() {
            return Err(Error::InvalidGrid(format!(
                "{} kernel rows for {} from-points",
                rows.len(),
                from.len()
            )));
        }
        let m = to_points.len();
        let mut normalized = Vec::with_capacity(rows.len());
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != m {
                return Err(Error::InvalidGrid(format!(
                    "row {i} has {} entries, expected {m}",
                    row.len()
                )));
            }
            if row.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return Err(Error::InvalidGrid(format!("row {i} has a negative entry")));
            }
            let s: f64 = row.iter().sum();
            if s <= 0.0 {
                return Err(Error::InvalidGrid(format!("row {i} has no mass")));
            }
            normalized.push(row.into_iter().map(|w| w / s).collect::<Vec<_>>());
        }
        let mut marginal = vec![0.0; m];
        for (row, &w) in normalized.iter().zip(from.weights()) {
            for (acc, &r) in marginal.iter_mut().zip(row) {
                *acc += w * r;
            }
        }
        let to = TypeGrid::new(to_points, marginal, to_kind)?;
        Ok(Self {
            from,
            to,
            rows: normalized,
            x1_tag: None,
            slope: None,
        })
    }

    /// Every row equals `dist`.
    pub fn independent(from: TypeGrid, dist: &TypeGrid) -> Result<Self> {
        let rows = vec![dist.weights().to_vec(); from.len()];
        let mut k = Self::new(from, dist.points().to_vec(), dist.kind(), rows)?;
        k.slope = Some(0.0);
        Ok(k)
    }

    pub fn from_grid(&self) -> &TypeGrid {
        &self.from
    }

    /// The `to` grid, weighted by the marginal of the second-period type.
    pub fn to_grid(&self) -> &TypeGrid {
        &self.to
    }

    pub fn marginal(&self) -> &TypeGrid {
        &self.to
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn n_from(&self) -> usize {
        self.rows.len()
    }

    pub fn n_to(&self) -> usize {
        self.to.len()
    }

    pub fn x1_tag(&self) -> Option<u8> {
        self.x1_tag
    }

    pub fn with_x1_tag(mut self, tag: u8) -> Self {
        self.x1_tag = Some(tag);
        self
    }

    pub fn slope(&self) -> Option<f64> {
        self.slope
    }

    pub fn with_slope(mut self, slope: Option<f64>) -> Self {
        self.slope = slope;
        self
    }

    /// Same transition rows, new prior on the from-grid.
    pub fn with_prior(&self, prior: &TypeGrid) -> Result<Self> {
        check_same_points(self.from.points(), prior.points(), "prior vs kernel from-grid")?;
        let mut k = Self::new(
            prior.clone(),
            self.to.points().to_vec(),
            self.to.kind(),
            self.rows.clone(),
        )?;
        k.x1_tag = self.x1_tag;
        k.slope = self.slope;
        Ok(k)
    }

    /// Conditional distribution of the next type at from-index `i`.
    pub fn conditional(&self, i: usize) -> TypeGrid {
        TypeGrid {
            points: self.to.points.clone(),
            weights: self.rows[i].clone(),
            kind: self.to.kind,
        }
    }

    pub fn conditional_means(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().zip(self.to.points()).map(|(w, y)| w * y).sum())
            .collect()
    }

    /// Two-step kernel `self` then `next`; `next` must start on this kernel's
    /// to-grid.
    pub fn compose(&self, next: &MarkovKernel) -> Result<Self> {
        check_same_points(self.to.points(), next.from.points(), "composed kernels")?;
        let m = next.n_to();
        let rows: Vec<Vec<f64>> = self
            .rows
            .iter()
            .map(|row| {
                let mut out = vec![0.0; m];
                for (&w, nrow) in row.iter().zip(&next.rows) {
                    if w == 0.0 {
                        continue;
                    }
                    for (o, &r) in out.iter_mut().zip(nrow) {
                        *o += w * r;
                    }
                }
                out
            })
            .collect();
        let mut k = Self::new(
            self.from.clone(),
            next.to.points().to_vec(),
            next.to.kind(),
            rows,
        )?;
        k.slope = match (self.slope, next.slope) {
            (Some(a), Some(b)) => Some(a * b),
            _ => None,
        };
        Ok(k)
    }

    /// Mixture of rows under weights `mix` over the from-grid.
    pub fn push_forward(&self, mix: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_to()];
        for (&w, row) in mix.iter().zip(&self.rows) {
            if w == 0.0 {
                continue;
            }
            for (o, &r) in out.iter_mut().zip(row) {
                *o += w * r;
            }
        }
        out
    }

    pub fn same_grids(&self, other: &MarkovKernel) -> bool {
        same_points(self.from.points(), other.from.points())
            && same_points(self.to.points(), other.to.points())
    }
}

fn same_points(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a
            .iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= 1e-9 * (1.0 + x.abs()))
}

pub(crate) fn check_same_points(a: &[f64], b: &[f64], what: &str) -> Result<()> {
    if same_points(a, b) {
        Ok(())
    } else {
        Err(Error::GridMismatch(what.to_string()))
    }
}

/// Discretizes `theta' = alpha * theta + eps` onto a uniform grid of `n_to`
/// points spanning the reachable range.
///
/// Density noise is evaluated by log-linear interpolation of its sampled
/// density at `y - alpha * theta`, which keeps log-concave noise log-concave
/// and hence the kernel totally positive for `alpha > 0`. Discrete noise (or a
/// to-grid too coarse to resolve the noise) falls back to splitting each
/// noise atom between its two neighbouring to-points, which preserves means.
pub fn kernel_from_ar1(spec: &Ar1Spec, from: &TypeGrid, n_to: usize) -> Result<MarkovKernel> {
    let (lo, hi) = ar1_range(spec, from);
    kernel_from_ar1_on(spec, from, lo, hi, n_to)
}

/// Reachable range `[alpha * min + eps_min, alpha * max + eps_max]`.
pub fn ar1_range(spec: &Ar1Spec, from: &TypeGrid) -> (f64, f64) {
    let a = spec.alpha;
    let (x_lo, x_hi) = (from.lo(), from.hi());
    (
        (a * x_lo).min(a * x_hi) + spec.noise.lo(),
        (a * x_lo).max(a * x_hi) + spec.noise.hi(),
    )
}

/// Same as [`kernel_from_ar1`] on a caller-chosen to-grid `[lo, hi]`, which
/// must cover the reachable range.
pub fn kernel_from_ar1_on(
    spec: &Ar1Spec,
    from: &TypeGrid,
    lo: f64,
    hi: f64,
    n_to: usize,
) -> Result<MarkovKernel> {
    if n_to < 2 {
        return Err(Error::InvalidGrid("n_to must be at least 2".into()));
    }
    let a = spec.alpha;
    let noise = &spec.noise;
    let (r_lo, r_hi) = ar1_range(spec, from);
    let slack = 1e-9 * (1.0 + r_lo.abs().max(r_hi.abs()));
    if r_lo < lo - slack || r_hi > hi + slack {
        return Err(Error::InvalidBounds { lo, hi });
    }
    let degenerate = hi - lo <= 1e-12 * (1.0 + lo.abs());
    let to_points = if degenerate {
        vec![lo]
    } else {
        linspace(lo, hi, n_to)
    };

    let mut rows = None;
    if noise.is_density() && !degenerate {
        let (e_lo, e_hi) = (noise.points()[0], noise.points()[noise.len() - 1]);
        let half = 0.5 * (to_points[1] - to_points[0]);
        let pad = 0.5 * (e_hi - e_lo) / (noise.len() - 1) as f64;
        // Nodes at the edge of the shifted support (noise cells included)
        // carry the share of their cell that the support covers, so row masses move continuously with
        // the shift instead of jumping when the edge crosses a node.
        let r: Vec<Vec<f64>> = from
            .points()
            .iter()
            .map(|&x| {
                let (s_lo, s_hi) = (a * x + e_lo - pad, a * x + e_hi + pad);
                to_points
                    .iter()
                    .map(|&y| {
                        let cover = ((y + half).min(s_hi) - (y - half).max(s_lo)).max(0.0) / (2.0 * half);
                        if cover <= 0.0 {
                            return 0.0;
                        }
                        cover.min(1.0) * log_linear_density(noise, (y - a * x).clamp(e_lo, e_hi))
                    })
                    .collect()
            })
            .collect();
        let resolved = r
            .iter()
            .all(|row| row.iter().filter(|&&w| w > 0.0).count() >= 2);
        if resolved {
            rows = Some(r);
        }
    }
    let rows = match rows {
        Some(r) => r,
        None => from
            .points()
            .iter()
            .map(|&x| project_atoms(noise, a * x, &to_points))
            .collect(),
    };
    let kind = if degenerate {
        GridKind::Discrete
    } else {
        noise.kind()
    };
    Ok(MarkovKernel::new(from.clone(), to_points, kind, rows)?.with_slope(Some(a)))
}

fn log_linear_density(noise: &TypeGrid, e: f64) -> f64 {
    let pts = noise.points();
    let w = noise.weights();
    let tol = 1e-12 * (1.0 + e.abs());
    if e < pts[0] - tol || e > pts[pts.len() - 1] + tol {
        return 0.0;
    }
    let j = pts.partition_point(|&p| p <= e);
    if j == 0 {
        return w[0];
    }
    if j >= pts.len() {
        return w[pts.len() - 1];
    }
    let (x0, x1) = (pts[j - 1], pts[j]);
    let t = (e - x0) / (x1 - x0);
    if t <= 1e-12 {
        return w[j - 1];
    }
    if t >= 1.0 - 1e-12 {
        return w[j];
    }
    let (w0, w1) = (w[j - 1], w[j]);
    if w0 > 0.0 && w1 > 0.0 {
        (w0.ln() * (1.0 - t) + w1.ln() * t).exp()
    } else {
        w0 * (1.0 - t) + w1 * t
    }
}

fn project_atoms(noise: &TypeGrid, shift: f64, to_points: &[f64]) -> Vec<f64> {
    let m = to_points.len();
    let mut row = vec![0.0; m];
    if m == 1 {
        row[0] = 1.0;
        return row;
    }
    let lo = to_points[0];
    let step = (to_points[m - 1] - lo) / (m - 1) as f64;
    for (&e, &w) in noise.points().iter().zip(noise.weights()) {
        if w == 0.0 {
            continue;
        }
        let u = ((shift + e - lo) / step).clamp(0.0, (m - 1) as f64);
        let mut j = u.floor() as usize;
        let mut frac = u - j as f64;
        if frac > 1.0 - 1e-9 {
            j += 1;
            frac = 0.0;
        }
        if j >= m - 1 {
            row[m - 1] += w;
        } else if frac < 1e-9 {
            row[j] += w;
        } else {
            row[j] += w * (1.0 - frac);
            row[j + 1] += w * frac;
        }
    }
    row
}

/// Kernels governing the second-period type after an acceptance and after a
/// rejection. In the baseline model both are the same kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelPair {
    pub accept: MarkovKernel,
    pub reject: MarkovKernel,
}

impl KernelPair {
    pub fn baseline(kernel: MarkovKernel) -> Self {
        Self {
            accept: kernel.clone(),
            reject: kernel,
        }
    }

    pub fn new(accept: MarkovKernel, reject: MarkovKernel) -> Result<Self> {
        if !accept.same_grids(&reject) {
            return Err(Error::GridMismatch(
                "acceptance and rejection kernels must share grids".into(),
            ));
        }
        Ok(Self {
            accept: accept.with_x1_tag(1),
            reject: reject.with_x1_tag(0),
        })
    }

    pub fn prior(&self) -> &TypeGrid {
        self.reject.from_grid()
    }

    pub fn to_points(&self) -> &[f64] {
        self.reject.to_grid().points()
    }

    pub fn is_baseline(&self) -> bool {
        self.accept.rows() == self.reject.rows()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    /// `theta_1 >= k`
    AtLeast(f64),
    /// `theta_1 < k`
    Below(f64),
    /// `theta_1` equal to a single support point
    At(f64),
}

/// Distribution of the next type given an event on the current one: the
/// prior-weighted mixture of kernel rows over the event.
pub fn posterior(kernel: &MarkovKernel, prior: &TypeGrid, cond: Condition) -> Result<TypeGrid> {
    check_same_points(kernel.from.points(), prior.points(), "prior vs kernel from-grid")?;
    let n = prior.len();
    let mix: Vec<f64> = match cond {
        Condition::At(x) => {
            let i = prior
                .index_of(x)
                .map_err(|_| Error::EmptyEvent(format!("theta1 = {x} is not a support point")))?;
            return Ok(kernel.conditional(i));
        }
        Condition::AtLeast(k) => (0..n)
            .map(|i| {
                if approx_ge(prior.points[i], k) {
                    prior.weights[i]
                } else {
                    0.0
                }
            })
            .collect(),
        Condition::Below(k) => (0..n)
            .map(|i| {
                if approx_ge(prior.points[i], k) {
                    0.0
                } else {
                    prior.weights[i]
                }
            })
            .collect(),
    };
    let mass: f64 = mix.iter().sum();
    if mass < MASS_TOL {
        return Err(Error::EmptyEvent(format!("{cond:?}")));
    }
    let weights = kernel.push_forward(&mix);
    TypeGrid::new(kernel.to.points.clone(), weights, kernel.to.kind)
}

/// Prefix and suffix sums of prior-weighted kernel rows, so that the
/// posterior after any threshold is available in O(n_to).
#[derive(Clone, Debug)]
pub(crate) struct PosteriorTable {
    /// `below[k][j] = sum_{i < k} w_i r_ij`
    below: Vec<Vec<f64>>,
    /// `above[k][j] = sum_{i >= k} w_i r_ij`
    above: Vec<Vec<f64>>,
    mass_below: Vec<f64>,
    mass_above: Vec<f64>,
}

impl PosteriorTable {
    pub(crate) fn new(kernel: &MarkovKernel, prior: &[f64]) -> Self {
        let n = kernel.n_from();
        let m = kernel.n_to();
        let mut below = vec![vec![0.0; m]; n + 1];
        let mut mass_below = vec![0.0; n + 1];
        for i in 0..n {
            let (head, tail) = below.split_at_mut(i + 1);
            let prev = &head[i];
            let cur = &mut tail[0];
            for j in 0..m {
                cur[j] = prev[j] + prior[i] * kernel.rows[i][j];
            }
            mass_below[i + 1] = mass_below[i] + prior[i];
        }
        let mut above = vec![vec![0.0; m]; n + 1];
        let mut mass_above = vec![0.0; n + 1];
        for i in (0..n).rev() {
            let (head, tail) = above.split_at_mut(i + 1);
            let next = &tail[0];
            let cur = &mut head[i];
            for j in 0..m {
                cur[j] = next[j] + prior[i] * kernel.rows[i][j];
            }
            mass_above[i] = mass_above[i + 1] + prior[i];
        }
        Self {
            below,
            above,
            mass_below,
            mass_above,
        }
    }

    pub(crate) fn mass_at_least(&self, k: usize) -> f64 {
        self.mass_above[k]
    }

    pub(crate) fn mass_below(&self, k: usize) -> f64 {
        self.mass_below[k]
    }

    /// Normalized posterior weights given `theta_1 >= x_k`, if the event has mass.
    pub(crate) fn at_least(&self, k: usize) -> Option<Vec<f64>> {
        let m = self.mass_above[k];
        (m > MASS_TOL).then(|| self.above[k].iter().map(|w| w / m).collect())
    }

    pub(crate) fn below(&self, k: usize) -> Option<Vec<f64>> {
        let m = self.mass_below[k];
        (m > MASS_TOL).then(|| self.below[k].iter().map(|w| w / m).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ar1(alpha: f64, noise: TypeGrid, from: &TypeGrid, n_to: usize) -> MarkovKernel {
        kernel_from_ar1(&Ar1Spec { alpha, noise }, from, n_to).unwrap()
    }

    #[test]
    fn uniform_grid_basics() {
        let g = make_uniform(1.0, 2.0, 101).unwrap();
        assert!((g.mean() - 1.5).abs() < 1e-9);
        let g2 = make_uniform(0.0, 1.0, 2).unwrap();
        assert_eq!(g2.points(), &[0.0, 1.0]);
        assert_eq!(g2.weights(), &[0.5, 0.5]);
        let g3 = make_uniform(1.0, 2.0, 401).unwrap();
        assert!((g3.cdf(1.25) - 0.25).abs() < 1e-9);
        assert!((g3.cdf(2.0) - 1.0).abs() < 1e-15);
        assert!(matches!(
            make_uniform(2.0, 1.0, 5),
            Err(Error::InvalidBounds { .. })
        ));
    }

    #[test]
    fn uniform_inverse_hazard_is_exact() {
        let g = make_uniform(1.0, 2.0, 41).unwrap();
        for (x, h) in g.points().iter().zip(g.inverse_hazard().unwrap()) {
            assert!((h - (2.0 - x)).abs() < 1e-12, "{x}: {h}");
        }
        let d = TypeGrid::discrete(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        assert!(matches!(d.inverse_hazard(), Err(Error::DiscreteUnsupported)));
    }

    #[test]
    fn truncation_cases() {
        let g = make_uniform(1.0, 2.0, 401).unwrap();
        let t = truncate(&g, 1.5, Side::Geq).unwrap();
        assert!((t.mean() - 1.75).abs() < 1e-9);
        assert_eq!(t.lo(), 1.5);
        let same = truncate(&g, g.lo(), Side::Geq).unwrap();
        assert_eq!(same, g);
        assert!(matches!(
            truncate(&g, 2.5, Side::Geq),
            Err(Error::EmptyTruncation { .. })
        ));
    }

    #[test]
    fn ar1_independence_and_perfect_correlation() {
        let prior = make_uniform(1.0, 2.0, 21).unwrap();
        let noise = make_uniform(0.0, 1.0, 31).unwrap();
        let k = ar1(0.0, noise.clone(), &prior, 31);
        for row in k.rows() {
            for (a, b) in row.iter().zip(noise.weights()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        let k = ar1(1.0, TypeGrid::point_mass(0.0), &prior, 21);
        for (i, row) in k.rows().iter().enumerate() {
            for (j, &w) in row.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((w - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ar1_conditional_mean() {
        // Independent check: direct summation of row entries against
        // alpha * theta1 + E[eps].
        let prior = make_uniform(1.0, 3.0, 41).unwrap();
        let noise = make_uniform(0.0, 1.0, 101).unwrap();
        let k = ar1(0.5, noise, &prior, 201);
        let i = prior.index_of(2.0).unwrap();
        let mean: f64 = k
            .row(i)
            .iter()
            .zip(k.to_grid().points())
            .map(|(w, y)| w * y)
            .sum();
        assert!((mean - 1.5).abs() < 0.01, "{mean}");
    }

    #[test]
    fn posterior_cases() {
        let prior = make_uniform(1.0, 2.0, 21).unwrap();
        let noise = make_uniform(0.0, 1.0, 11).unwrap();
        let k = ar1(0.0, noise, &prior, 11);
        let post = posterior(&k, &prior, Condition::AtLeast(1.3)).unwrap();
        for (a, b) in post.weights().iter().zip(k.marginal().weights()) {
            assert!((a - b).abs() < 1e-12);
        }

        let k = ar1(1.0, TypeGrid::point_mass(0.0), &prior, 21);
        let post = posterior(&k, &prior, Condition::AtLeast(1.5)).unwrap();
        let trunc = truncate(&prior, 1.5, Side::Geq).unwrap();
        assert!((post.mean() - trunc.mean()).abs() < 1e-12);

        // Perfectly anti-correlated binary types.
        let p1 = TypeGrid::discrete(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        let k = MarkovKernel::new(
            p1.clone(),
            vec![1.0, 2.0],
            GridKind::Discrete,
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        )
        .unwrap();
        let post = posterior(&k, &p1, Condition::At(2.0)).unwrap();
        assert_eq!(post.weights(), &[1.0, 0.0]);
        assert!(matches!(
            posterior(&k, &p1, Condition::Below(1.0)),
            Err(Error::EmptyEvent(_))
        ));
    }

    #[test]
    fn partial_expectation_cases() {
        let g = make_uniform(1.0, 2.0, 401).unwrap();
        assert!((g.partial_expectation(1.0) - 0.5).abs() < 1e-9);
        assert_eq!(g.partial_expectation(2.0), 0.0);
        assert_eq!(g.partial_expectation(5.0), 0.0);
        assert_eq!(TypeGrid::point_mass(2.0).partial_expectation(1.5), 0.5);
    }

    #[test]
    fn degenerate_prior_posterior_is_row() {
        let prior = make_uniform(1.0, 2.0, 11).unwrap();
        let noise = TypeGrid::truncated_gaussian(0.0, 0.2, -1.0, 1.0, 21).unwrap();
        let k = ar1(0.6, noise, &prior, 31);
        let mut w = vec![0.0; 11];
        w[4] = 1.0;
        let point = TypeGrid::new(prior.points().to_vec(), w, GridKind::Discrete).unwrap();
        let post = posterior(&k, &point, Condition::AtLeast(prior.lo())).unwrap();
        for (a, b) in post.weights().iter().zip(k.row(4)) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    fn arb_grid() -> impl Strategy<Value = TypeGrid> {
        (2usize..40, prop::collection::vec(0.0f64..1.0, 40), 0.0f64..3.0, 0.1f64..3.0).prop_filter_map(
            "needs mass",
            |(n, w, lo, width)| {
                let pts = linspace(lo, lo + width, n);
                TypeGrid::new(pts, w[..n].to_vec(), GridKind::DiscretizedDensity).ok()
            },
        )
    }

    proptest! {
        #[test]
        fn truncation_split_reproduces_grid(g in arb_grid(), u in 0.0f64..1.0) {
            let k = g.points()[((g.len() - 1) as f64 * u) as usize];
            let hi_mass = g.mass_at_least(k);
            let lo_mass = 1.0 - hi_mass;
            let mut merged = vec![0.0; g.len()];
            if let Ok(t) = truncate(&g, k, Side::Geq) {
                prop_assert!((t.weights().iter().sum::<f64>() - 1.0).abs() < MASS_TOL);
                for (p, w) in t.points().iter().zip(t.weights()) {
                    merged[g.index_of(*p).unwrap()] += hi_mass * w;
                }
            }
            if let Ok(t) = truncate(&g, k, Side::Lt) {
                for (p, w) in t.points().iter().zip(t.weights()) {
                    merged[g.index_of(*p).unwrap()] += lo_mass * w;
                }
            }
            for (a, b) in merged.iter().zip(g.weights()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn partial_expectation_is_monotone_lipschitz(g in arb_grid(), a in -1.0f64..6.0, d in 0.0f64..2.0) {
            let (pa, pb) = (g.partial_expectation(a), g.partial_expectation(a + d));
            prop_assert!(pb <= pa + 1e-12);
            prop_assert!(pa - pb <= d + 1e-12);
            if a <= g.lo() {
                prop_assert!((pa - (g.mean() - a)).abs() < 1e-12);
            }
        }
    }
}
