//! Game instances consumed by the solvers.

use serde::Serialize;

use crate::dist::{
    kernel_from_ar1, linspace, Ar1Spec, GridKind, KernelPair, MarkovKernel, TypeGrid,
};
use crate::error::{Error, Result};

/// Two-period game: prior on `theta_1`, transition kernels after acceptance
/// and rejection, discount factor, and candidate first-period prices.
#[derive(Clone, Debug)]
pub struct TwoPeriodGame {
    pub kernels: KernelPair,
    pub delta: f64,
    pub p1_grid: Vec<f64>,
    /// Also try the first-period prices at which a boundary type is exactly
    /// indifferent, in addition to `p1_grid`.
    pub indifference_prices: bool,
}

impl TwoPeriodGame {
    pub fn new(kernels: KernelPair, delta: f64, n_price: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::validation("delta", format!("{delta} is outside [0, 1]")));
        }
        let prior = kernels.prior();
        let to = kernels.reject.to_grid();
        let span = delta * (to.hi() - to.lo());
        let lo = prior.lo() - span;
        let hi = prior.hi() + span;
        let p1_grid = if hi > lo {
            linspace(lo, hi, n_price.max(2))
        } else {
            vec![lo]
        };
        Ok(Self {
            kernels,
            delta,
            p1_grid,
            indifference_prices: true,
        })
    }

    pub fn baseline(kernel: MarkovKernel, delta: f64, n_price: usize) -> Result<Self> {
        Self::new(KernelPair::baseline(kernel), delta, n_price)
    }

    pub fn with_p1_grid(mut self, grid: Vec<f64>) -> Result<Self> {
        if grid.is_empty() || grid.iter().any(|p| !p.is_finite()) {
            return Err(Error::validation("prices", "price grid must be finite and nonempty"));
        }
        let mut grid = grid;
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        self.p1_grid = grid;
        Ok(self)
    }

    pub fn with_indifference_prices(mut self, on: bool) -> Self {
        self.indifference_prices = on;
        self
    }

    pub fn prior(&self) -> &TypeGrid {
        self.kernels.prior()
    }

    pub fn theta2(&self) -> &[f64] {
        self.kernels.to_points()
    }

    /// Grid resolution used for revenue tolerances.
    pub fn price_step(&self) -> f64 {
        let p1_step = self
            .p1_grid
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max);
        self.prior()
            .step()
            .max(self.kernels.reject.to_grid().step())
            .max(p1_step)
    }
}

/// `T`-period game with AR(1)-style transitions; `transitions[t]` maps the
/// type in period `t + 1` to the type in period `t + 2`.
#[derive(Clone, Debug)]
pub struct MultiPeriodGame {
    pub prior: TypeGrid,
    pub transitions: Vec<MarkovKernel>,
    pub delta: f64,
}

impl MultiPeriodGame {
    pub fn from_ar1(prior: TypeGrid, specs: &[Ar1Spec], delta: f64, n_to: usize) -> Result<Self> {
        let mut transitions = Vec::with_capacity(specs.len());
        let mut from = prior.clone();
        for spec in specs {
            let k = kernel_from_ar1(spec, &from, n_to)?;
            from = k.marginal().clone();
            transitions.push(k);
        }
        Ok(Self {
            prior,
            transitions,
            delta,
        })
    }

    pub fn horizon(&self) -> usize {
        self.transitions.len() + 1
    }

    /// Marginal distribution of the type in period `t` (0-based).
    pub fn marginal(&self, t: usize) -> &TypeGrid {
        if t == 0 {
            &self.prior
        } else {
            self.transitions[t - 1].marginal()
        }
    }

    pub fn price_step(&self) -> f64 {
        (0..self.horizon())
            .map(|t| self.marginal(t).step())
            .fold(0.0, f64::max)
    }
}

/// Finite-type two-period game.
#[derive(Clone, Debug, Serialize)]
pub struct DiscreteGame {
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
    /// Joint probability of `(theta1[i], theta2[j])`.
    pub pmf: Vec<Vec<f64>>,
    pub prices: Vec<f64>,
    pub delta: f64,
    /// Added to the second-period value when the first unit was bought.
    pub kappa: Vec<Vec<f64>>,
}

pub const MAX_DISCRETE_TYPES: usize = 8;
pub const MAX_DISCRETE_PRICES: usize = 25;

impl DiscreteGame {
    pub fn new(
        theta1: Vec<f64>,
        theta2: Vec<f64>,
        pmf: Vec<Vec<f64>>,
        prices: Vec<f64>,
        delta: f64,
    ) -> Result<Self> {
        let kappa = vec![vec![0.0; theta2.len()]; theta1.len()];
        Self::with_kappa(theta1, theta2, pmf, prices, delta, kappa)
    }

    pub fn with_kappa(
        theta1: Vec<f64>,
        theta2: Vec<f64>,
        pmf: Vec<Vec<f64>>,
        prices: Vec<f64>,
        delta: f64,
        kappa: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let (n1, n2) = (theta1.len(), theta2.len());
        if n1 == 0 || n2 == 0 {
            return Err(Error::validation("types", "type sets must be nonempty"));
        }
        if pmf.len() != n1 || pmf.iter().any(|r| r.len() != n2) {
            return Err(Error::validation("pmf", format!("expected a {n1}x{n2} table")));
        }
        if kappa.len() != n1 || kappa.iter().any(|r| r.len() != n2) {
            return Err(Error::validation("kappa", format!("expected a {n1}x{n2} table")));
        }
        if pmf.iter().flatten().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::validation("pmf", "entries must be finite and >= 0"));
        }
        let total: f64 = pmf.iter().flatten().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::validation("pmf", format!("sums to {total}, expected 1")));
        }
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::validation("delta", format!("{delta} is outside [0, 1]")));
        }
        let mut prices = prices;
        prices.sort_by(f64::total_cmp);
        prices.dedup();
        for (i, &v) in theta1.iter().enumerate() {
            let mass: f64 = pmf[i].iter().sum();
            if v > 0.0 && mass > 0.0 && !contains(&prices, v) {
                return Err(Error::validation("prices", format!("type value {v} missing")));
            }
        }
        for i in 0..n1 {
            for j in 0..n2 {
                let v = theta2[j] + kappa[i][j];
                if pmf[i][j] > 0.0 && v > 0.0 && !contains(&prices, v) {
                    return Err(Error::validation("prices", format!("type value {v} missing")));
                }
            }
        }
        Ok(Self {
            theta1,
            theta2,
            pmf,
            prices,
            delta,
            kappa,
        })
    }

    /// Discrete game equivalent to a two-period baseline game on small
    /// grids, using `prices` for every period.
    pub fn from_two_period(game: &TwoPeriodGame, prices: Vec<f64>) -> Result<Self> {
        if !game.kernels.is_baseline() {
            return Err(Error::Unsupported(
                "only baseline kernels convert to a discrete game".into(),
            ));
        }
        let prior = game.prior();
        let k = &game.kernels.reject;
        let pmf = (0..prior.len())
            .map(|i| k.row(i).iter().map(|r| prior.weights()[i] * r).collect())
            .collect();
        Self::new(
            prior.points().to_vec(),
            k.to_grid().points().to_vec(),
            pmf,
            prices,
            game.delta,
        )
    }

    /// Two-period kernel form: the acceptance kernel carries `theta2 + kappa`.
    pub fn to_two_period(&self) -> Result<TwoPeriodGame> {
        let n1 = self.theta1.len();
        let marg: Vec<f64> = self.pmf.iter().map(|r| r.iter().sum()).collect();
        if marg.iter().any(|&m| m <= 0.0) {
            return Err(Error::validation("pmf", "every theta1 needs positive mass"));
        }
        let prior = TypeGrid::discrete(self.theta1.clone(), marg.clone())?;
        let mut pts: Vec<f64> = self.theta2.clone();
        for i in 0..n1 {
            for (j, &y) in self.theta2.iter().enumerate() {
                pts.push(y + self.kappa[i][j]);
            }
        }
        let pts = merge_points(&pts, &[]);
        let at = |v: f64| pts.iter().position(|&p| (p - v).abs() <= 1e-9 * (1.0 + v.abs()));
        let mut acc = vec![vec![0.0; pts.len()]; n1];
        let mut rej = vec![vec![0.0; pts.len()]; n1];
        for i in 0..n1 {
            for (j, &y) in self.theta2.iter().enumerate() {
                let w = self.pmf[i][j] / marg[i];
                rej[i][at(y).unwrap()] += w;
                acc[i][at(y + self.kappa[i][j]).unwrap()] += w;
            }
        }
        let accept = MarkovKernel::new(prior.clone(), pts.clone(), GridKind::Discrete, acc)?;
        let reject = MarkovKernel::new(prior, pts, GridKind::Discrete, rej)?;
        let pair = if accept.rows() == reject.rows() {
            KernelPair::baseline(reject)
        } else {
            KernelPair::new(accept, reject)?
        };
        TwoPeriodGame {
            kernels: pair,
            delta: self.delta,
            p1_grid: vec![0.0],
            indifference_prices: false,
        }
        .with_p1_grid(self.prices.clone())
    }
}

fn contains(sorted: &[f64], v: f64) -> bool {
    sorted
        .iter()
        .any(|&p| (p - v).abs() <= 1e-9 * (1.0 + v.abs()))
}

/// Sorted union of two point sets; points within 1e-9 (relative) are merged,
/// keeping the first occurrence.
pub fn merge_points(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(all.len());
    for v in all {
        match out.last() {
            Some(&last) if (v - last).abs() <= 1e-9 * (1.0 + v.abs()) => {}
            _ => out.push(v),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discrete_game_round_trip() {
        let g = DiscreteGame::new(
            vec![1.0, 2.0],
            vec![1.0, 2.0],
            vec![vec![0.0, 0.5], vec![0.5, 0.0]],
            vec![1.0, 2.0],
            1.0,
        )
        .unwrap();
        let tp = g.to_two_period().unwrap();
        assert!(tp.kernels.is_baseline());
        assert_eq!(tp.kernels.reject.row(0), &[0.0, 1.0]);
        assert_eq!(tp.p1_grid, vec![1.0, 2.0]);
    }

    #[test]
    fn missing_type_price_is_rejected() {
        let err = DiscreteGame::new(
            vec![1.0, 2.0],
            vec![1.0, 2.0],
            vec![vec![0.25, 0.25], vec![0.25, 0.25]],
            vec![1.0],
            1.0,
        );
        assert!(matches!(err, Err(Error::Validation { .. })));
    }

    #[test]
    fn kappa_shifts_acceptance_kernel() {
        let g = DiscreteGame::with_kappa(
            vec![1.0, 2.0],
            vec![1.0, 2.0],
            vec![vec![0.5, 0.0], vec![0.0, 0.5]],
            vec![0.5, 1.0, 2.0],
            1.0,
            vec![vec![-1.5; 2]; 2],
        )
        .unwrap();
        let tp = g.to_two_period().unwrap();
        assert_eq!(tp.theta2(), &[-0.5, 0.5, 1.0, 2.0]);
        assert_eq!(tp.kernels.accept.row(1), &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(tp.kernels.reject.row(1), &[0.0, 0.0, 0.0, 1.0]);
    }
}
