//! Scenario files: a strict JSON description of one problem instance.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dist::{
    ar1_range, kernel_from_ar1, kernel_from_ar1_on, make_uniform, Ar1Spec, KernelPair,
    MarkovKernel, TypeGrid,
};
use crate::error::{Error, Result};
use crate::model::{DiscreteGame, MultiPeriodGame, TwoPeriodGame};

pub const DEFAULT_TWO_PERIOD_GRID: usize = 401;
pub const DEFAULT_MULTI_PERIOD_GRID: usize = 101;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    TwoPeriod,
    Complements,
    MultiPeriod,
    Discrete,
}

/// A univariate distribution, discretized on `n_theta` points when it has a
/// density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistSpec {
    Uniform { lo: f64, hi: f64 },
    TruncatedGaussian { mu: f64, sigma: f64, lo: f64, hi: f64 },
    Discrete { points: Vec<f64>, weights: Vec<f64> },
    PointMass { value: f64 },
}

impl DistSpec {
    pub fn grid(&self, n: usize) -> Result<TypeGrid> {
        match self {
            DistSpec::Uniform { lo, hi } => make_uniform(*lo, *hi, n),
            DistSpec::TruncatedGaussian { mu, sigma, lo, hi } => {
                TypeGrid::truncated_gaussian(*mu, *sigma, *lo, *hi, n)
            }
            DistSpec::Discrete { points, weights } => {
                TypeGrid::discrete(points.clone(), weights.clone())
            }
            DistSpec::PointMass { value } => Ok(TypeGrid::point_mass(*value)),
        }
    }
}

/// Law of the next period's value given the current one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransitionSpec {
    Independent {
        dist: DistSpec,
    },
    Ar1 {
        alpha: f64,
        noise: DistSpec,
    },
    /// Gaussian AR(1) whose innovations keep a `N(mean, sd^2)` marginal
    /// stationary; innovations are truncated at `width` standard deviations.
    StationaryAr1 {
        alpha: f64,
        mean: f64,
        sd: f64,
        #[serde(default = "default_width")]
        width: f64,
    },
}

fn default_width() -> f64 {
    4.0
}

impl TransitionSpec {
    pub fn alpha(&self) -> Option<f64> {
        match self {
            TransitionSpec::Independent { .. } => None,
            TransitionSpec::Ar1 { alpha, .. } | TransitionSpec::StationaryAr1 { alpha, .. } => {
                Some(*alpha)
            }
        }
    }

    /// AR(1) form; an independent draw is the slope-zero case.
    pub fn ar1(&self, n: usize) -> Result<Ar1Spec> {
        Ok(match self {
            TransitionSpec::Independent { dist } => Ar1Spec {
                alpha: 0.0,
                noise: dist.grid(n)?,
            },
            TransitionSpec::Ar1 { alpha, noise } => Ar1Spec {
                alpha: *alpha,
                noise: noise.grid(n)?,
            },
            TransitionSpec::StationaryAr1 {
                alpha,
                mean,
                sd,
                width,
            } => {
                let s = sd * (1.0 - alpha * alpha).max(0.0).sqrt();
                let m = (1.0 - alpha) * mean;
                let noise = if s > 0.0 {
                    TypeGrid::truncated_gaussian(m, s, m - width * s, m + width * s, n)?
                } else {
                    TypeGrid::point_mass(m)
                };
                Ar1Spec {
                    alpha: *alpha,
                    noise,
                }
            }
        })
    }

    pub fn kernel(&self, from: &TypeGrid, n: usize) -> Result<MarkovKernel> {
        match self {
            TransitionSpec::Independent { dist } => MarkovKernel::independent(from.clone(), &dist.grid(n)?),
            _ => kernel_from_ar1(&self.ar1(n)?, from, n),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    pub n_theta: usize,
    pub n_price: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "mass_tol")]
    pub mass: f64,
    #[serde(default = "strict_tol")]
    pub strictness: f64,
    /// In price-grid steps.
    #[serde(default = "revenue_steps")]
    pub revenue: f64,
}

fn mass_tol() -> f64 {
    1e-12
}
fn strict_tol() -> f64 {
    1e-10
}
fn revenue_steps() -> f64 {
    2.0
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            mass: mass_tol(),
            strictness: strict_tol(),
            revenue: revenue_steps(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteSpec {
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
    pub pmf: Vec<Vec<f64>>,
    pub prices: Vec<f64>,
    #[serde(default)]
    pub kappa: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    pub model: ModelKind,
    pub delta: f64,
    #[serde(default)]
    pub prior: Option<DistSpec>,
    /// Two-period models; for complements this is the law after a rejection.
    #[serde(default)]
    pub transition: Option<TransitionSpec>,
    /// Complements only: law after an acceptance.
    #[serde(default)]
    pub accept_transition: Option<TransitionSpec>,
    /// Multi-period: one entry per later period.
    #[serde(default)]
    pub transitions: Option<Vec<TransitionSpec>>,
    #[serde(default)]
    pub discrete: Option<DiscreteSpec>,
    #[serde(default)]
    pub grids: Option<Grids>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
}

fn from_serde(e: serde_json::Error) -> Error {
    let msg = e.to_string();
    let field = ["missing field `", "unknown field `", "unknown variant `"]
        .iter()
        .find_map(|pre| {
            let start = msg.find(pre)? + pre.len();
            let len = msg[start..].find('`')?;
            Some(msg[start..start + len].to_string())
        });
    Error::validation(field.unwrap_or_else(|| "scenario".into()), msg)
}

/// Strict parse of a scenario document followed by validation.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    scenario_from_value(value)
}

pub fn scenario_from_value(value: Value) -> Result<Scenario> {
    let s: Scenario = serde_json::from_value(value).map_err(from_serde)?;
    s.validate()?;
    Ok(s)
}

/// Reads a scenario from disk, falling back to a bundled scenario of the
/// same name.
pub fn load_scenario(path: &str) -> Result<Scenario> {
    match std::fs::read_to_string(path) {
        Ok(text) => parse_scenario(&text),
        Err(e) => match super::bundled(path) {
            Some(text) => parse_scenario(text),
            None => Err(e.into()),
        },
    }
}

fn need<'a, T>(v: &'a Option<T>, path: &str) -> Result<&'a T> {
    v.as_ref()
        .ok_or_else(|| Error::validation(path, "required for this model"))
}

fn check_dist(d: &DistSpec, path: &str) -> Result<()> {
    let bad = |field: &str, msg: String| Err(Error::validation(format!("{path}.{field}"), msg));
    match d {
        DistSpec::Uniform { lo, hi } | DistSpec::TruncatedGaussian { lo, hi, .. } => {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return bad("hi", format!("need lo < hi, got [{lo}, {hi}]"));
            }
            if let DistSpec::TruncatedGaussian { mu, sigma, .. } = d {
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return bad("sigma", format!("{sigma} is not positive"));
                }
                if !mu.is_finite() {
                    return bad("mu", "must be finite".into());
                }
            }
        }
        DistSpec::Discrete { points, weights } => {
            if points.len() != weights.len() || points.is_empty() {
                return bad("weights", "one weight per point is required".into());
            }
        }
        DistSpec::PointMass { value } => {
            if !value.is_finite() {
                return bad("value", "must be finite".into());
            }
        }
    }
    Ok(())
}

fn check_transition(t: &TransitionSpec, path: &str) -> Result<()> {
    match t {
        TransitionSpec::Independent { dist } => check_dist(dist, &format!("{path}.dist")),
        TransitionSpec::Ar1 { alpha, noise } => {
            if !alpha.is_finite() {
                return Err(Error::validation(format!("{path}.alpha"), "must be finite"));
            }
            check_dist(noise, &format!("{path}.noise"))
        }
        TransitionSpec::StationaryAr1 {
            alpha, sd, width, ..
        } => {
            if !(alpha.is_finite() && alpha.abs() <= 1.0) {
                return Err(Error::validation(
                    format!("{path}.alpha"),
                    format!("{alpha} is outside [-1, 1]"),
                ));
            }
            if !(*sd > 0.0 && *width > 0.0) {
                return Err(Error::validation(format!("{path}.sd"), "sd and width must be positive"));
            }
            Ok(())
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::validation(
                "delta",
                format!("{} is outside (0, 1]", self.delta),
            ));
        }
        if let Some(g) = &self.grids {
            if g.n_theta < 2 {
                return Err(Error::validation("grids.n_theta", "must be at least 2"));
            }
            if g.n_price < 2 {
                return Err(Error::validation("grids.n_price", "must be at least 2"));
            }
        }
        let t = &self.tolerances;
        for (name, v) in [("mass", t.mass), ("strictness", t.strictness), ("revenue", t.revenue)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(format!("tolerances.{name}"), "must be >= 0"));
            }
        }
        match self.model {
            ModelKind::TwoPeriod | ModelKind::Complements => {
                check_dist(need(&self.prior, "prior")?, "prior")?;
                check_transition(need(&self.transition, "transition")?, "transition")?;
                if self.model == ModelKind::Complements {
                    let a = need(&self.accept_transition, "accept_transition")?;
                    check_transition(a, "accept_transition")?;
                }
            }
            ModelKind::MultiPeriod => {
                check_dist(need(&self.prior, "prior")?, "prior")?;
                let ts = need(&self.transitions, "transitions")?;
                if ts.is_empty() {
                    return Err(Error::validation("transitions", "need at least one transition"));
                }
                for (i, t) in ts.iter().enumerate() {
                    check_transition(t, &format!("transitions[{i}]"))?;
                }
            }
            ModelKind::Discrete => {
                need(&self.discrete, "discrete")?;
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| format!("{:?}", self.model))
    }

    pub fn grids(&self) -> Grids {
        self.grids.unwrap_or_else(|| {
            let n = if self.model == ModelKind::MultiPeriod {
                DEFAULT_MULTI_PERIOD_GRID
            } else {
                DEFAULT_TWO_PERIOD_GRID
            };
            Grids {
                n_theta: n,
                n_price: n,
            }
        })
    }

    /// Overrides both grid sizes.
    pub fn with_grid(mut self, n: usize) -> Result<Self> {
        self.grids = Some(Grids {
            n_theta: n,
            n_price: n,
        });
        self.validate()?;
        Ok(self)
    }

    /// Revenue tolerance in value units for a game with this price step.
    pub fn revenue_tol(&self, step: f64) -> f64 {
        self.tolerances.revenue * step
    }

    pub fn prior_grid(&self) -> Result<TypeGrid> {
        need(&self.prior, "prior")?.grid(self.grids().n_theta)
    }

    pub fn two_period_game(&self) -> Result<TwoPeriodGame> {
        let g = self.grids();
        match self.model {
            ModelKind::TwoPeriod => {
                let prior = self.prior_grid()?;
                let k = need(&self.transition, "transition")?.kernel(&prior, g.n_theta)?;
                TwoPeriodGame::baseline(k, self.delta, g.n_price)
            }
            ModelKind::Complements => {
                let prior = self.prior_grid()?;
                let n = g.n_theta;
                let rej = need(&self.transition, "transition")?.ar1(n)?;
                let acc = need(&self.accept_transition, "accept_transition")?.ar1(n)?;
                let (l0, h0) = ar1_range(&rej, &prior);
                let (l1, h1) = ar1_range(&acc, &prior);
                let (lo, hi) = (l0.min(l1), h0.max(h1));
                let pair = KernelPair::new(
                    kernel_from_ar1_on(&acc, &prior, lo, hi, n)?,
                    kernel_from_ar1_on(&rej, &prior, lo, hi, n)?,
                )?;
                TwoPeriodGame::new(pair, self.delta, g.n_price)
            }
            ModelKind::Discrete => self.discrete_game()?.to_two_period(),
            ModelKind::MultiPeriod => Err(Error::Unsupported(
                "multi_period scenarios have no two-period form".into(),
            )),
        }
    }

    pub fn multi_period_game(&self) -> Result<MultiPeriodGame> {
        if self.model != ModelKind::MultiPeriod {
            return Err(Error::Unsupported(format!("{:?} is not multi_period", self.model)));
        }
        let n = self.grids().n_theta;
        let prior = self.prior_grid()?;
        let specs = need(&self.transitions, "transitions")?
            .iter()
            .map(|t| t.ar1(n))
            .collect::<Result<Vec<_>>>()?;
        MultiPeriodGame::from_ar1(prior, &specs, self.delta, n)
    }

    pub fn discrete_game(&self) -> Result<DiscreteGame> {
        match self.model {
            ModelKind::Discrete => {
                let d = need(&self.discrete, "discrete")?;
                match &d.kappa {
                    Some(k) => DiscreteGame::with_kappa(
                        d.theta1.clone(),
                        d.theta2.clone(),
                        d.pmf.clone(),
                        d.prices.clone(),
                        self.delta,
                        k.clone(),
                    ),
                    None => DiscreteGame::new(
                        d.theta1.clone(),
                        d.theta2.clone(),
                        d.pmf.clone(),
                        d.prices.clone(),
                        self.delta,
                    ),
                }
            }
            ModelKind::TwoPeriod => {
                let g = self.two_period_game()?;
                let prices = g.prior().points().to_vec();
                DiscreteGame::from_two_period(&g, crate::model::merge_points(&prices, g.theta2()))
            }
            _ => Err(Error::Unsupported(format!(
                "{:?} scenarios have no discrete form",
                self.model
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EX1: &str = r#"{"model": "two_period", "delta": 1.0,
        "prior": {"kind": "uniform", "lo": 1, "hi": 2},
        "transition": {"kind": "independent", "dist": {"kind": "uniform", "lo": 1, "hi": 2}}}"#;

    #[test]
    fn parses_and_defaults() {
        let s = parse_scenario(EX1).unwrap();
        assert_eq!(s.grids().n_theta, DEFAULT_TWO_PERIOD_GRID);
        assert_eq!(s.tolerances, Tolerances::default());
        let g = s.with_grid(11).unwrap().two_period_game().unwrap();
        assert_eq!(g.prior().len(), 11);
    }

    #[test]
    fn missing_delta_names_the_field() {
        let text = EX1.replace(r#""delta": 1.0,"#, "");
        match parse_scenario(&text) {
            Err(Error::Validation { path, .. }) => assert_eq!(path, "delta"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn delta_out_of_range() {
        let text = EX1.replace("1.0", "1.5");
        match parse_scenario(&text) {
            Err(Error::Validation { path, message }) => {
                assert_eq!(path, "delta");
                assert!(message.contains("outside"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = EX1.replace(r#""delta": 1.0,"#, r#""delta": 1.0, "gamma": 2,"#);
        assert!(matches!(parse_scenario(&text), Err(Error::Validation { .. })));
        let text = EX1.replace(r#""lo": 1, "hi": 2}}"#, r#""lo": 1, "hi": 2, "x": 0}}"#);
        assert!(matches!(parse_scenario(&text), Err(Error::Validation { .. })));
        assert!(matches!(parse_scenario("{"), Err(Error::Parse(_))));
    }

    #[test]
    fn model_fields_required() {
        let text = r#"{"model": "complements", "delta": 1, "prior": {"kind": "uniform", "lo": 0, "hi": 1},
            "transition": {"kind": "ar1", "alpha": 0.5, "noise": {"kind": "uniform", "lo": 0, "hi": 1}}}"#;
        match parse_scenario(text) {
            Err(Error::Validation { path, .. }) => assert_eq!(path, "accept_transition"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stationary_marginal_matches_prior() {
        let t = TransitionSpec::StationaryAr1 {
            alpha: 0.5,
            mean: 1.5,
            sd: 0.2,
            width: 4.0,
        };
        let prior = TypeGrid::truncated_gaussian(1.5, 0.2, 0.7, 2.3, 201).unwrap();
        let k = t.kernel(&prior, 201).unwrap();
        let m = k.marginal();
        assert!((m.mean() - 1.5).abs() < 1e-3);
        let var = m.expect(|x| (x - 1.5) * (x - 1.5));
        assert!((var.sqrt() - 0.2).abs() < 5e-3, "{}", var.sqrt());
    }
}
