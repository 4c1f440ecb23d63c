//! Command bodies shared by the CLI and the bindings. Each returns the
//! JSON document the CLI prints.

use serde_json::{json, Value};

use super::scenario::{ModelKind, Scenario};
use crate::assumptions::{
    check_ar1_chain, check_complement, check_lipschitz, check_lipschitz_pair, check_mlrp,
    check_mlrp_pair, check_regularity, check_regularity_pair,
};
use crate::equilibrium::{enumerate_discrete, solve_multi_period, solve_pbe_star, verify_equilibrium, Refinement};
use crate::error::Result;
use crate::mechanism::{
    benchmark_multi_period, benchmark_two_period, commitment_optimum, solve_relaxed, Relaxation,
};
use crate::pricing::monopoly_price;

pub fn check(s: &Scenario) -> Result<Value> {
    let reports = match s.model {
        ModelKind::TwoPeriod => {
            let g = s.two_period_game()?;
            let k = &g.kernels.reject;
            vec![
                check_mlrp(k, true),
                check_lipschitz(k, g.delta),
                check_regularity(g.prior(), k)?,
            ]
        }
        ModelKind::Complements => {
            let g = s.two_period_game()?;
            let p = &g.kernels;
            vec![
                check_mlrp_pair(p, true),
                check_lipschitz_pair(p, g.delta),
                check_regularity_pair(g.prior(), p)?,
                check_complement(&p.reject, &p.accept)?,
            ]
        }
        ModelKind::MultiPeriod => {
            let g = s.multi_period_game()?;
            let n = s.grids().n_theta;
            let specs = s
                .transitions
                .as_ref()
                .expect("validated")
                .iter()
                .map(|t| t.ar1(n))
                .collect::<Result<Vec<_>>>()?;
            let alphas: Vec<f64> = specs.iter().map(|a| a.alpha).collect();
            let noises: Vec<_> = specs.iter().map(|a| &a.noise).collect();
            let mut out = vec![check_ar1_chain(&g.prior, &alphas, &noises, g.delta)?];
            for k in &g.transitions {
                out.push(check_mlrp(k, true));
                out.push(check_lipschitz(k, g.delta));
            }
            out
        }
        ModelKind::Discrete => {
            let g = s.two_period_game()?;
            vec![
                check_mlrp_pair(&g.kernels, false),
                check_lipschitz_pair(&g.kernels, g.delta),
            ]
        }
    };
    let holds = reports.iter().all(|r| r.holds);
    Ok(json!({ "scenario": s.label(), "holds": holds, "reports": reports }))
}

pub fn monopoly(s: &Scenario) -> Result<Value> {
    let periods: Vec<_> = if s.model == ModelKind::MultiPeriod {
        let g = s.multi_period_game()?;
        (0..g.horizon()).map(|t| monopoly_price(g.marginal(t))).collect()
    } else {
        let g = s.two_period_game()?;
        vec![monopoly_price(g.prior()), monopoly_price(g.kernels.reject.marginal())]
    };
    Ok(json!({ "scenario": s.label(), "periods": periods }))
}

pub fn relax(s: &Scenario) -> Result<Value> {
    if s.model == ModelKind::MultiPeriod {
        let g = s.multi_period_game()?;
        let r = Relaxation::multi_period(&g)?.solve();
        return Ok(json!({
            "scenario": s.label(),
            "relaxed": r,
            "benchmark": benchmark_multi_period(&g),
        }));
    }
    let g = s.two_period_game()?;
    Ok(json!({
        "scenario": s.label(),
        "relaxed": solve_relaxed(&g)?,
        "benchmark": benchmark_two_period(&g),
    }))
}

pub fn commit(s: &Scenario) -> Result<Value> {
    let g = s.two_period_game()?;
    Ok(json!({
        "scenario": s.label(),
        "commitment": commitment_optimum(&g),
        "benchmark": benchmark_two_period(&g),
    }))
}

pub fn equilibrium(s: &Scenario) -> Result<Value> {
    let g = s.two_period_game()?;
    let out = solve_pbe_star(&g)?;
    let report = verify_equilibrium(&out, &g);
    Ok(json!({
        "scenario": s.label(),
        "equilibrium": out,
        "verification": report,
        "benchmark": benchmark_two_period(&g),
    }))
}

pub fn enumerate(s: &Scenario, unrestricted: bool) -> Result<Value> {
    let filter = if unrestricted {
        Refinement::Unrestricted
    } else {
        Refinement::PbeStar
    };
    let out = enumerate_discrete(&s.discrete_game()?, filter)?;
    Ok(json!({ "scenario": s.label(), "refinement": filter, "equilibria": out }))
}

pub fn multi(s: &Scenario, commit: bool) -> Result<Value> {
    let g = s.multi_period_game()?;
    let out = solve_multi_period(&g, commit)?;
    Ok(json!({ "scenario": s.label(), "outcome": out, "benchmark": benchmark_multi_period(&g) }))
}
