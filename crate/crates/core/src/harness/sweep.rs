//! One-parameter sweeps over a scenario, written as CSV.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::scenario::{scenario_from_value, Scenario};
use crate::equilibrium::solve_pbe_star;
use crate::error::{Error, Result};
use crate::mechanism::{benchmark_two_period, commitment_optimum};
use crate::pricing::monopoly_price;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOutput {
    Commitment,
    Equilibrium,
    Benchmark,
}

fn all_outputs() -> Vec<SweepOutput> {
    vec![
        SweepOutput::Commitment,
        SweepOutput::Equilibrium,
        SweepOutput::Benchmark,
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Dotted path into the scenario document, e.g. `transition.alpha`.
    pub parameter: String,
    pub values: Vec<f64>,
    #[serde(default = "all_outputs")]
    pub outputs: Vec<SweepOutput>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: f64,
    pub p_star: Option<f64>,
    pub p_a_commit: Option<f64>,
    pub p_r_commit: Option<f64>,
    pub p_a_eq: Option<f64>,
    pub p_r_eq: Option<f64>,
    pub benchmark: Option<f64>,
    pub commit_revenue: Option<f64>,
    pub eq_revenue: Option<f64>,
    pub error: Option<String>,
}

pub fn parse_sweep(text: &str) -> Result<SweepSpec> {
    let spec: SweepSpec = serde_json::from_str(text).map_err(|e| {
        if e.is_syntax() || e.is_eof() {
            Error::Parse(e.to_string())
        } else {
            Error::validation("sweep", e.to_string())
        }
    })?;
    if spec.values.is_empty() {
        return Err(Error::validation("sweep.values", "no values to sweep"));
    }
    if let Some(v) = spec.values.iter().find(|v| !v.is_finite()) {
        return Err(Error::validation("sweep.values", format!("{v} is not finite")));
    }
    Ok(spec)
}

fn pointer(path: &str) -> String {
    let path = match path.strip_prefix("ar1.") {
        Some(rest) => format!("transition.{rest}"),
        None => path.to_string(),
    };
    path.split('.').fold(String::new(), |mut acc, seg| {
        acc.push('/');
        acc.push_str(seg);
        acc
    })
}

/// Scenario with the swept parameter set to `value`, revalidated.
fn with_value(base: &Value, parameter: &str, value: f64) -> Result<Scenario> {
    let mut doc = base.clone();
    let slot = doc
        .pointer_mut(&pointer(parameter))
        .ok_or_else(|| Error::validation(parameter, "no such scenario field"))?;
    if !slot.is_number() {
        return Err(Error::validation(parameter, "swept field must be numeric"));
    }
    *slot = serde_json::json!(value);
    scenario_from_value(doc)
}

fn row(s: &Scenario, param: f64, outputs: &[SweepOutput]) -> SweepRow {
    let mut r = SweepRow {
        param,
        ..Default::default()
    };
    let game = match s.two_period_game() {
        Ok(g) => g,
        Err(e) => {
            r.error = Some(e.to_string());
            return r;
        }
    };
    r.p_star = Some(monopoly_price(game.kernels.reject.marginal()).price);
    if outputs.contains(&SweepOutput::Benchmark) {
        r.benchmark = Some(benchmark_two_period(&game).total);
    }
    if outputs.contains(&SweepOutput::Commitment) {
        let c = commitment_optimum(&game);
        r.p_a_commit = Some(c.p_accept);
        r.p_r_commit = Some(c.p_reject);
        r.commit_revenue = Some(c.revenue);
    }
    if outputs.contains(&SweepOutput::Equilibrium) {
        match solve_pbe_star(&game) {
            Ok(e) => {
                r.p_a_eq = Some(e.p_accept);
                r.p_r_eq = Some(e.p_reject);
                r.eq_revenue = Some(e.revenue);
            }
            Err(e) => r.error = Some(e.to_string()),
        }
    }
    r
}

/// One row per value, ascending. Rows are solved in parallel; a failing row
/// records its error instead of stopping the sweep.
pub fn sweep(scenario: &Scenario, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    let base = serde_json::to_value(scenario).map_err(|e| Error::Parse(e.to_string()))?;
    let mut values = spec.values.clone();
    values.sort_by(f64::total_cmp);
    let scenarios = values
        .iter()
        .map(|&v| with_value(&base, &spec.parameter, v))
        .collect::<Result<Vec<_>>>()?;
    Ok(scenarios
        .par_iter()
        .zip(&values)
        .map(|(s, &v)| row(s, v, &spec.outputs))
        .collect())
}

pub const CSV_HEADER: [&str; 10] = [
    "param",
    "p_star",
    "p_A_commit",
    "p_R_commit",
    "p_A_eq",
    "p_R_eq",
    "benchmark",
    "commit_revenue",
    "eq_revenue",
    "error",
];

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.param.to_string(),
            f(r.p_star),
            f(r.p_a_commit),
            f(r.p_r_commit),
            f(r.p_a_eq),
            f(r.p_r_eq),
            f(r.benchmark),
            f(r.commit_revenue),
            f(r.eq_revenue),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{bundled, parse_scenario};

    fn small() -> Scenario {
        parse_scenario(bundled("ar1_small").unwrap()).unwrap()
    }

    #[test]
    fn rows_sorted_and_csv_shape() {
        let spec = SweepSpec {
            parameter: "ar1.alpha".into(),
            values: vec![0.6, 0.3],
            outputs: all_outputs(),
        };
        let rows = sweep(&small(), &spec).unwrap();
        assert_eq!(rows.iter().map(|r| r.param).collect::<Vec<_>>(), [0.3, 0.6]);
        let csv = sweep_csv(&rows).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER.join(","));
        assert_eq!(lines.len(), 3);
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn bad_values_are_validation_errors() {
        let spec = SweepSpec {
            parameter: "delta".into(),
            values: vec![1.5],
            outputs: all_outputs(),
        };
        assert!(matches!(sweep(&small(), &spec), Err(Error::Validation { .. })));
        let spec = SweepSpec {
            parameter: "transition.beta".into(),
            values: vec![0.5],
            outputs: all_outputs(),
        };
        assert!(matches!(sweep(&small(), &spec), Err(Error::Validation { .. })));
    }

    #[test]
    fn outputs_select_columns() {
        let spec = SweepSpec {
            parameter: "transition.sd".into(),
            values: vec![0.25],
            outputs: vec![SweepOutput::Benchmark],
        };
        let rows = sweep(&small(), &spec).unwrap();
        assert!(rows[0].error.is_none());
        assert!(rows[0].p_a_commit.is_none());
    }
}
