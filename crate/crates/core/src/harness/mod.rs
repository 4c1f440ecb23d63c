//! Scenario files, the example registry, parameter sweeps and brute-force
//! oracles.

pub mod commands;
mod oracle;
mod reproduce;
mod scenario;
mod sweep;

pub use oracle::{oracle_bruteforce, OracleAnswer, OracleQuery, MAX_EVALUATIONS};
pub use reproduce::{reproduce, Check, ReproduceReport, EXAMPLE_IDS};
pub use scenario::{
    load_scenario, parse_scenario, scenario_from_value, DiscreteSpec, DistSpec, Grids, ModelKind,
    Scenario, Tolerances, TransitionSpec, DEFAULT_MULTI_PERIOD_GRID, DEFAULT_TWO_PERIOD_GRID,
};
pub use sweep::{parse_sweep, sweep, sweep_csv, SweepOutput, SweepRow, SweepSpec};

use crate::error::Error;

/// Scenarios shipped with the crate, by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("example1", include_str!("../../scenarios/example1.json")),
    ("example1_small", include_str!("../../scenarios/example1_small.json")),
    ("example2_d1", include_str!("../../scenarios/example2_d1.json")),
    ("example3_negative", include_str!("../../scenarios/example3_negative.json")),
    ("example4_substitutes", include_str!("../../scenarios/example4_substitutes.json")),
    ("fig1_ar1", include_str!("../../scenarios/fig1_ar1.json")),
    ("ar1_small", include_str!("../../scenarios/ar1_small.json")),
    ("complements_small", include_str!("../../scenarios/complements_small.json")),
    ("multi_ar1", include_str!("../../scenarios/multi_ar1.json")),
    ("fig1.sweep", include_str!("../../scenarios/fig1.sweep.json")),
];

/// Bundled document by name, with or without a `.json` suffix.
pub fn bundled(name: &str) -> Option<&'static str> {
    let key = name.strip_suffix(".json").unwrap_or(name);
    BUNDLED.iter().find(|(n, _)| *n == key).map(|(_, t)| *t)
}

/// Process exit code for an error: 2 for failed assertions, 3 for bad
/// input, 1 for anything the solvers could not handle.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::AssertionFailure(_) => 2,
        Error::Validation { .. }
        | Error::Parse(_)
        | Error::InvalidBounds { .. }
        | Error::InvalidGrid(_)
        | Error::NotOnGrid(_)
        | Error::GridMismatch(_)
        | Error::Io(_) => 3,
        _ => 1,
    }
}
