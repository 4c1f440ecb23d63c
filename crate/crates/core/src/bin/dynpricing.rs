use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use dynpricing::harness::{
    bundled, commands, exit_code, load_scenario, oracle_bruteforce, parse_sweep, reproduce, sweep,
    sweep_csv, OracleQuery, Scenario,
};
use dynpricing::{Error, Result};

#[derive(Parser)]
#[command(name = "dynpricing", version, about = "Dynamic pricing with limited commitment")]
struct Cli {
    /// Write the JSON result here as well as to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write tabular results (sweeps) as CSV.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Override both grid sizes.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Assumption reports.
    Check { scenario: String },
    /// Monopoly price of every period's marginal.
    Monopoly { scenario: String },
    /// Relaxed mechanism-design bound.
    Relax { scenario: String },
    /// Best revenue with full commitment.
    Commit { scenario: String },
    /// Seller-optimal equilibrium and its verification.
    Equilibrium { scenario: String },
    /// Every pure-strategy equilibrium of a finite game.
    Enumerate {
        scenario: String,
        /// Allow any off-path belief instead of boundary types.
        #[arg(long)]
        unrestricted: bool,
    },
    /// Backward induction over purchase histories.
    Multi {
        scenario: String,
        /// Remove the option to commit at later histories.
        #[arg(long)]
        no_commit: bool,
    },
    /// One-parameter sweep.
    Sweep { scenario: String, sweepspec: String },
    /// Re-run a named example and check its numbers.
    Reproduce { id: String },
    /// Brute-force answer to a query.
    Oracle { scenario: String, query: String },
}

fn scenario(cli: &Cli, path: &str) -> Result<Scenario> {
    let mut s = load_scenario(path)?;
    if let Some(n) = cli.grid {
        s = s.with_grid(n)?;
    }
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    Ok(s)
}

fn run(cli: &Cli) -> Result<(Value, Option<String>, bool)> {
    let mut csv = None;
    let mut ok = true;
    let value = match &cli.cmd {
        Cmd::Check { scenario: p } => commands::check(&scenario(cli, p)?)?,
        Cmd::Monopoly { scenario: p } => commands::monopoly(&scenario(cli, p)?)?,
        Cmd::Relax { scenario: p } => commands::relax(&scenario(cli, p)?)?,
        Cmd::Commit { scenario: p } => commands::commit(&scenario(cli, p)?)?,
        Cmd::Equilibrium { scenario: p } => commands::equilibrium(&scenario(cli, p)?)?,
        Cmd::Enumerate {
            scenario: p,
            unrestricted,
        } => commands::enumerate(&scenario(cli, p)?, *unrestricted)?,
        Cmd::Multi {
            scenario: p,
            no_commit,
        } => commands::multi(&scenario(cli, p)?, !no_commit)?,
        Cmd::Sweep {
            scenario: p,
            sweepspec,
        } => {
            let s = scenario(cli, p)?;
            let text = match std::fs::read_to_string(sweepspec) {
                Ok(t) => t,
                Err(e) => bundled(sweepspec).ok_or(Error::Io(e))?.to_string(),
            };
            let rows = sweep(&s, &parse_sweep(&text)?)?;
            csv = Some(sweep_csv(&rows)?);
            json!({ "scenario": s.label(), "rows": rows })
        }
        Cmd::Reproduce { id } => {
            let r = reproduce(id, cli.grid)?;
            ok = r.passed;
            if !ok {
                eprintln!("assertion failure: {}", r.diff());
            }
            if !r.rows.is_empty() {
                csv = Some(sweep_csv(&r.rows)?);
            }
            serde_json::to_value(&r).expect("report serializes")
        }
        Cmd::Oracle { scenario: p, query } => {
            let s = scenario(cli, p)?;
            let q: OracleQuery = query.parse()?;
            serde_json::to_value(oracle_bruteforce(&s, &q)?).expect("answer serializes")
        }
    };
    Ok((value, csv, ok))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    let result = run(&cli).and_then(|(value, csv, ok)| {
        let text = serde_json::to_string_pretty(&value).expect("json") + "\n";
        print!("{text}");
        if let Some(path) = &cli.out {
            std::fs::write(path, &text)?;
        }
        if let (Some(path), Some(csv)) = (&cli.csv, csv) {
            std::fs::write(path, csv)?;
        }
        Ok(ok)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
