//! `chernoff-mc`: Monte-Carlo check of the operator concentration bound.

use std::fs;

use povm_squeeze_core::bounds::operator_chernoff_mc;
use povm_squeeze_core::io::{chernoff_csv_row, CHERNOFF_CSV_HEADER};
use povm_squeeze_core::Error;

use crate::{CmdResult, Cli, Failure};

#[allow(clippy::too_many_arguments)]
pub(crate) fn run(
    cli: &Cli,
    seed: u64,
    dim_k: usize,
    s: f64,
    eta: f64,
    m: u64,
    trials: u32,
) -> CmdResult {
    let report = operator_chernoff_mc(dim_k, s, eta, m, trials, seed).map_err(|e| match e {
        Error::Config(_) => Failure::Validation(e.to_string()),
        other => Failure::Runtime(other.to_string()),
    })?;

    println!(
        "dimK={} s={} eta={} M={} trials={} seed={}",
        report.dim_k, report.s, report.eta, report.m, report.trials, seed
    );
    println!(
        "empirical tail {:.6} ({} failures), bound {:.6}, 3σ margin {:.6}",
        report.empirical_tail,
        report.failures,
        report.bound,
        3.0 * report.std_error
    );

    fs::create_dir_all(&cli.out)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", cli.out.display())))?;
    let path = cli.out.join("chernoff.csv");
    let text = format!("{CHERNOFF_CSV_HEADER}\n{}\n", chernoff_csv_row(&report));
    fs::write(&path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    println!("wrote {}", path.display());

    if report.ok {
        println!("bound holds");
        Ok(())
    } else {
        Err(Failure::Suite(format!(
            "empirical tail {:.6} exceeds bound {:.6} + 3σ {:.6}",
            report.empirical_tail,
            report.bound,
            3.0 * report.std_error
        )))
    }
}
