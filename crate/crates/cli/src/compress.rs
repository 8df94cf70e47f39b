//! `compress`: run the (l, δ, seed) grid and emit CSV + JSON reports.

use std::fs;

use povm_squeeze_core::io::{
    compression_csv_row, failed_cell_csv_row, CellOutcome, CellReport, EnvironmentStamp,
    RunReport, COMPRESS_CSV_HEADER,
};
use povm_squeeze_core::pipeline;
use rayon::prelude::*;

use crate::{apply_cap, load_config, CmdResult, Cli, Failure};

/// Builds the worker pool honoring `--workers`.
pub(crate) fn thread_pool(workers: Option<usize>) -> Result<rayon::ThreadPool, Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Failure::Runtime(format!("worker pool: {e}")))
}

pub(crate) fn run(cli: &Cli, seed_override: Option<u64>) -> CmdResult {
    let mut config = load_config(&cli.config)?;
    apply_cap(&mut config, cli.cap_dim);
    config
        .check_grid()
        .map_err(|e| Failure::Validation(format!("grid: {e}")))?;
    let problem = config
        .problem
        .resolve()
        .map_err(|e| Failure::Validation(format!("problem: {e}")))?;

    let cells = config.cells();
    let jobs: Vec<_> = cells
        .iter()
        .map(|&(l, delta, seed)| config.cell_config(l, delta, seed, seed_override))
        .collect();

    // Cells run concurrently; the order-preserving collect keeps the row
    // order fixed by the grid, not by completion.
    let pool = thread_pool(cli.workers)?;
    let runs: Vec<povm_squeeze_core::Result<pipeline::CompressionResult>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| pipeline::compress(&problem.rho, &problem.povm, job, problem.source.as_ref()))
            .collect()
    });

    let mut csv = String::from(COMPRESS_CSV_HEADER);
    csv.push('\n');
    let mut outcomes = Vec::with_capacity(cells.len());
    let mut successes = 0usize;
    for ((&(l, delta, seed), job), run) in cells.iter().zip(&jobs).zip(runs) {
        match run {
            Ok(result) => {
                let row = compression_csv_row(&problem.rho, &problem.povm, &result)
                    .map_err(|e| Failure::Runtime(format!("csv row l={l} δ={delta}: {e}")))?;
                csv.push_str(&row);
                csv.push('\n');
                let report = CellReport::from_result(&problem.rho, &problem.povm, &result)
                    .map_err(|e| Failure::Runtime(format!("report l={l} δ={delta}: {e}")))?;
                if result.success {
                    successes += 1;
                    println!(
                        "cell l={l} delta={delta} seed={}: rate {:.4} bits/site \
                         (defect {:.4}, M = {}, attempts {})",
                        job.seed, result.rate_bits, result.entropy_defect_bits,
                        result.m_selected, result.success_attempts
                    );
                } else {
                    println!(
                        "cell l={l} delta={delta} seed={}: selection failed after {} attempts",
                        job.seed,
                        result.attempts.len()
                    );
                }
                outcomes.push(CellOutcome {
                    l,
                    delta,
                    seed: job.seed,
                    report: Some(report),
                    error: None,
                });
            }
            Err(e) => {
                let eta = job.eta.unwrap_or(1.0 / (delta * delta));
                csv.push_str(&failed_cell_csv_row(l, delta, eta));
                csv.push('\n');
                println!("cell l={l} delta={delta} seed={seed}: error: {e}");
                outcomes.push(CellOutcome {
                    l,
                    delta,
                    seed: job.seed,
                    report: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }

    let report = RunReport { stamp: EnvironmentStamp::now(seed_override), cells: outcomes };
    fs::create_dir_all(&cli.out)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", cli.out.display())))?;
    let csv_path = cli.out.join(&config.output.csv);
    fs::write(&csv_path, &csv)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", csv_path.display())))?;
    let report_path = cli.out.join(&config.output.report);
    let report_text = serde_json::to_string_pretty(&report)
        .map_err(|e| Failure::Runtime(format!("report: {e}")))?;
    fs::write(&report_path, report_text)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", report_path.display())))?;

    println!(
        "{} cells, {} successful; wrote {} and {}",
        cells.len(),
        successes,
        csv_path.display(),
        report_path.display()
    );
    Ok(())
}
