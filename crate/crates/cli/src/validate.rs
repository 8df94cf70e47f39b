//! `validate`: schema, grid, and problem checks with targeted diagnostics.

use povm_squeeze_core::linalg::{min_eigenvalue, CMatrix};
use povm_squeeze_core::quantum::DensityMatrix;
use povm_squeeze_core::tol;

use crate::{load_config, CmdResult, Cli, Failure};

/// Runs every input check, printing one `ok:` line per passed check. The
/// first failed check aborts with exit code 2 and a diagnostic naming the
/// violated property (completeness, probability, state validity, …).
pub(crate) fn run(cli: &Cli) -> CmdResult {
    let config = load_config(&cli.config)?;
    config
        .check_grid()
        .map_err(|e| Failure::Validation(format!("grid: {e}")))?;
    println!(
        "ok: grid ({} l × {} delta × {} seeds = {} cells)",
        config.grid.l.len(),
        config.grid.delta.len(),
        config.grid.seeds.len(),
        config.cells().len()
    );

    let spec = &config.problem;
    if spec.povm.is_empty() {
        return Err(Failure::Validation("completeness: POVM has no elements".into()));
    }

    // POVM elements: square, Hermitian, PSD, and complete.
    let mut sum: Option<CMatrix> = None;
    for (j, mj) in spec.povm.iter().enumerate() {
        let a = mj
            .to_matrix()
            .map_err(|e| Failure::Validation(format!("povm element {j}: {e}")))?;
        // The eigensolve validates self-adjointness as a side effect.
        let min = min_eigenvalue(&a)
            .map_err(|e| Failure::Validation(format!("povm element {j}: {e}")))?;
        if min < -tol::PSD_ERROR {
            return Err(Failure::Validation(format!(
                "povm element {j}: not positive semidefinite (min eigenvalue {min:.3e})"
            )));
        }
        sum = Some(match sum {
            Some(s) => s + a,
            None => a,
        });
    }
    let sum = sum.expect("nonempty POVM");
    let dim = sum.nrows();
    let completeness_gap = (&sum - CMatrix::identity(dim, dim))
        .iter()
        .map(|x| x.norm())
        .fold(0.0, f64::max);
    if completeness_gap > config.tolerances.completeness {
        return Err(Failure::Validation(format!(
            "completeness: POVM elements sum to I only up to {completeness_gap:.3e} \
             (allowed {:.3e})",
            config.tolerances.completeness
        )));
    }
    println!(
        "ok: povm ({} elements, dim {dim}, completeness gap {completeness_gap:.3e})",
        spec.povm.len()
    );

    // State, when given directly.
    if let Some(state) = &spec.state {
        let m = state
            .to_matrix()
            .map_err(|e| Failure::Validation(format!("state: {e}")))?;
        DensityMatrix::new(m).map_err(|e| Failure::Validation(format!("state: {e}")))?;
        println!("ok: state (dim {dim})");
    }

    // Ensemble priors and states.
    if let Some(ensemble) = &spec.ensemble {
        if let Some(&bad) = ensemble.probs.iter().find(|&&p| p < 0.0) {
            return Err(Failure::Validation(format!(
                "probability: negative prior {bad:.3e}"
            )));
        }
        let total: f64 = ensemble.probs.iter().sum();
        if (total - 1.0).abs() > config.tolerances.probability {
            return Err(Failure::Validation(format!(
                "probability: priors sum to {total} (allowed gap {:.3e})",
                config.tolerances.probability
            )));
        }
        for (i, s) in ensemble.states.iter().enumerate() {
            let m = s
                .to_matrix()
                .map_err(|e| Failure::Validation(format!("ensemble state {i}: {e}")))?;
            DensityMatrix::new(m)
                .map_err(|e| Failure::Validation(format!("ensemble state {i}: {e}")))?;
        }
        println!(
            "ok: ensemble ({} states, prior sum gap {:.3e})",
            ensemble.probs.len(),
            (total - 1.0).abs()
        );
    }

    // Cross-object consistency (dimensions, fidelity shape, state-vs-average).
    let problem = config
        .problem
        .resolve()
        .map_err(|e| Failure::Validation(format!("problem: {e}")))?;
    println!(
        "ok: problem (rho rank {}/{}, source data {})",
        problem.rho.rank(),
        problem.rho.dim(),
        if problem.source.is_some() { "present" } else { "absent" }
    );
    Ok(())
}
