//! `suite`: cross-module invariant checks with a pass/fail matrix.
//!
//! Runs the staged-construction propositions, the typicality bounds, the
//! entropy lemmas, the operator-concentration Monte Carlo, the projection
//! lemma, Holevo slacks and the dual identity on random triples, spectrum
//! conjugacy, and the compression chain. Every check is seeded from the
//! global seed so the pass matrix is reproducible.

use povm_squeeze_core::bounds::{
    dual_triple, entropy_lemma_checks, holevo_check, holevo_via_compression_chain,
    operator_chernoff_mc, LemmaSuiteConfig, Triple,
};
use povm_squeeze_core::io::ResolvedProblem;
use povm_squeeze_core::linalg::{self, diag_real, CMatrix};
use povm_squeeze_core::pipeline::{compress, CompressionConfig};
use povm_squeeze_core::quantum::{
    canonical_ensemble, spectrum_conjugacy_check, DensityMatrix, Ensemble, FidelityMatrix, Povm,
};
use povm_squeeze_core::typicality::{
    partial_trace_projection_lemma_check, typical_sequences, verify_deletion_monotonicity,
    verify_projector_bounds, DeletionCheck,
};
use povm_squeeze_core::tol;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::{apply_cap, CmdResult, Cli, Failure};

/// The built-in problem used when no config is supplied: the flat classical
/// qubit, whose invariants are all exactly attained.
fn builtin_problem() -> ResolvedProblem {
    let states = vec![
        DensityMatrix::new(diag_real(&[1.0, 0.0])).expect("valid state"),
        DensityMatrix::new(diag_real(&[0.0, 1.0])).expect("valid state"),
    ];
    let ensemble = Ensemble::new(vec![0.5, 0.5], states).expect("valid ensemble");
    ResolvedProblem {
        rho: DensityMatrix::new(diag_real(&[0.5, 0.5])).expect("valid state"),
        povm: Povm::computational(2),
        source: Some(povm_squeeze_core::pipeline::SourceData {
            fidelity: FidelityMatrix::kronecker_delta(ensemble.len()),
            ensemble,
        }),
    }
}

struct CheckRow {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn row(name: &'static str, outcome: povm_squeeze_core::Result<(bool, String)>) -> CheckRow {
    match outcome {
        Ok((passed, detail)) => CheckRow { name, passed, detail },
        Err(e) => CheckRow { name, passed: false, detail: format!("error: {e}") },
    }
}

fn random_triple(seed: u64, d: usize, n: usize, m: usize) -> povm_squeeze_core::Result<Triple> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut probs: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 1e-3).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    let states: povm_squeeze_core::Result<Vec<DensityMatrix>> =
        (0..n).map(|_| DensityMatrix::new(linalg::random::density(d, &mut rng))).collect();
    let povm = Povm::new(linalg::random::povm(d, m, &mut rng))?;
    Triple::new(Ensemble::new(probs, states?)?, povm)
}

pub(crate) fn run(cli: &Cli, seed_override: Option<u64>) -> CmdResult {
    let seed = seed_override.unwrap_or(0);
    let mut rows: Vec<CheckRow> = Vec::new();

    // Problem under test: the config's, or the built-in classical qubit.
    let (problem, cell, problem_valid) = match &cli.config {
        Some(_) => {
            let mut config = crate::load_config(&cli.config)?;
            apply_cap(&mut config, cli.cap_dim);
            let grid_ok = config.check_grid();
            match (grid_ok, config.problem.resolve()) {
                (Ok(()), Ok(problem)) => {
                    let (l, delta, cell_seed) = config.cells()[0];
                    let job = config.cell_config(l, delta, cell_seed, seed_override);
                    rows.push(CheckRow {
                        name: "problem-validity",
                        passed: true,
                        detail: format!("config problem, dim {}", problem.rho.dim()),
                    });
                    (Some(problem), job, true)
                }
                (grid, resolved) => {
                    let msg = grid
                        .err()
                        .map(|e| e.to_string())
                        .or_else(|| resolved.err().map(|e| e.to_string()))
                        .unwrap_or_default();
                    rows.push(CheckRow {
                        name: "problem-validity",
                        passed: false,
                        detail: msg,
                    });
                    (None, CompressionConfig::default(), false)
                }
            }
        }
        None => {
            let problem = builtin_problem();
            rows.push(CheckRow {
                name: "problem-validity",
                passed: true,
                detail: "built-in flat classical qubit".into(),
            });
            let job = CompressionConfig { l: 3, delta: 3.0, seed, ..Default::default() };
            (Some(problem), job, true)
        }
    };

    if let Some(problem) = &problem {
        let rho = &problem.rho;
        let a = &problem.povm;

        // Staged-construction propositions and stage budgets.
        rows.push(row(
            "props-1-4",
            compress(rho, a, &cell, problem.source.as_ref()).map(|r| {
                let props_ok = r.prop_checks.iter().all(|p| p.ok);
                let slacks_ok = r.stage_slacks.iter().all(|s| s.ok);
                let worst = r
                    .prop_checks
                    .iter()
                    .map(|p| p.worst)
                    .fold(f64::INFINITY, f64::min);
                (
                    r.success && props_ok && slacks_ok,
                    format!(
                        "success={} props_ok={props_ok} stages_ok={slacks_ok} worst margin {worst:.2e}",
                        r.success
                    ),
                )
            }),
        ));

        // Typical-projector mass bounds and typical-set mass.
        rows.push(row(
            "typicality-masses",
            (|| {
                let canon = canonical_ensemble(rho, a)?;
                let bounds =
                    verify_projector_bounds(rho, canon.ensemble.states(), cell.l, cell.delta)?;
                let t = typical_sequences(canon.ensemble.probs(), cell.l, cell.delta)?;
                let m = canon.ensemble.len() as f64;
                let s_bound = 1.0 - m / (cell.delta * cell.delta);
                let s_ok = t.mass >= s_bound;
                Ok((
                    bounds.eq_state_ok && bounds.eq_cond_ok && s_ok,
                    format!(
                        "state mass {:.6} ≥ {:.6}; conditional ok={}; S {:.6} ≥ {:.6}",
                        bounds.state_mass, bounds.eq_state_bound, bounds.eq_cond_ok, t.mass, s_bound
                    ),
                ))
            })(),
        ));

        // Deletion monotonicity where its standing assumption allows.
        rows.push(row(
            "deletion-monotonicity",
            (|| {
                let r = rho.min_support_eigenvalue();
                if r <= tol::WEIGHT {
                    return Ok((true, "skipped: state has a tiny eigenvalue".into()));
                }
                let delta = (2.0 / r).max(cell.delta) + 0.5;
                match verify_deletion_monotonicity(rho, cell.l.max(2), delta, 0)? {
                    DeletionCheck::Holds => Ok((true, format!("holds at delta {delta:.2}"))),
                    DeletionCheck::Fails { min_eig } => {
                        Ok((false, format!("fails: min eig {min_eig:.3e}")))
                    }
                    DeletionCheck::Skipped { required_delta } => {
                        Ok((true, format!("skipped: needs delta ≥ {required_delta:.2}")))
                    }
                }
            })(),
        ));

        // Compression chain on the problem's ensemble (when full rank).
        rows.push(row(
            "compression-chain",
            (|| {
                let source = match &problem.source {
                    Some(s) => s,
                    None => return Ok((true, "skipped: no ensemble in problem".into())),
                };
                if rho.rank() < rho.dim() {
                    return Ok((true, "skipped: rank-deficient average".into()));
                }
                let triple = Triple::new(source.ensemble.clone(), a.clone())?;
                let report = holevo_via_compression_chain(&triple, cell.l, &cell)?;
                let links_ok = report.links.iter().all(|link| link.ok);
                let worst = report
                    .links
                    .iter()
                    .map(|link| link.slack)
                    .fold(f64::INFINITY, f64::min);
                Ok((links_ok, format!("worst link slack {worst:.3e}")))
            })(),
        ));
    }

    // Entropy lemmas on random instances.
    rows.push(row(
        "entropy-lemmas-1-4",
        entropy_lemma_checks(&LemmaSuiteConfig { seed, instances: 50, d_max: 4 }).map(|reports| {
            let ok = reports.iter().all(|r| r.violations == 0);
            let worst = reports
                .iter()
                .map(|r| r.worst_slack)
                .fold(f64::INFINITY, f64::min);
            (ok, format!("worst slack {worst:.3e}"))
        }),
    ));

    // Operator concentration Monte Carlo.
    rows.push(row(
        "chernoff-concentration",
        operator_chernoff_mc(2, 0.25, 0.5, 64, 2000, seed).map(|r| {
            (r.ok, format!("tail {:.4} vs bound {:.4}", r.empirical_tail, r.bound))
        }),
    ));

    // Projection lemma on a random PSD operator.
    rows.push(row(
        "projection-lemma",
        (|| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x70_72_6f_6a);
            let c = linalg::random::psd(4, &mut rng);
            let pi = CMatrix::identity(4, 4);
            let pi0 = diag_real(&[1.0, 0.0]);
            let holds = partial_trace_projection_lemma_check(&c, &pi, &pi0)?;
            Ok((holds, "Tr₂(ΠCΠ) ≥ Tr₂((I⊗Π₀)C(I⊗Π₀))".into()))
        })(),
    ));

    // Holevo slacks and the dual identity on random triples.
    rows.push(row(
        "holevo-slacks",
        (|| {
            let mut worst = f64::INFINITY;
            for i in 0..100 {
                let t = random_triple(seed.wrapping_add(i), 2 + (i % 3) as usize, 3, 3)?;
                let hc = holevo_check(&t)?;
                worst = worst.min(hc.slack_ensemble).min(hc.slack_measurement);
            }
            Ok((worst >= -1e-9, format!("worst slack {worst:.3e} over 100 triples")))
        })(),
    ));
    rows.push(row(
        "dual-identity",
        (|| {
            let mut worst = 0.0f64;
            for i in 0..100 {
                let t = random_triple(seed.wrapping_add(1000 + i), 2 + (i % 3) as usize, 2, 3)?;
                let dual = dual_triple(&t)?;
                worst = worst.max(dual.i2_gap);
            }
            Ok((worst <= 1e-10, format!("worst entrywise gap {worst:.3e} over 100 triples")))
        })(),
    ));

    // Spectrum conjugacy of √ρ a √ρ and √a ρ √a.
    rows.push(row(
        "spectrum-conjugacy",
        (|| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x63_6f_6e_6a);
            let mut worst = 0.0f64;
            for _ in 0..100 {
                let d = rng.gen_range(2..=4);
                let rho = DensityMatrix::new(linalg::random::density(d, &mut rng))?;
                let elements = linalg::random::povm(d, 2, &mut rng);
                let check = spectrum_conjugacy_check(&rho, &elements[0])?;
                worst = worst.max(check.max_gap);
            }
            Ok((worst <= 1e-9, format!("worst spectral gap {worst:.3e} over 100 pairs")))
        })(),
    ));

    // Print the matrix and aggregate.
    let mut failed = Vec::new();
    for r in &rows {
        println!("{} {:<22} {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
        if !r.passed {
            failed.push(r.name);
        }
    }
    if !problem_valid {
        // A corrupt problem fails its named invariant; dependent checks were
        // skipped rather than reported as spurious failures.
        println!("note: problem-dependent checks skipped (invalid problem)");
    }
    if failed.is_empty() {
        println!("suite: all {} checks passed", rows.len());
        Ok(())
    } else {
        Err(Failure::Suite(format!("failed checks: {}", failed.join(", "))))
    }
}
