//! `holevo`: information bounds, dual triple, and the compression chain for
//! the configured ensemble/measurement pair.

use std::fs;

use povm_squeeze_core::bounds::{
    dual_triple, holevo_check, holevo_via_compression_chain, ChainReport, Triple,
};
use serde::Serialize;

use crate::{apply_cap, load_config, CmdResult, Cli, Failure};

#[derive(Serialize)]
struct LinkJson {
    name: String,
    lhs: f64,
    rhs: f64,
    slack: f64,
    ok: bool,
}

#[derive(Serialize)]
struct ChainJson {
    l: usize,
    m_selected: usize,
    entropy_defect_bits: f64,
    rate_bits: f64,
    i_block_bits: f64,
    i_site_sum_bits: f64,
    f_block_bits: f64,
    f_single_bits: f64,
    eps_rate: f64,
    eps_fidelity: f64,
    marginal_consistency_gap: f64,
    links: Vec<LinkJson>,
}

impl ChainJson {
    fn from_report(r: &ChainReport) -> Self {
        Self {
            l: r.l,
            m_selected: r.m_selected,
            entropy_defect_bits: r.entropy_defect_bits,
            rate_bits: r.rate_bits,
            i_block_bits: r.i_block_bits,
            i_site_sum_bits: r.i_site_sum_bits,
            f_block_bits: r.f_block_bits,
            f_single_bits: r.f_single_bits,
            eps_rate: r.eps_rate,
            eps_fidelity: r.eps_fidelity,
            marginal_consistency_gap: r.marginal_consistency_gap,
            links: r
                .links
                .iter()
                .map(|link| LinkJson {
                    name: link.name.to_string(),
                    lhs: link.lhs,
                    rhs: link.rhs,
                    slack: link.slack,
                    ok: link.ok,
                })
                .collect(),
        }
    }
}

#[derive(Serialize)]
struct DualJson {
    i2_gap: f64,
    average_gap: f64,
}

#[derive(Serialize)]
struct HolevoJson {
    i_xy: f64,
    chi_ensemble: f64,
    chi_measurement: f64,
    slack_ensemble: f64,
    slack_measurement: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    dual: Option<DualJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dual_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    chain: Option<ChainJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    chain_error: Option<String>,
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
    let source = problem
        .source
        .as_ref()
        .ok_or_else(|| Failure::Validation("holevo needs an ensemble in the problem".into()))?;
    let triple = Triple::new(source.ensemble.clone(), problem.povm.clone())
        .map_err(|e| Failure::Validation(format!("triple: {e}")))?;

    let check = holevo_check(&triple).map_err(|e| Failure::Runtime(e.to_string()))?;
    println!("I(X∧Y)              = {:.6} bits", check.i_xy);
    println!("χ (ensemble side)   = {:.6} bits (slack {:+.3e})", check.chi_ensemble, check.slack_ensemble);
    println!("χ (measurement side)= {:.6} bits (slack {:+.3e})", check.chi_measurement, check.slack_measurement);

    // Dual triple: rank deficiency is reported, not fatal.
    let (dual, dual_error) = match dual_triple(&triple) {
        Ok(d) => {
            println!(
                "dual triple         : joint identity gap {:.3e}, average gap {:.3e}",
                d.i2_gap, d.average_gap
            );
            (Some(DualJson { i2_gap: d.i2_gap, average_gap: d.average_gap }), None)
        }
        Err(e) => {
            println!("dual triple         : unavailable ({e})");
            (None, Some(e.to_string()))
        }
    };

    // Compression chain on the first grid cell.
    let (l, delta, cell_seed) = config.cells()[0];
    let job = config.cell_config(l, delta, cell_seed, seed_override);
    let (chain, chain_error) = match holevo_via_compression_chain(&triple, l, &job) {
        Ok(report) => {
            println!(
                "chain (l = {l})      : defect {:.4} ≥? rate {:.4} ≥ block {:.4} ≥ sites {:.4} ≥ F(A) {:.4}; F(a) = {:.4}",
                report.entropy_defect_bits,
                report.rate_bits,
                report.i_block_bits,
                report.i_site_sum_bits,
                report.f_block_bits,
                report.f_single_bits
            );
            for link in &report.links {
                println!(
                    "  {} {}  (slack {:+.3e})",
                    if link.ok { "ok " } else { "BAD" },
                    link.name,
                    link.slack
                );
            }
            (Some(ChainJson::from_report(&report)), None)
        }
        Err(e) => {
            println!("chain (l = {l})      : unavailable ({e})");
            (None, Some(e.to_string()))
        }
    };

    let report = HolevoJson {
        i_xy: check.i_xy,
        chi_ensemble: check.chi_ensemble,
        chi_measurement: check.chi_measurement,
        slack_ensemble: check.slack_ensemble,
        slack_measurement: check.slack_measurement,
        dual,
        dual_error,
        chain,
        chain_error,
    };
    fs::create_dir_all(&cli.out)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", cli.out.display())))?;
    let path = cli.out.join("holevo.json");
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| Failure::Runtime(format!("report: {e}")))?;
    fs::write(&path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}
