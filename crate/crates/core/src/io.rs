//! JSON interchange formats and CSV report rows.
//!
//! Configs and reports travel as UTF-8 JSON; operators are serialized as
//! `{dim, entries: [[re, im], …]}` in row-major order so files stay
//! language-neutral and diff-friendly. CSV rows use '.' decimals at a fixed
//! 12 significant digits, which makes byte-for-byte comparison across
//! platforms meaningful; values a row cannot supply (a lower bound outside
//! its validity range, conditions of a failed run) appear as `NaN`.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, ChernoffReport};
use crate::error::{Error, Result};
use crate::linalg::{cplx, CMatrix};
use crate::pipeline::{CompressionConfig, CompressionResult, SourceData};
use crate::quantum::{
    canonical_ensemble, ensemble_average, DensityMatrix, Ensemble, FidelityMatrix, Povm,
};
use crate::tol;

/// A complex matrix as explicit dimension plus row-major [re, im] pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    /// Row and column count (operators here are square).
    pub dim: usize,
    /// Row-major entries as [re, im].
    pub entries: Vec<[f64; 2]>,
}

impl MatrixJson {
    /// Serializes a square matrix.
    pub fn from_matrix(m: &CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NonSquare { rows: m.nrows(), cols: m.ncols() });
        }
        let dim = m.nrows();
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push([m[(i, j)].re, m[(i, j)].im]);
            }
        }
        Ok(Self { dim, entries })
    }

    /// Reconstructs the matrix, checking the entry count.
    pub fn to_matrix(&self) -> Result<CMatrix> {
        if self.dim == 0 || self.entries.len() != self.dim * self.dim {
            return Err(Error::InvalidObject {
                object: "MatrixJson",
                context: format!(
                    "dim {} needs {} entries, found {}",
                    self.dim,
                    self.dim * self.dim,
                    self.entries.len()
                ),
            });
        }
        Ok(CMatrix::from_fn(self.dim, self.dim, |i, j| {
            let [re, im] = self.entries[i * self.dim + j];
            cplx(re, im)
        }))
    }
}

/// An ensemble as parallel priors and states.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleJson {
    /// Priors μ_i.
    pub probs: Vec<f64>,
    /// States σ_i.
    pub states: Vec<MatrixJson>,
}

impl EnsembleJson {
    /// Validates and builds the ensemble.
    pub fn to_ensemble(&self) -> Result<Ensemble> {
        let states: Result<Vec<DensityMatrix>> =
            self.states.iter().map(|s| DensityMatrix::new(s.to_matrix()?)).collect();
        Ensemble::new(self.probs.clone(), states?)
    }
}

/// The measurement problem: a state (directly or through an ensemble) and the
/// POVM to compress.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemSpec {
    /// The average state ρ, when given directly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<MatrixJson>,
    /// Source ensemble averaging to ρ (enables the statistical conditions).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleJson>,
    /// Estimation figure of merit F_ij (rows: source symbols, cols:
    /// outcomes). Defaults to the Kronecker delta when the ensemble size
    /// equals the outcome count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<Vec<Vec<f64>>>,
    /// POVM elements a_j.
    pub povm: Vec<MatrixJson>,
}

/// A parsed problem ready for the pipeline.
#[derive(Debug, Clone)]
pub struct ResolvedProblem {
    /// Average state.
    pub rho: DensityMatrix,
    /// Measurement to compress.
    pub povm: Povm,
    /// Source statistics, when an ensemble was supplied.
    pub source: Option<SourceData>,
}

impl ProblemSpec {
    /// Resolves the declared state/ensemble to a concrete (ρ, a, source).
    /// A supplied state and ensemble must agree entrywise to 1e-10.
    pub fn resolve(&self) -> Result<ResolvedProblem> {
        let elements: Result<Vec<CMatrix>> = self.povm.iter().map(|m| m.to_matrix()).collect();
        let povm = Povm::new(elements?)?;
        let ensemble = match &self.ensemble {
            Some(e) => Some(e.to_ensemble()?),
            None => None,
        };
        let rho = match (&self.state, &ensemble) {
            (Some(s), None) => DensityMatrix::new(s.to_matrix()?)?,
            (None, Some(e)) => ensemble_average(e)?,
            (Some(s), Some(e)) => {
                let direct = DensityMatrix::new(s.to_matrix()?)?;
                let avg = ensemble_average(e)?;
                let gap = (direct.matrix() - avg.matrix())
                    .iter()
                    .map(|x| x.norm())
                    .fold(0.0, f64::max);
                if gap > tol::NORM_CHECK {
                    return Err(Error::InvalidObject {
                        object: "ProblemSpec",
                        context: format!(
                            "state and ensemble average disagree by {gap:.3e}"
                        ),
                    });
                }
                direct
            }
            (None, None) => {
                return Err(Error::InvalidObject {
                    object: "ProblemSpec",
                    context: "need a state or an ensemble".into(),
                })
            }
        };
        if rho.dim() != povm.dim() {
            return Err(Error::DimensionMismatch {
                context: format!("state dim {} vs POVM dim {}", rho.dim(), povm.dim()),
            });
        }
        let source = match ensemble {
            Some(e) => {
                let fidelity = match &self.fidelity {
                    Some(rows) => {
                        let n = rows.len();
                        let m = rows.first().map(Vec::len).unwrap_or(0);
                        if n == 0 || rows.iter().any(|r| r.len() != m) {
                            return Err(Error::InvalidObject {
                                object: "ProblemSpec",
                                context: "fidelity rows must be nonempty and equal-length".into(),
                            });
                        }
                        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                        FidelityMatrix::new(DMatrix::from_row_slice(n, m, &flat))?
                    }
                    None if e.len() == povm.len() => FidelityMatrix::kronecker_delta(e.len()),
                    None => {
                        return Err(Error::InvalidObject {
                            object: "ProblemSpec",
                            context: format!(
                                "no fidelity given and no square default: {} states vs {} outcomes",
                                e.len(),
                                povm.len()
                            ),
                        })
                    }
                };
                if fidelity.n_states() != e.len() || fidelity.n_outcomes() != povm.len() {
                    return Err(Error::DimensionMismatch {
                        context: format!(
                            "fidelity is {}×{}, problem has {} states and {} outcomes",
                            fidelity.n_states(),
                            fidelity.n_outcomes(),
                            e.len(),
                            povm.len()
                        ),
                    });
                }
                Some(SourceData { ensemble: e, fidelity })
            }
            None => None,
        };
        Ok(ResolvedProblem { rho, povm, source })
    }
}

/// Experiment grid: the cross product of block lengths, widths, and seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    /// Block lengths l.
    pub l: Vec<usize>,
    /// Typicality widths δ.
    pub delta: Vec<f64>,
    /// Base seeds.
    pub seeds: Vec<u64>,
}

/// Optional knobs forwarded to the pipeline.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TargetSpec {
    /// Oversampling margin η (δ⁻² when unset).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Largest joint-marginal subset size ν for C5.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<usize>,
    /// Selection retry budget.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_attempts: Option<u32>,
    /// Fixed draw count overriding the α/β/c prescription.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_override: Option<u64>,
}

/// Tolerances the validation command applies to its input checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToleranceSpec {
    /// Allowed ‖Σ a_j − I‖ entrywise gap.
    #[serde(default = "default_completeness")]
    pub completeness: f64,
    /// Allowed |Σ μ_i − 1| gap.
    #[serde(default = "default_probability")]
    pub probability: f64,
}

fn default_completeness() -> f64 {
    tol::NORM_CHECK
}

fn default_probability() -> f64 {
    tol::NORM_CHECK
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self { completeness: default_completeness(), probability: default_probability() }
    }
}

/// Enumeration caps guarding the exponential stages.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CapSpec {
    /// Largest d^l the dense stages may form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap_dim: Option<usize>,
    /// Largest m^l the word enumerations may visit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap_words: Option<usize>,
}

/// Output file names, resolved relative to the output directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputSpec {
    /// JSON report file.
    #[serde(default = "default_report_name")]
    pub report: String,
    /// CSV results file.
    #[serde(default = "default_csv_name")]
    pub csv: String,
}

fn default_report_name() -> String {
    "report.json".into()
}

fn default_csv_name() -> String {
    "results.csv".into()
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { report: default_report_name(), csv: default_csv_name() }
    }
}

/// Full experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// The measurement problem.
    pub problem: ProblemSpec,
    /// Parameter grid.
    pub grid: GridSpec,
    /// Pipeline knobs.
    #[serde(default)]
    pub targets: TargetSpec,
    /// Validation tolerances.
    #[serde(default)]
    pub tolerances: ToleranceSpec,
    /// Enumeration caps.
    #[serde(default)]
    pub caps: CapSpec,
    /// Output file names.
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentConfig {
    /// Parses a config from JSON text.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.check_grid()?;
        Ok(config)
    }

    /// Reads and parses a config file.
    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Pretty-printed JSON.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Grid sanity: at least one l, one δ, one seed; l ≥ 1; δ > 0; seeds
    /// pairwise distinct.
    pub fn check_grid(&self) -> Result<()> {
        let g = &self.grid;
        if g.l.is_empty() || g.delta.is_empty() || g.seeds.is_empty() {
            return Err(Error::Config(
                "grid needs at least one l, one delta, and one seed".into(),
            ));
        }
        if g.l.iter().any(|&l| l == 0) {
            return Err(Error::Config("block lengths must be ≥ 1".into()));
        }
        if g.delta.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::Config("deltas must be positive".into()));
        }
        let mut sorted = g.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != g.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        Ok(())
    }

    /// Grid cells in fixed order: l outermost, then δ, then seed.
    pub fn cells(&self) -> Vec<(usize, f64, u64)> {
        let mut cells = Vec::new();
        for &l in &self.grid.l {
            for &delta in &self.grid.delta {
                for &seed in &self.grid.seeds {
                    cells.push((l, delta, seed));
                }
            }
        }
        cells
    }

    /// The pipeline config for one grid cell. A global seed override (the
    /// harness's `--seed` flag or seed env variable) replaces the cell seed.
    pub fn cell_config(&self, l: usize, delta: f64, seed: u64, override_seed: Option<u64>) -> CompressionConfig {
        let defaults = CompressionConfig::default();
        CompressionConfig {
            l,
            delta,
            eta: self.targets.eta,
            m_override: self.targets.m_override,
            seed: override_seed.unwrap_or(seed),
            nu: self.targets.nu.unwrap_or(defaults.nu),
            max_attempts: self.targets.max_attempts.unwrap_or(defaults.max_attempts),
            cap_dim: self.caps.cap_dim.unwrap_or(defaults.cap_dim),
            cap_words: self.caps.cap_words.unwrap_or(defaults.cap_words),
        }
    }
}

/// Serializable mirror of a stage-slack row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageSlackJson {
    pub stage: String,
    pub value: f64,
    pub budget: f64,
    pub ok: bool,
}

/// Serializable mirror of a verified proposition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropCheckJson {
    pub name: String,
    pub worst: f64,
    pub ok: bool,
}

/// Serializable mirror of the condition table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionJson {
    pub c0: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c2_half: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
}

/// Per-cell report: the scalar diagnostics of one compression run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellReport {
    pub l: usize,
    pub delta: f64,
    pub eta: f64,
    pub seed: u64,
    pub success: bool,
    pub success_attempts: u32,
    pub attempts: usize,
    pub support_dim: usize,
    pub effective_alphabet: usize,
    pub typical_words: usize,
    pub s_mass: f64,
    pub exact_alpha: f64,
    pub exact_beta: f64,
    pub c: f64,
    pub c_tilde: f64,
    pub eq12_delta_ok: bool,
    pub cutoff_rank: usize,
    pub omega_weight: f64,
    pub omega_weight_ok: bool,
    pub m_draws: u64,
    pub m_selected: usize,
    pub rate_bits: f64,
    pub entropy_defect_bits: f64,
    pub c3_budget: f64,
    pub stage_slacks: Vec<StageSlackJson>,
    pub prop_checks: Vec<PropCheckJson>,
    pub marginal_deviations: Vec<f64>,
    pub conditions: Option<ConditionJson>,
    /// Raw selection-size lower bound at ε = achieved C3 (None when the
    /// bound's validity range excludes ε or the run failed).
    pub thm3_raw_bits: Option<f64>,
    /// max(0, raw).
    pub thm3_lower_bits: Option<f64>,
}

/// The selection-size lower bound evaluated at this run's achieved C3, or
/// `None` when the run failed or ε falls outside the bound's validity range.
pub fn thm3_for_run(
    rho: &DensityMatrix,
    a: &Povm,
    result: &CompressionResult,
) -> Result<Option<bounds::Thm3Bound>> {
    let eps = match &result.conditions {
        Some(c) => c.c3,
        None => return Ok(None),
    };
    let canon = canonical_ensemble(rho, a)?;
    match bounds::thm3_lower_bound(
        canon.ensemble.probs(),
        canon.ensemble.states(),
        eps,
        canon.support_dim,
        result.l,
    ) {
        Ok(bound) => Ok(Some(bound)),
        Err(Error::LowerBoundInapplicable { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

impl CellReport {
    /// Collects the scalar diagnostics of a run, evaluating the lower bound
    /// at the achieved deviation.
    pub fn from_result(
        rho: &DensityMatrix,
        a: &Povm,
        result: &CompressionResult,
    ) -> Result<Self> {
        let thm3 = thm3_for_run(rho, a, result)?;
        Ok(Self {
            l: result.l,
            delta: result.delta,
            eta: result.eta,
            seed: result.seed,
            success: result.success,
            success_attempts: result.success_attempts,
            attempts: result.attempts.len(),
            support_dim: result.support_dim,
            effective_alphabet: result.effective_alphabet,
            typical_words: result.typical_words,
            s_mass: result.s_mass,
            exact_alpha: result.exact_alpha,
            exact_beta: result.exact_beta,
            c: result.c,
            c_tilde: result.c_tilde,
            eq12_delta_ok: result.eq12_delta_ok,
            cutoff_rank: result.cutoff_rank,
            omega_weight: result.omega_weight,
            omega_weight_ok: result.omega_weight_ok,
            m_draws: result.m_draws,
            m_selected: result.m_selected,
            rate_bits: result.rate_bits,
            entropy_defect_bits: result.entropy_defect_bits,
            c3_budget: result.c3_budget,
            stage_slacks: result
                .stage_slacks
                .iter()
                .map(|s| StageSlackJson {
                    stage: s.stage.to_string(),
                    value: s.value,
                    budget: s.budget,
                    ok: s.ok,
                })
                .collect(),
            prop_checks: result
                .prop_checks
                .iter()
                .map(|p| PropCheckJson { name: p.name.to_string(), worst: p.worst, ok: p.ok })
                .collect(),
            marginal_deviations: result.marginal_deviations.clone(),
            conditions: result.conditions.as_ref().map(|c| ConditionJson {
                c0: c.c0,
                c1: c.c1,
                c2: c.c2,
                c2_half: c.c2_half,
                c3: c.c3,
                c4: c.c4,
                c5: c.c5,
            }),
            thm3_raw_bits: thm3.map(|b| b.raw_bits),
            thm3_lower_bits: thm3.map(|b| b.clamped_bits),
        })
    }
}

/// Environment stamp embedded in reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvironmentStamp {
    /// Crate version.
    pub version: String,
    /// Seed override in effect, if any.
    pub seed_override: Option<u64>,
    /// Wall-clock seconds since the Unix epoch at emission.
    pub unix_time_secs: u64,
}

impl EnvironmentStamp {
    /// Stamps the current environment.
    pub fn now(seed_override: Option<u64>) -> Self {
        let unix_time_secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self { version: env!("CARGO_PKG_VERSION").to_string(), seed_override, unix_time_secs }
    }
}

/// One grid cell's outcome: a full report, or the error that stopped it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellOutcome {
    pub l: usize,
    pub delta: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<CellReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Full run report: stamp plus one entry per grid cell, in grid order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub stamp: EnvironmentStamp,
    pub cells: Vec<CellOutcome>,
}

/// Header of the per-cell results CSV.
pub const COMPRESS_CSV_HEADER: &str =
    "l,delta,eta,M,rate_bits,entropy_defect_bits,c3_deviation,c3_budget,thm3_lower_bits,success_attempts";

/// Header of the concentration Monte-Carlo CSV.
pub const CHERNOFF_CSV_HEADER: &str = "dimK,s,eta,M,trials,empirical_tail,bound";

/// Fixed 12-significant-digit scientific rendering; NaN stays literal.
pub fn csv_number(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.11e}")
    }
}

/// One results row. The C3 columns read NaN for failed runs; the lower-bound
/// column reads NaN whenever the bound does not apply.
pub fn compression_csv_row(
    rho: &DensityMatrix,
    a: &Povm,
    result: &CompressionResult,
) -> Result<String> {
    let c3 = result.conditions.as_ref().map(|c| c.c3).unwrap_or(f64::NAN);
    let thm3 = thm3_for_run(rho, a, result)?
        .map(|b| b.clamped_bits)
        .unwrap_or(f64::NAN);
    Ok(format!(
        "{},{},{},{},{},{},{},{},{},{}",
        result.l,
        csv_number(result.delta),
        csv_number(result.eta),
        result.m_selected,
        csv_number(result.rate_bits),
        csv_number(result.entropy_defect_bits),
        csv_number(c3),
        csv_number(result.c3_budget),
        csv_number(thm3),
        result.success_attempts,
    ))
}

/// The row recorded for a cell whose run ended in a hard error: no outcome
/// count, NaN statistics, zero attempts.
pub fn failed_cell_csv_row(l: usize, delta: f64, eta: f64) -> String {
    format!(
        "{},{},{},0,{nan},{nan},{nan},{nan},{nan},0",
        l,
        csv_number(delta),
        csv_number(eta),
        nan = "NaN"
    )
}

/// One Monte-Carlo summary row.
pub fn chernoff_csv_row(report: &ChernoffReport) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        report.dim_k,
        csv_number(report.s),
        csv_number(report.eta),
        report.m,
        report.trials,
        csv_number(report.empirical_tail),
        csv_number(report.bound),
    )
}
