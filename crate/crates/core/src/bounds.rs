//! Information-theoretic bounds and checkers.
//!
//! A state ensemble together with a measurement defines a classical joint
//! distribution P(i, j) = μ_i·Tr(σ_i a_j). This module evaluates the mutual
//! information of that distribution, the two Holevo-type bounds it obeys
//! (through the ensemble's entropy defect and through the canonical ensemble
//! of the average state and the measurement), the dual-triple construction
//! that exchanges the roles of ensemble and measurement, a selection-size
//! lower bound, entropy-inequality spot checks, an operator-Chernoff Monte
//! Carlo, and the end-to-end chain of classical inequalities that squeezes
//! the compressed-measurement rate between the entropy defect and the
//! mutual-information fidelity.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, loewner_leq, min_eigenvalue, partial_trace, re, trace_norm, CMatrix};
use crate::pipeline::{self, CompressionConfig, CompressionResult};
use crate::quantum::{
    canonical_ensemble, ensemble_average, entropy_defect, entropy_of_weights,
    pretty_good_measurement, DensityMatrix, Ensemble, Povm,
};
use crate::tol;
use crate::typicality::{check_cap, filtered_words};

/// Ensemble/measurement pair defining a classical joint distribution.
#[derive(Debug, Clone)]
pub struct Triple {
    /// States σ_i with priors μ_i.
    pub ensemble: Ensemble,
    /// Measurement elements a_j.
    pub povm: Povm,
}

impl Triple {
    /// Validates that the ensemble and measurement share a dimension.
    pub fn new(ensemble: Ensemble, povm: Povm) -> Result<Self> {
        if ensemble.dim() != povm.dim() {
            return Err(Error::DimensionMismatch {
                context: format!("ensemble dim {} vs POVM dim {}", ensemble.dim(), povm.dim()),
            });
        }
        Ok(Self { ensemble, povm })
    }

    /// Average state ρ = Σ_i μ_i σ_i.
    pub fn average(&self) -> Result<DensityMatrix> {
        ensemble_average(&self.ensemble)
    }
}

/// Classical joint distribution with nonnegative entries summing to 1.
#[derive(Debug, Clone)]
pub struct JointDistribution {
    p: DMatrix<f64>,
}

impl JointDistribution {
    /// Validates nonnegativity (entries ≥ −1e-12 are clamped to 0) and
    /// normalization to 1e-10.
    pub fn new(mut p: DMatrix<f64>) -> Result<Self> {
        for x in p.iter_mut() {
            if *x < 0.0 {
                if *x < -1e-12 {
                    return Err(Error::InvalidObject {
                        object: "JointDistribution",
                        context: format!("negative probability {x:.3e}"),
                    });
                }
                *x = 0.0;
            }
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > tol::NORM_CHECK {
            return Err(Error::InvalidObject {
                object: "JointDistribution",
                context: format!("probabilities sum to {total}, expected 1"),
            });
        }
        Ok(Self { p })
    }

    /// Number of row outcomes.
    pub fn n_rows(&self) -> usize {
        self.p.nrows()
    }

    /// Number of column outcomes.
    pub fn n_cols(&self) -> usize {
        self.p.ncols()
    }

    /// P(i, j).
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[(i, j)]
    }

    /// Row marginal P_X.
    pub fn row_marginal(&self) -> Vec<f64> {
        (0..self.p.nrows()).map(|i| self.p.row(i).iter().sum()).collect()
    }

    /// Column marginal P_Y.
    pub fn col_marginal(&self) -> Vec<f64> {
        (0..self.p.ncols()).map(|j| self.p.column(j).iter().sum()).collect()
    }

    /// The transposed distribution.
    pub fn transposed(&self) -> Self {
        Self { p: self.p.transpose() }
    }

    /// Raw table access.
    pub fn table(&self) -> &DMatrix<f64> {
        &self.p
    }
}

/// Real part of Tr(A·B) without forming the product.
fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let mut s = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            s += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    s
}

/// Joint distribution P(i, j) = μ_i·Tr(σ_i a_j) of a triple.
pub fn joint_distribution(t: &Triple) -> Result<JointDistribution> {
    let n = t.ensemble.len();
    let m = t.povm.len();
    let p = DMatrix::from_fn(n, m, |i, j| {
        t.ensemble.probs()[i]
            * trace_product(t.ensemble.states()[i].matrix(), t.povm.element(j))
    });
    JointDistribution::new(p)
}

/// Mutual information I(X∧Y) = Σ_ij P(i,j) log₂(P(i,j)/(P_X(i)·P_Y(j))) in
/// bits, with 0·log 0 = 0.
pub fn mutual_information(p: &JointDistribution) -> f64 {
    let px = p.row_marginal();
    let py = p.col_marginal();
    let mut total = 0.0;
    for i in 0..p.n_rows() {
        for j in 0..p.n_cols() {
            let pij = p.get(i, j);
            if pij > 0.0 {
                total += pij * (pij / (px[i] * py[j])).log2();
            }
        }
    }
    total
}

/// Mutual information and its two Holevo-type upper bounds.
#[derive(Debug, Clone)]
pub struct HolevoCheck {
    /// I(X∧Y) of the triple's joint distribution.
    pub i_xy: f64,
    /// Ensemble-side bound H(ρ) − Σ_i μ_i H(σ_i).
    pub chi_ensemble: f64,
    /// Measurement-side bound H(ρ) − Σ_j λ_j H(ρ̂_j) through the canonical
    /// ensemble of (ρ, a).
    pub chi_measurement: f64,
    /// chi_ensemble − i_xy (must be ≥ −1e-9).
    pub slack_ensemble: f64,
    /// chi_measurement − i_xy (must be ≥ −1e-9).
    pub slack_measurement: f64,
}

/// Evaluates both Holevo-type bounds on a triple.
pub fn holevo_check(t: &Triple) -> Result<HolevoCheck> {
    let i_xy = mutual_information(&joint_distribution(t)?);
    let chi_ensemble = entropy_defect(&t.ensemble)?;
    let rho = t.average()?;
    let canon = canonical_ensemble(&rho, &t.povm)?;
    let chi_measurement = entropy_defect(&canon.ensemble)?;
    Ok(HolevoCheck {
        i_xy,
        chi_ensemble,
        chi_measurement,
        slack_ensemble: chi_ensemble - i_xy,
        slack_measurement: chi_measurement - i_xy,
    })
}

/// Dual triple together with its verification gaps.
#[derive(Debug, Clone)]
pub struct DualTriple {
    /// The dual: states ρ̂_j with weights λ_j, measured by the pretty-good
    /// measurement S_i of the original ensemble.
    pub triple: Triple,
    /// max_ij |μ_i·Tr(σ_i a_j) − λ_j·Tr(S_i ρ̂_j)| (≤ 1e-10 by construction).
    pub i2_gap: f64,
    /// Entrywise gap between the average states of the two triples.
    pub average_gap: f64,
}

/// Builds the triple canonically associated with `t`: the canonical ensemble
/// {ρ̂_j, λ_j} of (ρ, a) measured by the pretty-good measurement
/// S_i = √ρ⁻¹ μ_i σ_i √ρ⁻¹. The joint distribution transposes:
/// μ_i·Tr(σ_i a_j) = λ_j·Tr(S_i ρ̂_j), which is verified entrywise to 1e-10.
///
/// Zero-weight outcomes of `a` (necessarily zero operators for full-rank ρ)
/// are dropped from the dual ensemble.
pub fn dual_triple(t: &Triple) -> Result<DualTriple> {
    let rho = t.average()?;
    if rho.rank() < rho.dim() {
        return Err(Error::InvalidObject {
            object: "Triple",
            context: format!(
                "dual construction needs a full-rank average (rank {} of {})",
                rho.rank(),
                rho.dim()
            ),
        });
    }
    let canon = canonical_ensemble(&rho, &t.povm)?;
    let pgm = pretty_good_measurement(&t.ensemble)?;
    let dual = Triple::new(canon.ensemble.clone(), pgm.povm.clone())?;

    // Entrywise identity between the two joint distributions.
    let mut i2_gap = 0.0f64;
    for (i, (mu, sigma)) in t.ensemble.probs().iter().zip(t.ensemble.states()).enumerate() {
        for (col, &j) in canon.kept.iter().enumerate() {
            let lhs = mu * trace_product(sigma.matrix(), t.povm.element(j));
            let rhs = dual.ensemble.probs()[col]
                * trace_product(dual.povm.element(i), dual.ensemble.states()[col].matrix());
            i2_gap = i2_gap.max((lhs - rhs).abs());
        }
    }
    if i2_gap > 1e-10 {
        return Err(Error::PremiseViolated(format!(
            "dual-triple joint distributions disagree by {i2_gap:.3e}"
        )));
    }
    let dual_avg = ensemble_average(&dual.ensemble)?;
    let average_gap = (rho.matrix() - dual_avg.matrix())
        .iter()
        .map(|x| x.norm())
        .fold(0.0, f64::max);
    Ok(DualTriple { triple: dual, i2_gap, average_gap })
}

/// Selection-size lower bound at deviation ε.
#[derive(Debug, Clone, Copy)]
pub struct Thm3Bound {
    /// l·(defect + (3ε/λ₀²)·log₂(2ε/(λ₀²d))); may be negative.
    pub raw_bits: f64,
    /// max(0, raw): a count bound below 1 carries no content.
    pub clamped_bits: f64,
    /// The ε the bound was evaluated at.
    pub epsilon: f64,
    /// λ₀ = min_j λ_j.
    pub lambda_min: f64,
}

/// Lower bound on log₂ M for any block measurement whose worst-site marginal
/// deviation is at most ε, valid for 0 < ε ≤ (λ₀/2)².
pub fn thm3_lower_bound(
    lambda: &[f64],
    hat_states: &[DensityMatrix],
    eps: f64,
    d: usize,
    l: usize,
) -> Result<Thm3Bound> {
    if lambda.is_empty() || lambda.len() != hat_states.len() {
        return Err(Error::DimensionMismatch {
            context: format!("{} weights vs {} states", lambda.len(), hat_states.len()),
        });
    }
    if hat_states.iter().any(|s| s.dim() != d) {
        return Err(Error::DimensionMismatch {
            context: format!("states do not live in dimension {d}"),
        });
    }
    if l == 0 {
        return Err(Error::InvalidObject { object: "Thm3Bound", context: "l must be ≥ 1".into() });
    }
    let lambda_min = lambda.iter().fold(f64::INFINITY, |a, &x| a.min(x));
    let limit = (lambda_min / 2.0) * (lambda_min / 2.0);
    if !(eps > 0.0) || eps > limit {
        return Err(Error::LowerBoundInapplicable { eps, limit });
    }
    let ensemble = Ensemble::new(lambda.to_vec(), hat_states.to_vec())?;
    let defect = entropy_defect(&ensemble)?;
    let correction = 3.0 * eps / (lambda_min * lambda_min)
        * (2.0 * eps / (lambda_min * lambda_min * d as f64)).log2();
    let raw_bits = l as f64 * (defect + correction);
    Ok(Thm3Bound { raw_bits, clamped_bits: raw_bits.max(0.0), epsilon: eps, lambda_min })
}

/// Entropy defect I(s;σ) = H(σ̄) − Σ_i s_i H(σ_i) of weights and states given
/// as raw parts (avoiding repeated `Ensemble` validation in the lemma loops).
fn defect_of(weights: &[f64], states: &[DensityMatrix]) -> Result<f64> {
    entropy_defect(&Ensemble::new(weights.to_vec(), states.to_vec())?)
}

/// L1 slack: H(λ) + Σ_j λ_j H(σ_j) − H(σ̄) ≥ 0 (entropy sub-additivity of
/// mixing).
pub fn lemma1_slack(weights: &[f64], states: &[DensityMatrix]) -> Result<f64> {
    let e = Ensemble::new(weights.to_vec(), states.to_vec())?;
    let avg = ensemble_average(&e)?;
    let cond: f64 = e.probs().iter().zip(e.states()).map(|(p, s)| p * s.entropy_bits()).sum();
    Ok(entropy_of_weights(weights) + cond - avg.entropy_bits())
}

/// L2 slack: I(s;σ) − I(s;Tr₂σ) − I(s;Tr₁σ) ≥ 0 for bipartite states whose
/// average is a product. The product premise is asserted to 1e-9.
pub fn lemma2_slack(
    weights: &[f64],
    states: &[DensityMatrix],
    d1: usize,
    d2: usize,
) -> Result<f64> {
    let e = Ensemble::new(weights.to_vec(), states.to_vec())?;
    if e.dim() != d1 * d2 {
        return Err(Error::DimensionMismatch {
            context: format!("states of dim {} vs product {d1}×{d2}", e.dim()),
        });
    }
    let avg = ensemble_average(&e)?;
    let dims = [d1, d2];
    let left = partial_trace(avg.matrix(), &dims, &[1])?;
    let right = partial_trace(avg.matrix(), &dims, &[0])?;
    let product = linalg::tensor_product(&left, &right);
    let gap = (avg.matrix() - product).iter().map(|x| x.norm()).fold(0.0, f64::max);
    if gap > 1e-9 {
        return Err(Error::PremiseViolated(format!(
            "average state is not a product (entrywise gap {gap:.3e})"
        )));
    }
    let first: Result<Vec<DensityMatrix>> = states
        .iter()
        .map(|s| DensityMatrix::new(partial_trace(s.matrix(), &dims, &[1])?))
        .collect();
    let second: Result<Vec<DensityMatrix>> = states
        .iter()
        .map(|s| DensityMatrix::new(partial_trace(s.matrix(), &dims, &[0])?))
        .collect();
    Ok(defect_of(weights, states)? - defect_of(weights, &first?)? - defect_of(weights, &second?)?)
}

/// L3 slack: I(s;σ) − I(s̃;σ̃) ≥ 0 under coarse graining by a partition of the
/// index set (groups inherit summed weights and weighted-average states).
pub fn lemma3_slack(
    weights: &[f64],
    states: &[DensityMatrix],
    partition: &[Vec<usize>],
) -> Result<f64> {
    let n = weights.len();
    let mut seen = vec![false; n];
    for group in partition {
        for &i in group {
            if i >= n || seen[i] {
                return Err(Error::InvalidObject {
                    object: "Partition",
                    context: format!("index {i} out of range or repeated"),
                });
            }
            seen[i] = true;
        }
    }
    if seen.iter().any(|&s| !s) {
        return Err(Error::InvalidObject {
            object: "Partition",
            context: "partition does not cover every index".into(),
        });
    }
    let mut g_weights = Vec::new();
    let mut g_states = Vec::new();
    let d = states.first().map(|s| s.dim()).unwrap_or(0);
    for group in partition {
        let w: f64 = group.iter().map(|&i| weights[i]).sum();
        if w <= tol::WEIGHT {
            continue;
        }
        let mut avg = CMatrix::zeros(d, d);
        for &i in group {
            avg += states[i].matrix() * re(weights[i] / w);
        }
        g_weights.push(w);
        g_states.push(DensityMatrix::new(avg)?);
    }
    Ok(defect_of(weights, states)? - defect_of(&g_weights, &g_states)?)
}

/// L4 slack: −α·log₂(α/d) − |H(ρ) − H(σ)| ≥ 0 where α = ‖ρ − σ‖₁, valid for
/// α ≤ ½.
pub fn lemma4_slack(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            context: format!("states of dims {} and {}", rho.dim(), sigma.dim()),
        });
    }
    let alpha = trace_norm(&(rho.matrix() - sigma.matrix()))?;
    if alpha > 0.5 {
        return Err(Error::PremiseViolated(format!(
            "trace distance {alpha:.3} exceeds 1/2"
        )));
    }
    let d = rho.dim() as f64;
    let bound = if alpha > 0.0 { -alpha * (alpha / d).log2() } else { 0.0 };
    Ok(bound - (rho.entropy_bits() - sigma.entropy_bits()).abs())
}

/// Aggregate outcome of random spot checks for one entropy lemma.
#[derive(Debug, Clone)]
pub struct LemmaReport {
    /// Which inequality was exercised.
    pub lemma: &'static str,
    /// Instances actually checked.
    pub instances: usize,
    /// Instances with slack < −1e-9.
    pub violations: usize,
    /// Instances discarded for unmet premises.
    pub skipped: usize,
    /// Smallest slack seen.
    pub worst_slack: f64,
}

/// Parameters for the random lemma spot checks.
#[derive(Debug, Clone, Copy)]
pub struct LemmaSuiteConfig {
    /// Base RNG seed.
    pub seed: u64,
    /// Instances per lemma.
    pub instances: usize,
    /// Largest single-system dimension drawn.
    pub d_max: usize,
}

impl Default for LemmaSuiteConfig {
    fn default() -> Self {
        Self { seed: 0, instances: 200, d_max: 4 }
    }
}

fn random_ensemble<R: Rng>(n: usize, d: usize, rng: &mut R) -> Result<(Vec<f64>, Vec<DensityMatrix>)> {
    let mut weights: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 1e-3).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    let states: Result<Vec<DensityMatrix>> =
        (0..n).map(|_| DensityMatrix::new(linalg::random::density(d, rng))).collect();
    Ok((weights, states?))
}

/// Runs random spot checks of the four entropy lemmas and reports per-lemma
/// aggregates. L2 instances are constructed to satisfy the product-average
/// premise exactly: a drawn ensemble is mixed with the correction state
/// C = (τ − (1−t)σ̄)/t (τ the product of σ̄'s reductions), which pins the
/// average to τ; draws where no mixing weight makes C a state are skipped.
pub fn entropy_lemma_checks(cfg: &LemmaSuiteConfig) -> Result<Vec<LemmaReport>> {
    if cfg.instances == 0 || cfg.d_max < 2 {
        return Err(Error::Config("need ≥ 1 instance and d_max ≥ 2".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut reports = Vec::new();

    // L1: entropy of a mixture vs mixing entropy plus average entropy.
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    for _ in 0..cfg.instances {
        let n = rng.gen_range(2..=4);
        let d = rng.gen_range(2..=cfg.d_max);
        let (w, s) = random_ensemble(n, d, &mut rng)?;
        let slack = lemma1_slack(&w, &s)?;
        worst = worst.min(slack);
        if slack < -1e-9 {
            violations += 1;
        }
    }
    reports.push(LemmaReport {
        lemma: "L1: H(σ̄) ≤ H(λ) + Σ λ H(σ)",
        instances: cfg.instances,
        violations,
        skipped: 0,
        worst_slack: worst,
    });

    // L2: super-additivity of the defect over a product average.
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    let mut skipped = 0;
    let mut done = 0;
    let pairs = [(2usize, 2usize), (2, 3), (3, 2)];
    while done < cfg.instances {
        let (d1, d2) = pairs[(done + skipped) % pairs.len()];
        let n = rng.gen_range(2..=3);
        let (w, s) = random_ensemble(n, d1 * d2, &mut rng)?;
        let avg = ensemble_average(&Ensemble::new(w.clone(), s.clone())?)?;
        let dims = [d1, d2];
        let product = linalg::tensor_product(
            &partial_trace(avg.matrix(), &dims, &[1])?,
            &partial_trace(avg.matrix(), &dims, &[0])?,
        );
        // Mix towards the product target until the correction is a state.
        let mut built = None;
        for &t in &[0.5, 0.9, 0.99] {
            let correction = (&product - avg.matrix() * re(1.0 - t)) * re(1.0 / t);
            if min_eigenvalue(&correction)? < -tol::PSD_CLAMP {
                continue;
            }
            let mixed: Result<Vec<DensityMatrix>> = s
                .iter()
                .map(|st| DensityMatrix::new(st.matrix() * re(1.0 - t) + &correction * re(t)))
                .collect();
            if let Ok(mixed) = mixed {
                built = Some(mixed);
                break;
            }
        }
        match built {
            Some(states) => {
                let slack = lemma2_slack(&w, &states, d1, d2)?;
                worst = worst.min(slack);
                if slack < -1e-9 {
                    violations += 1;
                }
                done += 1;
            }
            None => {
                skipped += 1;
                if skipped > 10 * cfg.instances {
                    break;
                }
            }
        }
    }
    reports.push(LemmaReport {
        lemma: "L2: I(s;σ) ≥ I(s;Tr₂σ) + I(s;Tr₁σ) for product averages",
        instances: done,
        violations,
        skipped,
        worst_slack: worst,
    });

    // L3: coarse graining cannot increase the defect.
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    for _ in 0..cfg.instances {
        let n = rng.gen_range(3..=5);
        let d = rng.gen_range(2..=cfg.d_max);
        let (w, s) = random_ensemble(n, d, &mut rng)?;
        // Random two-group partition.
        let mut groups = vec![Vec::new(), Vec::new()];
        for i in 0..n {
            groups[usize::from(rng.gen::<bool>())].push(i);
        }
        if groups[0].is_empty() || groups[1].is_empty() {
            groups = vec![vec![0], (1..n).collect()];
        }
        let slack = lemma3_slack(&w, &s, &groups)?;
        worst = worst.min(slack);
        if slack < -1e-9 {
            violations += 1;
        }
    }
    reports.push(LemmaReport {
        lemma: "L3: coarse graining, I(s;σ) ≥ I(s̃;σ̃)",
        instances: cfg.instances,
        violations,
        skipped: 0,
        worst_slack: worst,
    });

    // L4: entropy continuity in trace distance.
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    let mut skipped = 0;
    let mut done = 0;
    while done < cfg.instances {
        let d = rng.gen_range(2..=cfg.d_max);
        let rho = DensityMatrix::new(linalg::random::density(d, &mut rng))?;
        let tau = DensityMatrix::new(linalg::random::density(d, &mut rng))?;
        let x: f64 = rng.gen::<f64>() * 0.25;
        let sigma =
            DensityMatrix::new(rho.matrix() * re(1.0 - x) + tau.matrix() * re(x))?;
        match lemma4_slack(&rho, &sigma) {
            Ok(slack) => {
                worst = worst.min(slack);
                if slack < -1e-9 {
                    violations += 1;
                }
                done += 1;
            }
            Err(Error::PremiseViolated(_)) => {
                skipped += 1;
                if skipped > 10 * cfg.instances {
                    break;
                }
            }
            Err(e) => return Err(e),
        }
    }
    reports.push(LemmaReport {
        lemma: "L4: |H(ρ) − H(σ)| ≤ −α log₂(α/d)",
        instances: done,
        violations,
        skipped,
        worst_slack: worst,
    });

    Ok(reports)
}

/// Outcome of the operator-Chernoff Monte Carlo.
#[derive(Debug, Clone, Copy)]
pub struct ChernoffReport {
    /// Operator dimension.
    pub dim_k: usize,
    /// Spectral floor of the mean (σ ≥ sI).
    pub s: f64,
    /// Oversampling margin η.
    pub eta: f64,
    /// Samples per trial.
    pub m: u64,
    /// Monte-Carlo trials.
    pub trials: u32,
    /// Trials where (1/M)ΣX ≰ (1+η)σ.
    pub failures: u32,
    /// failures/trials.
    pub empirical_tail: f64,
    /// dim_k·2^(−Mη²s/(2 ln 2)).
    pub bound: f64,
    /// Binomial standard error √(p̂(1−p̂)/trials).
    pub std_error: f64,
    /// empirical ≤ bound + 3·std_error.
    pub ok: bool,
}

/// Number of members in the sampled operator family.
const CHERNOFF_FAMILY: usize = 8;

/// Fixed integer mix deriving independent per-trial seeds.
fn mix_seed(seed: u64, trial: u64) -> u64 {
    let mut z = seed.wrapping_add(trial.wrapping_mul(0x9E37_79B9_7F4A_7C15)).wrapping_add(1);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The sampled family: X_t = s·I + (1−s)·O_t with O_t drawn once in [0, I],
/// sampled uniformly. The exact mean σ = s·I + (1−s)·Ō satisfies σ ≥ sI.
fn chernoff_family(dim_k: usize, s: f64, seed: u64) -> (Vec<CMatrix>, CMatrix) {
    let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(seed, u64::MAX));
    let eye = CMatrix::identity(dim_k, dim_k);
    let members: Vec<CMatrix> = (0..CHERNOFF_FAMILY)
        .map(|_| &eye * re(s) + linalg::random::bounded01(dim_k, &mut rng) * re(1.0 - s))
        .collect();
    let mut mean = CMatrix::zeros(dim_k, dim_k);
    for x in &members {
        mean += x;
    }
    mean /= re(CHERNOFF_FAMILY as f64);
    (members, mean)
}

/// One trial: draw `m` family members i.i.d. and test (1/M)ΣX ≤ (1+η)σ.
fn chernoff_trial(
    members: &[CMatrix],
    mean: &CMatrix,
    eta: f64,
    m: u64,
    seed: u64,
    trial: u64,
) -> Result<bool> {
    let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(seed, trial));
    let dim = mean.nrows();
    let mut counts = vec![0u64; members.len()];
    for _ in 0..m {
        counts[rng.gen_range(0..members.len())] += 1;
    }
    let mut avg = CMatrix::zeros(dim, dim);
    for (x, &n) in members.iter().zip(&counts) {
        if n > 0 {
            avg += x * re(n as f64 / m as f64);
        }
    }
    // Failure event: the sample average escapes (1+η)σ.
    Ok(!loewner_leq(&avg, &(mean * re(1.0 + eta)), 1e-12)?)
}

/// Monte-Carlo estimate of the operator large-deviation tail
/// Pr{(1/M)ΣX_μ ≰ (1+η)σ} against the bound dim_k·2^(−Mη²s/(2 ln 2)).
/// Per-trial RNG streams derive from (seed, trial), so the result does not
/// depend on evaluation order.
pub fn operator_chernoff_mc(
    dim_k: usize,
    s: f64,
    eta: f64,
    m: u64,
    trials: u32,
    seed: u64,
) -> Result<ChernoffReport> {
    if dim_k == 0 || m == 0 || trials == 0 {
        return Err(Error::Config("need dim_k ≥ 1, M ≥ 1, trials ≥ 1".into()));
    }
    if !(s > 0.0 && s < 1.0) || !(eta > 0.0) {
        return Err(Error::Config(format!("need 0 < s < 1 and η > 0 (got s = {s}, η = {eta})")));
    }
    let (members, mean) = chernoff_family(dim_k, s, seed);
    let mut failures = 0u32;
    for trial in 0..trials {
        if chernoff_trial(&members, &mean, eta, m, seed, u64::from(trial))? {
            failures += 1;
        }
    }
    let empirical_tail = f64::from(failures) / f64::from(trials);
    let bound = dim_k as f64
        * (-(m as f64) * eta * eta * s / (2.0 * std::f64::consts::LN_2)).exp2();
    let std_error = (empirical_tail * (1.0 - empirical_tail) / f64::from(trials)).sqrt();
    Ok(ChernoffReport {
        dim_k,
        s,
        eta,
        m,
        trials,
        failures,
        empirical_tail,
        bound,
        std_error,
        ok: empirical_tail <= bound + 3.0 * std_error,
    })
}

/// One inequality of the compression chain.
#[derive(Debug, Clone)]
pub struct ChainLink {
    /// Rendered inequality.
    pub name: &'static str,
    /// Left-hand value (bits).
    pub lhs: f64,
    /// Right-hand value (bits).
    pub rhs: f64,
    /// lhs − rhs.
    pub slack: f64,
    /// slack ≥ −1e-8.
    pub ok: bool,
}

/// The compression chain evaluated on a concrete compressed measurement:
///
///   I(λ;ρ̂) + ε ≥ (1/l)·log₂M ≥ (1/l)·I(X^l∧Y) ≥ (1/l)·Σ_k I(X_k∧Y)
///             ≥ (1/l)·Σ_k I(X_k∧f_k(Y)) = F(A) ≥ F(a) − ε,
///
/// where Y is the block outcome, f_k extracts its site-k letter, and the
/// fidelity F is the mutual information between source letter and outcome.
/// The three middle links are classical identities/inequalities of the built
/// measurement and must hold up to numerics; the outer links define the
/// achieved ε's, which are reported.
#[derive(Debug, Clone)]
pub struct ChainReport {
    /// Block length.
    pub l: usize,
    /// Distinct outcomes of the compressed measurement.
    pub m_selected: usize,
    /// I(λ;ρ̂): entropy defect of the canonical ensemble.
    pub entropy_defect_bits: f64,
    /// (1/l)·log₂ M.
    pub rate_bits: f64,
    /// (1/l)·I(X^l∧Y).
    pub i_block_bits: f64,
    /// (1/l)·Σ_k I(X_k∧Y).
    pub i_site_sum_bits: f64,
    /// F(A) = (1/l)·Σ_k I(X_k∧f_k(Y)).
    pub f_block_bits: f64,
    /// F(a): single-letter mutual-information fidelity.
    pub f_single_bits: f64,
    /// rate − defect: how far the rate sits above the defect.
    pub eps_rate: f64,
    /// F(a) − F(A): fidelity given up by compressing.
    pub eps_fidelity: f64,
    /// Largest entrywise gap between the letter-grouped joint and the joint
    /// computed from the marginal elements (two routes to the same table).
    pub marginal_consistency_gap: f64,
    /// The three inner inequalities with slacks.
    pub links: Vec<ChainLink>,
    /// The underlying compression run.
    pub compression: CompressionResult,
}

/// Builds a compressed measurement for the triple's average state and
/// evaluates every link of the chain on it.
pub fn holevo_via_compression_chain(
    t: &Triple,
    l: usize,
    config: &CompressionConfig,
) -> Result<ChainReport> {
    let rho = t.average()?;
    if rho.rank() < rho.dim() {
        return Err(Error::InvalidObject {
            object: "ChainReport",
            context: "chain evaluation needs a full-rank average state".into(),
        });
    }
    let n = t.ensemble.len();
    check_cap(n, l, tol::CAP_WORDS, "holevo_via_compression_chain")?;
    let mut cfg = config.clone();
    cfg.l = l;
    let run = pipeline::compress(&rho, &t.povm, &cfg, None)?;
    if !run.success {
        return Err(Error::InvalidObject {
            object: "ChainReport",
            context: format!("selection failed after {} attempts", run.attempts.len()),
        });
    }

    let m_sel = run.m_selected;
    let words: Vec<&pipeline::Word> = run.elements.keys().collect();
    let elements: Vec<&CMatrix> = run.elements.values().collect();

    // Product source states σ_{i^l} and priors μ_{i^l} over all letter words.
    let mu = t.ensemble.probs();
    let states = t.ensemble.states();
    let mut p_block: DMatrix<f64> = DMatrix::zeros(n.pow(l as u32), m_sel);
    for (row, iw) in filtered_words(n, l, |_| true).iter().enumerate() {
        let mut sigma = CMatrix::identity(1, 1);
        let mut prior = 1.0;
        for &i in iw {
            sigma = linalg::tensor_product(&sigma, states[i].matrix());
            prior *= mu[i];
        }
        for (col, a_mu) in elements.iter().enumerate() {
            p_block[(row, col)] = prior * trace_product(&sigma, a_mu);
        }
    }
    let p_block = JointDistribution::new(p_block)?;
    let i_block_bits = mutual_information(&p_block) / l as f64;

    // Site marginals of X^l: group rows by the site-k letter.
    let mut i_site_sum = 0.0;
    let mut i_letter_sum = 0.0;
    let mut consistency = 0.0f64;
    let m_letters = t.povm.len();
    for k in 0..l {
        let mut p_site: DMatrix<f64> = DMatrix::zeros(n, m_sel);
        for (row, iw) in filtered_words(n, l, |_| true).iter().enumerate() {
            for col in 0..m_sel {
                p_site[(iw[k], col)] += p_block.get(row, col);
            }
        }
        let p_site = JointDistribution::new(p_site)?;
        i_site_sum += mutual_information(&p_site);

        // Data processing f_k: merge outcomes by their site-k letter.
        let mut p_letter: DMatrix<f64> = DMatrix::zeros(n, m_letters);
        for (col, w) in words.iter().enumerate() {
            for i in 0..n {
                p_letter[(i, w[k])] += p_site.get(i, col);
            }
        }
        // The same table through the marginal elements.
        let marg = pipeline::marginal_elements(&run.elements, m_letters, k, &rho)?;
        for i in 0..n {
            for (j, aj) in marg.iter().enumerate() {
                let direct = mu[i] * trace_product(states[i].matrix(), aj);
                consistency = consistency.max((p_letter[(i, j)] - direct).abs());
            }
        }
        let p_letter = JointDistribution::new(p_letter)?;
        i_letter_sum += mutual_information(&p_letter);
    }
    let i_site_sum_bits = i_site_sum / l as f64;
    let f_block_bits = i_letter_sum / l as f64;
    let f_single_bits = mutual_information(&joint_distribution(t)?);

    let link = |name: &'static str, lhs: f64, rhs: f64| ChainLink {
        name,
        lhs,
        rhs,
        slack: lhs - rhs,
        ok: lhs - rhs >= -1e-8,
    };
    let links = vec![
        link("(1/l)·log₂M ≥ (1/l)·I(X^l∧Y)", run.rate_bits, i_block_bits),
        link("I(X^l∧Y) ≥ Σ_k I(X_k∧Y)", i_block_bits, i_site_sum_bits),
        link("Σ_k I(X_k∧Y) ≥ Σ_k I(X_k∧f_k(Y))", i_site_sum_bits, f_block_bits),
    ];

    Ok(ChainReport {
        l,
        m_selected: m_sel,
        entropy_defect_bits: run.entropy_defect_bits,
        rate_bits: run.rate_bits,
        i_block_bits,
        i_site_sum_bits,
        f_block_bits,
        f_single_bits,
        eps_rate: run.rate_bits - run.entropy_defect_bits,
        eps_fidelity: f_single_bits - f_block_bits,
        marginal_consistency_gap: consistency,
        links,
        compression: run,
    })
}
