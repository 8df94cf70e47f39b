//! Frequency-typical subspace machinery.
//!
//! A label word t^l over the eigenvalue indices of a state ρ is *typical*
//! when every index t satisfies |N(t|t^l) − l·r_t| ≤ δ√l·√(r_t(1−r_t)).
//! Since all operators involved are simultaneously diagonal in the fixed
//! canonical eigenbasis, this componentwise reading is exact, and every
//! projector here is represented by its selected word set plus the
//! per-position eigenbases; dense matrices are materialized on demand.
//! Degenerate eigenvalues are counted per index (per eigenstate), not merged.
//!
//! Scalar quantities that have exact word-sum expressions — Tr Π,
//! Tr(ρ^{⊗l}Π), Tr(ρ̂_{j^l}Π(j^l)), and the minimal eigenvalue of
//! Π ρ^{⊗l} Π — are computed from the word sets directly, never through a
//! dense eigensolve.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, re, CMatrix};
use crate::quantum::DensityMatrix;
use crate::tol;

/// Fixed eigenbasis of a state: eigenvalues (descending) with their
/// canonically ordered eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenLabeling {
    /// Eigenvalues r_t, descending.
    pub eigenvalues: Vec<f64>,
    /// Eigenvector columns aligned with `eigenvalues`.
    pub eigenvectors: CMatrix,
}

impl EigenLabeling {
    /// Snapshot of a state's canonical eigendecomposition.
    pub fn of(state: &DensityMatrix) -> Self {
        Self {
            eigenvalues: state.spectrum().eigenvalues.clone(),
            eigenvectors: state.spectrum().eigenvectors.clone(),
        }
    }

    /// Dimension of the labeled space.
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Whether the letter counts of `word` are δ-typical for the weights `r`.
///
/// Weights are clamped into [0, 1]: they are probabilities by contract, and
/// representation noise at the endpoints (an eigenvalue of 1 + 2e−16, say)
/// must not defeat the exact zero-width bound that pins degenerate letters
/// to their exact counts.
fn word_is_typical(word: &[usize], r: &[f64], delta: f64) -> bool {
    let l = word.len() as f64;
    let mut counts = vec![0usize; r.len()];
    for &t in word {
        counts[t] += 1;
    }
    r.iter().zip(&counts).all(|(&rt, &n)| {
        let rt = rt.clamp(0.0, 1.0);
        (n as f64 - l * rt).abs() <= delta * l.sqrt() * (rt * (1.0 - rt)).max(0.0).sqrt()
    })
}

/// Enumerates all words of length `l` over `d` letters in lexicographic
/// order, retaining those accepted by `keep`.
pub(crate) fn filtered_words(
    d: usize,
    l: usize,
    mut keep: impl FnMut(&[usize]) -> bool,
) -> Vec<Vec<usize>> {
    let total = (d as u128).pow(l as u32);
    let mut out = Vec::new();
    let mut word = vec![0usize; l];
    for i in 0..total {
        let mut rem = i;
        for k in (0..l).rev() {
            word[k] = (rem % d as u128) as usize;
            rem /= d as u128;
        }
        if keep(&word) {
            out.push(word.clone());
        }
    }
    out
}

/// Guard for word-enumeration blowup.
pub(crate) fn check_cap(base: usize, length: usize, cap: usize, context: &'static str) -> Result<()> {
    let needed = (base as u128).checked_pow(length as u32).unwrap_or(u128::MAX);
    if needed > cap as u128 {
        return Err(Error::CapExceeded {
            needed: needed.min(usize::MAX as u128) as usize,
            cap,
            context,
        });
    }
    Ok(())
}

/// Projector onto a span of product eigenbasis vectors.
///
/// Covers the typical projector Π^l_{ρ,δ} (all positions share one basis)
/// and the conditional typical projector Π^l_{ρ̂,δ}(j^l) (position k uses the
/// basis of ρ̂_{j_k}).
#[derive(Debug, Clone)]
pub struct TypicalProjector {
    /// Number of tensor factors.
    pub l: usize,
    /// Selected label words t^l, lexicographically sorted.
    pub selected_words: Vec<Vec<usize>>,
    /// Per-position eigenbases.
    pub bases: Vec<EigenLabeling>,
    dense: OnceLock<CMatrix>,
}

impl TypicalProjector {
    fn new(l: usize, mut selected_words: Vec<Vec<usize>>, bases: Vec<EigenLabeling>) -> Self {
        selected_words.sort();
        Self { l, selected_words, bases, dense: OnceLock::new() }
    }

    /// Ambient dimension d^l.
    pub fn dim(&self) -> usize {
        self.bases.iter().map(EigenLabeling::dim).product()
    }

    /// Rank = number of selected words (the trace is exactly this).
    pub fn rank(&self) -> usize {
        self.selected_words.len()
    }

    /// The product basis vector ⊗_k e^{(k)}_{t_k} of a label word.
    pub fn basis_vector(&self, word: &[usize]) -> DVector<Complex64> {
        let mut v = DVector::from_element(1, re(1.0));
        for (k, &t) in word.iter().enumerate() {
            let col: DVector<Complex64> = self.bases[k].eigenvectors.column(t).into_owned();
            v = v.kronecker(&col);
        }
        v
    }

    /// Dense projector Σ_w |e_w⟩⟨e_w| (cached).
    pub fn dense(&self) -> &CMatrix {
        self.dense.get_or_init(|| {
            let dim = self.dim();
            let rank = self.rank();
            let mut v = CMatrix::zeros(dim, rank);
            for (c, w) in self.selected_words.iter().enumerate() {
                v.set_column(c, &self.basis_vector(w));
            }
            &v * v.adjoint()
        })
    }

    /// Exact Σ_{w selected} Π_k r^{(k)}_{w_k} — the trace of the projector
    /// against the product of its labeled states, e.g. Tr(ρ^{⊗l} Π^l_{ρ,δ}).
    pub fn labeled_mass(&self) -> f64 {
        self.selected_words
            .iter()
            .map(|w| {
                w.iter()
                    .enumerate()
                    .map(|(k, &t)| self.bases[k].eigenvalues[t])
                    .product::<f64>()
            })
            .sum()
    }

    /// Exact min_{w selected} Π_k r^{(k)}_{w_k} — the smallest nonzero
    /// eigenvalue of Π (⊗_k state_k) Π; +∞ for the zero projector.
    pub fn min_word_mass(&self) -> f64 {
        self.selected_words
            .iter()
            .map(|w| {
                w.iter()
                    .enumerate()
                    .map(|(k, &t)| self.bases[k].eigenvalues[t])
                    .product::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Typical projector Π^l_{ρ,δ} with the default enumeration cap.
pub fn typical_projector(rho: &DensityMatrix, l: usize, delta: f64) -> Result<TypicalProjector> {
    typical_projector_capped(rho, l, delta, tol::CAP_DIM)
}

/// Typical projector Π^l_{ρ,δ} with an explicit cap on d^l.
pub fn typical_projector_capped(
    rho: &DensityMatrix,
    l: usize,
    delta: f64,
    cap_dim: usize,
) -> Result<TypicalProjector> {
    if l == 0 {
        return Err(Error::InvalidObject {
            object: "TypicalProjector",
            context: "l must be positive".into(),
        });
    }
    let d = rho.dim();
    check_cap(d, l, cap_dim, "typical_projector")?;
    let labeling = EigenLabeling::of(rho);
    let words = filtered_words(d, l, |w| word_is_typical(w, &labeling.eigenvalues, delta));
    Ok(TypicalProjector::new(l, words, vec![labeling; l]))
}

/// Conditional typical projector Π^l_{ρ̂,δ}(j^l) with the default cap.
pub fn conditional_typical_projector(
    states: &[DensityMatrix],
    word: &[usize],
    delta: f64,
) -> Result<TypicalProjector> {
    conditional_typical_projector_capped(states, word, delta, tol::CAP_DIM)
}

/// Conditional typical projector ⊗_j Π^{I_j}_{ρ̂_j,δ}, I_j = {k : j_k = j},
/// with an explicit cap on d^l.
///
/// Each letter's block is the typical projector of ρ̂_j on the positions I_j;
/// block selections are combined by Cartesian product and interleaved back
/// into full-length label words.
pub fn conditional_typical_projector_capped(
    states: &[DensityMatrix],
    word: &[usize],
    delta: f64,
    cap_dim: usize,
) -> Result<TypicalProjector> {
    let l = word.len();
    if l == 0 {
        return Err(Error::InvalidObject {
            object: "TypicalProjector",
            context: "empty word".into(),
        });
    }
    let Some(first) = states.first() else {
        return Err(Error::InvalidObject {
            object: "TypicalProjector",
            context: "no conditional states".into(),
        });
    };
    let d = first.dim();
    if states.iter().any(|s| s.dim() != d) {
        return Err(Error::DimensionMismatch {
            context: "conditional states of unequal dimension".into(),
        });
    }
    check_cap(d, l, cap_dim, "conditional_typical_projector")?;
    if let Some(&j) = word.iter().find(|&&j| j >= states.len()) {
        return Err(Error::InvalidObject {
            object: "Word",
            context: format!("letter {j} has no associated state (m = {})", states.len()),
        });
    }

    // Positions of each letter, ascending.
    let mut blocks: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, &j) in word.iter().enumerate() {
        blocks.entry(j).or_default().push(k);
    }

    // Per-letter block selections (label subwords typical for ρ̂_j).
    let mut block_words: Vec<(&Vec<usize>, Vec<Vec<usize>>)> = Vec::new();
    for (&j, positions) in &blocks {
        let r = &states[j].spectrum().eigenvalues;
        let subs = filtered_words(d, positions.len(), |w| word_is_typical(w, r, delta));
        block_words.push((positions, subs));
    }

    // Cartesian product across blocks, interleaved into full words.
    let mut selected: Vec<Vec<usize>> = vec![vec![0; l]];
    for (positions, subs) in &block_words {
        let mut next = Vec::with_capacity(selected.len() * subs.len());
        for partial in &selected {
            for sub in subs {
                let mut w = partial.clone();
                for (slot, &k) in positions.iter().enumerate() {
                    w[k] = sub[slot];
                }
                next.push(w);
            }
        }
        selected = next;
    }

    let bases: Vec<EigenLabeling> = word.iter().map(|&j| EigenLabeling::of(&states[j])).collect();
    Ok(TypicalProjector::new(l, selected, bases))
}

/// Typical sequence set T^l_δ of a distribution.
#[derive(Debug, Clone)]
pub struct TypicalSet {
    /// Width parameter δ.
    pub delta: f64,
    /// Word length l.
    pub l: usize,
    /// Alphabet size m.
    pub m: usize,
    /// Typical words, lexicographically sorted.
    pub words: Vec<Vec<usize>>,
    /// Probability mass S = λ^l(T^l_δ).
    pub mass: f64,
}

impl TypicalSet {
    /// Probability λ^l(w) = Π_k λ_{w_k} of a single word.
    pub fn word_probability(lambda: &[f64], word: &[usize]) -> f64 {
        word.iter().map(|&j| lambda[j]).product()
    }

    /// Newline-delimited word export; letters as base-m digits when m ≤ 10,
    /// comma-separated decimals otherwise.
    pub fn export_words(&self) -> String {
        let mut out = String::new();
        for w in &self.words {
            let line: String = if self.m <= 10 {
                w.iter().map(|j| char::from(b'0' + *j as u8)).collect()
            } else {
                w.iter().map(|j| j.to_string()).collect::<Vec<_>>().join(",")
            };
            out.push_str(&line);
            out.push('\n');
        }
        out
    }
}

/// Typical sequences with the default enumeration cap.
pub fn typical_sequences(lambda: &[f64], l: usize, delta: f64) -> Result<TypicalSet> {
    typical_sequences_capped(lambda, l, delta, tol::CAP_WORDS)
}

/// Typical sequences T^l_δ = {j^l : ∀j |N(j|j^l) − lλ_j| ≤ δ√l·√(λ_j(1−λ_j))}
/// with an explicit cap on m^l.
pub fn typical_sequences_capped(
    lambda: &[f64],
    l: usize,
    delta: f64,
    cap_words: usize,
) -> Result<TypicalSet> {
    if l == 0 || lambda.is_empty() {
        return Err(Error::InvalidObject {
            object: "TypicalSet",
            context: "need l ≥ 1 and a nonempty distribution".into(),
        });
    }
    let m = lambda.len();
    check_cap(m, l, cap_words, "typical_sequences")?;
    let words = filtered_words(m, l, |w| word_is_typical(w, lambda, delta));
    let mass = words.iter().map(|w| TypicalSet::word_probability(lambda, w)).sum();
    Ok(TypicalSet { delta, l, m, words, mass })
}

/// Empirical distribution P_{j^l}(j) = N(j|j^l)/l of a word.
pub fn empirical_distribution(word: &[usize], m: usize) -> Result<Vec<f64>> {
    if word.is_empty() {
        return Err(Error::InvalidObject { object: "Word", context: "empty word".into() });
    }
    let mut counts = vec![0usize; m];
    for &j in word {
        if j >= m {
            return Err(Error::InvalidObject {
                object: "Word",
                context: format!("letter {j} out of range (m = {m})"),
            });
        }
        counts[j] += 1;
    }
    let l = word.len() as f64;
    Ok(counts.into_iter().map(|n| n as f64 / l).collect())
}

/// Per-word entry of [`ProjectorBoundsReport`].
#[derive(Debug, Clone)]
pub struct ConditionalWordReport {
    /// The word j^l the conditional projector was built for.
    pub word: Vec<usize>,
    /// Exact Tr(ρ̂_{j^l} Π^l_{ρ̂,δ}(j^l)).
    pub mass: f64,
    /// (log₂ Tr Π(j^l) − l·H(ρ̂|P_{j^l})) / √l; −∞ for rank 0.
    pub rank_ratio: f64,
}

/// Quantitative projector bounds: exact traces and masses with pass/fail
/// flags for the Chebyshev-type estimates, plus the recorded (not asserted)
/// rank ratios whose absolute constant is unspecified.
#[derive(Debug, Clone)]
pub struct ProjectorBoundsReport {
    /// Exact Tr Π^l_{ρ,δ} (the rank).
    pub trace_pi: f64,
    /// Exact Tr(ρ^{⊗l} Π^l_{ρ,δ}).
    pub state_mass: f64,
    /// 1 − d/δ².
    pub eq_state_bound: f64,
    /// state_mass ≥ 1 − d/δ².
    pub eq_state_ok: bool,
    /// (log₂ Tr Π − l·H(ρ)) / √l.
    pub rank_ratio: f64,
    /// Per-word conditional masses and ratios.
    pub conditional: Vec<ConditionalWordReport>,
    /// 1 − md/δ².
    pub eq_cond_bound: f64,
    /// Every conditional mass ≥ 1 − md/δ².
    pub eq_cond_ok: bool,
}

/// Evaluates the projector bounds for ρ and a family ρ̂ on a word sample
/// (all m^l words when that is at most 256, the m constant words otherwise).
pub fn verify_projector_bounds(
    rho: &DensityMatrix,
    hat_states: &[DensityMatrix],
    l: usize,
    delta: f64,
) -> Result<ProjectorBoundsReport> {
    let d = rho.dim() as f64;
    let m = hat_states.len();
    let pi = typical_projector(rho, l, delta)?;
    let trace_pi = pi.rank() as f64;
    let state_mass = pi.labeled_mass();
    let eq_state_bound = 1.0 - d / (delta * delta);
    let rank_ratio = (trace_pi.log2() - l as f64 * rho.entropy_bits()) / (l as f64).sqrt();

    let sample: Vec<Vec<usize>> = if (m as u128).pow(l as u32) <= 256 {
        filtered_words(m, l, |_| true)
    } else {
        (0..m).map(|j| vec![j; l]).collect()
    };
    let eq_cond_bound = 1.0 - m as f64 * d / (delta * delta);
    let mut conditional = Vec::with_capacity(sample.len());
    let mut eq_cond_ok = true;
    for word in sample {
        let cp = conditional_typical_projector(hat_states, &word, delta)?;
        let mass = cp.labeled_mass();
        eq_cond_ok &= mass >= eq_cond_bound;
        let p = empirical_distribution(&word, m)?;
        let h_cond: f64 = p
            .iter()
            .zip(hat_states)
            .map(|(pj, s)| pj * s.entropy_bits())
            .sum();
        let rank_ratio = ((cp.rank() as f64).log2() - l as f64 * h_cond) / (l as f64).sqrt();
        conditional.push(ConditionalWordReport { word, mass, rank_ratio });
    }

    Ok(ProjectorBoundsReport {
        trace_pi,
        state_mass,
        eq_state_bound,
        eq_state_ok: state_mass >= eq_state_bound,
        rank_ratio,
        conditional,
        eq_cond_bound,
        eq_cond_ok,
    })
}

/// Outcome of a deletion-monotonicity check.
#[derive(Debug, Clone, PartialEq)]
pub enum DeletionCheck {
    /// Π^l_{ρ,δ} ≥ Π^{[l]∖k}_{ρ,δ−1/r} ⊗ I verified (Löwner, tol 1e-9).
    Holds,
    /// The inequality failed; smallest eigenvalue of the difference.
    Fails {
        /// min eig(Π_full − Π_reduced⊗I).
        min_eig: f64,
    },
    /// Standing assumption δ ≥ 2/r not met; check skipped.
    Skipped {
        /// The smallest δ for which the estimate applies.
        required_delta: f64,
    },
}

/// Embeds reduced-projector words by inserting every letter at position `k`,
/// then compares densely against the full projector.
fn deletion_dominates(
    full: &TypicalProjector,
    reduced: &TypicalProjector,
    basis_at_k: &EigenLabeling,
    k: usize,
) -> Result<DeletionCheck> {
    let d = basis_at_k.dim();
    let mut bases = reduced.bases.clone();
    bases.insert(k, basis_at_k.clone());
    let mut words = Vec::with_capacity(reduced.selected_words.len() * d);
    for w in &reduced.selected_words {
        for t in 0..d {
            let mut full_word = w.clone();
            full_word.insert(k, t);
            words.push(full_word);
        }
    }
    let embedded = TypicalProjector::new(full.l, words, bases);
    let min_eig = linalg::min_eigenvalue(&(full.dense() - embedded.dense()))?;
    Ok(if min_eig >= -tol::LOEWNER { DeletionCheck::Holds } else { DeletionCheck::Fails { min_eig } })
}

/// Checks Π^l_{ρ,δ} ≥ Π^{[l]∖k}_{ρ,δ′} ⊗ I_k with δ′ = δ − 1/r, r the
/// minimal eigenvalue of ρ, under the standing assumption δ ≥ 2/r.
pub fn verify_deletion_monotonicity(
    rho: &DensityMatrix,
    l: usize,
    delta: f64,
    k: usize,
) -> Result<DeletionCheck> {
    if l < 2 || k >= l {
        return Err(Error::InvalidObject {
            object: "DeletionCheck",
            context: format!("need l ≥ 2 and k < l, got l = {l}, k = {k}"),
        });
    }
    let r = rho.spectrum().min_eigenvalue().max(0.0);
    if r <= tol::WEIGHT || delta < 2.0 / r {
        return Ok(DeletionCheck::Skipped {
            required_delta: if r <= tol::WEIGHT { f64::INFINITY } else { 2.0 / r },
        });
    }
    let full = typical_projector(rho, l, delta)?;
    let reduced = typical_projector(rho, l - 1, delta - 1.0 / r)?;
    deletion_dominates(&full, &reduced, &EigenLabeling::of(rho), k)
}

/// Conditional analogue: Π^l_{ρ̂,δ}(j^l) ≥ Π^{[l]∖k}_{ρ̂,δ′}(j^{[l]∖k}) ⊗ I_k
/// with r the minimal eigenvalue over the states occurring in the word.
pub fn verify_deletion_monotonicity_conditional(
    states: &[DensityMatrix],
    word: &[usize],
    delta: f64,
    k: usize,
) -> Result<DeletionCheck> {
    let l = word.len();
    if l < 2 || k >= l {
        return Err(Error::InvalidObject {
            object: "DeletionCheck",
            context: format!("need l ≥ 2 and k < l, got l = {l}, k = {k}"),
        });
    }
    let r = word
        .iter()
        .map(|&j| states[j].spectrum().min_eigenvalue().max(0.0))
        .fold(f64::INFINITY, f64::min);
    if r <= tol::WEIGHT || delta < 2.0 / r {
        return Ok(DeletionCheck::Skipped {
            required_delta: if r <= tol::WEIGHT { f64::INFINITY } else { 2.0 / r },
        });
    }
    let full = conditional_typical_projector(states, word, delta)?;
    let mut reduced_word = word.to_vec();
    reduced_word.remove(k);
    let reduced = conditional_typical_projector(states, &reduced_word, delta - 1.0 / r)?;
    deletion_dominates(&full, &reduced, &EigenLabeling::of(&states[word[k]]), k)
}

/// Verifies Tr₂(Π C Π) ≥ Tr₂((I⊗Π₀) C (I⊗Π₀)) for PSD C and a projector
/// Π ≥ I⊗Π₀. Factor dimensions are inferred from Π₀; premise violations are
/// reported as [`Error::PremiseViolated`].
pub fn partial_trace_projection_lemma_check(
    c: &CMatrix,
    pi: &CMatrix,
    pi0: &CMatrix,
) -> Result<bool> {
    let d2 = pi0.nrows();
    let dim = c.nrows();
    if d2 == 0 || dim % d2 != 0 || pi.nrows() != dim || c.ncols() != dim {
        return Err(Error::DimensionMismatch {
            context: format!("lemma check: dim(C) = {dim}, dim(Π₀) = {d2}"),
        });
    }
    let d1 = dim / d2;
    if linalg::min_eigenvalue(c)? < -tol::PSD_ERROR {
        return Err(Error::PremiseViolated("C is not PSD".into()));
    }
    for (name, p) in [("Π", pi), ("Π₀", pi0)] {
        if linalg::operator_norm(&(p * p - p))? > tol::LOEWNER {
            return Err(Error::PremiseViolated(format!("{name} is not idempotent")));
        }
    }
    let embedded = linalg::tensor_product(&CMatrix::identity(d1, d1), pi0);
    if !linalg::loewner_leq(&embedded, pi, tol::LOEWNER)? {
        return Err(Error::PremiseViolated("Π ≥ I⊗Π₀ fails".into()));
    }
    let lhs = linalg::partial_trace(&(pi * c * pi), &[d1, d2], &[1])?;
    let rhs = linalg::partial_trace(&(&embedded * c * &embedded), &[d1, d2], &[1])?;
    linalg::loewner_leq(&rhs, &lhs, tol::LOEWNER)
}
