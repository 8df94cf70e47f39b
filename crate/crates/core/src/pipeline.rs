//! Staged compression of product measurements.
//!
//! Starting from a POVM `a` on a single system and a state ρ, the block
//! measurement a^{⊗l} is deformed in four stages into a measurement with few
//! outcomes whose single-site marginals stay close to `a`:
//!
//! * **B** — each product element a_w is sandwiched between the conditional
//!   typical projector of its word, B_w = √ρ⁻¹Π(w) √ρ a_w √ρ Π(w)√ρ⁻¹
//!   (all operators l-fold tensor powers).
//! * **C** — a further sandwich by the typical projector of ρ,
//!   C_w = Π_typ B_w Π_typ.
//! * **D** — words outside the typical set T of the outcome distribution λ
//!   are discarded.
//! * **E** — a final sandwich by the spectral cutoff Π of
//!   ω = Σ_{w∈T} √ρ C'_w √ρ, which removes the low-weight directions that
//!   would dominate the selection size.
//!
//! A random selection of M words drawn from the normalized restriction of λ^l
//! to T then yields the compressed POVM: the scaled elements
//! Ã_w = n_w/((1+η)M) · (S/λ_w) · E_w (n_w = multiplicity of w among the
//! draws) are kept when two deterministic checks pass — the scaled sum stays
//! under the typical projector, and every single-site marginal lands within
//! the analytic deviation budget — and the remainder I − ΣÃ is spread evenly
//! over the selected outcomes. The number of distinct selected words governs
//! the rate (log₂ M)/l, which approaches the entropy defect
//! H(ρ) − Σ_j λ_j H(ρ̂_j) of the canonical ensemble.
//!
//! Everything here is deterministic given the seed: words live in `BTreeMap`s
//! (lexicographic iteration), sums are accumulated in that order, and retry
//! seeds derive from the base seed by a fixed integer mix.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    self, eig_hermitian, kron_list, loewner_leq, min_eigenvalue, operator_norm, partial_trace,
    re, tensor_power, trace_norm, trace_re, CMatrix,
};
use crate::quantum::{
    canonical_ensemble, single_letter_fidelity, CanonicalEnsemble, DensityMatrix, Ensemble,
    FidelityMatrix, Povm,
};
use crate::tol;
use crate::typicality::{
    check_cap, conditional_typical_projector_capped, filtered_words, typical_projector_capped,
    typical_sequences_capped, TypicalProjector, TypicalSet,
};

/// Outcome word j^l: one letter per site.
pub type Word = Vec<usize>;

/// Which deformation stage a word-indexed family came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Conditional-typical sandwich of the product elements.
    B,
    /// Typical-projector sandwich.
    C,
    /// Restriction to typical words.
    D,
    /// Spectral-cutoff sandwich.
    E,
}

impl Stage {
    /// Single-letter display name.
    pub fn name(self) -> &'static str {
        match self {
            Stage::B => "B",
            Stage::C => "C",
            Stage::D => "D",
            Stage::E => "E",
        }
    }
}

/// A family of PSD operators indexed by outcome words, summing to at most the
/// identity. Missing words stand for zero elements.
#[derive(Debug, Clone)]
pub struct WordIndexedSubPovm {
    stage: Stage,
    elements: BTreeMap<Word, CMatrix>,
    l: usize,
    m: usize,
    dim: usize,
}

impl WordIndexedSubPovm {
    /// Validates the family: words of length `l` over `m` letters, square
    /// `dim`-dimensional PSD elements, Σ ≤ I in the Löwner order.
    pub fn new(
        stage: Stage,
        elements: BTreeMap<Word, CMatrix>,
        l: usize,
        m: usize,
        dim: usize,
    ) -> Result<Self> {
        if l == 0 || m == 0 || dim == 0 {
            return Err(Error::InvalidObject {
                object: "WordIndexedSubPovm",
                context: "l, m and dim must be positive".into(),
            });
        }
        let mut sum = CMatrix::zeros(dim, dim);
        for (w, e) in &elements {
            if w.len() != l {
                return Err(Error::DimensionMismatch {
                    context: format!("word length {} vs l = {l}", w.len()),
                });
            }
            if let Some(&j) = w.iter().find(|&&j| j >= m) {
                return Err(Error::InvalidObject {
                    object: "WordIndexedSubPovm",
                    context: format!("letter {j} outside alphabet of size {m}"),
                });
            }
            if e.nrows() != dim || e.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    context: format!("element is {}×{}, expected {dim}×{dim}", e.nrows(), e.ncols()),
                });
            }
            let min = min_eigenvalue(e)?;
            if min < -tol::PSD_CLAMP {
                return Err(Error::NotPsd { min_eig: min });
            }
            sum += e;
        }
        if !elements.is_empty() && !loewner_leq(&sum, &CMatrix::identity(dim, dim), tol::LOEWNER)? {
            return Err(Error::InvalidObject {
                object: "WordIndexedSubPovm",
                context: format!("stage {} sum exceeds the identity", stage.name()),
            });
        }
        Ok(Self { stage, elements, l, m, dim })
    }

    /// Deformation stage the family belongs to.
    pub fn stage(&self) -> Stage {
        self.stage
    }

    /// Word-indexed elements, lexicographically ordered.
    pub fn elements(&self) -> &BTreeMap<Word, CMatrix> {
        &self.elements
    }

    /// Element of a word; `None` stands for the zero operator.
    pub fn get(&self, word: &[usize]) -> Option<&CMatrix> {
        self.elements.get(word)
    }

    /// Word length.
    pub fn l(&self) -> usize {
        self.l
    }

    /// Alphabet size.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Ambient dimension d^l.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored (nonzero) words.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    /// Whether no words are stored.
    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Σ_w of the stored elements.
    pub fn sum(&self) -> CMatrix {
        let mut s = CMatrix::zeros(self.dim, self.dim);
        for e in self.elements.values() {
            s += e;
        }
        s
    }
}

/// Product element a_{w_1} ⊗ … ⊗ a_{w_l} of a word.
pub fn product_povm_element(a: &Povm, word: &[usize]) -> Result<CMatrix> {
    if word.is_empty() {
        return Err(Error::InvalidObject { object: "Word", context: "empty word".into() });
    }
    if let Some(&j) = word.iter().find(|&&j| j >= a.len()) {
        return Err(Error::InvalidObject {
            object: "Word",
            context: format!("letter {j} outside alphabet of size {}", a.len()),
        });
    }
    let mut out = CMatrix::identity(1, 1);
    for &j in word {
        out = linalg::tensor_product(&out, a.element(j));
    }
    Ok(out)
}

/// The full product family a^{⊗l} = {a_w}_{w ∈ m^l}.
pub fn product_family(a: &Povm, l: usize, cap_words: usize) -> Result<BTreeMap<Word, CMatrix>> {
    if l == 0 {
        return Err(Error::InvalidObject { object: "Word", context: "l must be positive".into() });
    }
    check_cap(a.len(), l, cap_words, "product_family")?;
    let mut out = BTreeMap::new();
    for w in filtered_words(a.len(), l, |_| true) {
        let e = product_povm_element(a, &w)?;
        out.insert(w, e);
    }
    Ok(out)
}

/// Checks that a word-indexed family is well formed and returns (l, dim).
fn family_shape(family: &BTreeMap<Word, CMatrix>, m: usize) -> Result<(usize, usize)> {
    let Some((w0, e0)) = family.iter().next() else {
        return Err(Error::InvalidObject {
            object: "WordIndexedSubPovm",
            context: "empty word-indexed family".into(),
        });
    };
    let l = w0.len();
    let dim = e0.nrows();
    if l == 0 {
        return Err(Error::InvalidObject { object: "Word", context: "empty word".into() });
    }
    for (w, e) in family {
        if w.len() != l {
            return Err(Error::DimensionMismatch { context: "word lengths differ".into() });
        }
        if let Some(&j) = w.iter().find(|&&j| j >= m) {
            return Err(Error::InvalidObject {
                object: "Word",
                context: format!("letter {j} outside alphabet of size {m}"),
            });
        }
        if e.nrows() != dim || e.ncols() != dim {
            return Err(Error::DimensionMismatch { context: "element dimensions differ".into() });
        }
    }
    Ok((l, dim))
}

/// Checks dim = d^l for the ambient factorization.
fn check_factorization(dim: usize, d: usize, l: usize) -> Result<()> {
    if (d as u128).pow(l as u32) != dim as u128 {
        return Err(Error::DimensionMismatch {
            context: format!("family dimension {dim} is not {d}^{l}"),
        });
    }
    Ok(())
}

/// √ρ-conjugated site-k marginals Tr_{≠k}(√ρ^{⊗l} G_j √ρ^{⊗l}), where
/// G_j = Σ_{w : w_k = j} A_w. These equal √ρ A^(k)_j √ρ and are the natural
/// quantities for trace-norm deviation tables.
pub fn conjugated_marginal(
    family: &BTreeMap<Word, CMatrix>,
    m: usize,
    k: usize,
    rho: &DensityMatrix,
) -> Result<Vec<CMatrix>> {
    let (l, dim) = family_shape(family, m)?;
    let d = rho.dim();
    check_factorization(dim, d, l)?;
    if k >= l {
        return Err(Error::InvalidObject {
            object: "Word",
            context: format!("site {k} outside word length {l}"),
        });
    }
    let mut groups = vec![CMatrix::zeros(dim, dim); m];
    for (w, e) in family {
        groups[w[k]] += e;
    }
    let sq = tensor_power(rho.sqrt(), l);
    let dims = vec![d; l];
    let traced: Vec<usize> = (0..l).filter(|&i| i != k).collect();
    groups
        .into_iter()
        .map(|g| partial_trace(&(&sq * g * &sq), &dims, &traced))
        .collect()
}

/// Site-k marginal elements A^(k)_j = √ρ⁻¹ Tr_{≠k}(√ρ^{⊗l} G_j √ρ^{⊗l}) √ρ⁻¹.
///
/// For full-rank ρ this equals Tr_{≠k}((ρ^{⊗≠k} ⊗ I_k) G_j); for rank-deficient
/// ρ it is the compression of that operator onto the support.
pub fn marginal_elements(
    family: &BTreeMap<Word, CMatrix>,
    m: usize,
    k: usize,
    rho: &DensityMatrix,
) -> Result<Vec<CMatrix>> {
    let inv = rho.inv_sqrt();
    Ok(conjugated_marginal(family, m, k, rho)?
        .into_iter()
        .map(|mid| inv * mid * inv)
        .collect())
}

/// Site-k marginal as a validated POVM (errors if completeness fails, e.g.
/// when the family is a strict sub-POVM).
pub fn marginal_povm(
    family: &BTreeMap<Word, CMatrix>,
    m: usize,
    k: usize,
    rho: &DensityMatrix,
) -> Result<Povm> {
    Povm::new(marginal_elements(family, m, k, rho)?)
}

/// Joint marginal on a set K of sites:
/// A^(K)_{j^K} = Tr_{[l]∖K}((ρ^{⊗[l]∖K} ⊗ I^{⊗K}) G_{j^K}),
/// G_{j^K} = Σ_{w : w|K = j^K} A_w. Keys run over all |K|-letter words, with
/// zero elements for unrepresented restrictions.
pub fn k_subset_marginal(
    family: &BTreeMap<Word, CMatrix>,
    m: usize,
    kset: &[usize],
    rho: &DensityMatrix,
) -> Result<BTreeMap<Word, CMatrix>> {
    let (l, dim) = family_shape(family, m)?;
    let d = rho.dim();
    check_factorization(dim, d, l)?;
    if kset.is_empty() || kset.windows(2).any(|p| p[0] >= p[1]) || kset[kset.len() - 1] >= l {
        return Err(Error::InvalidObject {
            object: "Word",
            context: format!("site set {kset:?} must be strictly increasing within 0..{l}"),
        });
    }
    check_cap(m, kset.len(), tol::CAP_WORDS, "k_subset_marginal")?;
    let eye = CMatrix::identity(d, d);
    let factors: Vec<&CMatrix> =
        (0..l).map(|i| if kset.contains(&i) { &eye } else { rho.matrix() }).collect();
    let weight = kron_list(&factors);
    let mut groups: BTreeMap<Word, CMatrix> = filtered_words(m, kset.len(), |_| true)
        .into_iter()
        .map(|w| (w, CMatrix::zeros(dim, dim)))
        .collect();
    for (w, e) in family {
        let key: Word = kset.iter().map(|&i| w[i]).collect();
        *groups.get_mut(&key).expect("all restrictions enumerated") += e;
    }
    let dims = vec![d; l];
    let traced: Vec<usize> = (0..l).filter(|i| !kset.contains(i)).collect();
    groups
        .into_iter()
        .map(|(key, g)| Ok((key, partial_trace(&(&weight * g), &dims, &traced)?)))
        .collect()
}

/// Block estimation fidelity of a word-indexed measurement:
/// (1/l) Σ_k Σ_ij p_i Tr(ρ_i A^(k)_j) F_ij, i.e. the per-site average of the
/// estimation fidelity of the marginals against the source ensemble.
pub fn block_fidelity(
    family: &BTreeMap<Word, CMatrix>,
    a: &Povm,
    rho: &DensityMatrix,
    ensemble: &Ensemble,
    fidelity: &FidelityMatrix,
) -> Result<f64> {
    let m = a.len();
    if fidelity.n_states() != ensemble.len() || fidelity.n_outcomes() != m {
        return Err(Error::DimensionMismatch {
            context: format!(
                "fidelity table {}×{} vs ensemble {} and alphabet {m}",
                fidelity.n_states(),
                fidelity.n_outcomes(),
                ensemble.len()
            ),
        });
    }
    if ensemble.dim() != rho.dim() || a.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            context: "ensemble, state and measurement dimensions differ".into(),
        });
    }
    let (l, _) = family_shape(family, m)?;
    let mut total = 0.0;
    for k in 0..l {
        let marg = marginal_elements(family, m, k, rho)?;
        for (i, (p, st)) in ensemble.probs().iter().zip(ensemble.states()).enumerate() {
            for (j, aj) in marg.iter().enumerate() {
                total += p * trace_re(&(st.matrix() * aj)) * fidelity.get(i, j);
            }
        }
    }
    Ok(total / l as f64)
}

/// Deviation functionals comparing a block measurement's marginals with the
/// single-letter measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    /// |F_block(A) − F(a)|: estimation-fidelity deviation.
    C0,
    /// Σ_ij |(1/l) Σ_k p_i Tr(ρ_i A^(k)_j) − p_i Tr(ρ_i a_j)|: site-averaged
    /// joint-distribution deviation.
    C1,
    /// max_{k,i} Σ_j |Tr(ρ_i (A^(k)_j − a_j))|: worst per-state statistics.
    C2,
    /// (1/l) Σ_k Σ_j ‖A^(k)_j − a_j‖: site-averaged operator deviation.
    C2Half,
    /// max_k Σ_j ‖A^(k)_j − a_j‖: worst-site operator deviation.
    C3,
    /// Σ_k Σ_j ‖A^(k)_j − a_j‖: total operator deviation.
    C4,
    /// Σ_{∅≠K, |K|≤ν} Σ_{j^K} ‖A^(K)_{j^K} − ⊗_{k∈K} a_{j_k}‖: joint-marginal
    /// deviation over small site subsets.
    C5,
}

/// Inputs for [`check_condition`]. The ensemble and fidelity table are only
/// needed for the statistics conditions (C0 needs both, C1/C2 the ensemble).
#[derive(Clone, Copy)]
pub struct ConditionContext<'a> {
    /// Word-indexed block measurement A.
    pub family: &'a BTreeMap<Word, CMatrix>,
    /// Single-letter reference measurement a.
    pub a: &'a Povm,
    /// Source average state ρ.
    pub rho: &'a DensityMatrix,
    /// Largest subset size scanned by C5.
    pub nu: usize,
    /// Source ensemble (for C0, C1, C2).
    pub ensemble: Option<&'a Ensemble>,
    /// Estimation fidelity table (for C0).
    pub fidelity: Option<&'a FidelityMatrix>,
}

/// All subsets of {0,…,l−1} of size s, in lexicographic order.
fn subsets_of_size(l: usize, s: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if s == 0 || s > l {
        return out;
    }
    let mut idx: Vec<usize> = (0..s).collect();
    loop {
        out.push(idx.clone());
        let mut i = s;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + l - s {
                idx[i] += 1;
                for j in i + 1..s {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Per-site operator-norm deviations Σ_j ‖A^(k)_j − a_j‖ for k = 0,…,l−1.
pub fn marginal_deviation_table(
    family: &BTreeMap<Word, CMatrix>,
    a: &Povm,
    rho: &DensityMatrix,
) -> Result<Vec<f64>> {
    let m = a.len();
    let (l, _) = family_shape(family, m)?;
    let mut out = Vec::with_capacity(l);
    for k in 0..l {
        let marg = marginal_elements(family, m, k, rho)?;
        let mut s = 0.0;
        for (j, aj) in marg.iter().enumerate() {
            s += operator_norm(&(aj - a.element(j)))?;
        }
        out.push(s);
    }
    Ok(out)
}

/// Evaluates one deviation condition. All conditions vanish when the family
/// is exactly a^{⊗l}.
pub fn check_condition(cond: Condition, ctx: &ConditionContext) -> Result<f64> {
    let m = ctx.a.len();
    let (l, _) = family_shape(ctx.family, m)?;
    let need_ensemble = |what: &str| -> Result<&Ensemble> {
        ctx.ensemble.ok_or_else(|| Error::InvalidObject {
            object: "ConditionContext",
            context: format!("{what} requires a source ensemble"),
        })
    };
    match cond {
        Condition::C0 => {
            let e = need_ensemble("C0")?;
            let f = ctx.fidelity.ok_or_else(|| Error::InvalidObject {
                object: "ConditionContext",
                context: "C0 requires a fidelity table".into(),
            })?;
            let block = block_fidelity(ctx.family, ctx.a, ctx.rho, e, f)?;
            let single = single_letter_fidelity(e, f, ctx.a)?;
            Ok((block - single).abs())
        }
        Condition::C1 => {
            let e = need_ensemble("C1")?;
            // Site-averaged outcome statistics per source state.
            let mut avg = vec![vec![0.0f64; m]; e.len()];
            for k in 0..l {
                let marg = marginal_elements(ctx.family, m, k, ctx.rho)?;
                for (i, st) in e.states().iter().enumerate() {
                    for (j, aj) in marg.iter().enumerate() {
                        avg[i][j] += trace_re(&(st.matrix() * aj)) / l as f64;
                    }
                }
            }
            let mut total = 0.0;
            for (i, (p, st)) in e.probs().iter().zip(e.states()).enumerate() {
                for j in 0..m {
                    let reference = p * trace_re(&(st.matrix() * ctx.a.element(j)));
                    total += (p * avg[i][j] - reference).abs();
                }
            }
            Ok(total)
        }
        Condition::C2 => {
            let e = need_ensemble("C2")?;
            let mut worst = 0.0f64;
            for k in 0..l {
                let marg = marginal_elements(ctx.family, m, k, ctx.rho)?;
                for st in e.states() {
                    let mut s = 0.0;
                    for (j, aj) in marg.iter().enumerate() {
                        s += trace_re(&(st.matrix() * (aj - ctx.a.element(j)))).abs();
                    }
                    worst = worst.max(s);
                }
            }
            Ok(worst)
        }
        Condition::C2Half | Condition::C3 | Condition::C4 => {
            let table = marginal_deviation_table(ctx.family, ctx.a, ctx.rho)?;
            Ok(match cond {
                Condition::C2Half => table.iter().sum::<f64>() / l as f64,
                Condition::C3 => table.iter().fold(0.0f64, |a, &x| a.max(x)),
                _ => table.iter().sum(),
            })
        }
        Condition::C5 => {
            let cap = ctx.nu.min(l);
            if cap == 0 {
                return Err(Error::InvalidObject {
                    object: "ConditionContext",
                    context: "C5 needs ν ≥ 1".into(),
                });
            }
            let mut total = 0.0;
            for s in 1..=cap {
                for kset in subsets_of_size(l, s) {
                    let joint = k_subset_marginal(ctx.family, m, &kset, ctx.rho)?;
                    for (key, op) in &joint {
                        let reference = product_povm_element(ctx.a, key)?;
                        total += operator_norm(&(op - reference))?;
                    }
                }
            }
            Ok(total)
        }
    }
}

/// Stage B: conditional-typical sandwich of each product element,
/// B_w = √ρ⁻¹^{⊗l} Π(w) √ρ^{⊗l} a_w √ρ^{⊗l} Π(w) √ρ⁻¹^{⊗l}.
///
/// `canon` must belong to the (ρ, a) pair and live on the full space, i.e.
/// ρ must be full rank (restrict to the support first otherwise). Words with
/// a zero-weight letter have a_w = 0 on the support and are omitted.
pub fn stage_b(
    a: &Povm,
    rho: &DensityMatrix,
    canon: &CanonicalEnsemble,
    l: usize,
    delta: f64,
    cap_dim: usize,
    cap_words: usize,
) -> Result<WordIndexedSubPovm> {
    let d = rho.dim();
    let m = a.len();
    if a.dim() != d {
        return Err(Error::DimensionMismatch {
            context: format!("state dim {d} vs POVM dim {}", a.dim()),
        });
    }
    if canon.support_dim != d {
        return Err(Error::InvalidObject {
            object: "CanonicalEnsemble",
            context: "stage B needs a full-rank state; restrict to the support first".into(),
        });
    }
    if l == 0 {
        return Err(Error::InvalidObject { object: "Word", context: "l must be positive".into() });
    }
    check_cap(d, l, cap_dim, "stage_b")?;
    check_cap(m, l, cap_words, "stage_b")?;

    // Conditional states aligned with the full alphabet; dropped letters keep
    // a placeholder that is never consulted because their words are omitted.
    let mut dropped = vec![false; m];
    for &j in &canon.dropped {
        dropped[j] = true;
    }
    let mut hat: Vec<DensityMatrix> = vec![rho.clone(); m];
    for (idx, &j) in canon.kept.iter().enumerate() {
        hat[j] = canon.ensemble.states()[idx].clone();
    }

    let sq = tensor_power(rho.sqrt(), l);
    let inv = tensor_power(rho.inv_sqrt(), l);
    let mut elements = BTreeMap::new();
    for w in filtered_words(m, l, |_| true) {
        if w.iter().any(|&j| dropped[j]) {
            continue;
        }
        let pi_w = conditional_typical_projector_capped(&hat, &w, delta, cap_dim)?;
        let aw = product_povm_element(a, &w)?;
        let sandwich = pi_w.dense() * &sq * aw * &sq * pi_w.dense();
        elements.insert(w, &inv * sandwich * &inv);
    }
    WordIndexedSubPovm::new(Stage::B, elements, l, m, sq.nrows())
}

/// Stage C: typical-projector sandwich C_w = Π_typ B_w Π_typ.
pub fn stage_c(b: &WordIndexedSubPovm, pi_typ: &TypicalProjector) -> Result<WordIndexedSubPovm> {
    if pi_typ.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            context: format!("projector dim {} vs family dim {}", pi_typ.dim(), b.dim()),
        });
    }
    let p = pi_typ.dense();
    let elements = b.elements().iter().map(|(w, e)| (w.clone(), p * e * p)).collect();
    WordIndexedSubPovm::new(Stage::C, elements, b.l(), b.m(), b.dim())
}

/// Stage D: restriction to the typical word set T.
pub fn stage_d(c: &WordIndexedSubPovm, t: &TypicalSet) -> Result<WordIndexedSubPovm> {
    if t.l != c.l() || t.m != c.m() {
        return Err(Error::DimensionMismatch {
            context: format!("typical set ({}, {}) vs family ({}, {})", t.l, t.m, c.l(), c.m()),
        });
    }
    let keep: BTreeSet<&Word> = t.words.iter().collect();
    let elements =
        c.elements().iter().filter(|(w, _)| keep.contains(w)).map(|(w, e)| (w.clone(), e.clone()));
    WordIndexedSubPovm::new(Stage::D, elements.collect(), c.l(), c.m(), c.dim())
}

/// Spectral cutoff of ω = Σ_{w∈T} √ρ^{⊗l} D_w √ρ^{⊗l}.
#[derive(Debug, Clone)]
pub struct Cutoff {
    /// ω itself.
    pub omega: CMatrix,
    /// Projector onto the eigenvectors of ω with eigenvalue ≥ c·α.
    pub projector: CMatrix,
    /// Rank of the cutoff projector.
    pub rank: usize,
    /// α: smallest nonzero eigenvalue of Π_typ ρ^{⊗l} Π_typ (exact product
    /// of eigenvalues over the lightest selected label word).
    pub exact_alpha: f64,
    /// c = (m+1)(d+1)/δ².
    pub c: f64,
    /// Retained weight Tr(ωΠ).
    pub omega_weight: f64,
    /// Whether Tr(ωΠ) ≥ 1 − 2c.
    pub weight_ok: bool,
}

/// Builds the spectral cutoff for stage E. `m` is the number of letters with
/// positive weight (it enters c = (m+1)(d+1)/δ²).
pub fn cutoff_projector(
    d_stage: &WordIndexedSubPovm,
    rho: &DensityMatrix,
    delta: f64,
    m: usize,
    pi_typ: &TypicalProjector,
) -> Result<Cutoff> {
    let d = rho.dim();
    let l = d_stage.l();
    check_factorization(d_stage.dim(), d, l)?;
    if pi_typ.dim() != d_stage.dim() {
        return Err(Error::DimensionMismatch {
            context: format!("projector dim {} vs family dim {}", pi_typ.dim(), d_stage.dim()),
        });
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidObject {
            object: "Cutoff",
            context: format!("δ must be positive, got {delta}"),
        });
    }
    let exact_alpha = pi_typ.min_word_mass();
    if !exact_alpha.is_finite() || exact_alpha <= 0.0 {
        return Err(Error::DegenerateAlpha(exact_alpha));
    }
    let sq = tensor_power(rho.sqrt(), l);
    let mut omega = CMatrix::zeros(d_stage.dim(), d_stage.dim());
    for e in d_stage.elements().values() {
        omega += &sq * e * &sq;
    }
    let c = (m as f64 + 1.0) * (d as f64 + 1.0) / (delta * delta);
    // Keep eigenvectors with eigenvalue ≥ c·α; the relative slack absorbs
    // rounding when an eigenvalue sits exactly at the threshold.
    let threshold = c * exact_alpha * (1.0 - tol::CUTOFF_REL_SLACK);
    let spectrum = eig_hermitian(&omega)?;
    let rank = spectrum.eigenvalues.iter().filter(|&&x| x >= threshold).count();
    let projector = spectrum.map(|x| if x >= threshold { 1.0 } else { 0.0 });
    let omega_weight = trace_re(&(&omega * &projector));
    let weight_ok = omega_weight >= 1.0 - 2.0 * c - 1e-12;
    Ok(Cutoff { omega, projector, rank, exact_alpha, c, omega_weight, weight_ok })
}

/// Stage E: cutoff sandwich E_w = √ρ⁻¹^{⊗l} Π √ρ^{⊗l} D_w √ρ^{⊗l} Π √ρ⁻¹^{⊗l}.
pub fn stage_e(
    d_stage: &WordIndexedSubPovm,
    cutoff: &CMatrix,
    rho: &DensityMatrix,
) -> Result<WordIndexedSubPovm> {
    let d = rho.dim();
    let l = d_stage.l();
    check_factorization(d_stage.dim(), d, l)?;
    if cutoff.nrows() != d_stage.dim() || cutoff.ncols() != d_stage.dim() {
        return Err(Error::DimensionMismatch {
            context: format!("cutoff is {}×{}, family dim {}", cutoff.nrows(), cutoff.ncols(), d_stage.dim()),
        });
    }
    let sq = tensor_power(rho.sqrt(), l);
    let inv = tensor_power(rho.inv_sqrt(), l);
    let elements = d_stage
        .elements()
        .iter()
        .map(|(w, e)| (w.clone(), &inv * cutoff * &sq * e * &sq * cutoff * &inv))
        .collect();
    WordIndexedSubPovm::new(Stage::E, elements, l, d_stage.m(), d_stage.dim())
}

/// β = max_{w∈T} ‖(S/λ_w) √ρ^{⊗l} E_w √ρ^{⊗l}‖: the exact operator-norm scale
/// of the sampled summands, every one of which obeys X_w ≤ β·Π.
pub fn exact_beta(
    e_stage: &WordIndexedSubPovm,
    rho: &DensityMatrix,
    lambda: &[f64],
    s_mass: f64,
) -> Result<f64> {
    let l = e_stage.l();
    check_factorization(e_stage.dim(), rho.dim(), l)?;
    if lambda.len() != e_stage.m() {
        return Err(Error::DimensionMismatch {
            context: format!("{} weights vs alphabet {}", lambda.len(), e_stage.m()),
        });
    }
    let sq = tensor_power(rho.sqrt(), l);
    let mut beta = 0.0f64;
    for (w, e) in e_stage.elements() {
        let lam = TypicalSet::word_probability(lambda, w);
        if lam <= tol::LAMBDA_UNDERFLOW {
            continue;
        }
        let x = &sq * e * &sq * re(s_mass / lam);
        beta = beta.max(operator_norm(&x)?);
    }
    Ok(beta)
}

/// Practical ceiling on the selection size; larger prescriptions indicate a
/// parameter regime this implementation is not meant to sample.
const MAX_SELECTION_SIZE: f64 = 1e12;

/// Smallest integer M with M > 2 ln2 · (1 − log₂α)/(η²c) · (β/α).
pub fn choose_m(exact_alpha: f64, exact_beta: f64, c: f64, eta: f64) -> Result<u64> {
    if !exact_alpha.is_finite() || exact_alpha <= 0.0 {
        return Err(Error::DegenerateAlpha(exact_alpha));
    }
    if !(eta > 0.0) || !(c > 0.0) || !(exact_beta >= 0.0) {
        return Err(Error::InvalidObject {
            object: "Selection",
            context: format!("need η > 0, c > 0, β ≥ 0 (got η = {eta}, c = {c}, β = {exact_beta})"),
        });
    }
    let thr = 2.0 * std::f64::consts::LN_2 * (1.0 - exact_alpha.log2()) / (eta * eta * c)
        * (exact_beta / exact_alpha);
    if !thr.is_finite() || thr > MAX_SELECTION_SIZE {
        return Err(Error::InvalidObject {
            object: "Selection",
            context: format!("prescribed selection size {thr:.3e} exceeds the practical cap"),
        });
    }
    Ok(if thr < 0.0 { 1 } else { thr.floor() as u64 + 1 })
}

/// One randomized selection attempt and its deterministic verification.
#[derive(Debug, Clone)]
pub struct SelectionAttempt {
    /// RNG seed of this attempt (derived from the base seed).
    pub seed: u64,
    /// Whether Σ Ã ≤ Π_typ held (Löwner, tol 1e-9).
    pub sum_ok: bool,
    /// Whether all conjugated marginal deviations stayed within the budget.
    pub marginal_ok: bool,
    /// Worst conjugated marginal deviation max_{k,j} ‖·‖₁ observed.
    pub marginal_worst: f64,
    /// Budget c̃ + δ√l/√M for the marginal deviations.
    pub marginal_budget: f64,
}

/// Outcome of the randomized selection.
#[derive(Debug, Clone)]
pub struct Selection {
    /// Number of i.i.d. draws M.
    pub draws: u64,
    /// Distinct drawn words with multiplicities (last attempt).
    pub counts: BTreeMap<Word, u64>,
    /// Scaled elements Ã_w = n_w/((1+η)M) · (S/λ_w) · E_w (last attempt).
    pub tilde: BTreeMap<Word, CMatrix>,
    /// Whether some attempt passed both checks.
    pub success: bool,
    /// Every attempt in order; the last one produced `counts`/`tilde`.
    pub attempts: Vec<SelectionAttempt>,
}

/// Fixed integer mix deriving per-attempt RNG seeds from the base seed.
fn derive_seed(base: u64, attempt: u32) -> u64 {
    let mut z = base.wrapping_add(u64::from(attempt + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws M words i.i.d. from λ^l restricted to T (probabilities λ_w/S) and
/// verifies the two selection conditions deterministically:
///
/// 1. Σ_w Ã_w ≤ Π_typ in the Löwner order, and
/// 2. max_{k,j} ‖(1/M) Σ_{w: w_k=j} n_w (S/λ_w) Tr_{≠k}(√ρ E_w √ρ) − √ρ a_j √ρ‖₁
///    ≤ c̃ + δ√l/√M.
///
/// Failed attempts are retried with freshly derived seeds, up to
/// `max_attempts`; each attempt is recorded.
#[allow(clippy::too_many_arguments)]
pub fn random_select(
    e_stage: &WordIndexedSubPovm,
    t: &TypicalSet,
    lambda: &[f64],
    pi_typ: &TypicalProjector,
    rho: &DensityMatrix,
    a: &Povm,
    m_draws: u64,
    eta: f64,
    c_tilde: f64,
    base_seed: u64,
    max_attempts: u32,
) -> Result<Selection> {
    let l = e_stage.l();
    let m = e_stage.m();
    let d = rho.dim();
    check_factorization(e_stage.dim(), d, l)?;
    if t.l != l || t.m != m || lambda.len() != m || a.len() != m || a.dim() != d {
        return Err(Error::DimensionMismatch {
            context: "selection inputs disagree on (l, m, d)".into(),
        });
    }
    if m_draws == 0 || max_attempts == 0 {
        return Err(Error::InvalidObject {
            object: "Selection",
            context: "need at least one draw and one attempt".into(),
        });
    }

    // Sampling support: typical words with non-degenerate probability.
    let mut support: Vec<&Word> = Vec::new();
    let mut cumulative: Vec<f64> = Vec::new();
    let mut total = 0.0f64;
    for w in &t.words {
        let p = TypicalSet::word_probability(lambda, w);
        if p <= tol::LAMBDA_UNDERFLOW {
            continue;
        }
        total += p;
        support.push(w);
        cumulative.push(total);
    }
    if support.is_empty() {
        return Err(Error::AllWeightsZero(tol::LAMBDA_UNDERFLOW));
    }

    let s_mass = t.mass;
    let sq = tensor_power(rho.sqrt(), l);
    let dims = vec![d; l];
    let zero = CMatrix::zeros(d, d);
    // Conjugated single-letter references √ρ a_j √ρ.
    let refs: Vec<CMatrix> =
        a.elements().iter().map(|e| rho.sqrt() * e * rho.sqrt()).collect();
    // Per-word reduced summands Tr_{≠k}(√ρ^{⊗l} E_w √ρ^{⊗l}), filled on demand
    // and reused across attempts.
    let mut reduced: BTreeMap<Word, Vec<CMatrix>> = BTreeMap::new();

    let budget = c_tilde + t.delta * (l as f64).sqrt() / (m_draws as f64).sqrt();
    let mf = m_draws as f64;
    let mut attempts = Vec::new();

    for attempt in 0..max_attempts {
        let seed = derive_seed(base_seed, attempt);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut counts: BTreeMap<Word, u64> = BTreeMap::new();
        for _ in 0..m_draws {
            let x = rng.gen::<f64>() * total;
            let idx = cumulative.partition_point(|&c| c <= x).min(support.len() - 1);
            *counts.entry(support[idx].clone()).or_insert(0) += 1;
        }

        for w in counts.keys() {
            if !reduced.contains_key(w) {
                let per_site: Result<Vec<CMatrix>> = match e_stage.get(w) {
                    Some(e) => {
                        let mid = &sq * e * &sq;
                        (0..l)
                            .map(|k| {
                                let traced: Vec<usize> = (0..l).filter(|&i| i != k).collect();
                                partial_trace(&mid, &dims, &traced)
                            })
                            .collect()
                    }
                    None => Ok(vec![zero.clone(); l]),
                };
                reduced.insert(w.clone(), per_site?);
            }
        }

        // Scaled sum Σ Ã and the conjugated marginal sums per (k, j).
        let mut tilde_sum = CMatrix::zeros(e_stage.dim(), e_stage.dim());
        let mut marg = vec![vec![CMatrix::zeros(d, d); m]; l];
        for (w, &n) in &counts {
            let lam = TypicalSet::word_probability(lambda, w);
            let weight = n as f64 * s_mass / (lam * mf);
            if let Some(e) = e_stage.get(w) {
                tilde_sum += e * re(weight / (1.0 + eta));
            }
            let per_site = &reduced[w];
            for (k, r) in per_site.iter().enumerate() {
                marg[k][w[k]] += r * re(weight);
            }
        }

        let sum_ok = loewner_leq(&tilde_sum, pi_typ.dense(), tol::LOEWNER)?;
        let mut worst = 0.0f64;
        for row in &marg {
            for (j, g) in row.iter().enumerate() {
                worst = worst.max(trace_norm(&(g - &refs[j]))?);
            }
        }
        let marginal_ok = worst <= budget + 1e-9;
        attempts.push(SelectionAttempt {
            seed,
            sum_ok,
            marginal_ok,
            marginal_worst: worst,
            marginal_budget: budget,
        });

        let success = sum_ok && marginal_ok;
        if success || attempt + 1 == max_attempts {
            let mut tilde = BTreeMap::new();
            for (w, &n) in &counts {
                let lam = TypicalSet::word_probability(lambda, w);
                let weight = n as f64 * s_mass / (lam * mf * (1.0 + eta));
                let e = match e_stage.get(w) {
                    Some(e) => e * re(weight),
                    None => CMatrix::zeros(e_stage.dim(), e_stage.dim()),
                };
                tilde.insert(w.clone(), e);
            }
            return Ok(Selection { draws: m_draws, counts, tilde, success, attempts });
        }
    }
    unreachable!("loop returns on the last attempt")
}

/// Completes the scaled sub-POVM to a POVM: A_w = Ã_w + (I − Σ Ã)/M over the
/// M distinct selected words. Returns the completed family and the remainder.
pub fn distribute_remainder(
    tilde: &BTreeMap<Word, CMatrix>,
    dim: usize,
) -> Result<(BTreeMap<Word, CMatrix>, CMatrix)> {
    if tilde.is_empty() {
        return Err(Error::InvalidObject {
            object: "Selection",
            context: "no selected words to complete".into(),
        });
    }
    let mut sum = CMatrix::zeros(dim, dim);
    for e in tilde.values() {
        if e.nrows() != dim || e.ncols() != dim {
            return Err(Error::DimensionMismatch {
                context: format!("element is {}×{}, expected {dim}×{dim}", e.nrows(), e.ncols()),
            });
        }
        sum += e;
    }
    let remainder = CMatrix::identity(dim, dim) - sum;
    let min = min_eigenvalue(&remainder)?;
    if min < -tol::LOEWNER {
        return Err(Error::InvalidObject {
            object: "Selection",
            context: format!("scaled elements exceed the identity (min remainder eig {min:.3e})"),
        });
    }
    let share = &remainder * re(1.0 / tilde.len() as f64);
    let completed =
        tilde.iter().map(|(w, e)| (w.clone(), e + &share)).collect::<BTreeMap<_, _>>();
    Ok((completed, remainder))
}

/// Parameters of a compression run.
#[derive(Debug, Clone)]
pub struct CompressionConfig {
    /// Block length l ≥ 1.
    pub l: usize,
    /// Typicality width δ > 0.
    pub delta: f64,
    /// Oversampling margin η ∈ (0, 1]; δ⁻² when unset.
    pub eta: Option<f64>,
    /// Fixed selection size overriding the α/β/c prescription.
    pub m_override: Option<u64>,
    /// Base RNG seed.
    pub seed: u64,
    /// Largest subset size scanned by the C5 diagnostic.
    pub nu: usize,
    /// Selection retries before reporting failure.
    pub max_attempts: u32,
    /// Cap on the ambient dimension d^l.
    pub cap_dim: usize,
    /// Cap on the word count m^l.
    pub cap_words: usize,
}

impl Default for CompressionConfig {
    fn default() -> Self {
        Self {
            l: 1,
            delta: 2.0,
            eta: None,
            m_override: None,
            seed: 0,
            nu: 2,
            max_attempts: 32,
            cap_dim: tol::CAP_DIM,
            cap_words: tol::CAP_WORDS,
        }
    }
}

/// Source ensemble and estimation-fidelity table for the statistics
/// diagnostics (C0, C1, C2).
#[derive(Debug, Clone)]
pub struct SourceData {
    /// States and priors averaging to ρ.
    pub ensemble: Ensemble,
    /// Estimation fidelity table F_ij.
    pub fidelity: FidelityMatrix,
}

/// One per-stage deviation aggregate with its analytic budget.
#[derive(Debug, Clone)]
pub struct StageSlack {
    /// Stage label ("B", "C", "D", "ω", "E").
    pub stage: &'static str,
    /// Observed aggregate (max over sites of the summed trace-norm
    /// deviations, or the lost trace weight for "ω").
    pub value: f64,
    /// Analytic budget.
    pub budget: f64,
    /// value ≤ budget (up to 1e-9).
    pub ok: bool,
}

/// One structural proposition verified on the constructed stages.
#[derive(Debug, Clone)]
pub struct PropCheck {
    /// Short label of the verified statement.
    pub name: &'static str,
    /// Worst signed margin over words (≥ 0 means the statement held with
    /// room to spare).
    pub worst: f64,
    /// worst ≥ −1e-9.
    pub ok: bool,
}

/// Deviation-condition values of the final measurement.
#[derive(Debug, Clone)]
pub struct ConditionTable {
    /// Fidelity deviation (needs source data).
    pub c0: Option<f64>,
    /// Site-averaged statistics deviation (needs source data).
    pub c1: Option<f64>,
    /// Worst per-state statistics deviation (needs source data).
    pub c2: Option<f64>,
    /// Site-averaged operator deviation.
    pub c2_half: f64,
    /// Worst-site operator deviation.
    pub c3: f64,
    /// Total operator deviation.
    pub c4: f64,
    /// Joint-marginal deviation up to subset size ν.
    pub c5: f64,
}

/// Everything a compression run produces.
#[derive(Debug, Clone)]
pub struct CompressionResult {
    /// Block length.
    pub l: usize,
    /// Typicality width δ.
    pub delta: f64,
    /// Oversampling margin η actually used.
    pub eta: f64,
    /// Base seed.
    pub seed: u64,
    /// Dimension the run operated on (support of ρ).
    pub support_dim: usize,
    /// Letters dropped for vanishing weight.
    pub dropped_letters: Vec<usize>,
    /// Letters with positive weight (the effective alphabet size).
    pub effective_alphabet: usize,
    /// Typical-set mass S.
    pub s_mass: f64,
    /// Number of typical words |T|.
    pub typical_words: usize,
    /// α: smallest nonzero eigenvalue of Π_typ ρ^{⊗l} Π_typ.
    pub exact_alpha: f64,
    /// β: operator-norm scale of the sampled summands.
    pub exact_beta: f64,
    /// c = (m+1)(d+1)/δ².
    pub c: f64,
    /// c̃: analytic marginal-deviation budget of the selection.
    pub c_tilde: f64,
    /// Whether δ exceeds √(2md), the regime the analytic budgets target.
    pub eq12_delta_ok: bool,
    /// Rank of the spectral cutoff.
    pub cutoff_rank: usize,
    /// Retained weight Tr(ωΠ).
    pub omega_weight: f64,
    /// Whether Tr(ωΠ) ≥ 1 − 2c.
    pub omega_weight_ok: bool,
    /// Number of i.i.d. draws M.
    pub m_draws: u64,
    /// Number of distinct selected outcomes (the M the rate reports).
    pub m_selected: usize,
    /// Rate (log₂ m_selected)/l in bits per site.
    pub rate_bits: f64,
    /// Entropy defect H(ρ) − Σ λ_j H(ρ̂_j) of the canonical ensemble.
    pub entropy_defect_bits: f64,
    /// Budget (m+1)(η + c̃ + δ√l/√M) the worst-site deviation C3 must meet.
    pub c3_budget: f64,
    /// Per-stage deviation aggregates Δ¹…Δ⁵ with budgets.
    pub stage_slacks: Vec<StageSlack>,
    /// Structural propositions verified on the stages.
    pub prop_checks: Vec<PropCheck>,
    /// Per-site operator deviations Σ_j ‖A^(k)_j − a_j‖ (empty on failure).
    pub marginal_deviations: Vec<f64>,
    /// Deviation conditions of the final measurement (None on failure).
    pub conditions: Option<ConditionTable>,
    /// Final POVM elements (empty on failure).
    pub elements: BTreeMap<Word, CMatrix>,
    /// Multiplicities of the selected words among the draws.
    pub multiplicities: BTreeMap<Word, u64>,
    /// Whether a selection attempt passed both checks.
    pub success: bool,
    /// Attempts consumed by the successful selection (0 when unsuccessful).
    pub success_attempts: u32,
    /// Every selection attempt in order.
    pub attempts: Vec<SelectionAttempt>,
}

/// max over sites of Σ_j ‖x_kj − y_kj‖₁ for two per-site tables of conjugated
/// marginals.
fn table_distance(xs: &[Vec<CMatrix>], ys: &[Vec<CMatrix>]) -> Result<f64> {
    let mut worst = 0.0f64;
    for (row_x, row_y) in xs.iter().zip(ys) {
        let mut s = 0.0;
        for (x, y) in row_x.iter().zip(row_y) {
            s += trace_norm(&(x - y))?;
        }
        worst = worst.max(s);
    }
    Ok(worst)
}

/// Conjugated marginal tables for every site of a family.
fn conjugated_tables(
    family: &BTreeMap<Word, CMatrix>,
    m: usize,
    l: usize,
    rho: &DensityMatrix,
) -> Result<Vec<Vec<CMatrix>>> {
    (0..l).map(|k| conjugated_marginal(family, m, k, rho)).collect()
}

/// Runs the whole staged construction on (ρ, a).
///
/// Rank-deficient ρ is restricted to its support first (together with `a` and
/// the source data); the result then lives on the support space, with
/// `support_dim` recording the restriction. The returned elements always form
/// an exact POVM when `success` is set; on selection failure the diagnostics
/// of the failed attempts are returned with empty elements.
pub fn compress(
    rho: &DensityMatrix,
    a: &Povm,
    config: &CompressionConfig,
    source: Option<&SourceData>,
) -> Result<CompressionResult> {
    if rho.dim() != a.dim() {
        return Err(Error::DimensionMismatch {
            context: format!("state dim {} vs POVM dim {}", rho.dim(), a.dim()),
        });
    }
    let l = config.l;
    if l == 0 {
        return Err(Error::Config("block length l must be ≥ 1".into()));
    }
    if !(config.delta > 0.0) {
        return Err(Error::Config(format!("δ must be positive, got {}", config.delta)));
    }
    let delta = config.delta;
    let eta = config.eta.unwrap_or(1.0 / (delta * delta));
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Config(format!(
            "oversampling margin η must lie in (0, 1], got {eta} (set it explicitly for δ < 1)"
        )));
    }
    if config.nu == 0 {
        return Err(Error::Config("ν must be ≥ 1".into()));
    }
    if config.max_attempts == 0 {
        return Err(Error::Config("max_attempts must be ≥ 1".into()));
    }
    if let Some(m_over) = config.m_override {
        if m_over == 0 {
            return Err(Error::Config("selection size override must be ≥ 1".into()));
        }
    }

    // Restrict to the support of ρ when necessary.
    let canon_full = canonical_ensemble(rho, a)?;
    let restricted = canon_full.support_dim < rho.dim();
    let (rho_w, a_w, source_w, canon) = if restricted {
        let basis = &canon_full.support_basis;
        let rho_w = DensityMatrix::new(basis.adjoint() * rho.matrix() * basis)?;
        let a_w =
            Povm::new(a.elements().iter().map(|e| basis.adjoint() * e * basis).collect())?;
        let source_w = match source {
            Some(s) => {
                let states: Result<Vec<DensityMatrix>> = s
                    .ensemble
                    .states()
                    .iter()
                    .map(|st| DensityMatrix::new(basis.adjoint() * st.matrix() * basis))
                    .collect();
                Some(SourceData {
                    ensemble: Ensemble::new(s.ensemble.probs().to_vec(), states?)?,
                    fidelity: s.fidelity.clone(),
                })
            }
            None => None,
        };
        let canon = canonical_ensemble(&rho_w, &a_w)?;
        (rho_w, a_w, source_w, canon)
    } else {
        (rho.clone(), a.clone(), source.cloned(), canon_full)
    };

    let d = rho_w.dim();
    let m = a_w.len();
    check_cap(d, l, config.cap_dim, "compress")?;
    check_cap(m, l, config.cap_words, "compress")?;
    let m_eff = canon.kept.len();

    // Outcome weights over the full alphabet (zero for dropped letters).
    let mut lambda = vec![0.0f64; m];
    for (idx, &j) in canon.kept.iter().enumerate() {
        lambda[j] = canon.ensemble.probs()[idx];
    }

    let pi_typ = typical_projector_capped(&rho_w, l, delta, config.cap_dim)?;
    let t = typical_sequences_capped(&lambda, l, delta, config.cap_words)?;

    let b = stage_b(&a_w, &rho_w, &canon, l, delta, config.cap_dim, config.cap_words)?;
    let c_st = stage_c(&b, &pi_typ)?;
    let d_st = stage_d(&c_st, &t)?;
    let cutoff = cutoff_projector(&d_st, &rho_w, delta, m_eff, &pi_typ)?;
    let e_st = stage_e(&d_st, &cutoff.projector, &rho_w)?;
    let beta = exact_beta(&e_st, &rho_w, &lambda, t.mass)?;

    let c = cutoff.c;
    let (mf, df) = (m_eff as f64, d as f64);
    let delta2 = delta * delta;
    let c_tilde = 2.0 * c + (mf + mf * mf * df + 5.0 * mf * df) / delta2;
    let m_draws = match config.m_override {
        Some(m_over) => m_over,
        None => choose_m(cutoff.exact_alpha, beta, c, eta)?,
    };

    let sel = random_select(
        &e_st,
        &t,
        &lambda,
        &pi_typ,
        &rho_w,
        &a_w,
        m_draws,
        eta,
        c_tilde,
        config.seed,
        config.max_attempts,
    )?;

    // Per-stage deviation aggregates Δ¹…Δ⁵ against their analytic budgets.
    let refs: Vec<Vec<CMatrix>> = {
        let row: Vec<CMatrix> =
            a_w.elements().iter().map(|e| rho_w.sqrt() * e * rho_w.sqrt()).collect();
        vec![row; l]
    };
    let tab_b = conjugated_tables(b.elements(), m, l, &rho_w)?;
    let tab_c = conjugated_tables(c_st.elements(), m, l, &rho_w)?;
    let tab_d = if d_st.is_empty() {
        vec![vec![CMatrix::zeros(d, d); m]; l]
    } else {
        conjugated_tables(d_st.elements(), m, l, &rho_w)?
    };
    let tab_e = if e_st.is_empty() {
        vec![vec![CMatrix::zeros(d, d); m]; l]
    } else {
        conjugated_tables(e_st.elements(), m, l, &rho_w)?
    };
    let slack = |stage: &'static str, value: f64, budget: f64| StageSlack {
        stage,
        value,
        budget,
        ok: value <= budget + 1e-9,
    };
    let stage_slacks = vec![
        slack("B", table_distance(&tab_b, &refs)?, mf * df / delta2),
        slack("C", table_distance(&tab_c, &tab_b)?, (mf * mf * df + 4.0 * mf * df) / delta2),
        slack("D", table_distance(&tab_d, &tab_c)?, mf / delta2),
        slack("ω", 1.0 - trace_re(&cutoff.omega), c),
        slack("E", table_distance(&tab_e, &tab_d)?, 2.0 * mf * c),
    ];

    // Structural propositions on the stages.
    let rho_l = tensor_power(rho_w.matrix(), l);
    let weight_of = |x: &CMatrix| trace_re(&(&rho_l * x));
    let mut p1_loewner = f64::INFINITY;
    let mut p1_trace = f64::INFINITY;
    let mut p2_trace = f64::INFINITY;
    let mut p4_trace = f64::INFINITY;
    for (w, bw) in b.elements() {
        let aw = product_povm_element(&a_w, w)?;
        p1_loewner = p1_loewner.min(min_eigenvalue(&(&aw - bw))?);
        p1_trace = p1_trace.min(weight_of(bw) - (1.0 - mf * df / delta2) * weight_of(&aw));
        let cw = c_st.get(w).expect("stage C keeps all words");
        p2_trace = p2_trace.min(weight_of(bw) - weight_of(cw));
    }
    let mut p3_trace = f64::INFINITY;
    let r_min = rho_w.min_support_eigenvalue();
    let p3_bound = 1.0 - 2.0 * mf.powi(3) * df / (r_min * r_min * delta2);
    for (w, dw) in d_st.elements() {
        let aw = product_povm_element(&a_w, w)?;
        p3_trace = p3_trace.min(weight_of(dw) - p3_bound * weight_of(&aw));
        let ew = e_st.get(w).expect("stage E keeps all words");
        p4_trace = p4_trace.min(weight_of(dw) - weight_of(ew));
    }
    let prop = |name: &'static str, worst: f64| PropCheck { name, worst, ok: worst >= -1e-9 };
    let prop_checks = vec![
        prop("B ≤ a (Löwner)", p1_loewner),
        prop("Tr ρ·B ≥ (1 − md/δ²)·Tr ρ·a", p1_trace),
        prop("Tr ρ·C ≤ Tr ρ·B", p2_trace),
        prop("Tr ρ·D ≥ (1 − 2m³d/(r²δ²))·Tr ρ·a on T", p3_trace),
        prop("Tr ρ·E ≤ Tr ρ·D", p4_trace),
    ];

    let dim = e_st.dim();
    let c3_budget = (mf + 1.0)
        * (eta + c_tilde + delta * (l as f64).sqrt() / (m_draws as f64).sqrt());

    let (elements, marginal_deviations, conditions) = if sel.success {
        let (elements, _remainder) = distribute_remainder(&sel.tilde, dim)?;
        // The completed family must be an exact POVM.
        let mut sum = CMatrix::zeros(dim, dim);
        for e in elements.values() {
            let min = min_eigenvalue(e)?;
            if min < -tol::PSD_ERROR {
                return Err(Error::NotPsd { min_eig: min });
            }
            sum += e;
        }
        let gap = (&sum - CMatrix::identity(dim, dim)).map(|x| x.norm()).max();
        if gap > 1e-12 {
            return Err(Error::InvalidObject {
                object: "CompressionResult",
                context: format!("completed family misses the identity by {gap:.3e}"),
            });
        }
        let deviations = marginal_deviation_table(&elements, &a_w, &rho_w)?;
        let ctx = ConditionContext {
            family: &elements,
            a: &a_w,
            rho: &rho_w,
            nu: config.nu,
            ensemble: source_w.as_ref().map(|s| &s.ensemble),
            fidelity: source_w.as_ref().map(|s| &s.fidelity),
        };
        let table = ConditionTable {
            c0: match source_w {
                Some(_) => Some(check_condition(Condition::C0, &ctx)?),
                None => None,
            },
            c1: match source_w {
                Some(_) => Some(check_condition(Condition::C1, &ctx)?),
                None => None,
            },
            c2: match source_w {
                Some(_) => Some(check_condition(Condition::C2, &ctx)?),
                None => None,
            },
            c2_half: check_condition(Condition::C2Half, &ctx)?,
            c3: check_condition(Condition::C3, &ctx)?,
            c4: check_condition(Condition::C4, &ctx)?,
            c5: check_condition(Condition::C5, &ctx)?,
        };
        (elements, deviations, Some(table))
    } else {
        (BTreeMap::new(), Vec::new(), None)
    };

    let m_selected = sel.counts.len();
    let success_attempts = if sel.success { sel.attempts.len() as u32 } else { 0 };
    Ok(CompressionResult {
        l,
        delta,
        eta,
        seed: config.seed,
        support_dim: d,
        dropped_letters: canon.dropped.clone(),
        effective_alphabet: m_eff,
        s_mass: t.mass,
        typical_words: t.words.len(),
        exact_alpha: cutoff.exact_alpha,
        exact_beta: beta,
        c,
        c_tilde,
        eq12_delta_ok: delta > (2.0 * mf * df).sqrt(),
        cutoff_rank: cutoff.rank,
        omega_weight: cutoff.omega_weight,
        omega_weight_ok: cutoff.weight_ok,
        m_draws,
        m_selected,
        rate_bits: (m_selected as f64).log2() / l as f64,
        entropy_defect_bits: crate::quantum::entropy_defect(&canon.ensemble)?,
        c3_budget,
        stage_slacks,
        prop_checks,
        marginal_deviations,
        conditions,
        elements,
        multiplicities: sel.counts,
        success: sel.success,
        success_attempts,
        attempts: sel.attempts,
    })
}
