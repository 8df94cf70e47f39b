//! Quantum domain layer: states, ensembles, measurements, entropies.
//!
//! The central construction is the *canonical ensemble* of a state–POVM pair
//! (ρ, a): weights λ_j = Tr(ρ a_j) and states ρ̂_j = √ρ a_j √ρ / λ_j. The
//! pretty-good measurement of that ensemble recovers the original POVM, which
//! makes the pair (ensemble ↔ measurement) an exact duality; both directions
//! live here. All entropies are in bits (logarithms base 2).
//!
//! Rank-deficient average states are handled by restriction to their support:
//! every canonical construction reports the support dimension it operated on.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, re, CMatrix, Spectrum};
use crate::tol;

/// Validated density operator with its eigendata precomputed.
///
/// Construction checks Hermiticity, positive semidefiniteness to
/// `−tol::PSD_CLAMP`, and unit trace to `tol::NORM_CHECK`; the canonical
/// spectrum, operator square root, and support pseudo-inverse square root are
/// computed once and cached.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    mat: CMatrix,
    spectrum: Spectrum,
    sqrt: CMatrix,
    inv_sqrt: CMatrix,
    rank: usize,
    min_support_eig: f64,
}

impl DensityMatrix {
    /// Validates and wraps a density operator.
    pub fn new(mat: CMatrix) -> Result<Self> {
        let spectrum = linalg::eig_hermitian(&mat)?;
        let min = spectrum.min_eigenvalue();
        if min < -tol::PSD_CLAMP {
            return Err(Error::NotPsd { min_eig: min });
        }
        let trace: Complex64 = mat.diagonal().iter().sum();
        if (trace - re(1.0)).norm() > tol::NORM_CHECK {
            return Err(Error::InvalidObject {
                object: "DensityMatrix",
                context: format!("trace is {trace}, expected 1"),
            });
        }
        let rank_tol = tol::RANK_REL * spectrum.operator_norm();
        let sqrt = spectrum.map(|x| x.max(0.0).sqrt());
        let inv_sqrt = spectrum.map(|x| if x > rank_tol { 1.0 / x.sqrt() } else { 0.0 });
        let rank = spectrum.eigenvalues.iter().filter(|&&x| x > rank_tol).count();
        let min_support_eig = spectrum
            .eigenvalues
            .iter()
            .copied()
            .filter(|&x| x > rank_tol)
            .fold(f64::INFINITY, f64::min);
        Ok(Self { mat, spectrum, sqrt, inv_sqrt, rank, min_support_eig })
    }

    /// Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    /// The underlying operator.
    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    /// Canonical eigendecomposition (descending eigenvalues).
    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    /// √ρ.
    pub fn sqrt(&self) -> &CMatrix {
        &self.sqrt
    }

    /// √ρ⁻¹ on the support of ρ (zero on the kernel).
    pub fn inv_sqrt(&self) -> &CMatrix {
        &self.inv_sqrt
    }

    /// Rank of the support.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Smallest nonzero eigenvalue r = min spec⁺(ρ).
    pub fn min_support_eigenvalue(&self) -> f64 {
        self.min_support_eig
    }

    /// Von Neumann entropy H(ρ) = −Σ λ_t log₂ λ_t, in bits.
    pub fn entropy_bits(&self) -> f64 {
        entropy_of_weights(&self.spectrum.eigenvalues)
    }
}

/// Shannon entropy in bits of a (sub)probability vector; negatives from
/// numerical clamping are treated as zero.
pub fn entropy_of_weights(weights: &[f64]) -> f64 {
    let h: f64 = weights
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum();
    h.max(0.0)
}

/// Validated measurement: PSD elements summing to the identity.
#[derive(Debug, Clone)]
pub struct Povm {
    elements: Vec<CMatrix>,
    dim: usize,
}

impl Povm {
    /// Validates PSD-ness of every element and completeness Σ_j a_j = I.
    pub fn new(elements: Vec<CMatrix>) -> Result<Self> {
        let dim = check_psd_family("Povm", &elements)?;
        let total = elements.iter().fold(CMatrix::zeros(dim, dim), |acc, e| acc + e);
        let gap = linalg::operator_norm(&(total - CMatrix::identity(dim, dim)))?;
        if gap > tol::COMPLETENESS {
            return Err(Error::InvalidObject {
                object: "Povm",
                context: format!("elements sum to I only within {gap:.3e}"),
            });
        }
        Ok(Self { elements, dim })
    }

    /// Projective measurement onto the standard basis of dimension `d`.
    pub fn computational(d: usize) -> Self {
        let elements = (0..d)
            .map(|j| {
                let mut p = CMatrix::zeros(d, d);
                p[(j, j)] = re(1.0);
                p
            })
            .collect();
        Self { elements, dim: d }
    }

    /// The trivial one-outcome measurement {I}.
    pub fn trivial(d: usize) -> Self {
        Self { elements: vec![CMatrix::identity(d, d)], dim: d }
    }

    /// Number of outcomes.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    /// True when the measurement has no outcomes (never after validation).
    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// All elements, outcome-ordered.
    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    /// Element for outcome `j`.
    pub fn element(&self, j: usize) -> &CMatrix {
        &self.elements[j]
    }
}

/// Measurement fragment: PSD elements whose sum is only *upper bounded* by
/// the identity.
#[derive(Debug, Clone)]
pub struct SubPovm {
    elements: Vec<CMatrix>,
    dim: usize,
}

impl SubPovm {
    /// Validates PSD-ness and Σ elements ≤ I (Löwner, tolerance 1e-9).
    pub fn new(elements: Vec<CMatrix>, dim: usize) -> Result<Self> {
        if !elements.is_empty() {
            let got = check_psd_family("SubPovm", &elements)?;
            if got != dim {
                return Err(Error::DimensionMismatch {
                    context: format!("SubPovm: elements are {got}-dimensional, expected {dim}"),
                });
            }
        }
        let total = elements.iter().fold(CMatrix::zeros(dim, dim), |acc, e| acc + e);
        if !linalg::loewner_leq(&total, &CMatrix::identity(dim, dim), tol::LOEWNER)? {
            return Err(Error::InvalidObject {
                object: "SubPovm",
                context: "element sum exceeds the identity".into(),
            });
        }
        Ok(Self { elements, dim })
    }

    /// Number of elements.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    /// True when the fragment has no elements.
    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// All elements.
    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }
}

/// Checks a family of operators for shared dimension, Hermiticity, and
/// PSD-ness; returns the common dimension.
fn check_psd_family(object: &'static str, elements: &[CMatrix]) -> Result<usize> {
    let Some(first) = elements.first() else {
        return Err(Error::InvalidObject { object, context: "no elements".into() });
    };
    let dim = first.nrows();
    for (j, e) in elements.iter().enumerate() {
        if e.nrows() != dim || e.ncols() != dim {
            return Err(Error::DimensionMismatch {
                context: format!("{object}: element {j} is {}×{}", e.nrows(), e.ncols()),
            });
        }
        let min = linalg::min_eigenvalue(e)?;
        if min < -tol::PSD_CLAMP {
            return Err(Error::NotPsd { min_eig: min });
        }
    }
    Ok(dim)
}

/// Weighted family of states.
#[derive(Debug, Clone)]
pub struct Ensemble {
    probs: Vec<f64>,
    states: Vec<DensityMatrix>,
}

impl Ensemble {
    /// Validates lengths, nonnegativity, normalization, and equal dimensions.
    pub fn new(probs: Vec<f64>, states: Vec<DensityMatrix>) -> Result<Self> {
        if probs.len() != states.len() || states.is_empty() {
            return Err(Error::InvalidObject {
                object: "Ensemble",
                context: format!("{} probs vs {} states", probs.len(), states.len()),
            });
        }
        if let Some(p) = probs.iter().find(|&&p| p < 0.0) {
            return Err(Error::InvalidObject {
                object: "Ensemble",
                context: format!("negative probability {p}"),
            });
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > tol::NORM_CHECK {
            return Err(Error::InvalidObject {
                object: "Ensemble",
                context: format!("probabilities sum to {sum}"),
            });
        }
        let dim = states[0].dim();
        if states.iter().any(|s| s.dim() != dim) {
            return Err(Error::DimensionMismatch {
                context: "Ensemble: states of unequal dimension".into(),
            });
        }
        Ok(Self { probs, states })
    }

    /// Number of members.
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    /// True when the ensemble has no members (never after validation).
    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Hilbert-space dimension of the member states.
    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    /// Weights.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Member states.
    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }
}

/// Figure-of-merit matrix F_ij for estimation fidelity; entries bounded by 1
/// in modulus.
#[derive(Debug, Clone)]
pub struct FidelityMatrix {
    entries: DMatrix<f64>,
}

impl FidelityMatrix {
    /// Validates the bound |F_ij| ≤ 1.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if let Some(bad) = entries.iter().find(|x| x.abs() > 1.0 + 1e-12) {
            return Err(Error::InvalidObject {
                object: "FidelityMatrix",
                context: format!("entry {bad} exceeds 1 in modulus"),
            });
        }
        Ok(Self { entries })
    }

    /// Identity figure of merit F_ij = δ_ij.
    pub fn kronecker_delta(n: usize) -> Self {
        Self { entries: DMatrix::identity(n, n) }
    }

    /// Constant figure of merit F_ij ≡ c.
    pub fn constant(n: usize, m: usize, c: f64) -> Result<Self> {
        Self::new(DMatrix::from_element(n, m, c))
    }

    /// Number of source symbols (rows).
    pub fn n_states(&self) -> usize {
        self.entries.nrows()
    }

    /// Number of outcomes (columns).
    pub fn n_outcomes(&self) -> usize {
        self.entries.ncols()
    }

    /// Entry F_ij.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }
}

/// Measurement instrument: per outcome j a list of Kraus operators V_{jν}
/// with Σ_ν V†_{jν} V_{jν} = a_j.
#[derive(Debug, Clone)]
pub struct KrausInstrument {
    kraus: Vec<Vec<CMatrix>>,
    povm: Povm,
}

impl KrausInstrument {
    /// Validates the Kraus decomposition against its POVM.
    pub fn new(kraus: Vec<Vec<CMatrix>>, povm: Povm) -> Result<Self> {
        if kraus.len() != povm.len() {
            return Err(Error::DimensionMismatch {
                context: format!("{} Kraus lists vs {} outcomes", kraus.len(), povm.len()),
            });
        }
        let d = povm.dim();
        for (j, vs) in kraus.iter().enumerate() {
            let mut sum = CMatrix::zeros(d, d);
            for v in vs {
                if v.ncols() != d {
                    return Err(Error::DimensionMismatch {
                        context: format!("Kraus operator for outcome {j} acts on {} dims", v.ncols()),
                    });
                }
                sum += v.adjoint() * v;
            }
            let gap = linalg::operator_norm(&(sum - povm.element(j)))?;
            if gap > tol::COMPLETENESS {
                return Err(Error::InvalidObject {
                    object: "KrausInstrument",
                    context: format!("outcome {j}: Σ V†V misses its element by {gap:.3e}"),
                });
            }
        }
        Ok(Self { kraus, povm })
    }

    /// The canonical single-Kraus instrument V_j = √a_j.
    pub fn from_povm_sqrt(povm: &Povm) -> Result<Self> {
        let kraus = povm
            .elements()
            .iter()
            .map(|a| linalg::op_sqrt(a).map(|s| vec![s]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(kraus, povm.clone())
    }

    /// Kraus operators of outcome `j`.
    pub fn kraus(&self, j: usize) -> &[CMatrix] {
        &self.kraus[j]
    }

    /// The associated POVM.
    pub fn povm(&self) -> &Povm {
        &self.povm
    }
}

/// H(ρ) in bits.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    rho.entropy_bits()
}

/// Average state ρ̄ = Σ_i p_i ρ_i.
pub fn ensemble_average(e: &Ensemble) -> Result<DensityMatrix> {
    let d = e.dim();
    let mut avg = CMatrix::zeros(d, d);
    for (p, s) in e.probs().iter().zip(e.states()) {
        avg += s.matrix() * re(*p);
    }
    DensityMatrix::new(avg)
}

/// Canonical ensemble of a state–measurement pair, together with the support
/// bookkeeping (constructions run on the support of ρ when it is rank
/// deficient).
#[derive(Debug, Clone)]
pub struct CanonicalEnsemble {
    /// Weights λ_j (kept outcomes only) and states ρ̂_j on the support of ρ.
    pub ensemble: Ensemble,
    /// Outcome indices kept (λ_j above the weight cutoff), in order.
    pub kept: Vec<usize>,
    /// Outcome indices dropped for vanishing weight.
    pub dropped: Vec<usize>,
    /// Dimension of the support of ρ the construction ran on.
    pub support_dim: usize,
    /// Isometry (d × support_dim) mapping support coordinates back into the
    /// original space; the identity when ρ is full rank.
    pub support_basis: CMatrix,
}

/// Canonical ensemble λ_j = Tr(ρ a_j), ρ̂_j = √ρ a_j √ρ / λ_j.
///
/// Outcomes with λ_j ≤ `tol::WEIGHT` are dropped and reported. When ρ is rank
/// deficient the construction restricts to its support first.
pub fn canonical_ensemble(rho: &DensityMatrix, a: &Povm) -> Result<CanonicalEnsemble> {
    if rho.dim() != a.dim() {
        return Err(Error::DimensionMismatch {
            context: format!("state dim {} vs POVM dim {}", rho.dim(), a.dim()),
        });
    }
    let d = rho.dim();
    let r = rho.rank();
    // Support isometry: eigenvector columns of the nonzero eigenvalues.
    let (rho_s, elements, basis) = if r == d {
        (rho.clone(), a.elements().to_vec(), CMatrix::identity(d, d))
    } else {
        let basis = rho.spectrum().eigenvectors.columns(0, r).clone_owned();
        let rho_s = DensityMatrix::new(&basis.adjoint() * rho.matrix() * &basis)?;
        let restricted = a.elements().iter().map(|e| &basis.adjoint() * e * &basis).collect();
        (rho_s, restricted, basis)
    };
    let sq = rho_s.sqrt();
    let mut weights = Vec::new();
    let mut states = Vec::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (j, e) in elements.iter().enumerate() {
        let lam = (rho_s.matrix() * e).diagonal().iter().sum::<Complex64>().re;
        if lam <= tol::WEIGHT {
            dropped.push(j);
            continue;
        }
        let state = sq * e * sq * re(1.0 / lam);
        weights.push(lam);
        states.push(DensityMatrix::new(state)?);
        kept.push(j);
    }
    if kept.is_empty() {
        return Err(Error::AllWeightsZero(tol::WEIGHT));
    }
    Ok(CanonicalEnsemble {
        ensemble: Ensemble::new(weights, states)?,
        kept,
        dropped,
        support_dim: r,
        support_basis: basis,
    })
}

/// Pretty-good measurement of an ensemble, with support bookkeeping.
#[derive(Debug, Clone)]
pub struct PrettyGoodMeasurement {
    /// The measurement S_i = √ρ̄⁻¹ μ_i σ_i √ρ̄⁻¹, complete on the support.
    pub povm: Povm,
    /// Dimension of the support of the average state.
    pub support_dim: usize,
    /// True when a rank-deficient average forced restriction to its support.
    pub restricted: bool,
}

/// Pretty-good measurement S_i = √ρ̄⁻¹ μ_i σ_i √ρ̄⁻¹ of the ensemble.
///
/// When the average state ρ̄ is rank deficient the measurement is built on its
/// support (where it is a complete POVM) and the restriction is reported.
pub fn pretty_good_measurement(e: &Ensemble) -> Result<PrettyGoodMeasurement> {
    let avg = ensemble_average(e)?;
    let d = avg.dim();
    let r = avg.rank();
    let (inv_sqrt, states, restricted): (CMatrix, Vec<CMatrix>, bool) = if r == d {
        (avg.inv_sqrt().clone(), e.states().iter().map(|s| s.matrix().clone()).collect(), false)
    } else {
        let basis = avg.spectrum().eigenvectors.columns(0, r).clone_owned();
        let avg_s = DensityMatrix::new(&basis.adjoint() * avg.matrix() * &basis)?;
        let states = e
            .states()
            .iter()
            .map(|s| &basis.adjoint() * s.matrix() * &basis)
            .collect();
        (avg_s.inv_sqrt().clone(), states, true)
    };
    let elements = e
        .probs()
        .iter()
        .zip(&states)
        .map(|(mu, sigma)| &inv_sqrt * sigma * &inv_sqrt * re(*mu))
        .collect();
    Ok(PrettyGoodMeasurement { povm: Povm::new(elements)?, support_dim: r, restricted })
}

/// Entropy defect I(μ;σ) = H(ρ̄) − Σ_i μ_i H(σ_i), in bits.
pub fn entropy_defect(e: &Ensemble) -> Result<f64> {
    Ok(ensemble_average(e)?.entropy_bits() - conditional_entropy(e))
}

/// Conditional entropy H(σ|μ) = Σ_i μ_i H(σ_i), in bits.
pub fn conditional_entropy(e: &Ensemble) -> f64 {
    e.probs()
        .iter()
        .zip(e.states())
        .map(|(p, s)| p * s.entropy_bits())
        .sum()
}

/// Estimation fidelity F(a) = Σ_ij p_i Tr(ρ_i a_j) F_ij.
pub fn single_letter_fidelity(e: &Ensemble, f: &FidelityMatrix, a: &Povm) -> Result<f64> {
    if f.n_states() != e.len() || f.n_outcomes() != a.len() {
        return Err(Error::DimensionMismatch {
            context: format!(
                "fidelity matrix is {}×{}, ensemble has {} states, POVM {} outcomes",
                f.n_states(),
                f.n_outcomes(),
                e.len(),
                a.len()
            ),
        });
    }
    if e.dim() != a.dim() {
        return Err(Error::DimensionMismatch {
            context: format!("ensemble dim {} vs POVM dim {}", e.dim(), a.dim()),
        });
    }
    let mut total = 0.0;
    for (i, (p, s)) in e.probs().iter().zip(e.states()).enumerate() {
        for (j, aj) in a.elements().iter().enumerate() {
            let prob = (s.matrix() * aj).diagonal().iter().sum::<Complex64>().re;
            total += p * prob * f.get(i, j);
        }
    }
    Ok(total)
}

/// Post-measurement state σ_j = Σ_ν V_{jν} ρ V†_{jν} / Tr(ρ a_j) and the
/// outcome probability Tr(ρ a_j).
pub fn post_measurement_states(
    ins: &KrausInstrument,
    rho_in: &DensityMatrix,
    j: usize,
) -> Result<(DensityMatrix, f64)> {
    let d = rho_in.dim();
    if ins.povm().dim() != d {
        return Err(Error::DimensionMismatch {
            context: format!("instrument dim {} vs state dim {d}", ins.povm().dim()),
        });
    }
    let mut raw = CMatrix::zeros(d, d);
    for v in ins.kraus(j) {
        raw += v * rho_in.matrix() * v.adjoint();
    }
    let prob = raw.diagonal().iter().sum::<Complex64>().re;
    if prob <= tol::WEIGHT {
        return Err(Error::UnreachableOutcome { outcome: j, weight: prob });
    }
    Ok((DensityMatrix::new(raw * re(1.0 / prob))?, prob))
}

/// Spectral comparison of the conjugate pair √ρ a_j √ρ and √a_j ρ √a_j.
#[derive(Debug, Clone)]
pub struct ConjugacyCheck {
    /// Spectrum of √ρ a_j √ρ, descending.
    pub spectrum_1: Vec<f64>,
    /// Spectrum of √a_j ρ √a_j, descending.
    pub spectrum_2: Vec<f64>,
    /// max_t |λ⁽¹⁾_t − λ⁽²⁾_t|.
    pub max_gap: f64,
}

/// Verifies that √ρ a_j √ρ and √a_j ρ √a_j share a spectrum (they are
/// conjugate via the polar decomposition of √a_j √ρ).
pub fn spectrum_conjugacy_check(rho: &DensityMatrix, a_j: &CMatrix) -> Result<ConjugacyCheck> {
    if a_j.nrows() != rho.dim() || a_j.ncols() != rho.dim() {
        return Err(Error::DimensionMismatch {
            context: format!("element is {}×{}, state dim {}", a_j.nrows(), a_j.ncols(), rho.dim()),
        });
    }
    let sq_rho = rho.sqrt();
    let sq_a = linalg::op_sqrt(a_j)?;
    let spectrum_1 = linalg::eig_hermitian(&(sq_rho * a_j * sq_rho))?.eigenvalues;
    let spectrum_2 = linalg::eig_hermitian(&(&sq_a * rho.matrix() * &sq_a))?.eigenvalues;
    let max_gap = spectrum_1
        .iter()
        .zip(&spectrum_2)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f64, f64::max);
    Ok(ConjugacyCheck { spectrum_1, spectrum_2, max_gap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, from_real_rows, operator_distance, random};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn qubit(p: f64) -> DensityMatrix {
        DensityMatrix::new(diag_real(&[p, 1.0 - p])).unwrap()
    }

    fn plus_state() -> DensityMatrix {
        DensityMatrix::new(from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]])).unwrap()
    }

    fn pm_basis_povm() -> Povm {
        let plus = from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let minus = from_real_rows(&[&[0.5, -0.5], &[-0.5, 0.5]]);
        Povm::new(vec![plus, minus]).unwrap()
    }

    #[test]
    fn entropy_of_known_states() {
        assert!((qubit(0.5).entropy_bits() - 1.0).abs() < 1e-12);
        assert!(qubit(1.0).entropy_bits().abs() < 1e-12);
        // −0.25 log₂ 0.25 − 0.75 log₂ 0.75
        assert!((qubit(0.25).entropy_bits() - 0.811278).abs() < 1e-6);
    }

    #[test]
    fn density_matrix_rejects_bad_trace_and_negativity() {
        assert!(DensityMatrix::new(diag_real(&[0.7, 0.7])).is_err());
        assert!(DensityMatrix::new(diag_real(&[1.2, -0.2])).is_err());
    }

    #[test]
    fn average_of_mixed_pair() {
        let e = Ensemble::new(vec![0.5, 0.5], vec![qubit(1.0), plus_state()]).unwrap();
        let avg = ensemble_average(&e).unwrap();
        let expect = from_real_rows(&[&[0.75, 0.25], &[0.25, 0.25]]);
        assert!(operator_distance(avg.matrix(), &expect).unwrap() < 1e-12);
    }

    #[test]
    fn canonical_ensemble_projective_cases() {
        let ce = canonical_ensemble(&qubit(0.7), &Povm::computational(2)).unwrap();
        assert!((ce.ensemble.probs()[0] - 0.7).abs() < 1e-12);
        assert!((ce.ensemble.probs()[1] - 0.3).abs() < 1e-12);
        for (j, s) in ce.ensemble.states().iter().enumerate() {
            let mut p = CMatrix::zeros(2, 2);
            p[(j, j)] = re(1.0);
            assert!(operator_distance(s.matrix(), &p).unwrap() < 1e-10);
        }
        assert!(ce.dropped.is_empty());
        assert_eq!(ce.support_dim, 2);

        let ce = canonical_ensemble(&qubit(0.5), &pm_basis_povm()).unwrap();
        assert!((ce.ensemble.probs()[0] - 0.5).abs() < 1e-12);
        let plus = from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]);
        assert!(operator_distance(ce.ensemble.states()[0].matrix(), &plus).unwrap() < 1e-10);
    }

    #[test]
    fn canonical_ensemble_drops_unreachable_outcomes() {
        // ρ = |0⟩⟨0| with the computational measurement: outcome 1 never fires.
        let ce = canonical_ensemble(&qubit(1.0), &Povm::computational(2)).unwrap();
        assert_eq!(ce.kept, vec![0]);
        assert_eq!(ce.dropped, vec![1]);
        assert_eq!(ce.support_dim, 1);
        assert!((ce.ensemble.probs()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pgm_round_trips_canonical_ensemble() {
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        for _ in 0..20 {
            let rho = DensityMatrix::new(random::density(3, &mut rng)).unwrap();
            let a = Povm::new(random::povm(3, 4, &mut rng)).unwrap();
            let ce = canonical_ensemble(&rho, &a).unwrap();
            let pgm = pretty_good_measurement(&ce.ensemble).unwrap();
            assert_eq!(pgm.povm.len(), a.len());
            for (got, want) in pgm.povm.elements().iter().zip(a.elements()) {
                assert!(operator_distance(got, want).unwrap() <= 1e-9);
            }
            // The average of the canonical ensemble is the original state.
            let avg = ensemble_average(&ce.ensemble).unwrap();
            assert!(operator_distance(avg.matrix(), rho.matrix()).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn pgm_of_orthogonal_pure_states_is_projective() {
        let e = Ensemble::new(vec![0.5, 0.5], vec![qubit(1.0), qubit(0.0)]).unwrap();
        let pgm = pretty_good_measurement(&e).unwrap();
        assert!(!pgm.restricted);
        for (j, el) in pgm.povm.elements().iter().enumerate() {
            assert!(
                operator_distance(el, Povm::computational(2).element(j)).unwrap() < 1e-10
            );
        }
    }

    #[test]
    fn pgm_sums_to_identity_for_skew_pair() {
        let e = Ensemble::new(vec![0.5, 0.5], vec![qubit(1.0), plus_state()]).unwrap();
        let pgm = pretty_good_measurement(&e).unwrap();
        let total = pgm
            .povm
            .elements()
            .iter()
            .fold(CMatrix::zeros(2, 2), |acc, e| acc + e);
        assert!(operator_distance(&total, &CMatrix::identity(2, 2)).unwrap() < 1e-9);
    }

    #[test]
    fn entropy_defect_projective_flat() {
        let ce = canonical_ensemble(&qubit(0.5), &Povm::computational(2)).unwrap();
        assert!((entropy_defect(&ce.ensemble).unwrap() - 1.0).abs() < 1e-10);
        let ce = canonical_ensemble(&qubit(0.5), &Povm::trivial(2)).unwrap();
        assert!(entropy_defect(&ce.ensemble).unwrap().abs() < 1e-10);
    }

    #[test]
    fn conditional_entropy_weighted_sum() {
        // Solve h₂(p) = ½ by bisection (independent scalar oracle), then the
        // pair {(I/2, 0.3), (diag(p,1−p), 0.7)} has conditional entropy 0.65.
        let h2 = |p: f64| -p * p.log2() - (1.0 - p) * (1.0 - p).log2();
        let (mut lo, mut hi) = (1e-9, 0.5);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h2(mid) < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let p = 0.5 * (lo + hi);
        let e = Ensemble::new(vec![0.3, 0.7], vec![qubit(0.5), qubit(p)]).unwrap();
        assert!((conditional_entropy(&e) - 0.65).abs() < 1e-9);
        // Pure-state ensembles carry no conditional entropy.
        let pure = Ensemble::new(vec![0.5, 0.5], vec![qubit(1.0), plus_state()]).unwrap();
        assert!(conditional_entropy(&pure).abs() < 1e-10);
    }

    #[test]
    fn fidelity_of_matched_projective_measurement() {
        let e = Ensemble::new(vec![0.4, 0.6], vec![qubit(1.0), qubit(0.0)]).unwrap();
        let f = FidelityMatrix::kronecker_delta(2);
        let got = single_letter_fidelity(&e, &f, &Povm::computational(2)).unwrap();
        assert!((got - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fidelity_of_constant_merit_is_the_constant() {
        let e = Ensemble::new(vec![0.4, 0.6], vec![qubit(0.9), plus_state()]).unwrap();
        let f = FidelityMatrix::constant(2, 2, 0.37).unwrap();
        let got = single_letter_fidelity(&e, &f, &pm_basis_povm()).unwrap();
        assert!((got - 0.37).abs() < 1e-12);
    }

    #[test]
    fn fidelity_matches_scalar_oracle() {
        // Explicit scalar sum for {(|0⟩⟨0|,0.4), (|1⟩⟨1|,0.6)} against the ±
        // basis: Tr(ρ_i a_±) = ½ for every i.
        let e = Ensemble::new(vec![0.4, 0.6], vec![qubit(1.0), qubit(0.0)]).unwrap();
        let f = FidelityMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.3, 0.8])).unwrap();
        let want = 0.4 * (0.5 * 1.0 + 0.5 * 0.2) + 0.6 * (0.5 * 0.3 + 0.5 * 0.8);
        let got = single_letter_fidelity(&e, &f, &pm_basis_povm()).unwrap();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn fidelity_rejects_shape_mismatch() {
        let e = Ensemble::new(vec![1.0], vec![qubit(0.5)]).unwrap();
        let f = FidelityMatrix::kronecker_delta(2);
        assert!(single_letter_fidelity(&e, &f, &Povm::computational(2)).is_err());
    }

    #[test]
    fn post_measurement_via_sqrt_kraus() {
        let a = pm_basis_povm();
        let ins = KrausInstrument::from_povm_sqrt(&a).unwrap();
        let rho = qubit(0.7);
        let (sigma, prob) = post_measurement_states(&ins, &rho, 0).unwrap();
        let sq = linalg::op_sqrt(a.element(0)).unwrap();
        let want = &sq * rho.matrix() * &sq * re(1.0 / prob);
        assert!(operator_distance(sigma.matrix(), &want).unwrap() < 1e-12);
        assert!((prob - 0.5).abs() < 1e-12);
    }

    #[test]
    fn post_measurement_trivial_instrument() {
        let ins = KrausInstrument::from_povm_sqrt(&Povm::trivial(2)).unwrap();
        let rho = plus_state();
        let (sigma, prob) = post_measurement_states(&ins, &rho, 0).unwrap();
        assert!((prob - 1.0).abs() < 1e-12);
        assert!(operator_distance(sigma.matrix(), rho.matrix()).unwrap() < 1e-12);
    }

    #[test]
    fn post_measurement_dephasing() {
        // Instrument with one outcome a = I and Kraus {|0⟩⟨0|, |1⟩⟨1|}
        // dephases |+⟩⟨+| to I/2.
        let p0 = diag_real(&[1.0, 0.0]);
        let p1 = diag_real(&[0.0, 1.0]);
        let ins = KrausInstrument::new(vec![vec![p0, p1]], Povm::trivial(2)).unwrap();
        let (sigma, prob) = post_measurement_states(&ins, &plus_state(), 0).unwrap();
        assert!((prob - 1.0).abs() < 1e-12);
        assert!(operator_distance(sigma.matrix(), &diag_real(&[0.5, 0.5])).unwrap() < 1e-12);
    }

    #[test]
    fn post_measurement_unreachable_outcome() {
        let ins = KrausInstrument::from_povm_sqrt(&Povm::computational(2)).unwrap();
        let err = post_measurement_states(&ins, &qubit(1.0), 1);
        assert!(matches!(err, Err(Error::UnreachableOutcome { outcome: 1, .. })));
    }

    #[test]
    fn conjugate_spectra_agree() {
        let rho = qubit(0.7);
        let check = spectrum_conjugacy_check(&rho, &diag_real(&[0.6, 0.4])).unwrap();
        assert!(check.max_gap < 1e-14);
        let check = spectrum_conjugacy_check(&rho, &CMatrix::identity(2, 2)).unwrap();
        assert!((check.spectrum_1[0] - 0.7).abs() < 1e-12);
        assert!((check.spectrum_2[1] - 0.3).abs() < 1e-12);

        let mut rng = ChaCha12Rng::seed_from_u64(43);
        for _ in 0..20 {
            let rho = DensityMatrix::new(random::density(2, &mut rng)).unwrap();
            let a = random::povm(2, 3, &mut rng);
            let check = spectrum_conjugacy_check(&rho, &a[0]).unwrap();
            assert!(check.max_gap <= 1e-9);
        }
    }

    #[test]
    fn single_kraus_post_state_entropy_matches_canonical_state() {
        let mut rng = ChaCha12Rng::seed_from_u64(47);
        for _ in 0..10 {
            let rho = DensityMatrix::new(random::density(3, &mut rng)).unwrap();
            let a = Povm::new(random::povm(3, 3, &mut rng)).unwrap();
            let ins = KrausInstrument::from_povm_sqrt(&a).unwrap();
            let ce = canonical_ensemble(&rho, &a).unwrap();
            for (slot, &j) in ce.kept.iter().enumerate() {
                let (sigma, prob) = post_measurement_states(&ins, &rho, j).unwrap();
                assert!((prob - ce.ensemble.probs()[slot]).abs() < 1e-10);
                let h_sigma = sigma.entropy_bits();
                let h_hat = ce.ensemble.states()[slot].entropy_bits();
                assert!((h_sigma - h_hat).abs() <= 1e-8);
            }
        }
    }
}
